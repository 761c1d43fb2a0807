"""Synthetic-control weight estimation on the probability simplex.

The weight fit minimizes (x0 - X1 w)' V (x0 - X1 w) over nonnegative
weights summing to one, where x0 stacks the treated unit's pre-period
outcomes and X1 the donors'. V is a trace-one diagonal; when pre periods
are subsampled, an outer direct search picks the diagonal that minimizes
prediction error over every pre period.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DataError
from .panel import PanelSeries

_PG_TOL = 1e-10
_F_TOL = 1e-14
_MAX_ITER = 100_000
_SIMPLEX_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class SynthProblem:
    """One treated unit, its donor pool, and the period split on a panel."""

    treated: str
    donors: tuple[str, ...]
    pre_periods: tuple[int, ...]
    all_pre_periods: tuple[int, ...]
    post_periods: tuple[int, ...]
    Y: PanelSeries

    def __post_init__(self):
        if self.treated in self.donors:
            raise DataError(f"treated unit {self.treated!r} cannot be its own donor")
        if len(self.donors) < 2:
            raise DataError(f"need at least 2 donors, got {len(self.donors)}")
        if not self.pre_periods:
            raise DataError("no fitting periods")
        if not set(self.pre_periods) <= set(self.all_pre_periods):
            raise DataError("fitting periods must be a subset of the full pre window")
        for t in (*self.all_pre_periods, *self.post_periods):
            self.Y.period_index(t)

    def treated_vector(self, periods: Sequence[int]) -> np.ndarray:
        row = self.Y.series(self.treated)
        return np.array([row[self.Y.period_index(t)] for t in periods])

    def donor_matrix(self, periods: Sequence[int]) -> np.ndarray:
        idx = [self.Y.period_index(t) for t in periods]
        rows = [self.Y.series(d)[idx] for d in self.donors]
        return np.array(rows).T  # periods x donors


@dataclass(frozen=True, eq=False)
class WeightVector:
    """Nonnegative donor weights summing to one."""

    w: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float)
        if w.ndim != 1:
            raise DataError("weights must be a vector")
        if w.min() < -_SIMPLEX_TOL or abs(w.sum() - 1.0) > _SIMPLEX_TOL:
            raise DataError("weights violate simplex constraints")
        w.setflags(write=False)
        object.__setattr__(self, "w", w)


@dataclass(frozen=True, eq=False)
class SynthFit:
    """Fitted weights plus the quantities every downstream step consumes."""

    weights: WeightVector
    v_diag: np.ndarray
    effects: np.ndarray  # treated minus synthetic, over the full panel period range
    rmse_pre: float


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex (sort algorithm)."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, v.size + 1)
    rho = idx[u - css / idx > 0][-1]
    theta = css[rho - 1] / rho
    return np.maximum(v - theta, 0.0)


def _equality_solve(A: np.ndarray, b: np.ndarray, idx: np.ndarray, n: int) -> np.ndarray | None:
    """Minimizer over {w: sum w = 1, w zero off idx}, ignoring nonnegativity.

    Least-squares on the KKT system handles rank-deficient supports
    (duplicate donors) deterministically.
    """
    k = idx.size
    kkt = np.zeros((k + 1, k + 1))
    kkt[:k, :k] = 2.0 * A[np.ix_(idx, idx)]
    kkt[:k, k] = 1.0
    kkt[k, :k] = 1.0
    rhs = np.concatenate([2.0 * b[idx], [1.0]])
    sol, *_ = np.linalg.lstsq(kkt, rhs, rcond=None)
    if not np.all(np.isfinite(sol)):
        return None
    target = np.zeros(n)
    target[idx] = sol[:k]
    return target


def _active_set_qp(A: np.ndarray, b: np.ndarray, w_start: np.ndarray) -> np.ndarray | None:
    """Primal active-set refinement seeded from a feasible iterate.

    Alternates equality solves on the working support with ratio-test
    drops and most-negative-gradient additions; returns a simplex point
    that satisfies the support KKT conditions, or None when the cycle cap
    is hit (the caller's projected-gradient loop then keeps going).
    """
    n = b.size
    w = np.clip(w_start, 0.0, None)
    total = w.sum()
    if total <= 0.0 or not np.isfinite(total):
        return None
    w = w / total
    support = w > 1e-15
    for _ in range(8 * n + 16):
        idx = np.flatnonzero(support)
        if idx.size == 0:
            return None
        target = _equality_solve(A, b, idx, n)
        if target is None:
            return None
        if target[idx].min() >= -1e-12:
            w = np.clip(target, 0.0, None)
            w = w / w.sum()
            gradient = 2.0 * (A @ w - b)
            off = np.flatnonzero(~support)
            if off.size == 0:
                return w
            tol = 1e-11 * (1.0 + float(np.abs(gradient).max()))
            j = off[np.argmin(gradient[off])]
            if gradient[j] >= gradient[idx].min() - tol:
                return w
            support[j] = True
        else:
            direction = target - w  # sums to zero, so the move stays on the plane
            movers = idx[direction[idx] < -1e-18]
            if movers.size == 0:
                return None
            steps = -w[movers] / direction[movers]
            k_drop = int(np.argmin(steps))
            w = np.clip(w + max(0.0, float(steps[k_drop])) * direction, 0.0, None)
            w[movers[k_drop]] = 0.0
            support[movers[k_drop]] = False
            total = w.sum()
            if total <= 0.0:
                return None
            w = w / total
    return None


def _solve_simplex_qp(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Minimize w'Aw - 2b'w over the simplex, started at uniform weights.

    Accelerated projected gradient with a monotone safeguard; the iterate
    is periodically replaced by the exact solution restricted to its
    support when that solution is feasible and better. Convergence is
    declared when the projected-gradient residual drops below 1e-10 or
    the objective improves by less than 1e-14.
    """
    n = b.size
    w = np.full(n, 1.0 / n)
    eigmax = float(np.linalg.eigvalsh(A)[-1]) if n > 0 else 0.0
    lipschitz = 2.0 * max(eigmax, 0.0)
    if not math.isfinite(lipschitz):
        raise DataError("non-finite outcome values in fitting window")
    if lipschitz <= 0.0:
        return w  # constant objective: return the deterministic seed
    step = 1.0 / lipschitz

    def objective(x):
        return float(x @ A @ x - 2.0 * (b @ x))

    def gradient(x):
        return 2.0 * (A @ x - b)

    f_w = objective(w)
    y = w
    t_momentum = 1.0
    for iteration in range(_MAX_ITER):
        candidate = project_simplex(y - step * gradient(y))
        f_candidate = objective(candidate)
        if f_candidate > f_w:
            candidate = project_simplex(w - step * gradient(w))
            f_candidate = objective(candidate)
            y = candidate
            t_momentum = 1.0
        else:
            t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t_momentum * t_momentum))
            y = candidate + ((t_momentum - 1.0) / t_next) * (candidate - w)
            t_momentum = t_next
        if iteration % 10 == 0:
            refined = _active_set_qp(A, b, candidate)
            if refined is not None:
                f_refined = objective(refined)
                if f_refined <= f_candidate:
                    candidate, f_candidate = refined, f_refined
                    y = candidate
                    t_momentum = 1.0
        residual = np.linalg.norm(candidate - project_simplex(candidate - gradient(candidate)))
        improvement = f_w - f_candidate
        w, f_w = candidate, f_candidate
        if residual < _PG_TOL or (iteration > 0 and 0.0 <= improvement < _F_TOL):
            break
    return w


def _design(problem: SynthProblem, v_diag: np.ndarray | None):
    x0 = problem.treated_vector(problem.pre_periods)
    X1 = problem.donor_matrix(problem.pre_periods)
    if not (np.all(np.isfinite(x0)) and np.all(np.isfinite(X1))):
        raise DataError("non-finite outcome values in fitting window")
    p = len(problem.pre_periods)
    if v_diag is None:
        v = np.full(p, 1.0 / p)
    else:
        v = np.asarray(v_diag, dtype=float)
        if v.shape != (p,):
            raise DataError(f"v_diag must have one entry per fitting period ({p})")
        if v.min() < 0 or abs(v.sum() - 1.0) > 1e-9:
            raise DataError("v_diag entries must be nonnegative with trace 1")
    return x0, X1, v


def fit_weights(problem: SynthProblem, v_diag: np.ndarray | None = None) -> WeightVector:
    """Donor weights minimizing the V-weighted pre-period discrepancy."""
    x0, X1, v = _design(problem, v_diag)
    A = X1.T @ (v[:, None] * X1)
    b = X1.T @ (v * x0)
    return WeightVector(w=_solve_simplex_qp(A, b))


def fit_objective(problem: SynthProblem, weights: WeightVector, v_diag: np.ndarray | None = None) -> float:
    """(x0 - X1 w)' V (x0 - X1 w) for diagnostics and tests."""
    x0, X1, v = _design(problem, v_diag)
    r = x0 - X1 @ weights.w
    return float(r @ (v * r))


def effect_series(problem: SynthProblem, weights: WeightVector) -> np.ndarray:
    """Treated minus synthetic outcome at every panel period, pre and post."""
    treated = problem.Y.series(problem.treated)
    donors = np.array([problem.Y.series(d) for d in problem.donors])
    return treated - weights.w @ donors


def mspe(problem: SynthProblem, weights: WeightVector, periods: Sequence[int]) -> float:
    """Mean squared prediction error of the fit over the given periods."""
    effects = effect_series(problem, weights)
    idx = [problem.Y.period_index(t) for t in periods]
    return float(np.mean(effects[idx] ** 2))


def optimize_v(
    problem: SynthProblem, max_iterations: int = 200, min_step: float = 1e-6
) -> tuple[np.ndarray, WeightVector]:
    """Diagonal V minimizing prediction error over every pre period.

    Deterministic coordinate refinement from the uniform diagonal with a
    halving step schedule; each candidate diagonal is scored by refitting
    the weights and evaluating MSPE on the full pre window. The returned
    diagonal is never worse than uniform.
    """
    p = len(problem.pre_periods)
    v = np.full(p, 1.0 / p)
    w = fit_weights(problem, v)
    best = mspe(problem, w, problem.all_pre_periods)
    if set(problem.pre_periods) == set(problem.all_pre_periods):
        # degenerate case: the search objective equals the fit objective,
        # so the uniform diagonal is already optimal
        return v, w
    step = 0.5
    for _ in range(max_iterations):
        improved = False
        for i in range(p):
            for direction in (1.0, -1.0):
                candidate = v.copy()
                candidate[i] = max(0.0, candidate[i] + direction * step)
                total = candidate.sum()
                if total <= 0.0:
                    continue
                candidate /= total
                if np.allclose(candidate, v, rtol=0.0, atol=1e-15):
                    continue
                w_candidate = fit_weights(problem, candidate)
                score = mspe(problem, w_candidate, problem.all_pre_periods)
                if score < best - 1e-15:
                    v, w, best = candidate, w_candidate, score
                    improved = True
        if not improved:
            step *= 0.5
            if step < min_step:
                break
    return v, w


def fit_synth(problem: SynthProblem, v_diag: np.ndarray | None = None) -> SynthFit:
    """Fit weights (with the given or uniform V) and package the results."""
    weights = fit_weights(problem, v_diag)
    p = len(problem.pre_periods)
    v = np.full(p, 1.0 / p) if v_diag is None else np.asarray(v_diag, dtype=float)
    effects = effect_series(problem, weights)
    rmse = math.sqrt(mspe(problem, weights, problem.all_pre_periods))
    return SynthFit(weights=weights, v_diag=v, effects=effects, rmse_pre=rmse)
