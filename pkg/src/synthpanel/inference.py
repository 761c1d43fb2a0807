"""Placebo-based inference: scaled placebo distributions, quantile bands,
restricted-window falsification, and aggregation robustness."""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .classify import TweetRecord, bot_filter, twitter_outcomes, user_period_flags
from .errors import DataError, InferenceError, PanelRangeError
from .panel import PanelSeries, PeriodCalendar, SampleRestriction, restrict_sample
from .synth import SynthFit, SynthProblem, fit_synth, optimize_v

MIN_PLACEBO_DONORS = 5
SIGMA_FLOOR_RATIO = 1e-12
BAND_LEVELS = (0.025, 0.975)


@dataclass(frozen=True)
class EstimatorConfig:
    """Period split and solver options shared by treated and placebo fits."""

    fit_pre_periods: tuple[int, ...]
    all_pre_periods: tuple[int, ...]
    post_periods: tuple[int, ...]
    optimize_v: bool = False
    sigma_floor_ratio: float = SIGMA_FLOOR_RATIO


@dataclass(frozen=True, eq=False)
class PlaceboDistribution:
    """Scaled placebo effect series, one row per included donor.

    Each donor's full effect series is multiplied by sigma_treated over
    that donor's own pre-period RMSE; donors whose RMSE sits below the
    floor are excluded and reported with a reason.
    """

    donors: tuple[str, ...]
    periods: tuple[int, ...]
    raw_effects: np.ndarray     # donors x periods
    scaled_effects: np.ndarray  # donors x periods
    sigmas: np.ndarray          # per included donor
    sigma_treated: float
    excluded: tuple[tuple[str, str], ...]  # (donor, reason)

    @property
    def n_placebos(self) -> int:
        return len(self.donors)


@dataclass(frozen=True)
class AveragedEffect:
    """Post-window average effect with its placebo quantile band."""

    value: float
    band: tuple[float, float]

    def __post_init__(self):
        if self.band[0] > self.band[1]:
            raise InferenceError("band endpoints out of order")


def thread_count() -> int:
    """Parallelism cap from SYNTHPANEL_THREADS (default: sequential)."""
    raw = os.environ.get("SYNTHPANEL_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _map_ordered(fn: Callable, items: Sequence) -> list:
    """Apply fn preserving item order, optionally across a thread pool."""
    workers = min(thread_count(), max(1, len(items)))
    if workers == 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def run_unit_fit(
    panel: PanelSeries, unit: str, pool: Sequence[str], cfg: EstimatorConfig
) -> SynthFit:
    """Fit one unit against its donor pool under the shared config."""
    problem = SynthProblem(
        treated=unit,
        donors=tuple(pool),
        pre_periods=cfg.fit_pre_periods,
        all_pre_periods=cfg.all_pre_periods,
        post_periods=cfg.post_periods,
        Y=panel,
    )
    if cfg.optimize_v:
        v_diag, _ = optimize_v(problem)
        return fit_synth(problem, v_diag)
    return fit_synth(problem)


def placebo_distribution(
    panel: PanelSeries,
    treated: str,
    donors: Sequence[str],
    cfg: EstimatorConfig,
    treated_fit: SynthFit | None = None,
) -> PlaceboDistribution:
    """Re-run the estimator with each donor as pseudo-treated.

    The genuinely treated unit never enters a placebo donor pool: its
    post periods are contaminated by the intervention.
    """
    donors = tuple(donors)
    if len(donors) < MIN_PLACEBO_DONORS:
        raise InferenceError(
            f"placebo inference needs at least {MIN_PLACEBO_DONORS} donors, "
            f"got {len(donors)}; point estimates remain available without bands"
        )
    if treated_fit is None:
        treated_fit = run_unit_fit(panel, treated, donors, cfg)
    sigma_treated = treated_fit.rmse_pre
    scale = float(np.max(np.abs(panel.values))) if panel.values.size else 0.0
    if scale <= 0.0:
        raise InferenceError("outcome panel is identically zero; placebo scaling undefined")
    floor = cfg.sigma_floor_ratio * scale

    def one_placebo(donor: str) -> SynthFit:
        pool = tuple(d for d in donors if d != donor)
        return run_unit_fit(panel, donor, pool, cfg)

    fits = _map_ordered(one_placebo, donors)

    included, raw, scaled, sigmas, excluded = [], [], [], [], []
    for donor, fit in zip(donors, fits):
        if fit.rmse_pre < floor:
            excluded.append((donor, f"pre-period rmse {fit.rmse_pre:.3e} below floor {floor:.3e}"))
            continue
        included.append(donor)
        sigmas.append(fit.rmse_pre)
        raw.append(fit.effects)
        scaled.append(fit.effects * (sigma_treated / fit.rmse_pre))
    if not included:
        raise InferenceError("all placebo donors excluded; inference degenerate")
    return PlaceboDistribution(
        donors=tuple(included),
        periods=panel.periods,
        raw_effects=np.array(raw),
        scaled_effects=np.array(scaled),
        sigmas=np.array(sigmas),
        sigma_treated=sigma_treated,
        excluded=tuple(excluded),
    )


def placebo_quantile(values: np.ndarray, levels, axis=None) -> np.ndarray:
    """Empirical quantiles with linear interpolation between order statistics.

    Uses exceedance plotting positions k/(n+1), the convention under which
    an exchangeable extra draw falls inside the .025/.975 band with
    probability (n-1)/(n+1); the n-distribution default positions would
    systematically under-cover small placebo pools.
    """
    return np.quantile(values, levels, axis=axis, method="weibull")


def pointwise_band(
    dist: PlaceboDistribution, levels: Sequence[float] = BAND_LEVELS
) -> np.ndarray:
    """Per-period empirical quantiles of the scaled placebo distribution.

    Returns an array of shape (len(levels), n_periods).
    """
    if dist.n_placebos < 2:
        raise InferenceError("pointwise bands need at least 2 included placebos")
    return placebo_quantile(dist.scaled_effects, levels, axis=0)


def averaged_post_effect(
    fit: SynthFit,
    dist: PlaceboDistribution,
    periods: Sequence[int] | None = None,
) -> AveragedEffect:
    """Average treated effect over the post window with its placebo band.

    The band holds the .025/.975 quantiles of the donor-wise averages of
    the scaled placebo series over the same periods. `periods` defaults
    to every t >= 0 in the distribution's range.
    """
    if periods is None:
        periods = [t for t in dist.periods if t >= 0]
        if not periods:
            raise PanelRangeError("no post periods in panel")
    idx = [dist.periods.index(t) for t in periods]
    value = float(np.mean(fit.effects[idx]))
    donor_means = dist.scaled_effects[:, idx].mean(axis=1)
    lo, hi = placebo_quantile(donor_means, BAND_LEVELS)
    return AveragedEffect(value=value, band=(float(lo), float(hi)))


def estimate_with_placebos(
    panel: PanelSeries,
    treated: str,
    cfg: EstimatorConfig,
    donors: Sequence[str] | None = None,
) -> tuple[SynthFit, PlaceboDistribution]:
    """Treated fit plus its scaled placebo distribution in one call."""
    if donors is None:
        donors = tuple(c for c in panel.countries if c != treated)
    fit = run_unit_fit(panel, treated, donors, cfg)
    dist = placebo_distribution(panel, treated, donors, cfg, treated_fit=fit)
    return fit, dist


def falsification_run(
    panel: PanelSeries,
    treated: str,
    period_length_days: int,
    cutoff_days: int = 100,
    donors: Sequence[str] | None = None,
) -> AveragedEffect:
    """Fit on early pre data only and average effects over held-out pre periods.

    The fit uses periods that end more than `cutoff_days` before the
    anchor; effects are averaged over the final `cutoff_days` window
    before the anchor, with the placebo machinery unchanged (the held-out
    window plays the role of the post window throughout).
    """
    n_cut = math.ceil(cutoff_days / period_length_days)
    fit_periods = tuple(t for t in panel.periods if t < -n_cut)
    eval_periods = tuple(t for t in panel.periods if -n_cut <= t <= -1)
    if not fit_periods:
        raise PanelRangeError(
            f"cutoff of {cutoff_days} days leaves no fitting periods "
            f"(panel starts at {panel.t_min})"
        )
    if len(eval_periods) < n_cut:
        raise PanelRangeError("panel does not cover the held-out window")
    cfg = EstimatorConfig(
        fit_pre_periods=fit_periods,
        all_pre_periods=fit_periods,
        post_periods=eval_periods,
    )
    fit, dist = estimate_with_placebos(panel, treated, cfg, donors=donors)
    return averaged_post_effect(fit, dist, periods=eval_periods)


_FIT_SUBSAMPLE_STRIDE = {1: 10, 7: 4}


def fitting_periods_for_level(pre_periods: Sequence[int], level_days: int) -> tuple[int, ...]:
    """Pre periods entering the weight fit at a given aggregation level.

    Daily panels use every 10th pre period and weekly panels every 4th,
    counting back from t = -1; coarser levels use the full pre window.
    """
    stride = _FIT_SUBSAMPLE_STRIDE.get(level_days)
    if stride is None:
        return tuple(pre_periods)
    return tuple(t for t in pre_periods if (-1 - t) % stride == 0)


@dataclass(frozen=True, eq=False)
class AggregationLevelResult:
    """Pipeline output for one aggregation level."""

    level_days: int
    panel: PanelSeries
    fit: SynthFit
    dist: PlaceboDistribution
    bands: np.ndarray
    averaged: AveragedEffect


def aggregation_suite(
    tweets: Sequence[TweetRecord],
    lexicons: dict,
    treated: str,
    anchor_date,
    levels: Sequence[int] = (1, 7, 10, 28),
    restriction: SampleRestriction = SampleRestriction(),
    outcome: str = "users",
    transform: str = "log1p",
    window_days: tuple[int, int] | None = None,
) -> dict[int, AggregationLevelResult]:
    """Rebuild the pipeline from raw tweets at each aggregation level.

    Sample restriction, panel construction, fitting-window subsampling,
    and the V search (for subsampled levels) are all recomputed per level.
    `window_days` clips the panel to (pre_days, post_days) around the
    anchor so every level covers the same calendar span.
    """
    filtered = bot_filter(tweets, lexicons)
    results = {}
    for level in levels:
        cal = PeriodCalendar(anchor_date=anchor_date, period_length_days=level)
        flags = user_period_flags(filtered, cal, lexicons)
        periods = None
        if window_days is not None:
            pre_days, post_days = window_days
            periods = (-math.ceil(pre_days / level), math.ceil(post_days / level) - 1)
        panels = twitter_outcomes(flags, filtered, cal, lexicons, periods=periods)
        restricted_users = restrict_sample(panels["users"], restriction)
        if treated not in restricted_users.countries:
            raise DataError(f"treated unit {treated!r} dropped by the sample restriction")
        outcome_panel = panels[outcome].select_countries(restricted_users.countries)
        if transform == "log1p":
            outcome_panel = outcome_panel.log1p()
        pre = tuple(t for t in outcome_panel.periods if t < 0)
        post = tuple(t for t in outcome_panel.periods if t >= 0)
        cfg = EstimatorConfig(
            fit_pre_periods=fitting_periods_for_level(pre, level),
            all_pre_periods=pre,
            post_periods=post,
            optimize_v=level in _FIT_SUBSAMPLE_STRIDE,
        )
        fit, dist = estimate_with_placebos(outcome_panel, treated, cfg)
        results[level] = AggregationLevelResult(
            level_days=level,
            panel=outcome_panel,
            fit=fit,
            dist=dist,
            bands=pointwise_band(dist),
            averaged=averaged_post_effect(fit, dist),
        )
    return results
