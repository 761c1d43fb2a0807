import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dgp import factor_panel, noiseless_hull_panel, TREATED
from oracles import grid_search_fiber, grid_search_full
from synthpanel.errors import DataError
from synthpanel.panel import PanelSeries
from synthpanel.synth import (
    SynthProblem,
    WeightVector,
    effect_series,
    fit_objective,
    fit_synth,
    fit_weights,
    mspe,
    optimize_v,
    project_simplex,
)


def problem_from_values(values, n_pre, n_post=3, treated_row=0):
    values = np.asarray(values, dtype=float)
    n_units = values.shape[0]
    countries = tuple(f"C{i:02d}" for i in range(n_units))
    panel = PanelSeries("y", countries, tuple(range(-n_pre, n_post)), values)
    donors = tuple(c for i, c in enumerate(countries) if i != treated_row)
    return SynthProblem(
        treated=countries[treated_row],
        donors=donors,
        pre_periods=tuple(range(-n_pre, 0)),
        all_pre_periods=tuple(range(-n_pre, 0)),
        post_periods=tuple(range(0, n_post)),
        Y=panel,
    )


def random_problem(seed, n_donors=None, n_pre=None):
    rng = np.random.default_rng(seed)
    n_donors = n_donors or int(rng.integers(2, 5))
    n_pre = n_pre or int(rng.integers(3, 7))
    values = rng.normal(0.0, 1.0, (n_donors + 1, n_pre + 3))
    return problem_from_values(values, n_pre)


class TestProjectSimplex:
    @given(st.lists(st.floats(-50, 50), min_size=1, max_size=12))
    def test_lands_on_simplex(self, v):
        w = project_simplex(np.array(v))
        assert w.min() >= 0.0
        assert w.sum() == pytest.approx(1.0, abs=1e-12)

    @given(st.lists(st.floats(-50, 50), min_size=2, max_size=8), st.randoms())
    @settings(max_examples=50)
    def test_no_closer_simplex_point(self, v, rand):
        v = np.array(v)
        w = project_simplex(v)
        base = np.linalg.norm(v - w)
        for _ in range(20):
            z = np.array([rand.random() for _ in v]) + 1e-9
            z = z / z.sum()
            assert base <= np.linalg.norm(v - z) + 1e-9

    def test_idempotent(self):
        v = np.array([0.2, 0.5, 0.3])
        assert np.allclose(project_simplex(v), v, atol=1e-15)


class TestFitWeights:
    def test_donor_identical_to_treated_takes_all_weight(self):
        values = np.array([
            [1.0, 2.0, 3.0, 0, 0, 0],
            [1.0, 2.0, 3.0, 0, 0, 0],   # exact twin of the treated
            [9.0, 9.0, 9.0, 0, 0, 0],
        ])
        problem = problem_from_values(values, n_pre=3)
        w = fit_weights(problem)
        assert w.w == pytest.approx([1.0, 0.0], abs=1e-9)
        assert fit_objective(problem, w) == pytest.approx(0.0, abs=1e-16)

    def test_midpoint_of_two_donors(self):
        values = np.array([
            [1.0, 3.0, 2.0, 0, 0, 0],
            [0.0, 2.0, 1.0, 0, 0, 0],
            [2.0, 4.0, 3.0, 0, 0, 0],
        ])
        problem = problem_from_values(values, n_pre=3)
        w = fit_weights(problem)
        assert w.w == pytest.approx([0.5, 0.5], abs=1e-8)

    @pytest.mark.parametrize("seed", range(8))
    def test_matches_grid_search(self, seed):
        problem = random_problem(seed, n_donors=4, n_pre=6)
        w = fit_weights(problem)
        x0 = problem.treated_vector(problem.pre_periods)
        X1 = problem.donor_matrix(problem.pre_periods)
        v = np.full(6, 1 / 6)
        assert fit_objective(problem, w) <= grid_search_fiber(x0, X1, v, 0.001) + 1e-8

    @pytest.mark.parametrize("seed", range(12))
    def test_vertex_optimality(self, seed):
        problem = random_problem(seed)
        w = fit_weights(problem)
        f = fit_objective(problem, w)
        n = len(problem.donors)
        for j in range(n):
            vertex = np.zeros(n)
            vertex[j] = 1.0
            assert f <= fit_objective(problem, WeightVector(vertex)) + 1e-10

    @pytest.mark.parametrize("seed", range(6))
    def test_simplex_constraints(self, seed):
        w = fit_weights(random_problem(seed)).w
        assert abs(w.sum() - 1.0) <= 1e-9
        assert w.min() >= -1e-9

    def test_donor_reordering_permutes_weights(self):
        problem = random_problem(42, n_donors=4, n_pre=5)
        w = fit_weights(problem)
        perm = [2, 0, 3, 1]
        reordered = SynthProblem(
            treated=problem.treated,
            donors=tuple(problem.donors[i] for i in perm),
            pre_periods=problem.pre_periods,
            all_pre_periods=problem.all_pre_periods,
            post_periods=problem.post_periods,
            Y=problem.Y,
        )
        w2 = fit_weights(reordered)
        assert fit_objective(problem, w) == pytest.approx(
            fit_objective(reordered, w2), abs=1e-10
        )
        assert w2.w == pytest.approx(w.w[perm], abs=1e-6)

    @pytest.mark.parametrize("seed", range(5))
    def test_duplicate_donor_cannot_hurt(self, seed):
        problem = random_problem(seed, n_donors=3, n_pre=5)
        f = fit_objective(problem, fit_weights(problem))
        values = problem.Y.values
        extended = np.vstack([values, values[1]])  # duplicate first donor
        countries = problem.Y.countries + ("C99",)
        panel = PanelSeries("y", countries, problem.Y.periods, extended)
        bigger = SynthProblem(
            treated=problem.treated,
            donors=problem.donors + ("C99",),
            pre_periods=problem.pre_periods,
            all_pre_periods=problem.all_pre_periods,
            post_periods=problem.post_periods,
            Y=panel,
        )
        f_bigger = fit_objective(bigger, fit_weights(bigger))
        assert f_bigger <= f + 1e-10

    def test_zero_noise_hull_recovery(self):
        panel, _ = noiseless_hull_panel(seed=5)
        donors = tuple(c for c in panel.countries if c != "C00")
        problem = SynthProblem(
            "C00", donors, tuple(range(-12, 0)), tuple(range(-12, 0)),
            tuple(range(0, 5)), panel,
        )
        fit = fit_synth(problem)
        pre_idx = [panel.period_index(t) for t in range(-12, 0)]
        assert np.abs(fit.effects[pre_idx]).max() < 1e-8

    def test_non_finite_values_rejected(self):
        values = np.ones((3, 6))
        values[1, 0] = np.nan
        problem = problem_from_values(values, n_pre=3)
        with pytest.raises(DataError):
            fit_weights(problem)

    def test_ties_resolve_from_uniform_seed(self):
        # two identical donors both matching the treated: any split is
        # optimal; the deterministic seed keeps the uniform split
        values = np.array([
            [1.0, 2.0, 0, 0, 0],
            [1.0, 2.0, 0, 0, 0],
            [1.0, 2.0, 0, 0, 0],
        ])
        problem = problem_from_values(values, n_pre=2)
        w = fit_weights(problem)
        assert w.w == pytest.approx([0.5, 0.5], abs=1e-9)


class TestGridOracleSelfCheck:
    """The fiber shortcut must reproduce plain enumeration exactly."""

    @pytest.mark.parametrize("seed", range(5))
    def test_three_donors_full_grid(self, seed):
        problem = random_problem(seed, n_donors=3, n_pre=4)
        x0 = problem.treated_vector(problem.pre_periods)
        X1 = problem.donor_matrix(problem.pre_periods)
        v = np.full(4, 0.25)
        full = grid_search_full(x0, X1, v, step=0.02)
        fiber = grid_search_fiber(x0, X1, v, step=0.02)
        assert fiber == pytest.approx(full, abs=1e-13)

    @pytest.mark.parametrize("seed", range(3))
    def test_four_donors_coarse_grid(self, seed):
        problem = random_problem(seed + 50, n_donors=4, n_pre=5)
        x0 = problem.treated_vector(problem.pre_periods)
        X1 = problem.donor_matrix(problem.pre_periods)
        v = np.full(5, 0.2)
        full = grid_search_full(x0, X1, v, step=0.05)
        fiber = grid_search_fiber(x0, X1, v, step=0.05)
        assert fiber == pytest.approx(full, abs=1e-13)


class TestEffectSeries:
    def test_perfect_pre_fit_gives_zero_pre_effects(self):
        panel, _ = noiseless_hull_panel(seed=2)
        donors = tuple(c for c in panel.countries if c != "C00")
        problem = SynthProblem(
            "C00", donors, tuple(range(-12, 0)), tuple(range(-12, 0)),
            tuple(range(0, 5)), panel,
        )
        effects = effect_series(problem, fit_weights(problem))
        assert np.abs(effects[:12]).max() < 1e-8

    def test_post_shift_linearity(self):
        problem = random_problem(9, n_donors=3, n_pre=5)
        w = fit_weights(problem)
        base = effect_series(problem, w)
        shifted_values = problem.Y.values.copy()
        shifted_values[1:, 5:] += 2.5  # all donors shift post periods by +c
        panel = PanelSeries("y", problem.Y.countries, problem.Y.periods, shifted_values)
        shifted_problem = SynthProblem(
            problem.treated, problem.donors, problem.pre_periods,
            problem.all_pre_periods, problem.post_periods, panel,
        )
        shifted = effect_series(shifted_problem, w)
        assert shifted[5:] == pytest.approx(base[5:] - 2.5, abs=1e-12)
        assert shifted[:5] == pytest.approx(base[:5], abs=1e-12)

    @pytest.mark.parametrize("seed", range(5))
    def test_direct_recomputation_oracle(self, seed):
        problem = random_problem(seed)
        w = fit_weights(problem)
        effects = effect_series(problem, w)
        for i, t in enumerate(problem.Y.periods):
            synthetic = sum(
                wj * problem.Y.value(d, t) for wj, d in zip(w.w, problem.donors)
            )
            assert effects[i] == pytest.approx(
                problem.Y.value(problem.treated, t) - synthetic, abs=1e-12
            )


class TestOptimizeV:
    def make_subsampled(self, seed, corrupt_period=None):
        rng = np.random.default_rng(seed)
        panel = factor_panel(seed, n_donors=8, n_pre=12, n_post=4, noise_sd=0.01)
        values = panel.values.copy()
        if corrupt_period is not None:
            # blow up the treated unit's noise in one fitting period
            values[0, panel.period_index(corrupt_period)] += rng.normal(0, 0.5)
        panel = PanelSeries(panel.outcome_name, panel.countries, panel.periods, values)
        donors = tuple(c for c in panel.countries if c != TREATED)
        fit_pre = tuple(range(-12, 0, 3))  # subsample: every 3rd period
        return SynthProblem(
            TREATED, donors, fit_pre, tuple(range(-12, 0)), tuple(range(0, 4)), panel,
        )

    def test_degenerate_subsample_returns_uniform(self):
        panel = factor_panel(1, n_donors=6, n_pre=8, n_post=3)
        donors = tuple(c for c in panel.countries if c != TREATED)
        problem = SynthProblem(
            TREATED, donors, tuple(range(-8, 0)), tuple(range(-8, 0)),
            tuple(range(0, 3)), panel,
        )
        v, _ = optimize_v(problem)
        assert v == pytest.approx(np.full(8, 1 / 8), abs=1e-15)

    @pytest.mark.parametrize("seed", range(4))
    def test_never_worse_than_uniform(self, seed):
        problem = self.make_subsampled(seed)
        v, w = optimize_v(problem)
        uniform_w = fit_weights(problem)
        assert mspe(problem, w, problem.all_pre_periods) <= mspe(
            problem, uniform_w, problem.all_pre_periods
        ) + 1e-15
        assert v.min() >= 0.0
        assert v.sum() == pytest.approx(1.0, abs=1e-9)

    def test_noisy_period_weight_shrinks(self):
        # a fitting period corrupted by noise should carry less weight
        # than uniform, on average across draws
        corrupted_weights = []
        for seed in range(12):
            problem = self.make_subsampled(seed, corrupt_period=-6)
            v, _ = optimize_v(problem)
            corrupted_weights.append(v[list(problem.pre_periods).index(-6)])
        assert np.mean(corrupted_weights) < 1.0 / 4  # uniform would be 1/4
