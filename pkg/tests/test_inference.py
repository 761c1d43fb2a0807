import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dgp import TREATED, factor_panel
from oracles import quantile_sorted
from synthpanel.classify import load_lexicons, read_tweets_csv
from synthpanel.demo import CorpusSpec, write_corpus
from synthpanel.errors import InferenceError, PanelRangeError
from synthpanel.inference import (
    EstimatorConfig,
    aggregation_suite,
    averaged_post_effect,
    estimate_with_placebos,
    falsification_run,
    fitting_periods_for_level,
    placebo_distribution,
    placebo_quantile,
    pointwise_band,
    run_unit_fit,
)
from synthpanel.panel import PanelSeries


def default_cfg(panel):
    pre = tuple(t for t in panel.periods if t < 0)
    post = tuple(t for t in panel.periods if t >= 0)
    return EstimatorConfig(fit_pre_periods=pre, all_pre_periods=pre, post_periods=post)


def small_panel(seed=0, n_donors=8):
    return factor_panel(seed, n_donors=n_donors, n_pre=10, n_post=5)


class TestPlaceboDistribution:
    def test_scaled_equals_raw_times_sigma_ratio(self):
        panel = small_panel()
        fit, dist = estimate_with_placebos(panel, TREATED, default_cfg(panel))
        for i in range(dist.n_placebos):
            expected = dist.raw_effects[i] * (dist.sigma_treated / dist.sigmas[i])
            assert dist.scaled_effects[i] == pytest.approx(expected, abs=0, rel=1e-12)

    def test_refuses_small_donor_pool(self):
        panel = small_panel(n_donors=4)
        with pytest.raises(InferenceError, match="at least 5"):
            placebo_distribution(panel, TREATED, panel.countries[1:], default_cfg(panel))

    def test_perfect_fit_donor_excluded(self):
        panel = small_panel(seed=3)
        values = panel.values.copy()
        values[2] = values[1]  # C02 becomes an exact twin of C01
        twin_panel = PanelSeries(panel.outcome_name, panel.countries, panel.periods, values)
        _, dist = estimate_with_placebos(twin_panel, TREATED, default_cfg(panel))
        excluded_names = {d for d, _ in dist.excluded}
        assert {"C01", "C02"} <= excluded_names
        assert all("rmse" in reason for _, reason in dist.excluded)

    def test_all_excluded_is_degenerate(self):
        # donors in identical pairs: every placebo fit is perfect
        rng = np.random.default_rng(0)
        base = rng.normal(0, 1, (3, 12))
        values = np.vstack([rng.normal(0, 1, 12), base.repeat(2, axis=0)])
        countries = tuple(f"C{i:02d}" for i in range(7))
        panel = PanelSeries("y", countries, tuple(range(-9, 3)), values)
        with pytest.raises(InferenceError, match="degenerate"):
            estimate_with_placebos(panel, "C00", default_cfg(panel))

    def test_treated_unit_never_enters_placebo_pools(self):
        panel = small_panel(seed=7)
        contaminated = panel.values.copy()
        contaminated[0, -5:] += 100.0  # wreck the treated unit's post periods
        panel2 = PanelSeries(panel.outcome_name, panel.countries, panel.periods, contaminated)
        _, dist_a = estimate_with_placebos(panel, TREATED, default_cfg(panel))
        _, dist_b = estimate_with_placebos(panel2, TREATED, default_cfg(panel2))
        assert np.array_equal(dist_a.scaled_effects, dist_b.scaled_effects)

    def test_deterministic_across_thread_counts(self, monkeypatch):
        panel = small_panel(seed=9)
        _, seq = estimate_with_placebos(panel, TREATED, default_cfg(panel))
        monkeypatch.setenv("SYNTHPANEL_THREADS", "4")
        _, par = estimate_with_placebos(panel, TREATED, default_cfg(panel))
        assert np.array_equal(seq.scaled_effects, par.scaled_effects)
        assert seq.donors == par.donors


class TestPointwiseBand:
    def test_median_of_symmetric_set(self):
        assert placebo_quantile(np.array([-2.0, -1.0, 1.0, 2.0]), 0.5) == pytest.approx(0.0)

    def test_constant_placebos_collapse(self):
        panel = small_panel()
        _, dist = estimate_with_placebos(panel, TREATED, default_cfg(panel))
        constant = np.full_like(dist.scaled_effects, 3.25)
        forced = type(dist)(
            donors=dist.donors, periods=dist.periods, raw_effects=constant,
            scaled_effects=constant, sigmas=dist.sigmas,
            sigma_treated=dist.sigma_treated, excluded=(),
        )
        band = pointwise_band(forced)
        assert np.all(band == 3.25)

    @given(
        st.lists(st.floats(-100, 100), min_size=3, max_size=40),
        st.sampled_from([0.025, 0.25, 0.5, 0.75, 0.975]),
    )
    @settings(max_examples=80)
    def test_matches_sort_oracle(self, values, level):
        got = float(placebo_quantile(np.array(values), level))
        assert got == pytest.approx(quantile_sorted(values, level), abs=1e-12)

    def test_band_levels_ordered(self):
        panel = small_panel(seed=2)
        _, dist = estimate_with_placebos(panel, TREATED, default_cfg(panel))
        band = pointwise_band(dist)
        assert np.all(band[1] >= band[0])

    def test_single_included_placebo_refused(self):
        panel = small_panel()
        _, dist = estimate_with_placebos(panel, TREATED, default_cfg(panel))
        lone = type(dist)(
            donors=dist.donors[:1], periods=dist.periods,
            raw_effects=dist.raw_effects[:1], scaled_effects=dist.scaled_effects[:1],
            sigmas=dist.sigmas[:1], sigma_treated=dist.sigma_treated, excluded=(),
        )
        with pytest.raises(InferenceError):
            pointwise_band(lone)


class TestAveragedPostEffect:
    def test_constant_effect_recovered(self):
        panel = small_panel(seed=4)
        cfg = default_cfg(panel)
        fit, dist = estimate_with_placebos(panel, TREATED, cfg)
        forced = type(fit)(
            weights=fit.weights, v_diag=fit.v_diag,
            effects=np.where(np.array(panel.periods) >= 0, -0.127, fit.effects),
            rmse_pre=fit.rmse_pre,
        )
        avg = averaged_post_effect(forced, dist)
        assert avg.value == pytest.approx(-0.127, abs=1e-15)

    def test_zero_effects_inside_band(self):
        panel = small_panel(seed=5)
        fit, dist = estimate_with_placebos(panel, TREATED, default_cfg(panel))
        forced = type(fit)(
            weights=fit.weights, v_diag=fit.v_diag,
            effects=np.zeros_like(fit.effects), rmse_pre=fit.rmse_pre,
        )
        avg = averaged_post_effect(forced, dist)
        assert avg.value == 0.0
        assert avg.band[0] <= 0.0 <= avg.band[1]

    def test_mean_recomputation_oracle(self):
        panel = small_panel(seed=6)
        fit, dist = estimate_with_placebos(panel, TREATED, default_cfg(panel))
        avg = averaged_post_effect(fit, dist)
        post_idx = [i for i, t in enumerate(panel.periods) if t >= 0]
        assert avg.value == pytest.approx(
            sum(fit.effects[i] for i in post_idx) / len(post_idx), abs=1e-14
        )

    def test_scaling_invariance_of_significance(self):
        panel = factor_panel(11, n_donors=8, n_pre=10, n_post=5, tau=-0.2)
        cfg = default_cfg(panel)
        fit, dist = estimate_with_placebos(panel, TREATED, cfg)
        avg = averaged_post_effect(fit, dist)
        scaled_panel = PanelSeries(
            panel.outcome_name, panel.countries, panel.periods, panel.values * 7.5
        )
        fit2, dist2 = estimate_with_placebos(scaled_panel, TREATED, cfg)
        avg2 = averaged_post_effect(fit2, dist2)
        outside_1 = avg.value < avg.band[0] or avg.value > avg.band[1]
        outside_2 = avg2.value < avg2.band[0] or avg2.value > avg2.band[1]
        assert outside_1 == outside_2
        assert avg2.value == pytest.approx(avg.value * 7.5, rel=1e-6)


class TestFalsification:
    def test_perfect_twin_gives_exact_zero(self):
        rng = np.random.default_rng(1)
        donors = rng.normal(0, 1, (6, 25))
        values = np.vstack([donors[0], donors])  # treated equals donor C01 everywhere
        countries = tuple(f"C{i:02d}" for i in range(7))
        panel = PanelSeries("y", countries, tuple(range(-20, 5)), values)
        avg = falsification_run(panel, "C00", 10, cutoff_days=100)
        assert avg.value == pytest.approx(0.0, abs=1e-9)

    def test_cutoff_longer_than_data(self):
        panel = small_panel()  # 10 pre periods = 100 days
        with pytest.raises(PanelRangeError):
            falsification_run(panel, TREATED, 10, cutoff_days=100)

    def test_null_dgp_near_zero(self):
        values = [
            falsification_run(factor_panel(seed, tau=0.0), TREATED, 10, cutoff_days=100).value
            for seed in range(25)
        ]
        assert abs(np.mean(values)) < 0.01

    def test_effect_does_not_leak_into_falsification(self):
        # the post-anchor treatment must not move the held-out pre estimate
        a = falsification_run(factor_panel(3, tau=0.0), TREATED, 10, cutoff_days=100)
        b = falsification_run(factor_panel(3, tau=-0.5), TREATED, 10, cutoff_days=100)
        assert a.value == pytest.approx(b.value, abs=1e-12)


class TestAggregationHelpers:
    def test_daily_subsample_counts_back_from_minus_one(self):
        pre = tuple(range(-30, 0))
        assert fitting_periods_for_level(pre, 1) == (-21, -11, -1)

    def test_weekly_subsample_every_fourth(self):
        pre = tuple(range(-14, 0))
        assert fitting_periods_for_level(pre, 7) == (-13, -9, -5, -1)

    def test_coarse_levels_use_all_periods(self):
        pre = tuple(range(-12, 0))
        assert fitting_periods_for_level(pre, 10) == pre
        assert fitting_periods_for_level(pre, 28) == pre

    def test_constant_panel_zero_effects(self):
        countries = tuple(f"C{i:02d}" for i in range(7))
        panel = PanelSeries("y", countries, tuple(range(-6, 3)), np.full((7, 9), 4.0))
        cfg = default_cfg(panel)
        fit = run_unit_fit(panel, "C00", countries[1:], cfg)
        assert fit.effects == pytest.approx(np.zeros(9), abs=1e-12)

    def test_step_treatment_sign_recovered_at_all_levels(self, tmp_path):
        spec = CorpusSpec(
            countries=("UG", "KE", "GH", "RW", "TZ", "ZM", "ZW", "SN"),
            pre_days=60, post_days=20, base_users=8.0,
            treated_user_drop=0.35, seed=13,
        )
        write_corpus(tmp_path, spec)
        lexicons = load_lexicons()
        records = read_tweets_csv(tmp_path / "tweets.csv")
        results = aggregation_suite(
            records, lexicons, "UG", spec.anchor,
            levels=(1, 7, 10, 28), window_days=(60, 20),
        )
        for level, res in results.items():
            assert res.averaged.value < 0.0, f"level {level} missed the drop"
        # the subsampled levels carry an optimized diagonal, the rest uniform
        assert len(set(np.round(results[1].fit.v_diag, 12))) >= 1
        assert results[10].fit.v_diag == pytest.approx(
            np.full(len(results[10].fit.v_diag), 1 / len(results[10].fit.v_diag))
        )
