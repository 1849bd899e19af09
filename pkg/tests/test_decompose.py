import dataclasses

import numpy as np
import numpy.testing as npt
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dispdecomp import (
    CdaSettings,
    EstimationError,
    bootstrap,
    decompose_cda,
    decompose_dic,
    decompose_kob,
)
from dispdecomp._streams import substream
import dispdecomp.decompose as decompose_module

from conftest import build_dataset, random_dataset


class TestDic:
    def test_worked_example(self, worked_dic_dataset):
        res = decompose_dic(worked_dic_dataset)
        assert res.method == "DIC"
        npt.assert_allclose(res.initial, 3.0, rtol=1e-9)
        npt.assert_allclose(res.explained, 2.0, rtol=1e-9)
        npt.assert_allclose(res.unexplained, 1.0, rtol=1e-9)
        npt.assert_allclose(res.proportion_explained_pct, 200.0 / 3.0, rtol=1e-9)
        npt.assert_allclose(res.detail.group_coef_without_mediator, 3.0, rtol=1e-9)
        npt.assert_allclose(res.detail.group_coef_with_mediator, 1.0, rtol=1e-9)
        npt.assert_allclose(res.detail.mediator_coef, 2.0, rtol=1e-9)

    def test_orthogonal_mediator_explained_exactly_zero(self, orthogonal_mediator_dataset):
        res = decompose_dic(orthogonal_mediator_dataset)
        assert res.explained == 0.0
        npt.assert_allclose(res.initial, 1.0, rtol=1e-12)
        npt.assert_allclose(res.unexplained, 1.0, rtol=1e-12)

    def test_additivity(self):
        res = decompose_dic(random_dataset(11))
        npt.assert_allclose(res.initial, res.explained + res.unexplained, atol=1e-12)

    def test_proportion_undefined_for_zero_initial(self):
        data = build_dataset({"R": [0, 0, 1, 1], "M": [-1, 1, -1, 1], "Y": [-1, 1, -1, 1]})
        res = decompose_dic(data)
        assert abs(res.initial) < 1e-12
        assert res.proportion_explained_pct is None

    def test_covariates_enter_both_models(self):
        data = random_dataset(5, n_baseline=1, n_intermediate=2)
        res = decompose_dic(data)
        fit_without = res.detail.group_coef_without_mediator
        plain = decompose_dic(
            build_dataset(
                {k: data.columns[k] for k in ("R", "M", "Y")},
            )
        )
        assert fit_without != plain.detail.group_coef_without_mediator


class TestKob:
    def test_worked_example(self, worked_kob_dataset):
        res = decompose_kob(worked_kob_dataset)
        assert res.method == "KOB"
        npt.assert_allclose(res.initial, 5.0, rtol=1e-9)
        npt.assert_allclose(res.explained, 2.0, rtol=1e-9)
        npt.assert_allclose(res.unexplained, 3.0, rtol=1e-9)
        detail = res.detail
        npt.assert_allclose(detail.explained_by["M"], 2.0, rtol=1e-9)
        npt.assert_allclose(detail.intercept_gap, 1.0, rtol=1e-9)
        npt.assert_allclose(detail.slope_gaps["M"], 2.0, rtol=1e-9)
        npt.assert_allclose(detail.total(), 5.0, rtol=1e-9)

    def test_identical_groups_all_terms_zero(self):
        data = build_dataset(
            {"R": [0, 0, 0, 1, 1, 1], "M": [1, 2, 4, 1, 2, 4], "Y": [2, 3, 8, 2, 3, 8]}
        )
        res = decompose_kob(data)
        assert res.initial == 0.0
        assert res.explained == 0.0
        assert res.detail.intercept_gap == 0.0
        assert all(v == 0.0 for v in res.detail.explained_by.values())
        assert all(v == 0.0 for v in res.detail.slope_gaps.values())

    @given(seed=st.integers(0, 2**32 - 1))
    def test_terms_sum_to_raw_gap(self, seed):
        data = random_dataset(seed, n=26, n_baseline=1, n_intermediate=2)
        res = decompose_kob(data)
        y = data.column("Y")
        raw_gap = y[data.group_mask(1)].mean() - y[data.group_mask(0)].mean()
        npt.assert_allclose(res.detail.total(), raw_gap, rtol=1e-10, atol=1e-12)
        npt.assert_allclose(res.initial, raw_gap, rtol=1e-12, atol=1e-14)
        npt.assert_allclose(res.initial, res.explained + res.unexplained, atol=1e-12)

    @given(seed=st.integers(0, 2**32 - 1))
    def test_label_swap_negates_initial(self, seed):
        data = random_dataset(seed, n=20)
        swapped = build_dataset(
            {**{k: v for k, v in data.columns.items() if k != "R"}, "R": 1.0 - data.column("R")},
            baseline=("C1",),
            intermediate=("X1",),
        )
        assert decompose_kob(swapped).initial == -decompose_kob(data).initial

    def test_group_error_is_tagged(self):
        # Group 0's mediator is constant, so its design is rank deficient.
        data = build_dataset(
            {"R": [0, 0, 0, 1, 1, 1], "M": [2, 2, 2, 1, 2, 4], "Y": [1, 2, 3, 2, 3, 8]}
        )
        with pytest.raises(EstimationError, match="group 0:"):
            decompose_kob(data)

    def test_detail_order_covariates_then_mediator(self):
        data = random_dataset(3, n=30, n_baseline=1, n_intermediate=2)
        res = decompose_kob(data)
        assert list(res.detail.explained_by) == ["X1", "X2", "C1", "M"]


class TestCda:
    def test_worked_example_both_residual_modes(self, worked_cda_dataset):
        for mode in ("empirical-resample", "parametric-normal"):
            res = decompose_cda(worked_cda_dataset, CdaSettings(residual_mode=mode, seed=9))
            assert res.method == "CDA"
            npt.assert_allclose(res.initial, -1.0, rtol=1e-9)
            npt.assert_allclose(res.explained, -1.0, rtol=1e-9)
            npt.assert_allclose(res.unexplained, 0.0, atol=1e-9)

    def test_identical_noise_free_groups_exact_zero(self):
        # Y depends only on C (zero residuals, zero mediator slope), and the
        # mediator is nonlinear in C so the outcome design stays full rank.
        data = build_dataset(
            {
                "R": [0, 0, 0, 1, 1, 1],
                "C": [0, 1, 2, 0, 1, 2],
                "M": [0, 1, 0, 0, 1, 0],
                "Y": [0, 1, 2, 0, 1, 2],
            },
            baseline=("C",),
        )
        res = decompose_cda(data, CdaSettings(seed=4))
        assert res.initial == 0.0
        assert res.explained == 0.0
        assert res.unexplained == 0.0

    @given(seed=st.integers(0, 2**32 - 1))
    def test_additivity_exact(self, seed):
        data = random_dataset(seed, n=24, n_baseline=1, n_intermediate=1)
        res = decompose_cda(data, CdaSettings(mc_draws_per_unit=7, seed=seed % 97))
        npt.assert_allclose(res.initial, res.explained + res.unexplained, atol=1e-12)

    def test_deterministic_given_seed(self):
        data = random_dataset(8, n_baseline=1)
        a = decompose_cda(data, CdaSettings(seed=123))
        b = decompose_cda(data, CdaSettings(seed=123))
        c = decompose_cda(data, CdaSettings(seed=124))
        assert (a.initial, a.explained, a.unexplained) == (b.initial, b.explained, b.unexplained)
        assert a.explained != c.explained  # different stream, different draws

    def test_zero_residual_mediator_model_is_draw_count_invariant(self, worked_cda_dataset):
        low = decompose_cda(worked_cda_dataset, CdaSettings(mc_draws_per_unit=1, seed=0))
        high = decompose_cda(worked_cda_dataset, CdaSettings(mc_draws_per_unit=64, seed=5))
        assert low.explained == high.explained
        assert low.unexplained == high.unexplained

    def test_monte_carlo_error_shrinks_with_draws(self):
        data = random_dataset(21, n=60, n_baseline=1)
        # With a linear outcome model the only Monte-Carlo noise is the mean
        # of the residual draws, so the estimate converges to the plug-in
        # value at rate 1/sqrt(n1 * draws).
        small = decompose_cda(data, CdaSettings(mc_draws_per_unit=50, seed=3))
        big = decompose_cda(data, CdaSettings(mc_draws_per_unit=5000, seed=4))
        plug_in = decompose_cda(data, CdaSettings(mc_draws_per_unit=200000, seed=11))
        gap_small = abs(small.explained - plug_in.explained)
        gap_big = abs(big.explained - plug_in.explained)
        assert gap_big < gap_small
        assert gap_big < 0.01

    def test_initial_matches_regression_standardization(self):
        data = random_dataset(17, n=40, n_baseline=1)
        res = decompose_cda(data, CdaSettings(seed=2))
        mask0, mask1 = data.group_mask(0), data.group_mask(1)
        c, y = data.column("C1"), data.column("Y")
        design = np.column_stack([np.ones(mask0.sum()), c[mask0]])
        coef = np.linalg.lstsq(design, y[mask0], rcond=None)[0]
        ref = (coef[0] + coef[1] * c[mask1]).mean()
        npt.assert_allclose(res.initial, y[mask1].mean() - ref, rtol=1e-10)

    def test_settings_validation(self):
        with pytest.raises(ValueError, match="mc_draws_per_unit"):
            CdaSettings(mc_draws_per_unit=0)
        with pytest.raises(ValueError, match="residual_mode"):
            CdaSettings(residual_mode="bootstrap")

    def test_baseline_model_error_tagged(self):
        # Constant baseline covariate collides with the intercept in the
        # group-0 models.
        data = build_dataset(
            {
                "R": [0, 0, 1, 1],
                "C": [1, 1, 1, 1],
                "M": [1, 2, 1, 2],
                "Y": [1, 2, 3, 4],
            },
            baseline=("C",),
        )
        with pytest.raises(EstimationError, match="baseline models:"):
            decompose_cda(data)

    def test_outcome_model_error_tagged(self):
        # Group 1's mediator equals its baseline covariate, so the group-1
        # outcome design is rank deficient while group-0 models are fine.
        data = build_dataset(
            {
                "R": [0, 0, 0, 1, 1, 1],
                "C": [0, 1, 2, 0, 1, 2],
                "M": [1, 3, 2, 0, 1, 2],
                "Y": [1, 2, 3, 2, 3, 4],
            },
            baseline=("C",),
        )
        with pytest.raises(EstimationError, match="group 1 outcome model:"):
            decompose_cda(data)

    def test_interactions_flag_changes_model(self):
        rng = np.random.default_rng(6)
        n = 80
        r = np.repeat([0.0, 1.0], n // 2)
        c = rng.normal(size=n)
        m = rng.normal(1.0 - 0.5 * r + 0.3 * c, 1.0)
        y = rng.normal(0.5 * r + c + m + 0.8 * m * c, 0.5)
        data = build_dataset({"R": r, "C": c, "M": m, "Y": y}, baseline=("C",))
        plain = decompose_cda(data, CdaSettings(seed=1))
        inter = decompose_cda(data, CdaSettings(seed=1, interactions=True))
        assert plain.explained != inter.explained
        npt.assert_allclose(inter.initial, inter.explained + inter.unexplained, atol=1e-12)

    def test_interactions_flag_harmless_on_exactly_linear_data(self):
        # Y = 1 + 2C + M exactly, so the interaction coefficient is zero and
        # both model variants produce the same decomposition.
        c0 = [0.0, 1.0, 2.0, 4.0]
        m0 = [1.0, 0.0, 2.0, 1.0]
        c1 = [0.0, 1.0, 3.0, 4.0]
        m1 = [2.0, 1.0, 3.0, 2.0]
        data = build_dataset(
            {
                "R": [0] * 4 + [1] * 4,
                "C": c0 + c1,
                "M": m0 + m1,
                "Y": [1 + 2 * c + m for c, m in zip(c0 + c1, m0 + m1)],
            },
            baseline=("C",),
        )
        plain = decompose_cda(data, CdaSettings(seed=7))
        inter = decompose_cda(data, CdaSettings(seed=7, interactions=True))
        npt.assert_allclose(inter.initial, plain.initial, rtol=1e-12, atol=1e-12)
        npt.assert_allclose(inter.explained, plain.explained, rtol=1e-12, atol=1e-12)
        npt.assert_allclose(inter.unexplained, plain.unexplained, rtol=1e-12, atol=1e-12)


class TestBootstrap:
    def test_intervals_attached_to_point_estimate(self):
        data = random_dataset(31, n=30)
        plain = decompose_dic(data)
        booted = bootstrap(data, "DIC", B=25, seed=5)
        assert booted.initial == plain.initial
        assert booted.explained == plain.explained
        assert set(booted.intervals) == {"initial", "explained", "unexplained"}
        for lo, hi in booted.intervals.values():
            assert lo <= hi

    def test_deterministic(self):
        data = random_dataset(32, n=26)
        a = bootstrap(data, "KOB", B=17, seed=2)
        b = bootstrap(data, "KOB", B=17, seed=2)
        assert a.intervals == b.intervals
        assert a.intervals != bootstrap(data, "KOB", B=17, seed=3).intervals

    def test_b2_bounds_are_min_and_max(self):
        data = random_dataset(33, n=24)
        booted = bootstrap(data, "DIC", B=2, seed=9)
        idx0 = np.nonzero(data.group_mask(0))[0]
        idx1 = np.nonzero(data.group_mask(1))[0]
        replicates = []
        for b in range(2):
            rng = substream(9, b, 0)
            resample = np.concatenate(
                [
                    idx0[rng.integers(0, idx0.size, idx0.size)],
                    idx1[rng.integers(0, idx1.size, idx1.size)],
                ]
            )
            replicates.append(decompose_dic(data.take(resample)))
        values = [r.explained for r in replicates]
        assert booted.intervals["explained"] == (min(values), max(values))

    def test_noise_free_outcome_gives_zero_width_intervals(self):
        # Y equals R exactly, so every resample recovers the same
        # coefficients and the percentile interval collapses to a point.
        data = build_dataset(
            {"R": [0, 0, 0, 1, 1, 1], "M": [1, 2, 4, 1, 3, 4], "Y": [0, 0, 0, 1, 1, 1]}
        )
        booted = bootstrap(data, "DIC", B=12, seed=1)
        for name, (lo, hi) in booted.intervals.items():
            assert hi - lo < 1e-12
            assert abs(booted.quantity(name) - lo) < 1e-12
        npt.assert_allclose(booted.initial, 1.0, rtol=1e-12)
        assert abs(booted.explained) < 1e-12

    def test_cda_bootstrap_deterministic(self):
        data = random_dataset(34, n=24, n_baseline=1)
        settings = CdaSettings(mc_draws_per_unit=9, seed=77)
        a = bootstrap(data, "CDA", settings=settings, B=7, seed=4)
        b = bootstrap(data, "CDA", settings=settings, B=7, seed=4)
        assert a.intervals == b.intervals

    def test_unknown_method_and_tiny_b_rejected(self):
        data = random_dataset(35, n=20)
        with pytest.raises(ValueError, match="unknown method"):
            bootstrap(data, "XYZ", B=5)
        with pytest.raises(ValueError, match="B >= 2"):
            bootstrap(data, "DIC", B=1)

    def test_failed_resamples_are_retried(self, monkeypatch):
        data = random_dataset(36, n=20)
        point = decompose_dic(data)
        calls = {"count": 0}

        def stub(d, settings):
            calls["count"] += 1
            if calls["count"] == 1:
                return point  # point estimate
            if calls["count"] in (2, 3):  # first replicate fails twice
                raise EstimationError("synthetic failure")
            return dataclasses.replace(point, initial=float(calls["count"]))

        monkeypatch.setitem(decompose_module._ESTIMATORS, "DIC", stub)
        booted = bootstrap(data, "DIC", B=2, seed=0)
        # Replicates came from calls 4 and 5 after two retries.
        assert booted.intervals["initial"] == (4.0, 5.0)

    def test_retry_budget_exhaustion_reports_counts(self, monkeypatch):
        data = random_dataset(37, n=20)
        point = decompose_dic(data)
        calls = {"count": 0}

        def stub(d, settings):
            calls["count"] += 1
            if calls["count"] == 1:
                return point
            raise EstimationError("synthetic failure")

        monkeypatch.setitem(decompose_module._ESTIMATORS, "DIC", stub)
        with pytest.raises(
            EstimationError, match=r"bootstrap abandoned: 21 failed resamples \(limit 20\)"
        ):
            bootstrap(data, "DIC", B=2, seed=0)
