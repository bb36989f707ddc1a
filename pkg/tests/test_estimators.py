"""Direct estimators, model poststratification, replicate metrics."""

import math

import numpy as np
import pytest

from plpmlg.design import SampleDesign
from plpmlg.estimators import (
    AreaEstimate,
    direct_area_estimates,
    hajek_variance,
    ht_total,
    poststratify_totals,
    predictive_rngs,
    replicate_metrics,
    sampled_area_base,
    summarize_total_draws,
    true_area_totals,
)
from plpmlg.exceptions import EstimationError, InvalidParameterError
from plpmlg.gibbs import PosteriorDraws
from plpmlg.population import Population


class TestHTTotal:
    def test_hand_value(self):
        # 3/0.5 + 1/0.25 = 10
        assert ht_total(np.array([3.0, 1.0]),
                        np.array([0.5, 0.25])) == pytest.approx(10.0)

    def test_census_recovers_total(self):
        y = np.array([1.0, 4.0, 2.5])
        assert ht_total(y, np.ones(3)) == pytest.approx(y.sum(), abs=1e-12)

    def test_empty_sum_is_zero(self):
        assert ht_total(np.array([]), np.array([])) == 0.0

    def test_probability_validation(self):
        with pytest.raises(InvalidParameterError):
            ht_total(np.ones(1), np.array([0.0]))


class TestHajekVariance:
    def test_census_is_zero(self):
        assert hajek_variance(np.array([1.0, 2.0]), np.ones(2)) == 0.0

    def test_all_zero_responses_flagged_nan(self):
        v = hajek_variance(np.zeros(3), np.full(3, 0.5))
        assert math.isnan(v)

    def test_hand_value(self):
        # y = (1, 0), pi = (0.5, 0.5): t = (2, 0), q = (0.5, 0.5),
        # A = 1, deviations (1, -1), v = 2 * (0.5 + 0.5) = 2
        v = hajek_variance(np.array([1.0, 0.0]), np.array([0.5, 0.5]))
        assert v == pytest.approx(2.0, abs=1e-12)

    def test_needs_two_units(self):
        with pytest.raises(EstimationError):
            hajek_variance(np.ones(1), np.full(1, 0.5))


def two_area_population():
    return Population(unit_id=np.arange(10),
                      area_id=np.repeat([0, 1], 5),
                      z=np.array([0, 2, 0, 1, 3, 0, 0, 4, 1, 0]),
                      size_measure=np.ones(10))


class TestDirectAreaEstimates:
    def test_every_area_present(self):
        pop = two_area_population()
        design = SampleDesign(selected=np.array([0, 1, 5, 6]),
                              pi=np.full(4, 0.4))
        ests = direct_area_estimates(pop, design)
        assert [e.area_id for e in ests] == [0, 1]
        assert all(e.method == "direct" for e in ests)
        # area 0 sampled units: z = (0, 2) -> one vacant, HT = 1/0.4
        assert ests[0].point == pytest.approx(2.5)
        # area 1 sampled: z = (0, 0) -> both vacant but variance is NaN-free
        assert ests[1].point == pytest.approx(5.0)

    def test_unsampled_area_flagged(self):
        pop = two_area_population()
        design = SampleDesign(selected=np.array([0, 1]), pi=np.full(2, 0.4))
        ests = direct_area_estimates(pop, design)
        assert not ests[0].flagged_missing
        assert ests[1].flagged_missing and ests[1].point == 0.0

    def test_single_unit_area_flagged(self):
        pop = two_area_population()
        design = SampleDesign(selected=np.array([0, 1, 5]),
                              pi=np.full(3, 0.4))
        ests = direct_area_estimates(pop, design)
        assert ests[1].flagged_missing
        assert ests[1].point == pytest.approx(2.5)

    def test_all_zero_indicator_flagged(self):
        pop = two_area_population()
        # area 0 units 1 and 4 have z = 2, 3: no vacancies in sample
        design = SampleDesign(selected=np.array([1, 4]), pi=np.full(2, 0.4))
        ests = direct_area_estimates(pop, design)
        assert ests[0].flagged_missing and ests[0].point == 0.0

    def test_count_target(self):
        pop = two_area_population()
        design = SampleDesign(selected=np.array([1, 4]), pi=np.full(2, 0.5))
        ests = direct_area_estimates(pop, design, vacancy=False)
        assert ests[0].point == pytest.approx((2.0 + 3.0) / 0.5)


class TestSummarizeTotalDraws:
    def test_unweighted_reduces_to_plain_moments(self):
        draws = np.array([[1.0, 4.0], [3.0, 4.0], [5.0, 4.0]])
        point, se = summarize_total_draws(draws)
        assert np.allclose(point, [3.0, 4.0])
        assert np.allclose(se, [np.sqrt(8.0 / 3.0), 0.0])

    def test_degenerate_weights_pick_one_draw(self):
        draws = np.array([[1.0], [100.0]])
        point, se = summarize_total_draws(draws, np.array([0.0, -1e8]))
        assert point[0] == pytest.approx(1.0)
        assert se[0] == pytest.approx(0.0, abs=1e-6)

    def test_weight_offset_invariance(self):
        draws = np.random.default_rng(0).normal(10.0, 2.0, (50, 3))
        logw = np.random.default_rng(1).normal(0.0, 0.5, 50)
        p1, s1 = summarize_total_draws(draws, logw)
        p2, s2 = summarize_total_draws(draws, logw + 123.0)
        assert np.allclose(p1, p2, atol=1e-10)
        assert np.allclose(s1, s2, atol=1e-10)

    def test_empty_rejected(self):
        with pytest.raises(InvalidParameterError):
            summarize_total_draws(np.empty((0, 2)))


def rigged_draws(kept, n_x, r, beta_value, n, imp=None):
    return PosteriorDraws(
        beta=np.full((kept, n_x), beta_value),
        eta=np.zeros((kept, r)),
        xi=np.zeros((kept, n)),
        sigma_k=np.ones(kept),
        sigma_xi=np.full(kept, 1e-9),
        imp_log_w=np.zeros(kept) if imp is None else imp,
    )


class TestPoststratifyTotals:
    def test_census_exact(self):
        pop = two_area_population()
        design = SampleDesign(selected=np.arange(10), pi=np.ones(10))
        draws = rigged_draws(4, 1, 2, 0.0, 10)
        pred = poststratify_totals(draws, pop, design, "PL-PMLG", 0)
        truth = true_area_totals(pop)
        assert np.array_equal(pred.point, [truth[0], truth[1]])
        assert np.array_equal(pred.se, np.zeros(2))

    def test_negligible_intensity_predicts_all_vacant(self):
        # beta = -40 puts the count intensity at ~0, so every unsampled
        # unit is predicted vacant with probability 1
        pop = two_area_population()
        design = SampleDesign(selected=np.array([0, 1, 5, 6]),
                              pi=np.full(4, 0.4))
        draws = rigged_draws(6, 1, 2, -40.0, 4)
        pred = poststratify_totals(draws, pop, design, "PL-PMLG", 3,
                                   fresh_xi=False)
        base, unsampled, codes_u = sampled_area_base(pop, design)
        want = base + np.bincount(codes_u, minlength=2)
        assert np.allclose(pred.point, want, atol=1e-9)
        assert np.allclose(pred.se, np.zeros(2), atol=1e-9)

    def test_huge_intensity_predicts_none_vacant(self):
        pop = two_area_population()
        design = SampleDesign(selected=np.array([0, 1, 5, 6]),
                              pi=np.full(4, 0.4))
        draws = rigged_draws(6, 1, 2, 8.0, 4)
        pred = poststratify_totals(draws, pop, design, "PL-PMLG", 3,
                                   fresh_xi=False)
        base, _, _ = sampled_area_base(pop, design)
        assert np.allclose(pred.point, base, atol=1e-9)

    def test_model_name_validated(self):
        pop = two_area_population()
        design = SampleDesign(selected=np.array([0, 5]), pi=np.full(2, 0.4))
        draws = rigged_draws(2, 1, 2, 0.0, 2)
        with pytest.raises(InvalidParameterError):
            poststratify_totals(draws, pop, design, "direct", 0)

    def test_area_estimates_carry_method(self):
        pop = two_area_population()
        design = SampleDesign(selected=np.array([0, 1, 5, 6]),
                              pi=np.full(4, 0.4))
        draws = rigged_draws(3, 1, 2, 0.0, 4)
        pred = poststratify_totals(draws, pop, design, "UW-PMLG", 1)
        ests = pred.area_estimates()
        assert [e.method for e in ests] == ["UW-PMLG", "UW-PMLG"]
        assert [e.area_id for e in ests] == [0, 1]


class TestPredictiveRngs:
    def test_seed_keyed_streams_are_partition_independent(self):
        a = predictive_rngs(7, 3)
        b = predictive_rngs(7, 5)
        for t in range(3):
            assert a[t].random() == b[t].random()

    def test_generator_spawns(self):
        rng = np.random.default_rng(0)
        streams = predictive_rngs(rng, 4)
        assert len(streams) == 4
        vals = {s.random() for s in streams}
        assert len(vals) == 4


def test_true_area_totals():
    pop = two_area_population()
    totals = true_area_totals(pop)
    assert totals == {0: 2.0, 1: 3.0}
    counts = true_area_totals(pop, vacancy=False)
    assert counts == {0: 6.0, 1: 5.0}


class TestReplicateMetrics:
    def make_estimates(self):
        # two replicates, one method, two areas; truth 2 and 3
        rep0 = [AreaEstimate(0, 3.0, 1.0, "direct"),
                AreaEstimate(1, 3.0, 2.0, "direct")]
        rep1 = [AreaEstimate(0, 1.0, 3.0, "direct"),
                AreaEstimate(1, 5.0, math.nan, "direct",
                             flagged_missing=True)]
        return [rep0, rep1]

    def test_hand_computed_metrics(self):
        truth = {0: 2.0, 1: 3.0}
        metric_rows, se_rows = replicate_metrics(self.make_estimates(), truth)
        row = metric_rows[0]
        # errors: area0 (1, -1), area1 (0, 2): mse = (1+1+0+4)/4
        assert row["mse"] == pytest.approx(1.5)
        # per-area mean errors 0 and 1 -> mean |bias| = 0.5
        assert row["abs_bias"] == pytest.approx(0.5)
        assert se_rows[0] == {"method": "direct", "area_id": 0,
                              "avg_se": pytest.approx(2.0)}
        # the flagged replicate is excluded from the SE average
        assert se_rows[1]["avg_se"] == pytest.approx(2.0)

    def test_pooled_bias(self):
        truth = {0: 2.0, 1: 3.0}
        metric_rows, _ = replicate_metrics(self.make_estimates(), truth,
                                           pooled_bias=True)
        # pooled mean error = (1 - 1 + 0 + 2) / 4 = 0.5
        assert metric_rows[0]["abs_bias"] == pytest.approx(0.5)

    def test_all_flagged_area_reports_none(self):
        reps = [[AreaEstimate(0, 1.0, math.nan, "direct",
                              flagged_missing=True)]]
        _, se_rows = replicate_metrics(reps, {0: 1.0})
        assert se_rows[0]["avg_se"] is None

    def test_unknown_area_rejected(self):
        reps = [[AreaEstimate(9, 1.0, 0.5, "direct")]]
        with pytest.raises(EstimationError):
            replicate_metrics(reps, {0: 1.0})

    def test_methods_sorted_in_output(self):
        reps = [[AreaEstimate(0, 1.0, 0.5, "direct"),
                 AreaEstimate(0, 1.0, 0.5, "GA")]]
        metric_rows, _ = replicate_metrics(reps, {0: 1.0})
        assert [r["method"] for r in metric_rows] == ["GA", "direct"]


def test_area_estimate_validation():
    with pytest.raises(InvalidParameterError):
        AreaEstimate(0, 1.0, 0.5, "bogus")
    with pytest.raises(InvalidParameterError):
        AreaEstimate(0, 1.0, -0.5, "direct")
