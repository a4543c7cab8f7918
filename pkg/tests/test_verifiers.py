import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from smoothbench.adversaries import (
    BoxUniformAdversary,
    LowerBoundAdversary,
    unit_box,
)
from smoothbench.core import ConfigurationError, NoiseModel
from smoothbench.hypotheses import (
    CoordinateRecordLearner,
    FiniteFamily,
    FiniteFamilyERMLearner,
    binary_difference_family,
    constant_function,
    random_step_family,
    two_step_function,
)
from smoothbench.rng import make_rng
from smoothbench.verifiers import (
    InfeasiblePatternError,
    SmallBallParams,
    basic_inequality_check,
    decoupling_gap,
    extremal_sequence,
    norm_comparison_gap,
    small_ball_check,
    small_ball_norm_domination,
    surprise_set,
    verify_self_bounded,
)


class TestSurpriseSet:
    def test_all_ones_k2_empty(self):
        assert surprise_set([1, 1, 1, 1], 2.0).indices == []

    def test_sparse_sequence(self):
        assert surprise_set([1, 0, 0, 1], 2.0).indices == [3]

    def test_k_above_horizon_always_empty(self):
        assert surprise_set([1, 1, 1, 1], 5.0).indices == []

    @given(st.lists(st.floats(0, 1), min_size=1, max_size=15), st.floats(0.1, 3.0))
    @settings(max_examples=120, deadline=None)
    def test_recheck_and_small_k_property(self, tail, k_scale):
        a = [1.0] + tail
        T = len(a)
        K = k_scale * T
        res = surprise_set(a, K)
        assert res.recheck()
        if K > T:
            assert res.indices == []

    def test_domain_errors(self):
        with pytest.raises(ConfigurationError):
            surprise_set([0.5, 0.2], 1.0)
        with pytest.raises(ConfigurationError):
            surprise_set([1.0, 1.5], 1.0)
        with pytest.raises(ConfigurationError):
            surprise_set([1.0, 0.5], 0.0)


class TestExtremalSequence:
    def test_empty_times(self):
        b = extremal_sequence(6, 2.0, [])
        assert b.tolist() == [1, 0, 0, 0, 0, 0]

    def test_hand_computed_pattern(self):
        b = extremal_sequence(4, 1.0, [1, 2])
        assert b.tolist() == [1, 1, 1, 0]
        assert surprise_set(b, 1.0).indices == [1, 2]

    def test_infeasible_pattern_raises(self):
        with pytest.raises(InfeasiblePatternError):
            extremal_sequence(4, 3.0, [1, 2])

    def test_k_above_first_time_infeasible(self):
        with pytest.raises(InfeasiblePatternError):
            extremal_sequence(8, 2.5, [2, 5])

    def test_times_out_of_range(self):
        with pytest.raises(ConfigurationError):
            extremal_sequence(4, 1.0, [0, 2])
        with pytest.raises(ConfigurationError):
            extremal_sequence(4, 1.0, [4])

    def test_feasible_patterns_reproduce_and_stay_bounded(self):
        rng = make_rng(1)
        produced = 0
        while produced < 120:
            T = int(rng.integers(2, 65))
            n_times = int(rng.integers(0, min(T, 8)))
            times = sorted(rng.choice(np.arange(1, T), size=n_times, replace=False).tolist())
            K = float(rng.uniform(0.05, times[0] if times else T))
            try:
                b = extremal_sequence(T, K, times)
            except InfeasiblePatternError:
                continue
            produced += 1
            assert np.all(b <= 1.0) and np.all(b >= 0.0)
            assert surprise_set(b, K).indices == times


class TestVerifySelfBounded:
    GRID = [0, 0.25, 0.5, 0.75, 1]

    def test_large_k_gives_empty_sets(self):
        # eps = 0.5 at T = 8 puts K above the horizon, forcing empty sets.
        res = verify_self_bounded(8, self.GRID, 0.5)
        assert res.K > 8
        assert res.worst == 0
        assert res.passed

    def test_t8_eps09(self):
        res = verify_self_bounded(8, self.GRID, 0.9)
        assert res.passed
        assert res.worst <= 7
        assert res.sequences_checked == 5**7

    def test_witness_is_reproducible(self):
        res = verify_self_bounded(6, self.GRID, 0.9)
        assert len(surprise_set(res.witness, res.K).indices) == res.worst

    def test_grid_must_contain_endpoints(self):
        with pytest.raises(ConfigurationError):
            verify_self_bounded(5, [0.25, 0.5], 0.5)

    def test_small_horizons_all_pass(self):
        for T in range(2, 7):
            for eps in (0.3, 0.5, 0.9):
                assert verify_self_bounded(T, self.GRID, eps).passed


class TestDecouplingGap:
    def test_singleton_family_both_sides_zero(self):
        fam = FiniteFamily([constant_function(0.0)])
        res = decoupling_gap(FiniteFamilyERMLearner(fam, 1),
                             LowerBoundAdversary(1, 0.5, "auto"), 64, 10, seed=5)
        assert res.lhs == 0.0 and res.rhs == 0.0 and res.passed

    def test_iid_record_learner(self):
        res = decoupling_gap(CoordinateRecordLearner(1),
                             LowerBoundAdversary(1, 1.0, "auto"), 256, 200, seed=3)
        assert res.passed
        assert res.lhs <= res.rhs

    def test_ladder_adversary(self):
        res = decoupling_gap(CoordinateRecordLearner(1),
                             LowerBoundAdversary(1, 0.2, "auto"), 256, 200, seed=4)
        assert res.passed

    def test_iid_diagonal_remark(self):
        # At sigma = 1 the on-path total is within a constant of the
        # diagonal tangent total plus a log term.
        T = 256
        res = decoupling_gap(CoordinateRecordLearner(1),
                             LowerBoundAdversary(1, 1.0, "auto"), T, 200, seed=6)
        assert res.lhs <= 10.0 * (math.log(T) + res.extras["diag_mean"]) \
            + 3 * math.hypot(res.lhs_se, 10.0 * res.extras["diag_se"])


class TestNormComparisonGap:
    def test_singleton_lhs_nonpositive(self):
        fam = FiniteFamily([two_step_function(0.2, 0.8)])
        res = norm_comparison_gap(fam, LowerBoundAdversary(1, 0.5, "auto"),
                                  100, 0.5, 40, seed=7, wills_reps=40)
        assert res.lhs <= 3 * res.lhs_se
        assert res.rhs > 0
        assert res.passed

    def test_sixteen_member_example(self):
        fam = random_step_family(make_rng(99), 16)
        res = norm_comparison_gap(fam, LowerBoundAdversary(1, 0.25, "auto"),
                                  200, 0.5, 60, seed=8, wills_reps=60)
        assert res.passed

    def test_lhs_monotone_decreasing_in_c(self):
        fam = random_step_family(make_rng(100), 8)
        adv = LowerBoundAdversary(1, 0.5, "auto")
        lhs = [norm_comparison_gap(fam, adv, 100, c, 30, seed=9, wills_reps=10).lhs
               for c in (0.5, 1.0, 4.0)]
        assert lhs[0] >= lhs[1] >= lhs[2]

    def test_sample_size_capped(self):
        fam = random_step_family(make_rng(101), 4)
        res = norm_comparison_gap(fam, LowerBoundAdversary(1, 0.25, "auto"),
                                  200, 0.5, 10, seed=10, m_cap=500, wills_reps=10)
        assert res.extras["m"] == 500
        assert res.extras["m_capped"]

    def test_verdict_recomputable_from_reported_numbers(self):
        fam = random_step_family(make_rng(102), 6)
        res = norm_comparison_gap(fam, LowerBoundAdversary(1, 0.5, "auto"),
                                  100, 0.5, 20, seed=11, wills_reps=10)
        recomputed = res.lhs <= res.rhs + 3 * res.pooled_se
        assert recomputed == res.passed
        assert res.pooled_se == pytest.approx(math.hypot(res.lhs_se, res.rhs_se))


class TestBasicInequality:
    def _family_and_adversary(self, sigma):
        fam = random_step_family(make_rng(123), 8)
        return fam, BoxUniformAdversary(1, sigma, fstar=fam.members[0])

    def test_noiseless_floor(self):
        fam, adv = self._family_and_adversary(0.5)
        res = basic_inequality_check(fam, adv, 64, NoiseModel.noiseless(), 20, seed=11)
        assert res.lhs <= 1e-12
        assert res.passed
        assert res.extras["vacuous_noise_floor"]

    def test_gaussian_noise_example(self):
        fam, adv = self._family_and_adversary(0.5)
        res = basic_inequality_check(fam, adv, 128, NoiseModel.gaussian(0.1),
                                     100, seed=12, wills_reps=25)
        assert res.passed
        assert res.rhs > 0

    def test_error_shrinks_with_horizon(self):
        fam, adv = self._family_and_adversary(0.5)
        short = basic_inequality_check(fam, adv, 128, NoiseModel.gaussian(0.3),
                                       80, seed=13, wills_reps=10)
        long = basic_inequality_check(fam, adv, 512, NoiseModel.gaussian(0.3),
                                      80, seed=14, wills_reps=10)
        assert long.lhs <= short.lhs + 3 * math.hypot(long.lhs_se, short.lhs_se)


class TestSmallBall:
    def test_constant_function_never_violates(self):
        params = SmallBallParams(c=0.125, c_prime=0.5, sigma=0.5, delta_tilde=0.1)
        fam = FiniteFamily([constant_function(1.0)])
        res = small_ball_check(fam, unit_box(1), params, 20_000, seed=15)
        assert res.max_violation == 0.0
        assert res.passed

    def test_interval_indicator_pass_and_fail(self):
        fam = FiniteFamily([two_step_function(0.1, 0.9)])
        ok = small_ball_check(fam, unit_box(1),
                              SmallBallParams(0.125, 0.5, 0.5, 0.1), 50_000, seed=16)
        assert abs(ok.max_violation - 0.2) <= 3 * ok.stderr
        assert ok.passed
        bad = small_ball_check(fam, unit_box(1),
                               SmallBallParams(0.0625, 0.5, 0.25, 0.1), 50_000, seed=16)
        assert abs(bad.max_violation - 0.2) <= 3 * bad.stderr
        assert not bad.passed

    def test_zero_norm_member_excluded(self):
        fam = FiniteFamily([constant_function(0.0), constant_function(1.0)])
        with pytest.warns(RuntimeWarning):
            res = small_ball_check(fam, unit_box(1),
                                   SmallBallParams(0.125, 0.5, 0.5, 0.1), 5000, seed=17)
        assert res.excluded == [0]

    def test_params_domain(self):
        with pytest.raises(ConfigurationError):
            SmallBallParams(c=0.0, c_prime=0.5, sigma=0.5, delta_tilde=0.1)
        with pytest.raises(ConfigurationError):
            SmallBallParams(c=0.1, c_prime=1.0, sigma=0.5, delta_tilde=0.1)


class TestNormDomination:
    PARAMS = SmallBallParams(c=0.125, c_prime=0.5, sigma=0.5, delta_tilde=0.1)

    def test_singleton(self):
        fam = FiniteFamily([two_step_function(0.1, 0.9)])
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            res = small_ball_norm_domination(fam, unit_box(1),
                                             LowerBoundAdversary(1, 0.5, "auto"),
                                             self.PARAMS, 512, 20, seed=18,
                                             nu_samples=20_000)
        assert res.passed

    def test_eight_member_difference_family(self):
        pairs = [(0.01 * j, 0.85 + 0.015 * j) for j in range(8)]
        fam = binary_difference_family(pairs)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            res = small_ball_norm_domination(fam, unit_box(1),
                                             LowerBoundAdversary(1, 0.5, "auto"),
                                             self.PARAMS, 2048, 100, seed=19,
                                             nu_samples=100_000)
        assert res.passed
        assert res.extras["advisory"]

    def test_unit_delta_structural_pass(self):
        params = SmallBallParams(c=0.125, c_prime=0.5, sigma=0.5, delta_tilde=1.0)
        fam = FiniteFamily([two_step_function(0.1, 0.9)])
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            res = small_ball_norm_domination(fam, unit_box(1),
                                             LowerBoundAdversary(1, 0.5, "auto"),
                                             params, 256, 10, seed=20,
                                             nu_samples=10_000)
        assert res.rhs >= 1.0
        assert res.passed
