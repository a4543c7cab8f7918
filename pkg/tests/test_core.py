import math

import numpy as np
import pytest
from scipy import stats

from smoothbench.adversaries import BoxUniformAdversary, LowerBoundAdversary
from smoothbench.core import (
    ConfigurationError,
    NoiseModel,
    Transcript,
    run_covariate_session,
    run_session,
    run_tangent_session,
)
from smoothbench.hypotheses import (
    CoordinateRecordLearner,
    FiniteFamily,
    FiniteFamilyERMLearner,
    RecordThresholdLearner,
    constant_function,
    step_function,
)
from smoothbench.rng import derive_seed


def harmonic(n: int) -> float:
    return sum(1.0 / t for t in range(1, n + 1))


class TestNoiseModel:
    def test_noiseless_requires_zero_nu(self):
        with pytest.raises(ConfigurationError):
            NoiseModel("noiseless", 0.5)

    def test_unknown_kind(self):
        with pytest.raises(ConfigurationError):
            NoiseModel("uniform", 0.1)

    def test_negative_nu(self):
        with pytest.raises(ConfigurationError):
            NoiseModel("gaussian", -1.0)


class TestTranscriptInvariants:
    def test_session_transcript_validates(self):
        tr = run_session(CoordinateRecordLearner(1), LowerBoundAdversary(1, 0.5, 0.05),
                         200, NoiseModel.noiseless(), seed=3)
        tr.validate()
        assert len(tr.examples) == 200
        assert np.all((tr.xs >= 0) & (tr.xs <= 1))

    def test_cum_err_mismatch_detected(self):
        tr = run_session(CoordinateRecordLearner(1), LowerBoundAdversary(1, 0.5, 0.05),
                         50, NoiseModel.noiseless(), seed=3)
        bad = Transcript(tr.xs, tr.ys, tr.predictions, tr.target_values,
                         tr.step_losses, tr.cum_err + 1.0, tr.seed, tr.params)
        with pytest.raises(Exception):
            bad.validate()

    def test_binary_losses_zero_one(self):
        tr = run_session(CoordinateRecordLearner(1), LowerBoundAdversary(1, 0.2, "auto"),
                         500, NoiseModel.noiseless(), seed=11)
        assert set(np.unique(tr.step_losses)) <= {0.0, 1.0}


class TestRunSession:
    def test_singleton_family_zero_error(self):
        fam = FiniteFamily([constant_function(0.0)])
        learner = FiniteFamilyERMLearner(fam, d=1)
        tr = run_session(learner, LowerBoundAdversary(1, 0.3, "auto"), 300,
                         NoiseModel.noiseless(), seed=5)
        assert tr.cum_err == 0.0

    def test_record_count_matches_harmonic_sum(self):
        # sigma=1 degenerates to iid uniforms, where the expected number of
        # strict records after T draws is the T-th harmonic number.
        adv = LowerBoundAdversary(1, 1.0, "auto")
        learner = CoordinateRecordLearner(1)
        reps = 8000
        errs = [run_session(learner, adv, 100, NoiseModel.noiseless(),
                            derive_seed(21, r)).cum_err for r in range(reps)]
        mean = float(np.mean(errs))
        se = float(np.std(errs, ddof=1) / math.sqrt(reps))
        assert abs(mean - harmonic(100)) <= 4 * se

    def test_forced_error_floor_small_replicates(self):
        adv = LowerBoundAdversary(1, 0.1, "auto")
        learner = CoordinateRecordLearner(1)
        errs = [run_session(learner, adv, 10_000, NoiseModel.noiseless(),
                            derive_seed(33, r)).cum_err for r in range(30)]
        assert float(np.mean(errs)) >= 150.0

    def test_dimension_mismatch(self):
        with pytest.raises(ConfigurationError):
            run_session(CoordinateRecordLearner(2), LowerBoundAdversary(1, 0.5, 0.1),
                        10, NoiseModel.noiseless(), seed=0)

    def test_bad_horizon(self):
        with pytest.raises(ConfigurationError):
            run_session(CoordinateRecordLearner(1), LowerBoundAdversary(1, 0.5, 0.1),
                        0, NoiseModel.noiseless(), seed=0)

    def test_params_carry_resolved_eps(self):
        adv = LowerBoundAdversary(1, 0.1, "auto")
        tr = run_session(CoordinateRecordLearner(1), adv, 400,
                         NoiseModel.noiseless(), seed=2)
        assert tr.params["eps"] == pytest.approx(adv.resolve_eps(400))
        assert isinstance(tr.params["eps"], float)

    def test_determinism_same_seed(self):
        adv = LowerBoundAdversary(2, 0.3, "auto")
        learner = CoordinateRecordLearner(2)
        a = run_session(learner, adv, 400, NoiseModel.noiseless(), seed=77)
        b = run_session(learner, adv, 400, NoiseModel.noiseless(), seed=77)
        assert np.array_equal(a.xs, b.xs)
        assert np.array_equal(a.predictions, b.predictions)
        assert a.cum_err == b.cum_err

    def test_replicate_order_independence(self):
        adv = LowerBoundAdversary(1, 0.4, "auto")
        learner = CoordinateRecordLearner(1)
        seeds = [derive_seed(9, r) for r in range(6)]
        forward = [run_session(learner, adv, 100, NoiseModel.noiseless(), s).cum_err
                   for s in seeds]
        backward = [run_session(learner, adv, 100, NoiseModel.noiseless(), s).cum_err
                    for s in reversed(seeds)]
        assert forward == backward[::-1]

    def test_prefix_property(self):
        adv = LowerBoundAdversary(1, 0.25, 0.05)
        learner = CoordinateRecordLearner(1)
        short = run_session(learner, adv, 200, NoiseModel.noiseless(), seed=13)
        long = run_session(learner, adv, 600, NoiseModel.noiseless(), seed=13)
        assert np.array_equal(short.xs, long.xs[:200])
        assert np.array_equal(short.predictions, long.predictions[:200])
        assert long.cum_err >= short.cum_err

    def test_noise_stream_does_not_perturb_covariates(self):
        fam = FiniteFamily([step_function(0.3), step_function(0.6)])
        adv = BoxUniformAdversary(1, 0.8, fstar=fam.members[0])
        learner = FiniteFamilyERMLearner(fam, d=1)
        clean = run_session(learner, adv, 300, NoiseModel.noiseless(), seed=19)
        noisy = run_session(learner, adv, 300, NoiseModel.gaussian(0.3), seed=19)
        assert np.array_equal(clean.xs, noisy.xs)
        eta = noisy.ys - noisy.target_values
        assert abs(float(eta.mean())) <= 4 * 0.3 / math.sqrt(300)
        assert 0.2 <= float(eta.std(ddof=1)) <= 0.4

    def test_labels_not_clipped(self):
        fam = FiniteFamily([constant_function(1.0)])
        adv = BoxUniformAdversary(1, 1.0, fstar=fam.members[0])
        learner = FiniteFamilyERMLearner(fam, d=1)
        tr = run_session(learner, adv, 2000, NoiseModel.gaussian(1.0), seed=23)
        assert tr.ys.max() > 1.0


class TestTangentSession:
    def test_primal_matches_run_session(self):
        adv = LowerBoundAdversary(1, 0.5, "auto")
        learner = CoordinateRecordLearner(1)
        tr = run_session(learner, adv, 500, NoiseModel.noiseless(), seed=99)
        tt = run_tangent_session(adv, learner, 500, seed=99)
        assert np.array_equal(tr.xs, tt.primal)
        assert len(tt.history_seeds) == 500

    def test_iid_marginals_match_ks(self):
        # sigma=1: primal and tangent draws share the uniform law; the
        # two-sample Kolmogorov-Smirnov statistic stays below the 1%
        # critical value for 10^4 pooled draws.
        tt = run_tangent_session(LowerBoundAdversary(1, 1.0, "auto"),
                                 CoordinateRecordLearner(1), 10_000, seed=99)
        ks = stats.ks_2samp(tt.primal[:, 0], tt.tangent[:, 0])
        crit = 1.6276 * math.sqrt(2 / 10_000)
        assert ks.statistic < crit

    def test_single_step_exchangeable(self):
        xs, xps = [], []
        adv = LowerBoundAdversary(1, 1.0, "auto")
        for r in range(4000):
            tt = run_tangent_session(adv, CoordinateRecordLearner(1), 1,
                                     derive_seed(55, r))
            xs.append(tt.primal[0, 0])
            xps.append(tt.tangent[0, 0])
        ks = stats.ks_2samp(xs, xps)
        assert ks.pvalue > 0.01

    def test_ladder_adversary_per_step_means_agree(self):
        adv = LowerBoundAdversary(1, 0.5, "auto")
        P, Q = [], []
        for r in range(6000):
            tt = run_tangent_session(adv, CoordinateRecordLearner(1), 50,
                                     derive_seed(1234, r))
            P.append(tt.primal[:, 0])
            Q.append(tt.tangent[:, 0])
        P, Q = np.asarray(P), np.asarray(Q)
        n = P.shape[0]
        se = np.sqrt(P.var(axis=0, ddof=1) / n + Q.var(axis=0, ddof=1) / n)
        z = np.abs(P.mean(axis=0) - Q.mean(axis=0)) / se
        assert float(z.max()) <= 3.0

    def test_tangent_draws_do_not_perturb_primal(self):
        adv = LowerBoundAdversary(1, 0.3, "auto")
        learner = CoordinateRecordLearner(1)
        with_tangent = run_tangent_session(adv, learner, 300, seed=7)
        plain = run_session(learner, adv, 300, NoiseModel.noiseless(), seed=7)
        assert np.array_equal(plain.xs, with_tangent.primal)


class TestCovariateSession:
    def test_matches_full_session(self):
        adv = LowerBoundAdversary(2, 0.4, "auto")
        xs = run_covariate_session(adv, 200, seed=31)
        tr = run_session(CoordinateRecordLearner(2), adv, 200,
                         NoiseModel.noiseless(), seed=31)
        assert np.array_equal(xs, tr.xs)


class TestRecordLearnerVariants:
    def test_all_coordinate_rule_is_session_mistake_indicator(self):
        adv = LowerBoundAdversary(2, 0.3, "auto")
        tr = run_session(RecordThresholdLearner(2), adv, 400,
                         NoiseModel.noiseless(), seed=41)
        maxima = np.full(2, -1.0)
        for t in range(400):
            expected = float(np.all(tr.xs[t] > maxima))
            assert tr.predictions[t] == expected
            maxima = np.maximum(maxima, tr.xs[t])

    def test_any_coordinate_rule_is_session_mistake_indicator(self):
        adv = LowerBoundAdversary(2, 0.3, "auto")
        tr = run_session(CoordinateRecordLearner(2), adv, 400,
                         NoiseModel.noiseless(), seed=41)
        maxima = np.full(2, -1.0)
        for t in range(400):
            expected = float(np.any(tr.xs[t] > maxima))
            assert tr.predictions[t] == expected
            maxima = np.maximum(maxima, tr.xs[t])

    def test_variants_coincide_in_one_dimension(self):
        adv = LowerBoundAdversary(1, 0.5, "auto")
        a = run_session(RecordThresholdLearner(1), adv, 500,
                        NoiseModel.noiseless(), seed=43)
        b = run_session(CoordinateRecordLearner(1), adv, 500,
                        NoiseModel.noiseless(), seed=43)
        assert np.array_equal(a.predictions, b.predictions)
