"""Deterministic and statistical checkers for the toolkit's inequalities.

The surprise-set machinery is exact and exhaustive; the remaining checkers
are Monte Carlo estimates of both sides of an inequality, passing when the
left side stays below the right side plus a three-pooled-standard-error
buffer (finite-replicate means stand in for expectations).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .adversaries import SmoothDistribution
from .complexity import log_wills_mu, scale_family, shift_family
from .core import (
    ConfigurationError,
    NoiseModel,
    run_covariate_session,
    run_session,
    run_tangent_session,
)
from .hypotheses import FiniteFamily, FiniteFamilyERMLearner, erm_finite
from .rng import STREAM_PRIMAL, STREAM_TANGENT, derive_seed, make_rng


# Auxiliary streams (base-measure draws for the exponential-supremum
# estimates, norm estimation) are namespaced away from the per-replicate
# seed indices derive_seed(seed, r), which occupy small integers.
_AUX_STREAM = 1 << 32


class InfeasiblePatternError(ValueError):
    """The requested surprise pattern cannot be realized at this K."""


@dataclass
class SurpriseSet:
    """Indices where a bounded sequence jumps above K/s times its running sum."""

    indices: list[int]
    K: float
    T: int
    sequence: np.ndarray

    def recheck(self) -> bool:
        return surprise_set(self.sequence, self.K).indices == self.indices


@dataclass(frozen=True)
class SmallBallParams:
    c: float
    c_prime: float
    sigma: float
    delta_tilde: float

    def __post_init__(self) -> None:
        if not 0 < self.c < 1 or not 0 < self.c_prime < 1:
            raise ConfigurationError("c and c_prime must lie in (0, 1)")
        if not 0 < self.sigma <= 1:
            raise ConfigurationError("sigma must lie in (0, 1]")
        if self.delta_tilde <= 0:
            raise ConfigurationError("delta_tilde must be positive")


@dataclass
class CheckResult:
    """Both sides of a checked inequality plus the data to re-derive the verdict."""

    lhs: float
    rhs: float
    passed: bool
    lhs_se: float = 0.0
    rhs_se: float = 0.0
    extras: dict = field(default_factory=dict)

    @property
    def pooled_se(self) -> float:
        return math.hypot(self.lhs_se, self.rhs_se)


def surprise_set(a: Sequence[float], K: float) -> SurpriseSet:
    """Exact evaluation of the surprise-index set of a sequence.

    Index s >= 1 is a surprise when a_s >= (K/s) * sum of the entries before
    it.  Requires a_0 = 1 and all entries in [0, 1].
    """
    arr = np.asarray(a, dtype=float)
    if arr.ndim != 1 or arr.size < 1:
        raise ConfigurationError("need a one-dimensional sequence")
    if arr[0] != 1.0:
        raise ConfigurationError("a_0 must equal 1")
    if np.any(arr < 0) or np.any(arr > 1):
        raise ConfigurationError("entries must lie in [0, 1]")
    if K <= 0:
        raise ConfigurationError("K must be positive")
    indices = []
    running = arr[0]
    for s in range(1, arr.size):
        if arr[s] >= (K / s) * running:
            indices.append(s)
        running += arr[s]
    return SurpriseSet(indices=indices, K=K, T=arr.size, sequence=arr)


@dataclass
class SelfBoundedResult:
    worst: int
    witness: np.ndarray
    passed: bool
    bound: float
    K: float
    sequences_checked: int


def verify_self_bounded(T: int, grid: Iterable[float], eps: float,
                        block: int = 1 << 15) -> SelfBoundedResult:
    """Exhaustively check the surprise-count bound at K = 2 log(T) / eps.

    Enumerates every sequence a_0=1, a_1..a_{T-1} over the grid and verifies
    that no surprise set exceeds eps*T.  Enumeration is vectorized over
    blocks of sequences; memory stays bounded by the block size.
    """
    grid_arr = np.asarray(sorted(set(float(g) for g in grid)), dtype=float)
    if np.any(grid_arr < 0) or np.any(grid_arr > 1):
        raise ConfigurationError("grid values must lie in [0, 1]")
    if 0.0 not in grid_arr or 1.0 not in grid_arr:
        raise ConfigurationError("grid must contain 0 and 1")
    if not 0 < eps < 1:
        raise ConfigurationError("eps must lie in (0, 1)")
    if T < 2:
        raise ConfigurationError("T must be >= 2")
    K = 2.0 * math.log(T) / eps
    g = grid_arr.size
    free = T - 1
    total = g**free
    if total * T > 1e8:
        warnings.warn(f"enumerating {total} sequences of length {T}", RuntimeWarning,
                      stacklevel=2)
    worst = -1
    witness = None
    s_idx = np.arange(1, T)
    for start in range(0, total, block):
        idx = np.arange(start, min(start + block, total), dtype=np.int64)
        digits = np.empty((idx.size, free), dtype=np.int64)
        rem = idx.copy()
        for pos in range(free - 1, -1, -1):
            rem, digits[:, pos] = np.divmod(rem, g)
        seqs = np.empty((idx.size, T))
        seqs[:, 0] = 1.0
        seqs[:, 1:] = grid_arr[digits]
        prefix = np.cumsum(seqs, axis=1)
        surprises = seqs[:, 1:] >= (K / s_idx) * prefix[:, :-1]
        counts = surprises.sum(axis=1)
        block_worst = int(counts.max())
        if block_worst > worst:
            worst = block_worst
            witness = seqs[int(np.argmax(counts))].copy()
    bound = eps * T
    return SelfBoundedResult(worst=worst, witness=witness, passed=worst <= bound,
                             bound=bound, K=K, sequences_checked=total)


def extremal_sequence(T: int, K: float, surprise_times: Sequence[int]) -> np.ndarray:
    """Build the sparse sequence whose surprises sit exactly at the given times.

    b_0 = 1, the first requested time carries value 1, later requested times
    carry (K/t) times the running sum, and everything else is 0.  Raises
    InfeasiblePatternError when the construction leaves [0, 1] or fails to
    reproduce the requested set (e.g. K larger than the first time).
    """
    times = sorted(set(int(t) for t in surprise_times))
    if any(t < 1 or t >= T for t in times):
        raise ConfigurationError("surprise times must lie in {1..T-1}")
    if K <= 0:
        raise ConfigurationError("K must be positive")
    b = np.zeros(T)
    b[0] = 1.0
    for j, t in enumerate(times):
        if j == 0:
            b[t] = 1.0
        else:
            b[t] = (K / t) * b[:t].sum()
            if b[t] > 1.0:
                raise InfeasiblePatternError(
                    f"entry at time {t} would be {b[t]:.6g} > 1; pattern infeasible for K={K:.6g}"
                )
    realized = surprise_set(b, K).indices
    if realized != times:
        raise InfeasiblePatternError(
            f"construction realizes surprises {realized} instead of {times}"
        )
    return b


def _three_se_pass(lhs: float, rhs: float, lhs_se: float, rhs_se: float) -> bool:
    return lhs <= rhs + 3.0 * math.hypot(lhs_se, rhs_se)


def decoupling_gap(learner, adversary, T: int, reps: int, seed: int = 0) -> CheckResult:
    """Check that on-path error is controlled by tangent-path error.

    Uses g_t = (fit_t - target)^2 / 4 so values stay in [0, 1].  The left
    side averages sum_t g_t(X_t); the right side is
    (log^2 T / sigma) * sqrt(2 T * mean of sum_t (1/t) sum_{s<t} g_t(X'_s)).
    """
    d = adversary.d
    lhs_vals = np.empty(reps)
    inner_vals = np.empty(reps)
    diag_vals = np.empty(reps)
    for r in range(reps):
        seed_r = derive_seed(seed, r)
        uniforms = make_rng(seed_r, STREAM_PRIMAL).random((T, d)).tolist()
        astate = adversary.session_state(T)
        lstate = learner.session_state()
        tangent = np.empty((T, d))
        lhs = inner = diag = 0.0
        for t in range(T):
            dist = astate.next_distribution()
            if t > 0:
                past = tangent[:t]
                g_past = 0.25 * (lstate.predict_many(past) - astate.target_many(past)) ** 2
                inner += float(g_past.sum()) / (t + 1)
            x = dist.sample_uniform(uniforms[t])
            step_rng = np.random.Generator(
                np.random.PCG64(derive_seed(seed_r, STREAM_TANGENT, t)))
            xp = dist.sample_uniform(step_rng.random(d).tolist())
            tangent[t] = xp
            lhs += 0.25 * (lstate.predict(x) - astate.target(x)) ** 2
            diag += 0.25 * (lstate.predict(xp) - astate.target(xp)) ** 2
            y = astate.target(x)
            lstate.update(x, y)
            astate.observe(x, y, 0.0)
        lhs_vals[r] = lhs
        inner_vals[r] = inner
        diag_vals[r] = diag
    lhs_mean = float(lhs_vals.mean())
    lhs_se = float(lhs_vals.std(ddof=1) / math.sqrt(reps)) if reps > 1 else 0.0
    inner_mean = float(inner_vals.mean())
    inner_se = float(inner_vals.std(ddof=1) / math.sqrt(reps)) if reps > 1 else 0.0
    coeff = (math.log(T) ** 2) / adversary.sigma
    rhs = coeff * math.sqrt(2.0 * T * inner_mean)
    rhs_se = 0.0
    if inner_mean > 0:
        rhs_se = coeff * math.sqrt(2.0 * T) * 0.5 * inner_se / math.sqrt(inner_mean)
    return CheckResult(
        lhs=lhs_mean, rhs=rhs, passed=_three_se_pass(lhs_mean, rhs, lhs_se, rhs_se),
        lhs_se=lhs_se, rhs_se=rhs_se,
        extras={
            "inner_mean": inner_mean,
            "inner_se": inner_se,
            "diag_mean": float(diag_vals.mean()),
            "diag_se": float(diag_vals.std(ddof=1) / math.sqrt(reps)) if reps > 1 else 0.0,
            "lhs_values": lhs_vals.tolist(),
            "inner_values": inner_vals.tolist(),
        },
    )


def _unit_box_sampler(d: int):
    def sampler(rng: np.random.Generator, m: int) -> np.ndarray:
        return rng.random((m, d)) if d > 1 else rng.random(m)

    return sampler


def norm_comparison_gap(family: FiniteFamily, adversary, T: int, c: float,
                        reps: int, seed: int = 0, m_cap: int = 1_000_000,
                        wills_reps: int | None = None) -> CheckResult:
    """Check the sharp comparison between tangent and on-path squared sums.

    Left side: mean over replicates of sup_f sum_t f^2(X'_t) - (1+2c) f^2(X_t).
    Right side: sqrt(pi/2) (1+c)^2/c times the log exponential-supremum
    functional of (4c/(1+c)) F on base samples of size 2 T log T / sigma
    (capped), plus 4(1+c).
    """
    if c <= 0:
        raise ConfigurationError("c must be positive")
    wills_reps = wills_reps or reps
    lhs_vals = np.empty(reps)
    for r in range(reps):
        tt = run_tangent_session(adversary, None, T, derive_seed(seed, r))
        Vp = family.values(tt.tangent)
        V = family.values(tt.primal)
        lhs_vals[r] = float(((Vp**2).sum(axis=1) - (1.0 + 2.0 * c) * (V**2).sum(axis=1)).max())
    lhs = float(lhs_vals.mean())
    lhs_se = float(lhs_vals.std(ddof=1) / math.sqrt(reps)) if reps > 1 else 0.0
    m = min(int(math.ceil(2.0 * T * math.log(T) / adversary.sigma)), m_cap)
    capped = m == m_cap
    scaled = scale_family(family, 4.0 * c / (1.0 + c))
    lw = log_wills_mu(scaled, _unit_box_sampler(adversary.d), m,
                      wills_reps, make_rng(seed, _AUX_STREAM, 1))
    coeff = math.sqrt(math.pi / 2.0) * (1.0 + c) ** 2 / c
    rhs = coeff * lw.point + 4.0 * (1.0 + c)
    rhs_se = coeff * (lw.stderr if math.isfinite(lw.stderr) else 0.0)
    passed = _three_se_pass(lhs, rhs, lhs_se, rhs_se)
    return CheckResult(lhs=lhs, rhs=rhs, passed=passed, lhs_se=lhs_se, rhs_se=rhs_se,
                       extras={"m": m, "m_capped": capped, "log_wills": lw.point,
                               "inconclusive": capped and not passed,
                               "lhs_values": lhs_vals.tolist()})


def basic_inequality_check(family: FiniteFamily, adversary, T: int, noise: NoiseModel,
                           reps: int, seed: int = 0, fstar_index: int = 0,
                           m_cap: int = 1_000_000,
                           wills_reps: int | None = None) -> CheckResult:
    """Check the symmetrization bound on the final fit's empirical error.

    The adversary's target must be the family member at fstar_index.  Left
    side: mean over replicates of the empirical squared norm, on the first
    T-1 covariates, of the ERM fitted to those T-1 labeled points minus the
    target member.  Right side uses the exponential-supremum functional of
    256 (F - f*) at sample size k (T-1) with k = 3 log T / sigma.
    """
    if T < 2:
        raise ConfigurationError("the final-fit check needs T >= 2")
    wills_reps = wills_reps or max(8, reps // 4)
    nu = noise.nu
    learner = FiniteFamilyERMLearner(family, d=adversary.d)
    fstar = family.members[fstar_index]
    lhs_vals = np.empty(reps)
    for r in range(reps):
        tr = run_session(learner, adversary, T, noise, derive_seed(seed, r))
        fit_data = list(zip(tr.xs[: T - 1], tr.ys[: T - 1]))
        j = erm_finite(family, fit_data)
        xs_prefix = tr.xs[: T - 1]
        gaps = np.asarray(family.members[j](xs_prefix), dtype=float) - np.asarray(
            fstar(xs_prefix), dtype=float)
        lhs_vals[r] = float((gaps**2).mean())
    lhs = float(lhs_vals.mean())
    lhs_se = float(lhs_vals.std(ddof=1) / math.sqrt(reps)) if reps > 1 else 0.0
    if nu == 0:
        passed = lhs <= 1e-12
        return CheckResult(lhs=lhs, rhs=0.0, passed=passed, lhs_se=lhs_se,
                           extras={"vacuous_noise_floor": True,
                                   "lhs_values": lhs_vals.tolist()})
    k = 3.0 * math.log(T) / adversary.sigma
    m = min(int(round(k * (T - 1))), m_cap)
    shifted = shift_family(family, fstar)
    scaled = scale_family(shifted, 256.0)
    lw = log_wills_mu(scaled, _unit_box_sampler(adversary.d), max(m, 1),
                      wills_reps, make_rng(seed, _AUX_STREAM, 2))
    coeff = (64.0 / T) * nu * math.sqrt(math.log(T))
    rhs = coeff * (lw.point + T * math.exp(-adversary.sigma * k))
    rhs_se = coeff * (lw.stderr if math.isfinite(lw.stderr) else 0.0)
    passed = _three_se_pass(lhs, rhs, lhs_se, rhs_se)
    return CheckResult(lhs=lhs, rhs=rhs, passed=passed, lhs_se=lhs_se, rhs_se=rhs_se,
                       extras={"m": m, "k": k, "log_wills": lw.point,
                               "lhs_values": lhs_vals.tolist()})


@dataclass
class SmallBallResult:
    max_violation: float
    passed: bool
    bound: float
    per_member: list[float]
    stderr: float
    excluded: list[int]


def small_ball_check(family: FiniteFamily, base_dist: SmoothDistribution,
                     params: SmallBallParams, n_samples: int,
                     seed: int = 0) -> SmallBallResult:
    """Estimate each member's probability of falling below the scaled-norm
    threshold sqrt(2c/sigma) * ||f|| under the base measure, and compare the
    worst case against sigma (1 - c')."""
    rng_norm = make_rng(seed, _AUX_STREAM, 3)
    rng_prob = make_rng(seed, _AUX_STREAM, 4)
    Z_norm = base_dist.sample_many(rng_norm, n_samples)
    Z_prob = base_dist.sample_many(rng_prob, n_samples)
    V_norm = family.values(Z_norm)
    V_prob = family.values(Z_prob)
    norms = np.sqrt((V_norm**2).mean(axis=1))
    scale = math.sqrt(2.0 * params.c / params.sigma)
    probs, excluded = [], []
    for j in range(family.size):
        if norms[j] < 1e-6:
            warnings.warn(f"member {j} has norm ~ 0 and is excluded", RuntimeWarning,
                          stacklevel=2)
            excluded.append(j)
            probs.append(0.0)
            continue
        probs.append(float((np.abs(V_prob[j]) < scale * norms[j]).mean()))
    included = [p for j, p in enumerate(probs) if j not in excluded]
    max_violation = max(included) if included else 0.0
    se = math.sqrt(max(max_violation * (1 - max_violation), 1e-12) / n_samples)
    bound = params.sigma * (1.0 - params.c_prime)
    return SmallBallResult(
        max_violation=max_violation,
        passed=max_violation <= bound + 3.0 * se,
        bound=bound,
        per_member=probs,
        stderr=se,
        excluded=excluded,
    )


def small_ball_norm_domination(family: FiniteFamily, nu_dist: SmoothDistribution,
                               adversary, params: SmallBallParams, T: int, reps: int,
                               seed: int = 0, nu_samples: int = 200_000,
                               cover_count: int | None = None) -> CheckResult:
    """Check that the population norm under any smooth measure is dominated
    by a multiple of the on-path empirical norm.

    Left side: mean over sessions of sup_f ||f||^2_nu - (2/(c c')) ||f||^2_T.
    Right side: delta_tilde^2 plus the cover count times exp(-c'^2 T / 72)
    plus 2/T.  When T sits below the sample-size floor of the guarantee the
    verdict is labeled advisory but still computed.
    """
    rng_nu = make_rng(seed, _AUX_STREAM, 5)
    Z_nu = nu_dist.sample_many(rng_nu, nu_samples)
    V_nu = family.values(Z_nu)
    nu_sq = (V_nu**2).mean(axis=1)
    nu_sq_se = (V_nu**2).std(axis=1, ddof=1) / math.sqrt(nu_samples)
    coeff = 2.0 / (params.c * params.c_prime)
    lhs_vals = np.empty(reps)
    for r in range(reps):
        xs = run_covariate_session(adversary, T, derive_seed(seed, r))
        V = family.values(xs)
        emp_sq = (V**2).mean(axis=1)
        lhs_vals[r] = float((nu_sq - coeff * emp_sq).max())
    lhs = float(lhs_vals.mean())
    lhs_se = float(lhs_vals.std(ddof=1) / math.sqrt(reps)) if reps > 1 else 0.0
    lhs_se = math.hypot(lhs_se, float(nu_sq_se.max()))
    n_cover = cover_count if cover_count is not None else family.size
    rhs = (params.delta_tilde**2
           + n_cover * math.exp(-(params.c_prime**2) * T / 72.0)
           + 2.0 / T)
    floor = (576.0 / params.sigma) * (math.log(T) ** 2) * math.log(max(n_cover, 2))
    precondition_met = T >= floor
    if not precondition_met:
        warnings.warn("T is below the guarantee's sample-size floor; result is advisory",
                      RuntimeWarning, stacklevel=2)
    passed = _three_se_pass(lhs, rhs, lhs_se, 0.0)
    return CheckResult(lhs=lhs, rhs=rhs, passed=passed, lhs_se=lhs_se, rhs_se=0.0,
                       extras={"advisory": not precondition_met,
                               "sample_size_floor": floor,
                               "cover_count": n_cover,
                               "lhs_values": lhs_vals.tolist()})
