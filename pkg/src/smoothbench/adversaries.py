"""Smooth data-generating processes and smoothness tooling.

Includes the iid box baseline, the forced-mistake ladder adversary used for
the error floor experiments, a Monte Carlo smoothness certifier, and the
single-draw coupling sampler that plants each smooth draw inside a batch of
base-measure draws.
"""

from __future__ import annotations

import math
import warnings
from typing import Callable, Sequence

import numpy as np

from .core import ConfigurationError, IntegrityError, LabeledExample


class SmoothDistribution:
    """A sampleable distribution with a certified density-ratio bound.

    The declared smoothness parameter sigma promises that the density
    against the base measure never exceeds 1/sigma; certify_smoothness
    spot-checks the promise.
    """

    sigma: float
    d: int

    @property
    def base(self) -> "SmoothDistribution":
        return unit_box(self.d)

    def sample(self, rng: np.random.Generator):
        raise NotImplementedError

    def sample_uniform(self, u: Sequence[float]):
        raise NotImplementedError

    def density_ratio(self, x) -> float:
        raise NotImplementedError

    def sample_many(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return np.asarray([self.sample(rng) for _ in range(n)], dtype=float)

    def density_ratio_many(self, xs: np.ndarray) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        return np.asarray([self.density_ratio(x) for x in xs], dtype=float)


class BoxUniform(SmoothDistribution):
    """Uniform on a product of intervals [lo_i, lo_i + side] in the unit box."""

    __slots__ = ("lows", "side", "sigma", "d", "_ratio")

    def __init__(self, lows: Sequence[float], side: float, sigma: float | None = None):
        self.lows = list(float(v) for v in lows)
        self.side = float(side)
        self.d = len(self.lows)
        if self.side <= 0:
            raise ConfigurationError("box side must be positive")
        volume = self.side ** self.d
        self.sigma = float(sigma) if sigma is not None else volume
        self._ratio = 1.0 / volume

    def sample(self, rng: np.random.Generator):
        return self.sample_uniform(rng.random(self.d).tolist())

    def sample_uniform(self, u: Sequence[float]):
        lows, side = self.lows, self.side
        return [lows[i] + side * u[i] for i in range(self.d)]

    def density_ratio(self, x) -> float:
        lows, side = self.lows, self.side
        for i in range(self.d):
            v = x[i]
            if v < lows[i] or v > lows[i] + side:
                return 0.0
        return self._ratio

    def sample_many(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return np.asarray(self.lows) + self.side * rng.random((n, self.d))

    def density_ratio_many(self, xs: np.ndarray) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        if xs.ndim == 1:
            xs = xs[:, None]
        lows = np.asarray(self.lows)
        inside = np.all((xs >= lows) & (xs <= lows + self.side), axis=1)
        return np.where(inside, self._ratio, 0.0)


def unit_box(d: int) -> BoxUniform:
    """The base measure: uniform on the unit box."""
    return BoxUniform([0.0] * d, 1.0, sigma=1.0)


def interval_uniform(lo: float, hi: float, sigma: float | None = None) -> BoxUniform:
    """Uniform on [lo, hi] in one dimension, with an optional declared sigma."""
    return BoxUniform([lo], hi - lo, sigma=sigma)


class _ZeroTarget:
    @staticmethod
    def target(x) -> float:
        return 0.0

    @staticmethod
    def target_many(xs: np.ndarray) -> np.ndarray:
        return np.zeros(len(xs))


class _LadderState(_ZeroTarget):
    """Per-session state of the forced-mistake adversary.

    The level of each coordinate is a pure function of its running maximum:
    level(M) = max(0, ceil((M - side)/eps) + 1) capped at the ladder height,
    so the state is recoverable from any covariate prefix.  While coordinate
    i is active at level j, its draws come from [j*eps, j*eps + side] and the
    level advances exactly when the new draw exceeds (j-1)*eps + side, which
    happens with probability eps/side per step until the ladder is exhausted.
    """

    __slots__ = ("d", "sigma", "side", "eps", "max_level", "maxima", "active",
                 "level", "advances", "_dist", "_base_dist")

    def __init__(self, d: int, sigma: float, side: float, eps: float, max_level: int):
        self.d = d
        self.sigma = sigma
        self.side = side
        self.eps = eps
        self.max_level = max_level
        self.maxima = [-1.0] * d
        self.active = 0
        self.level = 0
        self.advances = 0
        self._dist: BoxUniform | None = None
        self._base_dist = BoxUniform([0.0] * d, side, sigma=sigma)

    def _level_of(self, m: float) -> int:
        if self.eps <= 0:
            return 0
        lvl = math.ceil((m - self.side) / self.eps) + 1
        if lvl < 0:
            return 0
        return min(lvl, self.max_level)

    def next_distribution(self) -> BoxUniform:
        if self.max_level == 0:
            return self._base_dist
        if self._dist is None:
            lows = [0.0] * self.d
            lows[self.active] = self.level * self.eps
            self._dist = BoxUniform(lows, self.side, sigma=self.sigma)
        return self._dist

    def observe(self, x, y: float, prediction: float) -> None:
        maxima = self.maxima
        active_record = False
        for i in range(self.d):
            if x[i] > maxima[i]:
                maxima[i] = x[i]
                if i == self.active:
                    active_record = True
        if self.max_level == 0 or not active_record:
            return
        new_level = self._level_of(maxima[self.active])
        if new_level > self.level:
            self.advances += new_level - self.level
            self.level = new_level
            self._dist = None
        while self.level >= self.max_level and self.active < self.d - 1:
            self.active += 1
            self.level = self._level_of(maxima[self.active])
            self.advances += self.level
            self._dist = None


class LowerBoundAdversary:
    """Smooth adversary that forces record mistakes at a controlled rate.

    Emits product-uniform covariates on boxes of volume sigma; the active
    coordinate's interval climbs a ladder of eps-spaced levels as records
    accumulate, one coordinate after another.  Labels are identically zero,
    so the data are realizable for threshold families.  eps="auto" balances
    climb rate against ladder height for the given horizon.
    """

    def __init__(self, d: int, sigma: float, eps: float | str = "auto"):
        if not 0 < sigma <= 1:
            raise ConfigurationError("sigma must lie in (0, 1]")
        if d < 1:
            raise ConfigurationError("d must be >= 1")
        if eps != "auto":
            eps = float(eps)
            if eps <= 0:
                raise ConfigurationError("eps must be positive or 'auto'")
        self.d = d
        self.sigma = sigma
        self.eps = eps
        self.side = sigma ** (1.0 / d)

    def resolve_eps(self, T: int) -> float:
        if self.eps != "auto":
            return float(self.eps)
        side = self.side
        if side >= 1.0:
            return 0.0
        return math.sqrt(self.d * side * (1.0 - side) / T)

    def ladder_height(self, eps: float) -> int:
        if eps <= 0 or self.side >= 1.0:
            return 0
        return int(math.floor((1.0 - self.side) / eps))

    def session_state(self, T: int) -> _LadderState:
        eps = self.resolve_eps(T)
        max_level = self.ladder_height(eps)
        if max_level == 0 and self.side < 1.0:
            warnings.warn(
                "level ladder is empty; adversary degenerates to an iid box",
                RuntimeWarning,
                stacklevel=2,
            )
        return _LadderState(self.d, self.sigma, self.side, eps, max_level)

    def replay(self, xs: np.ndarray, T: int | None = None) -> dict:
        """Recompute the ladder state trace from a covariate prefix."""
        xs = np.asarray(xs, dtype=float)
        if xs.ndim == 1:
            xs = xs[:, None]
        state = self.session_state(T if T is not None else xs.shape[0])
        actives, levels = [], []
        for row in xs.tolist():
            actives.append(state.active)
            levels.append(state.level)
            state.observe(row, 0.0, 0.0)
        return {
            "active": actives,
            "level": levels,
            "advances": state.advances,
            "cap": self.d * state.max_level,
        }


def lower_bound_step(state: _LadderState, history=None,
                     rng: np.random.Generator | None = None
                     ) -> tuple[BoxUniform, LabeledExample]:
    """One adversary step: emit the current distribution, a draw, and y=0.

    When a covariate history is supplied, the state's running maxima are
    checked against it (the ladder state must be recomputable from the
    prefix it claims to describe).
    """
    if rng is None:
        raise ConfigurationError("lower_bound_step needs an rng")
    if history is not None:
        hist = np.asarray(history, dtype=float)
        if hist.size:
            if hist.ndim == 1:
                hist = hist[:, None]
            maxima = hist.max(axis=0)
            if not np.allclose(maxima, state.maxima, rtol=0, atol=1e-12):
                raise ConfigurationError(
                    "adversary state is inconsistent with the supplied history")
    dist = state.next_distribution()
    x = dist.sample(rng)
    state.observe(x, 0.0, 0.0)
    return dist, LabeledExample(np.asarray(x, dtype=float), 0.0)


class _BoxState(_ZeroTarget):
    __slots__ = ("dist", "fstar")

    def __init__(self, dist: BoxUniform, fstar: Callable[[np.ndarray], np.ndarray] | None):
        self.dist = dist
        self.fstar = fstar

    def next_distribution(self) -> BoxUniform:
        return self.dist

    def observe(self, x, y: float, prediction: float) -> None:
        pass

    def target(self, x) -> float:
        if self.fstar is None:
            return 0.0
        return float(np.asarray(self.fstar(np.asarray(x, dtype=float)[None, :]))[0])

    def target_many(self, xs: np.ndarray) -> np.ndarray:
        if self.fstar is None:
            return _ZeroTarget.target_many(xs)
        return np.asarray(self.fstar(np.asarray(xs, dtype=float)), dtype=float)


class BoxUniformAdversary:
    """iid draws from a fixed box of volume sigma, optionally well-specified
    labels from a target function."""

    def __init__(self, d: int, sigma: float = 1.0,
                 fstar: Callable[[np.ndarray], np.ndarray] | None = None,
                 lows: Sequence[float] | None = None):
        if not 0 < sigma <= 1:
            raise ConfigurationError("sigma must lie in (0, 1]")
        self.d = d
        self.sigma = sigma
        self.side = sigma ** (1.0 / d)
        self.fstar = fstar
        self.lows = list(lows) if lows is not None else [0.0] * d
        for lo in self.lows:
            if lo < 0 or lo + self.side > 1 + 1e-12:
                raise ConfigurationError("box must stay inside the unit cube")

    def session_state(self, T: int) -> _BoxState:
        return _BoxState(BoxUniform(self.lows, self.side, sigma=self.sigma), self.fstar)


class CertificationResult:
    __slots__ = ("max_ratio", "passed", "integral", "integral_se")

    def __init__(self, max_ratio: float, passed: bool, integral: float, integral_se: float):
        self.max_ratio = max_ratio
        self.passed = passed
        self.integral = integral
        self.integral_se = integral_se


def certify_smoothness(dist: SmoothDistribution, n_samples: int,
                       rng: np.random.Generator) -> CertificationResult:
    """Spot-check the declared density-ratio bound by sampling.

    Evaluates the ratio at draws from the distribution and from its base
    measure, reports the maximum observed value and whether it stays below
    1/sigma, plus the Monte Carlo integral of the ratio against the base
    (which should be 1).
    """
    base = dist.base
    ratios_dist = dist.density_ratio_many(dist.sample_many(rng, n_samples))
    ratios_base = dist.density_ratio_many(base.sample_many(rng, n_samples))
    max_ratio = float(max(ratios_dist.max(), ratios_base.max()))
    passed = max_ratio <= (1.0 / dist.sigma) * (1.0 + 1e-9)
    integral = float(ratios_base.mean())
    integral_se = float(ratios_base.std(ddof=1) / math.sqrt(n_samples)) if n_samples > 1 else 0.0
    return CertificationResult(max_ratio, passed, integral, integral_se)


def coupling_sample(dist: SmoothDistribution, k: int,
                    rng: np.random.Generator) -> tuple[list, np.ndarray, bool]:
    """Couple one smooth draw with k base-measure draws.

    Each base draw is accepted with probability sigma times the density
    ratio at it; the first accepted draw becomes X, so X lands inside the
    base batch unless every acceptance fails (probability (1-sigma)^k for a
    saturated ratio), in which case X is drawn fresh from the distribution.
    The marginal law of X is exactly the distribution's own law.
    """
    if k < 1:
        raise ConfigurationError("k must be >= 1")
    sigma = dist.sigma
    if sigma * k < 1:
        warnings.warn("sigma*k < 1: the coupling miss bound is weak", RuntimeWarning,
                      stacklevel=2)
    cap = (1.0 + 1e-9) / sigma
    zs = dist.base.sample_many(rng, k)
    ratios = dist.density_ratio_many(zs)
    if np.any(ratios > cap):
        raise IntegrityError("density ratio exceeds 1/sigma during coupling")
    accepted = rng.random(k) < sigma * ratios
    hit = bool(accepted.any())
    x = zs[int(np.argmax(accepted))].tolist() if hit else dist.sample(rng)
    return x, zs, hit
