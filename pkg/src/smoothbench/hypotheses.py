"""Hypothesis families and exact ERM oracles.

Covers per-coordinate threshold predictors on the unit box, finite tabulated
families, and the square-loss minimizers over them.  All tie-breaking is
leftmost/lowest-index so every oracle is deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .core import ConfigurationError, LabeledExample


class UnsupportedRegimeError(ValueError):
    """The oracle was called outside the data regime it is built for."""


def _as_xy(data) -> list[tuple[np.ndarray, float]]:
    out = []
    for item in data:
        if isinstance(item, LabeledExample):
            out.append((np.atleast_1d(np.asarray(item.x, dtype=float)), float(item.y)))
        else:
            x, y = item
            out.append((np.atleast_1d(np.asarray(x, dtype=float)), float(y)))
    return out


@dataclass(frozen=True)
class ThresholdHypothesis:
    """Predict 1 iff every coordinate clears its threshold.

    With strict=False the comparison is x_i >= theta_i; with strict=True it
    is x_i > theta_i, which represents an infimum threshold exactly instead
    of nudging theta by machine epsilon.
    """

    theta: np.ndarray
    strict: bool = False

    def __post_init__(self) -> None:
        theta = np.atleast_1d(np.asarray(self.theta, dtype=float))
        object.__setattr__(self, "theta", theta)
        if np.any(theta < 0) or np.any(theta > 1):
            raise ConfigurationError("thresholds must lie in [0, 1]")

    @property
    def d(self) -> int:
        return self.theta.shape[0]

    def predict(self, x) -> float:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if self.strict:
            return float(np.all(x > self.theta))
        return float(np.all(x >= self.theta))

    def predict_many(self, xs: np.ndarray) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        if xs.ndim == 1:
            xs = xs[:, None]
        if self.strict:
            return np.all(xs > self.theta, axis=1).astype(float)
        return np.all(xs >= self.theta, axis=1).astype(float)

    def __call__(self, xs) -> np.ndarray:
        return self.predict_many(xs)


class FiniteFamily:
    """A finite list of evaluable members mapping covariates into [-1, 1].

    Members must accept an (n, d) array (or (n,) in one dimension) and
    return an (n,) value array.
    """

    def __init__(self, members: Sequence[Callable[[np.ndarray], np.ndarray]]):
        if len(members) == 0:
            raise ConfigurationError("a finite family needs at least one member")
        self.members = list(members)

    @property
    def size(self) -> int:
        return len(self.members)

    def __len__(self) -> int:
        return len(self.members)

    def values(self, Z) -> np.ndarray:
        """Member-by-point value matrix, shape (size, n)."""
        Z = np.asarray(Z, dtype=float)
        return np.stack([np.asarray(f(Z), dtype=float) for f in self.members])

    def values_at(self, x) -> np.ndarray:
        """All member values at a single covariate, shape (size,)."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return self.values(x[None, :])[:, 0]


def step_function(theta: float, weight: float = 1.0) -> Callable[[np.ndarray], np.ndarray]:
    """weight * 1[x >= theta] evaluated on the first coordinate."""

    def f(Z: np.ndarray) -> np.ndarray:
        Z = np.asarray(Z, dtype=float)
        v = Z[..., 0] if Z.ndim > 1 else Z
        return weight * (v >= theta).astype(float)

    return f


def two_step_function(a: float, b: float, w_a: float = 1.0,
                      w_b: float = -1.0) -> Callable[[np.ndarray], np.ndarray]:
    """w_a * 1[x >= a] + w_b * 1[x >= b] on the first coordinate."""

    def f(Z: np.ndarray) -> np.ndarray:
        Z = np.asarray(Z, dtype=float)
        v = Z[..., 0] if Z.ndim > 1 else Z
        return w_a * (v >= a).astype(float) + w_b * (v >= b).astype(float)

    return f


def constant_function(c: float) -> Callable[[np.ndarray], np.ndarray]:
    def f(Z: np.ndarray) -> np.ndarray:
        Z = np.asarray(Z, dtype=float)
        v = Z[..., 0] if Z.ndim > 1 else Z
        return np.full(v.shape, float(c))

    return f


def random_step_family(rng: np.random.Generator, size: int) -> FiniteFamily:
    """Random signed steps w * 1[x >= theta] with |w| <= 1."""
    members = []
    for _ in range(size):
        theta = float(rng.uniform(0.0, 1.0))
        weight = float(rng.choice([-1.0, 1.0]) * rng.uniform(0.3, 1.0))
        members.append(step_function(theta, weight))
    return FiniteFamily(members)


def binary_difference_family(pairs: Sequence[tuple[float, float]]) -> FiniteFamily:
    """Members 1[x >= a] - 1[x >= b] for a < b; values in {0, 1} on [a, b)."""
    members = []
    for a, b in pairs:
        if not a < b:
            raise ConfigurationError("need a < b for a difference member")
        members.append(two_step_function(a, b, 1.0, -1.0))
    return FiniteFamily(members)


def erm_finite(family: FiniteFamily, data) -> int:
    """Lowest index minimizing the cumulative square loss on the data."""
    pairs = _as_xy(data)
    if not pairs:
        return 0
    X = np.stack([x for x, _ in pairs])
    y = np.asarray([y for _, y in pairs], dtype=float)
    losses = ((family.values(X) - y) ** 2).sum(axis=1)
    return int(np.argmin(losses))


def erm_record_threshold(data, d: int) -> ThresholdHypothesis:
    """Exact ERM over per-coordinate thresholds for all-zero labels.

    Returns the predictor with each coordinate's running data maximum as a
    strict threshold: it outputs 1 at x only when every coordinate of x
    strictly exceeds the corresponding maximum.  On empty data it is the
    all-ones predictor (zero thresholds, non-strict).
    """
    pairs = _as_xy(data)
    if not pairs:
        return ThresholdHypothesis(np.zeros(d), strict=False)
    for x, y in pairs:
        if y != 0.0:
            raise UnsupportedRegimeError("record-threshold ERM requires all labels == 0")
        if x.shape[0] != d:
            raise ConfigurationError("covariate dimension mismatch")
    maxima = np.max(np.stack([x for x, _ in pairs]), axis=0)
    return ThresholdHypothesis(maxima, strict=True)


def erm_threshold_1d_square(data) -> ThresholdHypothesis:
    """Exact square-loss ERM over one-dimensional thresholds 1[x >= theta].

    Scans the <= n+1 cells induced by the sorted covariates and returns the
    leftmost boundary of the first cell achieving the minimal loss.  Cell 0
    is represented by (theta=0, non-strict) and cell i > 0 by the open
    boundary (theta=x_(i), strict), so "strictly larger" stays exact.
    """
    pairs = _as_xy(data)
    for x, _ in pairs:
        if x.shape[0] != 1:
            raise ConfigurationError("this oracle is one-dimensional")
    if not pairs:
        return ThresholdHypothesis(np.zeros(1), strict=False)
    xs = np.asarray([x[0] for x, _ in pairs])
    ys = np.asarray([y for _, y in pairs])
    order = np.argsort(xs, kind="stable")
    xs, ys = xs[order], ys[order]
    cuts = np.unique(xs)
    # Cell i predicts 1 on the suffix of points above its boundary, so its
    # loss is sum(y^2) below the boundary plus sum((1-y)^2) at or above it.
    below_sq = np.concatenate([[0.0], np.cumsum(ys**2)])
    above_sq = np.concatenate([np.cumsum(((1.0 - ys) ** 2)[::-1])[::-1], [0.0]])
    losses = []
    for i in range(len(cuts) + 1):
        n_below = 0 if i == 0 else int(np.searchsorted(xs, cuts[i - 1], side="right"))
        losses.append(below_sq[n_below] + above_sq[n_below])
    best_cell = int(np.argmin(np.asarray(losses)))
    if best_cell == 0:
        return ThresholdHypothesis(np.zeros(1), strict=False)
    return ThresholdHypothesis(np.array([cuts[best_cell - 1]]), strict=True)


class _RecordState:
    __slots__ = ("maxima", "mode")

    def __init__(self, d: int, mode: str):
        self.maxima = [-1.0] * d
        self.mode = mode

    def predict(self, x) -> float:
        m = self.maxima
        if self.mode == "all":
            for i, v in enumerate(x):
                if v <= m[i]:
                    return 0.0
            return 1.0
        for i, v in enumerate(x):
            if v > m[i]:
                return 1.0
        return 0.0

    def predict_many(self, xs: np.ndarray) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        if xs.ndim == 1:
            xs = xs[:, None]
        rec = xs > np.asarray(self.maxima)
        if self.mode == "all":
            return np.all(rec, axis=1).astype(float)
        return np.any(rec, axis=1).astype(float)

    def update(self, x, y: float) -> None:
        if y != 0.0:
            raise UnsupportedRegimeError("record learners require all labels == 0")
        m = self.maxima
        for i, v in enumerate(x):
            if v > m[i]:
                m[i] = v

    def hypothesis(self) -> ThresholdHypothesis:
        if all(v < 0 for v in self.maxima):
            return ThresholdHypothesis(np.zeros(len(self.maxima)), strict=False)
        return ThresholdHypothesis(np.asarray(self.maxima), strict=True)


class RecordThresholdLearner:
    """Online form of erm_record_threshold: per-coordinate running maxima as
    strict thresholds, predicting 1 only on simultaneous records in all
    coordinates.  Requires all-zero labels."""

    def __init__(self, d: int):
        self.d = d

    def session_state(self) -> _RecordState:
        return _RecordState(self.d, "all")


class CoordinateRecordLearner:
    """ERM tie-break that predicts 1 whenever at least one coordinate of the
    query strictly exceeds its running data maximum.

    For all-zero labels such a query always admits a zero-loss threshold
    hypothesis predicting 1, so this realizes the empirical minimizer that
    predicts 1 as often as the record structure forces.  In one dimension it
    coincides with RecordThresholdLearner."""

    def __init__(self, d: int):
        self.d = d

    def session_state(self) -> _RecordState:
        return _RecordState(self.d, "any")


class _FiniteERMState:
    __slots__ = ("family", "losses", "best")

    def __init__(self, family: FiniteFamily):
        self.family = family
        self.losses = np.zeros(family.size)
        self.best = 0

    def predict(self, x) -> float:
        return float(self.family.values_at(np.asarray(x, dtype=float))[self.best])

    def predict_many(self, xs: np.ndarray) -> np.ndarray:
        return np.asarray(self.family.members[self.best](np.asarray(xs, dtype=float)),
                          dtype=float)

    def update(self, x, y: float) -> None:
        vals = self.family.values_at(np.asarray(x, dtype=float))
        self.losses += (vals - y) ** 2
        self.best = int(np.argmin(self.losses))

    def hypothesis_index(self) -> int:
        return self.best


class FiniteFamilyERMLearner:
    """Exact incremental ERM over a finite family (lowest-index tie-break)."""

    def __init__(self, family: FiniteFamily, d: int = 1):
        self.family = family
        self.d = d

    def session_state(self) -> _FiniteERMState:
        return _FiniteERMState(self.family)
