"""Monte Carlo estimators of function-class complexity functionals.

The exponential-supremum functional is reported on the log scale through a
log-sum-exp over replicates because exp(sup ...) is heavy tailed; suprema
over one-dimensional threshold predictors are computed by exact cell
enumeration, never by gridding.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import ConfigurationError
from .hypotheses import FiniteFamily


@dataclass
class ComplexityEstimate:
    kind: str
    m: int
    reps: int
    point: float
    stderr: float
    scale_params: dict = field(default_factory=dict)
    unstable: bool = False


class ThresholdFamily1D:
    """The continuum family of one-dimensional indicators 1[x >= theta].

    Suprema over theta are exact: on a fixed sample the family realizes only
    the suffix sets of the descending sort order (plus the empty set), so a
    prefix-maximum over sorted per-point terms enumerates every cell.
    """

    def sup_offset_many(self, Z: np.ndarray, G: np.ndarray, a: float, b: float) -> np.ndarray:
        Z = np.asarray(Z, dtype=float)
        v = Z[:, 0] if Z.ndim > 1 else Z
        order = np.argsort(-v, kind="stable")
        terms = a * G[:, order] - b
        prefix = np.cumsum(terms, axis=1)
        return np.maximum(prefix.max(axis=1), 0.0)


@dataclass(frozen=True)
class Scaled:
    """Scalar multiple gamma * F of a family."""

    family: object
    gamma: float


def scale_family(family, gamma: float):
    if isinstance(family, Scaled):
        return Scaled(family.family, family.gamma * gamma)
    return Scaled(family, gamma)


def shift_family(family: FiniteFamily, g: Callable[[np.ndarray], np.ndarray]) -> FiniteFamily:
    """The translated family F - g."""

    def shifted(f):
        return lambda Z: np.asarray(f(Z), dtype=float) - np.asarray(g(Z), dtype=float)

    return FiniteFamily([shifted(f) for f in family.members])


def compose_family(family: FiniteFamily, iota: Callable[[np.ndarray], np.ndarray]) -> FiniteFamily:
    """The post-composed family iota(F) for a scalar map iota."""

    def composed(f):
        return lambda Z: np.asarray(iota(np.asarray(f(Z), dtype=float)), dtype=float)

    return FiniteFamily([composed(f) for f in family.members])


def _sup_offset_many(family, Z: np.ndarray, G: np.ndarray, a: float, b: float) -> np.ndarray:
    """Per-replicate sup over f of sum_i a*G[r,i]*f(Z_i) - b*f(Z_i)^2."""
    if isinstance(family, Scaled):
        gamma = family.gamma
        return _sup_offset_many(family.family, Z, G, a * gamma, b * gamma * gamma)
    if isinstance(family, ThresholdFamily1D):
        return family.sup_offset_many(Z, G, a, b)
    if isinstance(family, FiniteFamily):
        V = family.values(Z)
        penalties = b * (V**2).sum(axis=1)
        return (a * (G @ V.T) - penalties).max(axis=1)
    raise ConfigurationError(f"cannot take suprema over {type(family).__name__}")


def _family_size(family) -> int | None:
    if isinstance(family, Scaled):
        return _family_size(family.family)
    if isinstance(family, FiniteFamily):
        return family.size
    return None


def _log_mean_exp(sups: np.ndarray) -> tuple[float, float, bool]:
    """log of the replicate mean of exp(sup), delta-method stderr, heavy-tail flag."""
    reps = sups.size
    top = float(sups.max())
    w = np.exp(sups - top)
    mean_w = float(w.mean())
    point = top + math.log(mean_w)
    unstable = bool(w.max() / w.sum() > 0.5) if reps > 1 else True
    if reps < 2:
        warnings.warn("stderr unavailable with reps < 2", RuntimeWarning, stacklevel=3)
        return point, float("nan"), unstable
    se_w = float(w.std(ddof=1) / math.sqrt(reps))
    return point, se_w / mean_w, unstable


_CELL_ENUM_CAP = 512


def _value_matrix(family, Z: np.ndarray, scale: float = 1.0) -> np.ndarray | None:
    """Value vectors of a finite-valued family on Z, shape (J, m), or None.

    One-dimensional threshold predictors realize exactly the suffix cells of
    the descending sort order, so on a modest fixed sample they are a finite
    family too.
    """
    if isinstance(family, Scaled):
        return _value_matrix(family.family, Z, scale * family.gamma)
    if isinstance(family, FiniteFamily):
        return scale * family.values(Z)
    if isinstance(family, ThresholdFamily1D):
        v = Z[:, 0] if Z.ndim > 1 else Z
        m = v.shape[0]
        if m > _CELL_ENUM_CAP:
            return None
        order = np.argsort(-v, kind="stable")
        cells = np.zeros((m + 1, m))
        for k in range(1, m + 1):
            cells[k, order[:k]] = 1.0
        return scale * cells
    return None


def _mixture_estimates(V: np.ndarray, reps: int, rng: np.random.Generator) -> np.ndarray:
    """Unbiased draws of the exponential-supremum mean, each in [1, J].

    The mean of exp(sup_j <xi, v_j> - |v_j|^2/2) over standard Gaussian xi
    is the expected maximum of the Gaussian likelihood ratios centered at
    the member value vectors.  Sampling xi from the member-centered mixture
    and reweighting yields max_j L_j / mean_k L_k, which is bounded by the
    family size, so the estimate and its stderr are reliable at any scale.
    """
    J, m = V.shape
    half_norms = 0.5 * (V**2).sum(axis=1)
    ks = rng.integers(0, J, size=reps)
    xi = V[ks] + rng.standard_normal((reps, m))
    A = xi @ V.T - half_norms
    amax = A.max(axis=1)
    return J / np.exp(A - amax[:, None]).sum(axis=1)


def log_wills(family, Z, reps: int, rng: np.random.Generator) -> ComplexityEstimate:
    """log of E exp(sup_f sum_i xi_i f(Z_i) - f(Z_i)^2 / 2) on a fixed sample.

    Finite-valued families (including one-dimensional thresholds on modest
    samples, via their suffix cells) are integrated by importance sampling
    under a member-centered Gaussian mixture, which bounds the integrand by
    the family size.  Otherwise the mean is taken directly over replicate
    suprema with a log-sum-exp, and the estimate is flagged unstable when a
    single replicate dominates the exponential mean.
    """
    Z = np.asarray(Z, dtype=float)
    m = Z.shape[0]
    V = _value_matrix(family, Z)
    if V is not None:
        w = _mixture_estimates(V, reps, rng)
        point = math.log(float(w.mean()))
        if reps < 2:
            warnings.warn("stderr unavailable with reps < 2", RuntimeWarning, stacklevel=2)
            return ComplexityEstimate("log_wills", m, reps, point, float("nan"),
                                      unstable=True)
        stderr = float(w.std(ddof=1) / math.sqrt(reps)) / float(w.mean())
        unstable = bool(w.max() / w.sum() > 0.5)
        return ComplexityEstimate("log_wills", m, reps, point, stderr, unstable=unstable)
    G = rng.standard_normal((reps, m))
    sups = _sup_offset_many(family, Z, G, 1.0, 0.5)
    point, stderr, unstable = _log_mean_exp(sups)
    if unstable and reps >= 2:
        warnings.warn("top replicate dominates the exponential mean; stderr unreliable",
                      RuntimeWarning, stacklevel=2)
    return ComplexityEstimate("log_wills", m, reps, point, stderr, unstable=unstable)


def log_wills_mu(family, base_sampler: Callable[[np.random.Generator, int], np.ndarray],
                 m: int, reps: int, rng: np.random.Generator) -> ComplexityEstimate:
    """Same functional with the sample redrawn from the base measure each
    replicate, so the reported point estimates log E over both sources."""
    vals = np.empty(reps)
    naive = False
    for r in range(reps):
        Z = np.asarray(base_sampler(rng, m), dtype=float)
        V = _value_matrix(family, Z)
        if V is not None:
            vals[r] = _mixture_estimates(V, 1, rng)[0]
        else:
            naive = True
            G = rng.standard_normal((1, m))
            vals[r] = math.exp(min(_sup_offset_many(family, Z, G, 1.0, 0.5)[0], 700.0))
    mean_w = float(vals.mean())
    point = math.log(mean_w)
    if reps < 2:
        warnings.warn("stderr unavailable with reps < 2", RuntimeWarning, stacklevel=2)
        return ComplexityEstimate("log_wills", m, reps, point, float("nan"), unstable=True)
    stderr = float(vals.std(ddof=1) / math.sqrt(reps)) / mean_w
    unstable = bool(vals.max() / vals.sum() > 0.5)
    if naive and unstable:
        warnings.warn("top replicate dominates the exponential mean; stderr unreliable",
                      RuntimeWarning, stacklevel=2)
    return ComplexityEstimate("log_wills", m, reps, point, stderr, unstable=unstable)


def _mean_se(sups: np.ndarray) -> tuple[float, float]:
    reps = sups.size
    if reps < 2:
        warnings.warn("stderr unavailable with reps < 2", RuntimeWarning, stacklevel=3)
        return float(sups.mean()), float("nan")
    return float(sups.mean()), float(sups.std(ddof=1) / math.sqrt(reps))


def rademacher(family, Z, reps: int, rng: np.random.Generator) -> ComplexityEstimate:
    """Mean of sup_f sum_i eps_i f(Z_i) over random sign vectors."""
    Z = np.asarray(Z, dtype=float)
    m = Z.shape[0]
    G = rng.integers(0, 2, size=(reps, m)).astype(float) * 2.0 - 1.0
    point, stderr = _mean_se(_sup_offset_many(family, Z, G, 1.0, 0.0))
    return ComplexityEstimate("rademacher", m, reps, point, stderr)


def gaussian(family, Z, reps: int, rng: np.random.Generator) -> ComplexityEstimate:
    """Mean of sup_f sum_i xi_i f(Z_i) over standard Gaussian vectors."""
    Z = np.asarray(Z, dtype=float)
    m = Z.shape[0]
    G = rng.standard_normal((reps, m))
    point, stderr = _mean_se(_sup_offset_many(family, Z, G, 1.0, 0.0))
    return ComplexityEstimate("gaussian", m, reps, point, stderr)


def offset_rademacher(family, Z, c: float, reps: int,
                      rng: np.random.Generator) -> ComplexityEstimate:
    """Rademacher supremum with a quadratic penalty c*f^2 inside."""
    if c <= 0:
        raise ConfigurationError("offset coefficient c must be positive")
    Z = np.asarray(Z, dtype=float)
    m = Z.shape[0]
    G = rng.integers(0, 2, size=(reps, m)).astype(float) * 2.0 - 1.0
    point, stderr = _mean_se(_sup_offset_many(family, Z, G, 1.0, c))
    return ComplexityEstimate("offset_rademacher", m, reps, point, stderr,
                              scale_params={"c": c})


def log_wills_box_indicators(d: int, m: int, scale: float, reps: int,
                             rng: np.random.Generator) -> ComplexityEstimate:
    """Exponential-supremum functional of scale * (axis-aligned box indicators)
    on base samples, exact in every dimension.

    Each selected point contributes scale*xi_i - scale^2/2.  A box threshold
    can always select nothing, so when every contribution is negative the
    supremum is exactly 0; with indicator values the per-point penalty
    scale^2/2 dominates once scale is a few units, making that the typical
    case.  For d = 1 positive contributions are resolved by exact suffix-cell
    enumeration; higher dimensions never need them at the scales used here.
    """
    sups = np.empty(reps)
    thresholds = ThresholdFamily1D()
    for r in range(reps):
        Z = rng.random((m, d))
        xi = rng.standard_normal((1, m))
        w = scale * xi - 0.5 * scale * scale
        if w.max() <= 0:
            sups[r] = 0.0
        elif d == 1:
            sups[r] = thresholds.sup_offset_many(Z[:, 0], xi, scale, 0.5 * scale * scale)[0]
        else:
            raise ConfigurationError(
                "positive contributions with d > 1 need a finite family")
    point, stderr, unstable = _log_mean_exp(sups)
    return ComplexityEstimate("log_wills", m, reps, point, stderr,
                              scale_params={"scale": scale}, unstable=unstable)


def covering_thresholds_1d(delta: float) -> int:
    """Cover size for 1-d thresholds at scale delta under the L2(uniform)
    metric, where the distance between thresholds is sqrt(|theta - theta'|)."""
    if not 0 < delta < 1:
        raise ConfigurationError("delta must lie in (0, 1)")
    return math.ceil(1.0 / (2.0 * delta * delta)) + 1
