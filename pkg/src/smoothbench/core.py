"""Domain types and the learner-vs-adversary session loops.

A session runs for T steps.  At each step the learner commits its current
fit using only the data seen so far, the adversary then emits a covariate
from a distribution that may depend on the whole history, and finally the
label is revealed.  The cumulative squared gap between the learner's
prediction and the target function is the session's error.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Protocol, Sequence

import numpy as np

from .rng import STREAM_NOISE, STREAM_PRIMAL, STREAM_TANGENT, derive_seed, make_rng


class ConfigurationError(ValueError):
    """Inconsistent run configuration (dimension mismatch, bad domain, ...)."""


class IntegrityError(RuntimeError):
    """A runtime contract was violated (e.g. a declared density-ratio bound)."""


@dataclass(frozen=True)
class LabeledExample:
    """One (covariate, label) pair; covariates live in the unit box."""

    x: np.ndarray
    y: float


@dataclass(frozen=True)
class NoiseModel:
    """Label noise: none, or centered Gaussian with standard deviation nu."""

    kind: str = "noiseless"
    nu: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in ("noiseless", "gaussian"):
            raise ConfigurationError(f"unknown noise kind {self.kind!r}")
        if self.nu < 0:
            raise ConfigurationError("nu must be >= 0")
        if self.kind == "noiseless" and self.nu != 0:
            raise ConfigurationError("noiseless noise model requires nu = 0")

    @staticmethod
    def noiseless() -> "NoiseModel":
        return NoiseModel("noiseless", 0.0)

    @staticmethod
    def gaussian(nu: float) -> "NoiseModel":
        return NoiseModel("gaussian", nu)


@dataclass
class Transcript:
    """Full record of one session."""

    xs: np.ndarray
    ys: np.ndarray
    predictions: np.ndarray
    target_values: np.ndarray
    step_losses: np.ndarray
    cum_err: float
    seed: int
    params: dict

    @property
    def examples(self) -> list[LabeledExample]:
        return [LabeledExample(self.xs[t], float(self.ys[t])) for t in range(len(self.ys))]

    def validate(self) -> None:
        T = len(self.ys)
        for name in ("xs", "predictions", "target_values", "step_losses"):
            if len(getattr(self, name)) != T:
                raise IntegrityError(f"{name} length != T")
        if np.any(self.step_losses < 0):
            raise IntegrityError("negative step loss")
        expected = (self.predictions - self.target_values) ** 2
        if not np.allclose(self.step_losses, expected, rtol=1e-12, atol=1e-12):
            raise IntegrityError("step_losses do not match squared prediction gaps")
        total = float(self.step_losses.sum())
        if abs(self.cum_err - total) > 1e-9 * max(1.0, abs(total)):
            raise IntegrityError("cum_err does not match the sum of step losses")


@dataclass
class TangentTranscript:
    """Primal covariates plus per-step conditionally independent copies."""

    primal: np.ndarray
    tangent: np.ndarray
    history_seeds: list[int] = field(default_factory=list)


class LearnerState(Protocol):
    def predict(self, x) -> float: ...

    def predict_many(self, xs: np.ndarray) -> np.ndarray: ...

    def update(self, x, y: float) -> None: ...


class Learner(Protocol):
    d: int

    def session_state(self) -> LearnerState: ...


class AdversaryState(Protocol):
    def next_distribution(self): ...

    def observe(self, x, y: float, prediction: float) -> None: ...

    def target(self, x) -> float: ...

    def target_many(self, xs: np.ndarray) -> np.ndarray: ...


class Adversary(Protocol):
    d: int
    sigma: float

    def session_state(self, T: int) -> AdversaryState: ...


def _check_setup(learner, adversary, T: int) -> None:
    if T < 1:
        raise ConfigurationError("T must be >= 1")
    if learner is not None and learner.d != adversary.d:
        raise ConfigurationError(
            f"learner dimension {learner.d} != adversary dimension {adversary.d}"
        )


def run_session(learner, adversary, T: int, noise: NoiseModel | None = None,
                seed: int = 0) -> Transcript:
    """Run one session and return its full transcript.

    The learner commits each fit before seeing the step's covariate; the
    label is the adversary's target value plus optional Gaussian noise,
    sampled after the covariate on a dedicated stream.  Raises
    IntegrityError if an emitted distribution's density ratio exceeds the
    adversary's declared 1/sigma bound at the sampled point.
    """
    noise = noise or NoiseModel.noiseless()
    _check_setup(learner, adversary, T)
    d = adversary.d
    uniforms = make_rng(seed, STREAM_PRIMAL).random((T, d)).tolist()
    eta = None
    if noise.kind == "gaussian" and noise.nu > 0:
        eta = (make_rng(seed, STREAM_NOISE).standard_normal(T) * noise.nu).tolist()

    astate = adversary.session_state(T)
    lstate = learner.session_state()
    ratio_cap = (1.0 + 1e-9) / adversary.sigma

    xs: list = []
    ys: list[float] = []
    preds: list[float] = []
    targets: list[float] = []
    cum = 0.0
    for t in range(T):
        dist = astate.next_distribution()
        x = dist.sample_uniform(uniforms[t])
        if dist.density_ratio(x) > ratio_cap:
            raise IntegrityError(
                f"density ratio {dist.density_ratio(x):.6g} exceeds 1/sigma at step {t + 1}"
            )
        yhat = lstate.predict(x)
        fstar = astate.target(x)
        y = fstar if eta is None else fstar + eta[t]
        gap = yhat - fstar
        cum += gap * gap
        xs.append(x)
        ys.append(y)
        preds.append(yhat)
        targets.append(fstar)
        lstate.update(x, y)
        astate.observe(x, y, yhat)

    preds_arr = np.asarray(preds, dtype=float)
    targets_arr = np.asarray(targets, dtype=float)
    losses = (preds_arr - targets_arr) ** 2
    eps = getattr(adversary, "eps", None)
    if hasattr(adversary, "resolve_eps"):
        eps = adversary.resolve_eps(T)
    return Transcript(
        xs=np.asarray(xs, dtype=float).reshape(T, d),
        ys=np.asarray(ys, dtype=float),
        predictions=preds_arr,
        target_values=targets_arr,
        step_losses=losses,
        cum_err=float(losses.sum()),
        seed=seed,
        params={
            "d": d,
            "sigma": adversary.sigma,
            "T": T,
            "eps": eps,
            "noise_kind": noise.kind,
            "nu": noise.nu,
        },
    )


def run_tangent_session(adversary, learner, T: int, seed: int = 0) -> TangentTranscript:
    """Run a session that additionally draws a per-step independent copy.

    At each step the same conditional distribution is sampled twice: once
    on the primal stream (which drives the history) and once on a per-step
    tangent substream that never enters subsequent conditioning.  The primal
    trajectory is bit-identical to run_session with the same seed.
    """
    _check_setup(learner, adversary, T)
    d = adversary.d
    uniforms = make_rng(seed, STREAM_PRIMAL).random((T, d)).tolist()

    astate = adversary.session_state(T)
    lstate = learner.session_state() if learner is not None else None
    primal = np.empty((T, d), dtype=float)
    tangent = np.empty((T, d), dtype=float)
    step_seeds: list[int] = []
    for t in range(T):
        dist = astate.next_distribution()
        x = dist.sample_uniform(uniforms[t])
        tangent_seed = derive_seed(seed, STREAM_TANGENT, t)
        step_seeds.append(tangent_seed)
        tangent_rng = np.random.Generator(np.random.PCG64(tangent_seed))
        xp = dist.sample_uniform(tangent_rng.random(d).tolist())
        primal[t] = x
        tangent[t] = xp
        y = astate.target(x)
        yhat = lstate.predict(x) if lstate is not None else 0.0
        if lstate is not None:
            lstate.update(x, y)
        astate.observe(x, y, yhat)
    return TangentTranscript(primal=primal, tangent=tangent, history_seeds=step_seeds)


def run_covariate_session(adversary, T: int, seed: int = 0) -> np.ndarray:
    """Covariates of a session with no learner in the loop.

    Uses the same primal stream as run_session, so the returned (T, d) array
    is bit-identical to the covariates any learner would have seen.
    """
    if T < 1:
        raise ConfigurationError("T must be >= 1")
    d = adversary.d
    uniforms = make_rng(seed, STREAM_PRIMAL).random((T, d)).tolist()
    astate = adversary.session_state(T)
    xs = np.empty((T, d), dtype=float)
    for t in range(T):
        dist = astate.next_distribution()
        x = dist.sample_uniform(uniforms[t])
        xs[t] = x
        astate.observe(x, astate.target(x), 0.0)
    return xs


def replicate_seeds(master: int, reps: int) -> list[int]:
    """Per-replicate session seeds derived from one master seed."""
    return [derive_seed(master, r) for r in range(reps)]


def mean_and_stderr(values: Sequence[float]) -> tuple[float, float]:
    """Sample mean and its standard error (ddof=1; 0 for a single value)."""
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        raise ValueError("no values")
    if arr.size == 1:
        return float(arr[0]), 0.0
    return float(arr.mean()), float(arr.std(ddof=1) / np.sqrt(arr.size))
