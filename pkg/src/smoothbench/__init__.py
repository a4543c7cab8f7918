"""smoothbench: learner-vs-adversary sessions on smoothed data, complexity
estimators, and inequality checkers, with a reproducible experiment runner."""

__version__ = "0.1.0"

from .core import (
    ConfigurationError,
    IntegrityError,
    LabeledExample,
    NoiseModel,
    TangentTranscript,
    Transcript,
    run_session,
    run_tangent_session,
)

__all__ = [
    "ConfigurationError",
    "IntegrityError",
    "LabeledExample",
    "NoiseModel",
    "TangentTranscript",
    "Transcript",
    "run_session",
    "run_tangent_session",
    "__version__",
]
