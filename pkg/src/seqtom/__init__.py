"""Real-time state monitoring and dynamical-parameter estimation of a qubit
from sequences of unsharp measurements."""

from .config import ConfigError, RunConfig, defaults_for, parse_config
from .estimator import (
    HybridState,
    HypothesisGrid,
    ImpossibleOutcomeError,
    ParameterPoint,
    init_hybrid,
    map_estimate,
    posterior,
    predict,
    reduced_state,
    update,
)
from .harness import run_experiment, run_single
from .measurement import MeasurementStrength, build_ic_kraus, build_z_kraus, schedule_from
from .qubit import ZeroNormError, build_propagator, normalize

__version__ = "0.1.0"
