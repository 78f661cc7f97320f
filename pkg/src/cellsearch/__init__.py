"""Cell-search latency of random beamforming in mmWave networks.

Closed-form and quadrature results (:mod:`cellsearch.analytic`), a Monte
Carlo simulator (:mod:`cellsearch.montecarlo`), the integer beamwidth
optimizer (:mod:`cellsearch.optimizer`) and the ``cellsearch`` command line.
"""
from .analytic import (
    DEFAULT_QUAD,
    AnalyticResult,
    LatencyResult,
    QuadratureConfig,
    evaluate,
    exhaustive_baseline,
    expected_latency,
    expected_latency_limit,
    interference_exponent,
    latency_pmf,
    p_failure,
    p_no_los,
    p_no_los_finite,
    p_success,
    p_success_with_error,
)
from .errors import LowThresholdWarning, NumericalError, ParameterError, UndefinedLatencyError
from .model import NetworkParams, antenna_gain, derive_constants, mini_slot_duration, path_loss
from .montecarlo import ProtocolConfig, SimulationResult, estimate, sample_topology, slot_sinr
from .optimizer import DesignProblem, DesignSolution, solve

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_QUAD", "AnalyticResult", "LatencyResult", "QuadratureConfig", "evaluate",
    "exhaustive_baseline", "expected_latency", "expected_latency_limit", "interference_exponent",
    "latency_pmf", "p_failure", "p_no_los", "p_no_los_finite", "p_success", "p_success_with_error",
    "LowThresholdWarning", "NumericalError", "ParameterError", "UndefinedLatencyError",
    "NetworkParams", "antenna_gain", "derive_constants", "mini_slot_duration", "path_loss",
    "ProtocolConfig", "SimulationResult", "estimate", "sample_topology", "slot_sinr",
    "DesignProblem", "DesignSolution", "solve",
]
