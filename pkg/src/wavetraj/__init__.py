"""Wave-Potential coupled ray and matter-wave trajectory tracing in the (x, z) plane."""

from .model import NumericsConfig, Regime, RegimeConfig, validate_config
from .estimator import BeamTracer
from .scenarios import build_scenario, list_scenarios, run_scenario

__version__ = "0.1.0"

__all__ = [
    "BeamTracer", "NumericsConfig", "Regime", "RegimeConfig", "validate_config",
    "build_scenario", "list_scenarios", "run_scenario", "__version__",
]
