"""Covariance-surrogate position optimization for movable-antenna arrays.

The package splits into the physical layer (`model`), the feasible set and
its projection (`geometry`), the surrogate objective and its derivatives
(`objective`), the projected trust-region optimizer (`trsolver`), competing
baselines (`baselines`), verifiers for the supporting theory (`theory`),
and the Monte Carlo experiment harness plus CLI (`harness`, `cli`).
"""

from .baselines import (
    LineSearchConfig,
    historical_average_covariance,
    pgd,
    projected_newton,
    ptrso_historical,
)
from .geometry import GeometryConfig, build_constraints, is_feasible, project, ula
from .harness import ExperimentConfig, run_sweep, run_trial
from .model import (
    DesiredPaths,
    FactorizedCovariance,
    JammerSet,
    ScenarioConfig,
    desired_channel,
    generate_snapshots,
    mvdr_weights,
    output_sinr,
    random_scenario,
    sample_covariance,
    steering_vector,
    true_covariance,
)
from .objective import SurrogateContext, gradient, hessian, model_point, surrogate_value, true_value
from .trsolver import TrustRegionConfig, ptrso, run_block, steihaug_cg

__version__ = "0.1.0"

__all__ = [
    "DesiredPaths",
    "ExperimentConfig",
    "FactorizedCovariance",
    "GeometryConfig",
    "JammerSet",
    "LineSearchConfig",
    "ScenarioConfig",
    "SurrogateContext",
    "TrustRegionConfig",
    "build_constraints",
    "desired_channel",
    "generate_snapshots",
    "gradient",
    "hessian",
    "historical_average_covariance",
    "is_feasible",
    "model_point",
    "mvdr_weights",
    "output_sinr",
    "pgd",
    "project",
    "projected_newton",
    "ptrso",
    "ptrso_historical",
    "random_scenario",
    "run_block",
    "run_sweep",
    "run_trial",
    "sample_covariance",
    "steering_vector",
    "steihaug_cg",
    "surrogate_value",
    "true_covariance",
    "true_value",
    "ula",
    "__version__",
]
