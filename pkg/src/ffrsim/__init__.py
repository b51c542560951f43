"""Coordinated fast frequency response simulator.

Grid frequency after a large generation loss, supported by an EV fleet, a
data center (UPS + IT workload) and a BESS under adaptive or fixed
participation weights.
"""

from ._kernels import BACKEND
from .config import ConfigDocument, ConfigError, default_document, default_scenario, parse_config
from .coordinator import (
    AllocationStrategy,
    DroopGains,
    ParticipationWeights,
    adaptive_weights,
    allocate,
    fixed_weights,
    weights_trace,
)
from .errors import ConfigurationError, MetricsError, SimulationError, SystemCollapseError
from .grid import (
    DelayLine,
    DisturbanceEvent,
    Generator,
    GridState,
    apply_disturbance,
    coi_frequency,
    delay_push_sample,
    delay_read,
    swing_step,
)
from .resources import (
    BessModel,
    DataCenterModel,
    EvFleetModel,
    ResourcePowerSample,
    available_capacity,
    bess_step,
    ev_power,
    ev_soc_step,
    it_reduction,
    ups_power,
)
from .scenario import (
    COLUMNS,
    MetricSettings,
    MetricsRecord,
    RunResult,
    Scenario,
    build_case,
    compare_strategies,
    compute_metrics,
    run_scenario,
)

__version__ = "0.1.0"

__all__ = [
    "AllocationStrategy",
    "BACKEND",
    "BessModel",
    "COLUMNS",
    "ConfigDocument",
    "ConfigError",
    "ConfigurationError",
    "DataCenterModel",
    "DelayLine",
    "DisturbanceEvent",
    "DroopGains",
    "EvFleetModel",
    "Generator",
    "GridState",
    "MetricSettings",
    "MetricsError",
    "MetricsRecord",
    "ParticipationWeights",
    "ResourcePowerSample",
    "RunResult",
    "Scenario",
    "SimulationError",
    "SystemCollapseError",
    "__version__",
    "adaptive_weights",
    "allocate",
    "apply_disturbance",
    "available_capacity",
    "bess_step",
    "build_case",
    "coi_frequency",
    "compare_strategies",
    "compute_metrics",
    "default_document",
    "default_scenario",
    "delay_push_sample",
    "delay_read",
    "ev_power",
    "ev_soc_step",
    "fixed_weights",
    "it_reduction",
    "parse_config",
    "run_scenario",
    "swing_step",
    "ups_power",
    "weights_trace",
]
