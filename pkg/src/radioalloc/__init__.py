"""Utility-proportional-fair rate allocation for mixed real-time / delay-tolerant traffic."""
from .centralized import Allocation, allocate_centralized, kkt_certificate
from .distributed import ProtocolConfig, allocate_distributed, run_eura, run_iura
from .overhead import OverheadScenario, measure_overhead, predict_overhead
from .scenario import ScenarioScript, error_trace, oracle_optimal, run_scenario
from .utility import (
    ApplicationProfile,
    LogParams,
    SigmoidParams,
    UEProfile,
    app_demand,
    default_ues,
    log_marginal,
    ue_demand,
)

__version__ = "0.1.0"
