"""Weighted liquid rank reputation system and the market simulator used to
measure its security and equity."""
from ._kernels import BACKEND
from .ledger import Ledger
from .metrics import (AgentEconomics, MetricsReport, UndefinedCorrelation, WeightedSample,
                      equity_weights, inequity, loss_to_scam, pearson_by_good, significance_test,
                      utility, weighted_covariance, weighted_pearson)
from .presets import PRESETS, preset
from .reputation import (RankMap, RatedTransaction, ReputationParams, blend_ranks,
                         compute_differential_ranks, rating_weight, update_ranks)
from .simulator import (AgentSpec, ConfigError, MarketConfig, SimulationResult,
                        drop_unsatisfying_suppliers, init_population, inject_scam_activity,
                        run_simulation, select_supplier, shopping_list, transact_and_rate)

__version__ = "0.1.0"

__all__ = [
    "AgentEconomics",
    "AgentSpec",
    "BACKEND",
    "blend_ranks",
    "compute_differential_ranks",
    "ConfigError",
    "drop_unsatisfying_suppliers",
    "equity_weights",
    "inequity",
    "init_population",
    "inject_scam_activity",
    "Ledger",
    "loss_to_scam",
    "MarketConfig",
    "MetricsReport",
    "pearson_by_good",
    "preset",
    "PRESETS",
    "RankMap",
    "RatedTransaction",
    "rating_weight",
    "ReputationParams",
    "run_simulation",
    "select_supplier",
    "shopping_list",
    "significance_test",
    "SimulationResult",
    "transact_and_rate",
    "UndefinedCorrelation",
    "update_ranks",
    "utility",
    "weighted_covariance",
    "weighted_pearson",
    "WeightedSample",
]
