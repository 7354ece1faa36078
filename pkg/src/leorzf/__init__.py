"""Woodbury/arSVD Gram-inverse maintenance and a LEO multi-user RZF
precoding Monte Carlo simulator."""

from .config import ScenarioConfig, parse_config
from .harness import (
    CampaignResult,
    ComparisonRow,
    ComparisonTable,
    SnapshotRecord,
    TrialResult,
    complexity_curve,
    ecdf,
    method_label,
    run_campaign,
    run_trial,
)
from .lowrank import (
    ArSvdConfig,
    GramState,
    LowRankFactor,
    UpdateReport,
    arsvd,
    cost_full,
    cost_wb_arsvd,
    direct_inverse,
    gram_delta,
    gram_matrix,
    update_inverse,
    woodbury_update,
)
from .precoding import Precoder, RateReport, rzf_precoder, sum_rate

__version__ = "0.1.0"

__all__ = [
    "ArSvdConfig",
    "CampaignResult",
    "ComparisonRow",
    "ComparisonTable",
    "GramState",
    "LowRankFactor",
    "Precoder",
    "RateReport",
    "ScenarioConfig",
    "SnapshotRecord",
    "TrialResult",
    "UpdateReport",
    "arsvd",
    "complexity_curve",
    "cost_full",
    "cost_wb_arsvd",
    "direct_inverse",
    "ecdf",
    "gram_delta",
    "gram_matrix",
    "method_label",
    "parse_config",
    "run_campaign",
    "run_trial",
    "rzf_precoder",
    "sum_rate",
    "update_inverse",
    "woodbury_update",
]
