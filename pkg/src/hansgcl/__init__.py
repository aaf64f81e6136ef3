"""Graph contrastive learning with hardness-aware, budgeted negative scheduling."""

from .augment import AugmentConfig, make_views
from .contrastive import ActiveNegatives, PairContext, info_nce_loss
from .estimator import EpochRecord, HansGCL
from .experiment import RunConfig, run_budget_sweep, run_ratio_sweep, run_training
from .graph import Graph, generate_sbm, load_graph, make_splits, save_graph
from .hans import BudgetLedger, HansConfig, NegativePools
from .probe import LinearProbe, final_embeddings, micro_f1, train_probe

__all__ = [
    "ActiveNegatives",
    "AugmentConfig",
    "BudgetLedger",
    "EpochRecord",
    "Graph",
    "HansConfig",
    "HansGCL",
    "LinearProbe",
    "NegativePools",
    "PairContext",
    "RunConfig",
    "final_embeddings",
    "generate_sbm",
    "info_nce_loss",
    "load_graph",
    "make_splits",
    "make_views",
    "micro_f1",
    "run_budget_sweep",
    "run_ratio_sweep",
    "run_training",
    "save_graph",
    "train_probe",
]

__version__ = "0.1.0"
