"""Multi-level discourse relation classification with hierarchy-aware contrastive learning."""

from .config import TrainConfig
from .corpus import Instance, Vocabulary, load_corpus, synth_corpus, synth_records
from .estimator import HierarchicalContrastiveClassifier
from .hierarchy import SenseHierarchy, load_hierarchy, local_score, score_matrix
from .metrics import consistency, evaluate, labelwise_f1, level_metrics
from .model import Checkpoint, HierContrastModel, load_checkpoint, save_checkpoint
from .trainer import fit, infer

__version__ = "0.1.0"

__all__ = [
    "Checkpoint",
    "HierContrastModel",
    "HierarchicalContrastiveClassifier",
    "Instance",
    "SenseHierarchy",
    "TrainConfig",
    "Vocabulary",
    "consistency",
    "evaluate",
    "fit",
    "infer",
    "labelwise_f1",
    "level_metrics",
    "load_checkpoint",
    "load_corpus",
    "load_hierarchy",
    "local_score",
    "save_checkpoint",
    "score_matrix",
    "synth_corpus",
    "synth_records",
]
