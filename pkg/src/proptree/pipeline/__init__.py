"""Two-step baseline: CRF segmentation, then entity-pair edge scoring."""

from .crf import CrfModel, crf_objective, train_crf
from .edge_models import (
    EdgeScorer,
    LtmModel,
    MttModel,
    extract_edge_features,
    mtt_log_partition_and_marginals,
    train_ltm,
    train_mtt,
)
from .predict import greedy_entity_parents, pipeline_predict

__all__ = [
    "CrfModel",
    "EdgeScorer",
    "LtmModel",
    "MttModel",
    "crf_objective",
    "extract_edge_features",
    "greedy_entity_parents",
    "mtt_log_partition_and_marginals",
    "pipeline_predict",
    "train_crf",
    "train_ltm",
    "train_mtt",
]
