"""kgelab: knowledge graph embedding toolkit.

Extracts first-order ontology triples for a seed lexicon, trains TransE and
ComplEx embedding models (optionally fused with text-derived concepts and
pooled sentence vectors), and evaluates subject/object link prediction with
MRR and Hits@N.
"""

from ._kernels import BACKEND_NAME
from .evaluation import EvalReport, RankRecord, cross_validate, evaluate, predict_links
from .fusion import SentenceRecord, TokenVectorSource, apply_init_hints, build_variation, pool_tokens
from .graph import (
    KnowledgeGraph,
    SplitResult,
    Triple,
    graph_stats,
    load_triples,
    split_holdout,
    split_kfold,
)
from .models import EmbeddingModel, ModelConfig, init_model, load_model, save_model
from .ontology import Lexicon, OntologySource, canonicalize_mentions, extract_first_order
from .training import CorruptionBatch, TrainTrace, gradient_check, loss_multiclass_nll, loss_pairwise, sample_corruptions, train

__version__ = "0.1.0"

__all__ = [
    "BACKEND_NAME",
    "CorruptionBatch",
    "EmbeddingModel",
    "EvalReport",
    "KnowledgeGraph",
    "Lexicon",
    "ModelConfig",
    "OntologySource",
    "RankRecord",
    "SentenceRecord",
    "SplitResult",
    "TokenVectorSource",
    "TrainTrace",
    "Triple",
    "apply_init_hints",
    "build_variation",
    "canonicalize_mentions",
    "cross_validate",
    "evaluate",
    "extract_first_order",
    "gradient_check",
    "graph_stats",
    "init_model",
    "load_model",
    "load_triples",
    "loss_multiclass_nll",
    "loss_pairwise",
    "pool_tokens",
    "predict_links",
    "sample_corruptions",
    "save_model",
    "split_holdout",
    "split_kfold",
    "train",
    "__version__",
]
