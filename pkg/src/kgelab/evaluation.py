"""Link-prediction evaluation: ranking, MRR, Hits@N, cross-validation.

For each test triple the true entity is ranked against every entity in the
model vocabulary, once replacing the subject and once the object. Under the
filtered protocol, candidates that would form a triple already known to be
true (anywhere in train or test) are excluded before ranking, so the model
is never penalized for preferring a different correct answer. Ties rank
pessimistically: the true entity is placed after all equal-scoring
candidates, preventing constant-score models from looking perfect.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from .exceptions import ConfigError, UnknownEntityError
from .graph import KnowledgeGraph, split_kfold
from .models import EmbeddingModel, ModelConfig, score_all_objects, score_all_subjects

PROTOCOL_RAW = "raw"
PROTOCOL_FILTERED = "filtered"
PROTOCOLS = (PROTOCOL_RAW, PROTOCOL_FILTERED)

SIDE_SUBJECT = "subject"
SIDE_OBJECT = "object"


@dataclass(frozen=True)
class RankRecord:
    """Rank of the true entity for one (triple, side) query."""

    triad: tuple[str, str, str]
    side: str
    rank: int
    protocol: str

    @property
    def reciprocal(self) -> float:
        return 1.0 / self.rank


@dataclass(frozen=True)
class EvalReport:
    mrr: float
    hits1: float
    hits10: float
    rank_records: tuple[RankRecord, ...]
    protocol: str
    model_id: str
    dataset_id: str

    def to_dict(self, include_records: bool = False) -> dict:
        out = {
            "mrr": self.mrr,
            "hits1": self.hits1,
            "hits10": self.hits10,
            "n_queries": len(self.rank_records),
            "protocol": self.protocol,
            "model_id": self.model_id,
            "dataset_id": self.dataset_id,
        }
        if include_records:
            out["rank_records"] = [
                {
                    "subject": r.triad[0],
                    "predicate": r.triad[1],
                    "object": r.triad[2],
                    "side": r.side,
                    "rank": r.rank,
                }
                for r in self.rank_records
            ]
        return out


def mrr_of_ranks(ranks) -> float:
    """Mean reciprocal rank of a vector of 1-based ranks."""
    arr = np.asarray(ranks, dtype=np.float64)
    if arr.size == 0 or np.any(arr < 1):
        raise ConfigError("ranks must be a nonempty vector of values >= 1")
    return float((1.0 / arr).mean())


def hits_at_n(ranks, n: int) -> float:
    """Fraction of ranks within the top n."""
    arr = np.asarray(ranks, dtype=np.float64)
    if arr.size == 0 or np.any(arr < 1):
        raise ConfigError("ranks must be a nonempty vector of values >= 1")
    if n < 1:
        raise ConfigError(f"n must be >= 1, got {n}")
    return float((arr <= n).mean())


class _KnownIndex:
    """Known-true lookups in model id space, for the filtered protocol."""

    def __init__(self, model: EmbeddingModel, known: Optional[KnowledgeGraph]):
        self.objects_for: dict[tuple[int, int], set[int]] = defaultdict(set)
        self.subjects_for: dict[tuple[int, int], set[int]] = defaultdict(set)
        if known is None:
            return
        for s_label, p_label, o_label in known.labeled():
            try:
                s = model.entity_id(s_label)
                p = model.relation_id(p_label)
                o = model.entity_id(o_label)
            except UnknownEntityError:
                # Known triples outside the model vocabulary can never be
                # ranking candidates, so they cannot filter anything.
                continue
            self.objects_for[(s, p)].add(o)
            self.subjects_for[(p, o)].add(s)


def _resolve_triad(model: EmbeddingModel, triad) -> tuple[int, int, int]:
    s, p, o = triad
    return (model.entity_id(s), model.relation_id(p), model.entity_id(o))


def _rank_from_scores(scores: np.ndarray, true_id: int, exclude: set[int]) -> int:
    true_score = scores[true_id]
    if exclude:
        mask = np.ones(scores.shape[0], dtype=bool)
        mask[list(exclude)] = False
        mask[true_id] = True
        scores = scores[mask]
        greater = int((scores > true_score).sum())
        ties = int((scores == true_score).sum()) - 1
    else:
        greater = int((scores > true_score).sum())
        ties = int((scores == true_score).sum()) - 1
    return 1 + greater + ties


def rank_entity(
    model: EmbeddingModel,
    triad,
    side: str,
    protocol: str = PROTOCOL_FILTERED,
    known: Optional[KnowledgeGraph] = None,
    _index: Optional[_KnownIndex] = None,
) -> RankRecord:
    """Rank the true subject or object of one triple against all entities.

    ``known`` supplies the filter set (ignored under the raw protocol); the
    true triad itself is never filtered out.
    """
    if protocol not in PROTOCOLS:
        raise ConfigError(f"protocol must be one of {PROTOCOLS}, got {protocol!r}")
    if side not in (SIDE_SUBJECT, SIDE_OBJECT):
        raise ConfigError(f"side must be 'subject' or 'object', got {side!r}")
    s, p, o = _resolve_triad(model, triad)
    index = _index
    if index is None:
        index = _KnownIndex(model, known if protocol == PROTOCOL_FILTERED else None)
    exclude: set[int] = set()
    if side == SIDE_OBJECT:
        scores = score_all_objects(model, s, p)
        if protocol == PROTOCOL_FILTERED:
            exclude = index.objects_for.get((s, p), set()) - {o}
        rank = _rank_from_scores(scores, o, exclude)
    else:
        scores = score_all_subjects(model, p, o)
        if protocol == PROTOCOL_FILTERED:
            exclude = index.subjects_for.get((p, o), set()) - {s}
        rank = _rank_from_scores(scores, s, exclude)
    labels = (
        model.entities[s],
        model.relations[p],
        model.entities[o],
    )
    return RankRecord(triad=labels, side=side, rank=rank, protocol=protocol)


def evaluate(
    model: EmbeddingModel,
    test: KnowledgeGraph,
    known: Optional[KnowledgeGraph] = None,
    protocol: str = PROTOCOL_FILTERED,
) -> EvalReport:
    """Rank both sides of every test triple and aggregate MRR / Hits@N.

    ``known`` should cover everything true (train plus test) so the
    filtered protocol can discard competing true candidates. Test triples
    must lie entirely inside the model vocabulary; offenders are listed.
    """
    if protocol not in PROTOCOLS:
        raise ConfigError(f"protocol must be one of {PROTOCOLS}, got {protocol!r}")
    if len(test) == 0:
        raise ConfigError("test graph is empty")
    unknown = []
    for triad in test.labeled():
        try:
            _resolve_triad(model, triad)
        except UnknownEntityError:
            unknown.append(triad)
    if unknown:
        shown = ", ".join(str(t) for t in unknown[:5])
        raise UnknownEntityError(
            f"{len(unknown)} test triples reference labels unknown to the model: {shown}"
        )
    index = _KnownIndex(model, known if protocol == PROTOCOL_FILTERED else None)
    records = []
    for triad in sorted(test.labeled()):
        for side in (SIDE_SUBJECT, SIDE_OBJECT):
            records.append(
                rank_entity(model, triad, side, protocol, _index=index)
            )
    ranks = [r.rank for r in records]
    return EvalReport(
        mrr=mrr_of_ranks(ranks),
        hits1=hits_at_n(ranks, 1),
        hits10=hits_at_n(ranks, 10),
        rank_records=tuple(records),
        protocol=protocol,
        model_id=f"{model.family}-k{model.config.k}-seed{model.config.seed}",
        dataset_id=test.content_hash()[:16],
    )


def predict_links(
    model: EmbeddingModel,
    predicate: str,
    subject: Optional[str] = None,
    obj: Optional[str] = None,
    top_k: int = 10,
) -> list[tuple[str, float]]:
    """Top-k completions of a partial triple, best first.

    Give ``subject`` to rank candidate objects, or ``obj`` to rank candidate
    subjects. Ties break by entity id so output is stable.
    """
    if (subject is None) == (obj is None):
        raise ConfigError("provide exactly one of subject or obj")
    if top_k < 0:
        raise ConfigError(f"top_k must be >= 0, got {top_k}")
    p = model.relation_id(predicate)
    if subject is not None:
        scores = score_all_objects(model, model.entity_id(subject), p)
    else:
        scores = score_all_subjects(model, p, model.entity_id(obj))
    order = np.lexsort((np.arange(scores.shape[0]), -scores))
    return [(model.entities[i], float(scores[i])) for i in order[:top_k]]


# -- cross-validation ----------------------------------------------------------


@dataclass(frozen=True)
class CVSummary:
    mean: dict
    std: dict
    k: int

    def to_dict(self) -> dict:
        return {"k": self.k, "mean": self.mean, "std": self.std}


@dataclass(frozen=True)
class CVResult:
    fold_reports: tuple[EvalReport, ...]
    summary: CVSummary

    def to_dict(self, include_records: bool = False) -> dict:
        return {
            "folds": [r.to_dict(include_records) for r in self.fold_reports],
            "summary": self.summary.to_dict(),
        }


def cross_validate(
    graph: KnowledgeGraph,
    config: ModelConfig,
    k: int,
    protocol: str = PROTOCOL_FILTERED,
) -> CVResult:
    """Train and evaluate one model per fold; summarize mean and spread.

    The filter set for every fold is the full graph (its folds partition
    it), and the spread is the sample standard deviation across folds.
    """
    from .training import train  # local import to avoid a cycle

    folds = split_kfold(graph, k, config.seed)
    reports = []
    for fold in folds:
        model, _ = train(fold.train, config)
        reports.append(evaluate(model, fold.test, known=graph, protocol=protocol))
    metrics = {
        "mrr": [r.mrr for r in reports],
        "hits1": [r.hits1 for r in reports],
        "hits10": [r.hits10 for r in reports],
    }
    mean = {name: float(np.mean(vals)) for name, vals in metrics.items()}
    std = {
        name: float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0
        for name, vals in metrics.items()
    }
    return CVResult(
        fold_reports=tuple(reports),
        summary=CVSummary(mean=mean, std=std, k=k),
    )


# -- reporting ----------------------------------------------------------------


def random_ranking_mrr(n_candidates: int) -> float:
    """Expected MRR of a uniformly random ranking over n candidates.

    The reciprocal rank of a uniformly placed item averages H_n / n.
    """
    if n_candidates < 1:
        raise ConfigError("need at least one candidate")
    harmonic = sum(1.0 / i for i in range(1, n_candidates + 1))
    return harmonic / n_candidates


def render_metrics_table(rows: Iterable[dict]) -> str:
    """Aligned text table of metric rows: name, MRR, Hits@10, Hits@1."""
    rows = list(rows)
    width = max([len("Model")] + [len(str(r["name"])) for r in rows])
    lines = [
        f"{'Model':<{width}}  {'MRR':>6}  {'Hits@10':>7}  {'Hits@1':>6}",
    ]
    for r in rows:
        lines.append(
            f"{r['name']:<{width}}  {r['mrr']:>6.2f}  {r['hits10']:>7.2f}  {r['hits1']:>6.2f}"
        )
    return "\n".join(lines)
