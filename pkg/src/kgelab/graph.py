"""Immutable triple store: vocabularies, TSV ingestion, splits, statistics.

A :class:`KnowledgeGraph` interns entity and relation labels into integer
ids and keeps the triple set as id triads. Labels are canonicalized on the
way in (trimmed, inner whitespace collapsed, lowercased) so that "Pain " and
"pain" intern to the same entity. Graphs are frozen after construction and
safe to share between threads.
"""

from __future__ import annotations

import hashlib
import logging
import re
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Iterator, Sequence

import numpy as np

from .exceptions import ConfigError, EmptyInputError, ParseError, UnknownEntityError
from .seeding import STREAM_SPLIT, stream

log = logging.getLogger(__name__)

_WS = re.compile(r"\s+")

Triad = tuple[int, int, int]


def canonical_label(label: str) -> str:
    """Trim, collapse internal whitespace, lowercase."""
    return _WS.sub(" ", label.strip()).lower()


@dataclass(frozen=True)
class Triple:
    """One subject-predicate-object fact. Labels are canonicalized on init."""

    subject: str
    predicate: str
    object: str

    def __post_init__(self):
        for name in ("subject", "predicate", "object"):
            value = canonical_label(getattr(self, name))
            if not value:
                raise ValueError(f"triple {name} is empty after canonicalization")
            object.__setattr__(self, name, value)

    def as_tuple(self) -> tuple[str, str, str]:
        return (self.subject, self.predicate, self.object)


@dataclass(frozen=True)
class KnowledgeGraph:
    """Deduplicated triple set over interned entity/relation vocabularies.

    ``entities`` and ``relations`` are ordered by first occurrence during
    construction; ``triads`` is stored sorted so iteration order is a pure
    function of content.
    """

    entities: tuple[str, ...]
    relations: tuple[str, ...]
    triads: tuple[Triad, ...]

    @classmethod
    def from_triples(cls, triples: Iterable[Triple | Sequence[str]]) -> "KnowledgeGraph":
        """Build a graph, interning labels in first-occurrence order."""
        entities: dict[str, int] = {}
        relations: dict[str, int] = {}
        triads: set[Triad] = set()
        for t in triples:
            if not isinstance(t, Triple):
                t = Triple(*t)
            s = entities.setdefault(t.subject, len(entities))
            p = relations.setdefault(t.predicate, len(relations))
            o = entities.setdefault(t.object, len(entities))
            triads.add((s, p, o))
        return cls(
            entities=tuple(entities),
            relations=tuple(relations),
            triads=tuple(sorted(triads)),
        )

    # -- vocabulary -------------------------------------------------------

    @cached_property
    def _entity_ids(self) -> dict[str, int]:
        return {label: i for i, label in enumerate(self.entities)}

    @cached_property
    def _relation_ids(self) -> dict[str, int]:
        return {label: i for i, label in enumerate(self.relations)}

    @cached_property
    def _triad_set(self) -> frozenset[Triad]:
        return frozenset(self.triads)

    @property
    def n_entities(self) -> int:
        return len(self.entities)

    @property
    def n_relations(self) -> int:
        return len(self.relations)

    def entity_id(self, label: str) -> int:
        try:
            return self._entity_ids[canonical_label(label)]
        except KeyError:
            raise UnknownEntityError(f"unknown entity: {label!r}") from None

    def relation_id(self, label: str) -> int:
        try:
            return self._relation_ids[canonical_label(label)]
        except KeyError:
            raise UnknownEntityError(f"unknown relation: {label!r}") from None

    def has_entity(self, label: str) -> bool:
        return canonical_label(label) in self._entity_ids

    def has_relation(self, label: str) -> bool:
        return canonical_label(label) in self._relation_ids

    # -- triples ----------------------------------------------------------

    def __len__(self) -> int:
        return len(self.triads)

    def __contains__(self, triad: Triad) -> bool:
        return tuple(triad) in self._triad_set

    def labeled(self) -> Iterator[tuple[str, str, str]]:
        for s, p, o in self.triads:
            yield (self.entities[s], self.relations[p], self.entities[o])

    def label_triad(self, triad: Triad) -> tuple[str, str, str]:
        s, p, o = triad
        return (self.entities[s], self.relations[p], self.entities[o])

    def to_array(self) -> np.ndarray:
        """Triads as an int64 array of shape (len(self), 3)."""
        if not self.triads:
            return np.empty((0, 3), dtype=np.int64)
        return np.asarray(self.triads, dtype=np.int64)

    def subgraph(self, triads: Iterable[Triad]) -> "KnowledgeGraph":
        """Subset of triads under the same (full) vocabularies."""
        keep = []
        for t in triads:
            t = tuple(t)
            if t not in self._triad_set:
                raise UnknownEntityError(f"triad {t} not in graph")
            keep.append(t)
        return KnowledgeGraph(self.entities, self.relations, tuple(sorted(set(keep))))

    def union(self, other: "KnowledgeGraph") -> "KnowledgeGraph":
        """Label-level union; self's vocabulary order is preserved, other's
        new labels append in their first-occurrence order."""
        return self.with_triples(other.labeled())

    def with_triples(self, triples: Iterable[Triple | Sequence[str]]) -> "KnowledgeGraph":
        """Copy with extra triples; new labels extend the vocabularies."""
        entities = {label: i for i, label in enumerate(self.entities)}
        relations = {label: i for i, label in enumerate(self.relations)}
        triads = set(self.triads)
        for t in triples:
            if not isinstance(t, Triple):
                t = Triple(*t)
            s = entities.setdefault(t.subject, len(entities))
            p = relations.setdefault(t.predicate, len(relations))
            o = entities.setdefault(t.object, len(entities))
            triads.add((s, p, o))
        return KnowledgeGraph(tuple(entities), tuple(relations), tuple(sorted(triads)))

    def write_tsv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for s, p, o in self.labeled():
                fh.write(f"{s}\t{p}\t{o}\n")

    def content_hash(self) -> str:
        """Hash of the labeled triple set; identifies the dataset."""
        h = hashlib.sha256()
        for s, p, o in sorted(self.labeled()):
            h.update(f"{s}\t{p}\t{o}\n".encode("utf-8"))
        return h.hexdigest()


def load_triples(path, fmt: str = "tsv") -> KnowledgeGraph:
    """Load a triple file: one ``subject<TAB>predicate<TAB>object`` per line.

    Blank lines are skipped; duplicate triples (after canonicalization)
    collapse. Raises ParseError for a line without exactly 3 fields and
    EmptyInputError when no triples remain.
    """
    if fmt != "tsv":
        raise ConfigError(f"unsupported triple-file format: {fmt!r}")
    triples = []
    lines_read = 0
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            lines_read += 1
            fields = line.rstrip("\n").rstrip("\r").split("\t")
            if len(fields) != 3:
                raise ParseError(
                    f"expected 3 tab-separated fields, got {len(fields)}",
                    path=path,
                    line_no=line_no,
                )
            try:
                triples.append(Triple(*fields))
            except ValueError as exc:
                raise ParseError(str(exc), path=path, line_no=line_no) from None
    if not triples:
        raise EmptyInputError(f"{path}: no triples found")
    graph = KnowledgeGraph.from_triples(triples)
    log.info(
        "loaded %s: %d lines read, %d duplicates dropped, %d triples, %d entities, %d relations",
        path, lines_read, lines_read - len(graph), len(graph),
        graph.n_entities, graph.n_relations,
    )
    return graph


# -- splitting --------------------------------------------------------------


@dataclass(frozen=True)
class SplitResult:
    """Train/test partition of one graph.

    ``train`` and ``test`` share the parent graph's vocabularies, so ids are
    stable across the split. ``moved`` lists test triads relocated to train
    by unseen-entity repair; ``dropped`` lists test triads discarded instead
    (repair="drop"). train + test + dropped always partition the input.
    """

    train: KnowledgeGraph
    test: KnowledgeGraph
    dropped: tuple[Triad, ...] = ()
    moved: tuple[Triad, ...] = ()

    @property
    def test_size_before_repair(self) -> int:
        return len(self.test) + len(self.moved) + len(self.dropped)


def _repair_split(graph, train_triads, test_triads, repair):
    """Move (or drop) test triads whose entity/relation never occurs in train."""
    seen_e: set[int] = set()
    seen_r: set[int] = set()
    for s, p, o in train_triads:
        seen_e.add(s)
        seen_e.add(o)
        seen_r.add(p)
    kept, moved, dropped = [], [], []
    for t in test_triads:
        s, p, o = t
        if s in seen_e and o in seen_e and p in seen_r:
            kept.append(t)
        elif repair == "move":
            train_triads.append(t)
            moved.append(t)
            seen_e.add(s)
            seen_e.add(o)
            seen_r.add(p)
        else:
            dropped.append(t)
    return SplitResult(
        train=graph.subgraph(train_triads),
        test=graph.subgraph(kept),
        dropped=tuple(dropped),
        moved=tuple(moved),
    )


def split_holdout(
    graph: KnowledgeGraph,
    train_fraction: float,
    seed: int,
    repair: str = "move",
) -> SplitResult:
    """Random holdout split; train gets round-half-up(train_fraction * N).

    Test triads referencing entities or relations that never occur in train
    are moved to train (default) or dropped, so link prediction on test never
    meets an embedding-less entity. Deterministic for a fixed seed.
    """
    if not 0.0 < train_fraction < 1.0:
        raise ConfigError(f"train_fraction must be in (0,1), got {train_fraction}")
    if repair not in ("move", "drop"):
        raise ConfigError(f"repair must be 'move' or 'drop', got {repair!r}")
    if len(graph) == 0:
        raise EmptyInputError("cannot split an empty graph")
    order = _shuffled_triads(graph, seed)
    n_train = int(np.floor(train_fraction * len(order) + 0.5))
    return _repair_split(graph, order[:n_train], order[n_train:], repair)


def split_kfold(
    graph: KnowledgeGraph,
    k: int,
    seed: int,
    repair: str = "move",
) -> list[SplitResult]:
    """k cross-validation splits; every triple lands in exactly one test fold.

    Fold sizes differ by at most one (the first ``N mod k`` folds are the
    larger ones). Unseen-entity repair is applied per fold.
    """
    if k < 2:
        raise ConfigError(f"k must be >= 2, got {k}")
    if k > len(graph):
        raise ConfigError(f"k={k} exceeds triple count {len(graph)}")
    order = _shuffled_triads(graph, seed)
    folds = np.array_split(np.arange(len(order)), k)
    results = []
    for i in range(k):
        test = [order[j] for j in folds[i]]
        train = [order[j] for fi, f in enumerate(folds) if fi != i for j in f]
        results.append(_repair_split(graph, train, test, repair))
    return results


def _shuffled_triads(graph: KnowledgeGraph, seed: int) -> list[Triad]:
    rng = stream(seed, STREAM_SPLIT)
    order = rng.permutation(len(graph))
    return [graph.triads[i] for i in order]


# -- statistics --------------------------------------------------------------


@dataclass(frozen=True)
class FrequencyEntry:
    label: str
    count: int
    percent: float


@dataclass(frozen=True)
class GraphStats:
    n_triples: int
    n_entities: int
    n_relations: int
    top_subjects: tuple[FrequencyEntry, ...]
    top_predicates: tuple[FrequencyEntry, ...]
    top_objects: tuple[FrequencyEntry, ...]

    def to_dict(self) -> dict:
        def rows(entries):
            return [
                {"label": e.label, "count": e.count, "percent": e.percent}
                for e in entries
            ]

        return {
            "n_triples": self.n_triples,
            "n_entities": self.n_entities,
            "n_relations": self.n_relations,
            "top_subjects": rows(self.top_subjects),
            "top_predicates": rows(self.top_predicates),
            "top_objects": rows(self.top_objects),
        }

    def format_text(self) -> str:
        lines = [
            f"triples: {self.n_triples}  entities: {self.n_entities}  "
            f"relations: {self.n_relations}",
        ]
        for title, entries in (
            ("subjects", self.top_subjects),
            ("predicates", self.top_predicates),
            ("objects", self.top_objects),
        ):
            lines.append(f"top {title}:")
            for e in entries:
                lines.append(f"  {e.label:<40s} {e.count:>7d}  {e.percent:5.1f}%")
        return "\n".join(lines)


def graph_stats(graph: KnowledgeGraph, top_k: int = 5) -> GraphStats:
    """Most frequent subjects/predicates/objects with their triple share.

    Ties break lexicographically by label so output is stable.
    """
    if len(graph) == 0:
        raise EmptyInputError("cannot compute stats of an empty graph")
    total = len(graph)

    def top(labels_for) -> tuple[FrequencyEntry, ...]:
        counts: dict[str, int] = {}
        for triad in graph.triads:
            label = labels_for(triad)
            counts[label] = counts.get(label, 0) + 1
        ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
        return tuple(
            FrequencyEntry(label, count, 100.0 * count / total)
            for label, count in ranked[:top_k]
        )

    return GraphStats(
        n_triples=total,
        n_entities=graph.n_entities,
        n_relations=graph.n_relations,
        top_subjects=top(lambda t: graph.entities[t[0]]),
        top_predicates=top(lambda t: graph.relations[t[1]]),
        top_objects=top(lambda t: graph.entities[t[2]]),
    )
