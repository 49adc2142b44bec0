"""Seed-lexicon driven extraction of first-order ontology neighborhoods.

Given a flat-file ontology (any triple TSV with a hierarchy relation such as
"is a") and a lexicon of seed concepts with their textual variants, this
module pulls out every triple incident to a seed concept and mirrors
hierarchy edges whose parent is a seed ("is a" begets "inverse is a"), which
is how child neighborhoods become reachable from the seed side.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from .exceptions import EmptyInputError, ParseError
from .graph import KnowledgeGraph, canonical_label

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class LexiconEntry:
    term: str
    concept: str
    concept_id: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "term", canonical_label(self.term))
        object.__setattr__(self, "concept", canonical_label(self.concept))
        if not self.term or not self.concept:
            raise ValueError("lexicon term and concept must be nonempty")


@dataclass(frozen=True)
class Lexicon:
    """Seed terms mapped onto canonical concepts.

    Every canonical concept is implicitly a term for itself, so a lexicon
    listing only variants still recognizes the canonical labels.
    """

    entries: tuple[LexiconEntry, ...]

    def __post_init__(self):
        seen: dict[str, str] = {}
        for e in self.entries:
            if e.term in seen and seen[e.term] != e.concept:
                raise ParseError(
                    f"term {e.term!r} maps to both {seen[e.term]!r} and {e.concept!r}"
                )
            seen[e.term] = e.concept

    @classmethod
    def from_pairs(cls, pairs: Iterable[Sequence[str]]) -> "Lexicon":
        return cls(tuple(LexiconEntry(*p) for p in pairs))

    @property
    def concepts(self) -> frozenset[str]:
        return frozenset(e.concept for e in self.entries)

    def term_map(self) -> dict[str, str]:
        """term -> canonical concept, including concept self-entries."""
        mapping = {e.term: e.concept for e in self.entries}
        for concept in self.concepts:
            mapping.setdefault(concept, concept)
        return mapping

    def __len__(self) -> int:
        return len(self.entries)


def load_lexicon(path) -> Lexicon:
    """Read a lexicon TSV: ``term<TAB>canonical_concept[<TAB>concept_id]``."""
    entries = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            fields = line.rstrip("\n").rstrip("\r").split("\t")
            if len(fields) not in (2, 3):
                raise ParseError(
                    f"expected 2 or 3 tab-separated fields, got {len(fields)}",
                    path=path,
                    line_no=line_no,
                )
            try:
                entries.append(LexiconEntry(*fields))
            except ValueError as exc:
                raise ParseError(str(exc), path=path, line_no=line_no) from None
    if not entries:
        raise EmptyInputError(f"{path}: lexicon is empty")
    try:
        return Lexicon(tuple(dict.fromkeys(entries)))
    except ParseError as exc:
        raise ParseError(str(exc), path=path) from None


@dataclass(frozen=True)
class OntologySource:
    """An ontology graph plus the relation label that encodes child -> parent."""

    graph: KnowledgeGraph
    hierarchy_relation: str = "is a"

    def __post_init__(self):
        object.__setattr__(
            self, "hierarchy_relation", canonical_label(self.hierarchy_relation)
        )
        if not self.graph.has_relation(self.hierarchy_relation):
            # Legal for sources without hierarchy edges; extraction then
            # emits no inverse edges.
            log.warning(
                "hierarchy relation %r not present in ontology relations",
                self.hierarchy_relation,
            )

    @property
    def inverse_relation(self) -> str:
        return f"inverse {self.hierarchy_relation}"


def extract_first_order(source: OntologySource, lexicon: Lexicon) -> KnowledgeGraph:
    """All triples incident to a seed concept, plus inverse hierarchy edges.

    First-order means exactly one hop: a triple survives iff its subject or
    object is a lexicon canonical concept. Each surviving hierarchy triple
    (child, "is a", parent) with a seed parent additionally emits
    (parent, "inverse is a", child), making children reachable from seeds.
    """
    if len(lexicon) == 0:
        raise EmptyInputError("lexicon is empty")
    if len(source.graph) == 0:
        raise EmptyInputError("ontology source is empty")
    seeds = lexicon.concepts
    hierarchy = source.hierarchy_relation
    out: list[tuple[str, str, str]] = []
    for s, p, o in source.graph.labeled():
        if s not in seeds and o not in seeds:
            continue
        out.append((s, p, o))
        if p == hierarchy and o in seeds:
            out.append((o, source.inverse_relation, s))
    if not out:
        log.warning("no lexicon concept found in ontology source; result is empty")
        return KnowledgeGraph.from_triples([])
    return KnowledgeGraph.from_triples(out)


@dataclass(frozen=True)
class ConceptMatch:
    """Outcome of mapping one mention onto the lexicon."""

    mention: str
    concept: str
    matched: bool


def canonicalize_mentions(
    mentions: Iterable[str], lexicon: Lexicon
) -> list[ConceptMatch]:
    """Map each mention to its canonical concept by longest-term substring.

    The longest lexicon term contained in the (canonicalized) mention wins;
    equal-length candidates prefer the longer canonical concept, then the
    lexicographically smallest term. Mentions matching no term come back
    unmapped with ``matched=False``.
    """
    term_map = lexicon.term_map()
    terms = sorted(
        term_map,
        key=lambda t: (-len(t), -len(term_map[t]), t),
    )
    results = []
    for raw in mentions:
        mention = canonical_label(raw)
        concept = None
        for term in terms:
            if term in mention:
                concept = term_map[term]
                break
        if concept is None:
            results.append(ConceptMatch(mention, mention, False))
        else:
            results.append(ConceptMatch(mention, concept, True))
    return results
