"""Dataset variations: fusing text-derived concepts and sentences.

Variation 1 trains on the ontology triples alone. Variation 2 merges the
concepts found in sentences into the graph, tying each textual variant to
its lexicon concept with a "same_as" edge. Variation 3 additionally adds
one entity per sentence, connected by "mentions" edges to the concepts it
contains, and supplies init hints: pooled token vectors that seed each
sentence entity's embedding so sentences start out placed meaningfully in
the shared vector space before joint training refines them.
"""

from __future__ import annotations

import hashlib
import logging
import re
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from .exceptions import (
    ConfigError,
    ConsistencyError,
    EmptyInputError,
    ParseError,
    UnknownEntityError,
)
from .graph import KnowledgeGraph, Triple, canonical_label
from .models import EmbeddingModel, snap_f32
from .ontology import Lexicon, canonicalize_mentions
from .seeding import STREAM_TOKEN, stream

log = logging.getLogger(__name__)

SAME_AS = "same_as"
MENTIONS = "mentions"
RESERVED_RELATIONS = (SAME_AS, MENTIONS)

SENTENCE_PREFIX = "sent::"

_TOKEN_SPLIT = re.compile(r"[^0-9a-z]+")


@dataclass(frozen=True)
class SentenceRecord:
    """One sentence with the concept labels detected in it."""

    sentence_id: str
    text: str
    concepts: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(
            self,
            "concepts",
            tuple(canonical_label(c) for c in self.concepts if canonical_label(c)),
        )

    @property
    def entity_label(self) -> str:
        return SENTENCE_PREFIX + canonical_label(self.sentence_id)


def load_sentences(path) -> list[SentenceRecord]:
    """Read sentence TSV: ``sentence_id<TAB>text<TAB>concept1|concept2|...``.

    Records whose concept list is empty are dropped (counted in the log);
    duplicate sentence ids are an error.
    """
    records: list[SentenceRecord] = []
    seen_ids: set[str] = set()
    dropped = 0
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            fields = line.rstrip("\n").rstrip("\r").split("\t")
            if len(fields) != 3:
                raise ParseError(
                    f"expected 3 tab-separated fields, got {len(fields)}",
                    path=path,
                    line_no=line_no,
                )
            sid, text, concepts = fields
            sid_canon = canonical_label(sid)
            if not sid_canon:
                raise ParseError("empty sentence id", path=path, line_no=line_no)
            if sid_canon in seen_ids:
                raise ParseError(
                    f"duplicate sentence id {sid!r}", path=path, line_no=line_no
                )
            seen_ids.add(sid_canon)
            record = SentenceRecord(
                sentence_id=sid,
                text=text,
                concepts=tuple(c for c in concepts.split("|") if c.strip()),
            )
            if not record.concepts:
                dropped += 1
                continue
            records.append(record)
    if dropped:
        log.info("dropped %d sentence records without concepts", dropped)
    if not records:
        raise EmptyInputError(f"{path}: no usable sentence records")
    return records


# -- token vectors ------------------------------------------------------------


def tokenize(text: str) -> list[str]:
    """Lowercase and split on non-alphanumeric runs."""
    return [t for t in _TOKEN_SPLIT.split(text.lower()) if t]


@dataclass(frozen=True)
class TokenVectorSource:
    """Where token vectors come from: deterministic draws or a vector file.

    Seeded-random mode maps every distinct token to one fixed vector (a
    stable hash of the token keys its stream). File mode reads a plain-text
    table ``token v1 ... vd``; tokens missing from the file fall back to the
    seeded vector so pooling never fails on unseen words.
    """

    mode: str
    dimension: int
    path: Optional[str] = None
    seed: int = 555

    def __post_init__(self):
        if self.mode not in ("seeded-random", "file"):
            raise ConfigError(f"token vector mode must be 'seeded-random' or 'file', got {self.mode!r}")
        if self.dimension <= 0:
            raise ConfigError(f"token vector dimension must be positive, got {self.dimension}")
        if self.mode == "file":
            if self.path is None:
                raise ConfigError("file mode needs a vector file path")
            object.__setattr__(self, "_table", _read_vector_file(self.path, self.dimension))
        else:
            object.__setattr__(self, "_table", {})

    def vector(self, token: str) -> np.ndarray:
        table: dict = getattr(self, "_table")
        found = table.get(token)
        if found is not None:
            return found
        return _seeded_vector(token, self.dimension, self.seed)


def _read_vector_file(path, dimension: int) -> dict[str, np.ndarray]:
    table: dict[str, np.ndarray] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            parts = line.split()
            token, values = parts[0], parts[1:]
            if len(values) != dimension:
                raise ParseError(
                    f"token {token!r} has {len(values)} components, expected {dimension}",
                    path=path,
                    line_no=line_no,
                )
            try:
                table[token] = np.array([float(v) for v in values], dtype=np.float64)
            except ValueError:
                raise ParseError(
                    f"non-numeric vector component for token {token!r}",
                    path=path,
                    line_no=line_no,
                ) from None
    if not table:
        raise EmptyInputError(f"{path}: vector file is empty")
    return table


def _seeded_vector(token: str, dimension: int, seed: int) -> np.ndarray:
    # Stable across processes: key the stream by a content hash of the
    # token, not by Python's randomized hash().
    digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
    hi = int.from_bytes(digest[:4], "little")
    lo = int.from_bytes(digest[4:], "little")
    rng = stream(seed, STREAM_TOKEN, hi, lo)
    return rng.standard_normal(dimension)


def pool_tokens(text: str, source: TokenVectorSource, mode: str = "mean") -> np.ndarray:
    """Collapse a sentence's token vectors into one sentence vector."""
    if mode not in ("mean", "max"):
        raise ConfigError(f"pooling mode must be 'mean' or 'max', got {mode!r}")
    tokens = tokenize(text)
    if not tokens:
        raise EmptyInputError(f"no tokens after tokenization: {text!r}")
    stacked = np.stack([source.vector(t) for t in tokens])
    if mode == "mean":
        return stacked.mean(axis=0)
    return stacked.max(axis=0)


# -- variations ---------------------------------------------------------------


def build_variation(
    graph: KnowledgeGraph,
    sentences: Optional[Iterable[SentenceRecord]],
    lexicon: Lexicon,
    variation: int,
    token_source: Optional[TokenVectorSource] = None,
    pooling: str = "mean",
) -> tuple[KnowledgeGraph, Optional[dict[str, np.ndarray]]]:
    """Assemble the training graph for one dataset variation.

    Returns the graph and, for variation 3, init hints mapping each
    sentence entity label to its pooled token vector. The triple sets grow
    monotonically: variation 1 is a subset of 2, which is a subset of 3.
    """
    if variation not in (1, 2, 3):
        raise ConfigError(f"variation must be 1, 2, or 3, got {variation}")
    if variation == 1:
        return graph, None
    records = list(sentences) if sentences is not None else []
    if not records:
        raise ConfigError(f"variation {variation} requires sentence records")
    for reserved in RESERVED_RELATIONS:
        if graph.has_relation(reserved):
            raise ConfigError(
                f"relation label {reserved!r} is reserved for fusion edges "
                "but already present in the input graph"
            )

    mentions = sorted({c for rec in records for c in rec.concepts})
    matches = {m.mention: m for m in canonicalize_mentions(mentions, lexicon)}
    added: list[tuple[str, str, str]] = []
    isolated = []
    for mention in mentions:
        match = matches[mention]
        if match.matched and match.concept != mention:
            added.append((mention, SAME_AS, match.concept))
        elif not graph.has_entity(mention):
            # Not a variant and absent from the ontology: joins the
            # vocabulary through its sentences (variation 3) only.
            isolated.append(mention)
    if isolated:
        log.warning(
            "%d text concepts have no lexicon variant mapping and no "
            "ontology edges: %s", len(isolated), ", ".join(isolated[:5]),
        )
    merged = graph.with_triples([Triple(*t) for t in added]) if added else graph
    if variation == 2:
        return merged, None

    sentence_triples = []
    for rec in records:
        for concept in rec.concepts:
            sentence_triples.append(Triple(rec.entity_label, MENTIONS, concept))
    result = merged.with_triples(sentence_triples)
    hints: dict[str, np.ndarray] = {}
    if token_source is None:
        raise ConfigError("variation 3 requires a token vector source")
    for rec in records:
        hints[rec.entity_label] = pool_tokens(rec.text, token_source, pooling)
    return result, hints


def apply_init_hints(
    model: EmbeddingModel, hints: Optional[dict[str, np.ndarray]]
) -> EmbeddingModel:
    """Overwrite hinted entity rows with rescaled pooled vectors.

    Each hint is scaled to the RMS row norm of the (freshly initialized)
    entity table so injected vectors start at the same magnitude as random
    rows instead of dominating early gradients. For complex models the hint
    fills the real half; the imaginary half keeps its initialization.
    """
    if not hints:
        return model
    k = model.config.k
    width = k  # hint width is k for both families
    table = model.entity_table.copy()
    target = np.sqrt((table[:, :width] ** 2).sum(axis=1).mean())
    for label, vector in hints.items():
        try:
            row = model.entity_id(label)
        except UnknownEntityError:
            raise ConsistencyError(f"init hint for unknown entity {label!r}") from None
        vec = np.asarray(vector, dtype=np.float64).ravel()
        if vec.shape[0] != width:
            raise ConfigError(
                f"init hint for {label!r} has dimension {vec.shape[0]}, expected {width}"
            )
        norm = np.sqrt((vec * vec).sum())
        if norm > 0.0:
            vec = vec * (target / norm)
        table[row, :width] = snap_f32(vec)
    return EmbeddingModel(
        config=model.config,
        entities=model.entities,
        relations=model.relations,
        entity_table=table,
        relation_table=model.relation_table,
    )
