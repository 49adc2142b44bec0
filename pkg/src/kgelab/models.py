"""Embedding models: parameter tables, scoring, and checkpoints.

Two scoring families share one interface, with higher always more
plausible:

* ``transe``: score(s,p,o) = -||e_s + r_p - e_o||  (L2 by default, L1 by
  config), so a perfect translation scores 0 and everything else below.
* ``complex``: score(s,p,o) = Re(sum_j e_s[j] * r_p[j] * conj(e_o[j])) over
  k complex coordinates; tables store [real | imaginary] halves side by
  side, making the complex model a 2k-wide real table with the same
  serialization as transe.

Tables live in float64 for numerics but are always snapped to exact
float32 values at model boundaries (init, hint injection, end of
training), so the 32-bit on-disk checkpoint round-trips bit for bit.
"""

from __future__ import annotations

import hashlib
import io
import os
import struct
import tempfile
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import _kernels
from .exceptions import CheckpointError, ConfigError, UnknownEntityError
from .graph import KnowledgeGraph, canonical_label
from .seeding import STREAM_INIT, stream

TRANSE = "transe"
COMPLEX = "complex"
FAMILIES = (TRANSE, COMPLEX)

LOSS_PAIRWISE = "pairwise"
LOSS_MULTICLASS_NLL = "multiclass_nll"
LOSSES = (LOSS_PAIRWISE, LOSS_MULTICLASS_NLL)

# Family-specific default loss: translation distance trains on the margin
# loss, the complex bilinear model on multiclass NLL.
DEFAULT_LOSS = {TRANSE: LOSS_PAIRWISE, COMPLEX: LOSS_MULTICLASS_NLL}


@dataclass(frozen=True)
class ModelConfig:
    """Hyperparameters; defaults follow the reference configuration."""

    family: str
    k: int = 150
    eta: int = 10
    epochs: int = 10
    batches_count: int = 100
    seed: int = 555
    loss: str | None = None
    margin: float = 1.0
    learning_rate: float = 5e-4
    norm_order: int = 2

    def __post_init__(self):
        object.__setattr__(self, "family", str(self.family).lower())
        if self.loss is None and self.family in DEFAULT_LOSS:
            object.__setattr__(self, "loss", DEFAULT_LOSS[self.family])

    def validate(self) -> "ModelConfig":
        if self.family not in FAMILIES:
            raise ConfigError(f"family must be one of {FAMILIES}, got {self.family!r}")
        if self.k <= 0:
            raise ConfigError(f"k must be positive, got {self.k}")
        if self.eta < 1:
            raise ConfigError(f"eta must be >= 1, got {self.eta}")
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.batches_count < 1:
            raise ConfigError(f"batches_count must be >= 1, got {self.batches_count}")
        if self.loss not in LOSSES:
            raise ConfigError(f"loss must be one of {LOSSES}, got {self.loss!r}")
        if self.margin < 0:
            raise ConfigError(f"margin must be >= 0, got {self.margin}")
        if self.learning_rate <= 0:
            raise ConfigError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.norm_order not in (1, 2):
            raise ConfigError(f"norm_order must be 1 or 2, got {self.norm_order}")
        return self

    @property
    def dim(self) -> int:
        """Width of a table row: k for transe, 2k (real+imag) for complex."""
        return self.k if self.family == TRANSE else 2 * self.k

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "k": self.k,
            "eta": self.eta,
            "epochs": self.epochs,
            "batches_count": self.batches_count,
            "seed": self.seed,
            "loss": self.loss,
            "margin": self.margin,
            "learning_rate": self.learning_rate,
            "norm_order": self.norm_order,
        }


def snap_f32(values: np.ndarray) -> np.ndarray:
    """Round float64 values onto the float32 grid (stay float64)."""
    return np.asarray(values, dtype=np.float64).astype(np.float32).astype(np.float64)


@dataclass(frozen=True)
class EmbeddingModel:
    """Trained (or initialized) parameter tables plus their vocabularies.

    Vocabularies are embedded so ids stay stable across save/load. Tables
    are float64 arrays whose values are exact float32 numbers.
    """

    config: ModelConfig
    entities: tuple[str, ...]
    relations: tuple[str, ...]
    entity_table: np.ndarray
    relation_table: np.ndarray

    @property
    def family(self) -> str:
        return self.config.family

    @property
    def n_entities(self) -> int:
        return len(self.entities)

    @property
    def n_relations(self) -> int:
        return len(self.relations)

    @cached_property
    def _entity_ids(self) -> dict[str, int]:
        return {label: i for i, label in enumerate(self.entities)}

    @cached_property
    def _relation_ids(self) -> dict[str, int]:
        return {label: i for i, label in enumerate(self.relations)}

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

    def checksum(self) -> str:
        return hashlib.sha256(serialize_model(self)).hexdigest()

    def save(self, path) -> None:
        save_model(self, path)

    @classmethod
    def load(cls, path) -> "EmbeddingModel":
        return load_model(path)


def init_model(config: ModelConfig, graph: KnowledgeGraph) -> EmbeddingModel:
    """Glorot-uniform tables drawn from the seeded init stream.

    Deterministic: the same (config, graph) pair always yields bit-identical
    tables.
    """
    config.validate()
    if len(graph) == 0:
        raise ConfigError("cannot initialize a model on an empty graph")
    rng = stream(config.seed, STREAM_INIT)
    d = config.dim
    entity = _glorot(rng, graph.n_entities, d)
    relation = _glorot(rng, graph.n_relations, d)
    return EmbeddingModel(
        config=config,
        entities=graph.entities,
        relations=graph.relations,
        entity_table=entity,
        relation_table=relation,
    )


def _glorot(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (rows + cols))
    return snap_f32(rng.uniform(-limit, limit, size=(rows, cols)))


# -- scoring -----------------------------------------------------------------


def _check_ids(model: EmbeddingModel, s, p, o) -> None:
    n, m = model.n_entities, model.n_relations
    s, p, o = np.asarray(s), np.asarray(p), np.asarray(o)
    if np.any(s < 0) or np.any(s >= n) or np.any(o < 0) or np.any(o >= n):
        raise UnknownEntityError("entity id out of range")
    if np.any(p < 0) or np.any(p >= m):
        raise UnknownEntityError("relation id out of range")


def score_batch(model: EmbeddingModel, triads) -> np.ndarray:
    """Scores for an iterable/array of (s, p, o) id triads."""
    arr = np.asarray(list(triads) if not isinstance(triads, np.ndarray) else triads,
                     dtype=np.int64)
    if arr.size == 0:
        return np.empty(0, dtype=np.float64)
    arr = arr.reshape(-1, 3)
    s, p, o = arr[:, 0].copy(), arr[:, 1].copy(), arr[:, 2].copy()
    _check_ids(model, s, p, o)
    if model.family == TRANSE:
        return _kernels.transe_scores(
            model.entity_table, model.relation_table, s, p, o,
            model.config.norm_order,
        )
    return _kernels.complex_scores(
        model.entity_table, model.relation_table, s, p, o
    )


def score_transe(model: EmbeddingModel, s: int, p: int, o: int) -> float:
    """Negated translation distance of one triad (higher = more plausible)."""
    if model.family != TRANSE:
        raise ConfigError(f"score_transe called on a {model.family} model")
    return float(score_batch(model, [(s, p, o)])[0])


def score_complex(model: EmbeddingModel, s: int, p: int, o: int) -> float:
    """Real part of the trilinear Hermitian product for one triad."""
    if model.family != COMPLEX:
        raise ConfigError(f"score_complex called on a {model.family} model")
    return float(score_batch(model, [(s, p, o)])[0])


def score(model: EmbeddingModel, s: int, p: int, o: int) -> float:
    """Family-dispatching scalar scorer."""
    return float(score_batch(model, [(s, p, o)])[0])


def score_all_objects(model: EmbeddingModel, s: int, p: int) -> np.ndarray:
    """Scores of (s, p, c) for every entity c; the ranking hot path."""
    _check_ids(model, np.int64(s), np.int64(p), np.int64(0))
    if model.family == TRANSE:
        return _kernels.transe_sweep_objects(
            model.entity_table, model.relation_table, int(s), int(p),
            model.config.norm_order,
        )
    return _kernels.complex_sweep_objects(
        model.entity_table, model.relation_table, int(s), int(p)
    )


def score_all_subjects(model: EmbeddingModel, p: int, o: int) -> np.ndarray:
    """Scores of (c, p, o) for every entity c."""
    _check_ids(model, np.int64(0), np.int64(p), np.int64(o))
    if model.family == TRANSE:
        return _kernels.transe_sweep_subjects(
            model.entity_table, model.relation_table, int(p), int(o),
            model.config.norm_order,
        )
    return _kernels.complex_sweep_subjects(
        model.entity_table, model.relation_table, int(p), int(o)
    )


# -- checkpoint format --------------------------------------------------------
#
#   magic     8 bytes  b"KGELABCK"
#   version   uint32   currently 1
#   family    uint8    1 = transe, 2 = complex
#   k         uint32   embedding dimensionality
#   n         uint32   entity count
#   m         uint32   relation count
#   seed      int64    config seed
#   vocab     n then m entries of uint32 byte-length + utf-8 label
#   tables    entity then relation, row-major little-endian float32
#
# All integers little-endian. Bit-exact round-trip is part of the contract.

MAGIC = b"KGELABCK"
FORMAT_VERSION = 1
_FAMILY_CODE = {TRANSE: 1, COMPLEX: 2}
_FAMILY_NAME = {1: TRANSE, 2: COMPLEX}


def serialize_model(model: EmbeddingModel) -> bytes:
    buf = io.BytesIO()
    cfg = model.config
    buf.write(MAGIC)
    buf.write(struct.pack("<IBIIIq", FORMAT_VERSION, _FAMILY_CODE[cfg.family],
                          cfg.k, model.n_entities, model.n_relations, cfg.seed))
    for label in model.entities:
        raw = label.encode("utf-8")
        buf.write(struct.pack("<I", len(raw)))
        buf.write(raw)
    for label in model.relations:
        raw = label.encode("utf-8")
        buf.write(struct.pack("<I", len(raw)))
        buf.write(raw)
    buf.write(np.ascontiguousarray(model.entity_table, dtype="<f4").tobytes())
    buf.write(np.ascontiguousarray(model.relation_table, dtype="<f4").tobytes())
    return buf.getvalue()


def save_model(model: EmbeddingModel, path) -> None:
    """Write atomically: temp file in the target directory, then rename."""
    data = serialize_model(model)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".ckpt.tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_model(path) -> EmbeddingModel:
    """Read a checkpoint; training-only config fields revert to defaults."""
    with open(path, "rb") as fh:
        data = fh.read()
    view = memoryview(data)
    if data[:8] != MAGIC:
        raise CheckpointError(f"{path}: not a kgelab checkpoint (bad magic)")
    offset = 8
    try:
        version, fam_code, k, n, m, seed = struct.unpack_from("<IBIIIq", view, offset)
        offset += struct.calcsize("<IBIIIq")
        if version != FORMAT_VERSION:
            raise CheckpointError(f"{path}: unsupported format version {version}")
        if fam_code not in _FAMILY_NAME:
            raise CheckpointError(f"{path}: unknown family code {fam_code}")
        family = _FAMILY_NAME[fam_code]

        def read_labels(count):
            nonlocal offset
            labels = []
            for _ in range(count):
                (length,) = struct.unpack_from("<I", view, offset)
                offset += 4
                labels.append(bytes(view[offset : offset + length]).decode("utf-8"))
                offset += length
            return tuple(labels)

        entities = read_labels(n)
        relations = read_labels(m)
        d = k if family == TRANSE else 2 * k
        ent_bytes = n * d * 4
        rel_bytes = m * d * 4
        if len(data) - offset != ent_bytes + rel_bytes:
            raise CheckpointError(f"{path}: truncated or oversized table section")
        entity = np.frombuffer(view, dtype="<f4", count=n * d, offset=offset)
        offset += ent_bytes
        relation = np.frombuffer(view, dtype="<f4", count=m * d, offset=offset)
    except struct.error as exc:
        raise CheckpointError(f"{path}: truncated checkpoint ({exc})") from None
    config = ModelConfig(family=family, k=k, seed=seed)
    return EmbeddingModel(
        config=config,
        entities=entities,
        relations=relations,
        entity_table=entity.reshape(n, d).astype(np.float64),
        relation_table=relation.reshape(m, d).astype(np.float64),
    )
