"""Model optimization: corruption sampling, losses, Adam, training loop.

Training is deterministic: the (graph, config) pair fully determines the
output model. Randomness comes from counter-based streams keyed per purpose
and per (epoch, batch), so the corruption noise of batch 17 in epoch 3 is
the same no matter what ran before it.

Gradients are computed analytically and validated against central finite
differences by :func:`gradient_check`; both paths share the same forward
code so the check exercises exactly what the trainer uses.
"""

from __future__ import annotations

import dataclasses
import hashlib
import time
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .exceptions import ConfigError
from .graph import KnowledgeGraph
from .models import (
    LOSS_MULTICLASS_NLL,
    LOSS_PAIRWISE,
    TRANSE,
    EmbeddingModel,
    ModelConfig,
    init_model,
    serialize_model,
    snap_f32,
)
from .seeding import STREAM_CHECK, STREAM_CORRUPT, STREAM_SHUFFLE, stream

SIDE_SUBJECT = 0
SIDE_OBJECT = 1

_MAX_RESAMPLE = 16


@dataclass(frozen=True)
class CorruptionBatch:
    """Positives with eta corruptions each.

    ``negatives[i, j]`` is the j-th corruption of ``positives[i]``;
    ``corrupted_side[i, j]`` records whether its subject (0) or object (1)
    was replaced. A negative never equals its positive.
    """

    positives: np.ndarray  # (B, 3) int64
    negatives: np.ndarray  # (B, eta, 3) int64
    corrupted_side: np.ndarray  # (B, eta) uint8

    @property
    def eta(self) -> int:
        return self.negatives.shape[1]


def sample_corruptions(
    positives, eta: int, entity_count: int, rng: np.random.Generator
) -> CorruptionBatch:
    """Replace the subject or object of each positive with a random entity.

    The side is chosen uniformly per negative, the replacement uniformly
    over the entity vocabulary. A draw colliding with its positive triad is
    redrawn up to a bounded number of times, then bumped to the next entity
    id, so the result is always a true negative (given >= 2 entities).
    """
    pos = np.asarray(positives, dtype=np.int64).reshape(-1, 3)
    if eta < 1:
        raise ConfigError(f"eta must be >= 1, got {eta}")
    if entity_count < 2:
        raise ConfigError("cannot corrupt triples with fewer than 2 entities")
    B = pos.shape[0]
    sides = rng.integers(0, 2, size=(B, eta), dtype=np.int64)
    repl = rng.integers(0, entity_count, size=(B, eta), dtype=np.int64)
    original = np.where(sides == SIDE_SUBJECT, pos[:, 0:1], pos[:, 2:3])
    collision = repl == original
    for _ in range(_MAX_RESAMPLE):
        count = int(collision.sum())
        if count == 0:
            break
        repl[collision] = rng.integers(0, entity_count, size=count, dtype=np.int64)
        collision = repl == original
    # Bounded retries exhausted: step to the adjacent id, which cannot be
    # the original again.
    repl[collision] = (repl[collision] + 1) % entity_count

    negatives = np.broadcast_to(pos[:, None, :], (B, eta, 3)).copy()
    subj_mask = sides == SIDE_SUBJECT
    negatives[:, :, 0] = np.where(subj_mask, repl, negatives[:, :, 0])
    negatives[:, :, 2] = np.where(~subj_mask, repl, negatives[:, :, 2])
    return CorruptionBatch(
        positives=pos,
        negatives=negatives,
        corrupted_side=sides.astype(np.uint8),
    )


# -- loss heads ---------------------------------------------------------------


def loss_pairwise(pos_scores, neg_scores, margin: float) -> float:
    """Mean hinge over (positive, negative) pairs.

    ``neg_scores`` holds eta negatives per positive, grouped row-major:
    either shaped (B, eta) or flat of length B*eta.
    """
    pos, neg = _paired(pos_scores, neg_scores)
    if margin < 0:
        raise ConfigError(f"margin must be >= 0, got {margin}")
    loss, _, _ = _pairwise_head(pos, neg, margin)
    return float(loss)


def loss_multiclass_nll(pos_score: float, neg_scores) -> float:
    """Negative log-likelihood of one positive against its corruptions."""
    neg = np.asarray(neg_scores, dtype=np.float64).ravel()
    if neg.size == 0:
        raise ConfigError("multiclass NLL needs at least one negative score")
    pos = np.asarray([pos_score], dtype=np.float64)
    loss, _, _ = _nll_head(pos, neg.reshape(1, -1))
    return float(loss)


def _paired(pos_scores, neg_scores):
    pos = np.asarray(pos_scores, dtype=np.float64).ravel()
    neg = np.asarray(neg_scores, dtype=np.float64)
    if neg.ndim == 1:
        if pos.size == 0 or neg.size % pos.size:
            raise ConfigError(
                f"negative count {neg.size} is not a multiple of positive count {pos.size}"
            )
        neg = neg.reshape(pos.size, -1)
    elif neg.shape[0] != pos.size:
        raise ConfigError(
            f"negative rows {neg.shape[0]} do not match positive count {pos.size}"
        )
    return pos, neg


def _pairwise_head(pos, neg, margin):
    """Loss plus d(loss)/d(score) for positives (B,) and negatives (B, eta)."""
    viol = (margin - pos[:, None]) + neg
    active = viol > 0.0
    pairs = neg.size
    loss = np.where(active, viol, 0.0).sum() / pairs
    dneg = active.astype(np.float64) / pairs
    dpos = -dneg.sum(axis=1)
    return loss, dpos, dneg


def _nll_head(pos, neg):
    """Softmax NLL of each positive against its own negatives."""
    z = np.concatenate([pos[:, None], neg], axis=1)
    zmax = z.max(axis=1, keepdims=True)
    lse = zmax[:, 0] + np.log(np.exp(z - zmax).sum(axis=1))
    losses = lse - pos
    B = pos.size
    soft = np.exp(z - lse[:, None])
    dpos = (soft[:, 0] - 1.0) / B
    dneg = soft[:, 1:] / B
    return losses.mean(), dpos, dneg


# -- score forward/backward (trainer-internal, float64 numpy) -----------------


def _forward(family, ent, rel, s, p, o, norm_order):
    if family == TRANSE:
        delta = (ent[s] + rel[p]) - ent[o]
        if norm_order == 2:
            dist = np.sqrt((delta * delta).sum(axis=1))
            return -dist, (delta, dist)
        return -np.abs(delta).sum(axis=1), (delta, None)
    k = ent.shape[1] // 2
    sr, si = ent[s, :k], ent[s, k:]
    pr, pi = rel[p, :k], rel[p, k:]
    orr, oi = ent[o, :k], ent[o, k:]
    scores = (
        (((pr * sr) * orr + (pr * si) * oi) + (pi * sr) * oi) - (pi * si) * orr
    ).sum(axis=1)
    return scores, (sr, si, pr, pi, orr, oi)


def _backward(family, cache, coeff, norm_order):
    """Per-triad gradients w.r.t. subject, relation, object rows."""
    if family == TRANSE:
        delta, dist = cache
        if norm_order == 2:
            safe = np.where(dist > 0.0, dist, 1.0)
            dscore = -delta / safe[:, None]
            dscore[dist == 0.0] = 0.0
        else:
            dscore = -np.sign(delta)
        g = coeff[:, None] * dscore
        return g, g, -g
    sr, si, pr, pi, orr, oi = cache
    c = coeff[:, None]
    g_s = np.concatenate([c * (pr * orr + pi * oi), c * (pr * oi - pi * orr)], axis=1)
    g_p = np.concatenate([c * (sr * orr + si * oi), c * (sr * oi - si * orr)], axis=1)
    g_o = np.concatenate([c * (sr * pr - si * pi), c * (si * pr + sr * pi)], axis=1)
    return g_s, g_p, g_o


def _batch_loss_and_grads(config, ent, rel, positives, negatives):
    """Loss of one corruption batch plus dense gradient tables."""
    B, eta = negatives.shape[0], negatives.shape[1]
    flat_neg = negatives.reshape(-1, 3)
    s = np.concatenate([positives[:, 0], flat_neg[:, 0]])
    p = np.concatenate([positives[:, 1], flat_neg[:, 1]])
    o = np.concatenate([positives[:, 2], flat_neg[:, 2]])
    scores, cache = _forward(config.family, ent, rel, s, p, o, config.norm_order)
    pos_scores = scores[:B]
    neg_scores = scores[B:].reshape(B, eta)
    if config.loss == LOSS_PAIRWISE:
        loss, dpos, dneg = _pairwise_head(pos_scores, neg_scores, config.margin)
    else:
        loss, dpos, dneg = _nll_head(pos_scores, neg_scores)
    coeff = np.concatenate([dpos, dneg.ravel()])
    g_s, g_p, g_o = _backward(config.family, cache, coeff, config.norm_order)
    grad_ent = np.zeros_like(ent)
    grad_rel = np.zeros_like(rel)
    np.add.at(grad_ent, s, g_s)
    np.add.at(grad_rel, p, g_p)
    np.add.at(grad_ent, o, g_o)
    touched_e = np.unique(np.concatenate([s, o]))
    touched_r = np.unique(p)
    return float(loss), grad_ent, grad_rel, touched_e, touched_r


class Adam:
    """Adam with lazily-updated moment rows (sparse row updates)."""

    def __init__(self, lr: float, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self._m: dict[str, np.ndarray] = {}
        self._v: dict[str, np.ndarray] = {}

    def step(self, name: str, table: np.ndarray, grad: np.ndarray,
             rows: np.ndarray, t: int) -> None:
        """Update ``table[rows]`` in place from ``grad[rows]`` at timestep t."""
        if name not in self._m:
            self._m[name] = np.zeros_like(table)
            self._v[name] = np.zeros_like(table)
        m, v = self._m[name], self._v[name]
        g = grad[rows]
        m[rows] = self.beta1 * m[rows] + (1.0 - self.beta1) * g
        v[rows] = self.beta2 * v[rows] + (1.0 - self.beta2) * (g * g)
        mhat = m[rows] / (1.0 - self.beta1**t)
        vhat = v[rows] / (1.0 - self.beta2**t)
        table[rows] -= self.lr * mhat / (np.sqrt(vhat) + self.eps)


@dataclass(frozen=True)
class TrainTrace:
    """Per-epoch record of one training run."""

    epoch_mean_loss: tuple[float, ...]
    epoch_seconds: tuple[float, ...]
    corruptions_per_epoch: tuple[int, ...]
    final_checksum: str

    def to_dict(self) -> dict:
        return {
            "epoch_mean_loss": list(self.epoch_mean_loss),
            "epoch_seconds": list(self.epoch_seconds),
            "corruptions_per_epoch": list(self.corruptions_per_epoch),
            "final_checksum": self.final_checksum,
        }


def train(
    graph: KnowledgeGraph,
    config: ModelConfig,
    init_hints: dict | None = None,
    frozen_entities: Sequence[str] | None = None,
) -> tuple[EmbeddingModel, TrainTrace]:
    """Optimize a freshly initialized model on ``graph``.

    Each epoch shuffles the triples (seeded per epoch) and splits them into
    ``batches_count`` near-equal batches. Per batch: sample eta corruptions
    per positive, compute the configured loss, backpropagate, Adam-update
    the touched rows, and (for transe) renormalize updated entity rows to
    unit L2 norm. Returns the final model (float32-snapped) and a trace.

    ``init_hints`` (entity label -> vector) overwrite initialized rows
    before the first epoch; ``frozen_entities`` names entity rows excluded
    from updates (e.g. to keep injected sentence vectors fixed).
    """
    config.validate()
    if len(graph) == 0:
        raise ConfigError("cannot train on an empty graph")
    if config.batches_count > len(graph):
        raise ConfigError(
            f"batches_count={config.batches_count} exceeds triple count {len(graph)}"
        )
    model = init_model(config, graph)
    if init_hints:
        from .fusion import apply_init_hints  # local import to avoid a cycle

        model = apply_init_hints(model, init_hints)
    frozen: np.ndarray | None = None
    if frozen_entities:
        frozen = np.unique(
            np.array([model.entity_id(e) for e in frozen_entities], dtype=np.int64)
        )
    ent = model.entity_table.copy()
    rel = model.relation_table.copy()
    triads = graph.to_array()
    adam = Adam(lr=config.learning_rate)
    t = 0
    epoch_losses, epoch_times, epoch_corruptions = [], [], []
    for epoch in range(config.epochs):
        started = time.perf_counter()
        perm = stream(config.seed, STREAM_SHUFFLE, epoch).permutation(len(triads))
        loss_sum = 0.0
        n_corruptions = 0
        for b_i, batch_idx in enumerate(np.array_split(perm, config.batches_count)):
            positives = triads[batch_idx]
            rng = stream(config.seed, STREAM_CORRUPT, epoch, b_i)
            batch = sample_corruptions(positives, config.eta, graph.n_entities, rng)
            n_corruptions += batch.negatives.shape[0] * batch.eta
            loss, grad_ent, grad_rel, touched_e, touched_r = _batch_loss_and_grads(
                config, ent, rel, batch.positives, batch.negatives
            )
            if frozen is not None:
                touched_e = np.setdiff1d(touched_e, frozen, assume_unique=True)
            t += 1
            adam.step("ent", ent, grad_ent, touched_e, t)
            adam.step("rel", rel, grad_rel, touched_r, t)
            if config.family == TRANSE:
                _renormalize_rows(ent, touched_e)
            loss_sum += loss * len(positives)
        epoch_losses.append(loss_sum / len(triads))
        epoch_corruptions.append(n_corruptions)
        epoch_times.append(time.perf_counter() - started)
    final = EmbeddingModel(
        config=config,
        entities=graph.entities,
        relations=graph.relations,
        entity_table=snap_f32(ent),
        relation_table=snap_f32(rel),
    )
    trace = TrainTrace(
        epoch_mean_loss=tuple(epoch_losses),
        epoch_seconds=tuple(epoch_times),
        corruptions_per_epoch=tuple(epoch_corruptions),
        final_checksum=hashlib.sha256(serialize_model(final)).hexdigest(),
    )
    return final, trace


def _renormalize_rows(table: np.ndarray, rows: np.ndarray) -> None:
    norms = np.sqrt((table[rows] * table[rows]).sum(axis=1))
    norms = np.where(norms > 0.0, norms, 1.0)
    table[rows] = table[rows] / norms[:, None]


def gradient_check(
    model: EmbeddingModel,
    triad: Sequence[int],
    loss: str,
    epsilon: float = 1e-4,
    eta: int = 4,
    seed: int = 0,
) -> float:
    """Max guarded relative error of analytic vs central-difference grads.

    Builds one corruption batch around ``triad`` (seeded, so repeatable),
    then perturbs every component of every touched row by +-epsilon and
    compares. Error for one parameter is |a - fd| / max(|a|, |fd|, 1e-6),
    which keeps flat hinge regions (both sides exactly zero) at error 0.
    """
    if epsilon <= 0:
        raise ConfigError(f"epsilon must be positive, got {epsilon}")
    if loss not in (LOSS_PAIRWISE, LOSS_MULTICLASS_NLL):
        raise ConfigError(f"unknown loss selector: {loss!r}")
    config = model.config
    if config.loss != loss:
        config = dataclasses.replace(config, loss=loss)
    pos = np.asarray(triad, dtype=np.int64).reshape(1, 3)
    rng = stream(seed, STREAM_CHECK)
    batch = sample_corruptions(pos, eta, model.n_entities, rng)
    ent = model.entity_table.copy()
    rel = model.relation_table.copy()
    _, grad_ent, grad_rel, touched_e, touched_r = _batch_loss_and_grads(
        config, ent, rel, batch.positives, batch.negatives
    )

    def loss_at(e_tab, r_tab):
        value, *_ = _batch_loss_and_grads(
            config, e_tab, r_tab, batch.positives, batch.negatives
        )
        return value

    worst = 0.0
    for table, grad, rows in ((ent, grad_ent, touched_e), (rel, grad_rel, touched_r)):
        for r in rows:
            for j in range(table.shape[1]):
                keep = table[r, j]
                table[r, j] = keep + epsilon
                up = loss_at(ent, rel)
                table[r, j] = keep - epsilon
                down = loss_at(ent, rel)
                table[r, j] = keep
                fd = (up - down) / (2.0 * epsilon)
                a = grad[r, j]
                err = abs(a - fd) / max(abs(a), abs(fd), 1e-6)
                worst = max(worst, err)
    return worst
