"""Pure-numpy scoring kernels (fallback backend).

Signature-compatible with the compiled `_core` extension. Arithmetic is
arranged so that, within this backend, scoring a triad gives bit-identical
results whether it arrives via a singleton batch, a large batch, or a
candidate sweep: per-element operation order is fixed and the per-row
reduction (numpy pairwise sum) only depends on the embedding width.
"""

from __future__ import annotations

import numpy as np

NAME = "python"


def transe_scores(ent, rel, s, p, o, norm_order=2):
    """Negated Lp translation distance for each (s[i], p[i], o[i])."""
    delta = (ent[s] + rel[p]) - ent[o]
    return _neg_norm(delta, norm_order)


def transe_sweep_objects(ent, rel, s, p, norm_order=2):
    """TransE scores of (s, p, c) for every candidate entity c."""
    t = ent[s] + rel[p]
    return _neg_norm(t[np.newaxis, :] - ent, norm_order)


def transe_sweep_subjects(ent, rel, p, o, norm_order=2):
    """TransE scores of (c, p, o) for every candidate entity c."""
    delta = (ent + rel[p][np.newaxis, :]) - ent[o][np.newaxis, :]
    return _neg_norm(delta, norm_order)


def _neg_norm(delta, norm_order):
    if norm_order == 2:
        return -np.sqrt((delta * delta).sum(axis=-1))
    if norm_order == 1:
        return -np.abs(delta).sum(axis=-1)
    raise ValueError(f"norm_order must be 1 or 2, got {norm_order}")


def complex_scores(ent, rel, s, p, o):
    """Re(<e_s, r_p, conj(e_o)>) for each triad; tables hold [real | imag]."""
    k = ent.shape[1] // 2
    sr, si = ent[s, :k], ent[s, k:]
    pr, pi = rel[p, :k], rel[p, k:]
    orr, oi = ent[o, :k], ent[o, k:]
    terms = (((pr * sr) * orr + (pr * si) * oi) + (pi * sr) * oi) - (pi * si) * orr
    return terms.sum(axis=-1)


def complex_sweep_objects(ent, rel, s, p):
    """ComplEx scores of (s, p, c) for every candidate entity c."""
    k = ent.shape[1] // 2
    sr, si = ent[s, :k], ent[s, k:]
    pr, pi = rel[p, :k], rel[p, k:]
    cr, ci = ent[:, :k], ent[:, k:]
    # Caching the subject*relation products keeps the exact per-element
    # grouping of complex_scores: (pr*sr)*c == a*c bit for bit.
    a, b = pr * sr, pr * si
    c, d = pi * sr, pi * si
    terms = ((a * cr + b * ci) + c * ci) - d * cr
    return terms.sum(axis=-1)


def complex_sweep_subjects(ent, rel, p, o):
    """ComplEx scores of (c, p, o) for every candidate entity c."""
    k = ent.shape[1] // 2
    pr, pi = rel[p, :k], rel[p, k:]
    orr, oi = ent[o, :k], ent[o, k:]
    cr, ci = ent[:, :k], ent[:, k:]
    # No cross-products may be precomputed here: (pr*c)*o != (pr*o)*c in
    # floating point, and the batch scorer multiplies subject first.
    terms = (
        ((pr * cr) * orr + (pr * ci) * oi) + (pi * cr) * oi
    ) - (pi * ci) * orr
    return terms.sum(axis=-1)
