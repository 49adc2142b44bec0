"""Cross-checks between the compiled kernels and the numpy fallback.

Skipped wholesale when the extension is not built; the rest of the suite
then runs against the fallback anyway.
"""

import numpy as np
import pytest

from kgelab._kernels import _numpy

_core = pytest.importorskip("kgelab._kernels._core")


@pytest.fixture(scope="module")
def tables():
    rng = np.random.default_rng(123)
    ent = rng.standard_normal((60, 24))
    rel = rng.standard_normal((7, 24))
    s = rng.integers(0, 60, 500)
    p = rng.integers(0, 7, 500)
    o = rng.integers(0, 60, 500)
    return ent, rel, s, p, o


def test_transe_scores_agree(tables):
    ent, rel, s, p, o = tables
    a = _numpy.transe_scores(ent, rel, s, p, o)
    b = _core.transe_scores(ent, rel, s, p, o)
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12)


def test_transe_l1_agree(tables):
    ent, rel, s, p, o = tables
    a = _numpy.transe_scores(ent, rel, s, p, o, norm_order=1)
    b = _core.transe_scores(ent, rel, s, p, o, norm_order=1)
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12)


def test_complex_scores_agree(tables):
    ent, rel, s, p, o = tables
    a = _numpy.complex_scores(ent, rel, s, p, o)
    b = _core.complex_scores(ent, rel, s, p, o)
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("fn", [
    "transe_sweep_objects", "complex_sweep_objects",
])
def test_object_sweeps_agree(tables, fn):
    ent, rel, *_ = tables
    a = getattr(_numpy, fn)(ent, rel, 3, 2)
    b = getattr(_core, fn)(ent, rel, 3, 2)
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("fn", [
    "transe_sweep_subjects", "complex_sweep_subjects",
])
def test_subject_sweeps_agree(tables, fn):
    ent, rel, *_ = tables
    a = getattr(_numpy, fn)(ent, rel, 2, 11)
    b = getattr(_core, fn)(ent, rel, 2, 11)
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("mod", [_numpy, _core], ids=["python", "compiled"])
def test_within_backend_sweep_equals_batch(tables, mod):
    """Each backend must be self-consistent bit for bit across call shapes."""
    ent, rel, *_ = tables
    n = ent.shape[0]
    cand = np.arange(n, dtype=np.int64)
    fixed2 = np.full(n, 2, dtype=np.int64)
    fixed5 = np.full(n, 5, dtype=np.int64)
    assert np.array_equal(
        mod.transe_sweep_objects(ent, rel, 2, 5),
        mod.transe_scores(ent, rel, fixed2, fixed5, cand),
    )
    assert np.array_equal(
        mod.transe_sweep_subjects(ent, rel, 5, 2),
        mod.transe_scores(ent, rel, cand, fixed5, fixed2),
    )
    assert np.array_equal(
        mod.complex_sweep_objects(ent, rel, 2, 5),
        mod.complex_scores(ent, rel, fixed2, fixed5, cand),
    )
    assert np.array_equal(
        mod.complex_sweep_subjects(ent, rel, 5, 2),
        mod.complex_scores(ent, rel, cand, fixed5, fixed2),
    )


def test_backend_selector_env(monkeypatch):
    import importlib

    import kgelab._kernels as kernels

    monkeypatch.setenv("KGELAB_BACKEND", "python")
    reloaded = importlib.reload(kernels)
    assert reloaded.BACKEND_NAME == "python"
    monkeypatch.delenv("KGELAB_BACKEND")
    restored = importlib.reload(kernels)
    assert restored.BACKEND_NAME in ("python", "compiled")
