"""Kernel backend selection.

The compiled Cython core is used when its extension module importable;
otherwise the numpy fallback takes over. ``KGELAB_BACKEND=python`` forces
the fallback, ``KGELAB_BACKEND=compiled`` demands the extension and fails
loudly if it is missing. Both backends expose the same functions:

    transe_scores(ent, rel, s, p, o, norm_order)
    transe_sweep_objects(ent, rel, s, p, norm_order)
    transe_sweep_subjects(ent, rel, p, o, norm_order)
    complex_scores(ent, rel, s, p, o)
    complex_sweep_objects(ent, rel, s, p)
    complex_sweep_subjects(ent, rel, p, o)

Scores from a backend are self-consistent bit for bit across call shapes;
the two backends may disagree in the last ulp (sequential vs pairwise
accumulation).
"""

import os

from . import _numpy

_requested = os.environ.get("KGELAB_BACKEND", "auto").lower()

if _requested in ("python", "fallback", "numpy"):
    backend = _numpy
elif _requested in ("auto", "compiled", "c"):
    try:
        from . import _core as backend
    except ImportError:
        if _requested != "auto":
            raise ImportError(
                "KGELAB_BACKEND=compiled but the extension is not built; "
                "run `python setup.py build_ext --inplace` or reinstall"
            ) from None
        backend = _numpy
else:
    raise ValueError(f"unrecognized KGELAB_BACKEND value: {_requested!r}")

BACKEND_NAME = backend.NAME

transe_scores = backend.transe_scores
transe_sweep_objects = backend.transe_sweep_objects
transe_sweep_subjects = backend.transe_sweep_subjects
complex_scores = backend.complex_scores
complex_sweep_objects = backend.complex_sweep_objects
complex_sweep_subjects = backend.complex_sweep_subjects
