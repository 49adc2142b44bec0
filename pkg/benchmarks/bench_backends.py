#!/usr/bin/env python3
"""Benchmark the compiled scoring kernels against the numpy fallback.

Times batch scoring and full-candidate sweeps at a few sizes, checks that
the two backends agree numerically, and prints the speedups. Run from the
repository root after building the extension:

    python setup.py build_ext --inplace
    python benchmarks/bench_backends.py
"""

import time

import numpy as np

from kgelab._kernels import _numpy

try:
    from kgelab._kernels import _core
except ImportError:
    _core = None


def timeit(fn, *args, repeats=5):
    best = float("inf")
    for _ in range(repeats):
        started = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - started)
    return best


def bench(n_entities, dim, batch):
    rng = np.random.default_rng(7)
    ent = rng.standard_normal((n_entities, dim))
    rel = rng.standard_normal((20, dim))
    s = rng.integers(0, n_entities, batch)
    p = rng.integers(0, 20, batch)
    o = rng.integers(0, n_entities, batch)

    cases = [
        ("transe batch", lambda m: m.transe_scores(ent, rel, s, p, o)),
        ("complex batch", lambda m: m.complex_scores(ent, rel, s, p, o)),
        ("transe sweep", lambda m: m.transe_sweep_objects(ent, rel, 3, 2)),
        ("complex sweep", lambda m: m.complex_sweep_objects(ent, rel, 3, 2)),
    ]
    print(f"\nn={n_entities} dim={dim} batch={batch}")
    print(f"  {'kernel':<14} {'python':>10} {'compiled':>10} {'speedup':>8}  agreement")
    for name, call in cases:
        py = timeit(call, _numpy)
        if _core is None:
            print(f"  {name:<14} {py * 1e3:>8.2f}ms {'n/a':>10} {'':>8}")
            continue
        cy = timeit(call, _core)
        diff = float(np.max(np.abs(call(_numpy) - call(_core))))
        print(
            f"  {name:<14} {py * 1e3:>8.2f}ms {cy * 1e3:>8.2f}ms "
            f"{py / cy:>7.1f}x  max|diff|={diff:.1e}"
        )


def main():
    if _core is None:
        print("compiled backend not built; showing fallback timings only")
    bench(n_entities=500, dim=300, batch=5_000)
    bench(n_entities=5_000, dim=300, batch=50_000)
    bench(n_entities=20_000, dim=300, batch=100_000)


if __name__ == "__main__":
    main()
