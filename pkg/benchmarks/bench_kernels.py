"""Time the compiled kernels against the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--repeat N]
"""
import argparse
import timeit

import numpy as np

from pcinpaint import _pykernels

try:
    from pcinpaint import _ckernels
except ImportError:
    _ckernels = None


def workloads(rng):
    free = rng.random((200, 200)) < 0.45
    n = 5000
    ei = rng.integers(0, n, 30000).astype(np.intp)
    ej = rng.integers(0, n, 30000).astype(np.intp)
    member = (rng.random(n) < 0.5).astype(np.uint8)
    seed = (rng.random(n) < 0.1).astype(np.uint8)
    normals = rng.normal(size=(n, 3))
    return {
        "label_components_8 200x200": lambda k: k.label_components_8(free.astype(np.uint8)),
        "count_seeded_components 5k/30k": lambda k: k.count_seeded_components(n, ei, ej, member, seed),
        "agtv_sum 30k edges": lambda k: k.agtv_sum(normals, ei, ej),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if _ckernels is None:
        print("compiled extension not built; run `pip install -e . --no-build-isolation`")
    print(f"{'kernel':34s} {'python ms':>10s} {'cython ms':>10s} {'speedup':>8s}")
    for name, fn in workloads(np.random.default_rng(0)).items():
        py = min(timeit.repeat(lambda: fn(_pykernels), number=1, repeat=args.repeat)) * 1e3
        if _ckernels is None:
            print(f"{name:34s} {py:10.2f} {'-':>10s} {'-':>8s}")
            continue
        a, b = fn(_ckernels), fn(_pykernels)
        if isinstance(a, tuple):
            a, b = a[0], b[0]
        # summation order differs between backends
        assert np.allclose(a, b, rtol=1e-12, atol=0), name
        cy = min(timeit.repeat(lambda: fn(_ckernels), number=1, repeat=args.repeat)) * 1e3
        print(f"{name:34s} {py:10.2f} {cy:10.2f} {py / cy:7.1f}x")


if __name__ == "__main__":
    main()
