"""Compare the compiled evaluation kernel with the numpy interpreter.

Run with ``python3 benchmarks/bench_kernels.py``.  Each case is timed on
both backends and the results are checked to agree.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from hyperform import _backend, hyperops as ho, quadpair as qp, symexpr as se
from hyperform.partitions import ConeSpec


def _time(fn, repeat: int):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return best, out


def cases():
    pts = se.default_points(2, 200_000, 1.5)
    bm = ho.delta(2).tau01.coeffs()
    bv = ho.boundary_value("1/(z1+i)", ConeSpec([[1.0, 0.0], [0.0, 1.0]], 2)).tau01.coeffs()
    yield "eval BM kernel (200k pts)", lambda: se.evaluate(bm, pts, check=False)
    yield "eval cone bv kernel (200k pts)", lambda: se.evaluate(bv, pts, check=False)
    d2 = ho.delta(2)
    w = qp.Density.top("exp(x1+x2)", 2)
    yield "pair delta(2) on S^3, N=48", lambda: qp.pair(d2, w, nodes=48, max_doublings=0, tol=1.0).value


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    try:
        _backend.set_backend("cython")
    except ImportError:
        print("compiled kernel not built; only the numpy backend is available")
        return 1
    print(f"{'case':38s} {'numpy [s]':>10s} {'cython [s]':>11s} {'speedup':>8s}")
    for name, fn in cases():
        _backend.set_backend("numpy")
        tn, vn = _time(fn, args.repeat)
        _backend.set_backend("cython")
        tc, vc = _time(fn, args.repeat)
        ok = np.allclose(vn, vc, rtol=1e-12, atol=1e-13, equal_nan=True)
        print(f"{name:38s} {tn:10.4f} {tc:11.4f} {tn / tc:8.1f}x{'' if ok else '  MISMATCH'}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
