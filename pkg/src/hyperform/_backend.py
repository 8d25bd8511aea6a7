"""Selection of the evaluation backend.

The compiled kernel is used when it was built and ``HYPERFORM_PURE`` is not
set; otherwise the numpy interpreter runs the same programs.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import _program

CHUNK = 8192


def thread_count() -> int:
    try:
        t = int(os.environ.get("HYPERFORM_THREADS", "0"))
    except ValueError:
        t = 0
    if t <= 0:
        t = min(os.cpu_count() or 1, 8)
    return t


class _Pure:
    name = "numpy"

    def run(self, prog, Z, ext):
        return _program.run_numpy(prog, Z, ext)

    def wsum(self, values: np.ndarray, weights: np.ndarray) -> complex:
        return neumaier_sum(values * weights)


class _Compiled:
    name = "cython"

    def __init__(self, mod):
        self.mod = mod

    def _chunk(self, prog, Z, ext, out, lo, hi):
        self.mod.run_points(prog.ops, prog.argstart, prog.argcount, prog.args, prog.cre, prog.cim,
                            prog.fpar, prog.ipar, prog.polystart, prog.poly, prog.outputs,
                            Z[lo:hi], ext[lo:hi], out[lo:hi])

    def run(self, prog, Z, ext):
        N = len(Z)
        out = np.empty((N, len(prog.outputs)), dtype=complex)
        bounds = [(lo, min(lo + CHUNK, N)) for lo in range(0, N, CHUNK)]
        threads = thread_count()
        if threads > 1 and len(bounds) > 1:
            with ThreadPoolExecutor(threads) as pool:
                list(pool.map(lambda b: self._chunk(prog, Z, ext, out, *b), bounds))
        else:
            for b in bounds:
                self._chunk(prog, Z, ext, out, *b)
        return out

    def wsum(self, values: np.ndarray, weights: np.ndarray) -> complex:
        return complex(self.mod.weighted_sum(np.ascontiguousarray(values, dtype=complex),
                                             np.ascontiguousarray(weights, dtype=float)))


def neumaier_sum(v: np.ndarray) -> complex:
    """Compensated sum in a fixed order (chunked pairwise partials, then Neumaier)."""
    v = np.asarray(v, dtype=complex).ravel()
    parts = [np.sum(v[i:i + CHUNK]) for i in range(0, len(v), CHUNK)]
    s = 0j
    comp = 0j
    for p in parts:
        t = s + p
        # real and imaginary parts compensated separately
        cr = (s.real - t.real) + p.real if abs(s.real) >= abs(p.real) else (p.real - t.real) + s.real
        ci = (s.imag - t.imag) + p.imag if abs(s.imag) >= abs(p.imag) else (p.imag - t.imag) + s.imag
        comp += complex(cr, ci)
        s = t
    return s + comp


_BACKEND = None


def backend():
    global _BACKEND
    if _BACKEND is None:
        _BACKEND = _select()
    return _BACKEND


def _select():
    if os.environ.get("HYPERFORM_PURE", "") not in ("", "0"):
        return _Pure()
    try:
        from . import _kernels  # type: ignore[attr-defined]
    except ImportError:
        return _Pure()
    return _Compiled(_kernels)


def set_backend(name: str):
    """Force ``'numpy'`` or ``'cython'`` (used by tests and benchmarks)."""
    global _BACKEND
    if name == "numpy":
        _BACKEND = _Pure()
    elif name == "cython":
        from . import _kernels  # type: ignore[attr-defined]

        _BACKEND = _Compiled(_kernels)
    else:
        raise ValueError(name)
    return _BACKEND
