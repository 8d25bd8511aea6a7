"""Lowering of expression DAGs to a flat register program, plus the numpy interpreter.

A program is a list of instructions in topological order; register ``k``
holds the value of instruction ``k``.  The same encoding is consumed by the
compiled kernel (``_kernels.pyx``) which interprets it point by point.
"""
from __future__ import annotations

import threading
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np

from . import symexpr as se

# opcodes (shared with _kernels.pyx)
CONST, X, Y, Z, ZB, ADD, MUL, POWI, POWF, EXP, COS, SIN, LOG, BUMP, ACHI, MAX, MIN, EXTERN = range(18)

OPNAMES = ["CONST", "X", "Y", "Z", "ZB", "ADD", "MUL", "POWI", "POWF", "EXP", "COS", "SIN", "LOG",
           "BUMP", "ACHI", "MAX", "MIN", "EXTERN"]


@dataclass
class Program:
    ops: np.ndarray  # int32
    argstart: np.ndarray  # int32
    argcount: np.ndarray  # int32
    args: np.ndarray  # int32
    cre: np.ndarray  # float64
    cim: np.ndarray  # float64
    fpar: np.ndarray  # float64
    ipar: np.ndarray  # int32
    polystart: np.ndarray  # int32, bump polynomial offsets
    poly: np.ndarray  # float64
    outputs: np.ndarray  # int32
    externs: list
    dim: int

    @property
    def size(self) -> int:
        return len(self.ops)


class _Builder:
    def __init__(self):
        self.ops, self.args, self.argstart, self.argcount = [], [], [], []
        self.cre, self.cim, self.fpar, self.ipar, self.polystart = [], [], [], [], []
        self.poly: list[float] = []
        self.externs: list = []
        self.regs: dict[bytes, int] = {}
        self.dim = 0

    def emit(self, op, args=(), c=0j, f=0.0, i=0, poly=None):
        self.ops.append(op)
        self.argstart.append(len(self.args))
        self.argcount.append(len(args))
        self.args.extend(args)
        self.cre.append(c.real)
        self.cim.append(c.imag)
        self.fpar.append(f)
        self.ipar.append(i)
        if poly is not None:
            self.polystart.append(len(self.poly))
            self.poly.extend(poly)
        else:
            self.polystart.append(-1)
        return len(self.ops) - 1

    def lower(self, root: se.Expr) -> int:
        for node in se._postorder([root]):
            if node._digest in self.regs:
                continue
            self.regs[node._digest] = self._lower_node(node)
        return self.regs[root._digest]

    def _lower_node(self, node) -> int:
        r = self.regs
        if isinstance(node, se.Const):
            return self.emit(CONST, c=complex(node.value))
        if isinstance(node, se.Var):
            self.dim = max(self.dim, node.idx)
            op = {"x": X, "y": Y, "z": Z, "zb": ZB}[node.kind]
            return self.emit(op, i=node.idx - 1)
        if isinstance(node, se.Add):
            return self.emit(ADD, [r[t._digest] for t in node.terms])
        if isinstance(node, se.Mul):
            return self.emit(MUL, [r[f._digest] for f in node.factors])
        if isinstance(node, se.Pow):
            b = r[node.base._digest]
            if node.exp.denominator == 1:
                return self.emit(POWI, [b], i=int(node.exp))
            return self.emit(POWF, [b], f=float(node.exp))
        if isinstance(node, se.Func):
            op = {"exp": EXP, "cos": COS, "sin": SIN, "log": LOG}[node.name]
            return self.emit(op, [r[node.arg._digest]])
        if isinstance(node, se.Bump):
            poly = [float(c) for c in se.bump_poly(node.order)]
            return self.emit(BUMP, [r[node.arg._digest]], f=node.delta, i=len(poly), poly=poly)
        if isinstance(node, se.Achi):
            return self.emit(ACHI, [r[node.arg._digest]])
        if isinstance(node, se.Extremum):
            return self.emit(MAX if node.kind == "max" else MIN, [r[a._digest] for a in node.args])
        if isinstance(node, (se.Norm2, se.Phi)):
            return self.lower(se.expand_macro(node))
        if isinstance(node, se.Numeric):
            self.dim = max(self.dim, node.dim)
            self.externs.append(node.fn)
            return self.emit(EXTERN, i=len(self.externs) - 1)
        raise TypeError(f"cannot lower {type(node).__name__}")

    def finish(self, outputs) -> Program:
        i32 = lambda v: np.asarray(v, dtype=np.int32)  # noqa: E731
        f64 = lambda v: np.asarray(v, dtype=np.float64)  # noqa: E731
        return Program(i32(self.ops), i32(self.argstart), i32(self.argcount), i32(self.args),
                       f64(self.cre), f64(self.cim), f64(self.fpar), i32(self.ipar),
                       i32(self.polystart), f64(self.poly), i32(outputs), list(self.externs), self.dim)


_CACHE: "OrderedDict[tuple, Program]" = OrderedDict()
_CACHE_LOCK = threading.Lock()
_CACHE_SIZE = 256


def compile_program(roots: tuple) -> Program:
    key = tuple(e._digest for e in roots)
    with _CACHE_LOCK:
        prog = _CACHE.get(key)
        if prog is not None:
            _CACHE.move_to_end(key)
            return prog
    b = _Builder()
    outs = [b.lower(e) for e in roots]
    prog = b.finish(outs)
    with _CACHE_LOCK:
        _CACHE[key] = prog
        while len(_CACHE) > _CACHE_SIZE:
            _CACHE.popitem(last=False)
    return prog


def extern_columns(prog: Program, Z: np.ndarray) -> np.ndarray:
    if not prog.externs:
        return np.zeros((len(Z), 0), dtype=complex)
    cols = [np.broadcast_to(np.asarray(fn(Z), dtype=complex), (len(Z),)) for fn in prog.externs]
    return np.ascontiguousarray(np.stack(cols, axis=1))


def run_numpy(prog: Program, Zs: np.ndarray, ext: np.ndarray) -> np.ndarray:
    """Interpret the program with one numpy array operation per instruction."""
    N = len(Zs)
    regs: list = [None] * prog.size
    A = prog.args
    with np.errstate(all="ignore"):
        for k in range(prog.size):
            op = prog.ops[k]
            s, c = prog.argstart[k], prog.argcount[k]
            a = [regs[j] for j in A[s:s + c]]
            if op == CONST:
                v = complex(prog.cre[k], prog.cim[k])
            elif op == X:
                v = Zs[:, prog.ipar[k]].real + 0j
            elif op == Y:
                v = Zs[:, prog.ipar[k]].imag + 0j
            elif op == Z:
                v = Zs[:, prog.ipar[k]]
            elif op == ZB:
                v = np.conj(Zs[:, prog.ipar[k]])
            elif op == ADD:
                v = a[0]
                for t in a[1:]:
                    v = v + t
            elif op == MUL:
                v = a[0]
                for t in a[1:]:
                    v = v * t
            elif op == POWI:
                p = int(prog.ipar[k])
                v = a[0] ** p if p > 0 else 1.0 / (a[0] ** (-p))
            elif op == POWF:
                p = prog.fpar[k]
                if 2 * p == round(2 * p):
                    r = np.sqrt(a[0])
                    q = int(round(2 * p))
                    v = r ** q if q > 0 else 1.0 / r ** (-q)
                else:
                    v = np.power(a[0], p)
            elif op == EXP:
                v = np.exp(a[0])
            elif op == COS:
                v = np.cos(a[0])
            elif op == SIN:
                v = np.sin(a[0])
            elif op == LOG:
                v = np.log(a[0])
            elif op == BUMP:
                t = np.broadcast_to(np.real(a[0]), (N,))
                v = _bump_np(t, prog.fpar[k], prog.poly[prog.polystart[k]:prog.polystart[k] + prog.ipar[k]]) + 0j
            elif op == ACHI:
                v = (np.real(a[0]) <= 0).astype(float) + 0j
            elif op == MAX:
                v = np.maximum.reduce([np.broadcast_to(np.real(t), (N,)) for t in a]) + 0j
            elif op == MIN:
                v = np.minimum.reduce([np.broadcast_to(np.real(t), (N,)) for t in a]) + 0j
            elif op == EXTERN:
                v = ext[:, prog.ipar[k]]
            else:  # pragma: no cover
                raise RuntimeError(f"bad opcode {op}")
            regs[k] = v
    out = np.empty((N, len(prog.outputs)), dtype=complex)
    for col, r in enumerate(prog.outputs):
        out[:, col] = regs[r]
    return out


def _bump_np(t, delta, poly):
    out = np.zeros(len(t))
    s = t - delta
    m = s > 0
    if m.any():
        u = 1.0 / s[m]
        lu = np.log(u)
        acc = np.zeros_like(u)
        for j, c in enumerate(poly):
            if c:
                acc += c * np.exp(-u + j * lu)
        out[m] = acc
    return out


def run_program(prog: Program, Z: np.ndarray) -> np.ndarray:
    from ._backend import backend

    ext = extern_columns(prog, Z)
    return backend().run(prog, Z, ext)
