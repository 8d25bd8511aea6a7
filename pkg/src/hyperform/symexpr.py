"""Symbolic scalar expressions over the coordinates of C^n.

Expressions are immutable, interned DAG nodes.  Addition and multiplication
are kept in a canonical form (flattened, like terms collected, operands
ordered by a content digest), which makes many identities visible by plain
structural comparison.  Differentiation is done with respect to the
Wirtinger variables ``z_j`` and ``zb_j``; derivatives in ``x_j`` and ``y_j``
are derived from those.

The textual grammar (used by JSON and the CLI)::

    expr   := term (('+' | '-') term)*
    term   := factor (('*' | '/') factor)*
    factor := ('-' | '+') factor | power
    power  := atom ('^' factor)?
    atom   := number | 'i' | 'pi' | z<k> | zb<k> | x<k> | y<k>
            | call | '(' expr ')'

Calls: ``exp cos sin log sqrt``, ``norm2z(j,...)``, ``norm2y(j,...)``
(empty argument list means all coordinates), ``achi(e)`` (0 where
``Re e > 0``, 1 elsewhere), ``max(...)``, ``min(...)``,
``bump(e, delta, order)`` and the partition atoms ``phi(k, {family})`` /
``dphi(k, {family}, zb1, z2, ...)``.
"""
from __future__ import annotations

import hashlib
import math
import re
import threading
import weakref
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import Inconclusive, NotDifferentiable, NotHolomorphic, ParseError, SerializationError, SingularPoint

__all__ = [
    "ExactConst", "Expr", "Const", "Var", "Add", "Mul", "Pow", "Func", "Bump", "Achi",
    "Extremum", "Norm2", "Phi", "Numeric",
    "const", "var", "z", "zb", "x", "y", "add", "mul", "pow_", "exp", "cos", "sin", "log",
    "sqrt", "bump", "achi", "emax", "emin", "norm2z", "norm2y", "phi", "numeric",
    "diff", "subs", "slice_zero", "reindex", "complexify", "free_dims", "node_count",
    "to_string", "parse", "eval", "evaluate", "simplify_zero", "ZeroCheck",
    "register_family", "family_from_key", "I", "PI", "ZERO", "ONE",
    "SYMBOLIC_ZERO_TOL", "INCONCLUSIVE_TOL",
]

SYMBOLIC_ZERO_TOL = 1e-10
INCONCLUSIVE_TOL = 1e-6
GUARD_DISTANCE = 1e-3


# ---------------------------------------------------------------------------
# exact constants: Gaussian rationals times a power of pi


class ExactConst:
    """(re + i*im) * pi**k with rational re, im."""

    __slots__ = ("re", "im", "k")

    def __init__(self, re=0, im=0, k: int = 0):
        self.re = Fraction(re)
        self.im = Fraction(im)
        self.k = int(k) if (self.re or self.im) else 0

    def key(self):
        return (self.re.numerator, self.re.denominator, self.im.numerator, self.im.denominator, self.k)

    def __eq__(self, other):
        return isinstance(other, ExactConst) and self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    def __repr__(self):
        return f"ExactConst({self.re}, {self.im}, k={self.k})"

    def is_zero(self) -> bool:
        return self.re == 0 and self.im == 0

    def is_one(self) -> bool:
        return self.re == 1 and self.im == 0 and self.k == 0

    def __complex__(self):
        return complex(float(self.re), float(self.im)) * (math.pi ** self.k)

    def __neg__(self):
        return ExactConst(-self.re, -self.im, self.k)

    def conjugate(self):
        return ExactConst(self.re, -self.im, self.k)

    def mul(self, other: "ExactConst") -> "ExactConst":
        return ExactConst(self.re * other.re - self.im * other.im,
                          self.re * other.im + self.im * other.re, self.k + other.k)

    def add(self, other: "ExactConst"):
        if self.is_zero():
            return other
        if other.is_zero():
            return self
        if self.k == other.k:
            return ExactConst(self.re + other.re, self.im + other.im, self.k)
        return complex(self) + complex(other)

    def inverse(self) -> "ExactConst":
        den = self.re * self.re + self.im * self.im
        if den == 0:
            raise SingularPoint("division by exact zero")
        return ExactConst(self.re / den, -self.im / den, -self.k)

    def power(self, e: int) -> "ExactConst":
        base = self if e >= 0 else self.inverse()
        out = ExactConst(1)
        for _ in range(abs(e)):
            out = out.mul(base)
        return out


def _cnum(v):
    """Normalize a python number into ExactConst or complex."""
    if isinstance(v, ExactConst):
        return v
    if isinstance(v, bool):
        return ExactConst(int(v))
    if isinstance(v, (int, Fraction)):
        return ExactConst(v)
    if isinstance(v, (float, complex, np.floating, np.complexfloating)):
        c = complex(v)
        if not (math.isfinite(c.real) and math.isfinite(c.imag)):
            raise SingularPoint(f"non-finite constant {c!r}")
        return c
    if isinstance(v, np.integer):
        return ExactConst(int(v))
    raise TypeError(f"not a number: {v!r}")


def _c_is_zero(c) -> bool:
    return c.is_zero() if isinstance(c, ExactConst) else c == 0


def _c_is_one(c) -> bool:
    return c.is_one() if isinstance(c, ExactConst) else c == 1


def _c_add(a, b):
    if isinstance(a, ExactConst) and isinstance(b, ExactConst):
        return a.add(b)
    return complex(a) + complex(b)


def _c_mul(a, b):
    if isinstance(a, ExactConst) and isinstance(b, ExactConst):
        return a.mul(b)
    return complex(a) * complex(b)


def _c_pow(a, e: Fraction):
    if isinstance(a, ExactConst) and e.denominator == 1:
        return a.power(int(e))
    ca = complex(a)
    if ca == 0 and e < 0:
        raise SingularPoint("zero to a negative power")
    if ca == 0:
        return 0j
    return ca ** float(e)


def _c_key(c):
    return ("e",) + c.key() if isinstance(c, ExactConst) else ("c", c.real.hex(), c.imag.hex())


# ---------------------------------------------------------------------------
# node machinery

_TABLE: "weakref.WeakValueDictionary[bytes, Expr]" = weakref.WeakValueDictionary()
_TABLE_LOCK = threading.Lock()


def _make(cls, params: tuple, children: tuple, **fields):
    h = hashlib.blake2b(digest_size=16)
    h.update(cls.TAG.encode())
    h.update(repr(params).encode())
    for c in children:
        h.update(c._digest)
    d = h.digest()
    obj = _TABLE.get(d)
    if obj is not None:
        return obj
    obj = object.__new__(cls)
    for k, v in fields.items():
        object.__setattr__(obj, k, v)
    object.__setattr__(obj, "_digest", d)
    object.__setattr__(obj, "_hash", int.from_bytes(d[:8], "little"))
    with _TABLE_LOCK:
        return _TABLE.setdefault(d, obj)


class Expr:
    """Base class of all expression nodes."""

    __slots__ = ("_digest", "_hash", "__weakref__")
    TAG = "?"

    def __setattr__(self, name, value):
        raise AttributeError("Expr nodes are immutable")

    def children(self) -> tuple:
        return ()

    def __hash__(self):
        return self._hash

    def __eq__(self, other):
        return isinstance(other, Expr) and self._digest == other._digest

    def __repr__(self):
        try:
            return f"Expr({to_string(self)})"
        except SerializationError:
            return f"Expr(<{self.TAG}>)"

    # arithmetic sugar
    def __add__(self, o):
        return add(self, o)

    def __radd__(self, o):
        return add(o, self)

    def __sub__(self, o):
        return add(self, mul(-1, o))

    def __rsub__(self, o):
        return add(o, mul(-1, self))

    def __mul__(self, o):
        return mul(self, o)

    def __rmul__(self, o):
        return mul(o, self)

    def __truediv__(self, o):
        return mul(self, pow_(as_expr(o), -1))

    def __rtruediv__(self, o):
        return mul(o, pow_(self, -1))

    def __neg__(self):
        return mul(-1, self)

    def __pow__(self, e):
        return pow_(self, e)

    @property
    def is_zero(self) -> bool:
        return isinstance(self, Const) and _c_is_zero(self.value)


class Const(Expr):
    __slots__ = ("value",)
    TAG = "const"


class Var(Expr):
    __slots__ = ("kind", "idx")
    TAG = "var"


class Add(Expr):
    __slots__ = ("terms",)
    TAG = "add"

    def children(self):
        return self.terms


class Mul(Expr):
    __slots__ = ("factors",)
    TAG = "mul"

    def children(self):
        return self.factors


class Pow(Expr):
    __slots__ = ("base", "exp")
    TAG = "pow"

    def children(self):
        return (self.base,)


class Func(Expr):
    __slots__ = ("name", "arg")
    TAG = "func"

    def children(self):
        return (self.arg,)


class Bump(Expr):
    """Derivative of order ``order`` of t -> exp(-1/(t - delta)) for t > delta, else 0."""

    __slots__ = ("arg", "delta", "order")
    TAG = "bump"

    def children(self):
        return (self.arg,)


class Achi(Expr):
    """Anti-characteristic function of {Re arg > 0}: 0 inside, 1 outside."""

    __slots__ = ("arg",)
    TAG = "achi"

    def children(self):
        return (self.arg,)


class Extremum(Expr):
    __slots__ = ("kind", "args")
    TAG = "extremum"

    def children(self):
        return self.args


class Norm2(Expr):
    """Squared norm of the z-block or y-block over the listed coordinates."""

    __slots__ = ("kind", "idxs")
    TAG = "norm2"


class Phi(Expr):
    """Partition-of-unity atom: label ``label`` of a registered family, with Wirtinger derivatives."""

    __slots__ = ("family", "label", "derivs")
    TAG = "phi"


class Numeric(Expr):
    """Opaque coefficient backed by a vectorized callable ``fn(Z) -> values``."""

    __slots__ = ("key", "fn", "dim")
    TAG = "numeric"


def as_expr(v) -> Expr:
    if isinstance(v, Expr):
        return v
    return const(v)


def const(v) -> Const:
    c = _cnum(v)
    return _make(Const, (_c_key(c),), (), value=c)


ZERO = const(0)
ONE = const(1)
I = const(ExactConst(0, 1))
PI = const(ExactConst(1, 0, 1))
_HALF = const(Fraction(1, 2))


def var(kind: str, idx: int) -> Var:
    if kind not in ("x", "y", "z", "zb"):
        raise ValueError(f"unknown variable kind {kind!r}")
    idx = int(idx)
    if idx < 1:
        raise ValueError("coordinate indices start at 1")
    return _make(Var, (kind, idx), (), kind=kind, idx=idx)


def z(j: int) -> Var:
    return var("z", j)


def zb(j: int) -> Var:
    return var("zb", j)


def x(j: int) -> Var:
    return var("x", j)


def y(j: int) -> Var:
    return var("y", j)


def _split_coef(e: Expr):
    if isinstance(e, Mul) and isinstance(e.factors[0], Const):
        rest = e.factors[1:]
        if len(rest) == 1:
            return e.factors[0].value, rest[0]
        return e.factors[0].value, _make(Mul, (), rest, factors=rest)
    return ExactConst(1), e


def _with_coef(c, rest: Expr) -> Expr:
    if _c_is_one(c):
        return rest
    if isinstance(rest, Mul):
        fs = (const(c),) + rest.factors
    else:
        fs = (const(c), rest)
    return _make(Mul, (), fs, factors=fs)


def add(*args) -> Expr:
    acc = ExactConst(0)
    coefs: dict[bytes, list] = {}

    def visit(a):
        nonlocal acc
        a = as_expr(a)
        if isinstance(a, Add):
            for t in a.terms:
                visit(t)
        elif isinstance(a, Const):
            acc = _c_add(acc, a.value)
        else:
            c, rest = _split_coef(a)
            slot = coefs.get(rest._digest)
            if slot is None:
                coefs[rest._digest] = [rest, c]
            else:
                slot[1] = _c_add(slot[1], c)

    for a in args:
        visit(a)
    terms = []
    for d in sorted(coefs):
        rest, c = coefs[d]
        if _c_is_zero(c):
            continue
        terms.append(_with_coef(c, rest))
    if not _c_is_zero(acc):
        terms.insert(0, const(acc))
    if not terms:
        return ZERO
    if len(terms) == 1:
        return terms[0]
    terms = tuple(terms)
    return _make(Add, (), terms, terms=terms)


def mul(*args) -> Expr:
    acc = ExactConst(1)
    powers: dict[bytes, list] = {}

    def visit(a):
        nonlocal acc
        a = as_expr(a)
        if isinstance(a, Mul):
            for f in a.factors:
                visit(f)
        elif isinstance(a, Const):
            acc = _c_mul(acc, a.value)
        else:
            if isinstance(a, Pow):
                base, e = a.base, a.exp
            else:
                base, e = a, Fraction(1)
            slot = powers.get(base._digest)
            if slot is None:
                powers[base._digest] = [base, e]
            else:
                slot[1] += e

    for a in args:
        visit(a)
    if _c_is_zero(acc):
        return ZERO
    factors = []
    for d in sorted(powers):
        base, e = powers[d]
        if e == 0:
            continue
        factors.append(base if e == 1 else _make(Pow, (e,), (base,), base=base, exp=e))
    if not factors:
        return const(acc)
    if _c_is_one(acc) and len(factors) == 1:
        return factors[0]
    if not _c_is_one(acc):
        factors.insert(0, const(acc))
    factors = tuple(factors)
    return _make(Mul, (), factors, factors=factors)


def pow_(base, e) -> Expr:
    base = as_expr(base)
    if isinstance(e, Expr):
        if not isinstance(e, Const) or not isinstance(e.value, ExactConst) or e.value.im or e.value.k:
            raise ParseError("exponents must be rational constants")
        e = e.value.re
    e = Fraction(e)
    if e == 0:
        return ONE
    if e == 1:
        return base
    if isinstance(base, Const):
        return const(_c_pow(base.value, e))
    if e.denominator == 1:
        if isinstance(base, Pow):
            return pow_(base.base, base.exp * e)
        if isinstance(base, Mul):
            return mul(*[pow_(f, e) for f in base.factors])
    return _make(Pow, (e,), (base,), base=base, exp=e)


_FUNCS = {
    "exp": np.exp,
    "cos": np.cos,
    "sin": np.sin,
    "log": np.log,
}


def _func(name: str, a) -> Expr:
    a = as_expr(a)
    if isinstance(a, Const):
        v = a.value
        if _c_is_zero(v) and name in ("exp", "cos"):
            return ONE
        if _c_is_zero(v) and name == "sin":
            return ZERO
        if _c_is_one(v) and name == "log":
            return ZERO
        return const(complex(_FUNCS[name](complex(v))))
    return _make(Func, (name,), (a,), name=name, arg=a)


def exp(a) -> Expr:
    return _func("exp", a)


def cos(a) -> Expr:
    return _func("cos", a)


def sin(a) -> Expr:
    return _func("sin", a)


def log(a) -> Expr:
    return _func("log", a)


def sqrt(a) -> Expr:
    return pow_(a, Fraction(1, 2))


def bump_poly(order: int) -> tuple[int, ...]:
    """Coefficients of P_m with rho^(m)(t) = exp(-u) * P_m(u), u = 1/(t - delta)."""
    return _bump_poly(int(order))


@lru_cache(maxsize=None)
def _bump_poly(order: int) -> tuple[int, ...]:
    p = [1]
    for _ in range(order):
        # P_{m+1}(u) = u^2 (P_m(u) - P_m'(u))
        dp = [k * p[k] for k in range(1, len(p))] + [0]
        q = [p[k] - dp[k] for k in range(len(p))]
        p = [0, 0] + q
    while len(p) > 1 and p[-1] == 0:
        p.pop()
    return tuple(p)


def bump_value(t: np.ndarray, delta: float, order: int) -> np.ndarray:
    """Vectorized rho_delta^(order)(t) on real input, evaluated in log space."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    s = t - delta
    m = s > 0
    if not np.any(m):
        return out
    u = 1.0 / s[m]
    lu = np.log(u)
    acc = np.zeros_like(u)
    for k, c in enumerate(bump_poly(order)):
        if c:
            acc += c * np.exp(-u + k * lu)
    out[m] = acc
    return out


def bump(a, delta: float, order: int = 0) -> Expr:
    a = as_expr(a)
    delta = float(delta)
    order = int(order)
    if isinstance(a, Const):
        return const(float(bump_value(np.array([complex(a.value).real]), delta, order)[0]))
    return _make(Bump, (delta, order), (a,), arg=a, delta=delta, order=order)


def achi(a) -> Expr:
    a = as_expr(a)
    if isinstance(a, Const):
        return ZERO if complex(a.value).real > 0 else ONE
    return _make(Achi, (), (a,), arg=a)


def _extremum(kind: str, args) -> Expr:
    args = tuple(as_expr(a) for a in args)
    if not args:
        raise ValueError(f"{kind} needs arguments")
    if len(args) == 1:
        return args[0]
    if all(isinstance(a, Const) for a in args):
        vals = [complex(a.value).real for a in args]
        return const(max(vals) if kind == "max" else min(vals))
    return _make(Extremum, (kind,), args, kind=kind, args=args)


def emax(*args) -> Expr:
    return _extremum("max", args)


def emin(*args) -> Expr:
    return _extremum("min", args)


def _norm2(kind: str, idxs: Iterable[int]) -> Expr:
    idxs = tuple(sorted(set(int(i) for i in idxs)))
    if not idxs:
        return ZERO
    return _make(Norm2, (kind, idxs), (), kind=kind, idxs=idxs)


def norm2z(*idxs) -> Expr:
    """Sum of z_j * zb_j over the given coordinates."""
    if len(idxs) == 1 and not isinstance(idxs[0], int):
        idxs = tuple(idxs[0])
    return _norm2("z", idxs)


def norm2y(*idxs) -> Expr:
    """Sum of y_j**2 over the given coordinates."""
    if len(idxs) == 1 and not isinstance(idxs[0], int):
        idxs = tuple(idxs[0])
    return _norm2("y", idxs)


# partition families are registered by key so that expressions can be parsed back
_FAMILIES: dict[str, object] = {}
_FAMILY_PARSERS: dict[str, Callable[[str], object]] = {}


def register_family(family) -> str:
    """Register a partition family object and return its key."""
    key = family.key
    _FAMILIES.setdefault(key, family)
    return key


def register_family_parser(prefix: str, fn: Callable[[str], object]) -> None:
    _FAMILY_PARSERS[prefix] = fn


def family_from_key(key: str):
    fam = _FAMILIES.get(key)
    if fam is not None:
        return fam
    prefix = key.split("|", 1)[0]
    if prefix not in _FAMILY_PARSERS:
        # importing partitions registers the standard parsers
        from . import partitions  # noqa: F401
    if prefix not in _FAMILY_PARSERS:
        raise ParseError(f"unknown partition family {key!r}")
    fam = _FAMILY_PARSERS[prefix](key)
    _FAMILIES.setdefault(key, fam)
    return _FAMILIES[key]


_DKINDS = ("z", "zb")


def phi(family, label, derivs: Sequence[tuple[str, int]] = ()) -> Expr:
    key = family if isinstance(family, str) else register_family(family)
    label = str(label)
    ds = tuple(sorted((str(k), int(j)) for k, j in derivs))
    for k, _ in ds:
        if k not in _DKINDS:
            raise ValueError("partition atoms carry z/zb derivatives only")
    return _make(Phi, (key, label, ds), (), family=key, label=label, derivs=ds)


def numeric(fn: Callable[[np.ndarray], np.ndarray], key: str, dim: int) -> Expr:
    """Wrap a vectorized callable as an opaque coefficient."""
    return _make(Numeric, (key, id(fn), int(dim)), (), key=key, fn=fn, dim=int(dim))


# ---------------------------------------------------------------------------
# traversal helpers


def _postorder(roots: Iterable[Expr]) -> list[Expr]:
    seen: set[bytes] = set()
    out: list[Expr] = []
    stack = [(r, False) for r in reversed(list(roots))]
    while stack:
        node, done = stack.pop()
        if done:
            out.append(node)
            continue
        if node._digest in seen:
            continue
        seen.add(node._digest)
        stack.append((node, True))
        for c in reversed(node.children()):
            if c._digest not in seen:
                stack.append((c, False))
    return out


def node_count(e: Expr) -> int:
    return len(_postorder([e]))


def free_dims(e: Expr) -> int:
    """Largest coordinate index referenced by the expression (0 if none)."""
    n = 0
    for node in _postorder([e]):
        if isinstance(node, Var):
            n = max(n, node.idx)
        elif isinstance(node, Norm2):
            n = max(n, max(node.idxs))
        elif isinstance(node, Phi):
            n = max(n, max(family_from_key(node.family).coords))
            n = max([n] + [j for _, j in node.derivs])
        elif isinstance(node, Numeric):
            n = max(n, node.dim)
    return n


# ---------------------------------------------------------------------------
# differentiation

_VAR_TABLE = {
    # (variable kind, differentiate in) -> derivative
    ("z", "z"): ONE, ("z", "zb"): ZERO,
    ("zb", "z"): ZERO, ("zb", "zb"): ONE,
    ("x", "z"): _HALF, ("x", "zb"): _HALF,
    ("y", "z"): const(ExactConst(0, Fraction(-1, 2))), ("y", "zb"): const(ExactConst(0, Fraction(1, 2))),
}


def _parse_var_name(v) -> tuple[str, int]:
    if isinstance(v, Var):
        return v.kind, v.idx
    if isinstance(v, tuple):
        return str(v[0]), int(v[1])
    m = re.fullmatch(r"(zb|z|x|y)(\d+)", str(v))
    if not m:
        raise ValueError(f"not a coordinate: {v!r}")
    return m.group(1), int(m.group(2))


def diff(e: Expr, v) -> Expr:
    """Exact derivative of ``e`` with respect to a coordinate.

    ``v`` is one of ``'z3'``, ``'zb3'``, ``'x3'``, ``'y3'`` (or a Var node).
    Real derivatives are assembled from the Wirtinger ones:
    d/dx = d/dz + d/dzb and d/dy = i (d/dz - d/dzb).
    """
    kind, j = _parse_var_name(v)
    e = as_expr(e)
    if kind in ("z", "zb"):
        return _wdiff(e, kind, j)
    dz, dzb = _wdiff(e, "z", j), _wdiff(e, "zb", j)
    if kind == "x":
        return add(dz, dzb)
    return mul(I, add(dz, mul(-1, dzb)))


@lru_cache(maxsize=500_000)
def _wdiff(e: Expr, kind: str, j: int) -> Expr:
    if isinstance(e, Const):
        return ZERO
    if isinstance(e, Var):
        if e.idx != j:
            return ZERO
        return _VAR_TABLE[(e.kind, kind)]
    if isinstance(e, Add):
        return add(*[_wdiff(t, kind, j) for t in e.terms])
    if isinstance(e, Mul):
        fs = e.factors
        parts = []
        for k, f in enumerate(fs):
            df = _wdiff(f, kind, j)
            if df.is_zero:
                continue
            parts.append(mul(*(fs[:k] + (df,) + fs[k + 1:])))
        return add(*parts)
    if isinstance(e, Pow):
        db = _wdiff(e.base, kind, j)
        if db.is_zero:
            return ZERO
        return mul(const(e.exp), pow_(e.base, e.exp - 1), db)
    if isinstance(e, Func):
        da = _wdiff(e.arg, kind, j)
        if da.is_zero:
            return ZERO
        if e.name == "exp":
            return mul(e, da)
        if e.name == "cos":
            return mul(-1, sin(e.arg), da)
        if e.name == "sin":
            return mul(cos(e.arg), da)
        if e.name == "log":
            return mul(pow_(e.arg, -1), da)
        raise NotDifferentiable(e.name)
    if isinstance(e, Bump):
        da = _wdiff(e.arg, kind, j)
        if da.is_zero:
            return ZERO
        return mul(bump(e.arg, e.delta, e.order + 1), da)
    if isinstance(e, Achi):
        # locally constant away from the interface Re(arg) = 0
        return ZERO
    if isinstance(e, Norm2):
        if j not in e.idxs:
            return ZERO
        if e.kind == "z":
            return zb(j) if kind == "z" else z(j)
        coef = ExactConst(0, -1) if kind == "z" else ExactConst(0, 1)
        return mul(const(coef), y(j))
    if isinstance(e, Phi):
        fam = family_from_key(e.family)
        if j not in fam.coords:
            return ZERO
        return phi(e.family, e.label, e.derivs + ((kind, j),))
    if isinstance(e, Extremum):
        raise NotDifferentiable("max/min are only meaningful inside achi()")
    if isinstance(e, Numeric):
        raise NotDifferentiable(f"quadrature-backed coefficient {e.key}")
    raise NotDifferentiable(type(e).__name__)


# ---------------------------------------------------------------------------
# lowering and substitution


def expand_macro(e: Expr) -> Expr:
    """Replace a Norm2 or Phi node by its expansion in primitive nodes."""
    if isinstance(e, Norm2):
        if e.kind == "z":
            return add(*[mul(z(j), zb(j)) for j in e.idxs])
        return add(*[pow_(y(j), 2) for j in e.idxs])
    if isinstance(e, Phi):
        return _phi_expansion(e.family, e.label, e.derivs)
    return e


@lru_cache(maxsize=4096)
def _phi_expansion(key: str, label: str, derivs: tuple) -> Expr:
    if derivs:
        base = _phi_expansion(key, label, derivs[:-1])
        k, j = derivs[-1]
        return _wdiff(base, k, j)
    return family_from_key(key).expand(label)


def _rebuild(e: Expr, kids: list[Expr]) -> Expr:
    if isinstance(e, Add):
        return add(*kids)
    if isinstance(e, Mul):
        return mul(*kids)
    if isinstance(e, Pow):
        return pow_(kids[0], e.exp)
    if isinstance(e, Func):
        return _func(e.name, kids[0])
    if isinstance(e, Bump):
        return bump(kids[0], e.delta, e.order)
    if isinstance(e, Achi):
        return achi(kids[0])
    if isinstance(e, Extremum):
        return _extremum(e.kind, kids)
    return e


def _transform(e: Expr, leaf: Callable[[Expr], Expr | None]) -> Expr:
    memo: dict[bytes, Expr] = {}
    for node in _postorder([e]):
        r = leaf(node)
        if r is None:
            kids = [memo[c._digest] for c in node.children()]
            r = _rebuild(node, kids) if kids else node
        memo[node._digest] = r
    return memo[e._digest]


def subs(e: Expr, mapping: dict) -> Expr:
    """Substitute coordinates.  Keys are coordinate names or Var nodes."""
    m = {}
    for k, v in mapping.items():
        kind, j = _parse_var_name(k)
        m[(kind, j)] = as_expr(v)
    touched = {j for _, j in m}

    def leaf(node):
        if isinstance(node, Var):
            return m.get((node.kind, node.idx), node)
        if isinstance(node, Norm2) and touched & set(node.idxs):
            return subs(expand_macro(node), mapping)
        if isinstance(node, Phi):
            fam = family_from_key(node.family)
            if touched & set(fam.coords):
                return subs(expand_macro(node), mapping)
            return node
        if isinstance(node, Numeric):
            raise SerializationError("cannot substitute into a quadrature-backed coefficient")
        return None

    return _transform(as_expr(e), leaf)


def slice_zero(e: Expr, j: int) -> Expr:
    """Restrict to the coordinate hyperplane {z_j = 0}."""
    return subs(e, {("z", j): 0, ("zb", j): 0, ("x", j): 0, ("y", j): 0})


def reindex(e: Expr, idxmap: dict[int, int]) -> Expr:
    """Rename coordinate indices (old -> new); unmapped indices are kept."""

    def leaf(node):
        if isinstance(node, Var):
            return var(node.kind, idxmap.get(node.idx, node.idx))
        if isinstance(node, Norm2):
            return _norm2(node.kind, [idxmap.get(i, i) for i in node.idxs])
        if isinstance(node, Phi):
            fam = family_from_key(node.family).reindexed(idxmap)
            ds = [(k, idxmap.get(j, j)) for k, j in node.derivs]
            return phi(fam, node.label, ds)
        if isinstance(node, Numeric):
            raise SerializationError("cannot reindex a quadrature-backed coefficient")
        return None

    return _transform(as_expr(e), leaf)


def complexify(e: Expr) -> Expr:
    """Holomorphic extension of a real-analytic expression: x_j -> z_j."""

    def leaf(node):
        if isinstance(node, Var):
            if node.kind in ("y", "zb"):
                raise NotHolomorphic(f"{node.kind}{node.idx} has no holomorphic extension")
            return z(node.idx)
        if isinstance(node, (Norm2, Phi, Achi, Bump, Numeric)):
            raise NotHolomorphic(f"{node.TAG} atom is not holomorphic")
        return None

    return _transform(as_expr(e), leaf)


# ---------------------------------------------------------------------------
# printing


def _fmt_frac(q: Fraction) -> str:
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


def _fmt_const(c) -> tuple[str, int]:
    """Return (text, precedence) of a constant."""
    if isinstance(c, ExactConst):
        if c.im == 0:
            s, prec = _fmt_frac(c.re), (4 if c.re.denominator == 1 and c.re >= 0 else 2)
        elif c.re == 0:
            s = "i" if c.im == 1 else f"{_fmt_frac(c.im)}*i"
            prec = 4 if c.im == 1 else 2
        else:
            s, prec = f"{_fmt_frac(c.re)} + {_fmt_frac(c.im)}*i", 1
        if c.k:
            pi = "pi" if c.k == 1 else f"pi^{c.k}" if c.k > 0 else f"pi^({c.k})"
            s = f"({s})" if prec < 2 else s
            s, prec = f"{s}*{pi}", 2
        return s, prec
    if c.imag == 0:
        s = repr(c.real)
        return s, (4 if c.real >= 0 and not str(c.real).startswith("-") else 2)
    return f"{c.real!r} + {c.imag!r}*i", 1


def to_string(e: Expr) -> str:
    """Serialize in the expression grammar (parse(to_string(e)) == e)."""
    memo: dict[bytes, tuple[str, int]] = {}

    def wrap(child, prec):
        s, p = memo[child._digest]
        return s if p >= prec else f"({s})"

    for node in _postorder([as_expr(e)]):
        if isinstance(node, Const):
            out = _fmt_const(node.value)
        elif isinstance(node, Var):
            out = (f"{node.kind}{node.idx}", 4)
        elif isinstance(node, Add):
            parts = [wrap(t, 1) for t in node.terms]
            text = parts[0]
            for p in parts[1:]:
                text += f" - {p[1:]}" if p.startswith("-") else f" + {p}"
            out = (text, 1)
        elif isinstance(node, Mul):
            fs = node.factors
            if isinstance(fs[0], Const) and isinstance(fs[0].value, ExactConst) and fs[0].value == ExactConst(-1):
                out = ("-" + "*".join(wrap(f, 2) for f in fs[1:]), 2)
            else:
                out = ("*".join(wrap(f, 2) for f in fs), 2)
        elif isinstance(node, Pow):
            ex = node.exp
            es = _fmt_frac(ex) if (ex.denominator == 1 and ex > 0) else f"({_fmt_frac(ex)})"
            out = (f"{wrap(node.base, 4)}^{es}", 3)
        elif isinstance(node, Func):
            out = (f"{node.name}({memo[node.arg._digest][0]})", 4)
        elif isinstance(node, Bump):
            out = (f"bump({memo[node.arg._digest][0]}, {node.delta!r}, {node.order})", 4)
        elif isinstance(node, Achi):
            out = (f"achi({memo[node.arg._digest][0]})", 4)
        elif isinstance(node, Extremum):
            out = (f"{node.kind}({', '.join(memo[a._digest][0] for a in node.args)})", 4)
        elif isinstance(node, Norm2):
            out = (f"norm2{node.kind}({','.join(str(i) for i in node.idxs)})", 4)
        elif isinstance(node, Phi):
            if node.derivs:
                ds = ", ".join(f"{k}{j}" for k, j in node.derivs)
                out = (f"dphi({node.label}, {{{node.family}}}, {ds})", 4)
            else:
                out = (f"phi({node.label}, {{{node.family}}})", 4)
        elif isinstance(node, Numeric):
            raise SerializationError(f"quadrature-backed coefficient {node.key} has no text form")
        else:  # pragma: no cover
            raise SerializationError(type(node).__name__)
        memo[node._digest] = out
    return memo[as_expr(e)._digest][0]


# ---------------------------------------------------------------------------
# parsing

_TOKEN = re.compile(r"\s*(?:(\d+\.\d*(?:[eE][-+]?\d+)?|\d*\.\d+(?:[eE][-+]?\d+)?|\d+[eE][-+]?\d+)|(\d+)"
                    r"|([A-Za-z_][A-Za-z_0-9]*)|(\{[^{}]*\})|(\*\*|[-+*/^(),]))")


def _tokenize(s: str) -> list[tuple[str, str]]:
    toks = []
    pos = 0
    s = s.rstrip()
    while pos < len(s):
        m = _TOKEN.match(s, pos)
        if not m or m.end() == pos:
            raise ParseError(f"unexpected character at {pos}: {s[pos:pos + 10]!r}")
        pos = m.end()
        if m.group(1):
            toks.append(("float", m.group(1)))
        elif m.group(2):
            toks.append(("int", m.group(2)))
        elif m.group(3):
            toks.append(("name", m.group(3)))
        elif m.group(4):
            toks.append(("family", m.group(4)[1:-1]))
        else:
            op = m.group(5)
            toks.append(("op", "^" if op == "**" else op))
    return toks


class _Parser:
    def __init__(self, text: str, dim: int | None):
        self.toks = _tokenize(text)
        self.pos = 0
        self.dim = dim

    def peek(self):
        return self.toks[self.pos] if self.pos < len(self.toks) else ("eof", "")

    def take(self, kind=None, val=None):
        t = self.peek()
        if (kind and t[0] != kind) or (val is not None and t[1] != val):
            raise ParseError(f"expected {val or kind}, got {t[1]!r}")
        self.pos += 1
        return t

    def expr(self):
        e = self.term()
        while self.peek() in (("op", "+"), ("op", "-")):
            op = self.take()[1]
            r = self.term()
            e = add(e, r) if op == "+" else add(e, mul(-1, r))
        return e

    def term(self):
        e = self.factor()
        while self.peek() in (("op", "*"), ("op", "/")):
            op = self.take()[1]
            r = self.factor()
            e = mul(e, r) if op == "*" else mul(e, pow_(r, -1))
        return e

    def factor(self):
        if self.peek() == ("op", "-"):
            self.take()
            return mul(-1, self.factor())
        if self.peek() == ("op", "+"):
            self.take()
            return self.factor()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek() == ("op", "^"):
            self.take()
            ex = self.factor()
            return pow_(base, ex)
        return base

    def args(self):
        self.take("op", "(")
        out = []
        if self.peek() == ("op", ")"):
            self.take()
            return out
        while True:
            t = self.peek()
            if t[0] == "family":
                self.take()
                out.append(("family", t[1]))
            else:
                out.append(self.expr())
            if self.peek() == ("op", ","):
                self.take()
                continue
            self.take("op", ")")
            return out

    def atom(self):
        kind, val = self.peek()
        if kind == "int":
            self.take()
            return const(int(val))
        if kind == "float":
            self.take()
            return const(float(val))
        if kind == "op" and val == "(":
            self.take()
            e = self.expr()
            self.take("op", ")")
            return e
        if kind == "name":
            self.take()
            if self.peek() == ("op", "("):
                return self.call(val)
            if val == "i":
                return I
            if val == "pi":
                return PI
            m = re.fullmatch(r"(zb|z|x|y)(\d+)", val)
            if m and int(m.group(2)) >= 1:
                return var(m.group(1), int(m.group(2)))
            raise ParseError(f"unknown identifier {val!r}")
        raise ParseError(f"unexpected token {val!r}")

    def _label(self, a):
        if isinstance(a, Const) and isinstance(a.value, ExactConst) and a.value.re.denominator == 1:
            return str(a.value.re.numerator)
        if isinstance(a, Var):
            return None
        raise ParseError("bad partition label")

    def call(self, name):
        if name in ("phi", "dphi"):
            return self.phi_call(name)
        a = self.args()
        if any(isinstance(t, tuple) for t in a):
            raise ParseError(f"{name}() does not take a family argument")
        if name in _FUNCS:
            self._arity(name, a, 1)
            return _func(name, a[0])
        if name == "sqrt":
            self._arity(name, a, 1)
            return sqrt(a[0])
        if name == "achi":
            self._arity(name, a, 1)
            return achi(a[0])
        if name in ("max", "min"):
            return _extremum(name, a)
        if name == "bump":
            if len(a) not in (2, 3):
                raise ParseError("bump(e, delta[, order])")
            d = complex(_const_value(a[1])).real
            o = int(complex(_const_value(a[2])).real) if len(a) == 3 else 0
            return bump(a[0], d, o)
        if name in ("norm2z", "norm2y"):
            if a:
                idxs = [int(complex(_const_value(t)).real) for t in a]
            elif self.dim:
                idxs = list(range(1, self.dim + 1))
            else:
                raise ParseError(f"{name}() without indices needs the ambient dimension")
            return _norm2(name[-1], idxs)
        raise ParseError(f"unknown function {name!r}")

    def phi_call(self, name):
        self.take("op", "(")
        t = self.take()
        if t[0] in ("int", "name"):
            label = t[1]
        else:
            raise ParseError("phi needs a label")
        self.take("op", ",")
        fam = self.take("family")[1]
        derivs = []
        while self.peek() == ("op", ","):
            self.take()
            nm = self.take("name")[1]
            derivs.append(_parse_var_name(nm))
        self.take("op", ")")
        if name == "phi" and derivs:
            raise ParseError("phi() takes no derivative list; use dphi()")
        return phi(fam, label, derivs)

    @staticmethod
    def _arity(name, a, k):
        if len(a) != k:
            raise ParseError(f"{name}() takes {k} argument(s)")


def _const_value(e):
    if not isinstance(e, Const):
        raise ParseError("expected a numeric constant")
    return e.value


def parse(text: str, dim: int | None = None) -> Expr:
    """Parse an expression string.  ``dim`` resolves ``norm2z()``/``norm2y()``."""
    if not isinstance(text, str):
        raise ParseError("expression must be a string")
    p = _Parser(text, dim)
    if not p.toks:
        raise ParseError("empty expression")
    e = p.expr()
    if p.pos != len(p.toks):
        raise ParseError(f"trailing input at token {p.toks[p.pos][1]!r}")
    return e


# ---------------------------------------------------------------------------
# evaluation


def evaluate(exprs: Sequence[Expr], Z: np.ndarray, check: bool = True) -> np.ndarray:
    """Evaluate several expressions at many points.

    ``Z`` has shape (N, n) with complex coordinates z_j; the result has shape
    (N, len(exprs)).  Shared subexpressions are computed once.
    """
    from ._program import compile_program, run_program

    Z = np.ascontiguousarray(np.atleast_2d(np.asarray(Z, dtype=complex)))
    prog = compile_program(tuple(as_expr(e) for e in exprs))
    if prog.dim > Z.shape[1]:
        raise ValueError(f"expression uses {prog.dim} coordinates, points have {Z.shape[1]}")
    out = run_program(prog, Z)
    if check and not np.all(np.isfinite(out)):
        bad = np.argwhere(~np.isfinite(out))[0]
        raise SingularPoint(f"non-finite value at point {Z[bad[0]].tolist()}")
    return out


def eval(e: Expr, point) -> complex:  # noqa: A001 - mirrors the operation name
    """Evaluate at one point given as complex coordinates (z_1, ..., z_n)."""
    Z = np.asarray(point, dtype=complex).reshape(1, -1)
    return complex(evaluate([as_expr(e)], Z)[0, 0])


# ---------------------------------------------------------------------------
# zero testing


@dataclass(frozen=True)
class ZeroCheck:
    """Outcome of a zero test; truthy iff the expression was judged zero."""

    is_zero: bool
    path: str
    max_abs: float = 0.0
    samples: int = 0

    def __bool__(self):
        return self.is_zero


def guards(e: Expr) -> list[Expr]:
    """Expressions whose zero sets are singular loci or interfaces of ``e``."""
    out = []
    for node in _postorder([e]):
        if isinstance(node, Pow) and (node.exp < 0 or node.exp.denominator != 1):
            out.append(node.base)
        elif isinstance(node, Achi):
            out.extend(node.arg.args if isinstance(node.arg, Extremum) else [node.arg])
        elif isinstance(node, Func) and node.name == "log":
            out.append(node.arg)
        elif isinstance(node, Phi):
            out.extend(family_from_key(node.family).guards())
    uniq = {g._digest: g for g in out if not isinstance(g, Const)}
    return list(uniq.values())


def default_points(n: int, count: int, radius: float = 2.0, skip: int = 1) -> np.ndarray:
    """Deterministic quasi-random points in the box [-radius, radius]^(2n)."""
    from scipy.stats import qmc

    h = qmc.Halton(d=2 * n, scramble=False)
    if skip:
        h.fast_forward(skip)
    u = h.random(count)
    v = (2.0 * u - 1.0) * radius
    return v[:, :n] + 1j * v[:, n:]


def sample_points(exprs: Sequence[Expr], n: int, count: int, accept: Callable[[np.ndarray], np.ndarray] | None = None,
                  radius: float = 2.0) -> np.ndarray:
    """Quasi-random points away from guards of ``exprs`` and accepted by ``accept``."""
    gs = []
    for e in exprs:
        gs.extend(guards(e))
    gs = list({g._digest: g for g in gs}.values())
    got = []
    total = 0
    skip = 1
    batch = max(4 * count, 64)
    while total < count and skip < 200 * count + 1000:
        Z = default_points(n, batch, radius, skip)
        skip += batch
        keep = np.ones(len(Z), bool)
        if accept is not None:
            keep &= accept(Z)
        if gs and keep.any():
            G = evaluate(gs, Z[keep], check=False)
            ok = np.all(np.isfinite(G) & (np.abs(G) >= GUARD_DISTANCE), axis=1)
            idx = np.flatnonzero(keep)
            keep[idx[~ok]] = False
        got.append(Z[keep])
        total += int(keep.sum())
    pts = np.concatenate(got) if got else np.zeros((0, n), complex)
    return pts[:count]


def _to_sympy(e: Expr):
    import sympy as sp

    syms: dict = {}

    def sym(name):
        if name not in syms:
            syms[name] = sp.Symbol(name)
        return syms[name]

    memo = {}
    for node in _postorder([e]):
        if isinstance(node, Const):
            c = node.value
            if isinstance(c, ExactConst):
                r = (sp.Rational(c.re.numerator, c.re.denominator) + sp.I * sp.Rational(c.im.numerator, c.im.denominator)) * sp.pi ** c.k
            else:
                r = sp.Float(c.real) + sp.I * sp.Float(c.imag)
        elif isinstance(node, Var):
            zj, zbj = sym(f"z{node.idx}"), sym(f"zb{node.idx}")
            r = {"z": zj, "zb": zbj, "x": (zj + zbj) / 2, "y": (zj - zbj) / (2 * sp.I)}[node.kind]
        elif isinstance(node, Add):
            r = sp.Add(*[memo[t._digest] for t in node.terms])
        elif isinstance(node, Mul):
            r = sp.Mul(*[memo[f._digest] for f in node.factors])
        elif isinstance(node, Pow):
            r = sp.Pow(memo[node.base._digest], sp.Rational(node.exp.numerator, node.exp.denominator))
        elif isinstance(node, Func):
            r = getattr(sp, node.name)(memo[node.arg._digest])
        elif isinstance(node, Norm2):
            r = expand_sym = _to_sympy(expand_macro(node))
            del expand_sym
        else:
            # opaque atoms: one symbol per distinct node
            r = sym("atom_" + node._digest.hex())
        memo[node._digest] = r
    return memo[e._digest]


def _symbolic_zero(e: Expr, max_nodes: int = 250) -> bool:
    if node_count(e) > max_nodes:
        return False
    try:
        import sympy as sp

        s = _to_sympy(e)
        if s == 0:
            return True
        r = sp.cancel(sp.together(sp.expand(s)))
        return r == 0
    except Exception:  # sympy failures mean "not proven", never "nonzero"
        return False


def simplify_zero(e: Expr, samples: int = 64, *, dim: int | None = None,
                  accept: Callable[[np.ndarray], np.ndarray] | None = None,
                  points: np.ndarray | None = None, symbolic: bool = True) -> ZeroCheck:
    """Decide whether ``e`` vanishes identically.

    Tried in order: structural zero after canonicalization, rational
    normal form (opaque atoms as symbols), then sampling at ``samples``
    quasi-random points away from singular loci.  Magnitudes in the band
    (1e-10, 1e-6] raise :class:`Inconclusive`.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    e = as_expr(e)
    if e.is_zero:
        return ZeroCheck(True, "structural")
    if symbolic and _symbolic_zero(e):
        return ZeroCheck(True, "symbolic")
    n = dim or max(free_dims(e), 1)
    if points is None:
        points = sample_points([e], n, samples, accept)
    if len(points) == 0:
        raise Inconclusive("no admissible sample points")
    vals = evaluate([e], points, check=False)[:, 0]
    finite = np.isfinite(vals)
    if not finite.any():
        raise Inconclusive("expression is non-finite at every sample point")
    m = float(np.max(np.abs(vals[finite])))
    if m <= SYMBOLIC_ZERO_TOL:
        return ZeroCheck(True, "sampling", m, int(finite.sum()))
    if m <= INCONCLUSIVE_TOL:
        raise Inconclusive(f"sampled magnitude {m:.3e} lies in the inconclusive band")
    return ZeroCheck(False, "sampling", m, int(finite.sum()))
