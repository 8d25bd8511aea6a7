"""Differential forms on C^n (or R^l) with expression coefficients.

A form is a map from basis monomials to coefficients.  In the complex basis a
monomial is ``dz_I ^ dzb_J`` (all dz factors first, each block sorted); in
the real basis it is ``dx_I ^ dy_J``.  Permutation signs are folded into the
coefficients on construction, so structural equality of forms is meaningful.
"""
from __future__ import annotations

import math
from fractions import Fraction
from typing import Callable, Iterable, Mapping

import numpy as np

from . import symexpr as se
from .errors import DimensionMismatch, Inconclusive, MixedDegree, SingularOnSlice, SingularPoint
from .symexpr import ExactConst, Expr, ZeroCheck

Key = tuple[tuple[int, ...], tuple[int, ...]]


def _merge(a: tuple[int, ...], b: tuple[int, ...]):
    """Sign and sorted union of two disjoint index tuples (None if they overlap)."""
    if set(a) & set(b):
        return 0, None
    seq = list(a) + list(b)
    # parity of the sorting permutation = number of inversions
    inv = sum(1 for i in range(len(seq)) for j in range(i + 1, len(seq)) if seq[i] > seq[j])
    return (-1 if inv % 2 else 1), tuple(sorted(seq))


def sort_sign(seq: Iterable[int]):
    """Sign of the permutation sorting ``seq`` (0 if it has repeats) and the sorted tuple."""
    seq = list(seq)
    if len(set(seq)) != len(seq):
        return 0, None
    inv = sum(1 for i in range(len(seq)) for j in range(i + 1, len(seq)) if seq[i] > seq[j])
    return (-1 if inv % 2 else 1), tuple(sorted(seq))


class Form:
    """Sum of coefficient * monomial terms.

    ``basis`` is ``"complex"`` (dz/dzb) or ``"real"`` (dx/dy).  Terms may have
    mixed degrees; :meth:`bidegree` raises :class:`MixedDegree` for those.
    """

    __slots__ = ("dim", "basis", "terms")

    def __init__(self, dim: int, terms: Mapping[Key, object] | None = None, basis: str = "complex"):
        if basis not in ("complex", "real"):
            raise ValueError(f"unknown basis {basis!r}")
        self.dim = int(dim)
        self.basis = basis
        clean: dict[Key, Expr] = {}
        for (I, J), c in (terms or {}).items():
            c = se.as_expr(c)
            if c.is_zero:
                continue
            s1, I2 = sort_sign(I)
            s2, J2 = sort_sign(J)
            if not s1 or not s2:
                continue
            for k in I2 + J2:
                if not 1 <= k <= self.dim:
                    raise DimensionMismatch(f"index {k} outside 1..{self.dim}")
            key = (I2, J2)
            c = c if s1 * s2 == 1 else se.mul(-1, c)
            clean[key] = se.add(clean[key], c) if key in clean else c
        self.terms = {k: v for k, v in sorted(clean.items()) if not v.is_zero}

    # constructors
    @classmethod
    def zero(cls, dim: int, basis: str = "complex") -> "Form":
        return cls(dim, {}, basis)

    @classmethod
    def scalar(cls, dim: int, c, basis: str = "complex") -> "Form":
        return cls(dim, {((), ()): c}, basis)

    @classmethod
    def dz(cls, i: int, dim: int) -> "Form":
        return cls(dim, {((i,), ()): 1})

    @classmethod
    def dzb(cls, j: int, dim: int) -> "Form":
        return cls(dim, {((), (j,)): 1})

    @classmethod
    def dx(cls, i: int, dim: int) -> "Form":
        return cls(dim, {((i,), ()): 1}, "real")

    @classmethod
    def dy(cls, j: int, dim: int) -> "Form":
        return cls(dim, {((), (j,)): 1}, "real")

    # basic algebra
    def _check(self, other: "Form"):
        if self.dim != other.dim:
            raise DimensionMismatch(f"dimension {self.dim} vs {other.dim}")

    def __add__(self, other: "Form") -> "Form":
        a, b = _common_basis(self, other)
        terms = dict(a.terms)
        for k, v in b.terms.items():
            terms[k] = se.add(terms[k], v) if k in terms else v
        return Form(a.dim, terms, a.basis)

    def __sub__(self, other: "Form") -> "Form":
        return self + (-other)

    def __neg__(self) -> "Form":
        return self.scale(-1)

    def scale(self, c) -> "Form":
        c = se.as_expr(c)
        return Form(self.dim, {k: se.mul(c, v) for k, v in self.terms.items()}, self.basis)

    def __mul__(self, c) -> "Form":
        if isinstance(c, Form):
            return wedge(self, c)
        return self.scale(c)

    __rmul__ = scale

    def __xor__(self, other: "Form") -> "Form":
        return wedge(self, other)

    def __eq__(self, other):
        return (isinstance(other, Form) and self.dim == other.dim and self.basis == other.basis
                and self.terms == other.terms)

    def __hash__(self):
        return hash((self.dim, self.basis, tuple(self.terms.items())))

    def __repr__(self):
        a, b = ("dz", "dzb") if self.basis == "complex" else ("dx", "dy")
        parts = []
        for (I, J), c in self.terms.items():
            mono = "^".join([f"{a}{i}" for i in I] + [f"{b}{j}" for j in J])
            try:
                cs = se.to_string(c)
            except Exception:
                cs = f"<{c.TAG}>"
            parts.append(f"({cs})" + (f"*{mono}" if mono else ""))
        return f"Form[{self.dim},{self.basis}](" + (" + ".join(parts) or "0") + ")"

    # degree bookkeeping
    @property
    def is_zero(self) -> bool:
        return not self.terms

    def degrees(self) -> set[tuple[int, int]]:
        return {(len(I), len(J)) for I, J in self.terms}

    def bidegree(self) -> tuple[int, int] | None:
        """(p, q) of a homogeneous form; None for the zero form."""
        ds = self.degrees()
        if not ds:
            return None
        if len(ds) > 1:
            raise MixedDegree(f"form has components of bidegrees {sorted(ds)}")
        return next(iter(ds))

    def degree(self) -> int | None:
        ds = {p + q for p, q in self.degrees()}
        if not ds:
            return None
        if len(ds) > 1:
            raise MixedDegree(f"form has components of degrees {sorted(ds)}")
        return next(iter(ds))

    def part(self, p: int, q: int) -> "Form":
        return Form(self.dim, {k: v for k, v in self.terms.items() if (len(k[0]), len(k[1])) == (p, q)}, self.basis)

    def map_coeffs(self, fn: Callable[[Expr], Expr]) -> "Form":
        return Form(self.dim, {k: fn(v) for k, v in self.terms.items()}, self.basis)

    def coeffs(self) -> list[Expr]:
        return list(self.terms.values())

    def coeff(self, I=(), J=()) -> Expr:
        s1, I2 = sort_sign(I)
        s2, J2 = sort_sign(J)
        if not s1 or not s2:
            return se.ZERO
        c = self.terms.get((I2, J2), se.ZERO)
        return c if s1 * s2 == 1 else se.mul(-1, c)


def _common_basis(a: Form, b: Form):
    a._check(b)
    if a.basis == b.basis:
        return a, b
    return to_complex(a), to_complex(b)


def wedge(a: Form, b: Form) -> Form:
    """Exterior product with sorted-index normalization."""
    a, b = _common_basis(a, b)
    out: dict[Key, Expr] = {}
    for (I1, J1), c1 in a.terms.items():
        for (I2, J2), c2 in b.terms.items():
            s1, I = _merge(I1, I2)
            if I is None:
                continue
            s2, J = _merge(J1, J2)
            if J is None:
                continue
            # move dz_I2 across dzb_J1
            sgn = s1 * s2 * (-1 if (len(J1) * len(I2)) % 2 else 1)
            c = se.mul(sgn, c1, c2)
            key = (I, J)
            out[key] = se.add(out[key], c) if key in out else c
    return Form(a.dim, out, a.basis)


def wedge_all(forms: Iterable[Form], dim: int | None = None) -> Form:
    forms = list(forms)
    if not forms:
        return Form.scalar(dim or 0, 1)
    acc = forms[0]
    for f in forms[1:]:
        acc = wedge(acc, f)
    return acc


def to_complex(a: Form) -> Form:
    """Rewrite a real-basis form with dx = (dz + dzb)/2, dy = (dz - dzb)/(2i)."""
    if a.basis == "complex":
        return a
    n = a.dim
    half = se.const(Fraction(1, 2))
    ihalf = se.const(ExactConst(0, Fraction(-1, 2)))  # 1/(2i)
    dx = {i: Form(n, {((i,), ()): half, ((), (i,)): half}) for i in range(1, n + 1)}
    dy = {i: Form(n, {((i,), ()): ihalf, ((), (i,)): se.mul(-1, ihalf)}) for i in range(1, n + 1)}
    out = Form.zero(n)
    for (I, J), c in a.terms.items():
        out = out + wedge_all([Form.scalar(n, c)] + [dx[i] for i in I] + [dy[j] for j in J])
    return out


# ---------------------------------------------------------------------------
# differentials


def _dpart(a: Form, kind: str) -> Form:
    n = a.dim
    out: dict[Key, Expr] = {}
    for (I, J), c in a.terms.items():
        for k in range(1, n + 1):
            dc = se.diff(c, f"{kind}{k}")
            if dc.is_zero:
                continue
            if kind in ("z", "x"):
                if k in I:
                    continue
                s, I2 = _merge((k,), I)
                key = (I2, J)
            else:
                if k in J:
                    continue
                s, J2 = _merge((k,), J)
                # the new dzb_k / dy_k passes through the |I| leading factors
                s *= -1 if len(I) % 2 else 1
                key = (I, J2)
            term = se.mul(s, dc)
            out[key] = se.add(out[key], term) if key in out else term
    return Form(n, out, a.basis)


def dbar(a: Form) -> Form:
    a = to_complex(a)
    return _dpart(a, "zb")


def del_(a: Form) -> Form:
    a = to_complex(a)
    return _dpart(a, "z")


def d(a: Form) -> Form:
    if a.basis == "real":
        return _dpart(a, "x") + _dpart(a, "y")
    return _dpart(a, "z") + _dpart(a, "zb")


# ---------------------------------------------------------------------------
# projection to (0, q) components


def _coeffs_in_z(c: Expr) -> Expr:
    """Rewrite bare x_j, y_j variables through z_j and zb_j."""
    half = se.const(Fraction(1, 2))
    ihalf = se.const(ExactConst(0, Fraction(-1, 2)))

    def leaf(node):
        if isinstance(node, se.Var) and node.kind == "x":
            return se.mul(half, se.add(se.z(node.idx), se.zb(node.idx)))
        if isinstance(node, se.Var) and node.kind == "y":
            return se.mul(ihalf, se.add(se.z(node.idx), se.mul(-1, se.zb(node.idx))))
        return None

    return se._transform(c, leaf)


def rho(a: Form, rewrite: bool = True) -> Form:
    """(0, q)-component of a (real or complex) form.

    dx_j contributes dzb_j/2 and dy_j contributes (i/2) dzb_j.  With
    ``rewrite`` the bare x/y variables in coefficients are expressed through
    z and zb (the values are unchanged either way).
    """
    out = to_complex(a)
    out = Form(out.dim, {k: v for k, v in out.terms.items() if not k[0]}, "complex")
    if rewrite:
        out = out.map_coeffs(_coeffs_in_z)
    return out


# ---------------------------------------------------------------------------
# kernels and constants


def angular_constant(l: int) -> ExactConst:
    """C_l: (k-1)!/(2 pi^k) for l = 2k, (2k)!/(2^l pi^k k!) for l = 2k+1."""
    if l < 1:
        raise ValueError("l >= 1")
    if l % 2 == 0:
        k = l // 2
        return ExactConst(Fraction(math.factorial(k - 1), 2), 0, -k)
    k = (l - 1) // 2
    return ExactConst(Fraction(math.factorial(2 * k), 2 ** l * math.factorial(k)), 0, -k)


def bm_constant(n: int) -> ExactConst:
    """C'_n = (-1)^(n(n-1)/2) (n-1)! / (2 pi i)^n."""
    if n < 1:
        raise ValueError("n >= 1")
    sign = -1 if (n * (n - 1) // 2) % 2 else 1
    two_pi_i = ExactConst(0, 2, 1)
    return ExactConst(sign * math.factorial(n - 1)).mul(two_pi_i.power(-n))


def holo_volume(n: int) -> Form:
    """dz_1 ^ ... ^ dz_n."""
    return Form(n, {(tuple(range(1, n + 1)), ()): 1})


def real_volume(n: int, kind: str = "x") -> Form:
    """dx_1 ^ ... ^ dx_n (or dy_...)."""
    key = (tuple(range(1, n + 1)), ()) if kind == "x" else ((), tuple(range(1, n + 1)))
    return Form(n, {key: 1}, "real")


def angular_form(l: int, kind: str = "x", dim: int | None = None, offset: int = 0) -> Form:
    """The normalized closed angular (l-1)-form on R^l minus the origin.

    Coordinates are x_{offset+1..offset+l} (or y_... with ``kind="y"``), so the
    same kernel can live on the imaginary part of C^n.
    """
    dim = dim or (l + offset)
    idx = list(range(offset + 1, offset + l + 1))
    if kind == "y":
        r2 = se.norm2y(idx)
    else:
        r2 = se.add(*[se.pow_(se.x(i), 2) for i in idx])
    scale = se.mul(se.const(angular_constant(l)), se.pow_(r2, Fraction(-l, 2)))
    terms = {}
    for pos, i in enumerate(idx):
        rest = tuple(j for j in idx if j != i)
        coef = se.mul(-1 if pos % 2 else 1, se.var(kind, i), scale)
        terms[(rest, ()) if kind == "x" else ((), rest)] = coef
    return Form(dim, terms, "real")


def bm_kernel0(n: int) -> Form:
    """The (0, n-1) Bochner-Martinelli factor C'_n sum (-1)^(i-1) zb_i dzb_[i^] / |z|^(2n)."""
    scale = se.mul(se.const(bm_constant(n)), se.pow_(se.norm2z(range(1, n + 1)), -n))
    terms = {}
    for i in range(1, n + 1):
        rest = tuple(j for j in range(1, n + 1) if j != i)
        terms[((), rest)] = se.mul(-1 if (i - 1) % 2 else 1, se.zb(i), scale)
    return Form(n, terms)


def bm_kernel(n: int) -> Form:
    return wedge(bm_kernel0(n), holo_volume(n))


def cauchy_kernel0(n: int) -> Form:
    c = se.const(ExactConst(0, 2, 1).power(-n))
    return Form.scalar(n, se.mul(c, *[se.pow_(se.z(i), -1) for i in range(1, n + 1)]))


def cauchy_kernel(n: int) -> Form:
    return wedge(cauchy_kernel0(n), holo_volume(n))


# ---------------------------------------------------------------------------
# restriction


def restrict_to_slice(a: Form, j: int = 1, reindex: bool = True) -> Form:
    """Pull back to the coordinate hyperplane {z_j = 0}.

    Terms containing dz_j/dzb_j (dx_j/dy_j) are dropped and z_j = 0 is
    substituted.  With ``reindex`` the remaining coordinates are renumbered
    1..n-1 and the result lives in dimension n-1.
    """
    n = a.dim
    if not 1 <= j <= n:
        raise DimensionMismatch(f"slice index {j} outside 1..{n}")
    kept = {}
    for (I, J), c in a.terms.items():
        if j in I or j in J:
            continue
        try:
            kept[(I, J)] = se.slice_zero(c, j)
        except SingularPoint as exc:
            raise SingularOnSlice(f"coefficient is singular on {{z{j} = 0}}: {exc}") from exc
    out = Form(n, kept, a.basis)
    _check_slice_finite(out, j)
    if not reindex:
        return out
    m = {k: (k if k < j else k - 1) for k in range(1, n + 1) if k != j}
    terms = {}
    for (I, J), c in out.terms.items():
        terms[(tuple(m[i] for i in I), tuple(m[i] for i in J))] = se.reindex(c, m)
    return Form(n - 1, terms, a.basis)


def _check_slice_finite(a: Form, j: int, count: int = 16):
    if a.is_zero:
        return
    pts = se.default_points(a.dim, count, 1.5, skip=7)
    pts[:, j - 1] = 0
    vals = se.evaluate(a.coeffs(), pts, check=False)
    dead = ~np.isfinite(vals).any(axis=0)
    if dead.any():
        raise SingularOnSlice(f"coefficient is singular everywhere on {{z{j} = 0}}")


# ---------------------------------------------------------------------------
# zero testing of whole forms


def check_zero(a: Form, samples: int = 64, *, accept=None, points: np.ndarray | None = None,
               symbolic: bool = True) -> ZeroCheck:
    """Zero test for a form: every coefficient must vanish."""
    if a.is_zero:
        return ZeroCheck(True, "structural")
    rest = []
    for c in a.coeffs():
        if symbolic and se._symbolic_zero(c):
            continue
        rest.append(c)
    if not rest:
        return ZeroCheck(True, "symbolic")
    if points is None:
        points = se.sample_points(rest, a.dim, samples, accept)
    vals = se.evaluate(rest, points, check=False)
    finite = np.isfinite(vals)
    if not finite.any():
        raise Inconclusive("form is non-finite at every sample point")
    m = float(np.max(np.abs(np.where(finite, vals, 0))))
    if m <= se.SYMBOLIC_ZERO_TOL:
        return ZeroCheck(True, "sampling", m, len(points))
    if m <= se.INCONCLUSIVE_TOL:
        raise Inconclusive(f"sampled magnitude {m:.3e} lies in the inconclusive band")
    return ZeroCheck(False, "sampling", m, len(points))


def max_abs(a: Form, points: np.ndarray) -> float:
    """Largest coefficient magnitude of ``a`` over the given points (non-finite values skipped)."""
    if a.is_zero:
        return 0.0
    vals = se.evaluate(a.coeffs(), points, check=False)
    vals = vals[np.isfinite(vals)]
    return float(np.max(np.abs(vals))) if vals.size else 0.0
