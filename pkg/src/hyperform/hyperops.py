"""Hyperforms and the operations on them.

A hyperform on R^n is a relative Dolbeault cocycle (tau1, tau01) of
bidegree (p, n) together with an orientation sign and a description of its
support in R^n.  Constructors here build explicit representatives; pairing
and integration live in :mod:`hyperform.quadpair`.
"""
from __future__ import annotations

import math
from itertools import product as iproduct
from typing import Sequence

import numpy as np

from . import formcalc as fc
from . import quadpair as qp
from . import symexpr as se
from .errors import (DimensionMismatch, EvalSingular, ModeUnavailable, NotExtendable, NotProper,
                     RepresentativeHasTau1, UnsupportedProjection)
from .formcalc import Form
from .partitions import ConePartition, ConeSpec, ProductPartition, restriction_partition
from .relcochain import CoveringSpec, RelCochain, cup, is_cocycle

SUPPORT_ZERO_TOL = 1e-10


class SupportSpec:
    """Subset of R^n carrying the hyperform: ``point`` ({0}), ``ball`` (compact) or ``all``."""

    __slots__ = ("kind", "radius")

    def __init__(self, kind: str = "all", radius: float | None = None):
        if kind not in ("point", "ball", "all"):
            raise ValueError(f"unknown support kind {kind!r}")
        self.kind = kind
        self.radius = float(radius) if radius is not None else None
        if kind == "ball" and not (self.radius and self.radius > 0):
            raise ValueError("ball support needs a positive radius")

    @property
    def compact(self) -> bool:
        return self.kind != "all"

    def union(self, other: "SupportSpec") -> "SupportSpec":
        if self.kind == "all" or other.kind == "all":
            return SupportSpec("all")
        if self.kind == "point":
            return other
        if other.kind == "point":
            return self
        return SupportSpec("ball", max(self.radius, other.radius))

    def to_dict(self) -> dict:
        d: dict = {"kind": self.kind}
        if self.kind == "ball":
            d["radius"] = self.radius
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SupportSpec":
        return cls(d.get("kind", "all"), d.get("radius"))

    def __eq__(self, other):
        return isinstance(other, SupportSpec) and self.to_dict() == other.to_dict()

    def __hash__(self):
        return hash((self.kind, self.radius))

    def __repr__(self):
        return f"SupportSpec({self.to_dict()})"


class Hyperform:
    """Class of a (p, n) relative Dolbeault cocycle, tensored with an orientation sign."""

    __slots__ = ("cochain", "orient", "p", "n", "support")

    def __init__(self, cochain: RelCochain, orient: int = 1, support: SupportSpec | None = None):
        self.cochain = cochain
        self.orient = 1 if orient >= 0 else -1
        self.p, q = cochain.bidegree
        self.n = cochain.dim
        if q != self.n:
            raise DimensionMismatch(f"hyperform cochain must have q = n = {self.n}, got {q}")
        self.support = support or SupportSpec("all")

    @property
    def dim(self) -> int:
        return self.n

    @property
    def tau1(self) -> Form:
        return self.cochain.sigma1

    @property
    def tau01(self) -> Form:
        return self.cochain.sigma01

    def _align(self, other: "Hyperform"):
        if (self.p, self.n) != (other.p, other.n):
            raise DimensionMismatch(f"cannot combine (p, n) = {(self.p, self.n)} and {(other.p, other.n)}")
        # bring the second operand to the first orientation
        return other.cochain if other.orient == self.orient else -other.cochain

    def __add__(self, other: "Hyperform") -> "Hyperform":
        c = self.cochain + self._align(other)
        return Hyperform(c, self.orient, self.support.union(other.support))

    def __sub__(self, other: "Hyperform") -> "Hyperform":
        c = self.cochain - self._align(other)
        return Hyperform(c, self.orient, self.support.union(other.support))

    def __neg__(self) -> "Hyperform":
        return Hyperform(-self.cochain, self.orient, self.support)

    def scale(self, c) -> "Hyperform":
        return Hyperform(self.cochain.scale(c), self.orient, self.support)

    def with_orient(self, orient: int) -> "Hyperform":
        return Hyperform(self.cochain, orient, self.support)

    def with_support(self, support: SupportSpec) -> "Hyperform":
        return Hyperform(self.cochain, self.orient, support)

    def __repr__(self):
        return f"Hyperform(p={self.p}, n={self.n}, orient={self.orient}, support={self.support.kind}, {self.cochain!r})"


def _expr(f, n: int) -> se.Expr:
    return se.parse(f, n) if isinstance(f, str) else se.as_expr(f)


def _sign(k: int) -> int:
    return -1 if k % 2 else 1


# ---------------------------------------------------------------------------
# delta


def delta(n: int) -> Hyperform:
    """delta(x) on R^n: (0, -(-1)^(n(n+1)/2) beta_n^0)."""
    if n < 1:
        raise DimensionMismatch("n >= 1")
    s = -_sign(n * (n + 1) // 2)
    c = RelCochain(CoveringSpec.point(n), (0, n), None, fc.bm_kernel0(n).scale(s))
    return Hyperform(c, 1, SupportSpec("point"))


def delta_form(n: int) -> Hyperform:
    """The delta n-form: the same representative with the kernel beta_n = beta_n^0 ^ dz_1..dz_n."""
    if n < 1:
        raise DimensionMismatch("n >= 1")
    s = -_sign(n * (n + 1) // 2)
    c = RelCochain(CoveringSpec.point(n), (n, n), None, fc.bm_kernel(n).scale(s))
    return Hyperform(c, 1, SupportSpec("point"))


# ---------------------------------------------------------------------------
# embedding of real-analytic functions and forms


def thom_rho(n: int) -> Form:
    """The (0, n-1) part of the angular form psi_n in the imaginary directions, in z and zb."""
    return fc.rho(fc.angular_form(n, kind="y"))


def _tube_points(n: int, count: int = 64, cone: ConeSpec | None = None) -> np.ndarray:
    Z = se.default_points(n, 4 * count, 1.5, skip=11)
    keep = np.linalg.norm(Z.imag, axis=1) > 1e-3
    if cone is not None and not cone.is_full:
        keep &= cone.contains(Z.imag, 1e-3)
    return Z[keep][:count]


def _real_points(n: int, count: int = 64) -> np.ndarray:
    """Real sample points plus the origin and simple points on the axes."""
    R = se.default_points(n, count, 1.5, skip=13).real
    axis = [np.zeros(n)]
    for i in range(n):
        for t in (-1.0, -0.5, 0.5, 1.0):
            v = np.zeros(n)
            v[i] = t
            axis.append(v)
    return np.vstack([R, np.array(axis)]).astype(complex)


def _check_finite(exprs, Z, err, what: str):
    if not len(exprs) or not len(Z):
        return
    vals = se.evaluate(list(exprs), Z, check=False)
    if not np.all(np.isfinite(vals)):
        raise err(f"{what} is not finite on the sampled tube")


def embed_form(omega, n: int | None = None) -> Hyperform:
    """Real-analytic p-form omega(x) -> (0, -rho(psi_n) ^ omega(z))."""
    if isinstance(omega, qp.Density):
        omega = omega.form
    if not isinstance(omega, Form):
        omega = Form.scalar(n, _expr(omega, n), "real")
    n = omega.dim
    w = qp.Density(omega).complexified()
    pts = np.vstack([_tube_points(n), _real_points(n)])
    _check_finite(w.coeffs(), pts, NotExtendable, "holomorphic extension")
    p = 0 if w.is_zero else (w.degree() or 0)
    c = RelCochain(CoveringSpec.real(n), (p, n), None, fc.wedge(thom_rho(n), w).scale(-1))
    return Hyperform(c, 1, SupportSpec("all"))


def embed_real_analytic(f, n: int) -> Hyperform:
    """Real-analytic function f -> (0, -f(z) rho(psi_n))."""
    return embed_form(Form.scalar(n, _expr(f, n), "real"))


# ---------------------------------------------------------------------------
# boundary values


def bv_kernel(cone: ConeSpec, delta: float | None = None) -> Form:
    """nu01 = sgn det(eta) (-1)^n (n-1)! achi_(H_{n+1}) dbar phi_1 ^ ... ^ dbar phi_{n-1}."""
    n = cone.n
    fam = ConePartition.for_cone(cone, delta=delta) if delta else ConePartition.for_cone(cone)
    sdet = 1 if np.linalg.det(cone.etas) > 0 else -1
    last = fam.etas[n]
    lin = se.add(*[se.mul(se.const(float(t)), se.y(i)) for t, i in zip(last, fam.coords) if t != 0])
    chi = se.achi(lin)
    wedges = [fam.dbar_phi(str(k), n) for k in range(1, n)]
    scalar = se.mul(sdet * _sign(n) * math.factorial(n - 1), chi)
    return fc.wedge_all([Form.scalar(n, scalar)] + wedges)


def boundary_value(f, cone: ConeSpec, n: int | None = None) -> Hyperform:
    """b(f) = (0, f rho(nu01)) for f holomorphic on the tube over the cone.

    The full cone gives the embedding of f.
    """
    n = n or cone.n
    if cone.n != n:
        raise DimensionMismatch(f"cone in R^{cone.n} for n = {n}")
    fe = _expr(f, n)
    if cone.is_full:
        return embed_form(Form.scalar(n, fe, "real"))
    _check_finite([fe], _tube_points(n, cone=cone), EvalSingular, "f")
    nu = bv_kernel(cone)
    c = RelCochain(CoveringSpec.real(n), (0, n), None, nu.scale(fe))
    return Hyperform(c, 1, SupportSpec("all"))


# ---------------------------------------------------------------------------
# module structure and differentials


def mult(f, u: Hyperform) -> Hyperform:
    """(f(z) tau1, f(z) tau01) for a real-analytic f."""
    fz = se.complexify(_expr(f, u.n))
    pts = se.sample_points([fz], u.n, 32, u.cochain.covering.in_v01)
    _check_finite([fz], pts, EvalSingular, "f")
    return Hyperform(u.cochain.scale(fz), u.orient, u.support)


def partial_derivative(i: int, u: Hyperform) -> Hyperform:
    """Coefficient-wise d/dz_i of both components."""
    if not 1 <= i <= u.n:
        raise DimensionMismatch(f"derivative index {i} outside 1..{u.n}")
    v = f"z{i}"
    c = u.cochain.map_forms(lambda F: fc.to_complex(F).map_coeffs(lambda e: se.diff(e, v)))
    return Hyperform(c, u.orient, u.support)


def hyper_d(u: Hyperform) -> Hyperform:
    """(-1)^n (del tau1, -del tau01), of bidegree (p+1, n)."""
    s = _sign(u.n)
    c = u.cochain
    out = RelCochain(c.covering, (u.p + 1, u.n), fc.del_(c.sigma1).scale(s), fc.del_(c.sigma01).scale(-s))
    return Hyperform(out, u.orient, u.support)


def cutoff_representative(u: Hyperform, cutoff: "qp.Cutoff") -> Hyperform:
    """(chi tau1 + dbar chi ^ tau01, chi tau01); equals u near the plateau of chi."""
    return Hyperform(cutoff.apply(u.cochain), u.orient, u.support)


# ---------------------------------------------------------------------------
# external products


def _shift_form(F: Form, offset: int, dim: int) -> Form:
    F = fc.to_complex(F)
    if offset == 0 and F.dim == dim:
        return F
    m = {j: j + offset for j in range(1, F.dim + 1)}
    terms = {}
    for (I, J), c in F.terms.items():
        terms[(tuple(i + offset for i in I), tuple(j + offset for j in J))] = se.reindex(c, m)
    return Form(dim, terms)


def _block_kind(u: Hyperform) -> str:
    return "z" if u.cochain.covering.kind == "point" else "y"


def _tau_alpha(alpha, t1, t01, deg):
    """tau_alpha: sign(perm) (-1)^sigma(alpha) w_1 ^ ... ^ w_l, w_j = tau_{j,01} if j in alpha else tau_{j,1}."""
    s, srt = fc.sort_sign(alpha)
    if not s:
        return None
    k = len(srt)
    sig = k * (k - 1) // 2 + sum(sum(deg[i] for i in range(a)) for a in srt)
    ws = [t01[j] if j in srt else t1[j] for j in range(len(t1))]
    if any(w.is_zero for w in ws):
        return None
    return fc.wedge_all(ws).scale(s * _sign(sig))


def external_product(us: Sequence[Hyperform], mode: str = "general") -> Hyperform:
    """u_1 x ... x u_l on R^(n_1 + ... + n_l).

    ``stein``: (0, (-1)^e (l-1)! dbar phi_1 ^ ... ^ dbar phi_{l-1} ^ tau_{1,01} ^ ... ^ tau_{l,01})
    with e = l(l-1)/2 + sum_k (l-k)(n_k+p_k); needs tau_{k,1} = 0.
    ``general``: kappa1 = tau_{1,1} ^ ... ^ tau_{l,1}, kappa01 = sum_i phi_i kappa_i.
    """
    us = list(us)
    if not us:
        raise DimensionMismatch("empty product")
    if len(us) == 1:
        return us[0]
    l = len(us)
    dims = [u.n for u in us]
    n = sum(dims)
    offs = [sum(dims[:k]) for k in range(l)]
    blocks = [(_block_kind(u), tuple(range(offs[k] + 1, offs[k] + dims[k] + 1))) for k, u in enumerate(us)]
    fam = ProductPartition(blocks)
    t1 = [_shift_form(u.tau1, offs[k], n) for k, u in enumerate(us)]
    t01 = [_shift_form(u.tau01, offs[k], n) for k, u in enumerate(us)]
    deg = [u.n + u.p for u in us]
    p = sum(u.p for u in us)
    dphi = [fam.dbar_phi(str(k + 1), n) for k in range(l)]
    phis = [fam.phi(str(k + 1)) for k in range(l)]
    cov = CoveringSpec.product(blocks)
    orient = int(np.prod([u.orient for u in us]))
    sup = SupportSpec("point") if all(u.support.kind == "point" for u in us) else (
        SupportSpec("all") if any(u.support.kind == "all" for u in us) else
        SupportSpec("ball", math.sqrt(sum((u.support.radius or 0.0) ** 2 for u in us))))

    if mode == "stein":
        if any(not t.is_zero for t in t1):
            raise ModeUnavailable("stein mode needs tau_{k,1} = 0 for every factor")
        e = l * (l - 1) // 2 + sum((l - k) * deg[k - 1] for k in range(1, l))
        k01 = fc.wedge_all(dphi[: l - 1] + t01).scale(_sign(e) * math.factorial(l - 1))
        return Hyperform(RelCochain(cov, (p, n), None, k01), orient, sup)
    if mode != "general":
        raise ValueError(f"unknown mode {mode!r}")

    kappa1 = fc.wedge_all(t1)
    kappa01 = Form.zero(n)
    rng = range(l)
    for i in rng:
        ki = Form.zero(n)
        for beta in iproduct(rng, repeat=l - 1):
            ta = _tau_alpha(beta + (i,), t1, t01, deg)
            if ta is not None:
                ki = ki + fc.wedge_all([dphi[b] for b in beta] + [ta])
        for k in range(0, l - 1):
            for beta in iproduct(rng, repeat=k):
                db = fc.wedge_all([dphi[b] for b in beta], n)
                if not beta or not db.is_zero:
                    inner = Form.zero(n)
                    for lam in rng:
                        seq = (lam,) + beta + (i,)
                        for j in range(1, k + 2):
                            alpha = seq[:j] + seq[j + 1:]
                            ta = _tau_alpha(alpha, t1, t01, deg)
                            if ta is not None:
                                inner = inner + ta.scale(se.mul(_sign(j + 1), phis[lam]))
                    ki = ki + fc.wedge(db, inner)
        kappa01 = kappa01 + ki.scale(phis[i])
    return Hyperform(RelCochain(cov, (p, n), kappa1, kappa01), orient, sup)


# ---------------------------------------------------------------------------
# integration along fibers


def fiber_integrate(u: Hyperform, d: int = 1, *, radius: float = 1.0, nodes: int = 48, density: bool = True) -> Hyperform:
    """Integrate along the first d coordinates onto R^(n-d).

    With ``density`` the standard fiber density dz_1 ^ ... ^ dz_d is attached
    first (cup on the right).  The result is
    (-1)^((m(m+1) - n(n+1))/2) (int_D1 tau1 + (-1)^(m+p+1) int_dD1 tau01, int_D1 tau01)
    over the fiber polydisk D1 of the given radius; its coefficients are
    quadrature closures in the base variables.
    """
    m = u.n
    if not 1 <= d < m:
        raise UnsupportedProjection(f"fiber dimension {d} must lie in 1..{m - 1}")
    if not u.support.compact:
        raise NotProper("support is not proper over the base")
    if u.support.kind == "ball" and u.support.radius >= radius:
        raise NotProper("fiber disk must contain the support")
    c = u.cochain
    if density:
        c = cup(c, Form(m, {(tuple(range(1, d + 1)), ()): 1}))
    p = c.bidegree[0]
    if p < d:
        raise UnsupportedProjection(f"bidegree p={p} is below the fiber dimension {d}")
    n = m - d
    s = _sign((m * (m + 1) - n * (n + 1)) // 2)
    bs = _sign(m + p + 1)
    tag = f"{id(u):x}"
    vol1 = qp.disk_partial_integral(c.sigma1, d, radius, part="volume", nodes=nodes, tag=tag + "a")
    bnd01 = qp.disk_partial_integral(c.sigma01, d, radius, part="boundary", nodes=nodes, tag=tag + "b")
    vol01 = qp.disk_partial_integral(c.sigma01, d, radius, part="volume", nodes=nodes, tag=tag + "c")
    tau1 = (vol1 + bnd01.scale(bs)).scale(s)
    tau01 = vol01.scale(s)
    sup = SupportSpec("point") if u.support.kind == "point" else SupportSpec("ball", u.support.radius)
    cov = CoveringSpec.point(n) if sup.kind == "point" else CoveringSpec.ball(n, sup.radius)
    return Hyperform(RelCochain(cov, (p - d, n), tau1, tau01), u.orient, sup)


# ---------------------------------------------------------------------------
# restriction of boundary values to {x_1 = 0}


def restriction_kernel(cone: ConeSpec) -> Form:
    """kappa01 of degree (0, n-2): -(n-2)! achi(H_n u H_-) sum_j (-1)^j phi_j dbar phi_1 ^ .. ^ dbar phi_{n-1} (j-th omitted)."""
    n = cone.n
    fam = restriction_partition(cone)
    a_n, b_n = fam._margins(str(n))
    a_m, b_m = fam._margins("m")
    chi = se.achi(se.emax(se.emin(a_n, b_n), se.emin(a_m, b_m)))
    dphi = [fam.dbar_phi(str(k), n) for k in range(1, n)]
    acc = Form.zero(n)
    for j in range(1, n):
        rest = [dphi[k - 1] for k in range(1, n) if k != j]
        acc = acc + fc.wedge_all(rest, n).scale(se.mul(_sign(j), fam.phi(str(j))))
    return acc.scale(se.mul(-math.factorial(n - 2), chi))


def restrict_boundary_value(f, cone: ConeSpec, n: int | None = None) -> Hyperform:
    """b(f) restricted to {x_1 = 0}: the class of -(f kappa01)|_{z_1 = 0} on R^(n-1)."""
    n = n or cone.n
    if n < 2:
        raise DimensionMismatch("restriction needs n >= 2")
    if cone.n != n:
        raise DimensionMismatch(f"cone in R^{cone.n} for n = {n}")
    fe = _expr(f, n)
    kappa = restriction_kernel(cone)
    tau = fc.restrict_to_slice(kappa.scale(se.mul(-1, fe)), 1)
    c = RelCochain(CoveringSpec.real(n - 1), (0, n - 1), None, tau)
    return Hyperform(c, 1, SupportSpec("all"))


# ---------------------------------------------------------------------------
# microlocal support of a representative


def support_in_cone(u: Hyperform, G: ConeSpec, samples: int = 200) -> bool:
    """True iff tau01 vanishes (<= 1e-10) at sampled points of V01 with y outside the closed cone G.

    This certifies the given representative only; False is inconclusive about the class.
    """
    if not u.tau1.is_zero:
        raise RepresentativeHasTau1("support test needs a representative with tau1 = 0")
    if G.n != u.n:
        raise DimensionMismatch(f"cone in R^{G.n} for a hyperform on R^{u.n}")
    if u.tau01.is_zero:
        return True
    cov = u.cochain.covering

    def accept(Z):
        return cov.in_v01(Z) & G.outside_closure(Z.imag)

    pts = se.sample_points(u.tau01.coeffs(), u.n, samples, accept)
    if not len(pts):
        return True
    vals = se.evaluate(u.tau01.coeffs(), pts, check=False)
    vals = np.where(np.isfinite(vals), vals, np.inf)
    return bool(np.max(np.abs(vals)) <= SUPPORT_ZERO_TOL)


def check(u: Hyperform, samples: int = 200):
    """Cocycle report of the underlying cochain."""
    return is_cocycle(u.cochain, samples)


__all__ = ["Hyperform", "SupportSpec", "ConeSpec", "delta", "delta_form", "embed_real_analytic", "embed_form",
           "boundary_value", "bv_kernel", "mult", "partial_derivative", "hyper_d", "external_product",
           "fiber_integrate", "restrict_boundary_value", "restriction_kernel", "support_in_cone",
           "cutoff_representative", "thom_rho", "check"]
