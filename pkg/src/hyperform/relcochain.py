"""Relative cochains on the two-set covering {V0 = V1 minus S, V1}.

A cochain is a pair (sigma1, sigma01): sigma1 lives on V1 (always the whole
ambient space here) and sigma01 on V0 = V1 minus the removed set S, where it
may be singular along S.  Dolbeault cochains use the complex basis and the
differential vartheta; de Rham cochains use the real basis and D.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import formcalc as fc
from .errors import DimensionMismatch, HyperformError, NotHolomorphic
from .formcalc import Form
from .partitions import ConeSpec

MEMBER_MARGIN = 1e-3

_KINDS = ("point", "ball", "real", "cone", "product")


class CoveringSpec:
    """Removed set S inside C^n; V1 is all of C^n and V0 = C^n minus S.

    kinds:
      point    S = {0}
      ball     S = closed ball of ``radius`` in R^n
      real     S = R^n
      cone     S = R^n x i*closure(G) for a cone G
      product  S = K_1 x ... x K_l, each block either {0} ("z") or R^k ("y")
    """

    __slots__ = ("dim", "kind", "radius", "cone", "blocks")

    def __init__(self, dim: int, kind: str = "real", radius: float | None = None,
                 cone: ConeSpec | None = None, blocks=None):
        if kind not in _KINDS:
            raise ValueError(f"unknown covering kind {kind!r}")
        self.dim = int(dim)
        self.kind = kind
        self.radius = float(radius) if radius is not None else None
        self.cone = cone
        self.blocks = tuple((str(k), tuple(int(i) for i in idx)) for k, idx in blocks) if blocks else None
        if kind == "ball" and (self.radius is None or self.radius <= 0):
            raise ValueError("ball covering needs a positive radius")
        if kind == "cone" and cone is None:
            raise ValueError("cone covering needs a ConeSpec")
        if kind == "product" and not self.blocks:
            raise ValueError("product covering needs blocks")

    @classmethod
    def point(cls, n):
        return cls(n, "point")

    @classmethod
    def ball(cls, n, radius):
        return cls(n, "ball", radius=radius)

    @classmethod
    def real(cls, n):
        return cls(n, "real")

    @classmethod
    def product(cls, blocks):
        n = sum(len(idx) for _, idx in blocks)
        return cls(n, "product", blocks=blocks)

    def __eq__(self, other):
        return isinstance(other, CoveringSpec) and self.to_dict() == other.to_dict()

    def __hash__(self):
        return hash(repr(self.to_dict()))

    def __repr__(self):
        return f"CoveringSpec({self.to_dict()})"

    def in_v01(self, Z: np.ndarray, margin: float = MEMBER_MARGIN) -> np.ndarray:
        """Membership of points in V0 at distance more than ``margin`` from S."""
        Z = np.atleast_2d(Z)
        X, Y = Z.real, Z.imag
        if self.kind == "point":
            return np.linalg.norm(Z, axis=1) > margin
        if self.kind == "ball":
            rx = np.maximum(np.linalg.norm(X, axis=1) - self.radius, 0.0)
            return np.hypot(rx, np.linalg.norm(Y, axis=1)) > margin
        if self.kind == "real":
            return np.linalg.norm(Y, axis=1) > margin
        if self.kind == "cone":
            return self.cone.outside_closure(Y, margin) & (np.linalg.norm(Y, axis=1) > margin)
        keep = np.zeros(len(Z), bool)
        for kind, idx in self.blocks:
            cols = [i - 1 for i in idx]
            part = Z[:, cols] if kind == "z" else Y[:, cols]
            keep |= np.linalg.norm(part, axis=1) > margin
        return keep

    def union(self, other: "CoveringSpec") -> "CoveringSpec":
        """A covering whose removed set contains both removed sets."""
        if self.dim != other.dim:
            raise DimensionMismatch(f"coverings of dimension {self.dim} and {other.dim}")
        if self == other:
            return self
        a, b = self, other
        for first, second in ((a, b), (b, a)):
            if first.kind == "point":
                return second
        if a.kind == "ball" and b.kind == "ball":
            return a if a.radius >= b.radius else b
        if a.kind == "cone" or b.kind == "cone":
            cone = a if a.kind == "cone" else b
            rest = b if cone is a else a
            if rest.kind == "cone":
                raise HyperformError("cannot combine cochains on two different cone coverings")
            return cone
        return CoveringSpec.real(self.dim)

    def to_dict(self) -> dict:
        d: dict = {"dim": self.dim, "kind": self.kind}
        if self.kind == "ball":
            d["radius"] = self.radius
        if self.kind == "cone":
            d["cone"] = self.cone.to_dict()
        if self.kind == "product":
            d["blocks"] = [[k, list(idx)] for k, idx in self.blocks]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "CoveringSpec":
        kind = d.get("kind", "real")
        cone = ConeSpec(d["cone"]["etas"], d["dim"]) if kind == "cone" else None
        return cls(d["dim"], kind, d.get("radius"), cone, d.get("blocks"))


class RelCochain:
    """(sigma1, sigma01) of bidegree (p, q) (complex) or degree q (real).

    sigma1 has bidegree (p, q) and sigma01 has (p, q - 1).  In the real basis
    ``bidegree`` is (0, q).
    """

    __slots__ = ("covering", "bidegree", "sigma1", "sigma01")

    def __init__(self, covering: CoveringSpec, bidegree, sigma1: Form | None = None, sigma01: Form | None = None,
                 basis: str = "complex"):
        n = covering.dim
        self.covering = covering
        self.bidegree = (int(bidegree[0]), int(bidegree[1]))
        self.sigma1 = sigma1 if sigma1 is not None else Form.zero(n, basis)
        self.sigma01 = sigma01 if sigma01 is not None else Form.zero(n, basis)
        for f in (self.sigma1, self.sigma01):
            if f.dim != n:
                raise DimensionMismatch(f"form of dimension {f.dim} on a covering of dimension {n}")
        p, q = self.bidegree
        self._check_degree(self.sigma1, p, q, "sigma1")
        self._check_degree(self.sigma01, p, q - 1, "sigma01")

    @staticmethod
    def _check_degree(f: Form, p: int, q: int, name: str):
        if f.is_zero:
            return
        if f.basis == "real":
            if f.degree() != p + q:
                raise DimensionMismatch(f"{name} has degree {f.degree()}, expected {p + q}")
        elif f.bidegree() != (p, q):
            raise DimensionMismatch(f"{name} has bidegree {f.bidegree()}, expected {(p, q)}")

    @property
    def dim(self) -> int:
        return self.covering.dim

    @property
    def basis(self) -> str:
        if self.sigma1.basis == "real" or self.sigma01.basis == "real":
            return "real"
        return "complex"

    def _combine(self, other: "RelCochain", sign: int) -> "RelCochain":
        if self.bidegree != other.bidegree:
            raise DimensionMismatch(f"bidegrees {self.bidegree} and {other.bidegree} differ")
        cov = self.covering.union(other.covering)
        if sign > 0:
            return RelCochain(cov, self.bidegree, self.sigma1 + other.sigma1, self.sigma01 + other.sigma01)
        return RelCochain(cov, self.bidegree, self.sigma1 - other.sigma1, self.sigma01 - other.sigma01)

    def __add__(self, other):
        return self._combine(other, 1)

    def __sub__(self, other):
        return self._combine(other, -1)

    def __neg__(self):
        return self.scale(-1)

    def scale(self, c) -> "RelCochain":
        return RelCochain(self.covering, self.bidegree, self.sigma1.scale(c), self.sigma01.scale(c))

    def map_forms(self, fn) -> "RelCochain":
        return RelCochain(self.covering, self.bidegree, fn(self.sigma1), fn(self.sigma01))

    def with_covering(self, covering: CoveringSpec) -> "RelCochain":
        return RelCochain(covering, self.bidegree, self.sigma1, self.sigma01)

    def __eq__(self, other):
        return (isinstance(other, RelCochain) and self.covering == other.covering
                and self.bidegree == other.bidegree and self.sigma1 == other.sigma1
                and self.sigma01 == other.sigma01)

    def __hash__(self):
        return hash((self.bidegree, self.sigma1, self.sigma01))

    def __repr__(self):
        return f"RelCochain({self.covering.kind}, {self.bidegree}, sigma1={self.sigma1!r}, sigma01={self.sigma01!r})"


# ---------------------------------------------------------------------------
# differentials


def vartheta(c: RelCochain) -> RelCochain:
    """(sigma1, sigma01) -> (dbar sigma1, sigma1 - dbar sigma01)."""
    s1 = fc.to_complex(c.sigma1)
    s01 = fc.to_complex(c.sigma01)
    p, q = c.bidegree
    return RelCochain(c.covering, (p, q + 1), fc.dbar(s1), s1 - fc.dbar(s01))


def bigD(c: RelCochain) -> RelCochain:
    """(sigma1, sigma01) -> (d sigma1, sigma1 - d sigma01) for real-basis cochains."""
    p, q = c.bidegree
    return RelCochain(c.covering, (p, q + 1), fc.d(c.sigma1), c.sigma1 - fc.d(c.sigma01))


@dataclass(frozen=True)
class CocycleReport:
    """Result of a cocycle test; truthy iff both residuals vanish."""

    ok: bool
    residual: float
    path: str

    def __bool__(self):
        return self.ok


def _residual_report(diff: RelCochain, samples: int) -> CocycleReport:
    cov = diff.covering
    r1 = fc.check_zero(diff.sigma1, samples)
    r01 = fc.check_zero(diff.sigma01, samples, accept=cov.in_v01)
    paths = sorted({r1.path, r01.path})
    return CocycleReport(r1.is_zero and r01.is_zero, max(r1.max_abs, r01.max_abs), "+".join(paths))


def is_cocycle(c: RelCochain, samples: int = 200) -> CocycleReport:
    """Check dbar sigma1 = 0 on V1 and sigma1 = dbar sigma01 on V0 (d for real cochains).

    Points for the second residual are restricted to V0 at distance 1e-3
    from the removed set.  Grey-band magnitudes raise ``Inconclusive``.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    diff = bigD(c) if c.basis == "real" else vartheta(c)
    return _residual_report(diff, samples)


def cup(c: RelCochain, eta: Form, samples: int = 64) -> RelCochain:
    """(sigma1 ^ eta, sigma01 ^ eta) for eta holomorphic near the removed set."""
    eta = fc.to_complex(eta)
    if not eta.is_zero and not fc.check_zero(fc.dbar(eta), samples):
        raise NotHolomorphic("dbar(eta) does not vanish")
    if eta.is_zero:
        pq = (0, 0)
    else:
        pq = eta.bidegree()
    p, q = c.bidegree
    s1, s01 = fc.to_complex(c.sigma1), fc.to_complex(c.sigma01)
    return RelCochain(c.covering, (p + pq[0], q + pq[1]), fc.wedge(s1, eta), fc.wedge(s01, eta))


def class_del(c: RelCochain) -> RelCochain:
    """(-1)^q (del sigma1, -del sigma01), raising p by one."""
    p, q = c.bidegree
    s = -1 if q % 2 else 1
    return RelCochain(c.covering, (p + 1, q), fc.del_(c.sigma1).scale(s), fc.del_(c.sigma01).scale(-s))


def cohomologous(a: RelCochain, b: RelCochain, candidate: RelCochain, samples: int = 200) -> bool:
    """Verify the witness: a - b = vartheta(candidate)."""
    if a.bidegree != b.bidegree:
        raise DimensionMismatch(f"bidegrees {a.bidegree} and {b.bidegree} differ")
    p, q = a.bidegree
    if not (candidate.sigma1.is_zero and candidate.sigma01.is_zero) and candidate.bidegree != (p, q - 1):
        raise DimensionMismatch(f"witness has bidegree {candidate.bidegree}, expected {(p, q - 1)}")
    cand = RelCochain(candidate.covering, (p, q - 1), candidate.sigma1, candidate.sigma01)
    diff = (a - b) - vartheta(cand)
    return _residual_report(diff, samples).ok


def zero_cochain(covering: CoveringSpec, bidegree) -> RelCochain:
    return RelCochain(covering, bidegree)


__all__ = ["CoveringSpec", "RelCochain", "CocycleReport", "vartheta", "bigD", "is_cocycle", "cup", "class_del",
           "cohomologous", "zero_cochain"]
