"""Smooth partitions of unity used by the boundary-value, restriction and product constructions.

Each family is an immutable object with a text key (so expressions that
mention its atoms can be serialized and parsed back), the ambient
coordinates it depends on, and explicit expansions of its members into
plain expressions.  All members are quotients ``g_k / sum_j g_j`` of products
of the bump profile t -> exp(-1/(t - delta)) (zero for t <= delta).
"""
from __future__ import annotations

from fractions import Fraction
from functools import cached_property

import numpy as np

from . import symexpr as se
from .errors import ConeEmpty, ConeNotTransverse, PartitionInfeasible

DEFAULT_DELTA = 0.1


def _fmt_vec(v) -> str:
    return ",".join(repr(float(t)) for t in v)


def _parse_kv(key: str) -> dict[str, str]:
    out = {}
    for part in key.split("|")[1:]:
        k, _, v = part.partition("=")
        out[k] = v
    return out


def _parse_vecs(s: str) -> list[list[float]]:
    if not s:
        return []
    return [[float(t) for t in row.split(",")] for row in s.split(";")]


def _parse_ints(s: str) -> tuple[int, ...]:
    return tuple(int(t) for t in s.split(",")) if s else ()


def sphere_samples(n: int, count: int = 4000) -> np.ndarray:
    """Deterministic, roughly uniform unit vectors in R^n."""
    if n == 1:
        return np.array([[1.0], [-1.0]])
    if n == 2:
        t = 2 * np.pi * (np.arange(count) + 0.5) / count
        return np.stack([np.cos(t), np.sin(t)], axis=1)
    if n == 3:
        k = np.arange(count) + 0.5
        zc = 1 - 2 * k / count
        r = np.sqrt(1 - zc ** 2)
        ph = np.pi * (1 + 5 ** 0.5) * k
        return np.stack([r * np.cos(ph), r * np.sin(ph), zc], axis=1)
    g = np.random.default_rng(12345).normal(size=(count, n))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


# ---------------------------------------------------------------------------
# cones


class ConeSpec:
    """Open convex cone {y : <y, eta_k> > 0 for all k} in R^n.

    With no covectors the cone is all of R^n (minus the origin).
    """

    def __init__(self, etas, n: int | None = None):
        arr = np.asarray(etas, dtype=float)
        if arr.size == 0:
            if n is None:
                raise ValueError("dimension needed for the full cone")
            arr = np.zeros((0, int(n)))
        arr = np.atleast_2d(arr)
        self.n = arr.shape[1]
        norms = np.linalg.norm(arr, axis=1)
        if np.any(norms == 0):
            raise ConeEmpty("zero covector")
        self.etas = arr / norms[:, None]
        if len(self.etas):
            self._check_nonempty()

    @property
    def is_full(self) -> bool:
        return len(self.etas) == 0

    def _check_nonempty(self):
        from scipy.optimize import linprog

        m, n = self.etas.shape
        # maximize s subject to <y, eta_k> >= s, -1 <= y_i <= 1
        c = np.zeros(n + 1)
        c[-1] = -1.0
        A = np.hstack([-self.etas, np.ones((m, 1))])
        res = linprog(c, A_ub=A, b_ub=np.zeros(m), bounds=[(-1, 1)] * n + [(None, 1)], method="highs")
        if res.status != 0 or -res.fun <= 1e-9:
            raise ConeEmpty("cone has empty interior")
        self.interior_point = res.x[:n] / np.linalg.norm(res.x[:n])

    def contains(self, y: np.ndarray, margin: float = 0.0) -> np.ndarray:
        y = np.atleast_2d(y)
        if self.is_full:
            return np.linalg.norm(y, axis=1) > 0
        r = np.linalg.norm(y, axis=1, keepdims=True)
        return np.all(y @ self.etas.T > margin * r, axis=1)

    def outside_closure(self, y: np.ndarray, margin: float = 1e-3) -> np.ndarray:
        """Points at angular distance > margin from the closed cone."""
        y = np.atleast_2d(y)
        if self.is_full:
            return np.zeros(len(y), bool)
        r = np.linalg.norm(y, axis=1, keepdims=True)
        return np.any(y @ self.etas.T < -margin * r, axis=1)

    def to_dict(self) -> dict:
        return {"etas": self.etas.tolist()}

    def __repr__(self):
        return f"ConeSpec({self.etas.tolist()})"


# ---------------------------------------------------------------------------
# family base


class Family:
    prefix = "?"
    coords: tuple[int, ...] = ()

    @property
    def key(self) -> str:
        raise NotImplementedError

    def labels(self) -> list[str]:
        raise NotImplementedError

    def weight(self, label: str) -> se.Expr:
        raise NotImplementedError

    def guards(self) -> list[se.Expr]:
        return []

    def reindexed(self, idxmap: dict[int, int]) -> "Family":
        raise NotImplementedError

    @cached_property
    def _total(self) -> se.Expr:
        return se.add(*[self.weight(k) for k in self.labels()])

    def expand(self, label: str) -> se.Expr:
        if label not in self.labels():
            raise KeyError(f"{self.prefix} family has no member {label!r}")
        return se.mul(self.weight(label), se.pow_(self._total, -1))

    def phi(self, label) -> se.Expr:
        """The partition member as an atom."""
        return se.phi(self, str(label))

    def dbar_phi(self, label, dim: int):
        """dbar of a member as a (0,1)-form in dimension ``dim``."""
        from .formcalc import Form

        p = self.phi(label)
        return Form(dim, {((), (j,)): se.diff(p, f"zb{j}") for j in self.coords})

    def __eq__(self, other):
        return isinstance(other, Family) and self.key == other.key

    def __hash__(self):
        return hash(self.key)

    def __repr__(self):
        return f"{type(self).__name__}({self.key})"


def _inv_norm_y(y_idx):
    return se.pow_(se.norm2y(y_idx), Fraction(-1, 2))


def _dot_over_norm(y_idx, v) -> se.Expr:
    lin = se.add(*[se.mul(se.const(float(c)), se.y(i)) for c, i in zip(v, y_idx) if c != 0])
    return se.mul(lin, _inv_norm_y(y_idx))


# ---------------------------------------------------------------------------
# cone partition: members supported in the half-spaces <y, eta_k> > 0


class ConePartition(Family):
    """Partition subordinate to the n+1 half-spaces of a simplicial cone.

    Members are 0-homogeneous in y: phi_k = g_k / sum g with
    g_k = bump(<y/|y|, eta_k>).
    """

    prefix = "cone"

    def __init__(self, etas, coords=None, delta: float = DEFAULT_DELTA):
        arr = np.atleast_2d(np.asarray(etas, dtype=float))
        self.etas = arr / np.linalg.norm(arr, axis=1, keepdims=True)
        n = self.etas.shape[1]
        self.coords = tuple(coords) if coords is not None else tuple(range(1, n + 1))
        self.delta = float(delta)

    @classmethod
    def for_cone(cls, cone: ConeSpec, coords=None, delta: float = DEFAULT_DELTA) -> "ConePartition":
        """Close the n given covectors with eta_{n+1} = -(eta_1 + ... + eta_n) and check the cover."""
        E = cone.etas
        n = cone.n
        if E.shape[0] != n:
            raise PartitionInfeasible(f"need exactly {n} covectors, got {E.shape[0]}")
        if abs(np.linalg.det(E)) < 1e-12:
            raise ConeEmpty("covectors are linearly dependent")
        last = -E.sum(axis=0)
        full = np.vstack([E, last / np.linalg.norm(last)])
        margin = float(np.min(np.max(sphere_samples(n) @ full.T, axis=1)))
        while delta >= margin * 0.9 and delta > 1e-3:
            delta /= 2
        if margin <= 0 or delta >= margin:
            raise PartitionInfeasible("half-spaces do not cover the sphere with a positive margin")
        return cls(full, coords, delta)

    @property
    def key(self) -> str:
        rows = ";".join(_fmt_vec(r) for r in self.etas)
        return f"cone|delta={self.delta!r}|coords={','.join(map(str, self.coords))}|etas={rows}"

    @classmethod
    def from_key(cls, key: str) -> "ConePartition":
        kv = _parse_kv(key)
        return cls(_parse_vecs(kv["etas"]), _parse_ints(kv["coords"]), float(kv["delta"]))

    def labels(self):
        return [str(k) for k in range(1, len(self.etas) + 1)]

    def weight(self, label):
        k = int(label) - 1
        return se.bump(_dot_over_norm(self.coords, self.etas[k]), self.delta)

    def guards(self):
        return [se.norm2y(self.coords)]

    def reindexed(self, idxmap):
        return ConePartition(self.etas, [idxmap.get(i, i) for i in self.coords], self.delta)


# ---------------------------------------------------------------------------
# product partition: members vanish near the removed set of one factor


class ProductPartition(Family):
    """Partition of C^n minus K_1 x ... x K_l for a product of factors.

    Block k is a group of coordinates with removed set either {z = 0}
    (``kind="z"``) or the real subspace {y = 0} (``kind="y"``).  With
    s_k = d_k / sum_j d_j (d_k the squared distance to the removed set) the
    member phi_k is supported where block k is off its removed set.
    """

    prefix = "prod"

    def __init__(self, blocks, delta: float | None = None):
        self.blocks = tuple((str(kind), tuple(int(i) for i in idx)) for kind, idx in blocks)
        l = len(self.blocks)
        if delta is None:
            delta = min(DEFAULT_DELTA, 0.5 / l)
        if not 0 < delta < 1.0 / l:
            raise PartitionInfeasible(f"delta must lie in (0, 1/{l})")
        self.delta = float(delta)
        self.coords = tuple(sorted({i for _, idx in self.blocks for i in idx}))

    def _dist(self, k):
        kind, idx = self.blocks[k]
        return se.norm2z(idx) if kind == "z" else se.norm2y(idx)

    @cached_property
    def _sum(self):
        return se.add(*[self._dist(k) for k in range(len(self.blocks))])

    @property
    def key(self) -> str:
        bl = ";".join(f"{kind}:{','.join(map(str, idx))}" for kind, idx in self.blocks)
        return f"prod|delta={self.delta!r}|blocks={bl}"

    @classmethod
    def from_key(cls, key):
        kv = _parse_kv(key)
        blocks = []
        for part in kv["blocks"].split(";"):
            kind, _, idx = part.partition(":")
            blocks.append((kind, _parse_ints(idx)))
        return cls(blocks, float(kv["delta"]))

    def labels(self):
        return [str(k) for k in range(1, len(self.blocks) + 1)]

    def weight(self, label):
        k = int(label) - 1
        return se.bump(se.mul(self._dist(k), se.pow_(self._sum, -1)), self.delta)

    def guards(self):
        return [self._sum]

    def reindexed(self, idxmap):
        return ProductPartition([(kind, [idxmap.get(i, i) for i in idx]) for kind, idx in self.blocks], self.delta)


# ---------------------------------------------------------------------------
# restriction partition for the slice {z_1 = 0}


class RestrictionPartition(Family):
    """Partition subordinate to H_1..H_n, H_+, H_- in R^n_y = R_{y_1} x R^{n-1}_{y'}.

    H_j = {|y_1| < c <y', eta_j>} (j = 1..n, eta_n = -(eta_1+...+eta_{n-1}))
    and H_(+/-) = {+/- y_1 > c^2 |y'|}.  Member labels are "1".."n", "p", "m".
    """

    prefix = "restr"

    def __init__(self, etas, c: float, delta: float, coords=None):
        arr = np.atleast_2d(np.asarray(etas, dtype=float))
        self.etas = arr
        self.full_etas = np.vstack([arr, -arr.sum(axis=0, keepdims=True)])
        self.c = float(c)
        self.delta = float(delta)
        n = arr.shape[1] + 1
        self.coords = tuple(coords) if coords is not None else tuple(range(1, n + 1))

    @property
    def n(self):
        return len(self.coords)

    @property
    def key(self) -> str:
        rows = ";".join(_fmt_vec(r) for r in self.etas)
        return (f"restr|c={self.c!r}|delta={self.delta!r}|coords={','.join(map(str, self.coords))}"
                f"|etas={rows}")

    @classmethod
    def from_key(cls, key):
        kv = _parse_kv(key)
        return cls(_parse_vecs(kv["etas"]), float(kv["c"]), float(kv["delta"]), _parse_ints(kv["coords"]))

    def labels(self):
        return [str(k) for k in range(1, self.n + 1)] + ["p", "m"]

    def _margins(self, label):
        """Expressions whose positivity (beyond delta) defines the member's support."""
        y1 = se.y(self.coords[0])
        yp = self.coords[1:]
        inv = _inv_norm_y(self.coords)
        if label in ("p", "m"):
            s = 1 if label == "p" else -1
            a = se.mul(s, y1, inv)
            b = se.mul(se.add(se.pow_(y1, 2), se.mul(-self.c ** 4, se.norm2y(yp))), se.pow_(inv, 2))
            return a, b
        j = int(label) - 1
        lin = se.add(*[se.mul(se.const(self.c * float(t)), se.y(i)) for t, i in zip(self.full_etas[j], yp) if t != 0])
        return se.mul(se.add(lin, se.mul(-1, y1)), inv), se.mul(se.add(lin, y1), inv)

    def weight(self, label):
        a, b = self._margins(label)
        return se.mul(se.bump(a, self.delta), se.bump(b, self.delta))

    def guards(self):
        return [se.norm2y(self.coords)]

    def reindexed(self, idxmap):
        return RestrictionPartition(self.etas, self.c, self.delta, [idxmap.get(i, i) for i in self.coords])

    # numeric margins on unit vectors, used by the parameter search
    @staticmethod
    def margins_numeric(Y: np.ndarray, etas: np.ndarray, c: float) -> np.ndarray:
        y1, yp = Y[:, 0], Y[:, 1:]
        cols = []
        for e in etas:
            t = c * (yp @ e)
            cols.append(np.minimum(t - y1, t + y1))
        q = y1 ** 2 - c ** 4 * np.sum(yp ** 2, axis=1)
        cols.append(np.minimum(y1, q))
        cols.append(np.minimum(-y1, q))
        return np.stack(cols, axis=1)


def slice_etas(cone: ConeSpec) -> np.ndarray:
    """Covectors eta~_1..eta~_{n-1} in R^{n-1} whose open cone closes up inside Gamma cap {y_1 = 0}."""
    n = cone.n
    if cone.is_full:
        return np.eye(n - 1)
    E = cone.etas[:, 1:]
    # the slice cone is {y' : <y', E_k> > 0}
    if n == 2:
        s = E[:, 0]
        if np.all(s > 1e-12):
            return np.array([[1.0]])
        if np.all(s < -1e-12):
            return np.array([[-1.0]])
        raise ConeNotTransverse("cone does not meet {y_1 = 0}")
    if n == 3:
        th = np.linspace(0, 2 * np.pi, 7200, endpoint=False)
        U = np.stack([np.cos(th), np.sin(th)], axis=1)
        inside = np.all(U @ E.T > 1e-9, axis=1)
        if not inside.any():
            raise ConeNotTransverse("cone does not meet {y_1 = 0}")
        if inside.all():
            raise ConeNotTransverse("slice cone is not proper")
        # arc of admissible angles; shrink it by 10% on each side
        k = np.flatnonzero(inside)
        start = k[np.argmax(~inside[(k - 1) % len(th)])]
        length = int(inside.sum())
        a0 = th[start] + 0.1 * length * (th[1] - th[0])
        a1 = th[start] + 0.9 * length * (th[1] - th[0])
        # inward normals of the sector [a0, a1]
        n0 = np.array([-np.sin(a0), np.cos(a0)])
        n1 = np.array([np.sin(a1), -np.cos(a1)])
        return np.stack([n0, n1])
    raise PartitionInfeasible("restriction is implemented for n = 2 and n = 3")


def restriction_partition(cone: ConeSpec, coords=None, samples: int = 20000) -> RestrictionPartition:
    """Choose c (bisection for cover and H_1 cap ... cap H_{n-1} inside Gamma, then halved) and delta."""
    n = cone.n
    if n < 2:
        raise PartitionInfeasible("restriction needs n >= 2")
    et = slice_etas(cone)
    etas = np.vstack([et, -et.sum(axis=0, keepdims=True)])
    Y = sphere_samples(n, samples)

    def ok(c):
        M = RestrictionPartition.margins_numeric(Y, etas, c)
        if not np.all(np.max(M, axis=1) > 0):
            return False
        inter = np.all(M[:, : n - 1] > 0, axis=1)
        return bool(np.all(cone.contains(Y[inter]))) if inter.any() else True

    lo, hi = 0.0, 1.0
    if ok(hi):
        lo = hi
    else:
        for _ in range(40):
            mid = 0.5 * (lo + hi)
            if ok(mid):
                lo = mid
            else:
                hi = mid
    if lo <= 0:
        raise PartitionInfeasible("no admissible c found")
    c = 0.5 * lo
    M = RestrictionPartition.margins_numeric(Y, etas, c)
    mu = float(np.min(np.max(M, axis=1)))
    if mu <= 0:
        raise PartitionInfeasible("restriction cover has no margin")
    return RestrictionPartition(et, c, min(DEFAULT_DELTA, 0.5 * mu), coords)


se.register_family_parser("cone", ConePartition.from_key)
se.register_family_parser("prod", ProductPartition.from_key)
se.register_family_parser("restr", RestrictionPartition.from_key)

__all__ = ["ConeSpec", "ConePartition", "ProductPartition", "RestrictionPartition", "restriction_partition",
           "slice_etas", "sphere_samples", "Family"]
