"""Quadrature engines and the duality pairing.

Every integration domain is a union of charts.  A chart is a box of
parameters (Gauss-Legendre axes and periodic trapezoid axes) plus a map
giving points z(t) and tangent vectors dz/dt_b.  A k-form is integrated by
pulling each monomial back through the determinant of its 1-forms
evaluated on the tangent vectors, so one code path serves circles, tori,
spheres, balls, polydisks and the box x y-ball domains of localized pairings.

Interfaces of piecewise-smooth integrands (bump transitions, jumps of
anti-characteristic functions) are located numerically along each axis and
the Gauss rules are split there.  Accuracy is estimated by comparing the
resolution N with N/2; N doubles until the estimate falls below ``tol``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import formcalc as fc
from . import symexpr as se
from ._backend import neumaier_sum
from .errors import (DimensionMismatch, EvalSingular, QuadratureDiverged, SupportNotCompact,
                     UnsupportedDimension)
from .formcalc import Form

DEFAULT_TOL = 1e-9
DIVERGED_TOL = 1e-4
MAX_POINTS = 6_000_000
BATCH = 1 << 16
SCAN_GRID = 768
_GENERIC = (0.3819660112501051, 0.6180339887498949, 0.2763932022500210, 0.7236067977499790,
            0.4472135954999579, 0.5527864045000421)


@dataclass(frozen=True)
class PairingResult:
    value: complex
    error: float
    resolution: int

    def to_dict(self) -> dict:
        v = complex(self.value)
        return {"value": [v.real, v.imag], "error": float(self.error), "resolution": int(self.resolution)}


# ---------------------------------------------------------------------------
# charts


@dataclass
class Axis:
    lo: float
    hi: float
    periodic: bool = False
    breaks: tuple = ()


@dataclass
class Chart:
    """Parametrized oriented piece of a k-dimensional domain.

    ``fmap(P)`` takes parameters of shape (M, k) and returns points Z (M, n)
    and tangents T (M, n, k).  ``sign`` is the orientation of the parameter
    order relative to the intended orientation.
    """

    axes: list
    fmap: Callable
    dim: int
    sign: int = 1
    scan: bool = True
    weight: float = 1.0
    label: str = ""

    @property
    def k(self) -> int:
        return len(self.axes)


def _u_vectors(T: np.ndarray, ambient: str) -> np.ndarray:
    """Real coordinates of complex tangent vectors: (M, n, k) -> (M, D, k)."""
    if ambient == "real":
        return T.real
    if ambient == "imag":
        return T.imag
    M, n, k = T.shape
    U = np.empty((M, 2 * n, k))
    U[:, 0::2, :] = T.real
    U[:, 1::2, :] = T.imag
    return U


def _generic_params(chart: Chart, count: int = 1) -> np.ndarray:
    P = np.empty((count, chart.k))
    for b, ax in enumerate(chart.axes):
        P[:, b] = ax.lo + _GENERIC[b % len(_GENERIC)] * (ax.hi - ax.lo)
    return P


def orient(chart: Chart, ambient: str = "complex", normal: Callable | None = None) -> Chart:
    """Fix ``chart.sign`` so the chart is positively oriented.

    Volume charts compare with the ambient orientation (x1, y1, ..., xn, yn);
    hypersurface charts use ``normal(Z)`` (outward) followed by the tangents.
    """
    P = _generic_params(chart)
    Z, T = chart.fmap(P)
    cols = _u_vectors(T, ambient)[0]
    if normal is not None:
        Nv = _u_vectors(normal(Z)[:, :, None], ambient)[0]
        cols = np.hstack([Nv, cols])
    det = np.linalg.det(cols)
    if abs(det) < 1e-12:
        raise DimensionMismatch("degenerate chart orientation")
    chart.sign = 1 if det > 0 else -1
    return chart


# -- 1-D rules


def _gauss(N: int):
    return np.polynomial.legendre.leggauss(N)


def _axis_rule(ax: Axis, N: int, breaks: Sequence[float]):
    if ax.periodic and not breaks:
        t = ax.lo + (ax.hi - ax.lo) * (np.arange(N) + 0.5) / N
        return t, np.full(N, (ax.hi - ax.lo) / N)
    if ax.periodic:
        pts = sorted(breaks)
        edges = list(zip(pts, pts[1:] + [pts[0] + (ax.hi - ax.lo)]))
    else:
        pts = [ax.lo] + sorted(breaks) + [ax.hi]
        edges = list(zip(pts[:-1], pts[1:]))
    x, w = _gauss(N)
    ts, ws = [], []
    for a, b in edges:
        if b - a <= 0:
            continue
        ts.append(0.5 * (b - a) * x + 0.5 * (a + b))
        ws.append(0.5 * (b - a) * w)
    return np.concatenate(ts), np.concatenate(ws)


# -- interfaces


def interfaces(exprs: Sequence[se.Expr]) -> list[se.Expr]:
    """Real-valued expressions whose sign changes mark non-smooth seams."""
    out: dict = {}
    seen: set = set()

    def walk(e):
        for node in se._postorder([e]):
            if node._digest in seen:
                continue
            seen.add(node._digest)
            if isinstance(node, se.Phi):
                walk(se.expand_macro(node))
            elif isinstance(node, se.Bump):
                g = se.add(node.arg, -node.delta) if node.delta else node.arg
                out[g._digest] = g
            elif isinstance(node, se.Achi):
                args = node.arg.args if isinstance(node.arg, se.Extremum) else [node.arg]
                for g in args:
                    out[g._digest] = g

    for e in exprs:
        walk(e)
    return [g for g in out.values() if not isinstance(g, se.Const)]


def _sign_changes(V: np.ndarray):
    """Indices g with a sign change between g and g+1 along axis -2; V is (..., G, m)."""
    s = np.sign(V)
    ok = np.isfinite(V[..., :-1, :]) & np.isfinite(V[..., 1:, :])
    return ok & (s[..., :-1, :] * s[..., 1:, :] < 0)


def _bisect(fun, lo: np.ndarray, hi: np.ndarray, flo: np.ndarray, iters: int = 48):
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        fm = fun(mid)
        left = np.sign(fm) == np.sign(flo)
        lo = np.where(left, mid, lo)
        flo = np.where(left, fm, flo)
        hi = np.where(left, hi, mid)
    return 0.5 * (lo + hi)


def _merge_breaks(vals, lo, hi, tol=1e-10):
    vals = sorted(v for v in vals if lo + tol < v < hi - tol)
    out = []
    for v in vals:
        if not out or v - out[-1] > tol:
            out.append(v)
    return out


def detect_breaks(chart: Chart, ifaces: Sequence[se.Expr], b: int, grid: int = SCAN_GRID) -> list[float]:
    """Seams of ``ifaces`` along axis ``b`` of a chart, others held at generic values."""
    ax = chart.axes[b]
    found = list(ax.breaks)
    if ifaces and chart.scan:
        t = np.linspace(ax.lo, ax.hi, grid)
        P = np.repeat(_generic_params(chart), grid, axis=0)
        P[:, b] = t
        Z, _ = chart.fmap(P)
        V = se.evaluate(list(ifaces), Z, check=False).real
        ch = _sign_changes(V)
        gi, mi = np.nonzero(ch)
        if len(gi):
            def fun(tt):
                Q = np.repeat(_generic_params(chart), len(tt), axis=0)
                Q[:, b] = tt
                Zq, _ = chart.fmap(Q)
                vals = se.evaluate(list(ifaces), Zq, check=False).real
                return vals[np.arange(len(tt)), mi]

            roots = _bisect(fun, t[gi], t[gi + 1], V[gi, mi])
            found.extend(roots.tolist())
    return _merge_breaks(found, ax.lo, ax.hi)


# -- chart integration


@dataclass
class _Rule:
    chart: Chart
    nodes: list
    weights: list

    @property
    def size(self) -> int:
        return int(np.prod([len(w) for w in self.weights])) if self.weights else 1


def _build_rule(chart: Chart, N: int, ifaces) -> _Rule:
    nodes, weights = [], []
    for b, ax in enumerate(chart.axes):
        br = detect_breaks(chart, ifaces, b)
        t, w = _axis_rule(ax, N, br)
        nodes.append(t)
        weights.append(w)
    return _Rule(chart, nodes, weights)


def _monomial_rows(T: np.ndarray, I, J, basis: str) -> np.ndarray:
    rows = []
    for i in I:
        v = T[:, i - 1, :]
        rows.append(v.real if basis == "real" else v)
    for j in J:
        v = T[:, j - 1, :]
        rows.append(v.imag if basis == "real" else np.conj(v))
    if not rows:
        return np.ones((T.shape[0], 0, 0))
    return np.stack(rows, axis=1)


def _pullback_density(form: Form, Z: np.ndarray, T: np.ndarray) -> np.ndarray:
    keys = list(form.terms)
    vals = se.evaluate([form.terms[k] for k in keys], Z, check=False)
    acc = np.zeros(len(Z), dtype=complex)
    for col, (I, J) in enumerate(keys):
        rows = _monomial_rows(T, I, J, form.basis)
        det = np.linalg.det(rows) if rows.shape[1] else np.ones(len(Z))
        acc += vals[:, col] * det
    return acc


def _rule_sum(form: Form, rule: _Rule) -> complex:
    chart = rule.chart
    shape = tuple(len(w) for w in rule.weights)
    M = rule.size
    parts = []
    for s in range(0, M, BATCH):
        e = min(s + BATCH, M)
        if shape:
            idx = np.unravel_index(np.arange(s, e), shape)
            P = np.stack([rule.nodes[b][idx[b]] for b in range(len(shape))], axis=1)
            W = np.prod([rule.weights[b][idx[b]] for b in range(len(shape))], axis=0)
        else:
            P = np.zeros((1, 0))
            W = np.ones(1)
        Z, T = chart.fmap(P)
        f = _pullback_density(form, Z, T)
        if not np.all(np.isfinite(f)):
            raise EvalSingular(f"integrand is not finite at quadrature nodes of {chart.label or 'chart'}")
        parts.append(neumaier_sum(f * W))
    return chart.sign * chart.weight * neumaier_sum(np.array(parts))


def integrate(form: Form, charts: Sequence[Chart], N: int) -> complex:
    """Integral of ``form`` over the union of charts at resolution N."""
    if form.is_zero:
        return 0j
    ifaces = interfaces(form.coeffs())
    total = []
    for ch in charts:
        total.append(_rule_sum(form, _build_rule(ch, N, ifaces)))
    return complex(neumaier_sum(np.array(total))) if total else 0j


def node_count(form: Form, charts: Sequence[Chart], N: int) -> int:
    ifaces = interfaces(form.coeffs()) if not form.is_zero else []
    return sum(_build_rule(ch, N, ifaces).size for ch in charts)


def converge(fn: Callable[[int], complex], N: int, *, tol: float = DEFAULT_TOL, max_doublings: int = 3,
             size: Callable[[int], int] | None = None) -> PairingResult:
    """Evaluate at N/2 and N, doubling N while the difference exceeds ``tol``."""
    N = max(int(N), 2)
    prev = fn(max(N // 2, 1))
    cur = fn(N)
    err = abs(cur - prev)
    level = 0
    while err > tol and level < max_doublings:
        if size is not None and size(2 * N) > MAX_POINTS:
            break
        N *= 2
        prev, cur = cur, fn(N)
        err = abs(cur - prev)
        level += 1
    if not np.isfinite(err) or err > max(DIVERGED_TOL, tol):
        raise QuadratureDiverged(f"successive resolutions differ by {err:.3e} at N={N}")
    return PairingResult(complex(cur), float(err), int(N))


# ---------------------------------------------------------------------------
# parametrizations


def _amplitudes(n: int, E: np.ndarray):
    """Hopf-type amplitudes a_j(eta) on the unit sphere and their eta-derivatives."""
    M = len(E)
    if n == 1:
        return np.ones((M, 1)), []
    if n == 2:
        c, s = np.cos(E[:, 0]), np.sin(E[:, 0])
        a = np.stack([c, s], axis=1)
        return a, [np.stack([-s, c], axis=1)]
    if n == 3:
        c1, s1 = np.cos(E[:, 0]), np.sin(E[:, 0])
        c2, s2 = np.cos(E[:, 1]), np.sin(E[:, 1])
        a = np.stack([c1, s1 * c2, s1 * s2], axis=1)
        d1 = np.stack([-s1, c1 * c2, c1 * s2], axis=1)
        d2 = np.stack([np.zeros(M), -s1 * s2, s1 * c2], axis=1)
        return a, [d1, d2]
    raise UnsupportedDimension(f"no deterministic sphere rule for n={n}")


def _hopf_axes(n: int):
    return [Axis(0.0, math.pi / 2) for _ in range(n - 1)] + [Axis(0.0, 2 * math.pi, True) for _ in range(n)]


def _hopf_point(n: int, P: np.ndarray, r):
    """Points, eta-tangents and xi-tangents of the radius-r sphere."""
    E, X = P[:, : n - 1], P[:, n - 1:]
    a, da = _amplitudes(n, E)
    ph = np.exp(1j * X)
    r = np.asarray(r, dtype=float).reshape(-1, 1) if np.ndim(r) else r
    Z = r * a * ph
    Teta = [r * d * ph for d in da]
    Txi = []
    for j in range(n):
        t = np.zeros_like(Z)
        t[:, j] = 1j * Z[:, j]
        Txi.append(t)
    return Z, a * ph, Teta + Txi


def sphere_chart(n: int, r: float) -> Chart:
    """S^(2n-1) of radius r in C^n, oriented as the boundary of the ball."""
    def fmap(P):
        Z, _, tans = _hopf_point(n, P, r)
        return Z, np.stack(tans, axis=2)

    ch = Chart(_hopf_axes(n), fmap, n, label=f"S{2 * n - 1}")
    return orient(ch, "complex", normal=lambda Z: Z)


def ball_chart(n: int, r: float) -> Chart:
    def fmap(P):
        rad = P[:, 0]
        Z, unit, tans = _hopf_point(n, P[:, 1:], rad)
        return Z, np.stack([unit] + tans, axis=2)

    ch = Chart([Axis(0.0, r)] + _hopf_axes(n), fmap, n, label=f"B{2 * n}")
    return orient(ch, "complex")


def torus_chart(n: int, eps) -> Chart:
    """{|z_j| = eps_j} with the arg-positive orientation."""
    eps = np.broadcast_to(np.asarray(eps, dtype=float), (n,))

    def fmap(P):
        Z = eps * np.exp(1j * P)
        T = np.zeros((len(P), n, n), dtype=complex)
        for j in range(n):
            T[:, j, j] = 1j * Z[:, j]
        return Z, T

    return Chart([Axis(0.0, 2 * math.pi, True) for _ in range(n)], fmap, n, label=f"T{n}")


def polydisk_charts(n: int, rho: float, coords: Sequence[int] | None = None, dim: int | None = None):
    """Volume chart and boundary faces of the polydisk |z_j| <= rho (j in coords)."""
    coords = list(coords or range(1, n + 1))
    dim = dim or n
    d = len(coords)

    def make(fixed: int | None):
        def fmap(P):
            M = len(P)
            Z = np.zeros((M, dim), dtype=complex)
            T = np.zeros((M, dim, P.shape[1]), dtype=complex)
            col = 0
            for j, c in enumerate(coords):
                if j == fixed:
                    th = P[:, col]
                    Z[:, c - 1] = rho * np.exp(1j * th)
                    T[:, c - 1, col] = 1j * Z[:, c - 1]
                    col += 1
                else:
                    rr, th = P[:, col], P[:, col + 1]
                    e = np.exp(1j * th)
                    Z[:, c - 1] = rr * e
                    T[:, c - 1, col] = e
                    T[:, c - 1, col + 1] = 1j * Z[:, c - 1]
                    col += 2
            return Z, T

        axes = []
        for j in range(d):
            if j != fixed:
                axes.append(Axis(0.0, rho))
            axes.append(Axis(0.0, 2 * math.pi, True))
        return Chart(axes, fmap, dim, label="polydisk" if fixed is None else f"face{coords[fixed]}")

    def ambient_vec(Z, c):
        v = np.zeros_like(Z)
        v[:, c - 1] = Z[:, c - 1]
        return v

    vol = make(None)
    faces = [make(j) for j in range(d)]
    if d == dim:
        orient(vol, "complex")
        for j, f in enumerate(faces):
            orient(f, "complex", normal=lambda Z, c=coords[j]: ambient_vec(Z, c))
    else:
        # fiber polydisk inside a product: orientation from the fiber factor alone
        _orient_sub(vol, coords, None)
        for j, f in enumerate(faces):
            _orient_sub(f, coords, coords[j])
    return vol, faces


def _orient_sub(chart: Chart, coords, normal_coord):
    P = _generic_params(chart)
    Z, T = chart.fmap(P)
    sub = T[:, [c - 1 for c in coords], :]
    cols = _u_vectors(sub, "complex")[0]
    if normal_coord is not None:
        v = np.zeros((1, len(coords)), dtype=complex)
        j = list(coords).index(normal_coord)
        v[0, j] = Z[0, normal_coord - 1]
        cols = np.hstack([_u_vectors(v[:, :, None], "complex")[0], cols])
    chart.sign = 1 if np.linalg.det(cols) > 0 else -1
    return chart


def real_sphere_charts(l: int, r: float, kind: str = "x") -> list[Chart]:
    """S^(l-1) of radius r in R^l (kind "x") or in i R^l (kind "y"), as the boundary of the ball."""
    unit = 1.0 if kind == "x" else 1j
    amb = "real" if kind == "x" else "imag"

    if l == 1:
        out = []
        for s in (1, -1):
            def fmap(P, s=s):
                return np.full((len(P), 1), s * r * unit, dtype=complex), np.zeros((len(P), 1, 0), dtype=complex)

            out.append(Chart([], fmap, 1, sign=s, label="S0"))
        return out
    if l == 2:
        def fmap(P):
            th = P[:, 0]
            Z = r * np.stack([np.cos(th), np.sin(th)], axis=1) * unit
            T = (r * np.stack([-np.sin(th), np.cos(th)], axis=1) * unit)[:, :, None]
            return Z.astype(complex), T.astype(complex)

        ch = Chart([Axis(0.0, 2 * math.pi, True)], fmap, 2, label="S1")
        return [orient(ch, amb, normal=lambda Z: Z)]
    if l == 3:
        def fmap(P):
            th, ph = P[:, 0], P[:, 1]
            st, ct, sp, cp = np.sin(th), np.cos(th), np.sin(ph), np.cos(ph)
            Z = r * np.stack([st * cp, st * sp, ct], axis=1) * unit
            T1 = r * np.stack([ct * cp, ct * sp, -st], axis=1) * unit
            T2 = r * np.stack([-st * sp, st * cp, np.zeros_like(st)], axis=1) * unit
            return Z.astype(complex), np.stack([T1, T2], axis=2).astype(complex)

        ch = Chart([Axis(0.0, math.pi), Axis(0.0, 2 * math.pi, True)], fmap, 3, label="S2")
        return [orient(ch, amb, normal=lambda Z: Z)]
    raise UnsupportedDimension(f"no deterministic rule for S^{l - 1}")


def real_ball_chart(l: int, r: float, kind: str = "x") -> Chart:
    """Ball of radius r in R^l (or i R^l) as a single chart."""
    unit = 1.0 if kind == "x" else 1j
    amb = "real" if kind == "x" else "imag"
    if l == 1:
        def fmap(P):
            return (P * unit).astype(complex), np.full((len(P), 1, 1), unit, dtype=complex)

        return orient(Chart([Axis(-r, r, breaks=(0.0,))], fmap, 1, label="B1"), amb)
    sph = real_sphere_charts(l, 1.0, kind)[0]

    def fmap(P):
        rad = P[:, :1]
        Zs, Ts = sph.fmap(P[:, 1:])
        return rad * Zs, np.concatenate([Zs[:, :, None], rad[:, :, None] * Ts], axis=2)

    ch = Chart([Axis(0.0, r)] + sph.axes, fmap, l, label=f"B{l}")
    return orient(ch, amb)


def _y_ball_parts(n: int, B: float):
    """Parametrizations of the y-ball (volume) and the y-sphere (boundary) in R^n."""
    if n == 1:
        vol = ([Axis(-B, B, breaks=(0.0,))], lambda Q: (Q, np.ones((len(Q), 1, 1))))
        return vol, None
    if n == 2:
        def vol_map(Q):
            rr, ph = Q[:, 0], Q[:, 1]
            u = np.stack([np.cos(ph), np.sin(ph)], axis=1)
            du = np.stack([-np.sin(ph), np.cos(ph)], axis=1)
            return rr[:, None] * u, np.stack([u, rr[:, None] * du], axis=2)

        def sph_map(Q):
            ph = Q[:, 0]
            u = np.stack([np.cos(ph), np.sin(ph)], axis=1)
            du = np.stack([-np.sin(ph), np.cos(ph)], axis=1)
            return B * u, (B * du)[:, :, None]

        return ([Axis(0.0, B), Axis(0.0, 2 * math.pi, True)], vol_map), ([Axis(0.0, 2 * math.pi, True)], sph_map)
    if n == 3:
        def sph_unit(Q):
            th, ph = Q[:, 0], Q[:, 1]
            st, ct, sp, cp = np.sin(th), np.cos(th), np.sin(ph), np.cos(ph)
            u = np.stack([st * cp, st * sp, ct], axis=1)
            t1 = np.stack([ct * cp, ct * sp, -st], axis=1)
            t2 = np.stack([-st * sp, st * cp, np.zeros_like(st)], axis=1)
            return u, np.stack([t1, t2], axis=2)

        def vol_map(Q):
            rr = Q[:, :1]
            u, t = sph_unit(Q[:, 1:])
            return rr * u, np.concatenate([u[:, :, None], rr[:, :, None] * t], axis=2)

        def sph_map(Q):
            u, t = sph_unit(Q)
            return B * u, B * t

        sph_axes = [Axis(0.0, math.pi), Axis(0.0, 2 * math.pi, True)]
        return ([Axis(0.0, B)] + sph_axes, vol_map), (sph_axes, sph_map)
    raise UnsupportedDimension(f"localized pairing is implemented for n <= 3, got {n}")


def box_y_charts(n: int, A: float, B: float, xbreaks=()):
    """[-A, A]^n x {|y| <= B} (volume) and [-A, A]^n x {|y| = B} (boundary pieces)."""
    (vaxes, vmap), sph = _y_ball_parts(n, B)
    xaxes = [Axis(-A, A, breaks=tuple(xbreaks)) for _ in range(n)]

    def combine(ymap, ky):
        def fmap(P):
            X = P[:, :n]
            Y, TY = ymap(P[:, n:])
            Z = (X + 1j * Y).astype(complex)
            M = len(P)
            T = np.zeros((M, n, n + ky), dtype=complex)
            for j in range(n):
                T[:, j, j] = 1.0
            T[:, :, n:] = 1j * TY
            return Z, T

        return fmap

    vol = orient(Chart(xaxes + vaxes, combine(vmap, len(vaxes)), n, label="box-yball"), "complex")
    bnd = []
    if n == 1:
        for s in (1.0, -1.0):
            def ymap(Q, s=s):
                return np.full((len(Q), 1), s * B), np.zeros((len(Q), 1, 0))

            ch = Chart(list(xaxes), combine(ymap, 0), 1, label="box-ysphere")
            bnd.append(orient(ch, "complex", normal=lambda Z: 1j * np.sign(Z.imag)))
    else:
        saxes, smap = sph
        ch = Chart(list(xaxes) + saxes, combine(smap, len(saxes)), n, label="box-ysphere")
        bnd.append(orient(ch, "complex", normal=lambda Z: 1j * Z.imag))
    return vol, bnd


# ---------------------------------------------------------------------------
# Monte Carlo sphere (n > 3)


def _mc_sphere(form: Form, n: int, r: float, samples: int, seed: int) -> PairingResult:
    rng = np.random.default_rng(seed)
    D = 2 * n
    U = rng.normal(size=(samples, D))
    U /= np.linalg.norm(U, axis=1, keepdims=True)
    # orthonormal frames: QR of [u, e_1, ..., e_D] with the first column fixed to u
    A = np.concatenate([U[:, :, None], np.broadcast_to(np.eye(D), (samples, D, D))], axis=2)[:, :, :D]
    Q, _ = np.linalg.qr(A)
    sgn = np.sign(np.einsum("md,md->m", Q[:, :, 0], U))
    Q[:, :, 0] *= sgn[:, None]
    det = np.linalg.det(Q)
    Q[:, :, -1] *= np.sign(det)[:, None]
    frames = Q[:, :, 1:]
    Z = r * (U[:, 0::2] + 1j * U[:, 1::2])
    T = frames[:, 0::2, :] + 1j * frames[:, 1::2, :]
    area = 2 * math.pi ** n / math.gamma(n) * r ** (D - 1)
    vals = _pullback_density(form, Z, T) * area
    if not np.all(np.isfinite(vals)):
        raise EvalSingular("integrand is not finite at Monte Carlo nodes")
    mean = neumaier_sum(vals) / samples
    err = float(np.std(vals) / math.sqrt(samples))
    return PairingResult(complex(mean), err, samples)


# ---------------------------------------------------------------------------
# public integrals


def _classify(form: Form) -> str:
    """'x' for real forms in dx and x only, 'y' for dy and y only, else 'complex'."""
    if form.basis != "real":
        return "complex"
    kinds = set()
    for (I, J), c in form.terms.items():
        if I:
            kinds.add("x")
        if J:
            kinds.add("y")
        for node in se._postorder([c]):
            if isinstance(node, se.Var):
                kinds.add(node.kind if node.kind in ("x", "y") else "complex")
            elif isinstance(node, se.Norm2):
                kinds.add("y" if node.kind == "y" else "complex")
    if kinds <= {"x"}:
        return "x"
    if kinds <= {"y"}:
        return "y"
    return "complex"


def sphere_integral(form: Form, radius: float = 1.0, N: int = 48, *, method: str = "auto", samples: int = 200_000,
                    seed: int = 0, tol: float = DEFAULT_TOL, max_doublings: int = 3) -> PairingResult:
    """Integral of a top-degree form over the sphere of the given radius.

    Complex forms on C^n integrate over S^(2n-1); real forms in x only (or y
    only) integrate over S^(l-1) in R^l (or i R^l).
    """
    kind = _classify(form)
    if kind in ("x", "y"):
        charts = real_sphere_charts(form.dim, radius, kind)
    else:
        n = form.dim
        if n > 3:
            if method == "deterministic":
                raise UnsupportedDimension(f"no deterministic sphere rule for n={n}")
            return _mc_sphere(fc.to_complex(form), n, radius, samples, seed)
        charts = [sphere_chart(n, radius)]
        form = fc.to_complex(form)
    return converge(lambda k: integrate(form, charts, k), N, tol=tol, max_doublings=max_doublings,
                    size=lambda k: node_count(form, charts, k))


def ball_integral(form: Form, radius: float = 1.0, N: int = 32, *, tol: float = DEFAULT_TOL,
                  max_doublings: int = 3) -> PairingResult:
    """Integral of a top-degree form over the ball of the given radius (C^n, R^l or i R^l)."""
    kind = _classify(form)
    if kind in ("x", "y"):
        charts = [real_ball_chart(form.dim, radius, kind)]
    else:
        if form.dim > 3:
            raise UnsupportedDimension(f"no deterministic ball rule for n={form.dim}")
        charts = [ball_chart(form.dim, radius)]
    return converge(lambda k: integrate(form, charts, k), N, tol=tol, max_doublings=max_doublings,
                    size=lambda k: node_count(form, charts, k))


def grothendieck_residue(h, n: int, eps: float = 0.5, N: int = 32, *, tol: float = 1e-12,
                         max_doublings: int = 3) -> PairingResult:
    """Torus integral of h * (1/2 pi i)^n dz_1..dz_n / (z_1...z_n) over {|z_j| = eps}."""
    h = se.parse(h, n) if isinstance(h, str) else se.as_expr(h)
    form = fc.cauchy_kernel(n).scale(h)
    charts = [torus_chart(n, eps)]
    return converge(lambda k: integrate(form, charts, k), N, tol=tol, max_doublings=max_doublings,
                    size=lambda k: node_count(form, charts, k))


# ---------------------------------------------------------------------------
# densities and cutoffs


class Density:
    """Real-analytic form omega(x) dx_I with an orientation sign.

    The complexification replaces x_j by z_j and dx_j by dz_j.
    """

    __slots__ = ("form", "orient")

    def __init__(self, form: Form, orient: int = 1):
        if form.basis != "real" or any(J for _, J in form.terms):
            form = _as_dx_form(form)
        self.form = form
        self.orient = 1 if orient >= 0 else -1

    @classmethod
    def top(cls, h, n: int, orient: int = 1) -> "Density":
        """h(x) dx_1 ^ ... ^ dx_n."""
        h = se.parse(h, n) if isinstance(h, str) else se.as_expr(h)
        return cls(Form(n, {(tuple(range(1, n + 1)), ()): h}, "real"), orient)

    @classmethod
    def of_degree(cls, h, n: int, dx: Sequence[int], orient: int = 1) -> "Density":
        h = se.parse(h, n) if isinstance(h, str) else se.as_expr(h)
        s, I = fc.sort_sign(dx)
        if not s:
            return cls(Form.zero(n, "real"), orient)
        return cls(Form(n, {(I, ()): se.mul(s, h)}, "real"), orient)

    @property
    def dim(self) -> int:
        return self.form.dim

    @property
    def degree(self) -> int:
        d = self.form.degree()
        return 0 if d is None else d

    def complexified(self) -> Form:
        return Form(self.dim, {(I, ()): se.complexify(c) for (I, _), c in self.form.terms.items()})

    def negated(self) -> "Density":
        return Density(self.form, -self.orient)

    def __repr__(self):
        return f"Density({self.form!r}, orient={self.orient})"


def _as_dx_form(form: Form) -> Form:
    if form.basis == "real" and not any(J for _, J in form.terms):
        return form
    if form.basis == "complex" and not any(J for _, J in form.terms):
        return Form(form.dim, dict(form.terms), "real")
    raise DimensionMismatch("densities are forms in dx only")


def _plateau(s: se.Expr, a: float, A: float) -> se.Expr:
    """Smooth function of s: 1 for s <= a^2, 0 for s >= A^2."""
    g_in = se.bump(se.add(A * A, se.mul(-1, s)), 0.0)
    g_out = se.bump(se.add(s, -a * a), 0.0)
    return se.mul(g_in, se.pow_(se.add(g_in, g_out), -1))


class Cutoff:
    """Plateau cutoff: ``box`` in the real coordinates x_j, or ``polydisk`` in |z_j|^2.

    Equal to 1 where every coordinate is inside ``inner`` and 0 where some
    coordinate is beyond ``outer``.
    """

    __slots__ = ("kind", "inner", "outer", "coords")

    def __init__(self, kind: str = "box", inner: float = 1.0, outer: float = 2.0, coords=None):
        if kind not in ("box", "polydisk"):
            raise ValueError(f"unknown cutoff kind {kind!r}")
        if not 0 < inner < outer:
            raise ValueError("need 0 < inner < outer")
        self.kind, self.inner, self.outer = kind, float(inner), float(outer)
        self.coords = tuple(coords) if coords is not None else None

    def expr(self, n: int) -> se.Expr:
        idx = self.coords or tuple(range(1, n + 1))
        if self.kind == "box":
            return se.mul(*[_plateau(se.pow_(se.x(j), 2), self.inner, self.outer) for j in idx])
        return se.mul(*[_plateau(se.norm2z([j]), self.inner, self.outer) for j in idx])

    def apply(self, cochain):
        """(chi tau1 + dbar chi ^ tau01, chi tau01), a representative of the same class near the plateau."""
        from .relcochain import RelCochain

        n = cochain.dim
        chi = self.expr(n)
        s1 = fc.to_complex(cochain.sigma1)
        s01 = fc.to_complex(cochain.sigma01)
        dchi = fc.dbar(Form.scalar(n, chi))
        t1 = s1.scale(chi) + fc.wedge(dchi, s01)
        return RelCochain(cochain.covering, cochain.bidegree, t1, s01.scale(chi))

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "inner": self.inner, "outer": self.outer}
        if self.coords:
            d["coords"] = list(self.coords)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Cutoff":
        return cls(d.get("kind", "box"), d.get("inner", 1.0), d.get("outer", 2.0), d.get("coords"))


# ---------------------------------------------------------------------------
# the pairing


def pairing_sign(n: int) -> int:
    """Sign (-1)^(n(n+1)/2) relating the integral to the orientation of R^n."""
    return -1 if (n * (n + 1) // 2) % 2 else 1


def default_nodes(n: int, localized: bool) -> int:
    if localized:
        return {1: 64, 2: 16, 3: 8}.get(n, 8)
    return {1: 64, 2: 48, 3: 16}.get(n, 16)


def _support_radius(support) -> float | None:
    kind = getattr(support, "kind", "point")
    if kind == "point":
        return 0.0
    if kind == "ball":
        return float(support.radius)
    return None


def pair(u, omega: Density, *, nodes: int | None = None, radius: float | None = None, cutoff: Cutoff | None = None,
         domain: str = "auto", y_radius: float = 0.5, tol: float = DEFAULT_TOL, max_doublings: int = 3,
         mc_samples: int = 200_000, seed: int = 0) -> PairingResult:
    """Duality pairing of a compactly supported hyperform with a real-analytic density.

    value = s_n * orient(u) * orient(omega) * (int_{R1} tau1 ^ w + int_{R01} tau01 ^ w)
    with w the complexified density, R01 = -dR1 and s_n = (-1)^(n(n+1)/2).
    Hyperforms supported on all of R^n need an explicit ``cutoff``; they are
    replaced by the cutoff representative and paired on a box x y-ball.
    """
    c = u.cochain
    n = c.dim
    if omega.dim != n:
        raise DimensionMismatch(f"density of dimension {omega.dim} against a hyperform on R^{n}")
    if omega.degree + u.p != n and not omega.form.is_zero:
        raise DimensionMismatch(f"density degree {omega.degree} does not complement p={u.p} in R^{n}")
    w = omega.complexified()
    sign = pairing_sign(n) * u.orient * omega.orient
    if cutoff is None and _support_radius(u.support) is None:
        raise SupportNotCompact("support is not compact; pass a cutoff")
    tau1 = fc.wedge(fc.to_complex(c.sigma1), w)
    tau01 = fc.wedge(fc.to_complex(c.sigma01), w)

    if cutoff is not None:
        rep = cutoff.apply(c)
        tau1 = fc.wedge(rep.sigma1, w)
        tau01 = fc.wedge(rep.sigma01, w)
        if cutoff.kind == "box":
            vol, bnd = box_y_charts(n, cutoff.outer, y_radius)
            N = nodes or default_nodes(n, True)
        else:
            vol, bnd = polydisk_charts(n, radius or 0.5 * (cutoff.inner + cutoff.outer))
            N = nodes or default_nodes(n, False)
    elif domain == "polydisk":
        vol, bnd = polydisk_charts(n, radius or _default_radius(u.support))
        N = nodes or default_nodes(n, False)
    else:
        r = radius or _default_radius(u.support)
        if n > 3:
            if not tau1.is_zero:
                raise UnsupportedDimension(f"no ball rule for n={n}")
            res = _mc_sphere(tau01, n, r, mc_samples, seed)
            return PairingResult(-sign * res.value, res.error, res.resolution)
        vol, bnd = ball_chart(n, r), [sphere_chart(n, r)]
        N = nodes or default_nodes(n, False)

    def value(k):
        v = 0j
        if not tau1.is_zero:
            v += integrate(tau1, [vol], k)
        if not tau01.is_zero:
            v -= integrate(tau01, bnd, k)
        return sign * v

    def size(k):
        s = node_count(tau1, [vol], k) if not tau1.is_zero else 0
        return s + (node_count(tau01, bnd, k) if not tau01.is_zero else 0)

    return converge(value, N, tol=tol, max_doublings=max_doublings, size=size)


def _default_radius(support) -> float:
    r = _support_radius(support)
    return 0.5 if not r else 1.5 * r


# ---------------------------------------------------------------------------
# partial integration over a fiber polydisk


def _split_sign(I, J, d: int):
    """Sign moving dz_I ^ dzb_J into (base part) ^ (fiber part); fiber coordinates are 1..d."""
    seq = [("z", i) for i in I] + [("zb", j) for j in J]
    base = [t for t in seq if t[1] > d]
    fib = [t for t in seq if t[1] <= d]
    pos = {t: k for k, t in enumerate(seq)}
    order = [pos[t] for t in base + fib]
    inv = sum(1 for a in range(len(order)) for b in range(a + 1, len(order)) if order[a] > order[b])
    return -1 if inv % 2 else 1


@dataclass
class _FiberPlan:
    base_key: tuple
    fiber_key: tuple
    sign: int
    coeff: se.Expr


@dataclass
class FiberIntegral:
    """Quadrature-backed partial integral; ``form`` has Numeric coefficients on the base."""

    form: Form
    radius: float
    nodes: int
    parts: dict = field(default_factory=dict)


def _fiber_rules(chart: Chart, Zb: np.ndarray, N: int, ifaces, d: int):
    """Per-base-point composite rules for a fiber chart; yields (base idx, P (g, Q, k), W (g, Q))."""
    Mb = len(Zb)
    k = chart.k
    per_axis = []
    for b, ax in enumerate(chart.axes):
        brs = [list(ax.breaks) for _ in range(Mb)]
        if ifaces:
            G = SCAN_GRID // 2
            t = np.linspace(ax.lo, ax.hi, G)
            P = np.repeat(_generic_params(chart), G, axis=0)
            P[:, b] = t
            Zf, _ = chart.fmap(P)
            Zf = Zf[:, :d]
            full = np.concatenate([np.repeat(Zf[None], Mb, 0), np.repeat(Zb[:, None, :], G, 1)], axis=2)
            V = se.evaluate(list(ifaces), full.reshape(Mb * G, -1), check=False).real.reshape(Mb, G, -1)
            ch = _sign_changes(V)
            bi, gi, mi = np.nonzero(ch)
            if len(bi):
                base0 = _generic_params(chart)[0]

                def fun(tt):
                    Q = np.repeat(base0[None], len(tt), 0)
                    Q[:, b] = tt
                    Zq, _ = chart.fmap(Q)
                    pts = np.concatenate([Zq[:, :d], Zb[bi]], axis=1)
                    vals = se.evaluate(list(ifaces), pts, check=False).real
                    return vals[np.arange(len(tt)), mi]

                roots = _bisect(fun, t[gi], t[gi + 1], V[bi, gi, mi])
                for bb, r in zip(bi, roots):
                    brs[bb].append(float(r))
        per_axis.append([_merge_breaks(x, ax.lo, ax.hi) for x in brs])
    # group base points with identical break counts
    groups: dict = {}
    for i in range(Mb):
        key = tuple(len(per_axis[b][i]) for b in range(k))
        groups.setdefault(key, []).append(i)
    for key, idx in groups.items():
        idx = np.array(idx)
        Ps, Ws = [], []
        for i in idx:
            nodes, weights = [], []
            for b, ax in enumerate(chart.axes):
                t, w = _axis_rule(ax, N, per_axis[b][i])
                nodes.append(t)
                weights.append(w)
            grids = np.meshgrid(*nodes, indexing="ij")
            wg = np.meshgrid(*weights, indexing="ij")
            Ps.append(np.stack([g.ravel() for g in grids], axis=1))
            Ws.append(np.prod([g.ravel() for g in wg], axis=0))
        yield idx, np.stack(Ps), np.stack(Ws)


def _fiber_closure(plans: list[_FiberPlan], charts: list[Chart], d: int, N: int, ifaces):
    coeffs = [p.coeff for p in plans]

    def fn(Zb):
        Zb = np.atleast_2d(Zb)
        out = np.zeros(len(Zb), dtype=complex)
        for ch in charts:
            for idx, P, W in _fiber_rules(ch, Zb, N, ifaces, d):
                g, Q, k = P.shape
                Zf, Tf = ch.fmap(P.reshape(g * Q, k))
                pts = np.concatenate([Zf[:, :d], np.repeat(Zb[idx], Q, axis=0)], axis=1)
                vals = se.evaluate(coeffs, pts, check=False)
                acc = np.zeros(g * Q, dtype=complex)
                for col, p in enumerate(plans):
                    rows = _monomial_rows(Tf, *p.fiber_key, "complex")
                    det = np.linalg.det(rows) if rows.shape[1] else np.ones(g * Q)
                    acc += p.sign * vals[:, col] * det
                bad = ~np.isfinite(acc)
                if bad.any():
                    raise EvalSingular("fiber integrand is not finite at quadrature nodes")
                contrib = (acc * W.reshape(-1)).reshape(g, Q)
                out[idx] += ch.sign * contrib.sum(axis=1)
        return out

    return fn


def disk_partial_integral(form: Form, d: int = 1, radius: float = 1.0, *, part: str = "volume", nodes: int = 48,
                          tag: str = "") -> Form:
    """Partial integral over the fiber polydisk D1 = {|z_j| <= radius, j <= d}.

    Each monomial is written (base) ^ (fiber).  With ``part="volume"`` the
    fiber-(d, d) terms are integrated over D1; with ``part="boundary"`` the
    fiber-(d, d-1) terms over dD1.  The result is a form in the remaining
    coordinates (renumbered from 1) whose coefficients are quadrature closures.
    """
    form = fc.to_complex(form)
    m = form.dim
    if not 1 <= d < m:
        raise DimensionMismatch(f"fiber dimension {d} must lie in 1..{m - 1}")
    want = (d, d) if part == "volume" else (d, d - 1)
    groups: dict = {}
    for (I, J), c in form.terms.items():
        If = tuple(i for i in I if i <= d)
        Jf = tuple(j for j in J if j <= d)
        if (len(If), len(Jf)) != want:
            continue
        Ib = tuple(i - d for i in I if i > d)
        Jb = tuple(j - d for j in J if j > d)
        groups.setdefault((Ib, Jb), []).append(_FiberPlan((Ib, Jb), (If, Jf), _split_sign(I, J, d), c))
    vol, faces = polydisk_charts(d, radius, coords=range(1, d + 1), dim=d)
    charts = [vol] if part == "volume" else faces
    terms = {}
    for bkey, plans in sorted(groups.items()):
        ifaces = interfaces([p.coeff for p in plans])
        fn = _fiber_closure(plans, charts, d, nodes, ifaces)
        key = f"fiber:{tag}:{part}:{d}:{radius!r}:{nodes}:{bkey}"
        terms[bkey] = se.numeric(fn, key, m - d)
    return Form(m - d, terms)


__all__ = ["PairingResult", "Density", "Cutoff", "Chart", "Axis", "pair", "sphere_integral", "ball_integral",
           "grothendieck_residue", "disk_partial_integral", "integrate", "converge", "interfaces", "sphere_chart",
           "ball_chart", "torus_chart", "polydisk_charts", "real_sphere_charts", "real_ball_chart", "box_y_charts",
           "pairing_sign", "detect_breaks"]
