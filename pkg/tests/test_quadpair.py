import math

import pytest
from hypothesis import given, strategies as st

from hyperform import formcalc as fc
from hyperform import hyperops as ho
from hyperform import quadpair as qp
from hyperform import symexpr as se
from hyperform.errors import QuadratureDiverged, SupportNotCompact


@pytest.mark.parametrize("r", [0.5, 1.0, 1.7])
def test_sphere_s3_volume_via_stokes(r):
    # d(zb1 dz1^dz2^dzb2) = 4 dV on C^2, so the sphere integral is 4 vol(B_r)
    F = fc.Form(2, {((1, 2), (2,)): se.parse("zb1", 2)})
    assert qp.sphere_integral(F, radius=r, N=16).value == pytest.approx(2 * math.pi ** 2 * r ** 4, rel=1e-13)


@pytest.mark.parametrize("r", [0.3, 1.0])
def test_disk_area(r):
    area = fc.Form(1, {((1,), (1,)): se.parse("i/2", 1)})
    assert qp.ball_integral(area, radius=r, N=16).value == pytest.approx(math.pi * r * r, rel=1e-13)


def test_circle_in_real_plane():
    x1 = fc.Form.scalar(2, se.parse("x1", 2), "real")
    x2 = fc.Form.scalar(2, se.parse("x2", 2), "real")
    W = fc.to_complex(fc.wedge(x1, fc.Form.dx(2, 2)) - fc.wedge(x2, fc.Form.dx(1, 2)))
    assert qp.integrate(W, qp.real_sphere_charts(2, 1.0, "x"), 16) == pytest.approx(2 * math.pi, rel=1e-13)


def test_bm_kernel_monte_carlo_n4():
    res = qp.sphere_integral(fc.bm_kernel(4), method="mc", samples=20_000, seed=1)
    assert abs(res.value - 1) <= max(5 * res.error, 1e-3)


def test_orientation_flip():
    u = ho.delta(1)
    a = qp.pair(u, qp.Density.top("exp(x1)", 1)).value
    b = qp.pair(u, qp.Density.top("exp(x1)", 1, orient=-1)).value
    c = qp.pair(u.with_orient(-u.orient), qp.Density.top("exp(x1)", 1)).value
    assert b == pytest.approx(-a, abs=1e-14)
    assert c == pytest.approx(-a, abs=1e-14)


@given(st.lists(st.integers(-3, 3), min_size=4, max_size=4))
def test_residue_of_polynomial_is_value_at_origin(cs):
    h = f"{cs[0]} + {cs[1]}*z1 + {cs[2]}*z1*z2^2 + {cs[3]}*z2^3"
    assert qp.grothendieck_residue(h, 2).value == pytest.approx(cs[0], abs=1e-12)


@pytest.mark.parametrize("r1", [0.2, 0.5, 1.1])
def test_pair_independent_of_radius(r1):
    w = qp.Density.top("cos(x1)*exp(x2) + x2", 2)
    assert qp.pair(ho.delta(2), w, radius=r1).value == pytest.approx(1.0, abs=1e-10)


def test_doubling_reduces_error():
    # residue integrand of exp(3 z1 + z2) on a torus; exact value 1
    F = fc.Form(2, {((1, 2), ()): se.parse("exp(3*z1 + z2)/((2*pi*i)^2*z1*z2)", 2)})
    errs = [abs(qp.integrate(F, [qp.torus_chart(2, 0.5)], N) - 1) for N in (2, 4, 8, 16, 32)]
    assert errs[0] > errs[1] > errs[2] > errs[3]
    assert errs[4] < 1e-13


def test_converge_reports_divergence():
    with pytest.raises(QuadratureDiverged):
        qp.converge(lambda N: complex((-1) ** N * N), 2, tol=1e-9, max_doublings=2)


def test_converge_estimate():
    res = qp.converge(lambda N: 1 + 2.0 ** (-N), 8, tol=1e-6)
    assert res.value == pytest.approx(1 + 2.0 ** (-res.resolution))
    assert res.error < 1e-6


def test_noncompact_support_needs_cutoff():
    u = ho.embed_real_analytic("1", 1)
    with pytest.raises(SupportNotCompact):
        qp.pair(u, qp.Density.top("exp(-x1^2)", 1))


def test_pairing_with_cutoff_matches_scipy_oracle():
    # embed(1) against h times the box cutoff; oracles from scipy quad over the real line, frozen
    u = ho.embed_real_analytic("1", 1)
    cut = qp.Cutoff("box", 1.0, 2.0)
    for h, ref in (("cos(x1)", 1.9238134593346201), ("exp(x1)", 4.705437995230804)):
        assert qp.pair(u, qp.Density.top(h, 1), cutoff=cut).value == pytest.approx(ref, abs=1e-9)


def test_density_wrong_degree():
    with pytest.raises(Exception):
        qp.pair(ho.delta(2), qp.Density.of_degree("1", 2, [1]))
