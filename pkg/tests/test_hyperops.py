import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hyperform import formcalc as fc
from hyperform import hyperops as ho
from hyperform import quadpair as qp
from hyperform import symexpr as se
from hyperform.errors import (DimensionMismatch, ModeUnavailable, NotExtendable, NotHolomorphic, NotProper,
                              PartitionInfeasible, RepresentativeHasTau1, SingularOnSlice, UnsupportedProjection)
from hyperform.partitions import ConeSpec
from hyperform.relcochain import is_cocycle

UP, DOWN = ConeSpec([[1.0]]), ConeSpec([[-1.0]])
QUAD = ConeSpec([[1.0, 0.0], [0.0, 1.0]])
S = 1 / math.sqrt(2)
GAMMA = ConeSpec([[S, S], [-S, S]])
BOX = qp.Cutoff("box", 1.0, 2.0)


def pv(u, h, **kw):
    return qp.pair(u, qp.Density.top(h, u.n), **kw).value


def test_delta_cochain_n1():
    u = ho.delta(1)
    assert u.cochain.sigma1.is_zero
    expected = fc.Form.scalar(1, se.parse("1/(2*pi*i*z1)", 1))
    assert fc.check_zero(u.cochain.sigma01 - expected)
    assert u.support.kind == "point"


@pytest.mark.parametrize("n", [1, 2, 3])
def test_delta_is_cocycle(n):
    assert is_cocycle(ho.delta(n).cochain).ok
    assert is_cocycle(ho.delta_form(n).cochain).ok


def test_delta_form_pairs_with_function():
    for n, h in ((1, "exp(x1)"), (2, "cos(x1) + x2")):
        w = qp.Density.of_degree(h, n, [])
        assert qp.pair(ho.delta_form(n), w).value == pytest.approx(1.0, abs=1e-8)


def test_delta_rejects_n0():
    with pytest.raises(DimensionMismatch):
        ho.delta(0)


def test_embed_one_generator():
    u = ho.embed_real_analytic("1", 1)
    # -1/2 * y/|y| written in z, zb
    ref = se.parse("-1/2*y1*norm2y(1)^(-1/2)", 1)
    assert se.simplify_zero(se.add(u.cochain.sigma01.coeff(), se.mul(-1, ref)))


@pytest.mark.parametrize("f", ["1/x1", "log(x1)", "1/(x1 - 1)"])
def test_embed_not_extendable(f):
    with pytest.raises(NotExtendable):
        ho.embed_real_analytic(f, 1)


def test_x_times_delta_is_zero():
    u = ho.mult("x1", ho.delta(1))
    for h in ("exp(x1)", "cos(x1)", "1"):
        assert pv(u, h) == pytest.approx(0.0, abs=1e-12)


@given(st.lists(st.integers(-4, 4), min_size=3, max_size=3))
def test_polynomial_times_delta(cs):
    f = f"{cs[0]} + {cs[1]}*x1 + {cs[2]}*x1^2"
    assert pv(ho.mult(f, ho.delta(1)), "exp(x1)") == pytest.approx(cs[0], abs=1e-10)


def test_mult_needs_holomorphic_extension():
    with pytest.raises(NotHolomorphic):
        ho.mult("zb1", ho.delta(1))


def test_bv_jump_is_delta():
    F = "-1/(2*pi*i*z1)"
    u = ho.boundary_value(F, UP) - ho.boundary_value(F, DOWN)
    assert pv(u, "cos(x1)", cutoff=BOX) == pytest.approx(1.0, abs=1e-9)


def test_bv_full_cone_is_embedding():
    full = ConeSpec([], 1)
    a = ho.boundary_value("exp(z1)", full)
    b = ho.embed_real_analytic("exp(x1)", 1)
    assert fc.check_zero(a.cochain.sigma01 - b.cochain.sigma01)


def test_bv_kernel_anti_characteristic_n1():
    # b+ = (0, -F [y > 0]) and b- = (0, F [y < 0]) up to the y = 0 convention
    for cone, sign, y in ((UP, -1, 0.7), (DOWN, 1, -0.7)):
        k = ho.bv_kernel(cone)
        assert se.eval(k.coeff(), [0.2 + 1j * y]) == pytest.approx(sign)
        assert se.eval(k.coeff(), [0.2 - 1j * y]) == pytest.approx(0)


def test_bv_errors():
    with pytest.raises(PartitionInfeasible):
        ho.boundary_value("1", ConeSpec([[1.0, 0.0]]), 2)
    with pytest.raises(DimensionMismatch):
        ho.boundary_value("1", QUAD, 3)


def test_bv_n2_cocycle_and_support():
    u = ho.boundary_value("1/((z1 + i)*(z2 + i))", QUAD)
    assert is_cocycle(u.cochain).ok
    assert ho.support_in_cone(u, QUAD)
    assert not ho.support_in_cone(u, ConeSpec([[-1.0, 0.0], [0.0, -1.0]]))


def test_support_in_cone_needs_tau1_zero():
    dc = ho.cutoff_representative(ho.delta(1), qp.Cutoff("polydisk", 0.3, 0.7))
    with pytest.raises(RepresentativeHasTau1):
        ho.support_in_cone(dc, UP)


def test_derivative_of_delta():
    u = ho.partial_derivative(1, ho.delta(1))
    assert pv(u, "exp(2*x1)") == pytest.approx(-2.0, abs=1e-10)
    with pytest.raises(DimensionMismatch):
        ho.partial_derivative(2, ho.delta(1))


def test_derivative_leibniz_at_pairing_level():
    # d(x1 delta)/dx1 = delta + x1 d(delta)/dx1, and x1 delta = 0
    lhs = ho.partial_derivative(1, ho.mult("x1", ho.delta(1)))
    rhs = ho.delta(1) + ho.mult("x1", ho.partial_derivative(1, ho.delta(1)))
    for h in ("exp(x1)", "cos(x1) + x1"):
        assert pv(lhs, h) == pytest.approx(pv(rhs, h), abs=1e-10)


def test_hyper_d_matches_embedded_differential():
    f = "x1^3"
    u = ho.hyper_d(ho.embed_real_analytic(f, 1))
    v = ho.embed_form(fc.d(fc.Form.scalar(1, se.parse(f, 1), "real")))
    w = qp.Density.of_degree("exp(x1)", 1, [])
    a = qp.pair(u, w, cutoff=BOX).value
    b = qp.pair(v, w, cutoff=BOX).value
    assert a == pytest.approx(b, abs=1e-9)


def test_cutoff_representative_same_class():
    u = ho.delta(2)
    dc = ho.cutoff_representative(u, qp.Cutoff("polydisk", 0.3, 0.7))
    assert is_cocycle(dc.cochain).ok
    assert pv(dc, "x1*x2 + 3", domain="polydisk", radius=0.5, nodes=24) == pytest.approx(3.0, abs=1e-8)


def test_external_product_modes_and_errors():
    d = ho.delta(1)
    p = ho.external_product([d, d], "stein")
    assert (p.p, p.n) == (0, 2) and is_cocycle(p.cochain).ok
    dc = ho.cutoff_representative(d, qp.Cutoff("polydisk", 0.3, 0.7))
    with pytest.raises(ModeUnavailable):
        ho.external_product([dc, dc], "stein")
    with pytest.raises(ValueError):
        ho.external_product([d, d], "other")


def test_external_product_with_embedding():
    # delta(x1) * 1(x2) against exp(x1) cos(x2) h-cutoff in x2
    u = ho.external_product([ho.delta(1), ho.embed_real_analytic("1", 1)], "stein")
    assert is_cocycle(u.cochain).ok


def test_fiber_integral_matches_hand_formula():
    v = ho.fiber_integrate(ho.delta(2), 1, radius=1.0)
    z = 0.3 + 0.4j
    a = abs(z) ** 2
    t01 = 1 / (z * (1 + a)) / (2j * math.pi)
    t1 = -1 / (1 + a) ** 2 / (2j * math.pi)
    assert se.eval(v.cochain.sigma01.coeff(), [z]) == pytest.approx(t01, abs=1e-12)
    assert se.eval(v.cochain.sigma1.coeff((), (1,)), [z]) == pytest.approx(t1, abs=1e-12)
    assert pv(v, "exp(x1)") == pytest.approx(1.0, abs=1e-9)


def test_fiber_integral_errors():
    with pytest.raises(NotProper):
        ho.fiber_integrate(ho.embed_real_analytic("1", 2), 1)
    with pytest.raises(UnsupportedProjection):
        ho.fiber_integrate(ho.delta(1), 1)


def test_restriction_equals_slice_bv():
    for f, g in (("1", "1"), ("z2^2", "z1^2")):
        a = pv(ho.restrict_boundary_value(f, GAMMA), "cos(x1)", cutoff=BOX)
        b = pv(ho.boundary_value(g, UP), "cos(x1)", cutoff=BOX)
        assert a == pytest.approx(b, abs=1e-8)


def test_restriction_errors():
    with pytest.raises(SingularOnSlice):
        ho.restrict_boundary_value("1/z1", GAMMA)
    with pytest.raises(DimensionMismatch):
        ho.restrict_boundary_value("1", UP)


def test_linear_combinations_and_orient():
    d = ho.delta(1)
    u = d.scale(3) - d
    assert pv(u, "exp(x1)") == pytest.approx(2.0, abs=1e-10)
    assert pv(-d, "exp(x1)") == pytest.approx(-1.0, abs=1e-10)
    with pytest.raises(DimensionMismatch):
        d + ho.delta(2)
