import pytest
from hypothesis import given, strategies as st

from hyperform import formcalc as fc
from hyperform import hyperops as ho
from hyperform import symexpr as se
from hyperform.errors import DimensionMismatch, NotHolomorphic
from hyperform.partitions import ConeSpec
from hyperform.relcochain import (CoveringSpec, RelCochain, bigD, class_del, cohomologous, cup, is_cocycle,
                                  vartheta)

COEFFS = ["z1*zb2", "exp(zb1 + z2)", "zb2^2 - z1", "cos(z1*zb2)", "1"]


@st.composite
def cochains(draw, q=1):
    s1 = fc.Form(2, {((), J): se.parse(draw(st.sampled_from(COEFFS)), 2) for J in [(1,), (2,)][: draw(st.integers(1, 2))]})
    s01 = fc.Form.scalar(2, se.parse(draw(st.sampled_from(COEFFS)), 2))
    return RelCochain(CoveringSpec.point(2), (0, q), s1, s01)


def zero(c):
    return bool(fc.check_zero(c.sigma1, 32)) and bool(fc.check_zero(c.sigma01, 32))


@given(cochains())
def test_vartheta_squared(c):
    assert zero(vartheta(vartheta(c)))


@given(cochains())
def test_vartheta_output_is_cocycle(c):
    assert is_cocycle(vartheta(c), 64).ok


def test_bigD_squared_on_real_basis():
    c = RelCochain(CoveringSpec.real(2), (0, 1), fc.Form(2, {((1,), ()): se.parse("x1*y2", 2)}, "real"),
                   fc.Form.scalar(2, se.parse("x2^2*y1", 2), "real"), basis="real")
    assert zero(bigD(bigD(c)))


@given(cochains(), st.sampled_from(["exp(z1)", "z1*z2 + 3", "sin(z2)"]))
def test_cup_leibniz(c, eta_text):
    eta = fc.Form(2, {((2,), ()): se.parse(eta_text, 2)})
    lhs, rhs = vartheta(cup(c, eta)), cup(vartheta(c), eta)
    assert zero(lhs - rhs)


def test_cup_rejects_non_holomorphic():
    c = ho.delta(2).cochain
    with pytest.raises(NotHolomorphic):
        cup(c, fc.Form(2, {((1,), ()): se.parse("zb1", 2)}))


def test_known_cocycles():
    assert is_cocycle(ho.delta(1).cochain).ok
    assert is_cocycle(ho.delta(3).cochain).ok
    assert is_cocycle(class_del(ho.delta(2).cochain)).ok


def test_bad_cochain_fails():
    bad = RelCochain(CoveringSpec.point(1), (0, 1), None, fc.Form.scalar(1, se.parse("zb1", 1)))
    rep = is_cocycle(bad)
    assert not rep.ok and rep.residual > 1e-3


def test_cohomologous_witness():
    a = ho.delta(2).cochain
    # build b = a - vartheta(w) at the matching bidegree
    p, q = a.bidegree
    w = RelCochain(a.covering, (p, q - 1), fc.Form(2, {((), (1,)): se.parse("z2*zb1", 2)}),
                   fc.Form.scalar(2, se.parse("exp(z1)*zb2", 2)))
    b = a - vartheta(w)
    assert cohomologous(a, b, w)
    assert not cohomologous(a, b.scale(2), w)


def test_bidegree_checked():
    with pytest.raises(DimensionMismatch):
        RelCochain(CoveringSpec.point(2), (0, 1), fc.Form.scalar(2, se.parse("1", 2)), None)
    with pytest.raises(DimensionMismatch):
        ho.delta(1).cochain + ho.delta(2).cochain


def test_covering_union():
    pt, real = CoveringSpec.point(2), CoveringSpec.real(2)
    b1, b2 = CoveringSpec.ball(2, 0.5), CoveringSpec.ball(2, 1.5)
    assert pt.union(real) == real
    assert b1.union(b2) == b2
    cone = CoveringSpec(2, "cone", cone=ConeSpec([[1.0, 0.0], [0.0, 1.0]]))
    assert cone.union(pt) == cone
    with pytest.raises(DimensionMismatch):
        pt.union(CoveringSpec.point(3))
    for c in (pt, b1, cone, CoveringSpec.product([("z", (1,)), ("y", (2,))])):
        assert CoveringSpec.from_dict(c.to_dict()) == c
