import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hyperform import formcalc as fc
from hyperform import symexpr as se
from hyperform.errors import ConeEmpty, PartitionInfeasible
from hyperform.partitions import ConePartition, ConeSpec, ProductPartition

COEFFS = ["1", "z1*zb2", "exp(zb1)", "z2^2 + zb1", "sin(z1*zb1)", "x1*y2^2"]


@st.composite
def forms(draw, dim=2, basis="complex"):
    terms = {}
    for _ in range(draw(st.integers(1, 3))):
        I = tuple(sorted(draw(st.sets(st.integers(1, dim), max_size=dim))))
        J = tuple(sorted(draw(st.sets(st.integers(1, dim), max_size=dim))))
        terms[(I, J)] = se.parse(draw(st.sampled_from(COEFFS)), dim)
    return fc.Form(dim, terms, basis)


def zero(F):
    return bool(fc.check_zero(F, 32))


@given(forms())
def test_d_squared(a):
    assert zero(fc.d(fc.d(a)))
    assert zero(fc.del_(fc.del_(a)))
    assert zero(fc.dbar(fc.dbar(a)))
    assert zero(fc.d(a) - fc.del_(a) - fc.dbar(a))


@given(forms(basis="real"))
def test_rho_commutes(a):
    assert zero(fc.rho(fc.d(a)) - fc.dbar(fc.rho(a)))


@given(forms(), forms())
def test_wedge_leibniz(a, b):
    # d(a^b) = da^b + (-1)^deg(a) a^db, per homogeneous part of a
    for (p, q) in a.degrees():
        ap = a.part(p, q)
        sign = -1 if (p + q) % 2 else 1
        lhs = fc.d(fc.wedge(ap, b))
        rhs = fc.wedge(fc.d(ap), b) + fc.wedge(ap, fc.d(b)).scale(sign)
        assert zero(lhs - rhs)


def test_wedge_anticommutes():
    a, b = fc.Form.dz(1, 2), fc.Form.dzb(2, 2)
    assert zero(fc.wedge(a, b) + fc.wedge(b, a))
    assert fc.wedge(a, a).is_zero


def test_sort_sign():
    assert fc.sort_sign([2, 1])[0] == -1
    assert fc.sort_sign([3, 1, 2])[0] == 1


@pytest.mark.parametrize("l,expected", [(1, 1 / 2), (2, 1 / (2 * math.pi)), (3, 1 / (4 * math.pi))])
def test_angular_constants(l, expected):
    assert complex(fc.angular_constant(l)) == pytest.approx(expected, rel=1e-15)


def test_bm_kernel_is_closed_off_origin():
    for n in (1, 2, 3):
        k = fc.bm_kernel(n)
        assert k.bidegree() == (n, n - 1)
        assert zero(fc.dbar(k))


def test_dx_dy_expansion():
    # dx1 = (dz1 + dzb1)/2 ... so dx1^dy1 = (i/2) dz1^dzb1
    f = fc.to_complex(fc.wedge(fc.Form.dx(1, 1), fc.Form.dy(1, 1)))
    assert zero(f - fc.Form(1, {((1,), (1,)): se.parse("i/2", 1)}))


def test_restrict_to_slice():
    a = fc.Form(2, {((1, 2), ()): se.parse("z2", 2), ((2,), ()): se.parse("z1 + z2^2", 2)})
    r = fc.restrict_to_slice(a, 1)
    assert zero(r - fc.Form(1, {((1,), ()): se.parse("z1^2", 1)}))


# partitions


def _sample_y(n, k=300, seed=1):
    rng = np.random.default_rng(seed)
    Y = rng.normal(size=(k, n))
    X = rng.normal(size=(k, n)) * 0.3
    return X + 1j * Y, Y


def test_cone_validation():
    with pytest.raises(ConeEmpty):
        ConeSpec([[1.0, 0.0], [-1.0, 0.0]])
    with pytest.raises(ConeEmpty):
        ConeSpec([[0.0, 0.0]])
    c = ConeSpec([[1.0, 1.0]])
    assert c.contains(np.array([[1.0, 0.2]]))[0]
    assert not c.contains(np.array([[-1.0, 0.2]]))[0]
    with pytest.raises(PartitionInfeasible):
        ConePartition.for_cone(ConeSpec([[1.0, 0.0]], 2))


@pytest.mark.parametrize("etas", [[[1.0]], [[-1.0]], [[1.0, 0.0], [0.0, 1.0]], [[1.0, 1.0], [-1.0, 1.0]]])
def test_cone_partition_sums_to_one(etas):
    cone = ConeSpec(etas)
    part = ConePartition.for_cone(cone)
    n = cone.n
    Z, Y = _sample_y(n)
    members = [part.phi(k) for k in part.labels()]
    V = se.evaluate(members, Z)
    assert np.allclose(V.sum(axis=1), 1.0, atol=1e-12)
    # member k vanishes on the closed opposite half-space
    for k, eta in enumerate(part.etas):
        off = Y @ eta <= 0
        assert np.allclose(V[off, k], 0.0, atol=1e-14)


def test_product_partition_sums_to_one():
    part = ProductPartition([("z", (1,)), ("y", (2,))])
    Z = np.random.default_rng(3).normal(size=(200, 2)) + 0.5j
    V = se.evaluate([part.phi(k) for k in part.labels()], Z)
    assert np.allclose(V.sum(axis=1), 1.0, atol=1e-12)
