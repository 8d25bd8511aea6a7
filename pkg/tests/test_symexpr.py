import cmath

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, strategies as st

from hyperform import symexpr as se
from hyperform.errors import ParseError, SerializationError

ATOMS = ["z1", "zb1", "z2", "zb2", "x1", "y2", "i", "2", "3/4", "pi"]


@st.composite
def exprs(draw, depth=3):
    if depth == 0 or draw(st.booleans()):
        return draw(st.sampled_from(ATOMS))
    kind = draw(st.sampled_from(["+", "*", "-", "^", "exp", "cos", "sin"]))
    a = draw(exprs(depth=depth - 1))
    if kind in "+*-":
        b = draw(exprs(depth=depth - 1))
        return f"({a}) {kind} ({b})"
    if kind == "^":
        return f"({a})^{draw(st.integers(0, 3))}"
    return f"{kind}({a})"


PT = np.array([0.3 + 0.7j, -0.4 + 0.2j])


@given(exprs())
def test_parse_print_roundtrip(text):
    e = se.parse(text, 2)
    s = se.to_string(e)
    e2 = se.parse(s, 2)
    assert se.to_string(e2) == s
    assert se.eval(e, PT) == pytest.approx(se.eval(e2, PT), rel=1e-12, abs=1e-12)


def test_eval_matches_cmath():
    z1, z2 = PT
    e = se.parse("exp(z1)*zb2 + sin(z1*z2) - log(1 + z1)/sqrt(2 + z2)", 2)
    ref = cmath.exp(z1) * z2.conjugate() + cmath.sin(z1 * z2) - cmath.log(1 + z1) / cmath.sqrt(2 + z2)
    assert se.eval(e, PT) == pytest.approx(ref, rel=1e-14)


def test_real_coordinates():
    e = se.parse("x1 + i*y1", 1)
    assert se.eval(e, [1.5 - 2j]) == pytest.approx(1.5 - 2j)


def _sympy_wirtinger(text):
    z, zb = sp.symbols("z zb")
    x, y = sp.symbols("x y", real=True)
    f = sp.sympify(text.replace("^", "**"), locals={"z1": z, "zb1": zb, "i": sp.I})
    return f, z, zb


@pytest.mark.parametrize("text", ["z1^3*zb1^2", "exp(z1*zb1)", "sin(z1)*zb1 + cos(zb1^2)", "z1/(1 + zb1^2)"])
def test_wirtinger_against_sympy(text):
    f, z, zb = _sympy_wirtinger(text)
    e = se.parse(text, 1)
    p = 0.4 - 0.3j
    subs = {z: p, zb: p.conjugate()}
    for var, sym in (("z1", z), ("zb1", zb)):
        ref = complex(sp.diff(f, sym).evalf(subs=subs))
        assert se.eval(se.diff(e, var), [p]) == pytest.approx(ref, rel=1e-12)


def test_real_derivatives_from_wirtinger():
    e = se.parse("x1^2*y1 + exp(x1)", 1)
    p = [0.3 + 0.5j]
    x, y = 0.3, 0.5
    assert se.eval(se.diff(e, "x1"), p) == pytest.approx(2 * x * y + np.exp(x))
    assert se.eval(se.diff(e, "y1"), p) == pytest.approx(x * x)


def test_achi_convention():
    e = se.achi(se.parse("x1", 1))
    assert se.eval(e, [0.0]) == 1
    assert se.eval(e, [-1.0]) == 1
    assert se.eval(e, [1.0]) == 0


@pytest.mark.parametrize("bad", ["", "1 +", "z1 ** * 2", "foo(z1)", "(z1", "z0"])
def test_parse_errors(bad):
    with pytest.raises(ParseError) as ei:
        se.parse(bad, 1)
    assert ei.value.exit_code == 2


def test_numeric_not_serializable():
    e = se.numeric(lambda Z: Z[:, 0], "probe", 1)
    with pytest.raises(SerializationError):
        se.to_string(e)


def test_zero_test_paths():
    assert se.simplify_zero(se.parse("z1*zb1 - zb1*z1", 1))
    assert se.simplify_zero(se.parse("sin(z1)^2 + cos(z1)^2 - 1", 1))
    assert not se.simplify_zero(se.parse("z1 - zb1", 1))
