import math

import pytest

from hyperform import formcalc as fc
from hyperform import hyperops as ho
from hyperform import jsonio as jio
from hyperform import quadpair as qp
from hyperform import symexpr as se
from hyperform.errors import ParseError, SerializationError
from hyperform.partitions import ConeSpec

S = 1 / math.sqrt(2)


def _samples():
    d = ho.delta(1)
    dc = ho.cutoff_representative(d, qp.Cutoff("polydisk", 0.3, 0.7))
    return {
        "delta": ho.delta(2),
        "delta_form": ho.delta_form(1),
        "embed": ho.embed_real_analytic("exp(x1)*x2", 2),
        "bv1": ho.boundary_value("-1/(2*pi*i*z1)", ConeSpec([[1.0]])),
        "bv2": ho.boundary_value("1/((z1+i)*(z2+i))", ConeSpec([[1.0, 0.0], [0.0, 1.0]])),
        "stein": ho.external_product([d, d], "stein"),
        "general": ho.external_product([dc, dc], "general"),
        "restrict": ho.restrict_boundary_value("z1+z2", ConeSpec([[S, S], [-S, S]])),
        "deriv": ho.partial_derivative(1, d),
    }


@pytest.mark.parametrize("name", list(_samples()))
def test_roundtrip_byte_identical(name):
    u = _samples()[name]
    text = jio.dumps(u)
    v = jio.load_hyperform(text)
    assert jio.dumps(v) == text
    assert v.cochain == u.cochain
    assert (v.p, v.n, v.orient) == (u.p, u.n, u.orient)


def test_roundtrip_preserves_pairing():
    u = _samples()["bv1"]
    v = jio.load_hyperform(jio.dumps(u))
    cut = qp.Cutoff("box", 1.0, 2.0)
    w = qp.Density.top("cos(x1)", 1)
    assert qp.pair(v, w, cutoff=cut).value == qp.pair(u, w, cutoff=cut).value


def test_form_and_cochain_roundtrip():
    F = fc.Form(2, {((1,), (2,)): se.parse("exp(z1)*zb2 - 3/4", 2), ((), ()): se.parse("i*pi", 2)})
    assert jio.dumps(jio.form_from_dict(jio.form_to_dict(F))) == jio.dumps(F)
    c = ho.delta(1).cochain
    assert jio.load_cochain(jio.dumps(c)) == c


def test_cone_cutoff_density():
    cone = jio.cone_from_dict({"etas": [[2.0, 0.0], [0.0, 1.0]]})
    assert cone.etas.tolist() == [[1.0, 0.0], [0.0, 1.0]]
    cut = jio.cutoff_from_dict({"kind": "box", "inner": 1.0, "outer": 2.0})
    assert cut.to_dict() == qp.Cutoff("box", 1.0, 2.0).to_dict()
    w = jio.density_from_dict({"omega": "exp(x1)"}, 2)
    assert w.degree == 2
    assert jio.density_to_dict(w)["dx"] == [1, 2]


def test_numeric_coefficients_refuse_serialization():
    v = ho.fiber_integrate(ho.delta(2), 1)
    with pytest.raises(SerializationError):
        jio.dumps(v)


@pytest.mark.parametrize("text", ["{", "[1, 2", '{"covering": {"dim": 1}}', '{"dim": 1, "terms": [{"coeff": "1 +"}]}'])
def test_parse_errors(text):
    with pytest.raises(ParseError):
        jio.load_hyperform(text)


def test_inconsistent_header():
    d = jio.hyperform_to_dict(ho.delta(1))
    d["n"] = 2
    with pytest.raises(ParseError):
        jio.hyperform_from_dict(d)
