"""JSON wire format for forms, cochains, hyperforms, cones and densities.

Coefficients are strings in the expression grammar.  Dumping is canonical
(sorted terms, fixed separators) so dump -> load -> dump is byte-identical.
"""
from __future__ import annotations

import json
from typing import Any

from . import symexpr as se
from .errors import ParseError, SerializationError
from .formcalc import Form
from .hyperops import Hyperform, SupportSpec
from .partitions import ConeSpec
from .quadpair import Cutoff, Density
from .relcochain import CoveringSpec, RelCochain


def _coeff_str(c) -> str:
    # to_string raises SerializationError on quadrature-backed coefficients
    return se.to_string(se.as_expr(c))


def form_to_dict(F: Form) -> dict:
    terms = []
    for (I, J), c in sorted(F.terms.items()):
        terms.append({"coeff": _coeff_str(c), "dz": list(I), "dzbar": list(J)})
    return {"dim": F.dim, "basis": F.basis, "terms": terms}


def form_from_dict(d: dict) -> Form:
    try:
        n = int(d["dim"])
        basis = d.get("basis", "complex")
        acc = Form.zero(n, basis)
        for t in d.get("terms", []):
            c = se.parse(t["coeff"], n)
            acc = acc + Form(n, {(tuple(t.get("dz", [])), tuple(t.get("dzbar", []))): c}, basis)
        return acc
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"bad form JSON: {exc}") from exc


def cochain_to_dict(c: RelCochain) -> dict:
    return {
        "covering": c.covering.to_dict(),
        "bidegree": list(c.bidegree),
        "sigma1": form_to_dict(c.sigma1),
        "sigma01": form_to_dict(c.sigma01),
    }


def cochain_from_dict(d: dict) -> RelCochain:
    try:
        cov = CoveringSpec.from_dict(d["covering"])
        s1 = form_from_dict(d["sigma1"]) if d.get("sigma1") else None
        s01 = form_from_dict(d["sigma01"]) if d.get("sigma01") else None
        return RelCochain(cov, tuple(d["bidegree"]), s1, s01, basis=_basis_of(s1, s01))
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"bad cochain JSON: {exc}") from exc


def _basis_of(*forms) -> str:
    for F in forms:
        if F is not None and F.basis == "real":
            return "real"
    return "complex"


def hyperform_to_dict(u: Hyperform) -> dict:
    d = cochain_to_dict(u.cochain)
    d.update({"orient": u.orient, "p": u.p, "n": u.n, "support": u.support.to_dict()})
    return d


def hyperform_from_dict(d: dict) -> Hyperform:
    c = cochain_from_dict(d)
    if "p" in d and "n" in d and (int(d["p"]), int(d["n"])) != (c.bidegree[0], c.dim):
        raise ParseError("p/n do not match the cochain")
    try:
        return Hyperform(c, int(d.get("orient", 1)), SupportSpec.from_dict(d.get("support", {"kind": "all"})))
    except ValueError as exc:
        raise ParseError(str(exc)) from exc


def cone_from_dict(d: dict, n: int | None = None) -> ConeSpec:
    try:
        return ConeSpec(d["etas"], n)
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"bad cone JSON: {exc}") from exc


def density_from_dict(d: dict, n: int) -> Density:
    """``{"omega": "<expr>", "dx": [..], "orient": 1}``; ``dx`` defaults to all of 1..n."""
    try:
        dx = d.get("dx", list(range(1, n + 1)))
        return Density.of_degree(d["omega"], n, dx, int(d.get("orient", 1)))
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"bad density JSON: {exc}") from exc


def density_to_dict(w: Density) -> dict:
    if len(w.form.terms) > 1:
        raise SerializationError("only single-monomial densities have a JSON form")
    if not w.form.terms:
        return {"omega": "0", "dx": [], "orient": w.orient}
    (I, _), c = next(iter(w.form.terms.items()))
    return {"omega": _coeff_str(c), "dx": list(I), "orient": w.orient}


def cutoff_from_dict(d: dict) -> Cutoff:
    try:
        return Cutoff.from_dict(d)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"bad cutoff JSON: {exc}") from exc


def dumps(obj: Any) -> str:
    """Canonical JSON text of a library object or plain data."""
    if isinstance(obj, Hyperform):
        obj = hyperform_to_dict(obj)
    elif isinstance(obj, RelCochain):
        obj = cochain_to_dict(obj)
    elif isinstance(obj, Form):
        obj = form_to_dict(obj)
    elif isinstance(obj, (ConeSpec, Cutoff)):
        obj = obj.to_dict()
    elif isinstance(obj, Density):
        obj = density_to_dict(obj)
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def loads(text: str) -> dict:
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc}") from exc


def load_hyperform(text: str) -> Hyperform:
    return hyperform_from_dict(loads(text))


def load_cochain(text: str) -> RelCochain:
    return cochain_from_dict(loads(text))
