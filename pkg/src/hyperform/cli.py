"""Command-line front end.

Every subcommand wraps one library operation and prints one JSON document
on stdout.  Exit codes: 0 success, 2 parse errors, 3 precondition
violations, 4 quadrature divergence or inconclusive/failed checks.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

from . import __version__
from . import formcalc as fc
from . import hyperops as ho
from . import jsonio as jio
from . import quadpair as qp
from ._backend import backend
from .errors import HyperformError, ParseError
from .relcochain import is_cocycle


def _read_json(arg: str) -> dict:
    """Inline JSON text, ``@path``, or a path to a JSON file."""
    text = arg
    path = arg[1:] if arg.startswith("@") else arg
    if arg.startswith("@") or (not arg.lstrip().startswith(("{", "[")) and os.path.exists(path)):
        try:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ParseError(f"cannot read {path}: {exc}") from exc
    return jio.loads(text)


def _hyper(arg: str) -> ho.Hyperform:
    d = _read_json(arg)
    # accept the envelope printed by the constructor subcommands
    if "hyperform" in d and isinstance(d["hyperform"], dict):
        d = d["hyperform"]
    return jio.hyperform_from_dict(d)


def _cone(arg: str, n: int | None) -> ho.ConeSpec:
    return jio.cone_from_dict(_read_json(arg), n)


def _provenance(args, resolution=None) -> dict:
    d = {"version": __version__, "backend": backend().name, "seed": args.seed}
    if resolution is not None:
        d["resolution"] = resolution
    return d


def _echo(args) -> dict:
    skip = {"func", "out"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip and v is not None}


def _emit_hyper(args, u: ho.Hyperform) -> int:
    body = jio.hyperform_to_dict(u)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(jio.dumps(body))
    doc = {"operation": _echo(args), "hyperform": body, "provenance": _provenance(args)}
    print(jio.dumps(doc), end="")
    return 0


def _emit_value(args, res: qp.PairingResult, extra: dict | None = None) -> int:
    doc = res.to_dict()
    doc["operation"] = _echo(args)
    doc["provenance"] = _provenance(args, res.resolution)
    if extra:
        doc.update(extra)
    print(jio.dumps(doc), end="")
    return 0


# ---------------------------------------------------------------------------
# subcommands


def cmd_delta(args):
    u = ho.delta_form(args.n) if args.form else ho.delta(args.n)
    return _emit_hyper(args, u)


def cmd_embed(args):
    return _emit_hyper(args, ho.embed_real_analytic(args.f, args.n))


def cmd_bv(args):
    cone = _cone(args.cone, args.n)
    return _emit_hyper(args, ho.boundary_value(args.f, cone, args.n or cone.n))


def cmd_mult(args):
    return _emit_hyper(args, ho.mult(args.f, _hyper(args.hyper)))


def cmd_deriv(args):
    return _emit_hyper(args, ho.partial_derivative(args.i, _hyper(args.hyper)))


def cmd_extprod(args):
    us = [_hyper(h) for h in args.hyper]
    if args.cutoff:
        cut = qp.Cutoff.from_dict(_read_json(args.cutoff))
        us = [ho.cutoff_representative(u, cut) for u in us]
    return _emit_hyper(args, ho.external_product(us, args.mode))


def cmd_restrict(args):
    cone = _cone(args.cone, args.n)
    return _emit_hyper(args, ho.restrict_boundary_value(args.f, cone, args.n or cone.n))


def _pair_kwargs(args) -> dict:
    kw = {"nodes": args.nodes, "radius": args.radius, "mc_samples": args.mc_samples, "seed": args.seed}
    if getattr(args, "cutoff", None):
        kw["cutoff"] = jio.cutoff_from_dict(_read_json(args.cutoff))
    if getattr(args, "domain", None):
        kw["domain"] = args.domain
    return kw


def cmd_pair(args):
    u = _hyper(args.hyper)
    w = jio.density_from_dict(_read_json(args.density), u.n)
    return _emit_value(args, qp.pair(u, w, **_pair_kwargs(args)))


def cmd_fiber_int(args):
    # the pushed-forward cochain has quadrature-backed coefficients, so it is
    # paired on the base right away instead of being serialized
    u = _hyper(args.hyper)
    v = ho.fiber_integrate(u, args.d, radius=args.fiber_radius, nodes=args.fiber_nodes)
    w = jio.density_from_dict(_read_json(args.density), v.n)
    res = qp.pair(v, w, **_pair_kwargs(args))
    return _emit_value(args, res, {"base": {"p": v.p, "n": v.n, "support": v.support.to_dict()}})


def cmd_residue(args):
    res = qp.grothendieck_residue(args.h, args.n, eps=args.eps, N=args.nodes or 32)
    return _emit_value(args, res)


def cmd_check(args):
    if args.cochain:
        d = _read_json(args.cochain)
        d = d.get("hyperform", d)
        c = jio.cochain_from_dict(d)
    else:
        c = _hyper(args.hyper).cochain
    rep = is_cocycle(c, args.samples)
    doc = {"ok": bool(rep.ok), "residual": float(rep.residual), "path": rep.path,
           "operation": _echo(args), "provenance": _provenance(args)}
    print(jio.dumps(doc), end="")
    return 0 if rep.ok else 4


def _calibration_rows(args):
    """Convergence tables for the standard worked examples."""
    rows = []
    d1 = ho.delta(1)
    for N in (4, 8, 16, 32, 64):
        r = qp.pair(d1, qp.Density.top("cos(x1)", 1), nodes=N, max_doublings=0, tol=1e6)
        rows.append({"example": "delta1 cos", "exact": 1.0, "N": N, "value": [r.value.real, r.value.imag]})
    for N in (4, 8, 16, 32):
        r = qp.grothendieck_residue("exp(z1+z2)", 2, N=N, max_doublings=0, tol=1e6)
        rows.append({"example": "residue exp(z1+z2)", "exact": 1.0, "N": N, "value": [r.value.real, r.value.imag]})
    for l in (1, 2, 3):
        r = qp.sphere_integral(fc.angular_form(l), N=16)
        rows.append({"example": f"angular form l={l}", "exact": 1.0, "N": r.resolution,
                     "value": [r.value.real, r.value.imag]})
    d2 = ho.delta(2)
    for N in (8, 16, 32):
        r = qp.pair(d2, qp.Density.top("1", 2), nodes=N, max_doublings=0, tol=1e6)
        rows.append({"example": "delta2 one", "exact": 1.0, "N": N, "value": [r.value.real, r.value.imag]})
    for row in rows:
        row["abs_error"] = abs(complex(*row["value"]) - row["exact"])
    return rows


def cmd_calibrate(args):
    rows = _calibration_rows(args)
    doc = {"table": rows, "operation": _echo(args), "provenance": _provenance(args)}
    print(jio.dumps(doc), end="")
    return 0


# ---------------------------------------------------------------------------
# parser


def _common(p, numeric: bool = True):
    p.add_argument("--seed", type=int, default=0)
    if numeric:
        p.add_argument("--nodes", type=int, help="base resolution N (nodes per angle/axis)")
        p.add_argument("--radius", type=float, help="radius of the integration domain R1")
        p.add_argument("--mc-samples", type=int, default=200_000, help="Monte Carlo samples for n > 3")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hyperform", description="Hyperfunctions as relative Dolbeault cocycles.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("delta", help="delta function (or delta n-form with --form)")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--form", action="store_true")
    p.add_argument("--out")
    _common(p, False)
    p.set_defaults(func=cmd_delta)

    p = sub.add_parser("embed", help="real-analytic function as a hyperfunction")
    p.add_argument("--f", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--out")
    _common(p, False)
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("bv", help="boundary value from a cone")
    p.add_argument("--f", required=True)
    p.add_argument("--cone", required=True, help='JSON {"etas": [[...], ...]} or a path')
    p.add_argument("--n", type=int)
    p.add_argument("--out")
    _common(p, False)
    p.set_defaults(func=cmd_bv)

    p = sub.add_parser("mult", help="multiply by a real-analytic function")
    p.add_argument("--f", required=True)
    p.add_argument("--hyper", required=True)
    p.add_argument("--out")
    _common(p, False)
    p.set_defaults(func=cmd_mult)

    p = sub.add_parser("deriv", help="partial derivative d/dx_i")
    p.add_argument("--i", type=int, required=True)
    p.add_argument("--hyper", required=True)
    p.add_argument("--out")
    _common(p, False)
    p.set_defaults(func=cmd_deriv)

    p = sub.add_parser("extprod", help="external product of hyperforms")
    p.add_argument("--hyper", action="append", required=True, help="repeat once per factor")
    p.add_argument("--mode", choices=("stein", "general"), default="general")
    p.add_argument("--cutoff", help="apply this cutoff to every factor first")
    p.add_argument("--out")
    _common(p, False)
    p.set_defaults(func=cmd_extprod)

    p = sub.add_parser("fiber-int", help="integrate along the first d coordinates and pair on the base")
    p.add_argument("--hyper", required=True)
    p.add_argument("--d", type=int, default=1)
    p.add_argument("--density", required=True, help="base density paired with the pushed-forward hyperform")
    p.add_argument("--fiber-radius", type=float, default=1.0)
    p.add_argument("--fiber-nodes", type=int, default=48)
    _common(p)
    p.set_defaults(func=cmd_fiber_int)

    p = sub.add_parser("restrict", help="restrict a boundary value to {x1 = 0}")
    p.add_argument("--f", required=True)
    p.add_argument("--cone", required=True)
    p.add_argument("--n", type=int)
    p.add_argument("--out")
    _common(p, False)
    p.set_defaults(func=cmd_restrict)

    p = sub.add_parser("pair", help="pair a hyperform with a density")
    p.add_argument("--hyper", required=True)
    p.add_argument("--density", required=True, help='JSON {"omega": "<expr>", "dx": [...], "orient": 1}')
    p.add_argument("--cutoff", help='JSON {"kind": "box", "inner": a, "outer": A}; needed for non-compact support')
    p.add_argument("--domain", choices=("auto", "polydisk"))
    _common(p)
    p.set_defaults(func=cmd_pair)

    p = sub.add_parser("residue", help="Grothendieck residue of h at 0")
    p.add_argument("--h", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--eps", type=float, default=0.5)
    _common(p)
    p.set_defaults(func=cmd_residue)

    p = sub.add_parser("check", help="cocycle residual of a cochain or hyperform")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--cochain")
    g.add_argument("--hyper")
    p.add_argument("--samples", type=int, default=200)
    _common(p, False)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("calibrate", help="convergence tables for the standard examples")
    _common(p, False)
    p.set_defaults(func=cmd_calibrate)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except HyperformError as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}, sort_keys=True), file=sys.stderr)
        return exc.exit_code
    except ValueError as exc:
        print(json.dumps({"error": "ValueError", "message": str(exc)}, sort_keys=True), file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
