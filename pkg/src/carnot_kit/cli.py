"""Command-line interface: ``carnot-kit <command> [options]``.

Every command prints JSON (or a plain table with ``--format table``).
Exit codes: 0 success, 1 a requested check failed, 2 malformed input.
"""
from __future__ import annotations

import argparse
import ast
import json
import os
import sys
from fractions import Fraction
from typing import List, Optional, Sequence

import numpy as np

from . import catalog, hypersurface, liealg, metrics, suite
from .errors import CarnotError, CharacteristicPointError
from .group import GroupPoint, bch_product, left_invariant_frame, parse_point
from .liealg import StratifiedAlgebra
from .symbolic import MultiPoly, scalar_str, to_scalar


class UsageError(Exception):
    """Malformed input: exit code 2."""


class CheckFailed(Exception):
    """A requested check did not hold: exit code 1."""

    def __init__(self, message: str, payload: Optional[dict] = None):
        super().__init__(message)
        self.payload = payload or {}


# input parsing


def _load_json(text: str):
    if os.path.exists(text):
        with open(text) as fh:
            return json.load(fh)
    return json.loads(text)


def load_algebra(spec: str) -> StratifiedAlgebra:
    try:
        return catalog.get_algebra(spec)
    except (KeyError, ValueError):
        pass
    try:
        return StratifiedAlgebra.from_json(_load_json(spec))
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise UsageError(f"cannot read algebra {spec!r}: {exc}") from exc


def parse_polynomial(text: str, nvars: int) -> MultiPoly:
    """Parse ``"x2^3/3 + x0"`` style input; variables are ``x0..x{n-1}``."""
    try:
        tree = ast.parse(text.replace("^", "**"), mode="eval")
    except SyntaxError as exc:
        raise UsageError(f"cannot parse polynomial {text!r}") from exc

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, int):
            return MultiPoly.const(nvars, node.value)
        if isinstance(node, ast.Name) and node.id.startswith("x") and node.id[1:].isdigit():
            i = int(node.id[1:])
            if i >= nvars:
                raise UsageError(f"variable {node.id} out of range for {nvars} coordinates")
            return MultiPoly.var(nvars, i)
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = ev(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.BinOp):
            a = ev(node.left)
            if isinstance(node.op, ast.Pow):
                if not (isinstance(node.right, ast.Constant) and isinstance(node.right.value, int) and node.right.value >= 0):
                    raise UsageError("exponents must be non-negative integers")
                return a**node.right.value
            b = ev(node.right)
            if isinstance(node.op, ast.Add):
                return a + b
            if isinstance(node.op, ast.Sub):
                return a - b
            if isinstance(node.op, ast.Mult):
                return a * b
            if isinstance(node.op, ast.Div):
                if b.degree() > 0 or b.is_zero():
                    raise UsageError("division only by non-zero constants")
                return a / b.terms[(0,) * nvars]
        raise UsageError(f"unsupported syntax in polynomial {text!r}")

    return ev(tree)


def _poly_arg(text: str, nvars: int) -> MultiPoly:
    stripped = text.strip()
    if stripped.startswith("[") or os.path.exists(stripped):
        try:
            return MultiPoly.from_json(_load_json(stripped), nvars=nvars)
        except (ValueError, KeyError, TypeError) as exc:
            raise UsageError(f"bad polynomial JSON: {exc}") from exc
    return parse_polynomial(stripped, nvars)


def load_surface(spec: str, algebra: Optional[str] = None) -> hypersurface.LevelSurface:
    """``S`` (the built-in surface in g8), ``sphere`` (needs ``--algebra``),
    a polynomial string (needs ``--algebra``), or surface JSON."""
    if spec == "S":
        return catalog.surface_S()
    if spec == "sphere":
        if not algebra:
            raise UsageError("the sphere surface needs --algebra")
        return catalog.every_tangent_sphere(load_algebra(algebra))
    if os.path.exists(spec) or spec.lstrip().startswith("{"):
        try:
            return hypersurface.LevelSurface.from_json(_load_json(spec))
        except (ValueError, KeyError, TypeError) as exc:
            raise UsageError(f"bad surface JSON: {exc}") from exc
    if not algebra:
        raise UsageError("a polynomial surface needs --algebra")
    alg = load_algebra(algebra)
    try:
        return hypersurface.LevelSurface(alg, _poly_arg(spec, alg.n))
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def load_point(text: str, alg: StratifiedAlgebra) -> GroupPoint:
    try:
        return parse_point(text, alg)
    except (ValueError, ZeroDivisionError) as exc:
        raise UsageError(f"bad point {text!r}: {exc}") from exc


def load_vector(text: str, alg: StratifiedAlgebra) -> tuple:
    """Comma-separated rationals, or a basis label such as ``X3``."""
    if text.strip() in alg.labels:
        return alg.basis_vector(alg.index(text.strip()))
    return load_point(text, alg).coords


def _rational(text) -> Fraction:
    try:
        return to_scalar(Fraction(str(text)))
    except (ValueError, ZeroDivisionError) as exc:
        raise UsageError(f"bad rational {text!r}") from exc


def _need(value, flag: str):
    if value is None:
        raise UsageError(f"missing {flag}")
    return value


def _vec(v) -> List[str]:
    return [scalar_str(to_scalar(x)) for x in v]


# commands


def cmd_validate(args) -> dict:
    alg = load_algebra(_need(args.algebra or args.target, "algebra"))
    rep = liealg.validate_algebra(alg)
    out = {"algebra": alg.name, "valid": rep.ok, "report": rep.failures()}
    if not rep.ok:
        raise CheckFailed("algebra fails validation", out)
    return out


def cmd_bracket(args) -> dict:
    alg = load_algebra(_need(args.algebra, "--algebra"))
    u = load_vector(_need(args.u, "--u"), alg)
    v = load_vector(_need(args.v, "--v"), alg)
    return {"algebra": alg.name, "bracket": _vec(liealg.bracket(alg, u, v))}


def cmd_closure(args) -> dict:
    if args.lam is not None:
        alg = catalog.make_g8()
        gens = catalog.lambda_family_generators(_rational(args.lam))
    else:
        alg = load_algebra(_need(args.algebra, "--algebra"))
        gens = [load_vector(g, alg) for g in (args.gen or [])]
    sub = liealg.subalgebra_closure(alg, gens)
    return {
        "algebra": alg.name,
        "dimension": sub.dim,
        "graded": sub.graded,
        "homogeneous_dimension": liealg.homogeneous_dimension(sub) if sub.graded else None,
        "basis": [_vec(b) for b in sub.basis],
    }


def cmd_hdim(args) -> dict:
    alg = load_algebra(_need(args.algebra or args.target, "algebra"))
    return {"algebra": alg.name, "homogeneous_dimension": liealg.homogeneous_dimension(alg)}


def cmd_product(args) -> dict:
    alg = load_algebra(_need(args.algebra, "--algebra"))
    pts = args.point or []
    if len(pts) < 2:
        raise UsageError("product needs two --point values")
    p, q = load_point(pts[0], alg), load_point(pts[1], alg)
    return {"algebra": alg.name, "product": _vec(bch_product(p, q).coords)}


def cmd_fields(args) -> dict:
    alg = load_algebra(_need(args.algebra or args.target, "algebra"))
    names = [f"x{i}" for i in range(alg.n)]
    fields = {}
    for label, X in zip(alg.labels, left_invariant_frame(alg)):
        fields[label] = {f"d{i}": c.to_str(names) for i, c in enumerate(X.coeffs) if c}
    return {"algebra": alg.name, "fields": fields}


def cmd_tangent(args) -> dict:
    S = load_surface(_need(args.surface, "--surface"), args.algebra)
    p = load_point(_need(args.point and args.point[0], "--point"), S.algebra)
    try:
        rep = hypersurface.tangent_group(S, p)
    except CharacteristicPointError as exc:
        raise CheckFailed("characteristic point", {"point": _vec(p.coords)}) from exc
    return rep.to_json()


def _axes_from_grid(spec, n: int, step: Optional[Fraction]) -> list:
    axes = spec.get("axes") if isinstance(spec, dict) else spec
    if not isinstance(axes, list) or len(axes) != n:
        raise UsageError(f"grid needs {n} axes")
    out = []
    for a in axes:
        if isinstance(a, list) and len(a) == 2:
            if step is None:
                raise UsageError("a two-entry axis [lo, hi] needs --grid-step")
            lo, hi = _rational(a[0]), _rational(a[1])
            out.append((lo, hi, int((hi - lo) / step) + 1))
        elif isinstance(a, list):
            out.append(tuple(_rational(x) if i < 2 else int(x) for i, x in enumerate(a)))
        else:
            out.append(_rational(a))
    return out


def cmd_scan_char(args) -> dict:
    S = load_surface(_need(args.surface, "--surface"), args.algebra)
    spec = _load_json(_need(args.grid, "--grid"))
    step = _rational(args.grid_step) if args.grid_step is not None else None
    axes = _axes_from_grid(spec, S.algebra.n, step)
    tol = spec.get("tolerance", 0) if isinstance(spec, dict) else 0
    solve_for = spec.get("solve_for") if isinstance(spec, dict) else None
    try:
        hits = hypersurface.scan_characteristic(S, axes, tolerance=_rational(tol), solve_for=solve_for)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    return {"characteristic_points": [_vec(h) for h in hits], "count": len(hits)}


def cmd_growth(args) -> dict:
    S = load_surface(_need(args.surface, "--surface"), args.algebra)
    p = load_point(_need(args.point and args.point[0], "--point"), S.algebra)
    if args.frame == "S":
        frame = catalog.surface_S_frame()
    else:
        frame = hypersurface.y_frame(S)
    try:
        gv = hypersurface.growth_vector(S, frame, p, args.depth)
    except CharacteristicPointError as exc:
        raise CheckFailed("characteristic point", {"point": _vec(p.coords)}) from exc
    except hypersurface.NotTangentError as exc:
        raise CheckFailed(str(exc)) from exc
    return {"growth_vector": list(gv)}


def cmd_invariant(args) -> dict:
    return catalog.invariant_I(_rational(_need(args.mu, "--mu"))).to_json()


def cmd_classify(args) -> dict:
    mu1, mu2 = _rational(_need(args.mu1, "--mu1")), _rational(_need(args.mu2, "--mu2"))
    return {"mu1": scalar_str(mu1), "mu2": scalar_str(mu2), "result": catalog.classify_147E(mu1, mu2)}


def cmd_tangent_class_S(args) -> dict:
    if args.point:
        coords = load_point(args.point[0], catalog.make_g8()).coords
    else:
        coords = catalog.surface_S_point(_rational(_need(args.x2, "--x2 or --point")))
    try:
        res = catalog.tangent_class_of_S(coords)
    except CarnotError as exc:
        raise UsageError(str(exc)) from exc
    out = res["invariant"].to_json()
    out["tangent_matches_g_mu"] = res["tangent_matches_g_mu"]
    out["tangent"] = res["tangent"].to_json()
    return out


def cmd_decompose(args) -> dict:
    alg = load_algebra(_need(args.algebra, "--algebra"))
    cov = [_rational(c) for c in _need(args.covector, "--covector").split(",")]
    try:
        dec = catalog.vertical_hyperplane_decomposition(alg, cov)
    except (CarnotError, ValueError) as exc:
        raise UsageError(str(exc)) from exc
    out = dec.to_json()
    if not (out["homomorphism"] and out["embedding"]):
        raise CheckFailed("decomposition does not verify", out)
    return out


def _two_points(args):
    alg = load_algebra(_need(args.algebra, "--algebra"))
    pts = args.point or []
    if len(pts) == 1:
        return alg, GroupPoint.identity(alg), load_point(pts[0], alg)
    if len(pts) != 2:
        raise UsageError("give one (distance from the identity) or two --point values")
    return alg, load_point(pts[0], alg), load_point(pts[1], alg)


def cmd_quasi_dist(args) -> dict:
    _, p, q = _two_points(args)
    return {"quasi_distance": metrics.quasi_distance(p, q)}


def cmd_cc_upper(args) -> dict:
    _, p, q = _two_points(args)
    path = metrics.horizontal_path(p, q, args.budget, args.seed)
    return {
        "cc_upper_bound": path.length,
        "budget": args.budget,
        "segments": path.segments.tolist(),
        "endpoint_error": path.endpoint_error,
    }


def _setup(args) -> metrics.Step2GraphSetup:
    alg = load_algebra(args.algebra or "heis(2)")
    phi = _poly_arg(args.phi, alg.n - 1) if args.phi else None
    try:
        return metrics.Step2GraphSetup(alg, phi, args.L)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _step(args) -> float:
    return float(args.grid_step) if args.grid_step is not None else metrics.DEFAULT_STEP


def cmd_lift_length(args) -> dict:
    setup = _setup(args)
    try:
        ctrl = np.asarray(_load_json(_need(args.controls, "--controls")), dtype=float)
    except (ValueError, TypeError) as exc:
        raise UsageError(f"bad controls: {exc}") from exc
    if ctrl.ndim != 2:
        raise UsageError("controls must be a list of control vectors, one per unit time interval")
    durations = [float(args.duration)] * len(ctrl)
    try:
        curve = metrics.integrate_horizontal(setup, ctrl, durations, None, _step(args))
    except (ValueError, CarnotError) as exc:
        raise UsageError(str(exc)) from exc
    return {
        "lift_length": metrics.graph_lift_length(setup, curve),
        "phi_length": metrics.phi_length(curve),
        "endpoint": curve.end.tolist(),
    }


def cmd_compare_length(args) -> dict:
    setup = _setup(args)
    rep = metrics.length_comparison_experiment(
        setup, n_curves=args.ensemble, step=_step(args), seed=args.seed
    )
    if not rep["pass"]:
        raise CheckFailed("length comparison failed", rep)
    return rep


def cmd_compare_graph_dist(args) -> dict:
    setup = _setup(args)
    try:
        rep = metrics.graph_distance_experiment(
            setup, n_pairs=args.ensemble, step=_step(args), seed=args.seed, budget=args.budget
        )
    except CarnotError as exc:
        raise UsageError(str(exc)) from exc
    if not rep["pass"]:
        raise CheckFailed("graph distance comparison failed", rep)
    return rep


def cmd_paper_suite(args) -> dict:
    results = suite.run_suite(seed=args.seed, step=_step(args))
    out = {"results": [r.to_json() for r in results], "all_passed": all(r.passed for r in results)}
    if not out["all_passed"]:
        raise CheckFailed("some checks failed", out)
    return out


COMMANDS = {
    "validate": cmd_validate,
    "bracket": cmd_bracket,
    "closure": cmd_closure,
    "hdim": cmd_hdim,
    "product": cmd_product,
    "fields": cmd_fields,
    "tangent": cmd_tangent,
    "scan-char": cmd_scan_char,
    "growth": cmd_growth,
    "invariant": cmd_invariant,
    "classify": cmd_classify,
    "tangent-class-S": cmd_tangent_class_S,
    "decompose-hyperplane": cmd_decompose,
    "quasi-dist": cmd_quasi_dist,
    "cc-upper": cmd_cc_upper,
    "lift-length": cmd_lift_length,
    "compare-length": cmd_compare_length,
    "compare-graph-dist": cmd_compare_graph_dist,
    "paper-suite": cmd_paper_suite,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="carnot-kit", description="Exact computations in Carnot groups.")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("target", nargs="?", help="algebra name or spec for validate/hdim/fields")
    parser.add_argument("--algebra")
    parser.add_argument("--surface")
    parser.add_argument("--point", action="append", help="comma-separated rationals; repeat for two points")
    parser.add_argument("--u")
    parser.add_argument("--v")
    parser.add_argument("--gen", action="append", help="generator vector or label; repeatable")
    parser.add_argument("--lambda", dest="lam")
    parser.add_argument("--mu")
    parser.add_argument("--mu1")
    parser.add_argument("--mu2")
    parser.add_argument("--x2")
    parser.add_argument("--covector")
    parser.add_argument("--grid")
    parser.add_argument("--grid-step")
    parser.add_argument("--frame", choices=["y", "S"], default="y")
    parser.add_argument("--depth", type=int, default=3)
    parser.add_argument("--phi")
    parser.add_argument("--L", type=float)
    parser.add_argument("--controls")
    parser.add_argument("--duration", type=float, default=1.0)
    parser.add_argument("--ensemble", type=int, default=50)
    parser.add_argument("--budget", type=int, default=3)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out")
    parser.add_argument("--format", choices=["json", "table"], default="json")
    return parser


def _render(payload: dict, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(payload, indent=2, sort_keys=True)
    if "results" in payload:
        rows = [f"{'PASS' if r['passed'] else 'FAIL'}  {r['name']}  ({r['seconds']:.2f}s)" for r in payload["results"]]
        return "\n".join(rows)
    width = max((len(k) for k in payload), default=0)
    return "\n".join(f"{k.ljust(width)}  {json.dumps(v, sort_keys=True)}" for k, v in sorted(payload.items()))


def _emit(text: str, out: Optional[str]):
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


_VALUE_FLAGS = {"--point", "--u", "--v", "--gen", "--lambda", "--mu", "--mu1", "--mu2", "--x2", "--covector", "--grid-step"}


def _glue_negative_values(argv: Sequence[str]) -> List[str]:
    """Rewrite ``--mu -4`` as ``--mu=-4`` so negative numbers parse as values."""
    out, i = [], 0
    argv = list(argv)
    while i < len(argv):
        tok = argv[i]
        if tok in _VALUE_FLAGS and i + 1 < len(argv) and argv[i + 1][:2].lstrip("-")[:1].isdigit() and argv[i + 1].startswith("-"):
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
            continue
        out.append(tok)
        i += 1
    return out


def main(argv: Optional[Sequence[str]] = None) -> int:
    fmt, out = "json", None
    argv = _glue_negative_values(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(argv)
        fmt, out = args.format, args.out
        payload = COMMANDS[args.command](args)
        _emit(_render(payload, fmt), out)
        return 0
    except CheckFailed as exc:
        payload = dict(exc.payload)
        payload["error"] = str(exc)
        _emit(_render(payload, fmt), out)
        return 1
    except (UsageError, CarnotError, ValueError) as exc:
        print(json.dumps({"error": str(exc)}), file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
