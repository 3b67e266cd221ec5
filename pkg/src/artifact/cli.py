"""Command-line front end.

Every command prints (or writes to --out) a JSON document, or a CSV convergence table
with --format csv.  Exit codes: 0 success, 2 the computation ran but a verdict is
negative, 1 bad input.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import algebra as alg
from . import gode, prodint, stepmap, stieltjes, transfinite, transport
from .errors import ArtifactError, BadParams, UnknownName
from .ordinal import FiniteSet
from .prodint import ConvergenceReport
from .stepmap import StepMapping

DEFAULT_TOL = 1e-8
DEFAULT_LEVELS = 16
DEFAULT_BUDGET = 10**6

EXTRA_EXAMPLES = {
    "ex711": "idempotent path e1 + e_(n+2) on the ladder; Haahti product e1, no Stieltjes product integral",
}

CLOSED_FORMS = {
    "ex201": "(log 2)^2 closed form",
    "ex301": "exp((log 2)^2); (log 2)^2 closed form",
    "ex302": "exp((pi^2/6)^2)",
    "ex32": "I",
    "ex33": "prod_{n>=2} (1 + (-1)^n/(sqrt(n) log n))",
    "ex401": "bounded, Riemann product integrable",
    "sqrtcos": "exp(-1)",
    "linear": "exp(c (b - a)) (Stieltjes product)",
    "constant": "I (Stieltjes product)",
    "ex711": "Haahti e1; Stieltjes product diverges",
}


# inputs


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def load_mapping(spec: str):
    """A catalog name, ``name:key=value,...``, or a path to a mapping JSON file."""
    path = Path(spec)
    if spec.endswith(".json") or path.is_file():
        try:
            obj = json.loads(path.read_text(encoding="utf-8"))
        except OSError as exc:
            raise BadParams(f"cannot read {spec}: {exc}") from None
        except json.JSONDecodeError as exc:
            raise BadParams(f"{spec} is not valid JSON: {exc}") from None
        return stepmap.mapping_from_json(obj)
    name, _, rest = spec.partition(":")
    params = {}
    for item in filter(None, rest.split(",")):
        key, eq, val = item.partition("=")
        if not eq:
            raise BadParams(f"parameter {item!r} needs key=value")
        params[key.strip()] = _parse_value(val.strip())
    return stepmap.catalog(name, **params)


def load_family(spec: str):
    """Values family of a mapping spec; a JSON file may set "include_top": true."""
    A = load_mapping(spec)
    include_top = False
    if Path(spec).is_file():
        include_top = bool(json.loads(Path(spec).read_text(encoding="utf-8")).get("include_top", False))
    if not isinstance(A, StepMapping):
        raise BadParams("sums and products need a step mapping")
    return A.values_family(include_top=include_top)


def _require_step(A) -> StepMapping:
    if not isinstance(A, StepMapping):
        raise BadParams(f"{A.name or 'mapping'} is not a step mapping")
    return A


# output


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else ("inf" if x > 0 else "-inf" if x < 0 else "nan")
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, alg.AlgebraElement):
        return obj.to_json()
    return obj


def _csv_table(report: ConvergenceReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["level", "m", "delta", "value_json"])
    for row in report.rows():
        d = row["delta"]
        w.writerow([row["level"], row["m"], "" if d is None else repr(float(d)),
                    json.dumps(_clean(row["value"]), sort_keys=True)])
    return buf.getvalue()


def emit(doc: dict, args, table: ConvergenceReport | None = None) -> None:
    if args.format == "csv":
        if table is None:
            raise BadParams("this command has no convergence table; use --format json")
        text = _csv_table(table)
    else:
        if not args.no_timestamp:
            doc = {**doc, "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())}
        text = json.dumps(_clean(doc), indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


# commands


def list_examples(filter_text: str = "") -> list:
    rows = []
    for name in stepmap.catalog_names() + list(EXTRA_EXAMPLES):
        desc = stepmap.describe(name) if name in stepmap.CATALOG else EXTRA_EXAMPLES[name]
        rows.append({"name": name, "description": desc, "closed_form": CLOSED_FORMS.get(name, "")})
    f = filter_text.lower()
    return [r for r in rows if not f or f in r["name"].lower() or f in r["description"].lower()]


def _tower_product_example(A, args) -> tuple[dict, bool]:
    res = prodint.step_product_integral(A, args.tol, args.budget)
    riem = prodint.riemann_criterion(A)
    boch = prodint.bochner_criterion(A, args.tol, args.budget)
    doc = {"value": res.to_json()["value"], "product": res.to_json(), "riemann": riem.verdict,
           "bochner": "divergence" if boch.verdict == "DivergenceWitness" else boch.verdict.lower(),
           "bochner_details": boch.to_json()}
    ok = not res.truncated and boch.verdict == "Convergent"
    return doc, ok


def run_example(name: str, args) -> tuple[dict, bool, ConvergenceReport | None]:
    if name == "ex711":
        rep = transport.ex711_report(min(args.levels, 14))
        doc = {"haahti": rep.haahti.limit.to_json(), "ks": rep.ks_verdict, "report": rep.to_json()}
        return doc, rep.ks_verdict != "divergence-witness", rep.haahti
    A = stepmap.catalog(name)
    if name == "ex201":
        res = transfinite.transfinite_sum(A.values_family(), args.tol, args.budget)
        return {"value": res.value.to_json(), "sum": res.to_json()}, not res.truncated, None
    if name in ("ex301", "ex302"):
        doc, ok = _tower_product_example(A, args)
        return doc, ok, None
    if name in ("ex32", "ex33"):
        res = stieltjes.ks_step_product(A, args.tol, args.budget)
        return {"value": res.value.to_json(), "ks": res.to_json()}, res.verdict == "convergent", None
    if name == "ex401":
        riem = prodint.riemann_criterion(A)
        return {"riemann": riem.verdict, "details": riem.to_json()}, riem.verdict == "bounded", None
    if name == "sqrtcos":
        res = stieltjes.substitution_check(stepmap.sqrtcos_derivative, stepmap.sqrtcos_values, A.a, A.b,
                                           max(args.tol, 1e-4), primitive_from=0.05)
        doc = {"stieltjes": res.stieltjes, "riemann": res.riemann, "distance": res.distance,
               "cutoffs": res.cutoffs, "details": res.details}
        return doc, res.distance < max(args.tol, 1e-4), None
    rep = stieltjes.rs_refinement(A, args.tol, min(args.levels, 20))
    return {"value": rep.limit.to_json(), "convergence": rep.to_json()}, rep.converged, rep


def cmd_examples(args):
    if args.action == "list":
        emit({"examples": list_examples(args.filter or "")}, args)
        return True
    if not args.name:
        raise BadParams("examples run needs a name")
    if args.name not in stepmap.CATALOG and args.name not in EXTRA_EXAMPLES:
        raise UnknownName(f"unknown example {args.name!r}")
    doc, ok, table = run_example(args.name, args)
    emit({"command": "examples", "example": args.name, **doc}, args, table)
    return ok


def cmd_sum(args, op: str):
    fam = load_family(args.input)
    fn = transfinite.transfinite_sum if op == "sum" else transfinite.transfinite_product
    res = fn(fam, args.tol, args.budget)
    emit({"command": op, **res.to_json(), "verdict": res.verdict}, args)
    return not res.truncated


def cmd_prodint(args):
    A = load_mapping(args.mapping)
    if isinstance(A, StepMapping) and not isinstance(A.set, FiniteSet):
        doc, ok = _tower_product_example(A, args)
        emit({"command": "prodint", **doc}, args)
        return ok
    rep = prodint.riemann_product_integral(A, args.tol, args.levels, args.tags)
    emit({"command": "prodint", "convergence": rep.to_json()}, args, rep)
    return rep.converged


def cmd_stieltjes(args):
    A = load_mapping(args.mapping)
    mode = args.mode
    table = None
    if mode == "ks":
        res = stieltjes.ks_step_product(_require_step(A), args.tol, args.budget)
        doc, ok = res.to_json(), res.verdict == "convergent"
    elif mode == "rs":
        table = stieltjes.rs_refinement(A, args.tol, args.levels)
        doc, ok = table.to_json(), table.converged
    elif mode == "pvar":
        if isinstance(A, StepMapping):
            parts = [stieltjes.AlignedPartition(2**j) for j in range(4, 4 + args.levels)]
        else:
            parts = stieltjes.harmonic_partitions(A.a, A.b, [2**j for j in range(4, 4 + min(args.levels, 12))])
        est = stieltjes.p_variation_probe(A, args.p, parts)
        doc, ok = est.to_json(), est.verdict == "FiniteSuggested"
    elif mode == "scalar":
        sc = stieltjes.scalar_rs_conditions(_require_step(A), budget=args.budget)
        doc, ok = sc.to_json(), sc.all_pass
    elif mode == "subst":
        if A.name != "sqrtcos":
            raise BadParams("subst mode is available for the sqrtcos mapping")
        res = stieltjes.substitution_check(stepmap.sqrtcos_derivative, stepmap.sqrtcos_values, A.a, A.b,
                                           max(args.tol, 1e-4), primitive_from=0.05)
        doc = {"stieltjes": res.stieltjes, "riemann": res.riemann, "distance": res.distance, "cutoffs": res.cutoffs}
        ok = res.distance < max(args.tol, 1e-4)
    elif mode == "idem":
        left, right, d = stieltjes.idempotent_identity(_require_step(A), args.tol, args.budget)
        doc, ok = {"product_times_start": left, "product_of_values": right, "distance": d}, d < args.tol
    else:
        raise BadParams(f"unknown mode {mode!r}")
    emit({"command": "stieltjes", "mode": mode, "mapping": args.mapping, "result": doc}, args, table)
    return ok


def _path_from(spec: str, surface: str | None):
    name, _, param = spec.partition(":")
    try:
        value = float(param) if param else None
    except ValueError:
        raise BadParams(f"bad path parameter {param!r}") from None
    if name == "latitude":
        if surface not in (None, "sphere"):
            raise BadParams("latitude paths live on the sphere")
        return transport.latitude_path(0.7 if value is None else value)
    if name == "helix":
        if surface not in (None, "cylinder"):
            raise BadParams("helix paths live on the cylinder")
        return transport.helix_path(0.5 if value is None else value)
    raise UnknownName(f"unknown path {spec!r}")


def cmd_transport(args):
    if args.path.startswith("cube-corner"):
        doc = {}
        for label, poly in (("cube-corner", transport.cube_corner_faces()),
                            ("octa-corner", transport.octa_corner_faces())):
            ps = [poly.projection(k) for k in range(len(poly.faces))]
            fwd = transport.polyhedral_transport(ps)
            rev = transport.polyhedral_transport(ps[::-1])
            doc[label] = {"forward": fwd, "reversed": rev, "order_gap": alg.dist(fwd, rev)}
        emit({"command": "transport", "path": args.path, "result": doc}, args)
        return True
    P = _path_from(args.path, args.surface)
    rep = transport.haahti_refinement(P, args.tol, min(args.levels, 16))
    oracle = transport.transport_ode_oracle(P)
    P0 = P(P.a).data
    w, vecs = np.linalg.eigh(P0)
    tangent = vecs[:, w > 0.5]
    inv = max(transport.scalar_invariance_check(P, tangent[:, i], tangent[:, j], report=rep)
              for i in range(tangent.shape[1]) for j in range(tangent.shape[1]))
    doc = {"command": "transport", "path": args.path, "transport": rep.limit, "convergence": rep.to_json(),
           "oracle": oracle, "oracle_distance": alg.dist(rep.limit, oracle), "invariance_deviation": inv}
    emit(doc, args, rep)
    return rep.converged


def cmd_gode(args):
    A = load_mapping(args.mapping)
    form = args.form
    if form == "vdef":
        rep = gode.gode2_roundtrip(A, args.tol, min(args.levels, 10))
        emit({"command": "gode", "form": form, **rep.to_json()}, args, rep.convergence)
        return rep.hypotheses and rep.convergence.converged and rep.residuals.verdict == "decaying"
    V = gode.from_a_linear(A) if form == "linear" else gode.from_a_stieltjes(A)
    conds = gode.check_v_conditions(V, 8, args.tol)
    if form == "linear" and isinstance(A, StepMapping) and not isinstance(A.set, FiniteSet):
        W = prodint.indefinite_step_product(A, budget=args.budget)
        table = None
    elif form == "linear":
        table = prodint.riemann_product_integral(A, args.tol, min(args.levels, 18))
        W = _linear_grid_solution(A, 4 + min(args.levels, 10))
    else:
        table = stieltjes.rs_refinement(A, args.tol, min(args.levels, 18))
        W = gode._GridSolution(gode.from_a_vdef(A), A.a, A.b, 4 + min(args.levels, 10))
    res = gode.residual_sweep(gode.kernel(V), W, A.a, A.b, min(args.levels, 10), 4)
    doc = {"command": "gode", "form": form, "v_conditions": conds.to_json(),
           "convergence": table.to_json() if table is not None else None, "residuals": res.to_json()}
    emit(doc, args, table)
    return conds.all_pass and res.verdict == "decaying"


def _linear_grid_solution(A, level: int):
    return gode._GridSolution(gode.from_a_linear(A), A.a, A.b, level)


# entry point


def _budget_default() -> int:
    env = os.environ.get("PRODINT_BUDGET")
    if env is None:
        return DEFAULT_BUDGET
    try:
        return int(float(env))
    except ValueError:
        raise BadParams(f"PRODINT_BUDGET={env!r} is not a count") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol", type=float, default=DEFAULT_TOL)
    common.add_argument("--levels", type=int, default=DEFAULT_LEVELS)
    common.add_argument("--budget", type=int, default=None)
    common.add_argument("--out")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--no-timestamp", action="store_true")

    p = argparse.ArgumentParser(prog="artifact", description="Transfinite sums, product integrals and transport.")
    sub = p.add_subparsers(dest="command", required=True)

    ex = sub.add_parser("examples", parents=[common], help="list or run catalog examples")
    ex.add_argument("action", choices=("list", "run"))
    ex.add_argument("name", nargs="?")
    ex.add_argument("--filter")

    for name in ("sum", "prod"):
        sp = sub.add_parser(name, parents=[common], help=f"transfinite {name} of a mapping's values")
        sp.add_argument("--input", required=True, help="catalog name or mapping JSON file")

    pi = sub.add_parser("prodint", parents=[common], help="product integral of a mapping")
    pi.add_argument("--mapping", required=True)
    pi.add_argument("--tags", choices=("left", "right", "mid"), default="left")

    st = sub.add_parser("stieltjes", parents=[common], help="Stieltjes product integral diagnostics")
    st.add_argument("--mapping", required=True)
    st.add_argument("--mode", choices=("ks", "rs", "pvar", "scalar", "subst", "idem"), default="ks")
    st.add_argument("--p", type=float, default=2.0)

    tr = sub.add_parser("transport", parents=[common], help="parallel transport along a surface path")
    tr.add_argument("--surface", choices=("sphere", "cylinder", "polyhedron"))
    tr.add_argument("--path", required=True, help="latitude:ANGLE, helix:PITCH or cube-corner")

    go = sub.add_parser("gode", parents=[common], help="generalized ODE residual report")
    go.add_argument("--mapping", required=True)
    go.add_argument("--form", choices=("linear", "stieltjes", "vdef"), default="vdef")
    return p


COMMANDS = {
    "examples": cmd_examples,
    "sum": lambda a: cmd_sum(a, "sum"),
    "prod": lambda a: cmd_sum(a, "product"),
    "prodint": cmd_prodint,
    "stieltjes": cmd_stieltjes,
    "transport": cmd_transport,
    "gode": cmd_gode,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    try:
        if args.budget is None:
            args.budget = _budget_default()
        if not args.tol > 0:
            raise BadParams("--tol must be positive")
        if args.levels < 1:
            raise BadParams("--levels must be at least 1")
        ok = COMMANDS[args.command](args)
    except ArtifactError as exc:
        print(f"error[{exc.code}]: {exc}", file=sys.stderr)
        return 1
    except (ValueError, KeyError, OSError) as exc:
        print(f"error[input]: {exc}", file=sys.stderr)
        return 1
    return 0 if ok else 2


if __name__ == "__main__":
    sys.exit(main())
