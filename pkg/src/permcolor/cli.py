"""Command-line entry point: ``permcolor <subcommand> [flags]``.

Exit codes: 0 success, 1 usage error, 2 runtime error (enumeration cap,
node budget, no sign change, ...).  Results go to ``--out`` (relative paths
are resolved against ``$PERMCOLOR_OUT_DIR`` when set) or standard output;
diagnostics go to standard error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np

from permcolor import experiments, graph_model, iso_cube, moments, solver
from permcolor.errors import InvalidParameter, PermColorError

OUT_DIR_ENV = "PERMCOLOR_OUT_DIR"

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _jsonable(value):
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    return value


def _csv_text(rows: Sequence[dict], fields: Sequence[str]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(fields), lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({f: _csv_cell(row.get(f)) for f in fields})
    return buf.getvalue()


def _csv_cell(value):
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, tuple, dict)):
        return json.dumps(_jsonable(value), separators=(",", ":"))
    return _jsonable(value)


def _resolve_out(path: str | None) -> Path | None:
    if path is None:
        return None
    p = Path(path)
    base = os.environ.get(OUT_DIR_ENV)
    if base and not p.is_absolute():
        p = Path(base) / p
    p.parent.mkdir(parents=True, exist_ok=True)
    return p


def _write(args, text: str) -> None:
    out = _resolve_out(args.out)
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text)


def _emit_rows(args, rows: list[dict], fields: Sequence[str], meta: dict | None = None) -> None:
    if args.format == "csv":
        _write(args, _csv_text(rows, fields))
        if meta:
            print(json.dumps(_jsonable(meta), sort_keys=True), file=sys.stderr)
    else:
        doc = {"rows": [{f: r.get(f) for f in fields} for r in rows]}
        if meta:
            doc.update(meta)
        _write(args, json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n")


def _emit_record(args, record: dict) -> None:
    if args.format == "csv":
        _write(args, _csv_text([record], list(record)))
    else:
        _write(args, json.dumps(_jsonable(record), indent=2, sort_keys=True) + "\n")


def _edges(args) -> int:
    if (args.m is None) == (args.d is None):
        raise UsageError("give exactly one of --m and --d")
    if args.m is not None:
        return args.m
    return graph_model.ModelParams.edges_for_degree(args.n, args.d)


def _load_instance(args) -> graph_model.DecoratedGraph:
    if args.instance == "-":
        return graph_model.loads(sys.stdin.read())
    return graph_model.load(args.instance)


def cmd_gen(args):
    params = graph_model.ModelParams(args.n, _edges(args), args.k, args.seed)
    g = graph_model.sample_graph(params)
    _write(args, graph_model.dumps(g) + "\n")


def cmd_solve(args):
    g = _load_instance(args)
    res = solver.decide(g, args.budget)
    _write(args, json.dumps(solver.result_to_dict(res)) + "\n")


def cmd_count(args):
    g = _load_instance(args)
    _emit_record(args, {"count": str(solver.count_colorings(g, args.cap))})


def cmd_zweight(args):
    g = _load_instance(args)
    z = solver.z_weight(g, args.cap)
    _emit_record(args, {"count": str(solver.count_colorings(g, args.cap)), "z": str(z), "z_float": float(z)})


BOUNDS_FIELDS = ["k", "fm_upper", "improved_upper", "asym_lower", "asym_upper"]


def cmd_bounds(args):
    if args.k_min < 3 or args.k_max < args.k_min:
        raise UsageError("need 3 <= --k-min <= --k-max")
    rows = [r.to_dict() for r in moments.bounds_table(args.k_min, args.k_max, args.tolerance)]
    _emit_rows(args, rows, BOUNDS_FIELDS)


def cmd_scan_phi(args):
    params = moments.MomentParams(args.k, args.d)
    report = moments.scan_second_moment(params, args.resolution, args.tolerance)
    zs = np.linspace(0.0, 1.0, args.points)
    phis = moments.phi(zs, params)
    psis = moments.psi(zs, params)
    rows = [{"zeta": float(z), "phi": float(a), "psi": float(b)} for z, a, b in zip(zs, phis, psis)]
    report_doc = {"report": report.to_dict()}
    if args.report:
        Path(args.report).write_text(json.dumps(report_doc["report"], indent=2, sort_keys=True) + "\n")
        _emit_rows(args, rows, ["zeta", "phi", "psi"], None if args.format == "csv" else report_doc)
    else:
        _emit_rows(args, rows, ["zeta", "phi", "psi"], report_doc)


CURVE_FIELDS = ["d", "m", "trials", "colorable", "p_hat", "ci_lo", "ci_hi"]
MOMENT_FIELDS = ["quantity", "mean", "stderr", "reference"]


def cmd_mc(args):
    params = graph_model.ModelParams(args.n, _edges(args), args.k)
    spec = experiments.TrialSpec(params, args.trials, args.seed)
    if args.quantity == "colorable":
        est = experiments.mc_colorable(spec, args.budget, args.threads)
        row = {"d": params.d, "m": params.m, "trials": est.trials,
               "colorable": int(round(est.mean * est.trials)), "p_hat": est.mean,
               "ci_lo": est.ci_lo, "ci_hi": est.ci_hi}
        _emit_rows(args, [row], CURVE_FIELDS, {"excluded": est.excluded} if est.excluded else None)
    else:
        res = experiments.mc_moments(spec, args.threads)
        rows = [{"quantity": q, "mean": res[q].mean, "stderr": res[q].stderr, "reference": res[q].extra}
                for q in ("X", "X2", "Z")]
        meta = {"violations_loop_free": res["violations_loop_free"],
                "violations_with_loops": res["violations_with_loops"]}
        _emit_rows(args, rows, MOMENT_FIELDS, meta)


def cmd_threshold(args):
    res = experiments.threshold_bisect(args.n, args.k, args.trials, args.target, args.seed,
                                       budget=args.budget, workers=args.threads)
    for w in res.warnings:
        print(f"warning: {w}", file=sys.stderr)
    rows = [p.to_dict() for p in res.curve]
    meta = {"d_hat": res.d_hat, "bracket": list(res.bracket), "n": res.n, "k": res.k, "target": res.target}
    _emit_rows(args, rows, CURVE_FIELDS, meta)


def cmd_iso_check(args):
    if args.mode == "exhaustive":
        rep = iso_cube.exhaustive_check(args.k, args.n)
    else:
        rep = iso_cube.random_check(args.k, args.n, args.trials, args.seed)
    _write(args, json.dumps(_jsonable(rep), indent=2, sort_keys=True) + "\n")


LEMMA_FIELDS = ["check", "k", "trials", "statistic", "p_value", "passed"]


def cmd_lemma_checks(args):
    rows = []
    which = args.which
    if which in ("available", "all"):
        r = experiments.check_available_colors(args.k, args.deg, args.trials, args.seed)
        rows.append({"check": "available_colors", "k": args.k, "trials": args.trials,
                     "statistic": r["tv"], "p_value": None, "passed": r["tv"] < 0.01})
    if which in ("edge", "all"):
        r = experiments.check_edge_indep(args.k, args.trials, args.seed)
        rows.append({"check": "edge_indep", "k": args.k, "trials": args.trials,
                     "statistic": r["statistic"], "p_value": r["p_value"], "passed": r["p_value"] > 1e-3})
    if which in ("loop", "all"):
        r = experiments.check_edge_indep(args.k, args.trials, args.seed, self_loop=True)
        rows.append({"check": "self_loop_indep", "k": args.k, "trials": args.trials,
                     "statistic": r["statistic"], "p_value": r["p_value"], "passed": r["p_value"] > 1e-3})
    if which in ("degree", "all"):
        r = experiments.check_degree_model(graph_model.ModelParams(args.n, args.m, args.k), args.trials, args.seed)
        rows.append({"check": "degree_model", "k": args.k, "trials": args.trials,
                     "statistic": r["statistic"], "p_value": r["p_value"],
                     "passed": r["p_value"] > 1e-3 and r["sums_ok"]})
    _emit_rows(args, rows, LEMMA_FIELDS)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--out", help=f"output file (relative to ${OUT_DIR_ENV} if set); default stdout")
    common.add_argument("--format", choices=["csv", "json"], default="json")
    common.add_argument("--threads", type=int, default=1, help="worker processes for Monte Carlo trials")

    seeded = _Parser(add_help=False)
    seeded.add_argument("--seed", type=int, default=0)
    seeded.add_argument("--trials", type=int, default=1000)

    model = _Parser(add_help=False)
    model.add_argument("--n", type=int, required=True)
    model.add_argument("--k", type=int, default=3)
    model.add_argument("--m", type=int, help="number of edges")
    model.add_argument("--d", type=float, help="average degree; m = floor(d*n/2 + 1/2)")

    instance = _Parser(add_help=False)
    instance.add_argument("--in", dest="instance", required=True, help="instance JSON ('-' for stdin)")
    instance.add_argument("--cap", type=int, default=solver.DEFAULT_ENUMERATION_CAP, help="max k^n")

    parser = _Parser(prog="permcolor", description="Random permuted k-colorability toolkit.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("gen", parents=[common, model], help="sample a decorated random multigraph")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("solve", parents=[common, instance], help="decide colorability")
    p.add_argument("--budget", type=int, default=None, help="node limit")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("count", parents=[common, instance], help="count permuted colorings")
    p.set_defaults(func=cmd_count)

    p = sub.add_parser("zweight", parents=[common, instance], help="exact weighted count Z")
    p.set_defaults(func=cmd_zweight)

    p = sub.add_parser("bounds", parents=[common], help="threshold bounds per k")
    p.add_argument("--k-min", type=int, default=3)
    p.add_argument("--k-max", type=int, default=50)
    p.add_argument("--tolerance", type=float, default=1e-9)
    p.set_defaults(func=cmd_bounds, format="csv")

    p = sub.add_parser("scan-phi", parents=[common], help="second-moment rate scan")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--d", type=float, required=True)
    p.add_argument("--resolution", type=int, default=100_000)
    p.add_argument("--tolerance", type=float, default=1e-10, help="golden-section tolerance in zeta")
    p.add_argument("--points", type=int, default=1001, help="rows in the phi/psi table")
    p.add_argument("--report", help="also write the scan report JSON here")
    p.set_defaults(func=cmd_scan_phi, format="csv")

    p = sub.add_parser("mc", parents=[common, model, seeded], help="Monte Carlo estimates")
    p.add_argument("--quantity", choices=["colorable", "moments"], default="colorable")
    p.add_argument("--budget", type=int, default=None)
    p.set_defaults(func=cmd_mc, format="csv")

    p = sub.add_parser("threshold", parents=[common, seeded], help="bisect the colorability crossing")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--target", type=float, default=0.5)
    p.add_argument("--budget", type=int, default=None)
    p.set_defaults(func=cmd_threshold, format="csv")

    p = sub.add_parser("iso-check", parents=[common, seeded], help="Z(S) >= 1 on the cube [k]^n")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--mode", choices=["exhaustive", "random"], default="exhaustive")
    p.set_defaults(func=cmd_iso_check)

    p = sub.add_parser("lemma-checks", parents=[common, seeded], help="distributional lemma checks")
    p.add_argument("--which", choices=["available", "edge", "loop", "degree", "all"], default="all")
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--deg", type=int, default=4)
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--m", type=int, default=15)
    p.set_defaults(func=cmd_lemma_checks, format="csv")
    return parser


def dispatch(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(list(sys.argv[1:] if argv is None else argv))
        args.func(args)
    except SystemExit as exc:  # --help
        return EXIT_OK if not exc.code else EXIT_USAGE
    except (UsageError, InvalidParameter) as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_USAGE
    except (PermColorError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def main() -> None:
    sys.exit(dispatch())
