"""``conelab`` command-line front end.

Exit codes: 0 success (convert: feasible), 2 usage or input error,
3 convert infeasible, 4 solver failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from typing import Sequence

import numpy as np

from . import linalg as la
from . import werner
from .cones import CLI_NAMES, PPT, Positive, from_cli
from .conversion import preprocessing_feasible
from .engine import SolverError
from .entropies import (conic_norm, cv_restricted, d_max_restricted, h_max_restricted,
                        h_min_doubly_restricted, h_min_restricted, hartley_cq,
                        hypothesis_testing_restricted, smoothed)
from .io import OperatorFileError, parse_channel_file, parse_operator_file, write_operator_file
from .supermaps import extended_min_entropy
from .sweep import QUANTITIES, SweepSpec, run_sweep

EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_SOLVER = 0, 2, 3, 4


def fmt(x: float) -> str:
    """Fixed 12-decimal output in the usual range, 12 significant digits otherwise."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if x == 0 or 1e-3 <= abs(x) < 1e6:
        return f"{x:.12f}"
    return f"{x:.11e}"


def _direction(text: str) -> str:
    return text.replace("_given_", "|")


def _emit(args, line: str, payload: dict) -> None:
    if args.json:
        print(json.dumps(payload, sort_keys=True))
    else:
        print(line)
        if getattr(args, "report", False) and "report" in payload:
            print(json.dumps(payload["report"], indent=1, sort_keys=True))


def _result(args, label: str, res) -> int:
    payload = res.to_dict()
    payload["label"] = label
    _emit(args, f"{label} = {fmt(res.value_bits)}", payload)
    return EXIT_OK


def _cone(args, dims):
    return from_cli(args.cone, dims, args.cut, args.blocks)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_dmax(args) -> int:
    P, Q = parse_operator_file(args.p), parse_operator_file(args.q)
    return _result(args, "D_max^K", d_max_restricted(P, Q, _cone(args, P.dims), tol=args.tol))


def _split_labels(args):
    return tuple(args.a_labels.split(",")) if args.a_labels else None


def cmd_hmin(args) -> int:
    rho = parse_operator_file(args.state)
    res = h_min_restricted(rho, _cone(args, rho.dims), _direction(args.direction), tol=args.tol,
                           a_labels=_split_labels(args))
    return _result(args, "H_min^K", res)


def cmd_hmin2(args) -> int:
    rho = parse_operator_file(args.state)
    return _result(args, "H_min^K(doubly)", h_min_doubly_restricted(rho, _cone(args, rho.dims), tol=args.tol))


def cmd_norm(args) -> int:
    X = parse_operator_file(args.op)
    val, rep = conic_norm(X, _cone(args, X.dims), tol=args.tol, with_report=True)
    payload = {"label": "||X||_K", "value": val}
    if rep is not None:
        payload["report"] = rep.to_dict()
    _emit(args, f"||X||_K = {fmt(val)}", payload)
    return EXIT_OK


def cmd_hmax(args) -> int:
    rho = parse_operator_file(args.state)
    labels = tuple(args.labels.split(",")) if args.labels else None
    k = _cone(args, rho.dims.select(list(labels[:2]) if labels else list(rho.dims.labels[:2])))
    return _result(args, "H_max^K", h_max_restricted(rho, k, tol=args.tol, labels=labels))


def cmd_hartley(args) -> int:
    rho = parse_operator_file(args.state)
    v = hartley_cq(rho, args.classical)
    _emit(args, f"H_0 = {fmt(v)}", {"label": "H_0", "value_bits": v})
    return EXIT_OK


def cmd_dh(args) -> int:
    P, Q = parse_operator_file(args.p), parse_operator_file(args.q)
    res = hypothesis_testing_restricted(P, Q, args.epsilon, _cone(args, P.dims), tol=args.tol)
    return _result(args, "D_h^{eps,K}", res)


def cmd_cv(args) -> int:
    ch = parse_channel_file(args.channel)
    val, res = cv_restricted(ch, _cone(args, ch.op.dims), tol=args.tol, with_result=True)
    payload = res.to_dict()
    payload.update(label="cv^K", value=val)
    _emit(args, f"cv^K = {fmt(val)}", payload)
    return EXIT_OK


def cmd_smooth(args) -> int:
    rho = parse_operator_file(args.state)
    Q = parse_operator_file(args.q) if args.q else None
    if args.quantity == "dmax" and Q is None:
        raise ValueError("smooth --quantity dmax needs --q")
    res = smoothed(args.quantity, rho, args.epsilon, _cone(args, rho.dims), Q=Q,
                   direction=_direction(args.direction), tol=args.tol)
    label = "D_max^{eps,K}" if args.quantity == "dmax" else "H_min^{eps,K}"
    return _result(args, label, res)


def cmd_ext_hmin(args) -> int:
    ch = parse_channel_file(args.channel)
    dims = tuple(int(d) for d in args.dims.split(",")) if args.dims else None
    k = Positive() if args.cone == "pos" else PPT(("B0", "B1"))
    res = extended_min_entropy(ch, _direction(args.direction), k, tol=args.tol, dims=dims)
    return _result(args, "H_ext^K", res)


def cmd_convert(args) -> int:
    phi, psi = parse_channel_file(args.from_), parse_channel_file(args.to)
    prof = la.DimProfile((("in", psi.din), ("out", phi.din)))
    cert = preprocessing_feasible(phi, psi, _cone(args, prof), tol=args.tol)
    if cert.feasible and args.emit_xi:
        write_operator_file(cert.xi_choi, args.emit_xi)
    payload = cert.to_dict()
    line = (f"feasible residual = {fmt(cert.residual)}" if cert.feasible
            else f"{cert.status}")
    _emit(args, line, payload)
    return EXIT_OK if cert.feasible else EXIT_INFEASIBLE


def cmd_werner(args) -> int:
    if args.action == "fig":
        grid = np.linspace(0.0, 1.0, args.grid)
        rows = werner.nonmultiplicativity_curve(args.d, grid)
        if args.out:
            werner.write_curve_csv(rows, args.out)
        if args.json:
            print(json.dumps({"header": werner.CURVE_HEADER, "rows": rows}))
        elif not args.out:
            print(",".join(werner.CURVE_HEADER))
            for r in rows:
                print(",".join(f"{v:.15g}" for v in r))
        return EXIT_OK
    if args.action == "crossings":
        xs = werner.ratio_crossings(args.d, args.grid)
        _emit(args, "crossings = " + ", ".join(fmt(x) for x in xs), {"crossings": xs})
        return EXIT_OK
    if args.action == "scan":
        if args.lam is None:
            raise ValueError("werner scan needs --lambda")
        r = werner.separation_scan(args.lam)
        _emit(args, f"d = {r.d}" + (" (capped)" if r.capped else ""),
              {"lambda": r.lam, "d": r.d, "capped": r.capped})
        return EXIT_OK
    p = werner.convert_params(args.d, lam=args.lam, alpha=args.alpha)
    if args.action == "norm":
        vals = {"k1_closed_form": werner.werner_norm_closed(p, 1),
                "separable": werner.werner_norm_sep(p),
                "k2": werner.werner_norm_closed(p, 2)}
        _emit(args, "  ".join(f"{k} = {fmt(v)}" for k, v in vals.items()),
              dict(vals, d=p.d, lam=p.lam, alpha=p.alpha))
        return EXIT_OK
    if args.action == "dmax":
        v = werner.werner_dmax_sep_closed(p.d, p.lam)
        _emit(args, f"D_max^Sep = {fmt(v)}", {"value_bits": v, "d": p.d, "lam": p.lam})
        return EXIT_OK
    raise AssertionError(args.action)


def cmd_sweep(args) -> int:
    fixed = {k: v for k, v in (("state", args.state), ("q", args.q), ("cone", args.cone),
                               ("cut", args.cut), ("blocks", args.blocks),
                               ("direction", _direction(args.direction)), ("tol", args.tol),
                               ("d", args.d)) if v is not None}
    spec = SweepSpec(args.quantity, args.start, args.stop, args.points, fixed, args.out, args.param)
    rows = run_sweep(spec, jobs=args.jobs)
    if args.json:
        print(json.dumps({"rows": [list(r) for r in rows]}))
    elif not args.out:
        print("parameter,value,dual_value,gap,status")
        for r in rows:
            print(",".join(fmt(v) if not isinstance(v, str) else v for v in r))
    failures = sum(1 for r in rows if str(r[4]).startswith("error"))
    if failures:
        print(f"{failures} of {len(rows)} points failed (recorded inline)", file=sys.stderr)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol", type=float, default=None,
                        help="solver tolerance (default: $CONELAB_TOL or 1e-8)")
    common.add_argument("--json", action="store_true", help="machine-readable output")
    common.add_argument("--report", action="store_true", help="also print the solver report")

    cone = argparse.ArgumentParser(add_help=False)
    cone.add_argument("--cone", choices=CLI_NAMES, default="pos")
    cone.add_argument("--cut", default=None, help="bipartition LEFT:RIGHT (labels), e.g. A:B")
    cone.add_argument("--blocks", default=None, help="block cone index groups, e.g. '0,1;2,3'")

    p = argparse.ArgumentParser(prog="conelab", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("dmax", parents=[common, cone], help="restricted max-relative entropy")
    s.add_argument("--p", required=True)
    s.add_argument("--q", required=True)
    s.set_defaults(fn=cmd_dmax)

    s = sub.add_parser("hmin", parents=[common, cone], help="restricted conditional min-entropy")
    s.add_argument("--state", required=True)
    s.add_argument("--direction", default="A_given_B", choices=["A_given_B", "B_given_A", "A|B", "B|A"])
    s.add_argument("--a-labels", default=None, help="comma-separated factors forming the A side")
    s.set_defaults(fn=cmd_hmin)

    s = sub.add_parser("hmin2", parents=[common, cone], help="doubly restricted min-entropy")
    s.add_argument("--state", required=True)
    s.set_defaults(fn=cmd_hmin2)

    s = sub.add_parser("norm", parents=[common, cone], help="cone-restricted norm")
    s.add_argument("--op", required=True)
    s.set_defaults(fn=cmd_norm)

    s = sub.add_parser("hmax", parents=[common, cone], help="restricted max-entropy of a pure ABC state")
    s.add_argument("--state", required=True)
    s.add_argument("--labels", default=None, help="factor labels A,B,C (default: file order)")
    s.set_defaults(fn=cmd_hmax)

    s = sub.add_parser("hartley", parents=[common], help="Hartley entropy of a CQ state")
    s.add_argument("--state", required=True)
    s.add_argument("--classical", default=None, help="label of the classical factor")
    s.set_defaults(fn=cmd_hartley)

    s = sub.add_parser("dh", parents=[common, cone], help="restricted hypothesis-testing entropy")
    s.add_argument("--p", required=True)
    s.add_argument("--q", required=True)
    s.add_argument("--epsilon", type=float, required=True)
    s.set_defaults(fn=cmd_dh)

    s = sub.add_parser("cv", parents=[common, cone], help="restricted communication value")
    s.add_argument("--channel", required=True)
    s.set_defaults(fn=cmd_cv)

    s = sub.add_parser("smooth", parents=[common, cone], help="smoothed d_max or h_min")
    s.add_argument("--quantity", choices=["dmax", "hmin"], required=True)
    s.add_argument("--state", required=True)
    s.add_argument("--q", default=None)
    s.add_argument("--epsilon", type=float, required=True)
    s.add_argument("--direction", default="A_given_B", choices=["A_given_B", "B_given_A", "A|B", "B|A"])
    s.set_defaults(fn=cmd_smooth)

    s = sub.add_parser("ext-hmin", parents=[common], help="extended min-entropy of a bipartite channel")
    s.add_argument("--channel", required=True)
    s.add_argument("--direction", default="B_given_A", choices=["B_given_A", "A_given_B", "B|A", "A|B"])
    s.add_argument("--cone", choices=["pos", "ppt"], default="pos")
    s.add_argument("--dims", default=None, help="dA0,dA1,dB0,dB1 (default: even split)")
    s.set_defaults(fn=cmd_ext_hmin)

    s = sub.add_parser("convert", parents=[common, cone],
                       help="is the --from channel equal to the --to channel after a unital pre-processing?")
    s.add_argument("--from", dest="from_", required=True, help="target channel Phi")
    s.add_argument("--to", required=True, help="resource channel Psi")
    s.add_argument("--emit-xi", default=None, help="write the recovered pre-processing Choi here")
    s.set_defaults(fn=cmd_convert)

    s = sub.add_parser("werner", parents=[common], help="Werner-state closed forms and figure data")
    s.add_argument("action", choices=["fig", "crossings", "norm", "dmax", "scan"])
    s.add_argument("--d", type=int, default=3)
    s.add_argument("--grid", type=int, default=200)
    s.add_argument("--lambda", dest="lam", type=float, default=None)
    s.add_argument("--alpha", type=float, default=None)
    s.add_argument("--out", default=None)
    s.set_defaults(fn=cmd_werner)

    s = sub.add_parser("sweep", parents=[common], help="parameter sweep to CSV")
    s.add_argument("--quantity", choices=sorted(QUANTITIES), required=True)
    s.add_argument("--param", default=None, help="swept parameter (checked against the quantity)")
    s.add_argument("--start", type=float, required=True)
    s.add_argument("--stop", type=float, required=True)
    s.add_argument("--points", type=int, required=True)
    s.add_argument("--state", default=None)
    s.add_argument("--q", default=None)
    s.add_argument("--cone", choices=CLI_NAMES, default=None)
    s.add_argument("--cut", default=None)
    s.add_argument("--blocks", default=None)
    s.add_argument("--direction", default="A_given_B")
    s.add_argument("--d", type=int, default=None)
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--out", default=None)
    s.set_defaults(fn=cmd_sweep)
    return p


def run_command(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # unknown flags: usage + SystemExit(2)
    try:
        return args.fn(args)
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        if exc.report is not None:
            print(exc.report.to_json(), file=sys.stderr)
        return EXIT_SOLVER
    except (OperatorFileError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main(argv: Sequence[str] | None = None) -> int:
    try:
        return run_command(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
