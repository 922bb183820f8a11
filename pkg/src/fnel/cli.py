"""Command-line interface: subcommand dispatch, serialization, sweeps.

Exit codes: 0 success, 1 usage error, 2 numerical failure (report still
written when possible), 3 invalid operator spec.
"""

from __future__ import annotations

import argparse
import io
import itertools
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import liouville, scaling, solver, spectral
from .matcore import EllipticOperator
from .opspec import SpecError, load_operator, operator_digest, parse_operator_spec
from .scaling import NonlinearitySpec
from .solver import Annulus, Ball, DirichletProblem, Rectangle

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERICAL = 2
EXIT_BAD_SPEC = 3

SWEEP_ROW_CAP = 10 ** 6


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _parse_domain(text):
    parts = text.split(":")
    try:
        if parts[0] == "annulus":
            return Annulus(float(parts[1]), float(parts[2]))
        if parts[0] == "ball":
            return Ball(float(parts[1]))
        if parts[0] == "rectangle":
            return Rectangle(*(float(v) for v in parts[1:5]))
    except (IndexError, ValueError) as exc:
        raise _UsageError(f"bad domain {text!r}: {exc}")
    raise _UsageError(f"unknown domain kind {parts[0]!r}")


def _json_default(obj):
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return str(obj)


def _emit(args, payload, csv_text=None):
    if args.format == "csv" and csv_text is not None:
        out = csv_text
    else:
        out = json.dumps(payload, indent=2, sort_keys=True,
                         default=_json_default) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(out)
    else:
        sys.stdout.write(out)


def _echo(args, op):
    echo = {"operator_digest": operator_digest(op)}
    for name in ("n", "p", "gamma", "cells", "tol", "seed"):
        if hasattr(args, name) and getattr(args, name) is not None:
            echo[name] = getattr(args, name)
    return echo


def build_parser():
    parser = _Parser(prog="fnel", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, need_op=True):
        if need_op:
            p.add_argument("--op", required=True, help="operator spec JSON file")
        p.add_argument("--n", type=int, default=None)
        p.add_argument("--p", type=float, default=None)
        p.add_argument("--gamma", type=float, default=0.0)
        p.add_argument("--cells", type=int, default=512)
        p.add_argument("--tol", type=float, default=1e-12)
        p.add_argument("--out", default=None)
        p.add_argument("--format", choices=("json", "csv"), default="json")
        p.add_argument("--jobs", type=int, default=None)
        p.add_argument("--seed", type=int, default=0)
        return p

    common(sub.add_parser("alpha-star"))
    common(sub.add_parser("critical-exponent"))
    common(sub.add_parser("classify"))
    common(sub.add_parser("constant"))

    p_solve = common(sub.add_parser("solve"))
    p_solve.add_argument("--domain", required=True)
    p_solve.add_argument("--rhs-const", type=float, default=0.0)
    p_solve.add_argument("--g0", type=float, default=0.0)
    p_solve.add_argument("--g1", type=float, default=0.0)

    p_eigen = common(sub.add_parser("eigen"))
    p_eigen.add_argument("--domain", required=True)

    common(sub.add_parser("fundamental"))
    common(sub.add_parser("hadamard"))

    p_cert = common(sub.add_parser("certificate"))
    p_cert.add_argument("--c", type=float, default=1.0)
    p_cert.add_argument("--sigma-max", type=float, default=1e6)

    common(sub.add_parser("bend"))
    common(sub.add_parser("truncate"))
    common(sub.add_parser("fixed-point"))

    p_hyp = common(sub.add_parser("hypothesis"))
    p_hyp.add_argument("--power", required=True,
                       help="c:gamma:p describing f = c |x|^-gamma s^p")

    p_sweep = common(sub.add_parser("sweep"), need_op=False)
    p_sweep.add_argument("--config", required=True)

    return parser


# ---------------------------------------------------------------------------
# subcommand handlers


def _cmd_alpha_star(args, op, n):
    rep = scaling.alpha_star(op, n, args.tol if args.tol else 1e-12)
    return {
        **_echo(args, op),
        "alpha_star": rep.alpha_star,
        "log_case": rep.log_case,
        "bracket": list(rep.bracket),
        "critical_exponent": rep.critical_exponent,
    }, None


def _cmd_critical_exponent(args, op, n):
    rep = scaling.alpha_star(op, n)
    return {**_echo(args, op), "critical_exponent": rep.critical_exponent}, None


def _cmd_classify(args, op, n):
    if args.p is None:
        raise _UsageError("classify needs --p")
    v = scaling.classify(op, n, args.p, args.gamma)
    return {
        **_echo(args, op),
        "outcome": v.outcome,
        "alpha_star": v.alpha_star,
        "beta_star": v.beta_star,
        "margin": v.margin,
        "theorem_cited": v.theorem_cited,
    }, None


def _cmd_constant(args, op, n):
    if args.p is None:
        raise _UsageError("constant needs --p")
    c = scaling.explicit_constant(op, n, args.p, args.gamma)
    return {
        **_echo(args, op),
        "constant": c if c is not None else "NONE",
        "beta_star": scaling.beta_star(args.p, args.gamma),
    }, None


def _cmd_solve(args, op, n):
    dom = _parse_domain(args.domain)
    g0, g1, rc = args.g0, args.g1, args.rhs_const
    if isinstance(dom, (Annulus, Ball)):
        if isinstance(dom, Annulus):
            bc = lambda r: g0 if abs(r - dom.r0) < abs(r - dom.r1) else g1
        else:
            bc = lambda r: g1
        problem = DirichletProblem(domain=dom, n=n, rhs=lambda r: rc, boundary=bc)
        fld = solver.solve_dirichlet_radial(op, n, problem, args.cells)
    else:
        problem = DirichletProblem(domain=dom, n=2, rhs=lambda x, y: rc,
                                   boundary=lambda x, y: g1)
        h = min(dom.x1 - dom.x0, dom.y1 - dom.y0) / args.cells
        fld = solver.solve_dirichlet_2d(op, problem, h)
    fld.meta.update(_echo(args, op))
    payload = {**_echo(args, op), "residual": fld.meta.get("residual")}
    return payload, fld.to_csv()


def _cmd_eigen(args, op, n):
    dom = _parse_domain(args.domain)
    tol = args.tol if args.tol and args.tol < 1e-2 else 1e-8
    res = spectral.principal_eigenvalue(op, dom, args.cells, max(tol, 1e-12))
    payload = {
        **_echo(args, op),
        "lambda1": res.lambda1,
        "iterations": res.iterations,
        "drift": res.drift,
    }
    res.eigenfield.meta.update(_echo(args, op))
    return payload, res.eigenfield.to_csv()


def _cmd_fundamental(args, op, n):
    prof = solver.fundamental_profile(op, n, args.cells)
    payload = {
        **_echo(args, op),
        "fitted_alpha": prof.fitted_alpha,
        "log_case": prof.log_case,
        "fit_report": prof.fit_report,
    }
    return payload, prof.field.to_csv()


def _cmd_hadamard(args, op, n):
    rep = scaling.alpha_star(op, n)
    a = rep.alpha_star

    def bc(r):
        return scaling.xi_alpha(a, r)

    problem = DirichletProblem(domain=Annulus(1.0, 2.0), n=n, boundary=bc)
    fld = solver.solve_dirichlet_radial(op, n, problem, args.cells)
    report = liouville.hadamard_check(op, fld)
    curve = liouville.sphere_min_curve(fld, fld.nodes[:: max(1, args.cells // 64)])
    buf = io.StringIO()
    buf.write(f"# operator_digest={operator_digest(op)} alpha_star={a!r}\n")
    buf.write("r,m\n")
    for r, m in curve:
        buf.write(f"{float(r)!r},{float(m)!r}\n")
    return {**_echo(args, op), **report}, buf.getvalue()


def _cmd_certificate(args, op, n):
    if args.p is None:
        raise _UsageError("certificate needs --p")
    rep = liouville.nonexistence_certificate(
        op, n, args.p, args.gamma, args.c, args.sigma_max, cells=args.cells)
    curve = rep.pop("curve")
    buf = io.StringIO()
    buf.write(f"# operator_digest={operator_digest(op)}\n")
    buf.write("sigma,mu\n")
    for s, m in curve:
        buf.write(f"{float(s)!r},{float(m)!r}\n")
    return {**_echo(args, op), **rep}, buf.getvalue()


def _cmd_bend(args, op, n):
    if args.p is None:
        raise _UsageError("bend needs --p")
    tau, c, rep = liouville.bend_fundamental(op, n, args.p, args.gamma)
    return {**_echo(args, op), "tau": tau, "c": c, **rep}, None


def _cmd_truncate(args, op, n):
    if args.p is None:
        raise _UsageError("truncate needs --p")
    patch = liouville.build_global_supersolution(op, n, args.p, args.gamma,
                                                 cells=args.cells)
    return {
        **_echo(args, op),
        "a": patch.a,
        "delta": patch.delta,
        "match_radius": patch.match_radius,
        "tail_scale": patch.tail_scale,
        "beta": patch.beta,
        "continuity_jumps": list(patch.continuity_jumps),
        "residuals": patch.residual_report,
    }, None


def _cmd_fixed_point(args, op, n):
    if args.p is None:
        raise _UsageError("fixed-point needs --p")
    profile, r_bar, rep = liouville.fixed_point(op, n, args.p)
    return {
        **_echo(args, op),
        "beta": profile.beta,
        "norm": profile.norm(),
        "constant": profile.constant,
        "r_bar": r_bar,
        **{k: v for k, v in rep.items() if k != "norm"},
    }, None


def _cmd_hypothesis(args, op, n):
    if args.p is None:
        raise _UsageError("hypothesis needs --p")
    try:
        c0, g, pw = (float(v) for v in args.power.split(":"))
    except ValueError as exc:
        raise _UsageError(f"bad --power {args.power!r}: {exc}")
    spec = NonlinearitySpec.power(c0, g, pw)
    rep = scaling.sampled_verdict(op, n, spec, args.p, args.gamma)
    conditions = [
        {"name": c.name, "fitted_constant": c.fitted_constant,
         "passed": c.passed}
        for c in rep["report"].conditions
    ]
    payload = {k: v for k, v in rep.items() if k != "report"}
    payload["conditions"] = conditions
    return {**_echo(args, op), **payload}, None


_HANDLERS = {
    "alpha-star": _cmd_alpha_star,
    "critical-exponent": _cmd_critical_exponent,
    "classify": _cmd_classify,
    "constant": _cmd_constant,
    "solve": _cmd_solve,
    "eigen": _cmd_eigen,
    "fundamental": _cmd_fundamental,
    "hadamard": _cmd_hadamard,
    "certificate": _cmd_certificate,
    "bend": _cmd_bend,
    "truncate": _cmd_truncate,
    "fixed-point": _cmd_fixed_point,
    "hypothesis": _cmd_hypothesis,
}


# ---------------------------------------------------------------------------
# sweeps

SWEEP_AXES = ("p", "gamma", "lambda", "Lambda", "n")
SWEEP_COLUMNS = {
    "classify": ("outcome", "alpha_star", "beta_star", "margin"),
    "alpha-star": ("alpha_star", "log_case", "critical_exponent"),
    "critical-exponent": ("critical_exponent",),
    "constant": ("constant", "beta_star"),
    "bend": ("tau", "c"),
}


def _sweep_operator(kind, lam, Lam, n):
    return parse_operator_spec(json.dumps(
        {"n": n, "kind": kind, "lambda": lam, "Lambda": Lam}))


def _sweep_row(task):
    command, kind, params = task
    p = params.get("p", 2.0)
    gamma = params.get("gamma", 0.0)
    lam = params.get("lambda", 1.0)
    Lam = params.get("Lambda", lam)
    n = int(params.get("n", 3))
    row = {k: params.get(k, "") for k in SWEEP_AXES}
    try:
        op = _sweep_operator(kind, lam, Lam, n)
        if command == "classify":
            v = scaling.classify(op, n, p, gamma)
            vals = (v.outcome, v.alpha_star, v.beta_star, v.margin)
        elif command == "alpha-star":
            rep = scaling.alpha_star(op, n)
            vals = (rep.alpha_star, rep.log_case, rep.critical_exponent)
        elif command == "critical-exponent":
            vals = (scaling.alpha_star(op, n).critical_exponent,)
        elif command == "constant":
            c = scaling.explicit_constant(op, n, p, gamma)
            vals = (c if c is not None else "NONE", scaling.beta_star(p, gamma))
        elif command == "bend":
            tau, c, _ = liouville.bend_fundamental(op, n, p, gamma)
            vals = (tau, c)
        else:
            raise ValueError(f"sweep does not support command {command!r}")
        row.update(dict(zip(SWEEP_COLUMNS[command], vals)))
        row["error"] = ""
    except Exception as exc:  # per-row failure, recorded not raised
        row.update({k: "" for k in SWEEP_COLUMNS.get(command, ())})
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def run_sweep(config: dict, jobs: int = 1) -> tuple:
    """Execute a sweep; returns (csv_text, any_row_failed)."""
    command = config.get("command")
    if command not in SWEEP_COLUMNS:
        raise _UsageError(f"sweep command must be one of {sorted(SWEEP_COLUMNS)}")
    kind = config.get("kind", "pucci_max")
    axes = config.get("axes", {})
    names = [a for a in SWEEP_AXES if a in axes]
    lists = [axes[a] for a in names]
    total = math.prod(len(v) for v in lists) if lists else 0
    if total > SWEEP_ROW_CAP:
        raise _UsageError(f"axis product {total} exceeds the {SWEEP_ROW_CAP} row cap")
    tasks = [
        (command, kind, dict(zip(names, combo)))
        for combo in itertools.product(*lists)
    ]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_sweep_row, tasks))
    else:
        rows = [_sweep_row(t) for t in tasks]
    columns = list(SWEEP_AXES) + list(SWEEP_COLUMNS[command]) + ["error"]
    buf = io.StringIO()
    buf.write(",".join(columns) + "\n")
    failed = False
    for row in rows:
        failed = failed or bool(row["error"])
        buf.write(",".join(str(row.get(c, "")) for c in columns) + "\n")
    return buf.getvalue(), failed


def _cmd_sweep(args):
    try:
        with open(args.config, encoding="utf-8") as fh:
            config = json.load(fh)
    except OSError as exc:
        raise _UsageError(f"cannot read sweep config: {exc}")
    except json.JSONDecodeError as exc:
        raise _UsageError(f"malformed sweep config: {exc}")
    jobs = args.jobs
    if jobs is None:
        jobs = int(os.environ.get("FNEL_JOBS", os.cpu_count() or 1))
    csv_text, failed = run_sweep(config, jobs)
    out_path = args.out or config.get("output")
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(csv_text)
    else:
        sys.stdout.write(csv_text)
    return EXIT_NUMERICAL if failed else EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        if args.command == "sweep":
            return _cmd_sweep(args)
        try:
            op = load_operator(args.op)
        except (SpecError, OSError) as exc:
            print(f"invalid operator spec: {exc}", file=sys.stderr)
            return EXIT_BAD_SPEC
        n = args.n if args.n is not None else op.dim
        if n != op.dim:
            print(f"usage error: --n {n} does not match operator dim {op.dim}",
                  file=sys.stderr)
            return EXIT_USAGE
        payload, csv_text = _HANDLERS[args.command](args, op, n)
        _emit(args, payload, csv_text)
        return EXIT_OK
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (solver.PolicyIterationDiverged, spectral.IterationFailure,
            liouville.WrongRegime, scaling.OperatorInvalid,
            RuntimeError) as exc:
        report = {"error": f"{type(exc).__name__}: {exc}"}
        try:
            _emit(args, report)
        except Exception:
            pass
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
