"""Command-line front end: validations, solves, convergence and complexity studies.

CSV outputs carry the versioned schema marker ``# cubature-bsde v1`` on
the first line, then a header row, one data row per (n, scheme), and one
trailing summary row per scheme holding the fitted slopes.  All numeric
output except wall_seconds is deterministic for a given invocation.
"""

import argparse
import json
import math
import sys
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import engine, problems
from .cubature import make_order3, validate_moments
from .timegrid import build, refine_midpoints

SCHEMA_VERSION = "# cubature-bsde v1"
CSV_HEADER = "n,gamma,scheme,u0_estimate,abs_error,total_nodes,wall_seconds"
ERROR_FLOOR = 1e-13


@dataclass
class StudyRow:
    n: int
    gamma: float
    scheme: str
    u0_estimate: float
    abs_error: Optional[float]
    total_nodes: int
    wall_seconds: float

    def to_csv(self) -> str:
        err = "" if self.abs_error is None else repr(self.abs_error)
        return (
            f"{self.n},{self.gamma!r},{self.scheme},{self.u0_estimate!r},"
            f"{err},{self.total_nodes},{self.wall_seconds!r}"
        )


def fit_slope(xs, ys) -> Optional[float]:
    """Ordinary least squares slope of log(y) against log(x)."""
    pairs = [(x, y) for x, y in zip(xs, ys) if y is not None and y > ERROR_FLOOR]
    if len(pairs) < 2:
        return None
    lx = np.log([p[0] for p in pairs])
    ly = np.log([p[1] for p in pairs])
    return float(np.polyfit(lx, ly, 1)[0])


def default_m_star(named: problems.NamedProblem, gamma: float, d: int) -> float:
    return engine.default_m_star(named.regime, gamma, d)


def _run_study(args) -> list[StudyRow]:
    named = problems.get(args.problem, args.dim)
    problem = named.problem
    horizon = args.horizon if args.horizon is not None else problem.T
    exact = named.exact_u0 if horizon == problem.T else None
    formula = make_order3(problem.r)
    m_star = args.m_star if args.m_star is not None else default_m_star(named, args.gamma, problem.d)
    rows: list[StudyRow] = []
    for n in args.n_list:
        grid = build(n, horizon, args.gamma)
        started = time.perf_counter()
        try:
            report = engine.sparse_solve(
                problem, grid, formula, m_star=m_star, p_max=args.p_max, threads=args.threads
            )
        except Exception as exc:  # record the failure, keep the study going
            print(f"run n={n} plain failed: {exc}", file=sys.stderr)
            rows.append(StudyRow(n, args.gamma, "plain", math.nan, None, 0, 0.0))
            continue
        wall = time.perf_counter() - started
        err = None if exact is None else abs(report.u0 - exact)
        rows.append(StudyRow(n, args.gamma, "plain", report.u0, err, report.total_nodes, wall))
        if args.extrapolate:
            fine_grid = refine_midpoints(grid)
            started = time.perf_counter()
            try:
                fine = engine.sparse_solve(
                    problem,
                    fine_grid,
                    formula,
                    m_star=m_star,
                    p_max=args.p_max,
                    threads=args.threads,
                    layer_orders=engine.paired_fine_orders(report.orders, n, args.p_max),
                )
            except Exception as exc:
                print(f"run n={n} extrapolated failed: {exc}", file=sys.stderr)
                rows.append(StudyRow(n, args.gamma, "extrapolated", math.nan, None, 0, 0.0))
                continue
            wall_fine = time.perf_counter() - started
            value = 2.0 * fine.u0 - report.u0
            err = None if exact is None else abs(value - exact)
            rows.append(
                StudyRow(
                    n,
                    args.gamma,
                    "extrapolated",
                    value,
                    err,
                    report.total_nodes + fine.total_nodes,
                    wall + wall_fine,
                )
            )
    return rows


def render_csv(rows: list[StudyRow]) -> str:
    lines = [SCHEMA_VERSION, CSV_HEADER]
    lines.extend(row.to_csv() for row in rows)
    for scheme in dict.fromkeys(row.scheme for row in rows):
        sub = [r for r in rows if r.scheme == scheme]
        err_slope = fit_slope([r.n for r in sub], [r.abs_error for r in sub])
        node_slope = fit_slope(
            [1.0 / r.abs_error for r in sub if r.abs_error and r.abs_error > ERROR_FLOOR],
            [r.total_nodes for r in sub if r.abs_error and r.abs_error > ERROR_FLOOR],
        )
        err_txt = "" if err_slope is None else repr(err_slope)
        node_txt = "" if node_slope is None else repr(node_slope)
        lines.append(f"slope,{sub[0].gamma!r},{scheme},,{err_txt},{node_txt},")
    return "\n".join(lines) + "\n"


def _write(text: str, out: Optional[str]):
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_validate_cubature(args) -> int:
    formula = make_order3(args.dim)
    report = validate_moments(formula)
    _write(report.to_json() + "\n", args.out)
    return 0 if report.passed else 1


def cmd_solve(args) -> int:
    named = problems.get(args.problem, args.dim)
    problem = named.problem
    horizon = args.horizon if args.horizon is not None else problem.T
    formula = make_order3(problem.r)
    m_star = args.m_star if args.m_star is not None else default_m_star(named, args.gamma, problem.d)
    if args.extrapolate:
        report = engine.extrapolated_solve(
            problem,
            args.n,
            args.gamma,
            formula,
            m_star=m_star,
            p_max=args.p_max,
            threads=args.threads,
        )
        payload = {
            "problem": named.name,
            "dim": problem.d,
            "scheme": "extrapolated",
            "u0": report.u0,
            "total_nodes": report.total_nodes,
            "wall_seconds": report.wall_seconds,
            "coarse": json.loads(report.coarse.to_json()),
            "fine": json.loads(report.fine.to_json()),
        }
        value = report.u0
    else:
        grid = build(args.n, horizon, args.gamma)
        report = engine.sparse_solve(
            problem, grid, formula, m_star=m_star, p_max=args.p_max, threads=args.threads
        )
        payload = json.loads(report.to_json())
        payload.update({"problem": named.name, "dim": problem.d, "scheme": "plain"})
        value = report.u0
    if named.exact_u0 is not None and horizon == problem.T:
        payload["exact_u0"] = named.exact_u0
        payload["abs_error"] = abs(value - named.exact_u0)
    _write(json.dumps(payload, indent=2) + "\n", args.out)
    return 0


def cmd_convergence(args) -> int:
    args.n_list = sorted(args.n_list)
    rows = _run_study(args)
    _write(render_csv(rows), args.out)
    return 0


def cmd_complexity(args) -> int:
    # same row schema as convergence; the summary rows carry both the
    # error-vs-n slope and the nodes-vs-accuracy exponent
    return cmd_convergence(args)


def _add_common(p: argparse.ArgumentParser, with_n_list: bool):
    p.add_argument("--problem", default="logistic-benchmark", help="registered problem name")
    p.add_argument("--dim", type=int, default=1, help="state dimension")
    p.add_argument("--gamma", type=float, default=1.0, help="grid concentration exponent")
    p.add_argument("--horizon", type=float, default=None, help="time horizon (default: problem's)")
    p.add_argument("--extrapolate", action="store_true", help="add the extrapolated scheme")
    p.add_argument("--p-max", type=int, default=engine.DEFAULT_P_MAX, help="sparse order cap")
    p.add_argument("--m-star", type=float, default=None, help="order-selection exponent override")
    p.add_argument("--threads", type=int, default=1, help="worker threads per solve")
    p.add_argument("--out", default=None, help="output path (default: stdout)")
    p.add_argument("--seedless", action="store_true", help="reserved; no randomness anywhere")
    if with_n_list:
        p.add_argument(
            "--n-list",
            type=lambda s: [int(v) for v in s.split(",")],
            default=[4, 8, 16, 32, 64],
            help="comma-separated step counts",
        )
    else:
        p.add_argument("--n", type=int, default=16, help="number of time steps")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cubsde",
        description="Cubature-tree BSDE solver with sparse-grid projection",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate-cubature", help="check the moment matching of the formula")
    p.add_argument("--dim", type=int, default=1)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_validate_cubature)

    p = sub.add_parser("solve", help="single solve, JSON report")
    _add_common(p, with_n_list=False)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("convergence", help="error against step count, CSV")
    _add_common(p, with_n_list=True)
    p.set_defaults(func=cmd_convergence)

    p = sub.add_parser("complexity", help="error against node count and time, CSV")
    _add_common(p, with_n_list=True)
    p.set_defaults(func=cmd_complexity)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
