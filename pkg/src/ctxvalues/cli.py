"""Command-line front end.

    ctxvalues {check,solve,average,weaklimit,bounds} [options]

A problem is assembled from an optional ``--problem`` JSON document with
the individual flags layered on top, then resolved by
:func:`ctxvalues.problem.parse_problem`.  Reports go to stdout as JSON or
CSV.  Exit codes: 0 success, 1 error, 2 expectation violated.
"""

import argparse
import csv
import io
import json
import sys
from dataclasses import asdict, dataclass

import numpy as np

from .contextual import build_cv_problem, cv_statistics, necessary_condition_residual
from .errors import ContextualValuesError, NotDiagonalError
from .measurement import (
    completeness_residual,
    denominator_deviation,
    outcome_probabilities,
    povm_elements,
    weakness_residual,
)
from .operators import min_eigenvalue
from .problem import SpecError, parse_problem
from .weaklimit import ANOMALOUS, conditioned_average, extrapolate_weak_limit, solve_at

COMMANDS = ("check", "solve", "average", "weaklimit", "bounds")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_EXPECTATION = 2

CSV_COLUMNS = {
    "check": ["g", "completeness_residual", "min_operator_eigenvalue", "weakness_residual", "denominator_deviation"],
    "solve": ["g", "method", "residual", "alpha", "mean", "second_moment", "variance", "bound_star", "bound_dstar", "necessary_condition_residual"],
    "average": ["g", "value", "weak_term", "anomalous_term", "denominator"],
    "weaklimit": ["g", "value", "weak_term", "anomalous_term", "denominator"],
    "bounds": ["g", "second_moment", "variance", "bound_star", "bound_dstar"],
}


@dataclass
class Report:
    command: str
    exit_code: int
    data: dict

    def to_json(self):
        return json.dumps(self.data, indent=2, sort_keys=True) + "\n"

    def to_csv(self):
        buf = io.StringIO()
        if self.command == "weaklimit":
            for key in ("limit_estimate", "limit_uncertainty", "weak_value", "anomaly_estimate"):
                buf.write(f"# {key}={_fmt(self.data[key])}\n")
            buf.write(f"# verdict={self.data['verdict']}\n")
        writer = csv.writer(buf, lineterminator="\n")
        cols = CSV_COLUMNS[self.command]
        writer.writerow(cols)
        for row in self.data["rows"]:
            writer.writerow([_fmt(row[c]) for c in cols])
        return buf.getvalue()


def _fmt(x):
    if isinstance(x, float):
        return f"{x:.6g}"
    if isinstance(x, list):
        return " ".join(_fmt(v) for v in x)
    return str(x)


def _check_rows(spec):
    fam, rho, post = spec.fam, spec.rho, spec.post
    rows = []
    for g in spec.grid:
        rows.append(
            {
                "g": g,
                "completeness_residual": completeness_residual(fam, g),
                "min_operator_eigenvalue": min(min_eigenvalue(m) for m in fam.operators(g)),
                "weakness_residual": weakness_residual(fam, g, rho),
                "denominator_deviation": denominator_deviation(fam, g, rho, post),
            }
        )
    return rows


def _solve_rows(spec, with_solution):
    fam, rho, obs = spec.fam, spec.rho, spec.obs
    rows = []
    for g in spec.grid:
        sol = solve_at(fam, obs, spec.solver_selector(), g, rho)
        p = outcome_probabilities(fam, g, rho)
        row = {"g": g, **asdict(cv_statistics(sol.alpha, p))}
        if with_solution:
            try:
                prob = build_cv_problem(povm_elements(fam, g), obs, g)
                ncr = necessary_condition_residual(prob, sol, p)
            except NotDiagonalError:
                ncr = float("nan")
            row.update(
                method=sol.method,
                residual=sol.residual,
                alpha=[float(a) for a in sol.alpha],
                necessary_condition_residual=ncr,
            )
        rows.append(row)
    return rows


def _average_rows(spec):
    fam, rho, obs, post = spec.fam, spec.rho, spec.obs, spec.post
    rows = []
    for g in spec.grid:
        sol = solve_at(fam, obs, spec.solver_selector(), g, rho)
        rows.append(asdict(conditioned_average(fam, g, sol, rho, post, obs)))
    return rows


def execute(spec, command, expect_weak_value=False):
    """Run ``command`` on a resolved problem and return a :class:`Report`.

    Library errors propagate; :func:`main` turns them into exit code 1.
    """
    header = {"command": command, "family": spec.family, "solver": spec.solver}
    if command == "check":
        data = {**header, "rows": _check_rows(spec)}
    elif command == "solve":
        data = {**header, "rows": _solve_rows(spec, with_solution=True)}
    elif command == "bounds":
        data = {**header, "rows": _solve_rows(spec, with_solution=False)}
    elif command == "average":
        data = {**header, "rows": _average_rows(spec)}
    elif command == "weaklimit":
        rep = extrapolate_weak_limit(
            spec.fam, spec.obs, spec.solver_selector(), spec.rho, spec.post, spec.grid
        )
        data = {
            **header,
            "rows": [asdict(b) for b in rep.sweep],
            "limit_estimate": rep.limit_estimate,
            "limit_uncertainty": rep.limit_uncertainty,
            "weak_value": rep.weak_value,
            "anomaly_estimate": rep.anomaly_estimate,
            "verdict": rep.verdict,
        }
        if expect_weak_value and rep.verdict == ANOMALOUS:
            return Report(command, EXIT_EXPECTATION, data)
    else:
        raise ValueError(f"unknown command {command!r}; choose from {COMMANDS}")
    return Report(command, EXIT_OK, data)


def _parse_params(text):
    params = {}
    for item in filter(None, (s.strip() for s in text.split(","))):
        key, sep, value = item.partition("=")
        if not sep:
            raise argparse.ArgumentTypeError(f"expected key=value, got {item!r}")
        try:
            params[key.strip()] = int(value)
        except ValueError:
            params[key.strip()] = float(value)
    return params


def _parse_grid(text):
    try:
        g0, ratio, count = text.split(",")
        return {"g0": float(g0), "ratio": float(ratio), "count": int(count)}
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected g0,r,K, got {text!r}") from None


def _load_json(path):
    with open(path) as fh:
        return json.load(fh)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="ctxvalues",
        description="Contextual values, conditioned averages and weak-limit sweeps.",
    )
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--problem", metavar="FILE", help="JSON problem document")
    parser.add_argument("--family", help="builtin family: version1, dj3x3, identity")
    parser.add_argument("--param", type=_parse_params, metavar="a=..,b=..", help="family parameters")
    parser.add_argument(
        "--solver",
        help="pinv, minvar, custom, or a closed-form solution label such as inverse_square",
    )
    parser.add_argument("--grid", type=_parse_grid, metavar="g0,r,K", help="geometric grid g0*r**k, k<K")
    parser.add_argument("--state", metavar="FILE", help="JSON density matrix")
    parser.add_argument("--postselect", metavar="FILE", help="JSON postselection vector")
    parser.add_argument("--alpha", metavar="FILE", help="JSON table of custom contextual values")
    parser.add_argument(
        "--expect-weak-value",
        action="store_true",
        help="exit with status 2 if the weak limit is anomalous",
    )
    parser.add_argument("--out", choices=("json", "csv"), default="json")
    return parser


def document_from_args(args):
    doc = _load_json(args.problem) if args.problem else {}
    if args.family:
        if doc.get("family") != args.family:
            doc.pop("params", None)
        doc["family"] = args.family
    if args.param is not None:
        doc["params"] = args.param
    if args.solver:
        doc["solver"] = args.solver
    if args.grid is not None:
        doc["grid"] = args.grid
    if args.state:
        doc["state"] = _load_json(args.state)
    if args.postselect:
        doc["postselect"] = _load_json(args.postselect)
    if args.alpha:
        doc["alpha"] = _load_json(args.alpha)
    return doc


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        spec = parse_problem(document_from_args(args))
        report = execute(spec, args.command, args.expect_weak_value)
    except SpecError as exc:
        for problem in exc.problems:
            print(f"error: {problem}", file=sys.stderr)
        return EXIT_ERROR
    except (ContextualValuesError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    sys.stdout.write(report.to_csv() if args.out == "csv" else report.to_json())
    return report.exit_code


if __name__ == "__main__":
    sys.exit(main())
