"""Command line: ``mfb verify | integrate | spectrum | average``.

Exit codes: 0 all checks pass, 1 a check failed (or a geometric error
stopped the computation), 2 configuration, parse or usage error.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from ..errors import GeometryError, ParseError, ValidationError
from .scenarios import DEFAULT_TOLERANCES, load_scenario
from .suites import DEFAULT_SEED, SUITES, run_suite

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _floats(text, what):
    try:
        return np.array([float(v) for v in str(text).replace(";", ",").split(",") if v.strip()])
    except ValueError:
        raise ValidationError(f"{what}: expected comma-separated numbers, got {text!r}", what) from None


def _tolerances(items):
    out = {}
    for item in items or ():
        name, sep, val = item.partition("=")
        if not sep:
            raise ValidationError(f"--tol expects NAME=VALUE, got {item!r}", "tolerances")
        if name not in DEFAULT_TOLERANCES:
            raise ValidationError(f"unknown tolerance {name!r}", "tolerances")
        try:
            out[name] = float(val)
        except ValueError:
            raise ValidationError(f"--tol {name}: {val!r} is not a number", "tolerances") from None
    return out


def _point(scenario, text):
    x = _floats(text, "--at")
    if x.size != scenario.dimension:
        raise ValidationError(f"--at needs {scenario.dimension} coordinates, got {x.size}", "point")
    return x


def cmd_verify(args) -> int:
    scenario = load_scenario(args.scenario, args.seed)
    report = run_suite(scenario, args.suite, _tolerances(args.tol), args.seed)
    text = report.to_json()
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    print(report.summary())
    print(f"{scenario.name} [{args.suite}]: {'PASS' if report.passed else 'FAIL'} "
          f"({len(report.entries) - len(report.failures())}/{len(report.entries)})")
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_integrate(args) -> int:
    from ..kaluza.dynamics import geodesic_integrate

    scenario = load_scenario(args.scenario, args.seed)
    n = scenario.dimension
    start = _floats(args.start, "--start")
    if args.velocity is not None:
        x0, v0 = start, _floats(args.velocity, "--velocity")
    elif start.size == 2 * n:
        x0, v0 = start[:n], start[n:]
    else:
        raise ValidationError(f"--start needs {n} coordinates plus --velocity, or {2 * n} numbers", "start")
    if x0.size != n or v0.size != n:
        raise ValidationError(f"position and velocity need {n} components each", "start")
    if not args.step > 0 or not args.tend > 0:
        raise ValidationError("--tend and --step must be positive", "step")
    killing = {f"K{i}": k for i, k in enumerate(scenario.killing)}
    traj = geodesic_integrate(scenario.metric, x0, v0, args.tend, args.step, killing, scenario.manifold)
    traj.to_csv(args.out, scenario.coordinates)
    drifts = {k: traj.drift(k) for k in traj.conserved}
    print(json.dumps({"rows": len(traj.times), "out": args.out, "drift": drifts}, indent=2))
    return EXIT_OK


def cmd_spectrum(args) -> int:
    from ..kaluza.fiberspec import fiber_spectrum

    scenario = load_scenario(args.scenario, args.seed)
    if scenario.bundle is None:
        raise ValidationError(f"{scenario.name} has no fiber bundle", "bundle")
    x = _point(scenario, args.at)
    data = fiber_spectrum(scenario.bundle, scenario.metric, x, args.fiber, args.resolution)
    k = min(args.levels, len(data.eigenvalues))
    out = {
        "fiber": data.fiber,
        "eigenvalues": [float(v) for v in data.eigenvalues[:k]],
        "multiplicities": [int(m) for m in data.multiplicities[:k]],
        "discretization": data.discretization,
    }
    if data.length is not None:
        out["length"] = data.length
    if data.radius is not None:
        out["radius"] = data.radius
    print(json.dumps(out, indent=2))
    return EXIT_OK


def cmd_average(args) -> int:
    from ..kaluza.potential import average_metric

    scenario = load_scenario(args.scenario, args.seed)
    if scenario.bundle is None:
        raise ValidationError(f"{scenario.name} has no fiber bundle", "bundle")
    x = _point(scenario, args.at)
    avg = average_metric(scenario.bundle, scenario.metric, x, args.nodes)
    print(json.dumps({
        "averaged_metric": avg.value.tolist(),
        "fiber_length": avg.fiber_length,
        "closure_error": avg.closure_error,
        "norm_residual": avg.norm_residual,
        "killing_residual": avg.killing_residual,
    }, indent=2))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mfb", description="Multi-fiber bundle geometry checks.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", help="run identity suites on a scenario")
    p.add_argument("scenario", help="built-in name (e.g. flat_kk(B=1)) or JSON file")
    p.add_argument("--suite", default="all", choices=SUITES + ("all",))
    p.add_argument("--tol", action="append", metavar="NAME=VAL", help="override a tolerance (repeatable)")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--out", help="write the JSON report here")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("integrate", help="integrate a geodesic and export CSV")
    p.add_argument("scenario")
    p.add_argument("--start", required=True, help="x1,...,xn (with --velocity) or x1,...,xn,v1,...,vn")
    p.add_argument("--velocity", help="v1,...,vn")
    p.add_argument("--tend", type=float, required=True)
    p.add_argument("--step", type=float, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.set_defaults(func=cmd_integrate)

    p = sub.add_parser("spectrum", help="Laplacian spectrum of a fiber")
    p.add_argument("scenario")
    p.add_argument("--fiber", choices=("s1", "s3"), required=True)
    p.add_argument("--at", required=True, help="comma-separated coordinates")
    p.add_argument("--resolution", type=int, default=256)
    p.add_argument("--levels", type=int, default=8, help="number of distinct levels to print")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("average", help="fiber-averaged metric at a point")
    p.add_argument("scenario")
    p.add_argument("--at", required=True)
    p.add_argument("--nodes", type=int, default=128)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.set_defaults(func=cmd_average)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ParseError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except GeometryError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except ValueError as exc:  # request that does not fit the scenario
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
