"""Command-line front end.

Exit status: 0 when every check in the selected suite passed, 1 when a check
failed (the failing checks are printed to stderr as JSON), 2 for usage
errors, 3 for I/O failures and 4 for malformed POVM files.

Output goes to ``--output`` if given, else to ``$CLONING_LAB_OUTPUT_DIR/<command>.<format>``
if that variable is set, else to stdout.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from pathlib import Path

import numpy as np

from cloning_lab.cloner import (
    ClonerSpec,
    clone,
    cloner_fidelity,
    cloner_fidelity_asymptotic,
    cloner_shrinking_factor,
)
from cloning_lab.estimator import (
    PovmInfeasibleError,
    average_fidelity,
    build_covariant_povm,
    design_povm,
    estimation_shrinking_factor,
    haar_frame,
    measure_prepare_channel_eta,
    pauli_frame,
    tetrahedral_frame,
    validate_povm,
)
from cloning_lab.qudit import fidelity_pure, haar_random_states
from cloning_lab.serialization import PovmSchemaError, dumps_povm, povm_load
from cloning_lab.symmetric import SymmetricState, reduce_single_particle
from cloning_lab.theorem import verify_theorem

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_SCHEMA = 4

OUTPUT_DIR_ENV = "CLONING_LAB_OUTPUT_DIR"
TABLE_COLUMNS = ("d", "N", "M", "F_clone", "eta_clone", "F_est_asymptotic")
CHECK_COLUMNS = ("suite", "name", "d", "N", "M", "L", "value", "tol", "passed")


def parse_range(text: str) -> list[int]:
    """Parse ``"2,3"``, ``"1..4"`` or combinations like ``"1..3,6"``."""
    values = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            if ".." in part:
                lo, hi = part.split("..")
                values.extend(range(int(lo), int(hi) + 1))
            else:
                values.append(int(part))
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad range {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError(f"empty range {text!r}")
    return sorted(set(values))


def _seed(text: str) -> int:
    val = int(text)
    if not 0 <= val < 2**64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return val


def _positive(text: str) -> int:
    val = int(text)
    if val < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return val


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".15g")
    return "" if x is None else str(x)


def to_csv(rows: list[dict], columns) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([fmt(row.get(c)) for c in columns])
    return buf.getvalue()


def to_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


# -- suites -----------------------------------------------------------------


def _check(suite, name, value, tol, passed, **params) -> dict:
    return {"suite": suite, "name": name, **params, "value": float(value), "tol": tol, "passed": bool(passed)}


def table_rows(ds, ns, ms) -> list[dict]:
    rows = []
    for d in ds:
        for n in ns:
            for m in ms:
                if m < n:
                    continue
                spec = ClonerSpec(d, n, m)
                rows.append(
                    {
                        "d": d,
                        "N": n,
                        "M": m,
                        "F_clone": cloner_fidelity(spec),
                        "eta_clone": cloner_shrinking_factor(spec),
                        "F_est_asymptotic": cloner_fidelity_asymptotic(d, n),
                    }
                )
    return rows


def cloner_checks(ds, ns, ms, seed: int, probes: int, tol: float) -> list[dict]:
    checks = []
    for d in ds:
        for n in ns:
            psis = haar_random_states(d, probes, np.random.SeedSequence(seed, spawn_key=(d, n)))
            for m in ms:
                if m < n:
                    continue
                target = cloner_fidelity(ClonerSpec(d, n, m))
                fids = np.array([fidelity_pure(p, reduce_single_particle(clone(SymmetricState.product(p, n), m))) for p in psis])
                dev = float(np.abs(fids - target).max())
                checks.append(_check("verify-cloner", "fidelity_vs_formula", dev, tol, dev <= tol, d=d, N=n, M=m))
    return checks


def estimation_checks(ds, ns, seed: int, samples: int, probes: int, tol: float) -> list[dict]:
    checks = []
    for d in ds:
        for n in ns:
            target = cloner_fidelity_asymptotic(d, n)
            povms = {"design": design_povm(d, n)}
            try:
                frame = haar_frame(d, n, np.random.SeedSequence(seed, spawn_key=(d, n, 0)))
                povms["haar"] = build_covariant_povm(d, n, frame)
            except PovmInfeasibleError as exc:
                checks.append(_check("verify-estimation", "haar_frame_feasible", exc.residual, tol, False, d=d, N=n))
            for kind, povm in povms.items():
                report = validate_povm(povm)
                tag = f"{kind}:"
                checks.append(_check("verify-estimation", tag + "completeness", report.completeness_residual, tol, report.passed, d=d, N=n))
                gap = abs(average_fidelity(povm).mean - target)
                checks.append(_check("verify-estimation", tag + "exact_fidelity_gap", gap, 1e-9, gap <= 1e-9, d=d, N=n))
                mc = average_fidelity(povm, "monte-carlo", samples, np.random.SeedSequence(seed, spawn_key=(d, n, 1)))
                z = abs(mc.mean - target) / max(mc.stderr, 1e-15)
                checks.append(_check("verify-estimation", tag + "monte_carlo_z", z, 3.0, abs(mc.mean - target) <= 3 * mc.stderr + 1e-12, d=d, N=n))
            psis = haar_random_states(d, probes, np.random.SeedSequence(seed, spawn_key=(d, n, 2)))
            shrink = measure_prepare_channel_eta(povms["design"], psis)
            gap = abs(shrink.eta_mean - estimation_shrinking_factor(d, n)) + shrink.eta_spread
            checks.append(_check("verify-estimation", "design:channel_eta_gap", gap, tol, gap <= tol, d=d, N=n))
    return checks


# -- command handlers -------------------------------------------------------


def _emit(args, text: str) -> None:
    if args.output:
        path = Path(args.output)
    elif os.environ.get(OUTPUT_DIR_ENV):
        path = Path(os.environ[OUTPUT_DIR_ENV]) / f"{args.command}.{args.format}"
    else:
        sys.stdout.write(text)
        return
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _finish(args, suite: str, checks: list[dict], extra: dict | None = None) -> int:
    passed = all(c["passed"] for c in checks)
    if args.format == "csv":
        text = to_csv(checks, CHECK_COLUMNS)
    else:
        text = to_json({"suite": suite, "seed": args.seed, "passed": passed, "checks": checks, **(extra or {})})
    _emit(args, text)
    if not passed:
        failures = [c for c in checks if not c["passed"]]
        sys.stderr.write(json.dumps({"failures": failures}, sort_keys=True) + "\n")
        return EXIT_FAILED
    return EXIT_OK


def cmd_table(args) -> int:
    rows = table_rows(args.d, args.n, args.m)
    _emit(args, to_csv(rows, TABLE_COLUMNS) if args.format == "csv" else to_json(rows))
    return EXIT_OK


def cmd_verify_cloner(args) -> int:
    return _finish(args, "verify-cloner", cloner_checks(args.d, args.n, args.m, args.seed, args.probes, args.tol))


def cmd_verify_estimation(args) -> int:
    checks = estimation_checks(args.d, args.n, args.seed, args.samples, args.probes, args.tol)
    return _finish(args, "verify-estimation", checks)


def cmd_verify_theorem(args) -> int:
    runs = []
    checks = []
    for d in args.d:
        for n in args.n:
            ls = [l for l in args.l if l >= n]
            if not ls:
                continue
            report = verify_theorem(d, n, ls, seed=args.seed, n_probes=args.probes)
            runs.append(report)
            checks.extend({"suite": "verify-theorem", **c} for c in report["checks"])
    if not runs:
        raise argparse.ArgumentTypeError("no L value is >= any N")
    return _finish(args, "verify-theorem", checks, {"runs": [{k: r[k] for k in ("d", "N", "L", "target_fidelity", "passed")} for r in runs]})


def cmd_povm_build(args) -> int:
    d, n = args.d[0], args.n[0]
    if args.frame == "design":
        povm = design_povm(d, n)
    else:
        if args.frame == "pauli":
            frame = pauli_frame()
        elif args.frame == "tetrahedral":
            frame = tetrahedral_frame()
        else:
            frame = haar_frame(d, n, args.seed, args.size)
        try:
            povm = build_covariant_povm(d, n, frame, tol=args.tol)
        except PovmInfeasibleError as exc:
            sys.stderr.write(json.dumps({"failures": [{"name": "completeness", "residual": exc.residual}]}) + "\n")
            return EXIT_FAILED
    args.format = "json"
    _emit(args, dumps_povm(povm))
    return EXIT_OK


def cmd_povm_validate(args) -> int:
    try:
        povm = povm_load(args.path)
    except PovmSchemaError as exc:
        sys.stderr.write(f"{args.path}: {exc}\n")
        return EXIT_SCHEMA
    report = validate_povm(povm, tol=args.tol)
    checks = [
        _check("povm-validate", "min_weight", report.min_weight, 0.0, report.min_weight >= 0.0),
        _check("povm-validate", "completeness_residual", report.completeness_residual, args.tol, report.completeness_residual <= args.tol),
        _check(
            "povm-validate",
            "weight_sum",
            report.weight_sum,
            args.tol,
            abs(report.weight_sum - report.expected_weight_sum) <= args.tol,
        ),
    ]
    extra = {"d": povm.d, "N": povm.n, "outcomes": len(povm), "moment_residual": report.moment_residual, "universal": report.universal}
    if args.format == "json":
        return _finish(args, "povm-validate", checks, extra)
    return _finish(args, "povm-validate", checks)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cloning-lab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, fmt_default="json"):
        p.add_argument("--seed", type=_seed, default=0)
        p.add_argument("--tol", type=float, default=1e-8, help="tolerance for exact checks")
        p.add_argument("--format", choices=("csv", "json"), default=fmt_default)
        p.add_argument("-o", "--output", help="output file (default: stdout or $%s)" % OUTPUT_DIR_ENV)

    p = sub.add_parser("table", help="closed-form cloning fidelity table")
    p.add_argument("--d", type=parse_range, required=True)
    p.add_argument("--n", type=parse_range, required=True)
    p.add_argument("--m", type=parse_range, required=True)
    common(p, "csv")
    p.set_defaults(func=cmd_table)

    p = sub.add_parser("verify-cloner", help="simulate the cloner against the closed form")
    p.add_argument("--d", type=parse_range, default=[2, 3])
    p.add_argument("--n", type=parse_range, default=[1, 2, 3])
    p.add_argument("--m", type=parse_range, default=list(range(1, 7)))
    p.add_argument("--probes", type=_positive, default=10)
    common(p)
    p.set_defaults(func=cmd_verify_cloner)

    p = sub.add_parser("verify-estimation", help="check constructed POVMs reach (N+1)/(N+d)")
    p.add_argument("--d", type=parse_range, default=[2, 3])
    p.add_argument("--n", type=parse_range, default=[1, 2, 3])
    p.add_argument("--samples", type=_positive, default=100_000)
    p.add_argument("--probes", type=_positive, default=10)
    common(p)
    p.set_defaults(func=cmd_verify_estimation)

    p = sub.add_parser("verify-theorem", help="both inequalities, multiplication law, symmetric inputs")
    p.add_argument("--d", type=parse_range, default=[2])
    p.add_argument("--n", type=parse_range, default=[1])
    p.add_argument("--l", type=parse_range, default=[1, 2, 3, 4])
    p.add_argument("--probes", type=_positive, default=5)
    common(p)
    p.set_defaults(func=cmd_verify_theorem)

    p = sub.add_parser("povm-build", help="construct a POVM and write it as JSON")
    p.add_argument("--d", type=parse_range, required=True)
    p.add_argument("--n", type=parse_range, required=True)
    p.add_argument("--frame", choices=("design", "pauli", "tetrahedral", "haar"), default="design")
    p.add_argument("--size", type=_positive, default=None, help="Haar frame size (default 4*D_sym**2)")
    common(p)
    p.set_defaults(func=cmd_povm_build)

    p = sub.add_parser("povm-validate", help="load a POVM file and check completeness")
    p.add_argument("path")
    common(p)
    p.set_defaults(func=cmd_povm_validate)
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (argparse.ArgumentTypeError, ValueError) as exc:
        sys.stderr.write(f"usage error: {exc}\n")
        return EXIT_USAGE
    except OSError as exc:
        sys.stderr.write(f"I/O error: {exc}\n")
        return EXIT_IO


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
