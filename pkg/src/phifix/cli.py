"""``phifix`` command line: verify, solve, mnc, counterexample.

Exit codes: 0 success, 1 failed hypothesis / no convergence / failed
assertion, 2 input error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import platform
import sys
import tempfile
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .counterexample import (
    SimplexPoint,
    condensing_violation_certificate,
    fixed_point_gap,
    picard_orbit,
    verify_isometry,
)
from .exprparse import evaluate, to_string
from .hammerstein import (
    BallRadiusError,
    EvaluationError,
    check_asymptotic,
    check_growth,
    check_omega,
    compute_K,
    find_R,
    norm_h,
    solve,
)
from .mnc import atom_diameter, check_properties, chi_phi, describe, kuratowski
from .phi_ops import check_phi_space_premises, operator_norm
from .specfile import SpecInputError, build_mnc, build_problem, effective_seed, exact_solution, load

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2
DEFAULT_OUT = "phifix-out"


# -- output helpers ---------------------------------------------------------

def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _canonical(report: dict) -> bytes:
    return json.dumps(report, sort_keys=True, separators=(",", ":"), allow_nan=False).encode()


def finalize_report(report: dict) -> dict:
    """Add versions, a timestamp and a content hash that ignores the timestamp."""
    report = _jsonable(report)
    report["versions"] = {
        "phifix": __version__,
        "numpy": np.__version__,
        "python": platform.python_version(),
    }
    report["report_sha256"] = hashlib.sha256(_canonical(report)).hexdigest()
    report["timestamp"] = datetime.now(timezone.utc).isoformat(timespec="seconds")
    return report


def write_atomic(path: Path, data: bytes):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_report(out_dir: Path, name: str, report: dict) -> Path:
    path = out_dir / name
    write_atomic(path, (json.dumps(finalize_report(report), indent=2, sort_keys=True) + "\n").encode())
    return path


def solution_csv(y) -> bytes:
    header = ",".join(["t"] + [f"y{j + 1}" for j in range(y.dim)])
    lines = [header]
    for t, row in zip(y.nodes, y.values):
        lines.append(",".join(f"{v:.17g}" for v in (t, *row)))
    return ("\n".join(lines) + "\n").encode()


def _out_dir(args, loaded=None) -> Path:
    if getattr(args, "out", None):
        return Path(args.out)
    if loaded is not None:
        return Path(loaded.data.get("output", {}).get("dir", DEFAULT_OUT))
    return Path(DEFAULT_OUT)


def _output_name(loaded, key, default):
    return loaded.data.get("output", {}).get(key, default)


# -- verify / solve ---------------------------------------------------------

def run_verification(spec) -> tuple:
    """All hypothesis checks; returns (report dict, all_hold, R or None)."""
    premises = check_phi_space_premises(spec.phi, sample_count=64, seed=spec.seed)
    K = compute_K(spec)
    asym = check_asymptotic(spec, K)
    report = {
        "phi_premises": premises.to_dict(),
        "K": K,
        "norm_h": norm_h(spec),
        "asymptotic": asym.to_dict(),
    }
    warnings = []
    verdicts = {"phi_invertible": premises.kernel_trivial_on_samples and premises.inverse_bound_c is not None}
    if not premises.not_in_span_of_identity:
        warnings.append(
            "phi is a multiple of the identity, so the phi-space premises fail; "
            "only the contraction certificate (q < 1) can justify the solution"
        )
    verdicts["asymptotic"] = asym.holds or spec.R_override is not None
    R = None
    try:
        R = find_R(spec, K)
        report["R"] = R
        report["R_error"] = None
        verdicts["ball_radius"] = True
    except BallRadiusError as exc:
        report["R"] = None
        report["R_error"] = str(exc)
        verdicts["ball_radius"] = False
    if R is not None:
        growth = check_growth(spec, R=R)
        omega = check_omega(spec, R)
        report["growth"] = growth.to_dict()
        report["omega"] = omega.to_dict()
        verdicts["growth"] = growth.holds
        verdicts["omega"] = omega.holds
    else:
        report["growth"] = None
        report["omega"] = None
        verdicts["growth"] = False
        verdicts["omega"] = False
    report["verdicts"] = verdicts
    report["warnings"] = warnings
    all_hold = all(verdicts.values())
    report["all_hold"] = all_hold
    return report, all_hold, R


def _header(command, loaded, spec=None):
    h = {"tool": "phifix", "command": command, "input_sha256": loaded.sha256}
    if spec is not None:
        h["seed"] = spec.seed
        h["problem"] = {"dim": spec.dim, "grid": spec.n_intervals, "quadrature": spec.quadrature,
                        "vector_norm": spec.vector_norm}
    return h


def _print_verification(rep):
    print(f"K = {rep['K']!r}")
    print(f"||h|| = {rep['norm_h']!r}")
    if rep["R"] is not None:
        print(f"R = {rep['R']!r}")
    else:
        print(f"R: {rep['R_error']}")
    for name, ok in rep["verdicts"].items():
        print(f"  {name:<15} {'ok' if ok else 'FAILED'}")
    for w in rep["warnings"]:
        print(f"  warning: {w}")


def cmd_verify(args) -> int:
    loaded = load(args.spec)
    spec = build_problem(loaded)
    rep, ok, _ = run_verification(spec)
    report = {**_header("verify", loaded, spec), "verification": rep}
    path = write_report(_out_dir(args, loaded), _output_name(loaded, "report", "verify_report.json"), report)
    _print_verification(rep)
    print(f"report: {path}")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_solve(args) -> int:
    loaded = load(args.spec)
    spec = build_problem(loaded)
    exact = exact_solution(loaded, spec.dim)
    out = _out_dir(args, loaded)
    report_name = _output_name(loaded, "report", "solve_report.json")
    report = _header("solve", loaded, spec)
    report["forced"] = bool(args.force)

    if args.force:
        report["verification"] = None
        result = solve(spec, force=True)
    else:
        rep, ok, R = run_verification(spec)
        report["verification"] = rep
        _print_verification(rep)
        if not ok:
            report["solve"] = None
            path = write_report(out, report_name, report)
            print("hypotheses not verified; not solving (use --force to solve anyway)")
            print(f"report: {path}")
            return EXIT_FAIL
        result = solve(spec, K=rep["K"], R=R)

    report["solve"] = result.to_dict()
    if exact is not None:
        ystar = np.stack(
            [np.broadcast_to(evaluate(e, {"t": result.y.nodes}), result.y.nodes.shape) for e in exact], axis=1
        )
        report["solve"]["exact"] = [to_string(e) for e in exact]
        report["solve"]["max_abs_error"] = float(np.abs(result.y.values - ystar).max())
    if result.converged:
        csv_name = _output_name(loaded, "csv", "solution.csv")
        write_atomic(out / csv_name, solution_csv(result.y))
        report["solve"]["csv"] = csv_name
    path = write_report(out, report_name, report)
    print(f"certificate: {result.certificate}  q = {result.q!r}  alpha_hat = {result.alpha_hat!r}")
    state = "converged" if result.converged else "did not converge"
    print(f"{state} after {result.iterations} iteration(s), residual {result.final_residual:.3e}")
    if "max_abs_error" in report["solve"]:
        print(f"max |y - exact| = {report['solve']['max_abs_error']:.3e}")
    if result.message:
        print(result.message)
    print(f"report: {path}")
    return EXIT_OK if result.converged else EXIT_FAIL


# -- mnc --------------------------------------------------------------------

def cmd_mnc(args) -> int:
    if args.spec is None and args.suite is None:
        raise SpecInputError("mnc needs a spec file with an 'mnc' block, or --suite N")
    report = {"tool": "phifix", "command": "mnc"}
    ok = True
    loaded = None
    if args.spec is not None:
        loaded = load(args.spec)
        report["input_sha256"] = loaded.sha256
        phi, sets = build_mnc(loaded)
        rows = []
        for name, c in sets:
            chi = kuratowski(c)
            row = {"name": name, "descriptor": describe(c), "chi": chi,
                   "atom_diameters": [atom_diameter(a) for a in c.atoms]}
            if phi is not None:
                norm = operator_norm(phi)
                cp = chi_phi(c, phi)
                bound_ok = cp <= norm * chi * (1 + 1e-12)
                row.update({"chi_phi": cp, "phi_norm": norm, "bound_holds": bound_ok})
                ok = ok and bound_ok
            rows.append(row)
            extra = f"  chi_phi = {row['chi_phi']!r}" if phi is not None else ""
            print(f"{name}: chi = {chi!r}{extra}")
        report["phi"] = None if phi is None else type(phi).__name__
        report["sets"] = rows
    if args.suite is not None:
        if args.suite < 1:
            raise SpecInputError("--suite needs a positive number of cases")
        seed = args.seed if args.seed is not None else effective_seed(0)
        prop = check_properties(seed, args.suite)
        report["suite"] = {"seed": seed, **prop.to_dict()}
        ok = ok and prop.ok
        print(f"property suite: {prop.n_cases} cases, {prop.checks_run} checks, "
              f"{len(prop.violations)} violation(s)")
        for v in prop.violations[:20]:
            print(f"  {v}")
    report["ok"] = ok
    path = write_report(_out_dir(args, loaded), "mnc_report.json", report)
    print(f"report: {path}")
    return EXIT_OK if ok else EXIT_FAIL


# -- counterexample ---------------------------------------------------------

def cmd_counterexample(args) -> int:
    seed = args.seed if args.seed is not None else effective_seed(0)
    if args.steps < 1:
        raise SpecInputError("--steps must be >= 1")
    iso = verify_isometry(seed, 1000)
    table = []
    for j in range(11):
        n = 2 ** j
        table.append({
            "n": n,
            "vertex": fixed_point_gap("vertex", n),
            "uniform": fixed_point_gap("uniform", n),
            "uniform_expected": 2 / n,
        })
    gaps_ok = all(r["vertex"] == 2.0 and r["uniform"] == r["uniform_expected"] for r in table)
    orbit = picard_orbit(SimplexPoint.vertex(1), args.steps)
    orbit_ok = all(r == 2.0 for r in orbit)
    cert = condensing_violation_certificate(seed)
    checks = {"isometry": iso.ok, "gap_table": gaps_ok, "orbit": orbit_ok, "certificate": cert.ok}
    report = {
        "tool": "phifix",
        "command": "counterexample",
        "seed": seed,
        "steps": args.steps,
        "isometry": iso.to_dict(),
        "gap_table": table,
        "orbit_residuals": orbit,
        "certificate": cert.to_dict(),
        "checks": checks,
        "ok": all(checks.values()),
    }
    path = write_report(_out_dir(args), "counterexample_report.json", report)
    print(f"isometry over {iso.n_pairs} pairs: {len(iso.violations)} violation(s)")
    print("fixed-point gaps ||Tx - x||:")
    for r in table:
        print(f"  n = {r['n']:>5}  vertex {r['vertex']!r}  uniform {r['uniform']!r}")
    print(f"orbit from e_1: {len(orbit)} residuals, all exactly 2: {orbit_ok}")
    print(f"chi_phi(C) = {cert.chi_phi_C!r}, chi_phi(TC) = {cert.chi_phi_TC!r}, "
          f"alpha_hat = {cert.alpha_hat!r} over {cert.alpha_pairs} pairs")
    for name, ok in checks.items():
        print(f"  {name:<12} {'ok' if ok else 'FAILED'}")
    print(f"report: {path}")
    return EXIT_OK if report["ok"] else EXIT_FAIL


# -- entry point ------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", metavar="DIR", default=argparse.SUPPRESS,
                        help=f"output directory (default: spec output.dir or ./{DEFAULT_OUT})")
    parser = argparse.ArgumentParser(prog="phifix", parents=[common],
                                     description="Hammerstein fixed-point verification and solving.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", parents=[common], help="check the existence hypotheses")
    p.add_argument("spec")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("solve", parents=[common], help="verify, then solve by fixed-point iteration")
    p.add_argument("spec")
    p.add_argument("--force", action="store_true", help="skip verification; certificate = none")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("mnc", parents=[common], help="measure of noncompactness on set descriptors")
    p.add_argument("spec", nargs="?")
    p.add_argument("--suite", type=int, metavar="N", help="run the property suite on N cases")
    p.add_argument("--seed", type=int, help="suite seed (default: $PHIFIX_SEED or 0)")
    p.set_defaults(func=cmd_mnc)

    p = sub.add_parser("counterexample", parents=[common], help="the shift on the l1 simplex")
    p.add_argument("--steps", type=int, default=100)
    p.add_argument("--seed", type=int, help="default: $PHIFIX_SEED or 0")
    p.set_defaults(func=cmd_counterexample)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (SpecInputError, EvaluationError) as exc:
        print(f"phifix: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
