"""Acceptance criteria, one test per criterion, each logging a PASS/FAIL line.

Run alone with ``pytest -m acceptance -s`` to see the lines inline; they are
also collected into a summary section at the end of any pytest run.
"""

import json
import math
import random
import re
import subprocess
import sys
import time

import numpy as np
import pytest

import oracles
from phifix.counterexample import (
    condensing_violation_certificate,
    fixed_point_gap,
    picard_orbit,
    shift_alpha_estimate,
    SimplexPoint,
    verify_isometry,
)
from phifix.exprparse import ParseError, evaluate, parse
from phifix.gridfn import SeqVec
from phifix.hammerstein import BallRadiusError, ProblemSpec, compute_K, estimate_alpha, find_R, residual, solve
from phifix.mnc import BasisRay, SetDescriptor, check_properties, kuratowski
from phifix.phi_ops import Matrix, Multiplication, check_phi_space_premises
from phifix.specfile import build_problem, load

pytestmark = pytest.mark.acceptance


def manufactured_spec(specs_dir):
    return build_problem(load(specs_dir / "manufactured.json"))


def test_criterion_1_manufactured_solve(acceptance_log, specs_dir):
    C_dense = oracles.manufactured_constant(4096)
    C_quad = oracles.manufactured_constant_quad()
    spec = manufactured_spec(specs_dir)
    start = time.perf_counter()
    rep = solve(spec)
    elapsed = time.perf_counter() - start
    err = float(np.abs(rep.y.values[:, 0] - np.cos(spec.nodes)).max())
    K = compute_K(spec)
    ok = (
        abs(C_dense - oracles.FROZEN_MANUFACTURED_C) <= 1e-15
        and abs(C_dense - C_quad) <= 1e-14
        and spec.n_intervals == 64 and spec.damping == 1.0 and spec.tol == 1e-10
        and rep.converged
        and rep.certificate == "contraction"
        and rep.q <= K / 2 + 1e-9 and rep.q < 0.35
        and err < 1e-3
        and elapsed < 1.0
    )
    acceptance_log(1, ok, f"converged={rep.converged} certificate={rep.certificate} q={rep.q:.6f} "
                          f"K/2={K / 2:.6f} max|y-y*|={err:.2e} runtime={elapsed:.3f}s")
    assert ok


def test_criterion_2_linear_fixed_point(acceptance_log):
    spec = ProblemSpec(dim=1, n_intervals=16, kernel="1", f="y/2", h="1", omega="1 + u/2", tol=1e-12)
    rep = solve(spec)
    dev = float(np.abs(rep.y.values - 2.0).max())
    res = residual(spec, rep.y)
    ok = rep.converged and res < 1e-12 and rep.iterations <= 45 and dev < 1e-11
    acceptance_log(2, ok, f"max|y-2|={dev:.2e} residual={res:.2e} iterations={rep.iterations}")
    assert ok


def test_criterion_3_K_accuracy(acceptance_log):
    errs = []
    for n in (1, 2, 7, 16, 100, 1001):
        s = ProblemSpec(dim=1, n_intervals=n, kernel="t*s", f="y", h="0", omega="1", quadrature="trapezoid")
        errs.append(abs(compute_K(s) - 0.5))
    s = ProblemSpec(dim=1, n_intervals=64, kernel="exp(-(t+s))", f="y", h="0", omega="1", quadrature="simpson")
    err_exp = abs(compute_K(s) - (1 - math.exp(-1)))
    ok = max(errs) <= 1e-12 and err_exp <= 1e-4
    acceptance_log(3, ok, f"t*s trapezoid max|K-0.5|={max(errs):.2e}; exp simpson |K-(1-1/e)|={err_exp:.2e}")
    assert ok


def test_criterion_4_R_finder(acceptance_log):
    s = ProblemSpec(dim=1, n_intervals=16, kernel="1/2", f="y", h="1", omega="1 + u/2")
    R = find_R(s)
    try:
        find_R(ProblemSpec(dim=1, n_intervals=16, kernel="1", f="y^2", h="1", omega="u^2"))
        failure = None
    except BallRadiusError as exc:
        failure = str(exc)
    ok = 2.0 <= R <= 2.0 + 1e-6 and failure is not None and "||h|| + K*Omega(R) <= R" in failure
    acceptance_log(4, ok, f"R={R!r}; u^2 -> {'explicit failure' if failure else 'no failure'}")
    assert ok


def test_criterion_5_condensing_estimator(acceptance_log, specs_dir):
    spec = manufactured_spec(specs_dir)
    K = compute_K(spec)
    alpha = estimate_alpha(spec, n_samples=500)
    shift_alpha = shift_alpha_estimate(seed=0, n_pairs=200)
    ok = alpha < 1 and alpha <= K / 2 + 1e-9 and shift_alpha >= 1 - 1e-12
    acceptance_log(5, ok, f"alpha_hat={alpha:.9f} K/2={K / 2:.9f}; shift alpha_hat={shift_alpha!r}")
    assert ok


def test_criterion_6_counterexample(acceptance_log):
    start = time.perf_counter()
    iso = verify_isometry(seed=0, n_pairs=1000)
    orbit = picard_orbit(SimplexPoint.vertex(1), 100)
    gaps = all(fixed_point_gap("uniform", n) == 2 / n for n in range(1, 2 ** 10 + 1))
    cert = condensing_violation_certificate(seed=0)
    elapsed = time.perf_counter() - start
    ok = (iso.ok and orbit == [2.0] * 100 and gaps
          and cert.chi_phi_C == cert.chi_phi_TC == 2.0 and elapsed < 1.0)
    acceptance_log(6, ok, f"isometry violations={len(iso.violations)} orbit all 2: {orbit == [2.0] * 100} "
                          f"gaps exact: {gaps} chi_phi(C)={cert.chi_phi_C} chi_phi(TC)={cert.chi_phi_TC} "
                          f"runtime={elapsed:.3f}s")
    assert ok


def test_criterion_7_mnc_axioms(acceptance_log):
    # covering oracle first: 20 truncated instances must bracket the algebra's value
    rng = np.random.default_rng(2024)
    agree = 0
    for i in range(20):
        text, fn, L = oracles.TAILS[i % len(oracles.TAILS)]
        center = {int(k): float(rng.normal()) for k in rng.integers(1, 30, size=int(rng.integers(0, 3)))}
        radius = float(rng.uniform(0.1, 3.0))
        k0 = int(rng.integers(1, 50))
        value = kuratowski(SetDescriptor((BasisRay(SeqVec(center), radius, k0, text, L if text else None),)))
        lower, upper, tol = oracles.covering_bracket(center, radius, k0, fn, L)
        agree += lower - tol - 1e-12 <= value <= upper + tol + 1e-12
    rep = check_properties(generator_seed=0, n_cases=500)
    ok = agree == 20 and rep.ok and rep.n_cases == 500
    acceptance_log(7, ok, f"covering oracle agreements={agree}/20; {rep.n_cases} cases, "
                          f"{rep.checks_run} checks, {len(rep.violations)} violations")
    assert ok


def test_criterion_8_phi_premises(acceptance_log):
    mult = check_phi_space_premises(Multiplication("0.5+0.5*t"))
    ident = check_phi_space_premises(Matrix(np.eye(2)))
    ok = (mult.verdict == "premises-hold" and abs(mult.inverse_bound_c - 2.0) <= 1e-12
          and ident.verdict == "premises-fail(in span{I})")
    acceptance_log(8, ok, f"multiplication: {mult.verdict} c={mult.inverse_bound_c!r}; identity: {ident.verdict}")
    assert ok


def test_criterion_9_parser(acceptance_log):
    corpus = oracles.RATIONAL_CORPUS + oracles.TRANSCENDENTAL_CORPUS
    rational = max(oracles.ulp_distance(evaluate(parse(t), {}), v) for t, v in oracles.RATIONAL_CORPUS)
    transcendental = max(oracles.ulp_distance(evaluate(parse(t), {}), v) for t, v in oracles.TRANSCENDENTAL_CORPUS)
    rng = random.Random(1234)
    outcomes = {"ParseError": 0, "accepted": 0, "crash": 0}
    for _ in range(1000):
        try:
            parse(oracles.malformed(rng))
            outcomes["accepted"] += 1
        except ParseError:
            outcomes["ParseError"] += 1
        except Exception:
            outcomes["crash"] += 1
    ok = len(corpus) == 20 and rational == 0 and transcendental <= 2 and outcomes["ParseError"] == 1000
    acceptance_log(9, ok, f"{len(corpus)} expressions: rational {rational:g} ulp, transcendental "
                          f"{transcendental:g} ulp; fuzz {outcomes}")
    assert ok


def test_criterion_10_determinism(acceptance_log, specs_dir, tmp_path):
    outputs = []
    for run in ("a", "b"):
        proc = subprocess.run(
            [sys.executable, "-m", "phifix", "solve", str(specs_dir / "manufactured.json"), "--out", str(tmp_path / run)],
            capture_output=True,
        )
        assert proc.returncode == 0, proc.stderr
        outputs.append((tmp_path / run / "solve_report.json").read_bytes())
    strip = lambda b: re.sub(rb'\n\s*"timestamp": "[^"]*",?', b"", b)  # noqa: E731
    a, b = (strip(o) for o in outputs)
    hashes = [json.loads(o)["report_sha256"] for o in outputs]
    ok = a == b and hashes[0] == hashes[1] and b"timestamp" not in a
    acceptance_log(10, ok, f"reports byte-identical without timestamp: {a == b}; report_sha256 {hashes[0][:16]}...")
    assert ok
