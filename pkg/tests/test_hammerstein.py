import math

import numpy as np
import pytest

from oracles import FROZEN_MANUFACTURED_C
from phifix.gridfn import GridFunction, sup_norm
from phifix.hammerstein import (
    BallRadiusError,
    EvaluationError,
    ProblemSpec,
    apply_T,
    check_asymptotic,
    check_growth,
    check_omega,
    compute_K,
    estimate_alpha,
    find_R,
    norm_h,
    residual,
    solve,
)
from phifix.phi_ops import Lifted


def spec(k="1", f="y/2", h="1", omega="1", n=16, **kw):
    return ProblemSpec(dim=kw.pop("dim", 1), n_intervals=n, kernel=k, f=f, h=h, omega=omega, **kw)


def manufactured(**kw):
    return spec("exp(-(t+s))", "sin(y)/2", f"cos(t) - {FROZEN_MANUFACTURED_C!r}*exp(-t)", "1", n=64,
                seed=7, **kw)


# -- K ----------------------------------------------------------------------

def test_K_examples():
    assert compute_K(spec("t*s", quadrature="trapezoid")) == pytest.approx(0.5, abs=1e-12)
    assert compute_K(spec("1")) == 1.0
    assert abs(compute_K(spec("exp(-(t+s))", n=64)) - (1 - math.exp(-1))) < 1e-4


def test_K_table_kernel():
    n = 8
    t = np.arange(n + 1) / n
    s = spec(np.outer(t, t), "y", "0", n=n, quadrature="trapezoid")
    assert compute_K(s) == pytest.approx(0.5, abs=1e-12)
    with pytest.raises(ValueError):
        spec(np.outer(t, t), n=n)  # simpson with a table


# -- growth, asymptotic, omega ----------------------------------------------

def test_growth_examples():
    assert check_growth(spec(f="sin(y)/2", omega="1"), R=3.0).holds
    rep = check_growth(spec(f="y", omega="u"), R=3.0)
    assert rep.holds and rep.max_violation == 0.0
    rep = check_growth(spec(f="2*y", omega="u"), R=3.0)
    assert not rep.holds
    assert rep.max_violation == pytest.approx(rep.worst_x_norm) and rep.worst_x_norm == pytest.approx(6.0)


def test_asymptotic_examples():
    rep = check_asymptotic(spec("1/2", omega="1+u/2"))
    assert rep.holds and rep.values[-1] == pytest.approx(0.25, rel=1e-6)
    rep = check_asymptotic(spec("1", omega="u"))
    assert rep.holds and all(v == 1.0 for v in rep.values)
    rep = check_asymptotic(spec("1", omega="u^2"))
    assert not rep.holds and "R_override" in rep.note


def test_omega_check():
    assert check_omega(spec(omega="1+u"), 2.0).holds
    assert not check_omega(spec(omega="2-u"), 2.0).holds
    assert not check_omega(spec(omega="u-1"), 2.0).holds


# -- R ----------------------------------------------------------------------

def test_find_R_examples():
    R = find_R(spec("1/2", h="1", omega="1+u/2"))
    assert 2.0 <= R <= 2.0 + 1e-6
    R = find_R(spec("1", h="1", omega="3"))
    assert R == pytest.approx(4.0, rel=1e-8) and 1 + 3 <= R
    R = find_R(spec("1/2", h="0", omega="1"))
    assert R == pytest.approx(0.5, rel=1e-8) and R >= 0.5


def test_find_R_failure_and_override():
    with pytest.raises(BallRadiusError, match=r"\|\|h\|\| \+ K\*Omega\(R\) <= R"):
        find_R(spec("1", h="1", omega="u^2"))
    assert find_R(spec("1/4", h="1/4", omega="u^2", R_override=1.0)) == 1.0
    with pytest.raises(BallRadiusError):
        find_R(spec("1", h="1", omega="u^2", R_override=1.0))


# -- T and residual ---------------------------------------------------------

def test_apply_T_examples():
    x = GridFunction.from_callable(np.sin, 16)
    z = spec("0", h="cos(t)")
    assert apply_T(z, x) == z.h_grid
    lin = spec()
    two = GridFunction.constant(2.0, 16)
    assert apply_T(lin, two) == two
    zero = GridFunction.constant(0.0, 16)
    s = spec("exp(t-s)", "sin(y)", "t^2")
    assert apply_T(s, zero) == s.h_grid


def test_residual_examples():
    assert residual(spec(), GridFunction.constant(2.0, 16)) < 1e-12
    z = spec("0", h="cos(t)")
    assert residual(z, z.h_grid) == 0.0
    assert residual(spec("0", h="1"), GridFunction.constant(0.0, 16)) == 1.0


def test_evaluation_error_location():
    with pytest.raises(EvaluationError) as info:
        spec("1/(t-s)").kernel_matrix
    assert info.value.index == (0, 0)
    s = spec(f="ln(y)", h="0")
    with pytest.raises(EvaluationError):
        apply_T(s, s.h_grid)


# -- alpha ------------------------------------------------------------------

def test_alpha_zero_kernel():
    assert estimate_alpha(spec("0", omega="1+u"), R=1.0, n_samples=50) == 0.0


def test_alpha_manufactured():
    s = manufactured()
    K = compute_K(s)
    a = estimate_alpha(s)
    assert a < 1 and a <= K / 2 + 1e-9


@pytest.mark.parametrize("a", [0.1, 0.3, 0.45])
def test_alpha_within_lipschitz_bound(a):
    # f = a*sin(y) is a-Lipschitz, so the integral term is (a*K)-Lipschitz in sup norm
    s = spec("exp(-(t+s))", f"{a}*sin(y)", "cos(t)", "1", n=32, alpha_samples=300, seed=3)
    alpha = estimate_alpha(s)
    bound = a * compute_K(s)
    assert alpha <= bound + 1e-9
    assert alpha >= 0.5 * bound  # the estimator is not trivially small


def test_alpha_linear_is_sharp():
    s = spec("1", "y/2", "1", "1+u/2", alpha_samples=300)
    assert estimate_alpha(s) == pytest.approx(0.5, abs=1e-9)


def test_alpha_system_with_phi():
    s = ProblemSpec(dim=2, n_intervals=16, kernel="t*s", f=["sin(y1)/2", "y2/3"], h=["1", "t"],
                    omega="1", phi=Lifted(np.diag([2.0, 1.0])), alpha_samples=200)
    alpha = estimate_alpha(s)
    assert 0 < alpha < 1


# -- solve ------------------------------------------------------------------

def test_solve_zero_kernel():
    z = spec("0", h="sin(3*t)", omega="1+u")
    rep = solve(z)
    assert rep.converged and rep.iterations == 1 and rep.final_residual == 0.0
    assert rep.y == z.h_grid


def test_solve_linear():
    s = spec("1", "y/2", "1", "1+u/2", tol=1e-12)
    rep = solve(s)
    assert rep.converged and rep.certificate == "contraction"
    np.testing.assert_allclose(rep.y.values, 2.0, rtol=0, atol=1e-11)
    assert rep.iterations <= math.ceil(math.log(1e-12) / math.log(0.5)) + 5
    assert residual(s, rep.y) < 1e-12


def test_solve_manufactured():
    s = manufactured()
    rep = solve(s)
    assert rep.converged and rep.certificate == "contraction" and rep.q < 0.35
    err = np.abs(rep.y.values[:, 0] - np.cos(s.nodes)).max()
    assert err < 1e-3


def test_residuals_contract_by_q():
    rep = solve(manufactured())
    hist = rep.residual_history
    for a, b in zip(hist, hist[1:]):
        assert b <= rep.q * a + 1e-12
    assert all(r <= bound * (1 + 1e-12) for r, bound in zip(hist, rep.apriori_bounds))


def test_solve_deterministic():
    a, b = solve(manufactured()), solve(manufactured())
    assert a.to_dict() == b.to_dict()
    assert a.y == b.y


def test_force_skips_certificate():
    rep = solve(spec("1", "y^2/8", "1", "u^2", tol=1e-12), force=True)
    assert rep.certificate == "none" and rep.R is None and rep.alpha_hat is None
    assert rep.converged  # 1 + c^2/8 = c has the attracting root c = 4 - sqrt(8)
    np.testing.assert_allclose(rep.y.values, 4 - math.sqrt(8), atol=1e-11)


def test_damping():
    s = spec("1", "y/2", "1", "1+u/2", damping=0.5, tol=1e-10)
    rep = solve(s)
    assert rep.converged and rep.apriori_bounds == []
    np.testing.assert_allclose(rep.y.values, 2.0, atol=1e-9)


def test_divergence_reported():
    rep = solve(spec("1", "exp(y)", "10", "1"), force=True)
    assert not rep.converged and rep.message


def test_validation():
    with pytest.raises(ValueError):
        spec(tol=0)
    with pytest.raises(ValueError):
        spec(damping=1.5)
    with pytest.raises(ValueError):
        spec(n=15)  # simpson needs an even grid
    with pytest.raises(ValueError):
        spec(dim=2, f=["y1", "y2"], h=["1", "1"], phi=Lifted(np.eye(3)))


# -- invariants -------------------------------------------------------------

def test_ball_invariance():
    s = manufactured()
    R = find_R(s)
    rng = np.random.default_rng(11)
    for _ in range(100):
        v = rng.uniform(-1, 1, s.n_intervals + 1)
        x = GridFunction(s.n_intervals, v * R * rng.random() / np.abs(v).max())
        assert sup_norm(apply_T(s, x)) <= R + 1e-9


def test_affine_in_h():
    base = spec("exp(t*s)", "sin(y) + s", "cos(t)", n=32)
    moved = spec("exp(t*s)", "sin(y) + s", "cos(t) + t^2", n=32)
    delta = moved.h_grid - base.h_grid
    x = GridFunction.from_callable(lambda t: 1 - t, 32)
    np.testing.assert_allclose((apply_T(moved, x) - apply_T(base, x)).values, delta.values, rtol=0, atol=1e-15)


def test_norm_h():
    assert norm_h(spec(h="1 - 2*t")) == 1.0
