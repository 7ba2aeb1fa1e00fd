"""Nystrom discretisation and fixed-point solution of

    y(t) = h(t) + int_0^1 k(t, s) f(s, y(s)) ds,   t in [0, 1],

with y taking values in R^d, together with sampled checks of the growth,
ball and condensing hypotheses that guarantee a solution in the ball
||y|| <= R.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional, Sequence

import numpy as np

from .exprparse import EXPR_TYPES, DomainError, evaluate, parse
from .gridfn import GridFunction, grid_nodes, quadrature_rule, row_norms, sup_norm
from .phi_ops import Lifted, inverse_bound_c, operator_norm

DENOMINATOR_GUARD = 1e-10
ALPHA_CAP = 1e6
MAX_REDRAWS = 10
ASYMPTOTIC_PROBES = (1e2, 1e4, 1e6, 1e8)
R_SCAN_POINTS = 512


class EvaluationError(ValueError):
    def __init__(self, message: str, where: str, index=None):
        self.where = where
        self.index = index
        super().__init__(f"{where}: {message}")


class BallRadiusError(ValueError):
    """No R > 0 satisfies ||h|| + K * Omega(R) <= R."""


def _parse_vector(exprs, dim: int, allowed, what: str) -> tuple:
    if isinstance(exprs, (str, EXPR_TYPES)):
        exprs = [exprs]
    exprs = list(exprs)
    if len(exprs) != dim:
        raise ValueError(f"{what} needs {dim} component(s), got {len(exprs)}")
    return tuple(parse(e, allowed) if isinstance(e, str) else e for e in exprs)


def state_vars(dim: int) -> tuple:
    names = tuple(f"y{i + 1}" for i in range(dim))
    return ("y",) + names if dim == 1 else names


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    """A discretised Hammerstein problem.

    ``kernel`` is an expression in (t, s) or an (N+1) x (N+1) table of values
    k(t_i, s_j); ``f`` has d components in (s, y1..yd) (plain ``y`` is also
    accepted when d = 1); ``h`` has d components in t; ``omega`` is in u.
    """

    dim: int
    n_intervals: int
    kernel: object
    f: Sequence
    h: Sequence
    omega: object
    phi: Optional[Lifted] = None
    quadrature: str = "simpson"
    vector_norm: str = "max"
    tol: float = 1e-10
    max_iter: int = 1000
    damping: float = 1.0
    alpha_samples: int = 500
    growth_samples: int = 1000
    seed: int = 0
    R_override: Optional[float] = None

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 1:
            raise ValueError(f"dim must be a positive integer, got {self.dim!r}")
        if not self.tol > 0:
            raise ValueError(f"tol must be positive, got {self.tol!r}")
        if not 0 < self.damping <= 1:
            raise ValueError(f"damping must lie in (0, 1], got {self.damping!r}")
        if self.max_iter < 1 or self.alpha_samples < 1 or self.growth_samples < 1:
            raise ValueError("max_iter, alpha_samples and growth_samples must be >= 1")
        if self.R_override is not None and not self.R_override > 0:
            raise ValueError(f"R_override must be positive, got {self.R_override!r}")
        set_ = lambda k, v: object.__setattr__(self, k, v)  # noqa: E731
        if isinstance(self.kernel, str):
            set_("kernel", parse(self.kernel, ("t", "s")))
        elif not isinstance(self.kernel, EXPR_TYPES):
            table = np.array(self.kernel, dtype=float)
            n = self.n_intervals + 1
            if table.shape != (n, n) or not np.all(np.isfinite(table)):
                raise ValueError(f"kernel table must be a finite {n}x{n} array")
            if self.quadrature != "trapezoid":
                raise ValueError("tabulated kernels are integrated with the trapezoid rule only")
            table.setflags(write=False)
            set_("kernel", table)
        set_("f", _parse_vector(self.f, self.dim, ("s",) + state_vars(self.dim), "f"))
        set_("h", _parse_vector(self.h, self.dim, ("t",), "h"))
        if isinstance(self.omega, str):
            set_("omega", parse(self.omega, ("u",)))
        if self.phi is None:
            set_("phi", Lifted(np.eye(self.dim), self.vector_norm))
        if not isinstance(self.phi, Lifted) or self.phi.A.shape != (self.dim, self.dim):
            raise ValueError(f"phi must be a Lifted operator with a {self.dim}x{self.dim} matrix")
        if self.phi.vector_norm != self.vector_norm:
            raise ValueError("phi and the problem must use the same vector norm")
        quadrature_rule(self.quadrature, self.n_intervals)  # validates N for simpson

    @cached_property
    def nodes(self) -> np.ndarray:
        return grid_nodes(self.n_intervals)

    @cached_property
    def weights(self) -> np.ndarray:
        return quadrature_rule(self.quadrature, self.n_intervals).weights

    @cached_property
    def kernel_matrix(self) -> np.ndarray:
        if isinstance(self.kernel, np.ndarray):
            return self.kernel
        t = self.nodes[:, None]
        s = self.nodes[None, :]
        try:
            vals = evaluate(self.kernel, {"t": t, "s": s})
        except DomainError as exc:
            i, j = _pad_index(exc.index, 2)
            raise EvaluationError(str(exc), f"kernel at node (i={i}, j={j})", (i, j)) from None
        out = np.array(np.broadcast_to(vals, (len(self.nodes), len(self.nodes))), dtype=float)
        out.setflags(write=False)
        return out

    @cached_property
    def weighted_kernel(self) -> np.ndarray:
        out = self.kernel_matrix * self.weights[None, :]
        out.setflags(write=False)
        return out

    @cached_property
    def h_grid(self) -> GridFunction:
        cols = []
        for i, e in enumerate(self.h):
            try:
                v = evaluate(e, {"t": self.nodes})
            except DomainError as exc:
                raise EvaluationError(str(exc), f"h component {i + 1} at node {exc.index}") from None
            cols.append(np.broadcast_to(v, self.nodes.shape))
        return GridFunction(self.n_intervals, np.stack(cols, axis=1))

    def f_values(self, s: np.ndarray, y: np.ndarray, where: str = "f") -> np.ndarray:
        """f evaluated row-wise: ``s`` has shape (n,), ``y`` has shape (n, d)."""
        env = {"s": s}
        for j in range(self.dim):
            env[f"y{j + 1}"] = y[:, j]
        if self.dim == 1:
            env["y"] = y[:, 0]
        cols = []
        for i, e in enumerate(self.f):
            try:
                v = evaluate(e, env)
            except DomainError as exc:
                raise EvaluationError(str(exc), f"{where} component {i + 1} at sample {exc.index}") from None
            cols.append(np.broadcast_to(v, s.shape))
        return np.stack(cols, axis=1)

    def omega_values(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        return np.broadcast_to(evaluate(self.omega, {"u": u}), u.shape).astype(float)


def _pad_index(index, n):
    if index is None:
        return (0,) * n
    return tuple(index) + (0,) * (n - len(index))


# -- hypotheses -------------------------------------------------------------

def compute_K(spec: ProblemSpec) -> float:
    """sup over grid nodes t_i of the quadrature of |k(t_i, .)|."""
    return float((np.abs(spec.kernel_matrix) @ spec.weights).max())


def norm_h(spec: ProblemSpec) -> float:
    return sup_norm(spec.h_grid, spec.vector_norm)


@dataclass(frozen=True)
class GrowthReport:
    n_samples: int
    radius: float
    max_violation: float
    worst_s: float
    worst_x_norm: float
    holds: bool

    @property
    def verdict(self) -> str:
        return "holds-on-samples" if self.holds else "violated"

    def to_dict(self) -> dict:
        return {"n_samples": self.n_samples, "radius": self.radius, "max_violation": self.max_violation,
                "worst_s": self.worst_s, "worst_x_norm": self.worst_x_norm, "verdict": self.verdict}


def _sample_ball(rng, n: int, dim: int, radius: float, vector_norm: str) -> np.ndarray:
    x = rng.uniform(-radius, radius, size=(n, dim))
    norms = row_norms(x, vector_norm)
    over = norms > radius
    x[over] *= (radius / norms[over])[:, None]
    return x


def check_growth(spec: ProblemSpec, n_samples: Optional[int] = None, R: Optional[float] = None) -> GrowthReport:
    """Sample (s, x) with ||x|| <= 2R and report the worst ||f(s,x)|| - Omega(||x||).

    Besides uniform samples the probe includes x = 0 and the points
    +-2R e_j on the sphere, where growth bounds are usually tightest.
    """
    n = spec.growth_samples if n_samples is None else int(n_samples)
    if n < 1:
        raise ValueError("n_samples must be >= 1")
    if R is None:
        R = find_R(spec)
    radius = 2.0 * R
    rng = np.random.default_rng(spec.seed)
    s = rng.uniform(0.0, 1.0, size=n)
    x = _sample_ball(rng, n, spec.dim, radius, spec.vector_norm)
    eye = np.eye(spec.dim)
    extremes = np.concatenate([np.zeros((1, spec.dim)), radius * eye, -radius * eye])
    s = np.concatenate([s, np.tile([0.0, 0.5, 1.0], len(extremes))])
    x = np.concatenate([x, np.repeat(extremes, 3, axis=0)])
    fx = row_norms(spec.f_values(s, x, where="f during growth check"), spec.vector_norm)
    xn = row_norms(x, spec.vector_norm)
    gap = fx - spec.omega_values(xn)
    worst = int(np.argmax(gap))
    return GrowthReport(
        n_samples=len(s),
        radius=radius,
        max_violation=float(gap[worst]),
        worst_s=float(s[worst]),
        worst_x_norm=float(xn[worst]),
        holds=bool(gap[worst] <= 1e-12),
    )


@dataclass(frozen=True)
class AsymptoticReport:
    K: float
    probes: tuple
    values: tuple
    holds: bool
    note: str

    @property
    def verdict(self) -> str:
        return "holds-numerically" if self.holds else "fails"

    def to_dict(self) -> dict:
        return {"K": self.K, "probes": list(self.probes), "values": list(self.values),
                "verdict": self.verdict, "note": self.note}


def check_asymptotic(spec: ProblemSpec, K: Optional[float] = None) -> AsymptoticReport:
    """Heuristic probe of K * limsup Omega(u)/u <= 1 at four magnitudes of u."""
    if K is None:
        K = compute_K(spec)
    probes = np.array(ASYMPTOTIC_PROBES)
    with np.errstate(over="ignore", invalid="ignore"):
        try:
            vals = K * spec.omega_values(probes) / probes
        except DomainError:
            vals = np.full(len(probes), np.inf)
    holds = bool(np.all(vals <= 1 + 1e-9))
    note = "heuristic probe of the limsup at u = 1e2, 1e4, 1e6, 1e8, not a proof"
    if not holds:
        note += "; the ratio exceeds 1, supply R_override with ||h|| + K*Omega(R) <= R instead"
    return AsymptoticReport(K, tuple(float(p) for p in probes), tuple(float(v) for v in vals), holds, note)


@dataclass(frozen=True)
class OmegaReport:
    upper: float
    min_value: float
    max_decrease: float
    holds: bool

    def to_dict(self) -> dict:
        return {"upper": self.upper, "min_value": self.min_value, "max_decrease": self.max_decrease,
                "verdict": "admissible" if self.holds else "not positive nondecreasing"}


def check_omega(spec: ProblemSpec, R: float) -> OmegaReport:
    """Omega must be positive and nondecreasing; checked on 100 points of [0, 10R]."""
    u = np.linspace(0.0, 10.0 * R, 100)
    try:
        w = spec.omega_values(u)
    except DomainError:
        return OmegaReport(10.0 * R, float("nan"), float("inf"), False)
    dec = float(np.max(w[:-1] - w[1:])) if len(w) > 1 else 0.0
    holds = bool(np.all(w > 0) and np.all(w[1:] >= w[:-1] - 1e-12))
    return OmegaReport(10.0 * R, float(w.min()), max(dec, 0.0), holds)


def _ball_gap(spec, nh, K, R) -> float:
    return nh + K * float(spec.omega_values(R)) - R


def find_R(spec: ProblemSpec, K: Optional[float] = None) -> float:
    """Smallest R on a geometric scan satisfying ||h|| + K Omega(R) <= R,
    refined by bisection to relative width 1e-9."""
    if K is None:
        K = compute_K(spec)
    nh = norm_h(spec)
    if spec.R_override is not None:
        R = float(spec.R_override)
        gap = _ball_gap(spec, nh, K, R)
        if gap > 0:
            raise BallRadiusError(
                f"R_override={R!r} violates the ball condition ||h|| + K*Omega(R) <= R "
                f"(||h||={nh!r}, K={K!r}, excess {gap:.6g})"
            )
        return R
    lo = max(nh, 1e-12)
    hi = 1e6 * (1.0 + nh)
    grid = np.geomspace(lo, hi, R_SCAN_POINTS)
    prev = None
    for R in grid:
        if _ball_gap(spec, nh, K, R) <= 0:
            break
        prev = R
    else:
        raise BallRadiusError(
            f"no R in [{lo:.6g}, {hi:.6g}] satisfies the ball condition ||h|| + K*Omega(R) <= R "
            f"(||h||={nh!r}, K={K!r}); check the growth function or supply R_override"
        )
    if prev is None:
        return float(R)
    a, b = float(prev), float(R)  # gap(a) > 0 >= gap(b)
    while b - a > 1e-9 * b:
        mid = 0.5 * (a + b)
        if _ball_gap(spec, nh, K, mid) <= 0:
            b = mid
        else:
            a = mid
    return b


# -- the operator -----------------------------------------------------------

def integral_term(spec: ProblemSpec, x: GridFunction) -> np.ndarray:
    """sum_j w_j k(t_i, s_j) f(s_j, x(s_j)) for every node t_i."""
    if x.n_intervals != spec.n_intervals or x.dim != spec.dim:
        raise ValueError(f"grid function {x!r} does not match the problem (N={spec.n_intervals}, d={spec.dim})")
    F = spec.f_values(spec.nodes, x.values)
    return spec.weighted_kernel @ F


def apply_T(spec: ProblemSpec, x: GridFunction) -> GridFunction:
    return GridFunction(spec.n_intervals, spec.h_grid.values + integral_term(spec, x))


def residual(spec: ProblemSpec, y: GridFunction) -> float:
    return sup_norm(apply_T(spec, y) - y, spec.vector_norm)


# -- condensing constant ----------------------------------------------------

def condensing_ratio(x, y, T: Callable, phi: Callable, norm: Callable) -> Optional[float]:
    """||phi(Tx) - phi(Ty)|| / ||phi(x) - phi(y)||, or None when the
    denominator is below the guard."""
    den = norm(phi(x) - phi(y))
    if den <= DENOMINATOR_GUARD:
        return None
    return norm(phi(T(x)) - phi(T(y))) / den


def _smooth_profile(rng, nodes, dim):
    modes = np.arange(4)
    coef = rng.standard_normal((len(modes), dim))
    return np.cos(np.pi * np.outer(nodes, modes)) @ coef


def _scale_into(v, radius, vector_norm):
    n = row_norms(v, vector_norm).max()
    return v if n == 0 else v * (radius / n)


def _draw_pair(spec: ProblemSpec, rng, R: float, family: int):
    """Random x, y in the ball. Families: independent node values, smooth
    profiles, and a difference aligned with the signs of one kernel row
    (the direction that maximises the integral of the difference)."""
    shape = (spec.n_intervals + 1, spec.dim)
    norm = spec.vector_norm
    if family == 0:
        x = _sample_ball(rng, shape[0], spec.dim, R, norm)
        y = _sample_ball(rng, shape[0], spec.dim, R, norm)
    elif family == 1:
        x = _scale_into(_smooth_profile(rng, spec.nodes, spec.dim), R * rng.random(), norm)
        y = _scale_into(_smooth_profile(rng, spec.nodes, spec.dim), R * rng.random(), norm)
    else:
        rho = R * rng.random() ** 2
        x = _scale_into(_smooth_profile(rng, spec.nodes, spec.dim), rho, norm)
        row = int(rng.integers(shape[0]))
        signs = np.sign(spec.kernel_matrix[row])
        signs[signs == 0] = 1.0
        u = rng.choice([-1.0, 1.0], size=spec.dim)
        u = u / row_norms(u[None, :], norm)[0]
        y = x + (R - rho) * rng.random() * np.outer(signs, u)
    return GridFunction(spec.n_intervals, x), GridFunction(spec.n_intervals, y)


def estimate_alpha(
    spec: ProblemSpec,
    R: Optional[float] = None,
    n_samples: Optional[int] = None,
    pointwise: bool = False,
) -> float:
    """Sampled condensing constant of the integral part of T under phi.

    By default each pair contributes the sup-norm ratio
    ``||phi(Jx - Jy)|| / ||phi(x - y)||`` (J the integral term), the
    constant a contraction certificate needs. With ``pointwise=True`` the
    ratio is taken node by node, which is far more demanding. Returns
    ``inf`` once a ratio exceeds 1e6.
    """
    n = spec.alpha_samples if n_samples is None else int(n_samples)
    if n < 1:
        raise ValueError("n_samples must be >= 1")
    if R is None:
        R = find_R(spec)
    A = spec.phi.A
    norm = spec.vector_norm
    rng = np.random.default_rng(spec.seed)
    best = 0.0
    for i in range(n):
        for _ in range(MAX_REDRAWS):
            x, y = _draw_pair(spec, rng, R, i % 3)
            den_rows = row_norms((x.values - y.values) @ A.T, norm)
            if den_rows.max() > DENOMINATOR_GUARD:
                break
        else:
            continue
        num_rows = row_norms((integral_term(spec, x) - integral_term(spec, y)) @ A.T, norm)
        if pointwise:
            keep = den_rows > DENOMINATOR_GUARD
            ratio = float((num_rows[keep] / den_rows[keep]).max())
        else:
            ratio = float(num_rows.max() / den_rows.max())
        if ratio > ALPHA_CAP:
            return math.inf
        best = max(best, ratio)
    return best


# -- solver -----------------------------------------------------------------

@dataclass
class SolveReport:
    y: GridFunction
    converged: bool
    iterations: int
    residual_history: list
    K: float
    R: Optional[float]
    alpha_hat: Optional[float]
    q: Optional[float]
    c: float
    phi_norm: float
    certificate: str
    apriori_bounds: list = field(default_factory=list)
    message: str = ""

    @property
    def final_residual(self) -> float:
        return self.residual_history[-1] if self.residual_history else math.nan

    def to_dict(self) -> dict:
        return {
            "converged": self.converged,
            "iterations": self.iterations,
            "final_residual": self.final_residual,
            "residual_history": list(self.residual_history),
            "K": self.K,
            "R": self.R,
            "alpha_hat": self.alpha_hat,
            "q": self.q,
            "c": self.c,
            "phi_norm": self.phi_norm,
            "certificate": self.certificate,
            "apriori_bounds": list(self.apriori_bounds),
            "message": self.message,
        }


def solve(
    spec: ProblemSpec,
    *,
    force: bool = False,
    K: Optional[float] = None,
    R: Optional[float] = None,
    alpha_hat: Optional[float] = None,
) -> SolveReport:
    """Damped Picard iteration x <- (1 - theta) x + theta T x from x0 = h.

    The certificate is ``contraction`` when q = c * alpha_hat * ||phi|| < 1,
    ``condensing-sampled`` when only alpha_hat < 1, otherwise ``none``.
    ``force`` skips R and alpha estimation and certifies nothing.
    """
    if K is None:
        K = compute_K(spec)
    c = inverse_bound_c(spec.phi)
    phi_norm = operator_norm(spec.phi)
    q = None
    if force:
        certificate = "none"
    else:
        if R is None:
            R = find_R(spec, K)
        if alpha_hat is None:
            alpha_hat = estimate_alpha(spec, R)
        q = c * alpha_hat * phi_norm
        if q < 1:
            certificate = "contraction"
        elif alpha_hat < 1:
            certificate = "condensing-sampled"
        else:
            certificate = "none"

    theta = spec.damping
    x = spec.h_grid
    history = []
    bounds = []
    converged = False
    message = ""
    r0 = None
    for n in range(spec.max_iter):
        try:
            Tx = apply_T(spec, x)
        except ValueError as exc:
            # GridFunction rejects NaN/Inf, so divergence surfaces here
            message = f"iteration {n} aborted: {exc}"
            break
        r = sup_norm(Tx - x, spec.vector_norm)
        history.append(r)
        if certificate == "contraction" and theta == 1.0:
            if r0 is None:
                r0 = r
            bounds.append(q ** n * r0 / (1.0 - q))
        if r < spec.tol:
            converged = True
            break
        x = Tx if theta == 1.0 else GridFunction(spec.n_intervals, (1 - theta) * x.values + theta * Tx.values)
    if not converged and not message:
        message = f"no convergence within max_iter={spec.max_iter}"
    return SolveReport(
        y=x,
        converged=converged,
        iterations=len(history),
        residual_history=history,
        K=K,
        R=R,
        alpha_hat=alpha_hat,
        q=q,
        c=c,
        phi_norm=phi_norm,
        certificate=certificate,
        apriori_bounds=bounds,
        message=message,
    )
