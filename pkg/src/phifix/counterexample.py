"""The right shift on the probability simplex of l1.

T(sum a_n e_n) = sum a_n e_{n+1} maps the simplex M into itself, is an
isometry, has no fixed point in M, and is not condensing for the measure
built from the shift itself.  Everything here is exact: shifting indices
never touches the coefficients.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .gridfn import SeqVec, l1_norm
from .hammerstein import condensing_ratio
from .mnc import BasisRay, FinitePoints, SetDescriptor, chi_phi, image_under
from .phi_ops import RightShift, apply

SHIFT = RightShift()


@dataclass(frozen=True)
class SimplexPoint:
    x: SeqVec

    def __post_init__(self):
        coeffs = list(self.x.entries.values())
        if any(v < 0 for v in coeffs):
            raise ValueError("simplex points have nonnegative coefficients")
        total = math.fsum(coeffs)
        if abs(total - 1.0) > 1e-14:
            raise ValueError(f"simplex point coefficients sum to {total!r}, not 1")

    @classmethod
    def vertex(cls, n: int) -> "SimplexPoint":
        return cls(SeqVec.basis(n))

    @classmethod
    def uniform(cls, n: int) -> "SimplexPoint":
        w = 1.0 / n
        return cls(SeqVec({k: w for k in range(1, n + 1)}))


def shift_map(p: SimplexPoint) -> SimplexPoint:
    return SimplexPoint(apply(SHIFT, p.x))


def _gap(p: SimplexPoint) -> float:
    return l1_norm(shift_map(p).x - p.x)


def random_simplex_point(rng: np.random.Generator, max_index: int = 50) -> SimplexPoint:
    n = int(rng.integers(1, 12))
    idx = rng.choice(np.arange(1, max_index + 1), size=n, replace=False)
    w = rng.random(n) + 1e-3
    w = w / w.sum()
    # put the rounding residue on one coordinate so the sum is 1 to within an ulp
    w[-1] = 1.0 - math.fsum(w[:-1])
    if w[-1] < 0:
        w[-1] = 0.0
        w[0] = 1.0 - math.fsum(w[1:])
    return SimplexPoint(SeqVec({int(k): float(v) for k, v in zip(idx, w)}))


@dataclass
class IsometryReport:
    n_pairs: int
    max_distance: float = 0.0
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {"n_pairs": self.n_pairs, "max_distance": self.max_distance,
                "violations": list(self.violations), "ok": self.ok}


def verify_isometry(seed: int = 0, n_pairs: int = 1000) -> IsometryReport:
    """Check ||Tx - Ty|| == ||x - y|| bit for bit on seeded random pairs."""
    if n_pairs < 1:
        raise ValueError("n_pairs must be >= 1")
    rng = np.random.default_rng(seed)
    report = IsometryReport(n_pairs)
    for i in range(n_pairs):
        x, y = random_simplex_point(rng), random_simplex_point(rng)
        before = l1_norm(x.x - y.x)
        after = l1_norm(shift_map(x).x - shift_map(y).x)
        report.max_distance = max(report.max_distance, before)
        if after != before:
            report.violations.append(f"pair {i}: ||x-y||={before!r} but ||Tx-Ty||={after!r}")
    return report


def fixed_point_gap(family: str, n: int) -> float:
    """||Tx - x|| for x = e_n ("vertex") or the uniform point on 1..n ("uniform")."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if family == "vertex":
        return _gap(SimplexPoint.vertex(n))
    if family == "uniform":
        return _gap(SimplexPoint.uniform(n))
    raise ValueError(f"unknown family {family!r}; expected 'vertex' or 'uniform'")


def picard_orbit(x0: SimplexPoint, steps: int) -> list:
    """Residuals ||T x_k - x_k|| along the orbit x_{k+1} = T x_k."""
    if steps < 1:
        raise ValueError("steps must be >= 1")
    out = []
    x = x0
    for _ in range(steps):
        tx = shift_map(x)
        out.append(l1_norm(tx.x - x.x))
        x = tx
    return out


def shift_alpha_estimate(seed: int = 0, n_pairs: int = 200) -> float:
    """Sampled condensing constant of T measured through phi = T itself,
    max ||phi(Tx) - phi(Ty)|| / ||phi(x) - phi(y)|| over simplex pairs."""
    rng = np.random.default_rng(seed)
    shift = lambda v: apply(SHIFT, v)  # noqa: E731
    best = 0.0
    for _ in range(n_pairs):
        x, y = random_simplex_point(rng).x, random_simplex_point(rng).x
        ratio = condensing_ratio(x, y, shift, shift, l1_norm)
        if ratio is not None:
            best = max(best, ratio)
    return best


@dataclass
class CondensingCertificate:
    chi_phi_C: float
    chi_phi_TC: float
    finite_chi_phi_C: float
    finite_chi_phi_TC: float
    alpha_hat: float
    alpha_pairs: int

    @property
    def ok(self) -> bool:
        return (
            self.chi_phi_C == self.chi_phi_TC == 2.0
            and self.finite_chi_phi_C == self.finite_chi_phi_TC == 0.0
            and self.alpha_hat >= 1 - 1e-12
        )

    def to_dict(self) -> dict:
        return {
            "set": "{e_k : k >= 1}",
            "chi_phi_C": self.chi_phi_C,
            "chi_phi_TC": self.chi_phi_TC,
            "finite_set": "{e_1, ..., e_9}",
            "finite_chi_phi_C": self.finite_chi_phi_C,
            "finite_chi_phi_TC": self.finite_chi_phi_TC,
            "alpha_hat": self.alpha_hat,
            "alpha_pairs": self.alpha_pairs,
            "condensing": self.chi_phi_TC < self.chi_phi_C,
            "ok": self.ok,
        }


def condensing_violation_certificate(seed: int = 0, alpha_pairs: int = 200) -> CondensingCertificate:
    """chi_phi before and after T on the vertex set {e_k}, which lies in M."""
    vertices = SetDescriptor((BasisRay(SeqVec(), 1.0, 1),))
    finite = SetDescriptor((FinitePoints(tuple(SeqVec.basis(k) for k in range(1, 10))),))
    return CondensingCertificate(
        chi_phi_C=chi_phi(vertices, SHIFT),
        chi_phi_TC=chi_phi(image_under(SHIFT, vertices), SHIFT),
        finite_chi_phi_C=chi_phi(finite, SHIFT),
        finite_chi_phi_TC=chi_phi(image_under(SHIFT, finite), SHIFT),
        alpha_hat=shift_alpha_estimate(seed, alpha_pairs),
        alpha_pairs=alpha_pairs,
    )
