"""Concrete operators phi and a sampled checker for the phi-space premises.

Variants and their carriers:

=================  ==================================================
Multiplication     scalar GridFunction, ``x(t) -> m(t) x(t)``
RightShift         SeqVec, ``e_k -> e_{k+1}``
Diagonal           SeqVec, ``e_k -> d(k) e_k`` (symbol with a declared limit)
Matrix             vectors in R^d
Lifted             GridFunction with d columns, ``A`` applied at every node
=================  ==================================================
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .exprparse import Expr, evaluate, parse, to_string
from .gridfn import GridFunction, SeqVec, grid_nodes, l1_norm, row_norms, sup_norm

SPAN_TEST_INDICES = 16
DIAGONAL_SAMPLE_INDICES = 4096
KERNEL_THRESHOLD = 1e-12


class NotInRangeError(ValueError):
    pass


class SingularOperatorError(ValueError):
    pass


def _as_expr(e, allowed) -> Expr:
    return parse(e, allowed) if isinstance(e, str) else e


def induced_norm(A: np.ndarray, vector_norm: str = "max") -> float:
    A = np.asarray(A, dtype=float)
    if vector_norm == "max":
        return float(np.abs(A).sum(axis=1).max())
    if vector_norm == "l1":
        return float(np.abs(A).sum(axis=0).max())
    if vector_norm == "euclid":
        return float(np.linalg.norm(A, 2))
    raise ValueError(f"unknown vector norm {vector_norm!r}")


@dataclass(frozen=True, eq=False)
class Multiplication:
    """x(t) -> m(t) x(t); ``m`` must stay >= ``lower_bound`` > 0 on ``grid``."""

    m: Expr
    lower_bound: Optional[float] = None
    grid: int = 256

    def __post_init__(self):
        object.__setattr__(self, "m", _as_expr(self.m, ("t",)))
        vals = self.values(grid_nodes(self.grid))
        lo = float(vals.min())
        a = lo if self.lower_bound is None else float(self.lower_bound)
        if not a > 0:
            raise ValueError(f"multiplier must be bounded below by some a > 0 (min on grid {lo!r})")
        if lo < a:
            raise ValueError(f"multiplier falls below the declared bound {a!r} (min on grid {lo!r})")
        object.__setattr__(self, "lower_bound", a)

    def values(self, t: np.ndarray) -> np.ndarray:
        return np.broadcast_to(evaluate(self.m, {"t": t}), np.shape(t)).astype(float)


@dataclass(frozen=True)
class RightShift:
    pass


@dataclass(frozen=True, eq=False)
class Diagonal:
    """e_k -> d(k) e_k on l1, with ``d(k) -> limit`` as k grows."""

    symbol: Expr
    limit: float

    def __post_init__(self):
        object.__setattr__(self, "symbol", _as_expr(self.symbol, ("k",)))
        object.__setattr__(self, "limit", float(self.limit))
        check_tail_limit(self.symbol, self.limit)

    def values(self, k) -> np.ndarray:
        k = np.asarray(k, dtype=float)
        return np.broadcast_to(evaluate(self.symbol, {"k": k}), k.shape).astype(float)


@dataclass(frozen=True, eq=False)
class Matrix:
    A: np.ndarray
    vector_norm: str = "max"

    def __post_init__(self):
        object.__setattr__(self, "A", _checked_matrix(self.A))


@dataclass(frozen=True, eq=False)
class Lifted:
    """(phi x)(t) = A x(t) on grid functions with values in R^d."""

    A: np.ndarray
    vector_norm: str = "max"

    def __post_init__(self):
        object.__setattr__(self, "A", _checked_matrix(self.A))


PhiOperator = Union[Multiplication, RightShift, Diagonal, Matrix, Lifted]


def _checked_matrix(A) -> np.ndarray:
    A = np.array(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 1:
        raise ValueError(f"operator matrix must be square, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("operator matrix has non-finite entries")
    cond = np.linalg.cond(A)
    if not np.isfinite(cond) or cond > 1e15:
        raise SingularOperatorError(f"operator matrix is singular (condition estimate {cond:.3g})")
    A.setflags(write=False)
    return A


def check_tail_limit(tail: Expr, limit: float, rel_tol: float = 0.01):
    """Validate a declared limit by evaluating the tail far out (k >= 1e6)."""
    if not limit > 0:
        raise ValueError(f"declared tail limit must be positive, got {limit!r}")
    ks = np.array([1e6, 1e7, 1e8, 1e9, 1e12])
    vals = np.broadcast_to(evaluate(tail, {"k": ks}), ks.shape)
    worst = float(np.abs(vals - limit).max())
    if worst > rel_tol * limit:
        raise ValueError(
            f"tail '{to_string(tail)}' does not approach the declared limit {limit!r} "
            f"(deviation {worst:.3g} at k >= 1e6)"
        )


def _carrier_error(phi, x):
    return TypeError(f"{type(phi).__name__} cannot act on {type(x).__name__}")


def _diag_sample_indices(phi: Diagonal) -> np.ndarray:
    return np.arange(1, DIAGONAL_SAMPLE_INDICES + 1, dtype=float)


def apply(phi: PhiOperator, x):
    if isinstance(phi, Multiplication):
        if not isinstance(x, GridFunction) or x.dim != 1:
            raise _carrier_error(phi, x)
        return GridFunction(x.n_intervals, phi.values(x.nodes)[:, None] * x.values)
    if isinstance(phi, RightShift):
        if not isinstance(x, SeqVec):
            raise _carrier_error(phi, x)
        return SeqVec({k + 1: v for k, v in x.entries.items()})
    if isinstance(phi, Diagonal):
        if not isinstance(x, SeqVec):
            raise _carrier_error(phi, x)
        d = phi.values(list(x.entries)) if x.entries else ()
        return SeqVec({k: dk * v for (k, v), dk in zip(x.entries.items(), d)})
    if isinstance(phi, Matrix):
        x = np.asarray(x, dtype=float)
        if x.shape != (phi.A.shape[0],):
            raise _carrier_error(phi, x)
        return phi.A @ x
    if isinstance(phi, Lifted):
        if not isinstance(x, GridFunction) or x.dim != phi.A.shape[0]:
            raise _carrier_error(phi, x)
        return GridFunction(x.n_intervals, x.values @ phi.A.T)
    raise TypeError(f"unknown operator {phi!r}")


def inverse_apply(phi: PhiOperator, y):
    if isinstance(phi, Multiplication):
        if not isinstance(y, GridFunction) or y.dim != 1:
            raise _carrier_error(phi, y)
        return GridFunction(y.n_intervals, y.values / phi.values(y.nodes)[:, None])
    if isinstance(phi, RightShift):
        if not isinstance(y, SeqVec):
            raise _carrier_error(phi, y)
        if y[1] != 0.0:
            raise NotInRangeError("sequence has a nonzero first coefficient; it is not a right shift")
        return SeqVec({k - 1: v for k, v in y.entries.items()})
    if isinstance(phi, Diagonal):
        if not isinstance(y, SeqVec):
            raise _carrier_error(phi, y)
        d = phi.values(list(y.entries)) if y.entries else np.ones(0)
        if np.any(d == 0):
            raise SingularOperatorError("diagonal symbol vanishes on the support of y")
        return SeqVec({k: v / dk for (k, v), dk in zip(y.entries.items(), d)})
    if isinstance(phi, Matrix):
        y = np.asarray(y, dtype=float)
        if y.shape != (phi.A.shape[0],):
            raise _carrier_error(phi, y)
        return np.linalg.solve(phi.A, y)
    if isinstance(phi, Lifted):
        if not isinstance(y, GridFunction) or y.dim != phi.A.shape[0]:
            raise _carrier_error(phi, y)
        return GridFunction(y.n_intervals, np.linalg.solve(phi.A, y.values.T).T)
    raise TypeError(f"unknown operator {phi!r}")


def operator_norm(phi: PhiOperator) -> float:
    """Induced norm. For Diagonal it is sampled: the max of |d(k)| over
    k <= 4096 and the limit."""
    if isinstance(phi, Multiplication):
        return float(np.abs(phi.values(grid_nodes(phi.grid))).max())
    if isinstance(phi, RightShift):
        return 1.0
    if isinstance(phi, Diagonal):
        d = np.abs(phi.values(_diag_sample_indices(phi)))
        return float(max(d.max(), abs(phi.limit)))
    if isinstance(phi, (Matrix, Lifted)):
        return induced_norm(phi.A, phi.vector_norm)
    raise TypeError(f"unknown operator {phi!r}")


def inverse_bound_c(phi: PhiOperator) -> float:
    """Smallest c with ||phi^-1 y|| <= c ||y|| that the variant lets us compute."""
    if isinstance(phi, Multiplication):
        return float((1.0 / np.abs(phi.values(grid_nodes(phi.grid)))).max())
    if isinstance(phi, RightShift):
        return 1.0
    if isinstance(phi, Diagonal):
        d = np.abs(phi.values(_diag_sample_indices(phi)))
        if np.any(d == 0):
            raise SingularOperatorError("diagonal symbol vanishes")
        return float(max((1.0 / d).max(), 1.0 / phi.limit))
    if isinstance(phi, (Matrix, Lifted)):
        try:
            inv = np.linalg.inv(phi.A)
        except np.linalg.LinAlgError as exc:
            raise SingularOperatorError(str(exc)) from None
        return induced_norm(inv, phi.vector_norm)
    raise TypeError(f"unknown operator {phi!r}")


def carrier_norm(phi: PhiOperator, x) -> float:
    if isinstance(x, SeqVec):
        return l1_norm(x)
    if isinstance(x, GridFunction):
        return sup_norm(x, getattr(phi, "vector_norm", "max"))
    return float(row_norms(np.asarray(x)[None, :], phi.vector_norm)[0])


@dataclass(frozen=True)
class PremiseReport:
    not_in_span_of_identity: bool
    kernel_trivial_on_samples: bool
    inverse_bound_c: Optional[float]
    operator_norm: float
    verdict: str
    sample_count: int = 0
    notes: tuple = field(default_factory=tuple)

    @property
    def holds(self) -> bool:
        return self.verdict == "premises-hold"

    def to_dict(self) -> dict:
        return {
            "not_in_span_of_identity": self.not_in_span_of_identity,
            "kernel_trivial_on_samples": self.kernel_trivial_on_samples,
            "inverse_bound_c": self.inverse_bound_c,
            "operator_norm": self.operator_norm,
            "verdict": self.verdict,
            "sample_count": self.sample_count,
            "notes": list(self.notes),
        }


def _eigen_ratios(phi: PhiOperator) -> Optional[np.ndarray]:
    """lambda_i with phi e_i = lambda_i e_i over the test basis, or None when
    some phi e_i is not a multiple of e_i."""
    if isinstance(phi, RightShift):
        return None  # phi e_1 = e_2
    if isinstance(phi, Diagonal):
        return phi.values(np.arange(1, SPAN_TEST_INDICES + 1))
    if isinstance(phi, Multiplication):
        # every node indicator is an eigenvector; use all grid nodes
        return phi.values(grid_nodes(phi.grid))
    A = phi.A
    off = A - np.diag(np.diag(A))
    if np.any(np.abs(off) > 1e-12 * np.abs(A).max()):
        return None
    return np.diag(A).copy()


def _random_element(phi: PhiOperator, rng: np.random.Generator):
    if isinstance(phi, (RightShift, Diagonal)):
        n = int(rng.integers(1, 17))
        idx = rng.choice(np.arange(1, 65), size=n, replace=False)
        return SeqVec({int(k): float(v) for k, v in zip(idx, rng.standard_normal(n))})
    if isinstance(phi, Multiplication):
        return GridFunction(phi.grid, rng.standard_normal(phi.grid + 1))
    if isinstance(phi, Matrix):
        return rng.standard_normal(phi.A.shape[0])
    return GridFunction(32, rng.standard_normal((33, phi.A.shape[0])))


def check_phi_space_premises(phi: PhiOperator, sample_count: int = 64, seed: int = 0) -> PremiseReport:
    """Sampled check that phi is outside span{I}, injective, and boundedly
    invertible on its range. Failures come back as verdicts."""
    if sample_count < 1:
        raise ValueError("sample_count must be >= 1")
    notes = []
    lam = _eigen_ratios(phi)
    if lam is None:
        not_in_span = True
    else:
        scale = max(float(np.abs(lam).max()), 1e-300)
        not_in_span = bool(np.abs(lam - lam[0]).max() > 1e-12 * scale)

    rng = np.random.default_rng(seed)
    kernel_ok = True
    for _ in range(sample_count):
        x = _random_element(phi, rng)
        nx = carrier_norm(phi, x)
        if nx == 0:
            continue
        if carrier_norm(phi, apply(phi, x)) < KERNEL_THRESHOLD * nx:
            kernel_ok = False
            notes.append("a sampled nonzero x has ||phi x|| below 1e-12 ||x||")
            break

    c = None
    if kernel_ok:
        try:
            c = inverse_bound_c(phi)
        except SingularOperatorError as exc:
            kernel_ok = False
            notes.append(f"inverse bound unavailable: {exc}")

    if not not_in_span:
        verdict = "premises-fail(in span{I})"
    elif not kernel_ok:
        verdict = "premises-fail(nontrivial kernel)"
    else:
        verdict = "premises-hold"
    return PremiseReport(
        not_in_span_of_identity=not_in_span,
        kernel_trivial_on_samples=kernel_ok,
        inverse_bound_c=c,
        operator_norm=operator_norm(phi),
        verdict=verdict,
        sample_count=sample_count,
        notes=tuple(notes),
    )
