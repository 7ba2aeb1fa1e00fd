"""Discrete carriers: grid functions on [0, 1], finite-support l1 sequences,
and composite quadrature on uniform grids."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Callable, Iterable, Mapping

import numpy as np

VECTOR_NORMS = ("max", "euclid", "l1")


def row_norms(values: np.ndarray, vector_norm: str = "max") -> np.ndarray:
    """Norm of each row of a 2-d array under the chosen norm on R^d."""
    a = np.abs(np.asarray(values, dtype=float))
    if vector_norm == "max":
        return a.max(axis=-1)
    if vector_norm == "l1":
        return a.sum(axis=-1)
    if vector_norm == "euclid":
        return np.sqrt((a * a).sum(axis=-1))
    raise ValueError(f"unknown vector norm {vector_norm!r}; expected one of {VECTOR_NORMS}")


@dataclass(frozen=True, eq=False)
class GridFunction:
    """A function [0, 1] -> R^d sampled at the nodes t_i = i/N, i = 0..N."""

    n_intervals: int
    values: np.ndarray

    def __post_init__(self):
        if int(self.n_intervals) != self.n_intervals or self.n_intervals < 1:
            raise ValueError(f"n_intervals must be a positive integer, got {self.n_intervals!r}")
        vals = np.array(self.values, dtype=float)
        if vals.ndim == 1:
            vals = vals[:, None]
        if vals.ndim != 2 or vals.shape[0] != self.n_intervals + 1 or vals.shape[1] < 1:
            raise ValueError(
                f"values must have shape ({self.n_intervals + 1}, d), got {np.shape(self.values)}"
            )
        if not np.all(np.isfinite(vals)):
            raise ValueError("grid function values must be finite")
        vals.setflags(write=False)
        object.__setattr__(self, "n_intervals", int(self.n_intervals))
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_callable(cls, fn: Callable[[np.ndarray], np.ndarray], n_intervals: int) -> "GridFunction":
        t = grid_nodes(n_intervals)
        return cls(n_intervals, np.asarray(fn(t), dtype=float))

    @classmethod
    def constant(cls, value, n_intervals: int) -> "GridFunction":
        row = np.atleast_1d(np.asarray(value, dtype=float))
        return cls(n_intervals, np.tile(row, (n_intervals + 1, 1)))

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @property
    def nodes(self) -> np.ndarray:
        return grid_nodes(self.n_intervals)

    def _check_compatible(self, other: "GridFunction"):
        if not isinstance(other, GridFunction):
            return NotImplemented
        if other.values.shape != self.values.shape:
            raise ValueError(f"grid shape mismatch: {self.values.shape} vs {other.values.shape}")
        return None

    def __add__(self, other):
        if self._check_compatible(other) is NotImplemented:
            return NotImplemented
        return GridFunction(self.n_intervals, self.values + other.values)

    def __sub__(self, other):
        if self._check_compatible(other) is NotImplemented:
            return NotImplemented
        return GridFunction(self.n_intervals, self.values - other.values)

    def __neg__(self):
        return GridFunction(self.n_intervals, -self.values)

    def __mul__(self, scalar):
        if not np.isscalar(scalar):
            return NotImplemented
        return GridFunction(self.n_intervals, float(scalar) * self.values)

    __rmul__ = __mul__

    def __eq__(self, other):
        if not isinstance(other, GridFunction):
            return NotImplemented
        return self.n_intervals == other.n_intervals and np.array_equal(self.values, other.values)

    def __repr__(self):
        return f"GridFunction(N={self.n_intervals}, d={self.dim})"


def grid_nodes(n_intervals: int) -> np.ndarray:
    # i/N rather than linspace so node values are reproducible exactly
    return np.arange(n_intervals + 1, dtype=float) / n_intervals


def sup_norm(x: GridFunction, vector_norm: str = "max") -> float:
    """max over the grid rows of the chosen E-norm."""
    return float(row_norms(x.values, vector_norm).max())


@dataclass(frozen=True, eq=False)
class SeqVec:
    """Finite-support element sum_k a_k e_k of l1 (indices start at 1).

    Zero coefficients are dropped on construction.
    """

    entries: Mapping[int, float] = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for k, v in dict(self.entries).items():
            if isinstance(k, bool) or int(k) != k or int(k) < 1:
                raise ValueError(f"SeqVec indices must be positive integers, got {k!r}")
            v = float(v)
            if not math.isfinite(v):
                raise ValueError(f"SeqVec coefficient at index {k} is not finite")
            if v != 0.0:
                clean[int(k)] = v
        object.__setattr__(self, "entries", MappingProxyType(dict(sorted(clean.items()))))

    @classmethod
    def basis(cls, k: int, scale: float = 1.0) -> "SeqVec":
        return cls({k: scale})

    @classmethod
    def from_list(cls, coeffs: Iterable[float], start: int = 1) -> "SeqVec":
        return cls({start + i: c for i, c in enumerate(coeffs)})

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(self.entries)

    def __getitem__(self, k: int) -> float:
        return self.entries.get(k, 0.0)

    def _combine(self, other: "SeqVec", sign: float) -> "SeqVec":
        out = dict(self.entries)
        for k, v in other.entries.items():
            out[k] = out.get(k, 0.0) + sign * v
        return SeqVec(out)

    def __add__(self, other):
        if not isinstance(other, SeqVec):
            return NotImplemented
        return self._combine(other, 1.0)

    def __sub__(self, other):
        if not isinstance(other, SeqVec):
            return NotImplemented
        return self._combine(other, -1.0)

    def __neg__(self):
        return SeqVec({k: -v for k, v in self.entries.items()})

    def __mul__(self, scalar):
        if not np.isscalar(scalar):
            return NotImplemented
        return SeqVec({k: float(scalar) * v for k, v in self.entries.items()})

    __rmul__ = __mul__

    def __eq__(self, other):
        if not isinstance(other, SeqVec):
            return NotImplemented
        return dict(self.entries) == dict(other.entries)

    def __hash__(self):
        return hash(tuple(self.entries.items()))

    def __repr__(self):
        body = ", ".join(f"{k}: {v!r}" for k, v in self.entries.items())
        return f"SeqVec({{{body}}})"


def l1_norm(x: SeqVec) -> float:
    # fsum is correctly rounded, hence independent of summation order
    return math.fsum(abs(v) for v in x.entries.values())


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    kind: str
    weights: np.ndarray

    @property
    def n_intervals(self) -> int:
        return len(self.weights) - 1


def quadrature_rule(kind: str, n_intervals: int) -> QuadratureRule:
    """Composite trapezoid or Simpson weights on the uniform grid of [0, 1]."""
    n = int(n_intervals)
    if n < 1:
        raise ValueError("n_intervals must be >= 1")
    h = 1.0 / n
    if kind == "trapezoid":
        w = np.full(n + 1, h)
        w[0] = w[-1] = h / 2
    elif kind == "simpson":
        if n % 2:
            raise ValueError(f"simpson rule needs an even number of intervals, got {n}")
        w = np.empty(n + 1)
        w[1::2] = 4.0
        w[2::2] = 2.0
        w[0] = w[-1] = 1.0
        w *= h / 3
    else:
        raise ValueError(f"unknown quadrature kind {kind!r}")
    w.setflags(write=False)
    return QuadratureRule(kind, w)


def integrate(rule: QuadratureRule, samples) -> float:
    samples = np.asarray(samples, dtype=float)
    if samples.shape != rule.weights.shape:
        raise ValueError(
            f"expected {len(rule.weights)} samples for this rule, got shape {samples.shape}"
        )
    return float(rule.weights @ samples)
