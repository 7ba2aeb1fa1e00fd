"""Kuratowski measure of noncompactness on a symbolic family of bounded l1 sets.

Atoms are finite point sets (compact, value 0) and basis rays
``{c + r d_k e_k : k >= k0}`` whose tail ``d_k`` tends to a declared limit
``L > 0``.  Two distinct ray points sit at distance ``r (|d_j| + |d_k|)``,
which tends to ``2 r L``: every finite cover has a piece holding infinitely
many ray points (so diameter >= 2rL - eps), and covering the first few points
by singletons leaves a tail of diameter <= 2rL + eps.  Hence the value 2rL.

A descriptor is a union of atoms, optionally with convex hull and closure
applied; neither operation changes the measure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Union

import numpy as np

from .exprparse import BinOp, Expr, Num, Var, evaluate, parse, substitute, to_string
from .gridfn import SeqVec, l1_norm
from .phi_ops import Diagonal, RightShift, apply, check_tail_limit, operator_norm

TAIL_SAMPLE_COUNT = 4096


class UnsupportedImageError(TypeError):
    pass


@dataclass(frozen=True, eq=False)
class FinitePoints:
    points: tuple

    def __post_init__(self):
        pts = tuple(self.points)
        if not pts:
            raise ValueError("FinitePoints needs at least one point")
        if not all(isinstance(p, SeqVec) for p in pts):
            raise TypeError("FinitePoints holds SeqVec points")
        object.__setattr__(self, "points", pts)

    def __eq__(self, other):
        return isinstance(other, FinitePoints) and self.points == other.points


@dataclass(frozen=True, eq=False)
class BasisRay:
    """{center + radius * d_k * e_k : k >= start_index}; d_k = 1 without a tail."""

    center: SeqVec
    radius: float
    start_index: int = 1
    tail: Optional[Expr] = None
    tail_limit: Optional[float] = None

    def __post_init__(self):
        if not self.radius > 0 or not math.isfinite(self.radius):
            raise ValueError(f"ray radius must be positive and finite, got {self.radius!r}")
        if int(self.start_index) != self.start_index or self.start_index < 1:
            raise ValueError(f"start_index must be a positive integer, got {self.start_index!r}")
        object.__setattr__(self, "radius", float(self.radius))
        object.__setattr__(self, "start_index", int(self.start_index))
        if self.tail is None:
            if self.tail_limit not in (None, 1.0):
                raise ValueError("a ray without tail has limit 1")
            object.__setattr__(self, "tail_limit", 1.0)
            return
        if isinstance(self.tail, str):
            object.__setattr__(self, "tail", parse(self.tail, ("k",)))
        if self.tail_limit is None:
            raise ValueError("a tail expression needs a declared limit")
        object.__setattr__(self, "tail_limit", float(self.tail_limit))
        check_tail_limit(self.tail, self.tail_limit)
        # bounded and evaluable on the sampled index window
        self.tail_values(self.sample_indices())

    @property
    def limit(self) -> float:
        return self.tail_limit

    def sample_indices(self) -> np.ndarray:
        return np.arange(self.start_index, self.start_index + TAIL_SAMPLE_COUNT, dtype=float)

    def tail_values(self, k) -> np.ndarray:
        k = np.asarray(k, dtype=float)
        if self.tail is None:
            return np.ones_like(k)
        return np.broadcast_to(evaluate(self.tail, {"k": k}), k.shape).astype(float)

    def point(self, k: int) -> SeqVec:
        d = float(self.tail_values(np.array([k]))[0])
        return self.center + SeqVec({k: self.radius * d})

    def __eq__(self, other):
        return (
            isinstance(other, BasisRay)
            and self.center == other.center
            and self.radius == other.radius
            and self.start_index == other.start_index
            and self.tail == other.tail
            and self.tail_limit == other.tail_limit
        )


Atom = Union[FinitePoints, BasisRay]


@dataclass(frozen=True)
class SetDescriptor:
    atoms: tuple
    hull: bool = False
    closed: bool = False

    def __post_init__(self):
        atoms = tuple(self.atoms)
        if not atoms:
            raise ValueError("a set descriptor needs at least one atom")
        if not all(isinstance(a, (FinitePoints, BasisRay)) for a in atoms):
            raise TypeError("atoms must be FinitePoints or BasisRay")
        object.__setattr__(self, "atoms", atoms)

    def union(self, other: "SetDescriptor") -> "SetDescriptor":
        # hull(A) u B is not expressible; only flag-free unions are formed
        if self.hull or other.hull:
            raise ValueError("union of hull descriptors is not representable")
        return SetDescriptor(self.atoms + other.atoms, closed=self.closed and other.closed)


def atom_measure(atom: Atom) -> float:
    if isinstance(atom, FinitePoints):
        return 0.0
    return 2.0 * atom.radius * atom.limit


def kuratowski(c: SetDescriptor) -> float:
    # hull and closure leave the measure unchanged
    return max(atom_measure(a) for a in c.atoms)


def atom_diameter(atom: Atom) -> float:
    """Diameter of a single atom; for rays with a tail it is evaluated on the
    sampled index window plus the limit (which is approached infinitely often)."""
    if isinstance(atom, FinitePoints):
        pts = atom.points
        return max((l1_norm(p - q) for i, p in enumerate(pts) for q in pts[i + 1:]), default=0.0)
    mags = np.abs(atom.tail_values(atom.sample_indices()))
    mags = np.concatenate([mags, [atom.limit, atom.limit]])
    top2 = np.sort(mags)[-2:]
    # translation by the center does not change distances
    return float(atom.radius * (top2[0] + top2[1]))


def _shift_tail(tail: Optional[Expr]) -> Optional[Expr]:
    if tail is None:
        return None
    return substitute(tail, "k", BinOp("-", Var("k"), Num(1.0)))


def _image_atom(phi, atom: Atom) -> Atom:
    if isinstance(atom, FinitePoints):
        return FinitePoints(tuple(apply(phi, p) for p in atom.points))
    if isinstance(phi, RightShift):
        return BasisRay(
            center=apply(phi, atom.center),
            radius=atom.radius,
            start_index=atom.start_index + 1,
            tail=_shift_tail(atom.tail),
            tail_limit=atom.tail_limit if atom.tail is not None else None,
        )
    tail = phi.symbol if atom.tail is None else BinOp("*", atom.tail, phi.symbol)
    return BasisRay(
        center=apply(phi, atom.center),
        radius=atom.radius,
        start_index=atom.start_index,
        tail=tail,
        tail_limit=atom.limit * phi.limit,
    )


def image_under(phi, c: SetDescriptor) -> SetDescriptor:
    """phi(C) for the shift and for diagonal operators on l1.

    Linear maps commute with convex hulls, and the closure flag is kept since
    the measure ignores it.
    """
    if not isinstance(phi, (RightShift, Diagonal)):
        raise UnsupportedImageError(f"images of set descriptors under {type(phi).__name__} are not supported")
    return replace(c, atoms=tuple(_image_atom(phi, a) for a in c.atoms))


def chi_phi(c: SetDescriptor, phi) -> float:
    return kuratowski(image_under(phi, c))


# -- property suite ---------------------------------------------------------

# tail expressions with their limits, used by the random generator
TAIL_LIBRARY = (
    (None, None),
    ("1/2", 0.5),
    ("1 + 1/k", 1.0),
    ("2 - 1/k", 2.0),
    ("0.5 + 0.5/(k+1)", 0.5),
    ("3 + sin(k)/k", 3.0),
    ("1 - exp(-k)", 1.0),
)

DIAGONAL_LIBRARY = (
    ("1/2", 0.5),
    ("2", 2.0),
    ("1 + 1/k", 1.0),
    ("3 - 2/(k+1)", 3.0),
    ("0.25 + 1/k^2", 0.25),
)


@dataclass
class PropertyReport:
    n_cases: int
    checks_run: int = 0
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {"n_cases": self.n_cases, "checks_run": self.checks_run,
                "violations": list(self.violations), "ok": self.ok}


def _random_seqvec(rng, max_index=40, max_terms=4) -> SeqVec:
    n = int(rng.integers(0, max_terms + 1))
    idx = rng.choice(np.arange(1, max_index + 1), size=n, replace=False)
    return SeqVec({int(k): float(v) for k, v in zip(idx, rng.uniform(-2, 2, n))})


def random_atom(rng: np.random.Generator, centered: bool = False) -> Atom:
    if rng.random() < 0.35:
        n = int(rng.integers(1, 6))
        return FinitePoints(tuple(_random_seqvec(rng) for _ in range(n)))
    tail, limit = TAIL_LIBRARY[int(rng.integers(len(TAIL_LIBRARY)))]
    return BasisRay(
        center=SeqVec() if centered or rng.random() < 0.4 else _random_seqvec(rng),
        radius=float(rng.uniform(0.05, 3.0)),
        start_index=int(rng.integers(1, 50)),
        tail=tail,
        tail_limit=limit,
    )


def random_descriptor(rng: np.random.Generator, max_atoms: int = 3) -> SetDescriptor:
    n = int(rng.integers(1, max_atoms + 1))
    return SetDescriptor(tuple(random_atom(rng) for _ in range(n)))


def describe(c: SetDescriptor) -> str:
    parts = []
    for a in c.atoms:
        if isinstance(a, FinitePoints):
            parts.append(f"points{list(a.points)}")
        else:
            tail = "1" if a.tail is None else to_string(a.tail)
            parts.append(f"ray(c={a.center}, r={a.radius!r}, k0={a.start_index}, tail={tail}, L={a.limit!r})")
    flags = "".join([" hull" if c.hull else "", " closed" if c.closed else ""])
    return "{" + " u ".join(parts) + "}" + flags


def check_properties(generator_seed: int = 0, n_cases: int = 500) -> PropertyReport:
    """Check the measure axioms on seeded random descriptors.

    Each case draws C and an extra piece E, forms D = C u E (so C is a subset
    of D by construction) and checks monotonicity, union-max, closure and
    hull invariance, the diameter bound on atoms, and
    chi_phi <= ||phi|| chi for the shift and a diagonal operator.
    """
    if n_cases < 1:
        raise ValueError("n_cases must be >= 1")
    rng = np.random.default_rng(generator_seed)
    report = PropertyReport(n_cases)
    diagonals = [Diagonal(s, lim) for s, lim in DIAGONAL_LIBRARY]
    slack = 1e-12

    def check(ok: bool, label: str, case: int, detail: str):
        report.checks_run += 1
        if not ok:
            report.violations.append(f"case {case}: {label}: {detail}")

    for case in range(n_cases):
        C = random_descriptor(rng)
        E = random_descriptor(rng)
        D = C.union(E)
        chi_c, chi_e, chi_d = kuratowski(C), kuratowski(E), kuratowski(D)
        desc = f"C={describe(C)} E={describe(E)}"

        check(chi_c >= 0, "nonnegativity", case, f"chi(C)={chi_c!r} {desc}")
        all_finite = all(isinstance(a, FinitePoints) for a in C.atoms)
        check((chi_c == 0) == all_finite, "zero exactly on compact atoms", case, f"chi(C)={chi_c!r} {desc}")
        check(chi_c <= chi_d, "monotonicity (3)", case, f"chi(C)={chi_c!r} > chi(D)={chi_d!r} {desc}")
        check(chi_d == max(chi_c, chi_e), "union-max (4)", case,
              f"chi(CuE)={chi_d!r} vs max={max(chi_c, chi_e)!r} {desc}")
        check(kuratowski(replace(C, closed=True)) == chi_c, "closure (5)", case, desc)
        check(kuratowski(replace(C, hull=True)) == chi_c, "hull (6)", case, desc)
        check(kuratowski(replace(D, hull=True, closed=True)) == chi_d, "hull+closure", case, desc)

        for atom in C.atoms:
            diam = atom_diameter(atom)
            val = atom_measure(atom)
            check(val <= diam * (1 + slack), "diameter bound (1)", case,
                  f"chi={val!r} > diam={diam!r} {desc}")

        ops = [RightShift(), diagonals[int(rng.integers(len(diagonals)))]]
        for phi in ops:
            lhs = chi_phi(C, phi)
            rhs = operator_norm(phi) * chi_c
            check(lhs <= rhs * (1 + slack), f"chi_phi <= ||phi|| chi ({type(phi).__name__})", case,
                  f"{lhs!r} > {rhs!r} {desc}")
        check(chi_phi(C, RightShift()) == chi_c, "shift preserves chi", case, desc)

    return report
