"""Problem-spec files: JSON schema, loading, and conversion to library objects."""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import jsonschema
import numpy as np

from .exprparse import ParseError, parse
from .gridfn import SeqVec
from .hammerstein import EvaluationError, ProblemSpec, state_vars
from .mnc import BasisRay, FinitePoints, SetDescriptor
from .phi_ops import Diagonal, Lifted, RightShift, SingularOperatorError

SEED_ENV = "PHIFIX_SEED"

_expr_list = {"oneOf": [{"type": "string"}, {"type": "array", "items": {"type": "string"}, "minItems": 1}]}
_matrix = {"type": "array", "minItems": 1, "items": {"type": "array", "minItems": 1, "items": {"type": "number"}}}
_seqvec = {
    "type": "object",
    "propertyNames": {"pattern": "^[1-9][0-9]*$"},
    "additionalProperties": {"type": "number"},
}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "problem": {
            "type": "object",
            "additionalProperties": False,
            "required": ["grid", "kernel", "f", "h", "omega"],
            "properties": {
                "dim": {"type": "integer", "minimum": 1},
                "grid": {"type": "integer", "minimum": 1, "maximum": 100000},
                "kernel": {
                    "oneOf": [
                        {"type": "string"},
                        {"type": "object", "additionalProperties": False, "required": ["table"],
                         "properties": {"table": _matrix}},
                    ]
                },
                "f": _expr_list,
                "h": _expr_list,
                "omega": {"type": "string"},
                "exact": _expr_list,
                "quadrature": {"enum": ["trapezoid", "simpson"]},
                "vector_norm": {"enum": ["max", "euclid", "l1"]},
                "tol": {"type": "number", "exclusiveMinimum": 0},
                "max_iter": {"type": "integer", "minimum": 1},
                "damping": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "alpha_samples": {"type": "integer", "minimum": 1},
                "growth_samples": {"type": "integer", "minimum": 1},
                "seed": {"type": "integer", "minimum": 0},
                "R_override": {"oneOf": [{"type": "null"}, {"type": "number", "exclusiveMinimum": 0}]},
            },
        },
        "phi": {
            "type": "object",
            "additionalProperties": False,
            "required": ["variant"],
            "properties": {"variant": {"enum": ["lifted", "matrix", "identity"]}, "matrix": _matrix},
        },
        "mnc": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "phi": {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["variant"],
                    "properties": {
                        "variant": {"enum": ["right_shift", "diagonal"]},
                        "symbol": {"type": "string"},
                        "limit": {"type": "number", "exclusiveMinimum": 0},
                    },
                },
                "sets": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "additionalProperties": False,
                        "required": ["atoms"],
                        "properties": {
                            "name": {"type": "string"},
                            "hull": {"type": "boolean"},
                            "closed": {"type": "boolean"},
                            "atoms": {
                                "type": "array",
                                "minItems": 1,
                                "items": {
                                    "oneOf": [
                                        {"type": "object", "additionalProperties": False, "required": ["points"],
                                         "properties": {"points": {"type": "array", "minItems": 1, "items": _seqvec}}},
                                        {"type": "object", "additionalProperties": False, "required": ["ray"],
                                         "properties": {"ray": {
                                             "type": "object",
                                             "additionalProperties": False,
                                             "required": ["radius"],
                                             "properties": {
                                                 "center": _seqvec,
                                                 "radius": {"type": "number", "exclusiveMinimum": 0},
                                                 "start": {"type": "integer", "minimum": 1},
                                                 "tail": {"type": "string"},
                                                 "limit": {"type": "number", "exclusiveMinimum": 0},
                                             },
                                         }}},
                                    ]
                                },
                            },
                        },
                    },
                },
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"dir": {"type": "string"}, "report": {"type": "string"}, "csv": {"type": "string"}},
        },
    },
}


class SpecInputError(ValueError):
    """Malformed spec file: JSON syntax, schema, expression syntax or ranges."""


@dataclass
class LoadedSpec:
    path: Path
    raw_bytes: bytes
    data: dict

    @property
    def sha256(self) -> str:
        return hashlib.sha256(self.raw_bytes).hexdigest()


def load(path) -> LoadedSpec:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise SpecInputError(f"{path}: cannot read spec file: {exc.strerror}") from None
    try:
        data = json.loads(raw)
    except UnicodeDecodeError as exc:
        raise SpecInputError(f"{path}: not UTF-8 text (byte {exc.start})") from None
    except json.JSONDecodeError as exc:
        raise SpecInputError(f"{path}: invalid JSON at byte {exc.pos} (line {exc.lineno}, column {exc.colno}): {exc.msg}") from None
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(data), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        where = ".".join(str(p) for p in e.absolute_path) or "<root>"
        raise SpecInputError(f"{path}: schema error at {where}: {e.message}")
    return LoadedSpec(path, raw, data)


def effective_seed(spec_seed: int) -> int:
    env = os.environ.get(SEED_ENV)
    if env is None or env == "":
        return spec_seed
    try:
        seed = int(env)
    except ValueError:
        raise SpecInputError(f"{SEED_ENV}={env!r} is not an integer") from None
    if seed < 0:
        raise SpecInputError(f"{SEED_ENV} must be nonnegative")
    return seed


def _as_list(v):
    return [v] if isinstance(v, str) else list(v)


def _parse_field(text: str, allowed, where: str):
    try:
        return parse(text, allowed)
    except ParseError as exc:
        raise SpecInputError(f"{where}: {exc}") from None


def build_problem(loaded: LoadedSpec) -> ProblemSpec:
    data = loaded.data
    if "problem" not in data:
        raise SpecInputError(f"{loaded.path}: no 'problem' block")
    p = data["problem"]
    dim = p.get("dim", 1)
    n = p["grid"]
    ys = ("s",) + state_vars(dim)
    f = [_parse_field(e, ys, f"problem.f[{i}]") for i, e in enumerate(_as_list(p["f"]))]
    h = [_parse_field(e, ("t",), f"problem.h[{i}]") for i, e in enumerate(_as_list(p["h"]))]
    omega = _parse_field(p["omega"], ("u",), "problem.omega")
    kernel = p["kernel"]
    kernel = _parse_field(kernel, ("t", "s"), "problem.kernel") if isinstance(kernel, str) else kernel["table"]
    vector_norm = p.get("vector_norm", "max")
    phi_block = data.get("phi", {"variant": "identity"})
    try:
        if phi_block["variant"] == "identity":
            phi = Lifted(np.eye(dim), vector_norm)
        else:
            if "matrix" not in phi_block:
                raise SpecInputError("phi: the lifted/matrix variant needs a 'matrix'")
            phi = Lifted(np.array(phi_block["matrix"], dtype=float), vector_norm)
    except (SingularOperatorError, ValueError) as exc:
        if isinstance(exc, SpecInputError):
            raise
        raise SpecInputError(f"phi: {exc}") from None
    try:
        spec = ProblemSpec(
            dim=dim,
            n_intervals=n,
            kernel=kernel,
            f=f,
            h=h,
            omega=omega,
            phi=phi,
            quadrature=p.get("quadrature", "simpson"),
            vector_norm=vector_norm,
            tol=p.get("tol", 1e-10),
            max_iter=p.get("max_iter", 1000),
            damping=p.get("damping", 1.0),
            alpha_samples=p.get("alpha_samples", 500),
            growth_samples=p.get("growth_samples", 1000),
            seed=effective_seed(p.get("seed", 0)),
            R_override=p.get("R_override"),
        )
        # surface evaluation errors in k and h as input errors
        spec.kernel_matrix
        spec.h_grid
    except EvaluationError as exc:
        raise SpecInputError(f"problem: {exc}") from None
    except SpecInputError:
        raise
    except ValueError as exc:
        raise SpecInputError(f"problem: {exc}") from None
    return spec


def exact_solution(loaded: LoadedSpec, dim: int) -> Optional[list]:
    p = loaded.data.get("problem", {})
    if "exact" not in p:
        return None
    exprs = _as_list(p["exact"])
    if len(exprs) != dim:
        raise SpecInputError(f"problem.exact needs {dim} component(s), got {len(exprs)}")
    return [_parse_field(e, ("t",), f"problem.exact[{i}]") for i, e in enumerate(exprs)]


def _seqvec(obj: dict) -> SeqVec:
    return SeqVec({int(k): v for k, v in obj.items()})


def build_mnc(loaded: LoadedSpec):
    """Returns (phi or None, [(name, SetDescriptor)])."""
    block = loaded.data.get("mnc")
    if block is None:
        raise SpecInputError(f"{loaded.path}: no 'mnc' block")
    phi = None
    pb = block.get("phi")
    try:
        if pb is not None:
            if pb["variant"] == "right_shift":
                phi = RightShift()
            else:
                if "symbol" not in pb or "limit" not in pb:
                    raise SpecInputError("mnc.phi: the diagonal variant needs 'symbol' and 'limit'")
                phi = Diagonal(_parse_field(pb["symbol"], ("k",), "mnc.phi.symbol"), pb["limit"])
        sets = []
        for i, s in enumerate(block.get("sets", [])):
            atoms = []
            for j, a in enumerate(s["atoms"]):
                where = f"mnc.sets[{i}].atoms[{j}]"
                if "points" in a:
                    atoms.append(FinitePoints(tuple(_seqvec(p) for p in a["points"])))
                    continue
                r = a["ray"]
                tail = r.get("tail")
                if tail is not None:
                    tail = _parse_field(tail, ("k",), where + ".tail")
                try:
                    atoms.append(BasisRay(_seqvec(r.get("center", {})), r["radius"], r.get("start", 1),
                                          tail, r.get("limit")))
                except (ValueError, ArithmeticError) as exc:
                    raise SpecInputError(f"{where}: {exc}") from None
            sets.append((s.get("name", f"set{i}"),
                         SetDescriptor(tuple(atoms), s.get("hull", False), s.get("closed", False))))
    except SpecInputError:
        raise
    except (ValueError, ArithmeticError) as exc:
        raise SpecInputError(f"mnc: {exc}") from None
    return phi, sets
