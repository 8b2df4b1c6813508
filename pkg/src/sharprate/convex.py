"""Convex (or difference-of-convex) functions with atomic second derivative.

A :class:`ConvexSpec` stores

    Psi(x) = alpha + beta * x + sum_i w_i |x - a_i|

so that the left derivative is ``beta + sum_i w_i sgn_(x - a_i)`` with
``sgn_(0) = -1``.  In the default convex mode all weights are non-negative;
``signed=True`` allows negative weights (bounded-variation integrands).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .models import ParameterError

__all__ = [
    "ConsistencyError",
    "ConvexSpec",
    "psi",
    "psi_prime_left",
    "convexity_gap",
    "positive_part",
    "absolute_value",
    "spec_from_dict",
]


class ConsistencyError(ArithmeticError):
    """Two algebraically equal representations disagree numerically."""


@dataclass(frozen=True)
class ConvexSpec:
    alpha: float = 0.0
    beta: float = 0.0
    atoms: tuple[tuple[float, float], ...] = ()
    signed: bool = False

    def __post_init__(self):
        merged: dict[float, float] = {}
        for level, weight in self.atoms:
            level, weight = float(level), float(weight)
            if not (math.isfinite(level) and math.isfinite(weight)):
                raise ParameterError("atoms", "levels and weights must be finite")
            merged[level] = merged.get(level, 0.0) + weight
        atoms = tuple(sorted(merged.items()))
        if not self.signed and any(w < 0.0 for _, w in atoms):
            raise ParameterError("atoms", "negative weight in convex mode; set signed=true")
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "beta", float(self.beta))

    @property
    def levels(self) -> np.ndarray:
        return np.array([a for a, _ in self.atoms], dtype=float)

    @property
    def weights(self) -> np.ndarray:
        return np.array([w for _, w in self.atoms], dtype=float)

    @property
    def total_phi_mass(self) -> float:
        return math.fsum(abs(w) * math.exp(-0.5 * a * a) / math.sqrt(2.0 * math.pi) for a, w in self.atoms)

    @property
    def is_convex(self) -> bool:
        return all(w >= 0.0 for _, w in self.atoms)

    def scaled(self, c: float) -> "ConvexSpec":
        return ConvexSpec(c * self.alpha, c * self.beta, tuple((a, c * w) for a, w in self.atoms), self.signed)

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "beta": self.beta, "atoms": [[a, w] for a, w in self.atoms], "signed": self.signed}


def positive_part(level: float = 0.0) -> ConvexSpec:
    """(x - level)^+ = (x - level)/2 + |x - level|/2."""
    return ConvexSpec(alpha=-0.5 * level, beta=0.5, atoms=((level, 0.5),))


def absolute_value(level: float = 0.0, weight: float = 1.0) -> ConvexSpec:
    return ConvexSpec(atoms=((level, weight),))


def psi(spec: ConvexSpec, x):
    x = np.asarray(x, dtype=float)
    out = spec.alpha + spec.beta * x
    for a, w in spec.atoms:
        out = out + w * np.abs(x - a)
    return out


def psi_prime_left(spec: ConvexSpec, x):
    x = np.asarray(x, dtype=float)
    out = np.full_like(x, spec.beta)
    for a, w in spec.atoms:
        out = out + w * np.where(x > a, 1.0, -1.0)
    return out


def _gap_direct(spec, x, y):
    return psi(spec, x) - psi(spec, y) - psi_prime_left(spec, y) * (x - y)


def _gap_atoms(spec, x, y):
    out = np.zeros(np.broadcast(x, y).shape)
    for a, w in spec.atoms:
        out = out + 2.0 * w * (np.maximum(x - a, 0.0) - np.maximum(y - a, 0.0) - np.where(y > a, x - y, 0.0))
    return out


def convexity_gap(spec: ConvexSpec, x, y, *, tol: float = 1e-12):
    """Psi(x) - Psi(y) - Psi'_-(y)(x - y) in its atom-sum form.

    The direct form is evaluated as well and the two must agree to ``tol``
    (scaled by the magnitude of the terms involved).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    atom_form = _gap_atoms(spec, x, y)
    direct = _gap_direct(spec, x, y)
    scale = 1.0 + np.abs(psi(spec, x)) + np.abs(psi(spec, y)) + np.abs(psi_prime_left(spec, y) * (x - y))
    bad = np.abs(direct - atom_form) > tol * scale
    if np.any(bad):
        worst = float(np.max(np.abs(direct - atom_form)))
        raise ConsistencyError(f"convexity gap representations differ by {worst:.3e}")
    return atom_form if atom_form.ndim else float(atom_form)


def _atom_list(raw) -> Iterable[tuple[float, float]]:
    if not isinstance(raw, list):
        raise ParameterError("atoms", "must be a list of [level, weight] pairs")
    for item in raw:
        if not (isinstance(item, (list, tuple)) and len(item) == 2):
            raise ParameterError("atoms", f"bad atom {item!r}; expected [level, weight]")
        yield float(item[0]), float(item[1])


def spec_from_dict(block: dict) -> ConvexSpec:
    """Parse the ``{"alpha", "beta", "atoms", "signed"}`` JSON block."""
    if not isinstance(block, dict):
        raise ParameterError("spec", "must be an object")
    unknown = block.keys() - {"alpha", "beta", "atoms", "signed"}
    if unknown:
        raise ParameterError("spec", f"unknown keys {sorted(unknown)}")
    try:
        alpha = float(block.get("alpha", 0.0))
        beta = float(block.get("beta", 0.0))
    except (TypeError, ValueError):
        raise ParameterError("spec", "alpha and beta must be numbers") from None
    signed = block.get("signed", False)
    if not isinstance(signed, bool):
        raise ParameterError("signed", "must be true or false")
    try:
        atoms = tuple(_atom_list(block.get("atoms", [])))
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ParameterError):
            raise
        raise ParameterError("atoms", "levels and weights must be numbers") from None
    return ConvexSpec(alpha, beta, atoms, signed)
