"""Truncations and the norm zoo: asymptotic F-norm and metric, energy norm,
Lp norm, weak-Lq quasi-norm, tails, superlevel measures.

The asymptotic space consists of measurable functions with
``integral(min(|u|, 1)^p) < infinity``; its translation-invariant metric is
``d(u, v) = ||min(|u - v|, 1)||_p``.  All "measures" below are quadrature
weight sums, never node counts, so every inequality stays dimensionally
consistent with :func:`pschrod.grid.integrate`.

Note: the topology of the asymptotic space is famously degenerate (trivial
dual, no local convexity).  Those are structural facts with no
finite-dimensional counterpart; they are documented here and not tested.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .grid import GridFunction, VectorField, _check_same_spec, annulus_integrate, integrate

__all__ = [
    "ExponentP",
    "EstimateReport",
    "truncate",
    "lp_norm",
    "lambda_fnorm",
    "lambda_dist",
    "x_norm",
    "weak_lq_quasinorm",
    "tail_lambda",
    "superlevel_measure",
]

#: default tolerance for checks affected by O(h) discretization error
DISCRETIZATION_TOL = 5e-2
#: default tolerance for pointwise algebraic identities
ALGEBRAIC_TOL = 1e-12


@dataclass(frozen=True)
class ExponentP:
    """Integrability exponent p >= 1.

    ``degenerate_ok=True`` asserts that p lies in the degenerate range
    p >= 2 required by the stability machinery; construction fails when the
    flag is set with p < 2.
    """

    p: float
    degenerate_ok: bool = False

    def __post_init__(self):
        if not self.p >= 1:
            raise ValueError(f"exponent p must be >= 1, got {self.p!r}")
        if self.degenerate_ok and self.p < 2:
            raise ValueError(
                f"degenerate range requires p >= 2, got p = {self.p!r}"
            )

    @property
    def conjugate(self) -> float:
        if self.p <= 1:
            raise ValueError("conjugate exponent is defined only for p > 1")
        return self.p / (self.p - 1.0)

    def __float__(self) -> float:
        return float(self.p)


def _as_p(p) -> float:
    val = float(p)
    if not val >= 1:
        raise ValueError(f"exponent p must be >= 1, got {p!r}")
    return val


@dataclass(frozen=True)
class EstimateReport:
    """LHS/RHS record of one inequality check.

    ``passed`` is equivalent to ``lhs <= rhs * (1 + tol)``; ``slack`` is
    ``rhs - lhs``.  ``context`` carries the parameters the check ran with
    (p, t, alpha, R, k, l, grid id, ...).
    """

    name: str
    lhs: float
    rhs: float
    tol: float
    context: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if not (np.isfinite(self.lhs) and np.isfinite(self.rhs)):
            raise ValueError(f"non-finite sides in report {self.name!r}")

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs

    @property
    def passed(self) -> bool:
        return self.lhs <= self.rhs * (1.0 + self.tol)

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "slack": self.slack,
            "pass": self.passed,
            "tol": self.tol,
            "context": self.context,
        }

    @staticmethod
    def from_dict(d: dict[str, Any]) -> "EstimateReport":
        return EstimateReport(
            name=d["name"], lhs=d["lhs"], rhs=d["rhs"], tol=d["tol"],
            context=dict(d.get("context", {})),
        )


def truncate(u: GridFunction, t: float) -> GridFunction:
    """Pointwise clipping ``max(-t, min(s, t))`` at level t > 0."""
    if not t > 0:
        raise ValueError(f"truncation level must be positive, got {t!r}")
    return GridFunction(u.spec, np.clip(u.values, -t, t))


def lp_norm(u: GridFunction, p) -> float:
    """Plain quadrature Lp norm ``(integral |u|^p)^(1/p)``."""
    p = _as_p(p)
    return float(integrate(_powabs(u, p))) ** (1.0 / p)


def _powabs(u: GridFunction, p: float) -> GridFunction:
    return GridFunction(u.spec, np.abs(u.values) ** p)


def lambda_fnorm(u: GridFunction, p) -> float:
    """F-norm of the asymptotic space: ``(integral min(|u|,1)^p)^(1/p)``."""
    p = _as_p(p)
    clipped = np.minimum(np.abs(u.values), 1.0) ** p
    return float(integrate(GridFunction(u.spec, clipped))) ** (1.0 / p)


def lambda_dist(u: GridFunction, v: GridFunction, p) -> float:
    """Translation-invariant metric ``d(u, v) = ||min(|u - v|, 1)||_p``."""
    _check_same_spec(u, v)
    return lambda_fnorm(u - v, p)


def x_norm(u: GridFunction, grad: VectorField, V: GridFunction, p) -> float:
    """Energy norm ``(integral |grad|^p + integral V |u|^p)^(1/p)``.

    Requires V >= 1 everywhere; then the energy norm dominates the Lp norm.
    """
    p = _as_p(p)
    _check_same_spec(u, V)
    if grad.spec != u.spec:
        raise ValueError("gradient lives on a different grid")
    vmin = float(np.min(V.values))
    if vmin < 1.0:
        raise ValueError(f"potential must satisfy V >= 1 at every node, min is {vmin}")
    kinetic = integrate(_powabs(grad.magnitude(), p))
    weighted = integrate(GridFunction(u.spec, V.values * np.abs(u.values) ** p))
    return float(kinetic + weighted) ** (1.0 / p)


def weak_lq_quasinorm(u: GridFunction, q) -> float:
    """Weak-Lq quasi-norm ``sup_lambda lambda * |{|u| > lambda}|^(1/q)``.

    For a grid function the distribution function is a right-continuous
    step function, so the supremum is attained in the left limit at one of
    the distinct sample values v, where it equals
    ``v * measure{|u| >= v}^(1/q)``.  The sup is evaluated exactly over
    that finite set; no lambda grid is involved.
    """
    q = _as_p(q)
    absvals = np.abs(u.values)
    w = u.spec.weights()
    order = np.argsort(absvals)
    sorted_vals = absvals[order]
    # weight of {|u| >= v}: suffix sums over the sorted samples
    suffix = np.cumsum(w[order][::-1])[::-1]
    vals, first_idx = np.unique(sorted_vals, return_index=True)
    nz = vals > 0
    if not np.any(nz):
        return 0.0
    candidates = vals[nz] * suffix[first_idx[nz]] ** (1.0 / q)
    return float(np.max(candidates))


def tail_lambda(u: GridFunction, R: float, p) -> float:
    """Tail of the F-norm mass: ``integral_{|x| > R} min(|u|, 1)^p``."""
    p = _as_p(p)
    if R < 0:
        raise ValueError(f"radius must be nonnegative, got {R!r}")
    clipped = np.minimum(np.abs(u.values), 1.0) ** p
    return annulus_integrate(GridFunction(u.spec, clipped), R)


def superlevel_measure(u: GridFunction, K: float) -> float:
    """Quadrature measure of the superlevel set ``{|u| > K}``, K > 0."""
    if not K > 0:
        raise ValueError(f"level must be positive, got {K!r}")
    mask = np.abs(u.values) > K
    return float(np.sum(u.spec.weights()[mask]))
