"""Canonical desk-scale experiments shared by the CLI and the test suite.

The standard pipeline lives on ``[-8, 8]`` and feeds a two-bump integrable
datum (peaks 12 and 4, so every level in {1, 2, 4, 8, 16} genuinely
truncates) into the quadratic-growth trap ``V = 1 + x^2``.
"""

from __future__ import annotations

import numpy as np

from .asymptotic import ExponentP
from .grid import GridFunction, GridSpec, sample
from .pipeline import SchemeConfig
from .potentials import Potential, polynomial_trap
from .solver import Problem

__all__ = [
    "two_bump",
    "two_bump_datum",
    "standard_grid",
    "standard_potential",
    "standard_scheme_config",
    "standard_problem_factory",
    "bump",
    "manufactured_p2_solution",
    "manufactured_p2_datum",
    "manufactured_p4_datum",
]


def two_bump(x):
    """Integrable 1D datum with peaks 12 (at -2.5) and 4 (at +3)."""
    return 12.0 * np.exp(-(((x + 2.5) / 0.4) ** 2)) + 4.0 * np.exp(
        -(((x - 3.0) / 0.6) ** 2)
    )


def bump(center: float, width: float, height: float):
    def f(x):
        return height * np.exp(-(((x - center) / width) ** 2))

    return f


def standard_grid(m: int = 257, L: float = 8.0) -> GridSpec:
    return GridSpec(n=1, L=L, m=m)


def standard_potential() -> Potential:
    return polynomial_trap(gamma=2.0)


def two_bump_datum(spec: GridSpec) -> GridFunction:
    return sample(spec, two_bump)


def standard_scheme_config(
    k_list=(1.0, 2.0, 4.0, 8.0, 16.0),
    t_grid=(0.1, 0.5, 1.0, 2.0, 5.0),
    R_grid=(2.0, 4.0, 6.0),
    alpha_grid=(0.5, 1.0, 2.0),
    tol=0.05,
    **kwargs,
) -> SchemeConfig:
    return SchemeConfig(
        k_list=tuple(k_list),
        t_grid=tuple(t_grid),
        R_grid=tuple(R_grid),
        alpha_grid=tuple(alpha_grid),
        tol=tol,
        **kwargs,
    )


def manufactured_p2_solution(x):
    return np.exp(-(x**2))


def manufactured_p2_datum(x):
    """Datum whose p = 2 solution with V = 1 is exp(-x^2) on the line."""
    return (3.0 - 4.0 * x**2) * np.exp(-(x**2))


def manufactured_p4_datum(spec: GridSpec, fine_factor: int = 10) -> GridFunction:
    """p = 4 companion datum for the Gaussian profile, V = 1.

    The flux ``|u'|^2 u'`` of the closed-form profile is differentiated
    numerically on a ``fine_factor`` times finer step, then
    ``f = -(|u'|^2 u')' + |u|^2 u`` is sampled at the nodes.
    """
    x = spec.axis_coords()
    dh = spec.h / fine_factor

    def flux(y):
        du = -2.0 * y * np.exp(-(y**2))
        return np.abs(du) ** 2 * du

    dflux = (flux(x + dh) - flux(x - dh)) / (2.0 * dh)
    u = manufactured_p2_solution(x)
    return GridFunction(spec, -dflux + np.abs(u) ** 2 * u)


def standard_problem_factory(p: float, m: int = 257, L: float = 8.0):
    """(Problem, datum) builder for the standard trap + two-bump experiment."""
    spec = standard_grid(m=m, L=L)
    from .potentials import sample_potential

    V = sample_potential(standard_potential(), spec)
    f = two_bump_datum(spec)
    prob = Problem(spec=spec, p=ExponentP(p, degenerate_ok=True), V=V, f=f)
    return prob, f
