"""Discrete weak energy solutions on the box with zero Dirichlet data.

The discrete energy of a nodal function v (zero on the boundary) is

    J(v) = (1/p) sum_cells h^n |G_c(v)|^p
         + (1/p) sum_nodes w_i V_i |v_i|^p
         - sum_nodes w_i f_i v_i,

where ``G_c`` is the forward-difference gradient evaluated at the cell
center (the gradient of the multilinear interpolant) and ``w_i`` are the
trapezoid node weights.  Each summand is convex and the zero-order term is
strictly convex for p >= 2 and V >= 1, so J has a unique minimizer; the
Euler-Lagrange residual returned by :func:`residual` is the exact gradient
of J with respect to interior nodal values divided by the node weight.

The minimizer is found by damped Newton with backtracking line search.
The Newton system uses a Hessian regularized at gradient level eps (the
p-Laplacian Hessian degenerates where the gradient vanishes for p > 2),
but the step direction is computed against the exact gradient of J and the
line search enforces monotone decrease of the exact J, so the iteration
converges to the minimizer of the unregularized energy and all reported
residuals are residuals of the unregularized operator.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .asymptotic import ExponentP
from .grid import GridFunction, GridSpec

__all__ = [
    "Problem",
    "SolveResult",
    "energy",
    "residual",
    "solve",
    "pflux",
    "monotonicity_lower_constant",
    "monotonicity_margin",
]


def pflux(xi: np.ndarray, p: float) -> np.ndarray:
    """The p-Laplace flux map ``xi -> |xi|^(p-2) xi``.

    ``xi`` may be scalars (any shape) or stacked vectors of shape
    ``(N, d)``; the norm is taken over the last axis in the vector case.
    """
    xi = np.asarray(xi, dtype=np.float64)
    if xi.ndim >= 2:
        norm = np.sqrt(np.sum(xi**2, axis=-1, keepdims=True))
    else:
        norm = np.abs(xi)
    return norm ** (p - 2.0) * xi


def monotonicity_lower_constant(p: float) -> float:
    """Sharp-order lower constant ``2^(2-p)`` for the flux monotonicity."""
    if p < 2:
        raise ValueError("the monotonicity constant applies to p >= 2 only")
    return 2.0 ** (2.0 - p)


def monotonicity_margin(xi, eta, p: float) -> np.ndarray:
    """``(A(xi) - A(eta)) . (xi - eta) - 2^(2-p) |xi - eta|^p`` per pair.

    Nonnegative (up to round-off) for p >= 2; works for scalar arrays and
    for vector arrays of shape ``(N, d)``.
    """
    xi = np.asarray(xi, dtype=np.float64)
    eta = np.asarray(eta, dtype=np.float64)
    diff = xi - eta
    prod = (pflux(xi, p) - pflux(eta, p)) * diff
    if xi.ndim >= 2:
        inner = np.sum(prod, axis=-1)
        dist = np.sqrt(np.sum(diff**2, axis=-1))
    else:
        inner = prod
        dist = np.abs(diff)
    return inner - monotonicity_lower_constant(p) * dist**p


@dataclass(frozen=True, eq=False)
class Problem:
    """Datum, potential and exponent for one discrete energy minimization.

    Requires p >= 2 (the stability theory behind every downstream check is
    restricted to the degenerate range) and V >= 1 at all nodes.
    """

    spec: GridSpec
    p: ExponentP
    V: GridFunction
    f: GridFunction
    eps_reg: float = None  # type: ignore[assignment]
    tol_residual: float = None  # type: ignore[assignment]
    max_iters: int = 100

    def __post_init__(self):
        p = self.p if isinstance(self.p, ExponentP) else ExponentP(float(self.p))
        if p.p < 2:
            raise ValueError(
                f"p must be >= 2 (existence and stability hold in the degenerate "
                f"range p >= 2 only), got p = {p.p}"
            )
        object.__setattr__(self, "p", ExponentP(p.p, degenerate_ok=True))
        if self.V.spec != self.spec or self.f.spec != self.spec:
            raise ValueError("V and f must live on the problem grid")
        if float(np.min(self.V.values)) < 1.0:
            raise ValueError("potential must satisfy V >= 1 at every node")
        scale = max(1.0, self.f.max_abs())
        if self.eps_reg is None:
            object.__setattr__(self, "eps_reg", 1e-8 * scale)
        elif self.eps_reg < 0:
            raise ValueError("eps_reg must be nonnegative")
        if self.tol_residual is None:
            fmax = self.f.max_abs()
            object.__setattr__(
                self, "tol_residual", 1e-8 * fmax if fmax > 0 else 1e-15
            )
        elif not self.tol_residual > 0:
            raise ValueError("tol_residual must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")


@dataclass(frozen=True, eq=False)
class SolveResult:
    """Minimizer with convergence diagnostics; boundary nodes are exactly 0."""

    u: GridFunction
    iterations: int
    residual_sup: float
    energy: float
    energy_trace: tuple[float, ...]
    converged: bool

    def diagnostics(self) -> dict:
        return {
            "iterations": self.iterations,
            "residual_sup": self.residual_sup,
            "energy": self.energy,
            "energy_trace": list(self.energy_trace),
            "converged": self.converged,
        }


# ---------------------------------------------------------------------------
# cell-centered gradient machinery


def _avg(a: np.ndarray, axis: int) -> np.ndarray:
    lo = [slice(None)] * a.ndim
    hi = [slice(None)] * a.ndim
    lo[axis] = slice(None, -1)
    hi[axis] = slice(1, None)
    return 0.5 * (a[tuple(lo)] + a[tuple(hi)])


def _cell_gradient(arr: np.ndarray, h: float) -> list[np.ndarray]:
    """Per-axis gradient at cell centers, each component shaped (m-1,)*n."""
    comps = []
    for axis in range(arr.ndim):
        d = np.diff(arr, axis=axis) / h
        for other in range(arr.ndim):
            if other != axis:
                d = _avg(d, other)
        comps.append(d)
    return comps


def _cell_gradient_adjoint(comps: list[np.ndarray], h: float, m: int) -> np.ndarray:
    """Adjoint of `_cell_gradient`: nodal accumulation of sum_c A_c . dG_c/dv."""
    n = comps[0].ndim
    out = np.zeros((m,) * n)
    denom = 2.0 ** (n - 1) * h
    for axis in range(n):
        A = comps[axis] / denom
        for corner in itertools.product((0, 1), repeat=n):
            sign = 1.0 if corner[axis] == 1 else -1.0
            sl = tuple(slice(d, d + m - 1) for d in corner)
            out[sl] += sign * A
    return out


@lru_cache(maxsize=32)
def _mesh_tables(spec: GridSpec):
    """Static index tables: interior ids, per-cell corner node ids, D matrix."""
    m, n = spec.m, spec.n
    interior = ~spec.boundary_mask()
    interior_id = np.full(spec.num_nodes, -1, dtype=np.int64)
    interior_id[interior] = np.arange(int(interior.sum()))

    corners = list(itertools.product((0, 1), repeat=n))
    cell_axes = np.meshgrid(*([np.arange(m - 1)] * n), indexing="ij")
    cell_multi = np.stack([a.ravel() for a in cell_axes], axis=-1)  # (ncells, n)
    corner_ids = np.stack(
        [
            np.ravel_multi_index(tuple((cell_multi + np.array(c)).T), (m,) * n)
            for c in corners
        ],
        axis=-1,
    )  # (ncells, 2^n)

    denom = 2.0 ** (n - 1) * spec.h
    D = np.array(
        [[(1.0 if c[a] == 1 else -1.0) / denom for c in corners] for a in range(n)]
    )  # (n, 2^n)
    return interior, interior_id, corner_ids, D


def _energy_arrays(v: np.ndarray, prob: Problem) -> float:
    spec = prob.spec
    p = prob.p.p
    comps = _cell_gradient(v.reshape(spec.shape), spec.h)
    s = np.zeros_like(comps[0])
    for c in comps:
        s += c * c
    kinetic = spec.h**spec.n / p * float(np.sum(s ** (p / 2.0)))
    w = spec.weights()
    zero_order = float(np.dot(w, prob.V.values * np.abs(v) ** p)) / p
    source = float(np.dot(w, prob.f.values * v))
    return kinetic + zero_order - source


def _gradient_arrays(v: np.ndarray, prob: Problem) -> np.ndarray:
    """Exact gradient of J with respect to all nodal values (full array)."""
    spec = prob.spec
    p = prob.p.p
    comps = _cell_gradient(v.reshape(spec.shape), spec.h)
    s = np.zeros_like(comps[0])
    for c in comps:
        s += c * c
    weight = s ** ((p - 2.0) / 2.0) if p != 2.0 else np.ones_like(s)
    flux = [weight * c for c in comps]
    g = spec.h**spec.n * _cell_gradient_adjoint(flux, spec.h, spec.m).ravel()
    w = spec.weights()
    g += w * prob.V.values * np.abs(v) ** (p - 2.0) * v
    g -= w * prob.f.values
    return g


def _hessian_interior(v: np.ndarray, prob: Problem, eps: float) -> sp.csr_matrix:
    spec = prob.spec
    p = prob.p.p
    n, m = spec.n, spec.m
    interior, interior_id, corner_ids, D = _mesh_tables(spec)

    comps = _cell_gradient(v.reshape(spec.shape), spec.h)
    G = np.stack([c.ravel() for c in comps], axis=-1)  # (ncells, n)
    s = np.sum(G * G, axis=-1) + eps * eps
    w1 = s ** ((p - 2.0) / 2.0)
    K = w1[:, None, None] * np.eye(n)[None, :, :]
    if p != 2.0:
        w2 = (p - 2.0) * s ** ((p - 4.0) / 2.0)
        K = K + w2[:, None, None] * (G[:, :, None] * G[:, None, :])
    local = spec.h**spec.n * np.einsum("ac,kab,bd->kcd", D, K, D)

    ncorner = corner_ids.shape[1]
    rows = np.broadcast_to(corner_ids[:, :, None], local.shape).ravel()
    cols = np.broadcast_to(corner_ids[:, None, :], local.shape).ravel()
    ri = interior_id[rows]
    ci = interior_id[cols]
    keep = (ri >= 0) & (ci >= 0)

    nodal_diag = (
        spec.weights()
        * prob.V.values
        * (p - 1.0)
        * (v * v + eps * eps) ** ((p - 2.0) / 2.0)
    )
    ndof = int(interior.sum())
    diag_idx = np.arange(ndof)

    H = sp.coo_matrix(
        (
            np.concatenate([local.ravel()[keep], nodal_diag[interior]]),
            (
                np.concatenate([ri[keep], diag_idx]),
                np.concatenate([ci[keep], diag_idx]),
            ),
        ),
        shape=(ndof, ndof),
    )
    return H.tocsr()


# ---------------------------------------------------------------------------
# public operations


def _require_zero_boundary(v: GridFunction) -> None:
    if np.any(v.values[v.spec.boundary_mask()] != 0.0):
        raise ValueError("candidate must vanish on the box boundary")


def energy(v: GridFunction, prob: Problem) -> float:
    """Discrete energy J(v); v must vanish on the boundary."""
    if v.spec != prob.spec:
        raise ValueError("candidate lives on a different grid")
    _require_zero_boundary(v)
    return _energy_arrays(v.values, prob)


def residual(v: GridFunction, prob: Problem) -> GridFunction:
    """Euler-Lagrange residual of the unregularized energy.

    Exact gradient of J with respect to interior nodal values divided by
    the node quadrature weight (the discrete weak form tested against each
    interior nodal basis function); boundary entries are zero.
    """
    if v.spec != prob.spec:
        raise ValueError("candidate lives on a different grid")
    _require_zero_boundary(v)
    g = _gradient_arrays(v.values, prob)
    r = g / prob.spec.weights()
    r[prob.spec.boundary_mask()] = 0.0
    return GridFunction(prob.spec, r)


def _linear_warm_start(prob: Problem) -> np.ndarray:
    """Solve the p = 2 companion problem as a starting iterate for p > 2."""
    spec = prob.spec
    interior, interior_id, _, _ = _mesh_tables(spec)
    v0 = np.zeros(spec.num_nodes)
    H = _hessian_interior(v0, _companion_p2(prob), 0.0)
    rhs = (spec.weights() * prob.f.values)[interior]
    v0[interior] = spla.spsolve(H, rhs)
    return v0


def _companion_p2(prob: Problem) -> Problem:
    return Problem(
        spec=prob.spec,
        p=ExponentP(2.0, degenerate_ok=True),
        V=prob.V,
        f=prob.f,
        eps_reg=0.0,
        tol_residual=prob.tol_residual,
        max_iters=prob.max_iters,
    )


_ARMIJO = 1e-4
_MAX_BACKTRACK = 60
_POLISH_STEPS = 6


def solve(prob: Problem, u0: GridFunction | None = None) -> SolveResult:
    """Minimize the discrete energy by damped Newton with line search.

    Deterministic for fixed inputs.  Stops once the sup-norm of the
    unregularized residual drops below ``prob.tol_residual``, then keeps
    taking Newton steps while each one still improves the residual by a
    factor of ten (at most a handful), so the returned iterate sits
    essentially on the minimizer.  When the iteration cap is hit first, the
    best iterate is returned with ``converged=False``; it is never a
    silent success.
    """
    spec = prob.spec
    interior, _, _, _ = _mesh_tables(spec)
    boundary = spec.boundary_mask()

    if u0 is not None:
        if u0.spec != spec:
            raise ValueError("initial iterate lives on a different grid")
        v = u0.values.copy()
        v[boundary] = 0.0
    elif prob.p.p == 2.0:
        v = np.zeros(spec.num_nodes)
    else:
        v = _linear_warm_start(prob)

    eps = max(prob.eps_reg, 1e-30)
    trace = [_energy_arrays(v, prob)]
    iterations = 0
    polish_left = _POLISH_STEPS
    polish_prev = np.inf
    converged = False

    while True:
        g = _gradient_arrays(v, prob)
        g[boundary] = 0.0
        rsup = float(np.max(np.abs(g / spec.weights()))) if g.size else 0.0
        if rsup <= prob.tol_residual:
            converged = True
            # polish: keep stepping while Newton still gains a decade, so the
            # returned iterate sits on the minimizer, not just inside tol
            if rsup == 0.0 or polish_left == 0 or rsup > polish_prev / 10.0:
                break
            polish_prev = rsup
            polish_left -= 1
        if iterations >= prob.max_iters:
            break

        H = _hessian_interior(v, prob, eps)
        g_int = g[interior]
        d_int = spla.spsolve(H, -g_int)
        step = np.zeros_like(v)
        step[interior] = d_int
        slope = float(np.dot(g_int, d_int))
        if not np.isfinite(slope) or slope >= 0.0:
            step[interior] = -g_int
            slope = -float(np.dot(g_int, g_int))

        J0 = trace[-1]
        # J is evaluated to roughly eps*|J|; steps deep in the quadratic
        # basin decrease it by less than that, so allow the noise floor
        noise = 4.0 * np.finfo(np.float64).eps * (abs(J0) + 1.0e-300)
        s = 1.0
        accepted = False
        for _ in range(_MAX_BACKTRACK):
            J_new = _energy_arrays(v + s * step, prob)
            if J_new <= J0 + _ARMIJO * s * slope + noise:
                accepted = True
                break
            s *= 0.5
        if not accepted:
            # convex J and a descent direction: only round-off can land here
            break
        v = v + s * step
        trace.append(min(J_new, J0))
        iterations += 1

    v[boundary] = 0.0
    u = GridFunction(spec, v)
    r_final = residual(u, prob)
    return SolveResult(
        u=u,
        iterations=iterations,
        residual_sup=r_final.max_abs(),
        energy=trace[-1],
        energy_trace=tuple(trace),
        converged=converged,
    )
