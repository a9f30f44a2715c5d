"""Datum regularization, the solve sequence, and every estimate check.

Given an integrable datum f, the scheme solves the problem for the
regularized data ``f_k = T_k(f) . indicator(|x| < k)`` over an increasing
list of levels k and verifies, for each solution and each configured
truncation level t, radius R and pair k < l:

* energy estimate      ``||T_t(u_k)||_X^p <= t ||f_k||_1``
* tail bound           ``tail(T_t(u_k), R) <= |E_R| + t ||f_k||_1 / (kappa R^gamma)``
* stability            ``||T_t(u_k - u_l)||_X^p <= 2^(p-2) t ||f_k - f_l||_1``
* superlevel bound     ``|{|u_k| > m}| <= m^(1-p) ||f||_1``
* localized identity   entropy-type identity with test perturbation
                       ``T_t(T_a(u) - phi) - T_t(T_a(u))``

Truncation gradients use chain-rule masking on the strict set
``{|u| < t}`` (ties get mask zero).  The infinite limit object is replaced
by the highest-k solve; all convergence records against it carry the
caveat "finite-sequence surrogate".
"""

from __future__ import annotations

import csv
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable

import numpy as np

from .asymptotic import (
    EstimateReport,
    ExponentP,
    lambda_dist,
    superlevel_measure,
    tail_lambda,
    truncate,
)
from .grid import GridFunction, VectorField, gradient, integrate, save_grid_function
from .potentials import Potential, bad_set_measure, sample_potential
from .solver import Problem, SolveResult, pflux, solve

__all__ = [
    "SchemeConfig",
    "SchemeResult",
    "regularize_datum",
    "mollify_datum",
    "masked_truncation_gradient",
    "truncation_xnorm_p",
    "check_energy_estimate",
    "check_tail_bound",
    "check_stability",
    "check_superlevel_bound",
    "truncation_perturbation",
    "identity_defect",
    "check_localized_identity",
    "estimate_identity_budget",
    "distributional_residual",
    "run_scheme",
    "save_scheme_result",
]

FINITE_SEQUENCE_CAVEAT = "finite-sequence surrogate"


def regularize_datum(f: GridFunction, k: float) -> GridFunction:
    """Canonical regularization ``T_k(f) . indicator(|x| < k)``.

    The result is bounded by k, supported in the open ball of radius k
    (node-masked) and has no more L1 mass than f.
    """
    if not k > 0:
        raise ValueError(f"regularization level must be positive, got {k!r}")
    clipped = np.clip(f.values, -k, k)
    clipped[f.spec.radii() >= k] = 0.0
    return GridFunction(f.spec, clipped)


def mollify_datum(f: GridFunction, k: float, width0: float = 0.5) -> GridFunction:
    """Alternative regularization: canonical step followed by smoothing.

    Convolves ``regularize_datum(f, k)`` with a normalized triangular
    kernel of physical half-width ``width0 / k**2``.  The width collapses
    below the grid spacing as k grows (the kernel degenerates to the
    identity), so the scheme converges to the same limit as the canonical
    one while its early members genuinely differ.
    """
    fk = regularize_datum(f, k)
    delta = width0 / float(k) ** 2
    h = f.spec.h
    taps = int(np.floor(delta / h))
    if taps < 1:
        return fk
    offsets = np.arange(-taps, taps + 1)
    kernel = 1.0 - np.abs(offsets) * h / delta
    kernel = kernel / kernel.sum()
    arr = fk.reshaped()
    for axis in range(f.spec.n):
        arr = np.apply_along_axis(
            lambda row: np.convolve(row, kernel, mode="same"), axis, arr
        )
    return GridFunction(f.spec, arr.ravel())


def masked_truncation_gradient(u: GridFunction, level: float) -> VectorField:
    """Chain-rule gradient of ``T_level(u)``: grad u masked to ``{|u| < level}``.

    Strict inequality; nodes with ``|u| = level`` get mask zero.
    """
    mask = np.abs(u.values) < level
    return gradient(u).masked(mask)


def truncation_xnorm_p(u: GridFunction, V: GridFunction, p: float, t: float) -> float:
    """p-th power of the energy norm of T_t(u) with chain-rule masking."""
    grad = masked_truncation_gradient(u, t)
    mag = grad.magnitude()
    kinetic = integrate(GridFunction(u.spec, mag.values**p))
    tt = truncate(u, t)
    weighted = integrate(GridFunction(u.spec, V.values * np.abs(tt.values) ** p))
    return kinetic + weighted


def _base_context(prob: Problem, **extra) -> dict[str, Any]:
    ctx = {"p": prob.p.p, "grid": prob.spec.describe()}
    ctx.update(extra)
    return ctx


def check_energy_estimate(
    res: SolveResult, prob: Problem, t: float, f_ref_l1: float, tol: float = 0.05
) -> EstimateReport:
    """``||T_t(u)||_X^p <= t * f_ref_l1`` for the solved u."""
    if not t > 0:
        raise ValueError(f"truncation level must be positive, got {t!r}")
    lhs = truncation_xnorm_p(res.u, prob.V, prob.p.p, t)
    rhs = t * f_ref_l1
    return EstimateReport(
        "energy_estimate", lhs, rhs, tol, _base_context(prob, t=t, f_l1=f_ref_l1)
    )


def check_tail_bound(
    res: SolveResult, prob: Problem, V: Potential, t: float, R: float,
    tol: float = 0.05,
) -> EstimateReport:
    """``tail(T_t u, R) <= |E_R| + t ||f||_1 / (kappa R^gamma)``."""
    if not 0 < R < prob.spec.L * np.sqrt(prob.spec.n):
        raise ValueError(f"radius R = {R!r} must lie inside the box")
    f_l1 = integrate(prob.f.abs())
    lhs = tail_lambda(truncate(res.u, t), R, prob.p.p)
    bad = bad_set_measure(V, prob.spec, R)
    rhs = bad + t * f_l1 / (V.kappa * R**V.gamma)
    return EstimateReport(
        "tail_bound", lhs, rhs, tol,
        _base_context(prob, t=t, R=R, kappa=V.kappa, gamma=V.gamma,
                      bad_measure=bad, f_l1=f_l1),
    )


def check_stability(
    res_k: SolveResult, res_l: SolveResult, f_k: GridFunction, f_l: GridFunction,
    prob: Problem, t: float, tol: float = 0.05, cp_scale: float = 1.0,
) -> EstimateReport:
    """``||T_t(u_k - u_l)||_X^p <= C_p t ||f_k - f_l||_1`` with ``C_p = 2^(p-2)``.

    ``cp_scale`` rescales the constant; it exists so a deliberately wrong
    constant can be shown to fail (debug hook, default 1).
    """
    p = prob.p.p
    if p < 2:
        raise ValueError("the stability estimate requires p >= 2")
    if not t > 0:
        raise ValueError(f"truncation level must be positive, got {t!r}")
    diff = res_k.u - res_l.u
    lhs = truncation_xnorm_p(diff, prob.V, p, t)
    c_p = 2.0 ** (p - 2.0) * cp_scale
    rhs = c_p * t * integrate((f_k - f_l).abs())
    return EstimateReport(
        "stability", lhs, rhs, tol, _base_context(prob, t=t, C_p=c_p),
    )


def check_superlevel_bound(
    res: SolveResult, prob: Problem, level: float, f_ref_l1: float,
    tol: float = 0.05,
) -> EstimateReport:
    """``|{|u| > m}| <= m^(1-p) ||f||_1`` for the solved u."""
    lhs = superlevel_measure(res.u, level)
    rhs = level ** (1.0 - prob.p.p) * f_ref_l1
    return EstimateReport(
        "superlevel_bound", lhs, rhs, tol,
        _base_context(prob, m=level, f_l1=f_ref_l1),
    )


def truncation_perturbation(
    u: GridFunction, phi: GridFunction, alpha: float, t: float
) -> GridFunction:
    """Entropy-type test perturbation ``T_t(T_alpha(u) - phi) - T_t(T_alpha(u))``.

    Vanishes wherever phi does, so its support is contained in supp(phi)
    exactly at node level.
    """
    ta = np.clip(u.values, -alpha, alpha)
    vals = np.clip(ta - phi.values, -t, t) - np.clip(ta, -t, t)
    return GridFunction(u.spec, vals)


def _require_compact_support(phi: GridFunction, who: str) -> None:
    if np.any(phi.values[phi.spec.boundary_mask()] != 0.0):
        raise ValueError(f"{who} must be compactly supported inside the box")


def identity_defect(
    res: SolveResult, prob: Problem, phi: GridFunction, alpha: float, t: float
) -> tuple[float, bool]:
    """Residual of the localized identity and the node-level support check.

    Returns ``(defect, supp_ok)`` where ``defect`` is the absolute gap in

        int |grad T_a u|^(p-2) grad T_a u . grad Phi
        + int V |T_a u|^(p-2) T_a u Phi  =  int f Phi

    with ``Phi = truncation_perturbation(u, phi, alpha, t)``, and
    ``supp_ok`` confirms supp(Phi) is contained in supp(phi) node by node.
    Requires ``alpha > t + max|phi|``.
    """
    _require_compact_support(phi, "phi")
    if not t > 0:
        raise ValueError(f"truncation level must be positive, got {t!r}")
    if not alpha > t + phi.max_abs():
        raise ValueError(
            f"alpha must exceed t + max|phi| = {t + phi.max_abs():g}, got {alpha!r}"
        )
    p = prob.p.p
    u = res.u
    phi_vals = phi.values
    big_phi = truncation_perturbation(u, phi, alpha, t)
    supp_ok = bool(np.all(big_phi.values[phi_vals == 0.0] == 0.0))

    grad_ta = masked_truncation_gradient(u, alpha)
    grad_big = gradient(big_phi)
    flux = pflux(np.stack(grad_ta.components, axis=-1), p)
    kin = integrate(
        GridFunction(
            u.spec,
            np.sum(flux * np.stack(grad_big.components, axis=-1), axis=-1),
        )
    )
    ta = truncate(u, alpha).values
    zero_order = integrate(
        GridFunction(u.spec, prob.V.values * np.abs(ta) ** (p - 2.0) * ta * big_phi.values)
    )
    source = integrate(GridFunction(u.spec, prob.f.values * big_phi.values))
    return abs(kin + zero_order - source), supp_ok


def _identity_scale(prob: Problem, t: float) -> float:
    return t * (1.0 + integrate(prob.f.abs()))


def check_localized_identity(
    res: SolveResult, prob: Problem, phi: GridFunction, alpha: float, t: float,
    c_budget: float, tol: float = 0.05,
) -> EstimateReport:
    """Compare the identity defect against the budget ``c_budget * h * scale``.

    The identity is exact in the continuum; the budget quantifies the
    discretization error.  Calibrate ``c_budget`` once per experiment with
    :func:`estimate_identity_budget` and keep it frozen across refinements.
    """
    defect, supp_ok = identity_defect(res, prob, phi, alpha, t)
    rhs = c_budget * prob.spec.h * _identity_scale(prob, t)
    return EstimateReport(
        "localized_identity", defect, rhs, tol,
        _base_context(prob, t=t, alpha=alpha, c_budget=c_budget,
                      supp_contained=supp_ok),
    )


def estimate_identity_budget(
    make_case: Callable[[int], tuple[Problem, GridFunction]],
    alpha: float, t: float, m_coarse: int, safety: float = 2.0,
) -> float:
    """Measure the defect of one coarse solve and freeze a budget constant.

    ``make_case(m)`` must return the problem and test bump phi for the
    experiment at resolution m.  The returned constant is
    ``safety * defect / (h * scale)`` at the coarse resolution; reports at
    finer resolutions then pass exactly when the defect decays at least
    linearly in h relative to the coarse run.
    """
    prob, phi = make_case(m_coarse)
    res = solve(prob)
    defect, _ = identity_defect(res, prob, phi, alpha, t)
    return safety * defect / (prob.spec.h * _identity_scale(prob, t))


def distributional_residual(
    u: GridFunction, grad: VectorField, prob: Problem, psi: GridFunction
) -> float:
    """Absolute defect of the distributional equation tested against psi."""
    _require_compact_support(psi, "psi")
    p = prob.p.p
    flux = pflux(np.stack(grad.components, axis=-1), p)
    grad_psi = gradient(psi)
    kin = integrate(
        GridFunction(
            u.spec, np.sum(flux * np.stack(grad_psi.components, axis=-1), axis=-1)
        )
    )
    zero_order = integrate(
        GridFunction(
            u.spec,
            prob.V.values * np.abs(u.values) ** (p - 2.0) * u.values * psi.values,
        )
    )
    source = integrate(GridFunction(u.spec, prob.f.values * psi.values))
    return abs(kin + zero_order - source)


# ---------------------------------------------------------------------------
# the scheme


@dataclass(frozen=True)
class SchemeConfig:
    """Levels, truncation grids and tolerances for one scheme run."""

    k_list: tuple[float, ...]
    t_grid: tuple[float, ...]
    alpha_grid: tuple[float, ...] = (0.5, 1.0)
    R_grid: tuple[float, ...] = (2.0, 4.0, 6.0)
    eps_grid: tuple[float, ...] = (0.1, 0.5, 1.0)
    tol: float = 0.05
    tol_residual: float | None = None
    max_iters: int = 100
    stability_cp_scale: float = 1.0

    def __post_init__(self):
        ks = tuple(float(k) for k in self.k_list)
        if not ks:
            raise ValueError("k_list must be nonempty")
        if any(b <= a for a, b in zip(ks, ks[1:])):
            raise ValueError("k_list must be strictly increasing")
        object.__setattr__(self, "k_list", ks)
        for name in ("t_grid", "alpha_grid", "R_grid", "eps_grid"):
            vals = tuple(float(v) for v in getattr(self, name))
            if not vals:
                raise ValueError(f"{name} must be nonempty")
            object.__setattr__(self, name, vals)


@dataclass(frozen=True, eq=False)
class SchemeResult:
    """Solve sequence plus every report and convergence record."""

    p: float
    grid: str
    k_list: tuple[float, ...]
    solutions: dict[float, SolveResult]
    reports: list[EstimateReport]
    pairwise_lambda: np.ndarray
    measure_diag: dict[float, np.ndarray]
    convergence: dict[str, Any]
    failed_k: tuple[float, ...]
    caveat: str = FINITE_SEQUENCE_CAVEAT

    @property
    def reference_k(self) -> float:
        return self.convergence["reference_k"]

    def failed_reports(self) -> list[EstimateReport]:
        return [r for r in self.reports if not r.passed]


def _solve_one(args):
    f, V_g, p, k, cfg, regularizer = args
    f_k = regularizer(f, k)
    prob = Problem(
        spec=f.spec, p=ExponentP(p, degenerate_ok=True), V=V_g, f=f_k,
        tol_residual=cfg.tol_residual, max_iters=cfg.max_iters,
    )
    return k, f_k, prob, solve(prob)


def run_scheme(
    f: GridFunction,
    V: Potential,
    p: float,
    cfg: SchemeConfig,
    regularizer: Callable[[GridFunction, float], GridFunction] = regularize_datum,
    threads: int = 1,
) -> SchemeResult:
    """Solve the whole k-sequence and verify every configured estimate.

    Solves run concurrently when ``threads > 1``; report assembly is a
    deterministic sequential reduction in k order, so results do not depend
    on the schedule.  Non-convergent levels are flagged and their reports
    omitted.
    """
    V_g = sample_potential(V, f.spec)
    jobs = [(f, V_g, p, k, cfg, regularizer) for k in cfg.k_list]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(_solve_one, jobs))
    else:
        outcomes = [_solve_one(j) for j in jobs]

    solutions: dict[float, SolveResult] = {}
    data: dict[float, GridFunction] = {}
    probs: dict[float, Problem] = {}
    failed = []
    for k, f_k, prob, res in outcomes:
        solutions[k] = res
        data[k] = f_k
        probs[k] = prob
        if not res.converged:
            failed.append(k)
    good = [k for k in cfg.k_list if k not in failed]
    if not good:
        raise RuntimeError("no truncation level converged; nothing to report")

    f_l1 = integrate(f.abs())
    reports: list[EstimateReport] = []
    for k in good:
        res, prob = solutions[k], probs[k]
        fk_l1 = integrate(data[k].abs())
        for t in cfg.t_grid:
            rep = check_energy_estimate(res, prob, t, fk_l1, tol=cfg.tol)
            rep.context["k"] = k
            reports.append(rep)
            for R in cfg.R_grid:
                rep = check_tail_bound(res, prob, V, t, R, tol=cfg.tol)
                rep.context["k"] = k
                reports.append(rep)
            rep = check_superlevel_bound(res, prob, t, f_l1, tol=cfg.tol)
            rep.context["k"] = k
            reports.append(rep)
    for i, k in enumerate(good):
        for l in good[i + 1:]:
            for t in cfg.t_grid:
                rep = check_stability(
                    solutions[k], solutions[l], data[k], data[l], probs[k], t,
                    tol=cfg.tol, cp_scale=cfg.stability_cp_scale,
                )
                rep.context["k"] = k
                rep.context["l"] = l
                reports.append(rep)

    nk = len(cfg.k_list)
    pairwise = np.zeros((nk, nk))
    for i, k in enumerate(cfg.k_list):
        for j in range(i + 1, nk):
            l = cfg.k_list[j]
            if k in failed or l in failed:
                d = np.nan
            else:
                d = lambda_dist(solutions[k].u, solutions[l].u, p)
            pairwise[i, j] = pairwise[j, i] = d

    measure_diag: dict[float, np.ndarray] = {}
    for eps in cfg.eps_grid:
        mat = np.zeros((nk, nk))
        for i, k in enumerate(cfg.k_list):
            for j in range(i + 1, nk):
                l = cfg.k_list[j]
                if k in failed or l in failed:
                    val = np.nan
                else:
                    val = superlevel_measure(solutions[k].u - solutions[l].u, eps)
                mat[i, j] = mat[j, i] = val
        measure_diag[eps] = mat

    k_ref = good[-1]
    u_ref = solutions[k_ref].u
    sub_box = np.max(np.abs(f.spec.node_coords()), axis=1) <= f.spec.L / 2.0
    w_sub = f.spec.weights() * sub_box
    conv_rows = []
    for k in good:
        row = {"k": k, "lambda_dist_to_ref": lambda_dist(solutions[k].u, u_ref, p)}
        per_alpha = {}
        for alpha in cfg.alpha_grid:
            diff = solutions[k].u - u_ref
            per_alpha[alpha] = truncation_xnorm_p(diff, V_g, p, alpha)
        row["trunc_xnorm_p_to_ref"] = per_alpha
        grad_local = {}
        for alpha in cfg.alpha_grid:
            gk = np.stack(
                masked_truncation_gradient(solutions[k].u, alpha).components, axis=-1
            )
            gr = np.stack(masked_truncation_gradient(u_ref, alpha).components, axis=-1)
            mag = np.sqrt(np.sum((gk - gr) ** 2, axis=-1))
            grad_local[alpha] = float(np.dot(w_sub, mag**p))
        row["grad_gap_subbox_p"] = grad_local
        conv_rows.append(row)

    convergence = {
        "reference_k": k_ref,
        "caveat": FINITE_SEQUENCE_CAVEAT,
        "rows": conv_rows,
    }
    return SchemeResult(
        p=float(p),
        grid=f.spec.describe(),
        k_list=cfg.k_list,
        solutions=solutions,
        reports=reports,
        pairwise_lambda=pairwise,
        measure_diag=measure_diag,
        convergence=convergence,
        failed_k=tuple(failed),
    )


def save_scheme_result(res: SchemeResult, outdir: str | Path) -> None:
    """Write per-k solution files, reports.json, distances.csv, diagnostics.json."""
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    for k, sol in res.solutions.items():
        save_grid_function(sol.u, out / f"u_k{k:g}")
    with open(out / "reports.json", "w") as fh:
        json.dump([r.to_dict() for r in res.reports], fh, indent=1, sort_keys=True)
        fh.write("\n")
    with open(out / "distances.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["k"] + [f"{k:g}" for k in res.k_list])
        for i, k in enumerate(res.k_list):
            writer.writerow([f"{k:g}"] + [repr(x) for x in res.pairwise_lambda[i]])
    diagnostics = {
        "p": res.p,
        "grid": res.grid,
        "k_list": list(res.k_list),
        "failed_k": list(res.failed_k),
        "caveat": res.caveat,
        "convergence": res.convergence,
        "measure_diag": {
            repr(eps): mat.tolist() for eps, mat in res.measure_diag.items()
        },
        "solves": {
            f"{k:g}": sol.diagnostics() for k, sol in res.solutions.items()
        },
    }
    with open(out / "diagnostics.json", "w") as fh:
        json.dump(diagnostics, fh, indent=1, sort_keys=True)
        fh.write("\n")
