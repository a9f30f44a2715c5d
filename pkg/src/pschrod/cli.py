"""Experiment runner: config ingestion, subcommands, report emission.

Subcommands: ``solve``, ``pipeline``, ``confinement``, ``compactness``,
``verify``.  Every run validates its JSON config (unknown keys are
rejected), merges command-line overrides (``--out``, ``--seed``, ``--tol``,
``--threads``), writes the requested artifacts plus a ``manifest.json``
with the config echo, library versions, seed and wall time.  Numeric
artifacts are bitwise reproducible for identical configs; only the
manifest carries timing.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path
from typing import Any

import numpy as np
import scipy

from . import __version__
from .asymptotic import ExponentP
from .compactness import FunctionFamily, ark_check, epsilon_net, kr_report
from .grid import GridFunction, GridSpec, load_grid_function, sample, save_grid_function
from .pipeline import SchemeConfig, mollify_datum, regularize_datum, run_scheme, save_scheme_result
from .potentials import Potential, confinement_report, polynomial_trap, sample_potential, sparse_wells
from .presets import bump, manufactured_p2_datum, two_bump
from .solver import Problem, solve
from .verify import SUITE_NAMES, run_verify

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_CONFIG = 2


class ConfigError(Exception):
    pass


def _check_keys(block: dict, allowed: set[str], where: str) -> None:
    unknown = set(block) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")


def _require(block: dict, key: str, where: str):
    if key not in block:
        raise ConfigError(f"missing key {key!r} in {where}")
    return block[key]


def _build_grid(block: dict) -> GridSpec:
    _check_keys(block, {"n", "L", "m"}, "grid")
    try:
        return GridSpec(
            n=int(_require(block, "n", "grid")),
            L=float(_require(block, "L", "grid")),
            m=int(_require(block, "m", "grid")),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _build_potential(block: dict, need_pair: bool = False) -> Potential:
    _check_keys(block, {"kind", "gamma", "value", "kappa"}, "potential")
    kind = _require(block, "kind", "potential")
    if kind == "polynomial_trap":
        pot = polynomial_trap(gamma=float(_require(block, "gamma", "potential")))
    elif kind == "sparse_wells":
        pot = sparse_wells(gamma=float(_require(block, "gamma", "potential")))
    elif kind == "constant":
        value = float(block.get("value", 1.0))
        if value < 1.0:
            raise ConfigError("constant potential must be >= 1")
        if need_pair and ("kappa" not in block or "gamma" not in block):
            raise ConfigError(
                "constant potential needs explicit kappa and gamma for "
                "confinement diagnostics"
            )

        def evaluator(*coords):
            return np.full(np.shape(np.asarray(coords[0], dtype=float)), value)

        pot = Potential(
            evaluator,
            kappa=float(block.get("kappa", 1.0)),
            gamma=float(block.get("gamma", 1.0)),
            label=f"constant({value:g})",
        )
    else:
        raise ConfigError(f"unknown potential kind {kind!r}")
    if "kappa" in block and kind != "constant":
        pot = pot.with_pair(float(block["kappa"]), pot.gamma)
    return pot


def _gaussian_term(block: dict, n: int):
    _check_keys(block, {"center", "width", "height"}, "datum term")
    center = block.get("center", 0.0)
    center = [float(c) for c in (center if isinstance(center, list) else [center])]
    if len(center) != n:
        raise ConfigError(f"datum center must have {n} components")
    width = float(_require(block, "width", "datum term"))
    height = float(_require(block, "height", "datum term"))

    def term(*coords):
        d2 = sum((np.asarray(c, dtype=float) - c0) ** 2 for c, c0 in zip(coords, center))
        return height * np.exp(-d2 / width**2)

    return term


def _build_datum(block: dict, spec: GridSpec) -> GridFunction:
    _check_keys(block, {"kind", "value", "center", "width", "height", "terms"}, "datum")
    kind = _require(block, "kind", "datum")
    if kind == "zero":
        return GridFunction(spec, np.zeros(spec.num_nodes))
    if kind == "constant":
        return GridFunction(spec, np.full(spec.num_nodes, float(block.get("value", 0.0))))
    if kind == "gaussian":
        return sample(spec, _gaussian_term(block, spec.n))
    if kind == "sum":
        terms = [_gaussian_term(t, spec.n) for t in _require(block, "terms", "datum")]

        def total(*coords):
            return sum(t(*coords) for t in terms)

        return sample(spec, total)
    if kind == "two_bump":
        if spec.n != 1:
            raise ConfigError("two_bump datum is one-dimensional")
        return sample(spec, two_bump)
    if kind == "manufactured_p2":
        if spec.n != 1:
            raise ConfigError("manufactured_p2 datum is one-dimensional")
        return sample(spec, manufactured_p2_datum)
    raise ConfigError(f"unknown datum kind {kind!r}")


def _build_problem(cfg: dict) -> tuple[Problem, Potential]:
    spec = _build_grid(_require(cfg, "grid", "config"))
    pot = _build_potential(_require(cfg, "potential", "config"))
    V = sample_potential(pot, spec)
    f = _build_datum(_require(cfg, "datum", "config"), spec)
    solver_block = cfg.get("solver", {})
    _check_keys(solver_block, {"tol_residual", "max_iters", "eps_reg"}, "solver")
    p = float(_require(cfg, "p", "config"))
    try:
        prob = Problem(
            spec=spec,
            p=ExponentP(p) if p < 2 else ExponentP(p, degenerate_ok=True),
            V=V,
            f=f,
            eps_reg=solver_block.get("eps_reg"),
            tol_residual=solver_block.get("tol_residual"),
            max_iters=int(solver_block.get("max_iters", 100)),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return prob, pot


def _write_manifest(outdir: Path, config: dict, args, started: float) -> None:
    manifest = {
        "config": config,
        "argv": list(sys.argv[1:]),
        "seed": getattr(args, "seed", None),
        "versions": {
            "pschrod": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": sys.version.split()[0],
        },
        "wall_time_s": time.monotonic() - started,
    }
    with open(outdir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _load_config(args, defaults: dict | None = None) -> dict:
    cfg = dict(defaults or {})
    if args.config:
        path = Path(args.config)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            loaded = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
        if not isinstance(loaded, dict):
            raise ConfigError("config root must be a JSON object")
        cfg.update(loaded)
    return cfg


def _outdir(args, cfg: dict) -> Path:
    out = Path(args.out or cfg.get("out", "out"))
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# subcommands


def cmd_solve(args) -> int:
    started = time.monotonic()
    cfg = _load_config(args)
    _check_keys(cfg, {"grid", "p", "potential", "datum", "solver", "out"}, "config")
    prob, _ = _build_problem(cfg)
    out = _outdir(args, cfg)
    result = solve(prob)
    save_grid_function(result.u, out / "u")
    with open(out / "solve.json", "w") as fh:
        json.dump(result.diagnostics(), fh, indent=1, sort_keys=True)
        fh.write("\n")
    _write_manifest(out, cfg, args, started)
    print(
        f"solve: converged={result.converged} iterations={result.iterations} "
        f"residual_sup={result.residual_sup:.3e} energy={result.energy:.6e}"
    )
    return EXIT_OK if result.converged else EXIT_FAIL


def cmd_pipeline(args) -> int:
    started = time.monotonic()
    cfg = _load_config(args)
    _check_keys(
        cfg,
        {"grid", "p", "potential", "datum", "scheme", "debug", "regularizer", "out"},
        "config",
    )
    spec = _build_grid(_require(cfg, "grid", "config"))
    pot = _build_potential(_require(cfg, "potential", "config"))
    f = _build_datum(_require(cfg, "datum", "config"), spec)
    p = float(_require(cfg, "p", "config"))

    scheme_block = dict(_require(cfg, "scheme", "config"))
    _check_keys(
        scheme_block,
        {"k_list", "t_grid", "alpha_grid", "R_grid", "eps_grid", "tol",
         "tol_residual", "max_iters"},
        "scheme",
    )
    debug_block = cfg.get("debug", {})
    _check_keys(debug_block, {"stability_cp_scale"}, "debug")
    if args.tol is not None:
        scheme_block["tol"] = args.tol
    try:
        scheme_cfg = SchemeConfig(
            k_list=tuple(_require(scheme_block, "k_list", "scheme")),
            t_grid=tuple(_require(scheme_block, "t_grid", "scheme")),
            alpha_grid=tuple(scheme_block.get("alpha_grid", (0.5, 1.0))),
            R_grid=tuple(scheme_block.get("R_grid", (2.0, 4.0, 6.0))),
            eps_grid=tuple(scheme_block.get("eps_grid", (0.1, 0.5, 1.0))),
            tol=float(scheme_block.get("tol", 0.05)),
            tol_residual=scheme_block.get("tol_residual"),
            max_iters=int(scheme_block.get("max_iters", 100)),
            stability_cp_scale=float(debug_block.get("stability_cp_scale", 1.0)),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    regularizer_name = cfg.get("regularizer", "canonical")
    if regularizer_name == "canonical":
        regularizer = regularize_datum
    elif regularizer_name == "mollified":
        regularizer = mollify_datum
    else:
        raise ConfigError(f"unknown regularizer {regularizer_name!r}")

    try:
        result = run_scheme(
            f, pot, p, scheme_cfg, regularizer=regularizer, threads=args.threads
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    out = _outdir(args, cfg)
    save_scheme_result(result, out)
    _write_manifest(out, cfg, args, started)
    failed = result.failed_reports()
    print(
        f"pipeline: levels={len(result.k_list)} reports={len(result.reports)} "
        f"failed={len(failed)} non_convergent={list(result.failed_k)}"
    )
    for rep in failed[:10]:
        print(f"  FAIL {rep.name} lhs={rep.lhs:.4e} rhs={rep.rhs:.4e} ctx={rep.context}")
    return EXIT_FAIL if failed or result.failed_k else EXIT_OK


def cmd_confinement(args) -> int:
    started = time.monotonic()
    cfg = _load_config(args)
    _check_keys(cfg, {"grid", "potential", "R_grid", "mc", "out"}, "config")
    spec = _build_grid(_require(cfg, "grid", "config"))
    pot = _build_potential(_require(cfg, "potential", "config"), need_pair=True)
    R_grid = [float(R) for R in _require(cfg, "R_grid", "config")]
    try:
        report = confinement_report(pot, spec, R_grid)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    payload: dict[str, Any] = report.to_dict()

    mc_block = cfg.get("mc", {})
    _check_keys(mc_block, {"samples"}, "mc")
    if mc_block:
        if args.seed is None:
            raise ConfigError("Monte Carlo cross-check needs --seed")
        from .potentials import bad_set_measure_mc

        payload["monte_carlo"] = {
            f"{R:g}": bad_set_measure_mc(
                pot, spec, R, int(mc_block.get("samples", 100000)), args.seed
            )
            for R in R_grid
        }

    out = _outdir(args, cfg)
    with open(out / "confinement.json", "w") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)
        fh.write("\n")
    _write_manifest(out, cfg, args, started)

    print(f"confinement: {report.label} kappa={report.kappa:g} gamma={report.gamma:g}")
    print(f"{'R':>10}  {'|E_R|':>14}")
    for R, measure in zip(report.R_grid, report.bad_measures):
        print(f"{R:>10g}  {measure:>14.6e}")
    print(f"classically confining (tested range): {report.classically_confining}")
    if report.violation_witness is not None:
        print(f"violation witness at x = {list(report.violation_witness)}")
    return EXIT_OK


def _build_family(block: dict, spec: GridSpec | None) -> FunctionFamily:
    _check_keys(
        block,
        {"kind", "count", "width", "height", "spacing", "centers", "dir", "truncation"},
        "family",
    )
    kind = _require(block, "kind", "family")
    if kind == "translating_bumps":
        if spec is None:
            raise ConfigError("translating_bumps family needs a grid block")
        count = int(block.get("count", 6))
        width = float(block.get("width", 0.5))
        height = float(block.get("height", 2.0))
        spacing = float(block.get("spacing", 1.0))
        members = tuple(
            sample(spec, bump(spacing * j, width, height)) for j in range(1, count + 1)
        )
        return FunctionFamily(members, label="translating bumps")
    if kind == "fixed_bumps":
        if spec is None:
            raise ConfigError("fixed_bumps family needs a grid block")
        centers = block.get("centers", [0.0])
        width = float(block.get("width", 0.5))
        height = float(block.get("height", 1.0))
        members = tuple(sample(spec, bump(float(c), width, height)) for c in centers)
        return FunctionFamily(members, label="fixed bumps")
    if kind == "solutions_dir":
        directory = Path(_require(block, "dir", "family"))
        bases = sorted(p.with_suffix("") for p in directory.glob("*.json")
                       if p.with_suffix(".bin").exists())
        if not bases:
            raise ConfigError(f"no grid-function files in {directory}")
        members = [load_grid_function(b) for b in bases]
        level = block.get("truncation")
        if level is not None:
            from .asymptotic import truncate

            members = [truncate(u, float(level)) for u in members]
        return FunctionFamily(tuple(members), label=f"files:{directory.name}")
    raise ConfigError(f"unknown family kind {kind!r}")


def cmd_compactness(args) -> int:
    started = time.monotonic()
    cfg = _load_config(args)
    _check_keys(
        cfg,
        {"grid", "p", "q", "family", "shift_grid", "R_grid", "K_grid", "eps",
         "net_eps", "mode", "out"},
        "config",
    )
    spec = _build_grid(cfg["grid"]) if "grid" in cfg else None
    fam = _build_family(_require(cfg, "family", "config"), spec)
    spec = fam.spec
    p = float(_require(cfg, "p", "config"))
    eps = float(cfg.get("eps", 0.1))
    shift_grid = cfg.get("shift_grid", [spec.h, 2 * spec.h])
    R_grid = cfg.get("R_grid", [spec.L / 4.0, spec.L / 2.0, 3.0 * spec.L / 4.0])
    K_grid = cfg.get("K_grid", [0.5, 1.0, 2.0])
    mode = cfg.get("mode", "ark")

    if mode == "kr":
        report = kr_report(fam, p, shift_grid, R_grid, K_grid, eps=eps)
    elif mode == "ark":
        report = ark_check(
            fam, p, cfg.get("q"), shift_grid=shift_grid, R_grid=R_grid,
            K_grid=K_grid, eps=eps,
        )
    else:
        raise ConfigError(f"unknown mode {mode!r} (use 'kr' or 'ark')")

    net = epsilon_net(fam, p, float(cfg.get("net_eps", eps)))
    out = _outdir(args, cfg)
    payload = report.to_dict()
    payload["epsilon_net"] = {"eps": float(cfg.get("net_eps", eps)),
                              "indices": list(map(int, net))}
    with open(out / "family_report.json", "w") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)
        fh.write("\n")
    _write_manifest(out, cfg, args, started)

    print(f"compactness: family '{fam.label}' size={len(fam)} p={p:g} eps={eps:g}")
    for cond in ("translation", "tail", "superlevel"):
        print(f"  condition {cond:<12} {report.verdicts[cond]}")
    if report.ark_bound is not None:
        print(f"  sobolev bound C = {report.ark_bound:.6g} (q = {report.ark_q:g})")
    print(f"  epsilon net: {len(net)} members {list(map(int, net))}")
    return EXIT_OK


def cmd_verify(args) -> int:
    started = time.monotonic()
    cfg = _load_config(args)
    _check_keys(cfg, {"seed", "suites", "out"}, "config")
    seed = args.seed if args.seed is not None else cfg.get("seed")
    if seed is None:
        raise ConfigError("verify requires a seed (--seed or config key 'seed')")
    suites = args.suite or cfg.get("suites")
    out = _outdir(args, cfg)
    try:
        summary = run_verify(int(seed), out, suites=suites, threads=args.threads)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    _write_manifest(out, cfg, args, started)
    print(f"verify: {'PASS' if summary['passed'] else 'FAIL'} (seed {seed})")
    return EXIT_OK if summary["passed"] else EXIT_FAIL


# ---------------------------------------------------------------------------


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--out", help="output directory (default 'out')")
    parser.add_argument("--seed", type=int, help="seed for randomized suites")
    parser.add_argument("--tol", type=float, help="report tolerance override")
    parser.add_argument("--threads", type=int, default=1,
                        help="worker threads for independent solves")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pschrod",
        description=(
            "solve p-Schrodinger problems with confining potentials on "
            "truncated grids and verify the quantitative estimates"
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)
    handlers = {
        "solve": (cmd_solve, "minimize the discrete energy for one datum"),
        "pipeline": (cmd_pipeline, "run the regularized solve sequence and all checks"),
        "confinement": (cmd_confinement, "tabulate bad-set measures for a potential"),
        "compactness": (cmd_compactness, "family diagnostics and epsilon nets"),
        "verify": (cmd_verify, "run the seeded property suites"),
    }
    for name, (handler, help_text) in handlers.items():
        p = sub.add_parser(name, help=help_text)
        _add_common(p)
        if name == "verify":
            p.add_argument(
                "--suite", action="append", choices=list(SUITE_NAMES),
                help="run only this suite (repeatable)",
            )
        p.set_defaults(handler=handler)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.seed is not None and not 0 <= args.seed < 2**64:
        print("error: seed must fit in u64", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.handler(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
