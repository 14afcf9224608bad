"""Command-line entry point: validated configs, runs, manifests.

Subcommands: simulate, verify-cluster, verify-strichartz,
verify-stochastic, verify-stopped, admissible, ledger.  Configs are JSON
(see README for the schema); validation reports every violated rule at
once, each named.  Exit codes: 0 success, 1 errors (bad config, I/O),
2 contract violations (a verification target missed its bound).

Identical (config, seed) runs produce byte-identical CSVs regardless of
the --threads worker count: paths are distributed to workers but results
land in per-path slots, and every random stream is counter-based.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import verify as verify_mod
from .nonlin import (
    ExponentialCritical,
    LipschitzBudget,
    NonlinearityRangeError,
    Polynomial,
    ZeroNonlinearity,
    estimate_lipschitz_constants,
)
from .noise import NoiseBasis, build_noise_basis
from .norms import AdmissibilityError, ExponentTriple, admissible_r, validate_pair_condition
from .serialize import config_hash, write_binary_arrays, write_csv, write_manifest
from .solver import (
    BudgetConstants,
    BudgetError,
    ContractionError,
    CutoffParams,
    CutoffShape,
    SolverConfig,
    contraction_budget,
    solve_truncated,
)
from .spectral import (
    AliasingError,
    BasisError,
    BoundaryCondition,
    basis_to_json,
    build_basis,
    default_grid,
)
from .verify import ConstantsLedger, LedgerEntry, SweepSpec, build_ledger

__all__ = ["main", "parse_config", "run", "ConfigError", "RunConfig"]

SUBCOMMANDS = (
    "simulate",
    "verify-cluster",
    "verify-strichartz",
    "verify-stochastic",
    "verify-stopped",
    "admissible",
    "ledger",
)


class ConfigError(ValueError):
    """Carries the full list of named validation failures."""

    def __init__(self, errors: list[str]):
        super().__init__("; ".join(errors))
        self.errors = errors


def _parse_exponent(v):
    if v in ("inf", "Infinity", None):
        return math.inf
    return float(v)


@dataclass
class RunConfig:
    """A validated run: the raw dict plus the constructed objects."""

    raw: dict
    subcommand: str
    seed: int
    paths: int
    threads: int
    out_dir: Path
    bc: BoundaryCondition = BoundaryCondition.DIRICHLET
    lx: float = math.pi
    ly: float = math.pi
    cutoff: float = 4.0
    triple: ExponentTriple | None = None
    solver: SolverConfig | None = None
    noise: NoiseBasis | None = None
    budget: BudgetConstants | None = None
    sweep: SweepSpec | None = None
    dump_modes: list = field(default_factory=list)
    dump_binary: bool = False


def _build_initial(basis, spec: dict | None, errors: list[str], label: str):
    coeffs = np.zeros(basis.size)
    if not spec:
        return coeffs
    modes = spec.get("modes", [])
    values = spec.get("coefficients", [])
    if len(modes) != len(values):
        errors.append(f"initial.{label}: one coefficient per mode required")
        return coeffs
    for (jx, jy), c in zip(modes, values):
        try:
            coeffs[basis.mode_index(int(jx), int(jy))] = float(c)
        except Exception:
            errors.append(f"initial.{label}: mode ({jx}, {jy}) not in the basis")
    return coeffs


def parse_config(source, subcommand: str, overrides: dict | None = None) -> RunConfig:
    """Validate a JSON config (path, text or dict) for a subcommand.

    Collects every violated rule instead of stopping at the first; raises
    ConfigError with the full list.
    """
    overrides = overrides or {}
    if isinstance(source, (str, Path)) and Path(source).exists():
        text = Path(source).read_text()
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError([f"malformed JSON: {exc}"]) from exc
    elif isinstance(source, str):
        try:
            raw = json.loads(source)
        except json.JSONDecodeError as exc:
            raise ConfigError([f"malformed JSON: {exc}"]) from exc
    elif isinstance(source, dict):
        raw = dict(source)
    elif source is None:
        raw = {}
    else:
        raise ConfigError([f"unsupported config source {type(source)!r}"])

    if not isinstance(raw, dict):
        raise ConfigError(["config: top level must be a JSON object"])

    errors: list[str] = []

    def section(key):
        val = raw.get(key)
        if val is None:
            return {}
        if not isinstance(val, dict):
            errors.append(f"{key}: must be a JSON object")
            return {}
        return val

    try:
        return _parse_validated(raw, subcommand, overrides, errors, section)
    except ConfigError:
        raise
    except (TypeError, ValueError, KeyError) as exc:
        # a field with the wrong JSON type; report instead of crashing
        errors.append(f"config: malformed field ({exc})")
        raise ConfigError(errors) from exc


def _parse_validated(raw, subcommand, overrides, errors, section) -> RunConfig:
    seed = int(overrides.get("seed", raw.get("seed", 0)))
    if not 0 <= seed < 2 ** 64:
        errors.append("seed: must fit in 64 bits")
    paths = int(overrides.get("paths", raw.get("paths", 1)))
    if paths < 1:
        errors.append("paths: must be >= 1")
    threads = int(overrides.get("threads", raw.get("threads", 1)))
    if threads < 1:
        errors.append("threads: must be >= 1")
    out_dir = Path(
        overrides.get("out")
        or raw.get("output")
        or os.environ.get("STOCHWAVE_OUTDIR", "out")
    )

    domain = section("domain")
    lx = float(domain.get("lx", math.pi))
    ly = float(domain.get("ly", math.pi))
    if lx <= 0 or ly <= 0:
        errors.append("domain: lengths must be positive")
    bc_name = domain.get("bc", "dirichlet")
    try:
        bc = BoundaryCondition(bc_name)
    except ValueError:
        bc = BoundaryCondition.DIRICHLET
        errors.append(f"domain.bc: unknown boundary condition {bc_name!r}")
    cutoff = float(raw.get("cutoff", 4.0))
    if cutoff <= 0:
        errors.append("cutoff: frequency truncation must be positive")

    triple_raw = section("triple") or {"p": 2, "q": 2}
    p = _parse_exponent(triple_raw.get("p", 2))
    q = _parse_exponent(triple_raw.get("q", 2))
    triple = None
    try:
        triple = ExponentTriple.from_pq(p, q)
    except AdmissibilityError as exc:
        errors.append(f"triple: {exc} (admissibility requires 2 <= q <= p <= inf)")

    sol = section("solver")
    m = float(sol.get("M", 0.5))
    m_prime = float(sol.get("M_prime", 0.3))
    if not (0.0 < m_prime < m < 1.0):
        errors.append(
            f"solver thresholds: need 0 < M_prime < M < 1, got "
            f"M_prime={m_prime}, M={m}"
        )
    gamma = float(sol.get("gamma", 0.25))
    if not 2.0 * gamma < p:
        errors.append(f"solver.gamma: need 2*gamma < p, got gamma={gamma}, p={p}")
    level = int(sol.get("n", 1))
    if level < 1:
        errors.append("solver.n: truncation level must be >= 1")
    horizon = float(sol.get("T", 1.0))
    dt = float(sol.get("dt", 1e-3))
    if horizon <= 0 or dt <= 0:
        errors.append("solver: T and dt must be positive")
    elif abs(horizon / dt - round(horizon / dt)) > 1e-9:
        errors.append("solver: T must be a whole number of dt steps")
    tol_fp = float(sol.get("tol_fp", 1e-8))
    if tol_fp <= 0:
        errors.append("solver.tol_fp: must be positive")
    max_iter = int(sol.get("max_iter", 60))
    shape_name = sol.get("theta_shape", "linear")
    try:
        shape = CutoffShape(shape_name)
    except ValueError:
        shape = CutoffShape.LINEAR_RAMP
        errors.append(f"solver.theta_shape: unknown shape {shape_name!r}")

    nl = section("nonlinearity") or {"kind": "zero"}
    kind_name = nl.get("kind", "zero")
    if kind_name == "zero":
        kind = ZeroNonlinearity()
    elif kind_name == "exponential":
        kind = ExponentialCritical(alpha=float(nl.get("alpha", 4.0 * math.pi)))
    elif kind_name == "polynomial":
        kind = Polynomial(coefficients=tuple(nl.get("coefficients", [1.0])))
    else:
        kind = ZeroNonlinearity()
        errors.append(f"nonlinearity.kind: unknown kind {kind_name!r}")

    basis = None
    if not errors or all(not e.startswith(("domain", "cutoff")) for e in errors):
        try:
            basis = build_basis(lx, ly, bc, cutoff)
        except Exception as exc:
            errors.append(f"basis: {exc}")

    noise = None
    noise_raw = section("noise")
    if noise_raw and basis is not None:
        try:
            noise = build_noise_basis(
                basis,
                int(noise_raw.get("channels", 4)),
                decay=float(noise_raw.get("decay", 2.0)),
            )
        except Exception as exc:
            errors.append(f"noise: {exc}")

    solver_cfg = None
    if basis is not None and triple is not None and not errors:
        grid = default_grid(basis)
        initial = section("initial")
        u0 = _build_initial(basis, initial.get("u0"), errors, "u0")
        u1 = _build_initial(basis, initial.get("u1"), errors, "u1")
        nonlinear_run = not isinstance(kind, ZeroNonlinearity) or noise is not None
        if nonlinear_run:
            u0_energy = float(np.linalg.norm(np.sqrt(1.0 + basis.lam_sq) * u0))
            if u0_energy >= m_prime:
                errors.append(
                    f"initial.u0: nonlinear runs need ||u0||_HA < M_prime, "
                    f"got {u0_energy:.4g} >= {m_prime}"
                )
        if not errors:
            try:
                solver_cfg = SolverConfig(
                    basis=basis, grid=grid, triple=triple,
                    cutoffs=CutoffParams(level=level, m=m, m_prime=m_prime, shape=shape),
                    kind=kind, noise=noise, u0=u0, u1=u1,
                    horizon=horizon, dt=dt, tol_fp=tol_fp, max_iter=max_iter,
                    gamma=gamma,
                )
            except Exception as exc:
                errors.append(f"solver: {exc}")

    budget = None
    budget_raw = sol.get("budget_constants")
    if sol.get("use_budget") or budget_raw:
        budget_raw = budget_raw or {}
        budget = BudgetConstants(
            c_f=float(budget_raw.get("c_f", 1.0)),
            c_g=float(budget_raw.get("c_g", 1.0)),
            c_t=float(budget_raw.get("c_t", 1.0)),
            k_t=float(budget_raw.get("k_t", 1.0)),
            k_stoch=float(budget_raw.get("k_stoch", 1.0)),
            c_tilde=float(budget_raw.get("c_tilde", 1.0)),
        )

    sweep = None
    sweep_raw = section("sweep")
    if subcommand.startswith("verify"):
        try:
            sweep = SweepSpec(
                inequality=subcommand,
                qs=tuple(_parse_exponent(v) for v in sweep_raw.get("qs", (4,))),
                lambdas=tuple(range(int(sweep_raw.get("lambda_min", 4)),
                                    int(sweep_raw.get("lambda_max", 12)) + 1)),
                cutoffs=tuple(float(c) for c in sweep_raw.get("cutoffs", (cutoff,))),
                horizon=float(sweep_raw.get("T", 1.0)),
                nodes=int(sweep_raw.get("nodes", 101)),
                paths=int(sweep_raw.get("paths", paths)),
                samples=int(sweep_raw.get("samples", 200)),
                restarts=int(sweep_raw.get("restarts", 200)),
                decay=float(sweep_raw.get("decay", 2.0)),
                seed=seed,
            )
        except Exception as exc:
            errors.append(f"sweep: {exc}")

    dump_modes = [tuple(int(v) for v in m) for m in raw.get("dump_modes", [])]
    if basis is not None:
        known = {tuple(m) for m in basis.modes.tolist()}
        for m in dump_modes:
            if m not in known:
                errors.append(f"dump_modes: mode {m} not in the basis")
    if errors:
        raise ConfigError(errors)
    return RunConfig(
        raw=raw, subcommand=subcommand, seed=seed, paths=paths, threads=threads,
        out_dir=out_dir, bc=bc, lx=lx, ly=ly, cutoff=cutoff, triple=triple,
        solver=solver_cfg, noise=noise, budget=budget, sweep=sweep,
        dump_modes=dump_modes,
        dump_binary=bool(raw.get("dump_binary", False)),
    )


def _solve_one(cfg: RunConfig, solver_cfg: SolverConfig, ensemble, path: int):
    traj, diag = solve_truncated(solver_cfg, ensemble, path)
    return traj, diag


def _run_simulate(cfg: RunConfig) -> int:
    solver_cfg = cfg.solver
    horizon = solver_cfg.horizon
    if cfg.budget is not None:
        horizon = contraction_budget(
            solver_cfg.cutoffs.level, solver_cfg.cutoffs, solver_cfg.triple,
            cfg.budget, solver_cfg.gamma, solver_cfg.horizon, solver_cfg.dt,
        )
        solver_cfg = solver_cfg.with_horizon(horizon)
    ensemble = solver_cfg.make_ensemble(cfg.seed, cfg.paths) if solver_cfg.has_noise else None

    results: list = [None] * cfg.paths
    if cfg.threads > 1 and cfg.paths > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            futures = {
                pool.submit(_solve_one, cfg, solver_cfg, ensemble, p): p
                for p in range(cfg.paths)
            }
            for fut, p in futures.items():
                results[p] = fut.result()
    else:
        for p in range(cfg.paths):
            results[p] = _solve_one(cfg, solver_cfg, ensemble, p)

    outputs = []
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    basis_path = cfg.out_dir / "basis.json"
    basis_path.write_text(basis_to_json(solver_cfg.basis) + "\n")
    outputs.append(basis_path)
    dump_paths = [0]
    modes = cfg.dump_modes or [tuple(m) for m in solver_cfg.basis.modes[:8]]
    mode_idx = [solver_cfg.basis.mode_index(jx, jy) for jx, jy in modes]
    for p in dump_paths:
        traj, _ = results[p]
        header = ["t"] + [f"c_{jx}_{jy}" for jx, jy in modes] + ["Z", "Y"]
        rows = [
            [traj.times[k]] + [traj.u[k, i] for i in mode_idx]
            + [traj.z[k], traj.y[k]]
            for k in range(len(traj.times))
        ]
        outputs.append(write_csv(cfg.out_dir / f"trajectory_path{p}.csv", header, rows))
        if cfg.dump_binary:
            outputs.append(write_binary_arrays(
                cfg.out_dir / f"trajectory_path{p}.bin",
                {"times": traj.times, "u": traj.u, "ut": traj.ut,
                 "z": traj.z, "y": traj.y},
            ))

    stop_rows = []
    diag_rows = []
    norm_rows = []
    violation = False
    for p, (traj, diag) in enumerate(results):
        stop = traj.stopping
        stop_rows.append([
            p,
            stop.tau_index if stop.tau_index is not None else -1,
            stop.trigger.value,
        ])
        worst_ratio = max(diag.ratios) if diag.ratios else 0.0
        diag_rows.append([p, diag.iterations, diag.converged, diag.residual, worst_ratio])
        if not diag.converged or diag.residual > 10.0 * solver_cfg.tol_fp:
            violation = True
        t = solver_cfg.triple
        common = [t.p, t.q, t.r, horizon]
        res = [solver_cfg.grid.nx, solver_cfg.grid.ny, solver_cfg.dt]
        norm_rows.append([f"path{p}", "XT", *common, traj.x[-1], *res])
        norm_rows.append([f"path{p}", "ZT", *common, traj.z[-1], *res])
        norm_rows.append([f"path{p}", "YT", *common, traj.y[-1], *res])
    outputs.append(write_csv(cfg.out_dir / "stopping.csv",
                             ["path", "tau_index", "trigger"], stop_rows))
    outputs.append(write_csv(
        cfg.out_dir / "diagnostics.csv",
        ["path", "iterations", "converged", "residual", "worst_contraction_ratio"],
        diag_rows))
    outputs.append(write_csv(
        cfg.out_dir / "norms.csv",
        ["run_id", "kind", "p", "q", "r", "T", "value", "grid_Nx", "grid_Ny", "dt"],
        norm_rows))
    resolution = {
        "Lambda": cfg.cutoff, "grid": [solver_cfg.grid.nx, solver_cfg.grid.ny],
        "dt": solver_cfg.dt, "T": horizon, "paths": cfg.paths,
        "J": cfg.noise.channels if cfg.noise else 0,
        "mu_decay": cfg.noise.decay if cfg.noise else None,
        "noise_summability": cfg.noise.summability if cfg.noise else None,
        "steps": solver_cfg.steps,
    }
    write_manifest(cfg.out_dir, "simulate", cfg.raw, cfg.seed, resolution, outputs)
    return 2 if violation else 0


def _run_verify_cluster(cfg: RunConfig) -> int:
    basis = build_basis(cfg.lx, cfg.ly, cfg.bc, cfg.cutoff)
    reports = verify_mod.verify_cluster(basis, cfg.sweep)
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    summary = []
    entries = []
    failed = False
    for q, rep in sorted(reports.items()):
        for lam, ratio in zip(rep.lambdas, rep.max_ratios):
            rows.append([q, lam, ratio])
        summary.append([q, rep.slope, rep.rho, rep.tolerance, rep.passed])
        entries.append(rep.ledger_entry())
        failed = failed or not rep.passed
    stamp = f"config_hash={config_hash(cfg.raw)} seed={cfg.seed}"
    outputs = [
        write_csv(cfg.out_dir / "cluster.csv", ["q", "lambda", "max_ratio"],
                  rows, preamble=stamp),
        write_csv(cfg.out_dir / "cluster_summary.csv",
                  ["q", "slope", "rho", "tolerance", "passed"], summary,
                  preamble=stamp),
    ]
    ledger = build_ledger(entries)
    ledger_path = cfg.out_dir / "ledger.json"
    ledger_path.write_text(ledger.to_json() + "\n")
    outputs.append(ledger_path)
    resolution = {"Lambda": cfg.cutoff, "restarts": cfg.sweep.restarts,
                  "lambdas": [cfg.sweep.lambdas[0], cfg.sweep.lambdas[-1]]}
    write_manifest(cfg.out_dir, "verify-cluster", cfg.raw, cfg.seed, resolution, outputs)
    return 2 if failed else 0


def _run_verify_strichartz(cfg: RunConfig) -> int:
    reports = []
    triple = cfg.triple
    reports.append(verify_mod.verify_homogeneous_strichartz(
        cfg.bc, cfg.lx, cfg.ly, triple, cfg.sweep))
    if cfg.raw.get("sweep", {}).get("include_inhomogeneous", True):
        reports.append(verify_mod.verify_inhomogeneous_strichartz(
            cfg.bc, cfg.lx, cfg.ly, triple, cfg.sweep))
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    unstable = False
    entries = []
    for rep in reports:
        for cut, ratio in sorted(rep.max_ratios.items()):
            rows.append([rep.kind, cut, rep.triple.p, rep.triple.q,
                         rep.triple.r, ratio, rep.stable])
        entries.append(rep.ledger_entry())
        unstable = unstable or not rep.stable
    stamp = f"config_hash={config_hash(cfg.raw)} seed={cfg.seed}"
    outputs = [write_csv(
        cfg.out_dir / "strichartz.csv",
        ["kind", "Lambda", "p", "q", "r", "max_ratio", "stable"], rows,
        preamble=stamp)]
    ledger_path = cfg.out_dir / "ledger.json"
    ledger_path.write_text(build_ledger(entries).to_json() + "\n")
    outputs.append(ledger_path)
    resolution = {"Lambdas": list(cfg.sweep.cutoffs), "samples": cfg.sweep.samples,
                  "T": cfg.sweep.horizon, "nodes": cfg.sweep.nodes}
    write_manifest(cfg.out_dir, "verify-strichartz", cfg.raw, cfg.seed,
                   resolution, outputs)
    return 2 if unstable else 0


def _run_verify_stochastic(cfg: RunConfig) -> int:
    sweep_raw = cfg.raw.get("sweep", {})
    paths_list = sweep_raw.get("paths_list", [cfg.sweep.paths])
    reports = []
    entries = []
    for paths in paths_list:
        sweep = SweepSpec(
            inequality="verify-stochastic", cutoffs=cfg.sweep.cutoffs,
            horizon=cfg.sweep.horizon, nodes=cfg.sweep.nodes,
            paths=int(paths), decay=cfg.sweep.decay, seed=cfg.seed,
        )
        rep, ent = verify_mod.verify_stochastic(
            cfg.bc, cfg.lx, cfg.ly, cfg.triple, sweep,
            channels=int(sweep_raw.get("channels", 8)))
        reports.extend(rep)
        entries.extend(ent)
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    rows = [[r.p, r.horizon, r.cutoff, r.channels, r.paths, r.lhs, r.rhs,
             r.ratio, r.ci_low, r.ci_high] for r in reports]
    stamp = f"config_hash={config_hash(cfg.raw)} seed={cfg.seed}"
    outputs = [write_csv(
        cfg.out_dir / "moments.csv",
        ["p", "T", "Lambda", "J", "paths", "lhs", "rhs", "ratio",
         "ci_low", "ci_high"], rows, preamble=stamp)]
    ledger_path = cfg.out_dir / "ledger.json"
    ledger_path.write_text(build_ledger(entries).to_json() + "\n")
    outputs.append(ledger_path)
    bad = any(not math.isfinite(r.ratio) for r in reports)
    resolution = {"Lambdas": list(cfg.sweep.cutoffs), "paths": list(paths_list),
                  "T": cfg.sweep.horizon, "nodes": cfg.sweep.nodes}
    write_manifest(cfg.out_dir, "verify-stochastic", cfg.raw, cfg.seed,
                   resolution, outputs)
    return 2 if bad else 0


def _run_verify_stopped(cfg: RunConfig) -> int:
    rep = verify_mod.verify_stopped_identity(
        cfg.bc, cfg.lx, cfg.ly, cfg.sweep,
        channels=int(cfg.raw.get("sweep", {}).get("channels", 4)))
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    stamp = f"config_hash={config_hash(cfg.raw)} seed={cfg.seed}"
    outputs = [write_csv(
        cfg.out_dir / "stopped.csv",
        ["paths", "max_discrepancy", "Lambda", "J", "nodes"],
        [[rep.paths, rep.max_discrepancy, rep.cutoff, rep.channels, rep.nodes]],
        preamble=stamp)]
    resolution = {"Lambda": rep.cutoff, "paths": rep.paths, "nodes": rep.nodes}
    write_manifest(cfg.out_dir, "verify-stopped", cfg.raw, cfg.seed,
                   resolution, outputs)
    return 2 if rep.max_discrepancy >= 1e-12 else 0


def _run_admissible(args) -> int:
    p = _parse_exponent(args.p)
    q = _parse_exponent(args.q)
    try:
        r = admissible_r(p, q)
    except AdmissibilityError as exc:
        print(f"inadmissible: {exc}")
        return 1
    print(f"p={p} q={q} r={r}")
    print("admissible: yes")
    if args.r_check is not None:
        ok = validate_pair_condition(q, float(args.r_check))
        print(f"pair condition (q={q}, r={args.r_check}): {'holds' if ok else 'fails'}")
    return 0


def _run_ledger(cfg_args) -> int:
    out_dir = Path(cfg_args.out or os.environ.get("STOCHWAVE_OUTDIR", "out"))
    out_dir.mkdir(parents=True, exist_ok=True)
    if cfg_args.merge:
        ledgers = [ConstantsLedger.from_json(Path(f).read_text())
                   for f in cfg_args.merge]
        merged = build_ledger(*ledgers)
        path = out_dir / "ledger.json"
        path.write_text(merged.to_json() + "\n")
        print(f"merged {len(cfg_args.merge)} ledgers "
              f"({len(merged.entries)} entries) -> {path}")
        return 0
    if cfg_args.estimate:
        return _run_estimate(cfg_args, out_dir)
    print("ledger: nothing to do (use --merge or --estimate)")
    return 0


def _run_estimate(cfg_args, out_dir: Path) -> int:
    """Small full campaign producing a constants ledger + constants CSV."""
    cfg = parse_config(cfg_args.config, "verify-stochastic",
                       {"seed": cfg_args.seed} if cfg_args.seed is not None else {})
    basis = build_basis(cfg.lx, cfg.ly, cfg.bc, cfg.cutoff)
    grid = default_grid(basis)
    triple = cfg.triple
    entries: list[LedgerEntry] = []

    from .spectral import group_kernel_bound
    entries.append(LedgerEntry(
        name="group_bound_KT", value=group_kernel_bound(basis, cfg.sweep.horizon),
        resolution={"Lambda": cfg.cutoff, "T": cfg.sweep.horizon}, seed=cfg.seed))

    sweep = SweepSpec(inequality="cluster", qs=(4.0,),
                      lambdas=tuple(range(2, max(3, int(cfg.cutoff) - 1))),
                      restarts=50, seed=cfg.seed)
    for rep in verify_mod.verify_cluster(basis, sweep).values():
        entries.append(rep.ledger_entry())

    st_sweep = SweepSpec(inequality="strichartz", cutoffs=(cfg.cutoff,),
                         samples=50, nodes=51, seed=cfg.seed)
    entries.append(verify_mod.verify_homogeneous_strichartz(
        cfg.bc, cfg.lx, cfg.ly, triple, st_sweep).ledger_entry())
    entries.append(verify_mod.verify_inhomogeneous_strichartz(
        cfg.bc, cfg.lx, cfg.ly, triple, st_sweep).ledger_entry())

    mc_sweep = SweepSpec(inequality="stochastic", cutoffs=(cfg.cutoff,),
                         paths=500, nodes=51, seed=cfg.seed)
    _, mc_entries = verify_mod.verify_stochastic(cfg.bc, cfg.lx, cfg.ly, triple, mc_sweep)
    entries.extend(mc_entries)

    from .convolution import plain_martingale_ratio
    from .noise import WienerEnsemble
    dtm = mc_sweep.horizon / (mc_sweep.nodes - 1)
    xi_b = verify_mod.spanning_diffusion(basis, dtm * np.arange(mc_sweep.nodes), 4)
    ens_b = WienerEnsemble(seed=cfg.seed, paths=500, steps=mc_sweep.nodes - 1,
                           dt=dtm, channels=4)
    bp = plain_martingale_ratio(xi_b, ens_b, p=2.0)
    entries.append(LedgerEntry(
        name="martingale_Bp", value=bp.ratio, ci_low=bp.ci_low, ci_high=bp.ci_high,
        resolution={"p": 2.0, "Lambda": cfg.cutoff, "paths": 500}, seed=cfg.seed))

    budget = LipschitzBudget(m=0.5, m_prime=0.3, gamma=0.25)
    noise = build_noise_basis(basis, min(4, basis.size))
    est = estimate_lipschitz_constants(
        basis, grid, budget, ExponentialCritical(), triple,
        noise=noise, samples=200, seed=cfg.seed)
    entries.append(LedgerEntry(
        name="lipschitz_CF", value=est.c_f,
        resolution={"M": est.m, "gamma": est.gamma, "samples": est.samples,
                    "grid": [est.grid_nx, est.grid_ny]},
        seed=cfg.seed))
    entries.append(LedgerEntry(
        name="lipschitz_CG", value=est.c_g,
        resolution={"M": est.m, "gamma": est.gamma, "samples": est.samples,
                    "grid": [est.grid_nx, est.grid_ny]},
        seed=cfg.seed))

    from .nonlin import log_inequality_ratio, moser_trudinger_functional
    from .spectral import PhysicalField, SpectralField
    rng = np.random.Generator(np.random.Philox(key=np.array([cfg.seed, 7], dtype=np.uint64)))
    best_mt, best_log = 0.0, 0.0
    for _ in range(200):
        c = rng.standard_normal(basis.size) * (1.0 + basis.lam_sq) ** -1.0
        u = SpectralField(basis, c / np.linalg.norm(np.sqrt(1.0 + basis.lam_sq) * c))
        vals = grid.synth(u.coeffs)
        best_mt = max(best_mt, moser_trudinger_functional(
            PhysicalField(grid, vals), 4.0 * math.pi))
        best_log = max(best_log, log_inequality_ratio(u, 4.0, 0.5, grid))
    entries.append(LedgerEntry(
        name="moser_trudinger_C", value=best_mt,
        resolution={"alpha": 4.0 * math.pi, "Lambda": cfg.cutoff, "samples": 200},
        seed=cfg.seed))
    entries.append(LedgerEntry(
        name="log_inequality_C", value=best_log,
        resolution={"q": 4.0, "r": 0.5, "Lambda": cfg.cutoff, "samples": 200},
        seed=cfg.seed))

    ledger = build_ledger(entries)
    ledger_path = out_dir / "ledger.json"
    ledger_path.write_text(ledger.to_json() + "\n")
    const_csv = write_csv(
        out_dir / "constants.csv",
        ["M", "gamma", "samples", "C_F", "C_G", "grid_nx", "grid_ny", "seed"],
        [[est.m, est.gamma, est.samples, est.c_f, est.c_g,
          est.grid_nx, est.grid_ny, est.seed]],
        preamble=f"config_hash={config_hash(cfg.raw)} seed={cfg.seed}")
    write_manifest(out_dir, "ledger", cfg.raw, cfg.seed,
                   {"Lambda": cfg.cutoff}, [ledger_path, const_csv])
    print(f"wrote {ledger_path} with {len(ledger.entries)} entries")
    return 0


def run(cfg: RunConfig) -> int:
    """Execute a validated run; returns the process exit code."""
    dispatch = {
        "simulate": _run_simulate,
        "verify-cluster": _run_verify_cluster,
        "verify-strichartz": _run_verify_strichartz,
        "verify-stochastic": _run_verify_stochastic,
        "verify-stopped": _run_verify_stopped,
    }
    try:
        return dispatch[cfg.subcommand](cfg)
    except (ContractionError, BudgetError) as exc:
        print(f"error [solver]: {exc}", file=sys.stderr)
        return 1
    except (BasisError, AliasingError) as exc:
        print(f"error [spectral]: {exc}", file=sys.stderr)
        return 1
    except NonlinearityRangeError as exc:
        print(f"error [nonlinearity]: {exc}", file=sys.stderr)
        return 1
    except AdmissibilityError as exc:
        print(f"error [norms]: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error [io]: {exc}", file=sys.stderr)
        return 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="stochwave",
        description="Spectral simulator and verification harness for the "
                    "stochastic wave equation on rectangles.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def add_common(sp):
        sp.add_argument("--config", help="JSON config file")
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--paths", type=int, default=None)
        sp.add_argument("--threads", type=int, default=None,
                        help="worker threads; must not change results")
        sp.add_argument("--out", help="output directory "
                        "(default $STOCHWAVE_OUTDIR or ./out)")

    for name in ("simulate", "verify-cluster", "verify-strichartz",
                 "verify-stochastic", "verify-stopped"):
        add_common(sub.add_parser(name))

    adm = sub.add_parser("admissible", help="exponent triple arithmetic")
    adm.add_argument("--p", required=True)
    adm.add_argument("--q", required=True)
    adm.add_argument("--r-check", default=None,
                     help="also test the pair condition for this r")

    led = sub.add_parser("ledger", help="merge ledgers or estimate constants")
    led.add_argument("--merge", nargs="*", default=None,
                     help="ledger JSON files to merge")
    led.add_argument("--estimate", action="store_true",
                     help="run the constant-estimation campaign")
    led.add_argument("--config", help="JSON config file (for --estimate)")
    led.add_argument("--seed", type=int, default=None)
    led.add_argument("--out", help="output directory")

    args = parser.parse_args(argv)

    if args.subcommand == "admissible":
        return _run_admissible(args)
    if args.subcommand == "ledger":
        return _run_ledger(args)

    overrides = {}
    for key in ("seed", "paths", "threads", "out"):
        val = getattr(args, key, None)
        if val is not None:
            overrides[key] = val
    try:
        cfg = parse_config(args.config, args.subcommand, overrides)
    except ConfigError as exc:
        print("invalid configuration:", file=sys.stderr)
        for e in exc.errors:
            print(f"  - {e}", file=sys.stderr)
        return 1
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
