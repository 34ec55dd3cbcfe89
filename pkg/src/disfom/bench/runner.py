"""Sweep and race execution plus CSV/JSON emission.

Output layout (in the chosen --out directory):

    results.csv      one row per (method, d, replication); deterministic
    timings.csv      wall times for the same rows; machine-dependent
    aggregate.csv    per (method, d) means over replications; deterministic
    manifest.json    config echo, versions, normalization cross-check
    race_trials.csv / race.csv            timing-race outputs
    fig1_*.csv, fig2_*.csv, fig3_*.csv    plot-ready tables

Deterministic files are byte-identical across reruns with the same config
and seeds; anything carrying wall-clock time is excluded from that contract.
Floats serialize with 17 significant digits.
"""

from __future__ import annotations

import csv
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from math import exp, log
from pathlib import Path

import numpy as np

from ..core import Euclidean, L1Squared
from ..optimizers import OptimizerConfig, RunTrace, SmdConfig, disfom_run, smd_run
from ..prox import prox_l1sq_box, prox_l1sq_l1box
from ..admm import AdmmConfig, admm_solve_box, admm_solve_l1box, case1_objective
from ..core import residual_inf
from ..problems import (
    SyntheticOracle,
    SyntheticQpSpec,
    exact_gradient,
    exact_value,
    generate_instance,
    reference_optimum,
)
from ..sampling import Minibatch, Spider
from .config import KNOWN_METHODS, BenchConfig, ConfigError, validate_config

__all__ = ["ResultRow", "run_dimension_sweep", "run_timing_race", "emit_plot_data"]


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _derive_seed(*entropy: int) -> int:
    return int(np.random.SeedSequence(entropy=list(entropy)).generate_state(1)[0])


@dataclass(frozen=True)
class ResultRow:
    method: str
    d: int
    replication: int
    seed: int
    gap: float
    residual: float
    relative_gap: float
    relative_residual: float
    total_samples: int
    wall_time: float


def _smd_config(cfg: BenchConfig, inst, K: int) -> SmdConfig:
    d = inst.d
    p = 1.0 + 1.0 / log(d)
    C = exp(2) * log(d)
    rho_weak = cfg.lambda_reg / 2.0 - inst.sigma_sq
    f1 = exact_value(inst, np.zeros(d))
    c = (f1 / (rho_weak * inst.lipschitz**2)) ** 0.5
    return SmdConfig(
        p_exponent=p,
        strong_convexity_scale=C,
        step=c / K**0.5,
        subproblem_tol=cfg.smd_subproblem_tol,
        max_inner=cfg.smd_max_inner,
    )


def _run_method(method: str, cfg: BenchConfig, inst, run_seed: int) -> RunTrace:
    eta = 1.0 / inst.lipschitz
    mb = Minibatch(cfg.mb_m)
    vr = Spider(cfg.vr_q0, cfg.vr_m1, cfg.vr_m)
    x1 = np.zeros(inst.d)
    oracle = SyntheticOracle(inst)
    if method == "DISFOM_minibatch":
        oc = OptimizerConfig(eta, cfg.mb_K, L1Squared(cfg.rho_hat_minibatch), mb,
                             inst.region, run_seed, record_every=cfg.mb_K)
        return disfom_run(oracle, x1, oc)
    if method == "DISFOM_vr":
        oc = OptimizerConfig(eta, cfg.vr_K, L1Squared(cfg.rho_hat_vr), vr,
                             inst.region, run_seed, record_every=cfg.vr_K)
        return disfom_run(oracle, x1, oc)
    if method == "SGD":
        oc = OptimizerConfig(eta, cfg.mb_K, Euclidean(), mb,
                             inst.region, run_seed, record_every=cfg.mb_K)
        return disfom_run(oracle, x1, oc)
    if method == "SPIDER":
        oc = OptimizerConfig(cfg.spider_eta_scale * eta, cfg.vr_K, Euclidean(), vr,
                             inst.region, run_seed, record_every=cfg.vr_K)
        return disfom_run(oracle, x1, oc)
    if method == "SMD_minibatch":
        oc = OptimizerConfig(eta, cfg.mb_K, Euclidean(), mb,
                             inst.region, run_seed, record_every=cfg.mb_K)
        return smd_run(oracle, x1, oc, _smd_config(cfg, inst, cfg.mb_K))
    if method == "SMD_vr":
        oc = OptimizerConfig(eta, cfg.vr_K, Euclidean(), vr,
                             inst.region, run_seed, record_every=cfg.vr_K)
        return smd_run(oracle, x1, oc, _smd_config(cfg, inst, cfg.vr_K))
    raise ConfigError(f"unknown method {method!r}")


def _sweep_task(args) -> ResultRow:
    """One (method, d, replication) run; importable top-level for workers."""
    method, d, rep, cfg, f_star = args
    inst_seed = _derive_seed(cfg.base_seed, 1, d, rep)
    inst = generate_instance(SyntheticQpSpec(
        d=d, seed=inst_seed, lambda_reg=cfg.lambda_reg,
        box_half_width=cfg.box_half_width, trunc=cfg.trunc, sub_block=cfg.sub_block,
    ))
    run_seed = _derive_seed(cfg.base_seed, 2, KNOWN_METHODS.index(method), d, rep)
    start = time.perf_counter()
    trace = _run_method(method, cfg, inst, run_seed)
    wall = time.perf_counter() - start
    out = trace.output
    gap = exact_value(inst, out) - f_star
    resid = residual_inf(out, exact_gradient(inst, out), inst.region).residual_inf
    return ResultRow(
        method, d, rep, run_seed, gap, resid,
        float("nan"), float("nan"), trace.total_evaluations, wall,
    )


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def run_dimension_sweep(
    cfg: BenchConfig, out_dir: str | Path, workers: int | None = None
) -> list[str]:
    """Run every (method, d, replication) tuple and emit the sweep files.

    Returns a list of failure descriptions (empty on full success); failed
    tuples are recorded in the manifest and skipped in the CSVs.
    """
    errs = validate_config(cfg)
    if errs:
        raise ConfigError("; ".join(errs))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    workers = cfg.workers if workers is None else workers

    # f* once per (d, replication), shared by all methods of that pair.
    f_star: dict[tuple[int, int], float] = {}
    for d in cfg.dims:
        for rep in range(cfg.replications):
            inst_seed = _derive_seed(cfg.base_seed, 1, d, rep)
            inst = generate_instance(SyntheticQpSpec(
                d=d, seed=inst_seed, lambda_reg=cfg.lambda_reg,
                box_half_width=cfg.box_half_width, trunc=cfg.trunc,
                sub_block=cfg.sub_block,
            ))
            f_star[(d, rep)] = reference_optimum(inst)[1]

    tasks = [
        (method, d, rep, cfg, f_star[(d, rep)])
        for method in cfg.methods
        for d in cfg.dims
        for rep in range(cfg.replications)
    ]
    rows: dict[tuple[str, int, int], ResultRow] = {}
    failures: list[str] = []
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for task, result in zip(tasks, pool.map(_sweep_task_safe, tasks)):
                _collect(task, result, rows, failures)
    else:
        for task in tasks:
            _collect(task, _sweep_task_safe(task), rows, failures)

    base_d = min(cfg.dims)
    finished: list[ResultRow] = []
    for method in cfg.methods:
        for d in cfg.dims:
            for rep in range(cfg.replications):
                row = rows.get((method, d, rep))
                if row is None:
                    continue
                base = rows.get((method, base_d, rep))
                rel_gap = row.gap / base.gap if base and base.gap != 0 else float("nan")
                rel_res = (
                    row.residual / base.residual
                    if base and base.residual != 0
                    else float("nan")
                )
                finished.append(ResultRow(
                    row.method, row.d, row.replication, row.seed, row.gap,
                    row.residual, rel_gap, rel_res, row.total_samples, row.wall_time,
                ))

    _write_csv(
        out / "results.csv",
        ["method", "d", "replication", "seed", "gap", "residual_inf",
         "relative_gap", "relative_residual", "total_samples"],
        [[r.method, r.d, r.replication, r.seed, _fmt(r.gap), _fmt(r.residual),
          _fmt(r.relative_gap), _fmt(r.relative_residual), r.total_samples]
         for r in finished],
    )
    _write_csv(
        out / "timings.csv",
        ["method", "d", "replication", "wall_time_sec"],
        [[r.method, r.d, r.replication, _fmt(r.wall_time)] for r in finished],
    )

    agg_rows = []
    norm_check = {}
    for method in cfg.methods:
        for d in cfg.dims:
            group = [r for r in finished if r.method == method and r.d == d]
            if not group:
                continue
            base_group = [r for r in finished if r.method == method and r.d == base_d]
            mean = lambda vals: float(np.mean(vals)) if vals else float("nan")
            mean_gap = mean([r.gap for r in group])
            mean_res = mean([r.residual for r in group])
            mean_rel_gap = mean([r.relative_gap for r in group])
            mean_rel_res = mean([r.relative_residual for r in group])
            base_mean_gap = mean([r.gap for r in base_group])
            base_mean_res = mean([r.residual for r in base_group])
            agg_rows.append([
                method, d, len(group), _fmt(mean_gap), _fmt(mean_res),
                _fmt(mean_rel_gap), _fmt(mean_rel_res),
                group[0].total_samples,
            ])
            norm_check[f"{method}@{d}"] = {
                "normalize_then_average": {"gap": mean_rel_gap, "residual": mean_rel_res},
                "average_then_normalize": {
                    "gap": mean_gap / base_mean_gap if base_mean_gap else float("nan"),
                    "residual": mean_res / base_mean_res if base_mean_res else float("nan"),
                },
            }
    _write_csv(
        out / "aggregate.csv",
        ["method", "d", "replications", "mean_gap", "mean_residual_inf",
         "mean_relative_gap", "mean_relative_residual", "total_samples"],
        agg_rows,
    )

    manifest = {
        "kind": "dimension_sweep",
        "config": cfg.to_dict(),
        "versions": _versions(),
        "deterministic_files": ["results.csv", "aggregate.csv", "manifest.json"],
        "machine_dependent_files": ["timings.csv"],
        "relative_metric_orders": norm_check,
        "failures": failures,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return failures


def _sweep_task_safe(task):
    try:
        return _sweep_task(task)
    except Exception as exc:  # recorded, not fatal: partial runs exit nonzero
        return f"{type(exc).__name__}: {exc}"


def _collect(task, result, rows, failures):
    method, d, rep = task[0], task[1], task[2]
    if isinstance(result, ResultRow):
        rows[(method, d, rep)] = result
    else:
        failures.append(f"{method} d={d} rep={rep}: {result}")


def _versions() -> dict:
    from .. import __version__

    return {
        "package": __version__,
        "numpy": np.__version__,
        "python": sys.version.split()[0],
    }


# ---------------------------------------------------------------------------
# Subproblem timing race
# ---------------------------------------------------------------------------


def run_timing_race(cfg: BenchConfig, out_dir: str | Path) -> list[str]:
    """Time the specialized solvers against ADMM on random subproblems.

    For each dimension and constraint family, 10 (configurable) trials draw
    fresh inputs, run the bisection solver, then run ADMM with the race
    protocol: stop when ADMM's feasible iterate beats the specialized
    objective or when it exceeds the configured multiple of the specialized
    wall time.  Runs single-threaded so timings are comparable.
    """
    errs = validate_config(cfg)
    if errs:
        raise ConfigError("; ".join(errs))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    bound = cfg.race_box_bound
    trial_rows = []
    agg_rows = []
    for family_idx, family in enumerate(("box", "l1box")):
        for d in cfg.race_dims:
            lower = np.full(d, -bound)
            upper = np.full(d, bound)
            beta = (
                0.1 + 0.3 * log(d) if family == "box" else 100.0 + 300.0 * log(d)
            )
            multiple = (
                cfg.race_time_multiple_box
                if family == "box"
                else cfg.race_time_multiple_l1box
            )
            spec_times, admm_times, gaps = [], [], []
            for trial in range(cfg.race_trials):
                rng = np.random.default_rng(np.random.SeedSequence(
                    entropy=[cfg.base_seed, 3, family_idx, d, trial]
                ))
                if family == "box":
                    v = rng.standard_normal(d)
                    w = rng.standard_normal(d)  # drawn per protocol, unused here
                    t0 = time.perf_counter()
                    sol = prox_l1sq_box(v, cfg.race_rho_hat, lower, upper, tol=1e-10)
                    t_spec = time.perf_counter() - t0
                    obj_spec = case1_objective(sol.z, v, cfg.race_rho_hat)
                    res = admm_solve_box(
                        v, cfg.race_rho_hat, lower, upper,
                        AdmmConfig(beta, max_iters=10**6,
                                   max_wall_time=multiple * t_spec,
                                   value_target=obj_spec),
                    )
                else:
                    v = rng.uniform(-50.0, 50.0, d)
                    w = rng.uniform(-20.0, 20.0, d)
                    t0 = time.perf_counter()
                    sol = prox_l1sq_l1box(
                        v, cfg.race_rho_hat, w, cfg.race_alpha, lower, upper,
                        tol=1e-6, ball_tol=1e-12,
                    )
                    t_spec = time.perf_counter() - t0
                    obj_spec = case1_objective(sol.z, v, cfg.race_rho_hat)
                    res = admm_solve_l1box(
                        v, cfg.race_rho_hat, w, cfg.race_alpha, lower, upper,
                        AdmmConfig(beta, max_iters=10**6,
                                   max_wall_time=multiple * t_spec,
                                   value_target=obj_spec),
                    )
                gap = res.objective - obj_spec
                spec_times.append(t_spec)
                admm_times.append(res.wall_time)
                gaps.append(gap)
                trial_rows.append([
                    family, d, trial, _fmt(t_spec), _fmt(res.wall_time),
                    _fmt(obj_spec), _fmt(res.objective), _fmt(gap), res.iterations,
                ])
            agg_rows.append([d, family, "specialized", _fmt(float(np.mean(spec_times))),
                             _fmt(0.0), cfg.race_trials])
            agg_rows.append([d, family, "admm", _fmt(float(np.mean(admm_times))),
                             _fmt(float(np.mean(gaps))), cfg.race_trials])
    _write_csv(
        out / "race_trials.csv",
        ["family", "d", "trial", "time_specialized_sec", "time_admm_sec",
         "objective_specialized", "objective_admm", "objective_gap", "admm_iterations"],
        trial_rows,
    )
    _write_csv(
        out / "race.csv",
        ["d", "family", "solver", "mean_time_sec", "mean_objective_gap", "trials"],
        agg_rows,
    )
    manifest = {
        "kind": "timing_race",
        "config": cfg.to_dict(),
        "versions": _versions(),
        "machine_dependent_files": ["race_trials.csv", "race.csv"],
    }
    (out / "manifest_race.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return []


# ---------------------------------------------------------------------------
# Plot-ready tables
# ---------------------------------------------------------------------------

_FIG_GROUPS = {
    "fig2_minibatch": (("DISFOM_minibatch", "SGD", "SMD_minibatch"), "mean_relative_gap"),
    "fig2_vr": (("DISFOM_vr", "SPIDER", "SMD_vr"), "mean_relative_gap"),
    "fig3_minibatch": (("DISFOM_minibatch", "SGD", "SMD_minibatch"), "mean_relative_residual"),
    "fig3_vr": (("DISFOM_vr", "SPIDER", "SMD_vr"), "mean_relative_residual"),
}


def emit_plot_data(out_dir: str | Path) -> list[Path]:
    """Derive one CSV per figure from the sweep/race outputs in ``out_dir``."""
    out = Path(out_dir)
    written: list[Path] = []
    agg = out / "aggregate.csv"
    if agg.exists():
        with agg.open() as fh:
            rows = list(csv.DictReader(fh))
        if not rows:
            raise ConfigError(f"{agg} is empty")
        for name, (methods, column) in _FIG_GROUPS.items():
            if not any(r["method"] in methods for r in rows):
                continue
            path = out / f"{name}.csv"
            _write_csv(
                path,
                ["log2_d", "method", "mean_relative_metric"],
                [[_fmt(log(int(r["d"]), 2)), r["method"], r[column]]
                 for r in rows if r["method"] in methods],
            )
            written.append(path)
    race = out / "race.csv"
    if race.exists():
        with race.open() as fh:
            rows = list(csv.DictReader(fh))
        for family in ("box", "l1box"):
            fam_rows = [r for r in rows if r["family"] == family]
            if not fam_rows:
                continue
            path = out / f"fig1_{family}.csv"
            _write_csv(
                path,
                ["log2_d", "solver", "mean_time_sec"],
                [[_fmt(log(int(r["d"]), 2)), r["solver"], r["mean_time_sec"]]
                 for r in fam_rows],
            )
            written.append(path)
    if not written:
        raise ConfigError(f"no result files found in {out}")
    return written
