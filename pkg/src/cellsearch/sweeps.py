"""Parameter sweeps and figure tables, written as CSV.

Column sets are fixed per command (see ``ANALYTIC_COLUMNS`` and
``SIMULATION_COLUMNS``); floats are written with ``repr`` so values parse
back bit-exactly.
"""
from __future__ import annotations

import csv
import dataclasses
import os
from typing import Iterable, Optional

import numpy as np

from . import analytic, montecarlo
from .analytic import QuadratureConfig
from .config import RunConfig
from .errors import NumericalError
from .model import NetworkParams

SCHEMA_VERSION = 1

ANALYTIC_COLUMNS = [
    "variable", "value", "mode", "lambda", "n_bs", "n_ue", "n_c",
    "p_s", "p_no_los", "p_f", "latency_slots", "latency_t0", "quad_error",
]
SECONDS_COLUMN = "latency_seconds"
SIMULATION_COLUMNS = [
    "trials", "p_s_mc", "p_s_mc_hw", "p_f_mc", "p_f_mc_hw",
    "latency_slots_mc", "latency_slots_mc_hw", "latency_t0_mc", "latency_t0_mc_hw",
]

FIG2_LAMBDAS = tuple(float(x) for x in np.logspace(-4, -2, 21))
FIG2_CYCLES = (1, 10, 100, 1000)


class SweepError(RuntimeError):
    """A sweep point failed numerically; ``value`` names the point."""

    def __init__(self, value, cause):
        super().__init__(f"sweep value {value!r}: {cause}")
        self.value = value


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_csv(path, columns, rows: Iterable[dict]):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([fmt(row.get(c)) for c in columns])


def point_settings(cfg: RunConfig, variable: Optional[str], value):
    """Network parameters and slot budget for one sweep point."""
    params = cfg.network
    n_c = cfg.protocol.n_c
    if variable == "lambda":
        params = params.replace(lam=float(value))
    elif variable == "n_bs":
        params = params.replace(n_bs=int(value))
    elif variable == "n_c":
        n_c = int(value)
    elif variable == "k":
        n_c = int(value) * params.n_bs
    if cfg.protocol.mode == montecarlo.EXHAUSTIVE:
        n_c = params.n_bs * params.n_ue
    return params, n_c


def analytic_row(params: NetworkParams, n_c: int, mode: str, quad: QuadratureConfig,
                 variable="", value="") -> dict:
    res = analytic.evaluate(n_c, params, quad)
    row = {
        "variable": variable, "value": value, "mode": mode,
        "lambda": params.lam, "n_bs": params.n_bs, "n_ue": params.n_ue, "n_c": n_c,
        "p_s": res.p_s, "p_no_los": res.p_no_los, "p_f": res.p_f,
        "latency_slots": res.expected_latency_slots, "latency_t0": res.expected_latency_t0,
        SECONDS_COLUMN: res.expected_latency_seconds, "quad_error": res.quadrature_error_estimate,
    }
    if mode == montecarlo.EXHAUSTIVE:
        p_f, latency_t0 = analytic.exhaustive_baseline(params, quad)
        row.update(p_f=p_f, latency_slots=float(n_c), latency_t0=latency_t0)
        if params.t0_seconds is not None:
            row[SECONDS_COLUMN] = latency_t0 * params.t0_seconds
    return row


def sweep_points(cfg: RunConfig):
    if cfg.sweep is None:
        return [("", "")]
    return [(cfg.sweep.variable, v) for v in cfg.sweep.values]


def columns_for(cfg: RunConfig, simulate: bool):
    cols = list(ANALYTIC_COLUMNS)
    if cfg.network.t0_seconds is not None:
        cols.insert(cols.index("quad_error"), SECONDS_COLUMN)
    if simulate:
        cols += SIMULATION_COLUMNS
    return cols


def run_analytic(cfg: RunConfig) -> list:
    rows = []
    for variable, value in sweep_points(cfg):
        params, n_c = point_settings(cfg, variable or None, value)
        try:
            rows.append(analytic_row(params, n_c, cfg.protocol.mode, cfg.quadrature, variable, value))
        except NumericalError as exc:
            raise SweepError(value, exc) from exc
    return rows


def run_simulation(cfg: RunConfig) -> list:
    rows = []
    for variable, value in sweep_points(cfg):
        params, n_c = point_settings(cfg, variable or None, value)
        try:
            row = analytic_row(params, n_c, cfg.protocol.mode, cfg.quadrature, variable, value)
        except NumericalError as exc:
            raise SweepError(value, exc) from exc
        protocol = dataclasses.replace(cfg.protocol, n_c=n_c)
        sim = montecarlo.estimate(params, protocol, cfg.trials, cfg.seed, workers=cfg.workers)
        row.update(simulation_columns(sim))
        rows.append(row)
    return rows


def simulation_columns(sim: montecarlo.SimulationResult) -> dict:
    ps, pf = sim.metric("p_s"), sim.metric("p_f")
    ls, lt = sim.metric("latency_slots"), sim.metric("latency_t0")
    return {
        "trials": sim.n_trials,
        "p_s_mc": ps.mean, "p_s_mc_hw": ps.half_width_95,
        "p_f_mc": pf.mean, "p_f_mc_hw": pf.half_width_95,
        "latency_slots_mc": ls.mean, "latency_slots_mc_hw": ls.half_width_95,
        "latency_t0_mc": lt.mean, "latency_t0_mc_hw": lt.half_width_95,
    }


# -- figure tables --------------------------------------------------------------

FIGURE_FILES = ("fig2a.csv", "fig2b.csv", "fig3.csv", "fig4.csv", "fig5.csv")


def fig2_tables(base: NetworkParams, quad: QuadratureConfig, lambdas=FIG2_LAMBDAS,
                sim_trials: int = 0, seed: int = 0, workers: int = 1):
    """Failure probability and latency (slots) against density, N_BS fixed."""
    base = base.replace(n_bs=12)
    pf_cols = ["lambda", "p_no_los"] + [f"p_f_k{k}" for k in FIG2_CYCLES]
    lat_cols = ["lambda"] + [f"latency_slots_k{k}" for k in FIG2_CYCLES] + ["latency_slots_limit"]
    if sim_trials:
        pf_cols += ["p_f_mc_k1", "p_f_mc_k1_hw"]
        lat_cols += ["latency_slots_mc_k1", "latency_slots_mc_k1_hw"]
    pf_rows, lat_rows = [], []
    for lam in lambdas:
        params = base.replace(lam=lam)
        pf = {"lambda": lam, "p_no_los": analytic.p_no_los(lam, params.beta)}
        lat = {"lambda": lam, "latency_slots_limit": analytic.expected_latency_limit(params, quad).slots}
        for k in FIG2_CYCLES:
            n_c = k * params.n_bs
            pf[f"p_f_k{k}"] = analytic.p_failure(n_c, params, quad)
            lat[f"latency_slots_k{k}"] = analytic.expected_latency(n_c, params, quad).slots
        if sim_trials:
            protocol = montecarlo.ProtocolConfig(n_c=params.n_bs, bs_schedule="iid",
                                                 fresh_topology_per_slot=True)
            sim = montecarlo.estimate(params, protocol, sim_trials, seed, workers=workers)
            pf["p_f_mc_k1"] = sim.metric("p_f").mean
            pf["p_f_mc_k1_hw"] = sim.metric("p_f").half_width_95
            lat["latency_slots_mc_k1"] = sim.metric("latency_slots").mean
            lat["latency_slots_mc_k1_hw"] = sim.metric("latency_slots").half_width_95
        pf_rows.append(pf)
        lat_rows.append(lat)
    return (pf_cols, pf_rows), (lat_cols, lat_rows)


def fig3_table(base: NetworkParams, quad: QuadratureConfig, n_bs_values=range(1, 21)):
    """Exhaustive vs random-beamforming latency (t0 units) with budget N_BS*N_UE."""
    cols = ["n_bs", "exhaustive_t0", "rb_t0", "rb_limit_t0"]
    rows = []
    for n_bs in n_bs_values:
        params = base.replace(n_bs=n_bs)
        _, eh = analytic.exhaustive_baseline(params, quad)
        rb = analytic.expected_latency(n_bs * params.n_ue, params, quad).t0_units
        rows.append({"n_bs": n_bs, "exhaustive_t0": eh, "rb_t0": rb,
                     "rb_limit_t0": analytic.expected_latency_limit(params, quad).t0_units})
    return cols, rows


def exhaustive_failure_at_budget(n_c: int, params: NetworkParams, quad: QuadratureConfig) -> float:
    """Failure probability of exhaustive search restricted to ``n_c`` slots.

    Only completed sweeps count, so the curve is a staircase with steps at
    multiples of ``N_BS * N_UE``.
    """
    n_pairs = params.n_bs * params.n_ue
    sweeps = n_c // n_pairs
    if sweeps == 0:
        return 1.0
    return analytic.p_failure(sweeps * n_pairs, params, quad)


def fig4_table(base: NetworkParams, quad: QuadratureConfig, n_c_values=range(1, 121)):
    """Failure probability against slot budget for RB (two densities) and exhaustive."""
    base = base.replace(n_bs=12)
    sparse, dense = base.replace(lam=1e-4), base.replace(lam=1e-3)
    cols = ["n_c", "rb_lambda_1e-4", "rb_lambda_1e-3", "eh_lambda_1e-3"]
    rows = [
        {"n_c": n, "rb_lambda_1e-4": analytic.p_failure(n, sparse, quad),
         "rb_lambda_1e-3": analytic.p_failure(n, dense, quad),
         "eh_lambda_1e-3": exhaustive_failure_at_budget(n, dense, quad)}
        for n in n_c_values
    ]
    return cols, rows


def fig5_table(base: NetworkParams, quad: QuadratureConfig, n_bs_values=range(1, 21)):
    """Failure probability and latency (t0 units) against N_BS for k = 1, 2."""
    cols = ["n_bs", "p_f_k1", "p_f_k2", "latency_t0_k1", "latency_t0_k2"]
    rows = []
    for n_bs in n_bs_values:
        params = base.replace(n_bs=n_bs)
        row = {"n_bs": n_bs}
        for k in (1, 2):
            row[f"p_f_k{k}"] = analytic.p_failure(k * n_bs, params, quad)
            row[f"latency_t0_k{k}"] = analytic.expected_latency(k * n_bs, params, quad).t0_units
        rows.append(row)
    return cols, rows


def write_figures(cfg: RunConfig, out_dir) -> list:
    os.makedirs(out_dir, exist_ok=True)
    base, quad = cfg.network, cfg.quadrature
    lambdas = FIG2_LAMBDAS
    if cfg.sweep is not None and cfg.sweep.variable == "lambda":
        lambdas = cfg.sweep.values
    (c2a, r2a), (c2b, r2b) = fig2_tables(base, quad, lambdas, cfg.figure_sim_trials, cfg.seed, cfg.workers)
    tables = {
        "fig2a.csv": (c2a, r2a),
        "fig2b.csv": (c2b, r2b),
        "fig3.csv": fig3_table(base, quad),
        "fig4.csv": fig4_table(base, quad),
        "fig5.csv": fig5_table(base, quad),
    }
    paths = []
    for name in FIGURE_FILES:
        cols, rows = tables[name]
        path = os.path.join(out_dir, name)
        write_csv(path, cols, rows)
        paths.append(path)
    return paths


def max_quad_error(rows) -> float:
    errs = [r["quad_error"] for r in rows if r.get("quad_error") is not None]
    return max(errs) if errs else 0.0


def quad_errors(params_list, quad: QuadratureConfig) -> float:
    """Largest success-probability quadrature error over a set of configurations."""
    return max((analytic.p_success_with_error(p, quad)[1] for p in params_list), default=0.0)
