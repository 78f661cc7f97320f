"""Command-line front end.

Subcommands: ``analytic``, ``simulate``, ``optimize``, ``figures``.
Exit status: 0 on success (an infeasible design is a valid answer),
1 for configuration errors, 2 for numerical failures.
"""
from __future__ import annotations

import argparse
import dataclasses
import os
import sys

from . import kernels, optimizer, sweeps
from . import config as config_mod
from .config import ConfigError, RunConfig
from .errors import NumericalError, ParameterError
from .montecarlo import EXHAUSTIVE, RB, write_trial_records, estimate

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="YAML run configuration")
    p.add_argument("--lambda", dest="lam", type=float, help="BS density per m^2")
    p.add_argument("--n-bs", type=int, help="BS sector count")
    p.add_argument("--n-ue", type=int, help="UE sector count")
    p.add_argument("--t", dest="sinr_threshold", type=float, help="linear SINR threshold")
    p.add_argument("--t0-seconds", type=float, help="minimum mini-slot duration in seconds")
    p.add_argument("--n-c", type=int, help="mini-slot budget")
    p.add_argument("--mode", choices=[RB, EXHAUSTIVE])
    p.add_argument("--quad-rel-tol", dest="rel_tol", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--out", dest="output", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cellsearch", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analytic", help="evaluate the closed forms over a sweep")
    _common(p)

    p = sub.add_parser("simulate", help="Monte Carlo estimates next to the analytic values")
    _common(p)
    p.add_argument("--bs-schedule", choices=["iid", "cycle-permutation"])
    p.add_argument("--ue-schedule", choices=["iid-per-cycle", "sequential-per-cycle"])
    p.add_argument("--fresh-topology", dest="fresh_topology_per_slot", action="store_const", const=True,
                   help="redraw the network every mini-slot (i.i.d. slots)")
    p.add_argument("--records", action="store_true", help="also write per-trial records (unswept runs only)")

    p = sub.add_parser("optimize", help="choose N_BS under a failure-probability cap")
    _common(p)
    p.add_argument("--k", type=int, help="scan cycles")
    p.add_argument("--p-f-max", type=float, help="failure-probability cap")
    p.add_argument("--n-bs-min", type=int, help="smallest N_BS to evaluate")
    p.add_argument("--n-bs-max", type=int, help="largest N_BS to evaluate")

    p = sub.add_parser("figures", help="write the figure tables")
    _common(p)
    p.add_argument("--sim-trials", type=int, help="add Monte Carlo columns to fig2 with this many trials")
    return parser


def resolve_config(args) -> RunConfig:
    cfg = config_mod.load(args.config) if args.config else RunConfig()
    overrides = {k: getattr(args, k, None) for k in (
        "lam", "n_bs", "n_ue", "sinr_threshold", "t0_seconds", "n_c", "mode", "rel_tol",
        "seed", "trials", "workers", "output", "bs_schedule", "ue_schedule",
        "fresh_topology_per_slot", "k", "p_f_max", "n_bs_min", "n_bs_max")}
    overrides["t0_seconds"] = getattr(args, "t0_seconds", None)
    cfg = config_mod.with_overrides(cfg, **overrides)
    if getattr(args, "sim_trials", None) is not None:
        cfg = dataclasses.replace(cfg, figure_sim_trials=args.sim_trials)
    return cfg


def _prepare_output(cfg: RunConfig):
    os.makedirs(cfg.output, exist_ok=True)
    with open(os.path.join(cfg.output, "effective_config.yaml"), "w", encoding="utf-8") as fh:
        fh.write(cfg.dump())


def _print_rows(rows, simulate=False):
    for r in rows:
        label = f"{r['variable']}={r['value']} " if r["variable"] else ""
        line = (f"{label}[{r['mode']}] n_c={r['n_c']} P_s={r['p_s']:.6g} P_f={r['p_f']:.6g} "
                f"P_noLoS={r['p_no_los']:.6g} E[L]={r['latency_slots']:.6g} slots "
                f"= {r['latency_t0']:.6g} t0")
        if simulate:
            line += (f" | MC P_f={r['p_f_mc']:.6g}±{r['p_f_mc_hw']:.2g}"
                     f" E[L]={r['latency_slots_mc']:.6g}±{r['latency_slots_mc_hw']:.2g} slots")
        print(line)


def cmd_analytic(cfg: RunConfig) -> int:
    _prepare_output(cfg)
    rows = sweeps.run_analytic(cfg)
    path = os.path.join(cfg.output, "analytic.csv")
    sweeps.write_csv(path, sweeps.columns_for(cfg, simulate=False), rows)
    _print_rows(rows)
    print(f"max quadrature error estimate: {sweeps.max_quad_error(rows):.3g}")
    print(f"wrote {path}")
    return EXIT_OK


def cmd_simulate(cfg: RunConfig, records: bool = False) -> int:
    _prepare_output(cfg)
    print(f"kernel backend: {kernels.BACKEND}")
    rows = sweeps.run_simulation(cfg)
    path = os.path.join(cfg.output, "simulate.csv")
    sweeps.write_csv(path, sweeps.columns_for(cfg, simulate=True), rows)
    _print_rows(rows, simulate=True)
    if records and cfg.sweep is None:
        params, n_c = sweeps.point_settings(cfg, None, "")
        protocol = dataclasses.replace(cfg.protocol, n_c=n_c)
        sim = estimate(params, protocol, cfg.trials, cfg.seed, workers=cfg.workers, keep_records=True)
        rec_path = os.path.join(cfg.output, "trials.csv")
        write_trial_records(rec_path, sim)
        print(f"wrote {rec_path}")
    print(f"max quadrature error estimate: {sweeps.max_quad_error(rows):.3g}")
    print(f"wrote {path}")
    return EXIT_OK


FRONTIER_COLUMNS = ["n_bs", "n_ue", "k", "n_c", "p_f", "latency_t0", "feasible", "optimal"]
SOLUTION_COLUMNS = ["status", "n_bs_opt", "n_ue_opt", "latency_t0", "p_f_achieved", "p_f_max", "p_no_los_floor"]


def cmd_optimize(cfg: RunConfig) -> int:
    _prepare_output(cfg)
    d = cfg.design
    try:
        problem = optimizer.DesignProblem(
            p_f_max=d.p_f_max, k=d.k, n_bs_range=(d.n_bs_min, d.n_bs_max),
            base=cfg.network, n_ue_values=d.n_ue_values)
    except ParameterError as exc:
        raise ConfigError(f"design: {exc}") from exc
    sol = optimizer.solve(problem, cfg.quadrature)
    frontier_rows = [
        {"n_bs": pt.n_bs, "n_ue": pt.n_ue, "k": d.k, "n_c": d.k * pt.n_bs, "p_f": pt.p_f,
         "latency_t0": pt.latency_t0, "feasible": pt.feasible,
         "optimal": sol.feasible and pt.n_bs == sol.n_bs_opt and pt.n_ue == sol.n_ue_opt}
        for pt in sol.frontier
    ]
    sweeps.write_csv(os.path.join(cfg.output, "frontier.csv"), FRONTIER_COLUMNS, frontier_rows)
    status = "optimal" if sol.feasible else "infeasible"
    sweeps.write_csv(os.path.join(cfg.output, "solution.csv"), SOLUTION_COLUMNS, [{
        "status": status, "n_bs_opt": sol.n_bs_opt, "n_ue_opt": sol.n_ue_opt,
        "latency_t0": sol.latency_t0, "p_f_achieved": sol.p_f_achieved,
        "p_f_max": d.p_f_max, "p_no_los_floor": sol.p_no_los_floor,
    }])
    if sol.feasible:
        print(f"optimal N_BS={sol.n_bs_opt} (N_UE={sol.n_ue_opt}, k={d.k}): "
              f"E[L]={sol.latency_t0:.6g} t0, P_f={sol.p_f_achieved:.6g} <= {d.p_f_max:g}")
    else:
        print(f"infeasible: no N_BS in [{d.n_bs_min}, {d.n_bs_max}] meets P_f <= {d.p_f_max:g}; "
              f"P_no-LoS floor is {sol.p_no_los_floor:.6g}")
        if d.p_f_max < sol.p_no_los_floor:
            print("the cap is below the blockage floor: no beamwidth or budget can meet it")
        else:
            print("the cap is above the floor: more scan cycles (larger k) may make it feasible")
    errs = sweeps.quad_errors([cfg.network.replace(n_bs=pt.n_bs, n_ue=pt.n_ue) for pt in sol.frontier],
                              cfg.quadrature)
    print(f"max quadrature error estimate: {errs:.3g}")
    print(f"wrote {os.path.join(cfg.output, 'frontier.csv')}")
    return EXIT_OK


def cmd_figures(cfg: RunConfig) -> int:
    _prepare_output(cfg)
    for path in sweeps.write_figures(cfg, cfg.output):
        print(f"wrote {path}")
    base = cfg.network
    figure_params = [base.replace(n_bs=n) for n in range(1, 21)] + [base.replace(n_bs=12, lam=1e-4)]
    print(f"max quadrature error estimate: {sweeps.quad_errors(figure_params, cfg.quadrature):.3g}")
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        if args.command == "analytic":
            return cmd_analytic(cfg)
        if args.command == "simulate":
            return cmd_simulate(cfg, records=args.records)
        if args.command == "optimize":
            return cmd_optimize(cfg)
        return cmd_figures(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (sweeps.SweepError, NumericalError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
