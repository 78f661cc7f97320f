"""Acceptance criteria, each at its stated tolerance.

Every test appends one PASS/FAIL line to ``conftest.ACCEPTANCE_LINES``;
the lines are printed in the terminal summary.
"""
import math
import time

import numpy as np
import pytest
from scipy import stats

import conftest
from cellsearch import analytic, montecarlo as mc
from cellsearch.model import NetworkParams
from cellsearch.optimizer import DesignProblem, solve


def rel(got, want):
    return abs(got / want - 1.0)


def report(number, title, checks):
    """Record one line for a criterion and fail the test if any check failed.

    ``checks`` is a list of ``(label, ok, detail)``.
    """
    ok = all(c[1] for c in checks)
    failed = [f"{label} ({detail})" for label, passed, detail in checks if not passed]
    shown = [f"{label} {detail}" for label, _, detail in checks if detail and not label.endswith(")")]
    detail = "; ".join(failed) if failed else f"{len(checks)} checks" + (f" ({'; '.join(shown)})" if shown else "")
    conftest.ACCEPTANCE_LINES.append(f"criterion {number} [{'PASS' if ok else 'FAIL'}] {title}: {detail}")
    assert ok, "; ".join(failed)


def point_checks(name, pairs, fn, tol):
    out = []
    for x, want in pairs:
        got = fn(x)
        out.append((f"{name}({x})", rel(got, want) <= tol, f"got {got:.9g}, want {want:.9g}"))
    return out


def test_criterion_1_blockage_floor():
    start = time.perf_counter()
    sparse = analytic.p_no_los(1e-4, 0.02)
    dense = analytic.p_no_los(1e-3, 0.02)
    elapsed = time.perf_counter() - start
    report(1, "P_no-LoS closed form", [
        ("lambda=1e-4", f"{sparse:.11e}" == f"{0.207879576350762:.11e}", f"got {sparse!r}"),
        ("lambda=1e-3", f"{dense:.11e}" == f"{1.50701727539007e-7:.11e}", f"got {dense!r}"),
        ("runtime", elapsed < 1e-3, f"{elapsed * 1e3:.3f} ms"),
    ])


def test_criterion_2_failure_vs_budget():
    start = time.perf_counter()
    dense, sparse = NetworkParams(), NetworkParams(lam=1e-4)
    checks = point_checks("P_f", [(1, 0.8324), (11, 0.132939), (48, 1.49948e-4), (86, 1.50702e-7)],
                          lambda n: analytic.p_failure(n, dense), 1e-3)
    checks += point_checks("P_f sparse", [(1, 0.9815)], lambda n: analytic.p_failure(n, sparse), 1e-3)
    elapsed = time.perf_counter() - start
    checks.append(("runtime", elapsed < 10.0, f"{elapsed:.2f} s"))
    report(2, "failure probability against budget", checks)


def test_criterion_3_latency_tables():
    base = NetworkParams()
    lat = lambda k: lambda n: analytic.expected_latency(k * n, base.replace(n_bs=n)).t0_units
    checks = point_checks("E[L] k=1", [(1, 12.0), (12, 4.47359), (20, 6.68122)], lat(1), 1e-3)
    checks += point_checks("E[L] k=2", [(12, 5.66936)], lat(2), 1e-3)
    # the stated reading: the unlimited-budget latency
    checks += point_checks("E[L] N_c->inf", [(1, 21.1633), (12, 5.95978), (20, 8.40400)],
                           lambda n: analytic.expected_latency_limit(base.replace(n_bs=n)).t0_units, 1e-3)
    for n_bs, want in [(1, 48.0), (20, 80.0)]:
        got = analytic.exhaustive_baseline(base.replace(n_bs=n_bs))[1]
        checks.append((f"exhaustive({n_bs})", got == want, f"got {got!r}"))
    report(3, "expected latency tables", checks)


def test_criterion_3_reference_budget_reading():
    """The same reference points with the budget N_c = N_BS * N_UE used to draw them."""
    base = NetworkParams()
    checks = point_checks("E[L] N_c=N_BS*N_UE", [(1, 21.1633), (12, 5.95978), (20, 8.40400)],
                          lambda n: analytic.expected_latency(n * 4, base.replace(n_bs=n)).t0_units, 1e-3)
    report("3 (budget N_BS*N_UE)", "random-beamforming latency points", checks)


def test_criterion_4_failure_tables():
    base = NetworkParams()
    pf = lambda k: lambda n: analytic.p_failure(k * n, base.replace(n_bs=n))
    checks = point_checks("P_f k=1", [(1, 0.517567), (12, 0.110676), (20, 0.0794422)], pf(1), 1e-3)
    checks += point_checks("P_f k=2", [(1, 0.267876), (12, 0.0122493)], pf(2), 1e-3)
    report(4, "failure probability against N_BS", checks)


def test_criterion_5_simulation_agreement():
    start = time.perf_counter()
    params = NetworkParams()
    n_c = 12
    n_trials = -(-1_000_000 // n_c)
    proto = mc.ProtocolConfig(n_c=n_c, bs_schedule="iid", ue_schedule="iid-per-cycle",
                              fresh_topology_per_slot=True)
    res = mc.estimate(params, proto, n_trials, master_seed=2024)
    p_s = analytic.p_success(params)
    p_f = analytic.p_failure(n_c, params)

    ps_mc = res.metric("p_s")
    se_s = math.sqrt(p_s * (1 - p_s) / ps_mc.n_trials)
    pf_mc = res.metric("p_f")
    se_f = math.sqrt(p_f * (1 - p_f) / n_trials)

    observed = res.histogram.astype(float)
    pmf = np.array([analytic.latency_pmf(n, n_c, params) for n in range(1, n_c + 1)])
    expected = pmf * observed.sum()
    chi2 = stats.chisquare(observed, expected)
    elapsed = time.perf_counter() - start

    report(5, "analytic and Monte Carlo agreement", [
        ("slots", ps_mc.n_trials >= 1_000_000, f"{ps_mc.n_trials}"),
        ("P_s", abs(ps_mc.mean - p_s) <= 3 * se_s,
         f"MC {ps_mc.mean:.6f} vs {p_s:.6f}, z={(ps_mc.mean - p_s) / se_s:+.2f}"),
        ("P_f at N_c=12", abs(pf_mc.mean - p_f) <= 3 * se_f,
         f"MC {pf_mc.mean:.6f} vs {p_f:.6f}, z={(pf_mc.mean - p_f) / se_f:+.2f}"),
        ("latency chi-square", chi2.pvalue > 0.01, f"p={chi2.pvalue:.3f}"),
        ("runtime", elapsed < 300, f"{elapsed:.1f} s"),
    ])


def test_criterion_6_optimizer():
    base = NetworkParams()
    sol = solve(DesignProblem(p_f_max=0.15, k=1, n_bs_range=(1, 20), base=base))
    # independent enumeration of the same frontier
    table = [(analytic.expected_latency(n, base.replace(n_bs=n)).t0_units,
              analytic.p_failure(n, base.replace(n_bs=n)), n) for n in range(1, 21)]
    enum_best = min((lat, n) for lat, p_f, n in table if p_f <= 0.15)
    infeasible = solve(DesignProblem(p_f_max=1e-8, k=1, n_bs_range=(1, 20), base=base))
    report(6, "beamwidth optimizer", [
        ("N_BS*", sol.n_bs_opt == 12, f"got {sol.n_bs_opt}"),
        ("latency", sol.latency_t0 is not None and rel(sol.latency_t0, 4.4736) <= 1e-4,
         f"got {sol.latency_t0!r}"),
        ("enumeration", (sol.latency_t0, sol.n_bs_opt) == enum_best, f"{enum_best}"),
        ("infeasible cap", not infeasible.feasible, f"got {infeasible.n_bs_opt}"),
        ("floor", rel(infeasible.p_no_los_floor, 1.507e-7) <= 1e-3, f"got {infeasible.p_no_los_floor:.4g}"),
    ])


def _rotation_ok(n_topologies=50):
    p = NetworkParams()
    rng = np.random.default_rng(17)
    for _ in range(n_topologies):
        topo = mc.sample_topology(p, 400.0, rng)
        delta = rng.uniform(0, 2 * math.pi)
        c, s = math.cos(delta), math.sin(delta)
        rot = mc.Topology(topo.positions @ np.array([[c, s], [-s, c]]), topo.los,
                          topo.bs_offsets + delta, topo.ue_offset + delta, topo.region_radius, p)
        if not (np.array_equal(rot.bs_target_sectors(), topo.bs_target_sectors())
                and np.array_equal(rot.ue_sectors(), topo.ue_sectors())):
            continue  # a BS on a sector edge
        choice = topo.bs_target_sectors()
        fading = rng.standard_exponential(topo.los.size)
        a = mc.slot_sinr(topo, choice, 0, fading, p)
        b = mc.slot_sinr(rot, choice, 0, fading, p)
        if a.detected != b.detected or a.candidate_count != b.candidate_count:
            return False
        if a.best_sinr is not None and rel(b.best_sinr, a.best_sinr) > 1e-9:
            return False
    return True


def test_criterion_7_properties():
    base = NetworkParams()
    checks = []

    p_f = [analytic.p_failure(n, base) for n in range(1, 151)]
    checks.append(("P_f nonincreasing in N_c", all(b <= a for a, b in zip(p_f, p_f[1:])), ""))
    p_f_lam = [analytic.p_failure(12, base.replace(lam=lam)) for lam in np.logspace(-4, -2, 11)]
    checks.append(("P_f nonincreasing in lambda", all(b <= a for a, b in zip(p_f_lam, p_f_lam[1:])), ""))

    bounds = True
    for lam in (1e-4, 1e-3, 1e-2):
        for n_c in (1, 5, 12, 48, 500):
            slots = analytic.expected_latency(n_c, base.replace(lam=lam)).slots
            bounds &= 1.0 - 1e-12 <= slots <= n_c + 1e-9
    checks.append(("1 <= E[L]/t <= N_c", bounds, ""))

    lat = np.array([analytic.expected_latency(n, base.replace(n_bs=n)).t0_units for n in range(1, 41)])
    i = int(lat.argmin())
    v_shape = np.all(np.diff(lat[: i + 1]) < 0) and np.all(np.diff(lat[i:]) > 0)
    checks.append(("V-shape with minimum at N_BS=12", bool(v_shape) and i + 1 == 12, f"minimum at {i + 1}"))

    checks.append(("slot_sinr rotation invariance", _rotation_ok(), ""))

    proto = mc.ProtocolConfig()
    one = mc.estimate(base, proto, 3 * mc.BLOCK_TRIALS, 5, workers=1)
    three = mc.estimate(base, proto, 3 * mc.BLOCK_TRIALS, 5, workers=3)
    checks.append(("seed determinism across workers",
                   one.metrics == three.metrics and np.array_equal(one.histogram, three.histogram), ""))

    stable = True
    for params in (base, base.replace(lam=1e-4), base.replace(n_bs=1), base.replace(lam=1e-2)):
        coarse, err = analytic.p_success_with_error(params, analytic.QuadratureConfig(rel_tol=1e-6))
        fine, _ = analytic.p_success_with_error(params, analytic.QuadratureConfig(rel_tol=5e-7))
        stable &= abs(coarse - fine) <= err
    checks.append(("tolerance-halving stability", stable, ""))
    report(7, "property suite", checks)
