import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cellsearch import analytic, kernels, montecarlo as mc
from cellsearch.errors import ParameterError
from cellsearch.model import TWO_PI, NetworkParams, derive_constants

needs_cython = pytest.mark.skipif("cython" not in kernels.BACKENDS, reason="compiled kernel not built")


def rng(seed=0):
    return np.random.default_rng(seed)


def make_topology(params, r, phi, los=None, bs_offsets=None, ue_offset=0.0):
    r, phi = np.asarray(r, float), np.asarray(phi, float)
    los = np.ones(r.size, bool) if los is None else np.asarray(los)
    bs_offsets = np.zeros(r.size) if bs_offsets is None else np.asarray(bs_offsets, float)
    pos = np.column_stack([r * np.cos(phi), r * np.sin(phi)])
    return mc.Topology(pos, los, bs_offsets, ue_offset, 1e4, params)


def z_score(count, n, p):
    return (count / n - p) / math.sqrt(p * (1 - p) / n)


class TestSectors:
    @given(st.floats(-20, 20), st.floats(0, TWO_PI), st.integers(1, 64))
    def test_angle_lies_in_its_sector(self, angle, offset, n):
        k = int(mc.sector_index(angle, offset, n))
        assert 0 <= k < n
        rel = (angle - offset) % TWO_PI
        width = TWO_PI / n
        assert k * width - 1e-9 <= rel <= (k + 1) * width + 1e-9

    def test_target_sector_points_at_origin(self, defaults):
        topo = make_topology(defaults, [100.0], [0.1])
        # the BS sits at angle 0.1, so the origin is seen at 0.1 + pi
        assert topo.bs_target_sectors()[0] == int((0.1 + math.pi) / (TWO_PI / 12))
        assert topo.ue_sectors()[0] == 0


class TestTopologySampling:
    def test_poisson_count(self, defaults):
        g = rng(1)
        counts = np.array([mc.sample_topology(defaults, 200.0, g).los.size for _ in range(3000)])
        mean = defaults.lam * math.pi * 200.0**2
        assert abs(counts.mean() - mean) < 4 * math.sqrt(mean / counts.size)
        assert abs(counts.var() / mean - 1) < 0.1

    def test_los_fraction_follows_blockage_law(self, defaults):
        g = rng(2)
        topos = [mc.sample_topology(defaults, 300.0, g) for _ in range(1500)]
        d = np.concatenate([t.distances for t in topos])
        los = np.concatenate([t.los for t in topos])
        edges = np.linspace(0, 300, 7)
        for lo, hi in zip(edges, edges[1:]):
            sel = (d >= lo) & (d < hi)
            expected = np.exp(-defaults.beta * d[sel]).mean()
            sd = math.sqrt(expected * (1 - expected) / sel.sum())
            assert abs(los[sel].mean() - expected) < 4 * sd

    def test_no_los_disc_probability(self, defaults):
        g = rng(3)
        n = 20000
        empty = sum(not mc.sample_topology(defaults, 50.0, g).los.any() for _ in range(n))
        p = analytic.p_no_los_finite(defaults.lam, defaults.beta, 50.0)
        assert abs(z_score(empty, n, p)) < 4

    def test_los_batch_no_los_probability(self, defaults):
        batch = mc.sample_los_batch(defaults, 50.0, 1_000_000, rng(4))
        empty = int((np.diff(batch.seg_start) == 0).sum())
        p = analytic.p_no_los_finite(defaults.lam, defaults.beta, 50.0)
        assert abs(z_score(empty, 1_000_000, p)) < 4

    def test_los_batch_radius_law(self, defaults):
        from scipy import stats
        radius = 150.0
        batch = mc.sample_los_batch(defaults, radius, 20000, rng(5))
        dist = stats.gamma(2.0, scale=1 / defaults.beta)
        cdf = lambda x: dist.cdf(x) / dist.cdf(radius)
        assert batch.r.max() <= radius
        assert stats.kstest(batch.r, cdf).pvalue > 1e-3

    def test_truncation_radius_is_adequate(self, defaults):
        # LoS mass beyond the default radius, and a coupled check that
        # dropping far BSs from a doubled disc changes no slot outcome
        radius = mc.ProtocolConfig().radius(defaults)
        beyond = analytic.los_mean_count(defaults.lam, defaults.beta) - \
            analytic.los_mean_count(defaults.lam, defaults.beta, radius)
        assert beyond < 1e-12
        g = rng(6)
        for _ in range(30):
            topo = mc.sample_topology(defaults, 2 * radius, g)
            choice = g.integers(0, defaults.n_bs, topo.los.size)
            fading = g.standard_exponential(topo.los.size)
            near = topo.distances <= radius
            cut = mc.Topology(topo.positions[near], topo.los[near], topo.bs_offsets[near],
                              topo.ue_offset, radius, defaults)
            a = mc.slot_sinr(topo, choice, 0, fading, defaults)
            b = mc.slot_sinr(cut, choice[near], 0, fading[near], defaults)
            assert a.detected == b.detected and a.candidate_count == b.candidate_count

    def test_rejects_bad_radius(self, defaults):
        with pytest.raises(ParameterError):
            mc.sample_topology(defaults, 0.0, rng())


class TestSlotSinr:
    def test_single_aligned_bs_is_noise_limited(self, defaults):
        dc = derive_constants(defaults)
        topo = make_topology(defaults, [80.0], [0.2])
        out = mc.slot_sinr(topo, topo.bs_target_sectors(), 0, [1.0], defaults)
        assert out.best_sinr == pytest.approx(dc.pathloss_const * 80.0**-3 / dc.sigma2_norm, rel=1e-12)
        assert out.candidate_count == 1

    def test_two_aligned_bs_interfere(self, defaults):
        dc = derive_constants(defaults)
        topo = make_topology(defaults, [80.0, 120.0], [0.2, 0.3])
        out = mc.slot_sinr(topo, topo.bs_target_sectors(), 0, [1.0, 2.0], defaults)
        p1, p2 = dc.pathloss_const * 80.0**-3, 2 * dc.pathloss_const * 120.0**-3
        assert out.best_sinr == pytest.approx(max(p1 / (p2 + dc.sigma2_norm), p2 / (p1 + dc.sigma2_norm)),
                                              rel=1e-12)
        assert out.candidate_count == 2

    def test_blocked_or_misaligned_contribute_nothing(self, defaults):
        topo = make_topology(defaults, [80.0, 120.0], [0.2, 0.3], los=[False, True])
        wrong = (topo.bs_target_sectors() + 1) % defaults.n_bs
        assert mc.slot_sinr(topo, wrong, 0, [1.0, 1.0], defaults) == mc.SlotOutcome(False, None, 0)
        out = mc.slot_sinr(topo, topo.bs_target_sectors(), 0, [1.0, 1.0], defaults)
        assert out.candidate_count == 1
        assert mc.slot_sinr(topo, topo.bs_target_sectors(), 5, [1.0, 1.0], defaults).best_sinr is None

    def test_sidelobes_leak_power(self, defaults):
        p = defaults.replace(epsilon=0.05)
        topo = make_topology(p, [80.0], [0.2])
        wrong = (topo.bs_target_sectors() + 1) % p.n_bs
        out = mc.slot_sinr(topo, wrong, 0, [1.0], p)
        assert out.best_sinr is not None and out.candidate_count == 0

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10_000), st.floats(0, TWO_PI))
    def test_rotation_invariance(self, seed, delta):
        p = NetworkParams()
        g = rng(seed)
        topo = mc.sample_topology(p, 400.0, g)
        choice = topo.bs_target_sectors()
        fading = g.standard_exponential(topo.los.size)
        c, s = math.cos(delta), math.sin(delta)
        rot = mc.Topology(topo.positions @ np.array([[c, s], [-s, c]]), topo.los,
                          topo.bs_offsets + delta, topo.ue_offset + delta, topo.region_radius, p)
        # skip realizations with a BS on a sector edge, where rounding decides
        assume_clean = np.array_equal(rot.bs_target_sectors(), choice) and \
            np.array_equal(rot.ue_sectors(), topo.ue_sectors())
        if not assume_clean:
            return
        a = mc.slot_sinr(topo, choice, 0, fading, p)
        b = mc.slot_sinr(rot, choice, 0, fading, p)
        assert a.detected == b.detected and a.candidate_count == b.candidate_count
        if a.best_sinr is not None:
            assert b.best_sinr == pytest.approx(a.best_sinr, rel=1e-9)


class TestKernel:
    @pytest.mark.parametrize("epsilon", [0.0, 0.05])
    @pytest.mark.parametrize("backend", sorted(kernels.BACKENDS))
    def test_trial_matches_slot_reference(self, defaults, epsilon, backend, monkeypatch):
        p = defaults.replace(epsilon=epsilon, sinr_threshold=0.5)
        monkeypatch.setattr(kernels, "first_detection", kernels.BACKENDS[backend])
        g = rng(7)
        for _ in range(40):
            topo = mc.sample_topology(p, 500.0, g)
            proto = mc.ProtocolConfig(n_c=12, bs_schedule="iid")
            state = g.bit_generator.state
            trial = mc.run_rb_trial(topo, proto, p, g)
            # replay the same draws through the per-slot reference
            g2 = np.random.default_rng()
            g2.bit_generator.state = state
            n_los = int(topo.los.sum())
            bs = mc._bs_schedule(g2, "iid", 12, n_los, p.n_bs)
            ue = mc._ue_schedule(g2, "iid-per-cycle", 1, 12, p.n_bs, p.n_ue)[0]
            fading = g2.standard_exponential((12, n_los))
            expected = None
            for s in range(12):
                choice = np.zeros(topo.los.size, dtype=np.int64)
                h = np.zeros(topo.los.size)
                choice[topo.los], h[topo.los] = bs[s], fading[s]
                out = mc.slot_sinr(topo, choice, int(ue[s]), h, p)
                if s == 0:
                    assert trial.candidate_count_first_slot == out.candidate_count
                if out.detected:
                    expected = s + 1
                    break
            assert trial.latency_slots == expected

    @needs_cython
    @pytest.mark.parametrize("kwargs", [
        {},
        {"bs_schedule": "iid", "fresh_topology_per_slot": True},
        {"mode": mc.EXHAUSTIVE},
        {"mode": mc.EXHAUSTIVE, "fresh_topology_per_slot": True},
        {"ue_schedule": "sequential-per-cycle", "n_c": 30},
    ])
    def test_backends_bit_identical(self, defaults, kwargs):
        proto = mc.ProtocolConfig(**kwargs)
        for params in (defaults, defaults.replace(epsilon=0.1, lam=3e-3)):
            a = mc.simulate_block(params, proto, 11, 0, 500, backend=kernels.BACKENDS["numpy"])
            b = mc.simulate_block(params, proto, 11, 0, 500, backend=kernels.BACKENDS["cython"])
            np.testing.assert_array_equal(a.first, b.first)
            np.testing.assert_array_equal(a.cand_first, b.cand_first)
            assert (a.slot_hits, a.slot_count) == (b.slot_hits, b.slot_count)

    def test_empty_segments(self):
        k = kernels.first_detection
        first, cand = k(np.zeros(3, np.int64), np.zeros(0), np.zeros(0, np.int64), np.zeros(0, np.int64),
                        np.zeros((4, 0), np.int64), np.zeros((4, 0)), np.zeros((2, 4), np.int64),
                        0.0, 0.0, 1e-9, 1.0)
        assert first.tolist() == [0, 0] and cand.tolist() == [0, 0]


class TestEstimation:
    def test_deterministic_across_worker_counts(self, defaults):
        proto = mc.ProtocolConfig()
        a = mc.estimate(defaults, proto, 5000, 42, workers=1)
        b = mc.estimate(defaults, proto, 5000, 42, workers=3)
        assert a.metrics == b.metrics
        np.testing.assert_array_equal(a.histogram, b.histogram)

    def test_seed_changes_result(self, defaults):
        proto = mc.ProtocolConfig()
        assert mc.estimate(defaults, proto, 3000, 1).metrics != mc.estimate(defaults, proto, 3000, 2).metrics

    def test_threshold_coupling(self, defaults):
        # thresholds do not enter the draws, so raising T can only delay or lose detections
        proto = mc.ProtocolConfig()
        lo = mc.simulate_block(defaults.replace(sinr_threshold=0.5), proto, 3, 0, 2000)
        hi = mc.simulate_block(defaults.replace(sinr_threshold=2.0), proto, 3, 0, 2000)
        assert np.all((hi.first == 0) | ((lo.first > 0) & (lo.first <= hi.first)))
        assert (hi.first == 0).sum() > (lo.first == 0).sum()

    @pytest.mark.parametrize("n_c", [1, 4, 12])
    def test_failure_exponent(self, defaults, n_c):
        proto = mc.ProtocolConfig(n_c=n_c, bs_schedule="iid", fresh_topology_per_slot=True)
        n = 20000
        res = mc.estimate(defaults, proto, n, 100 + n_c)
        p = analytic.p_failure(n_c, defaults)
        assert abs(z_score(res.metric("p_f").mean * n, n, p)) < 4

    def test_latency_matches_truncated_geometric(self, defaults):
        proto = mc.ProtocolConfig(n_c=12, bs_schedule="iid", fresh_topology_per_slot=True)
        res = mc.estimate(defaults, proto, 30000, 9)
        lat = res.metric("latency_slots")
        assert abs(lat.mean - analytic.expected_latency(12, defaults).slots) < 2 * lat.half_width_95
        assert res.histogram.sum() == lat.n_trials
        assert res.metric("latency_t0").mean == pytest.approx(lat.mean, rel=1e-15)

    def test_seconds_metric(self, defaults):
        p = defaults.replace(n_bs=6, t0_seconds=1e-5)
        res = mc.estimate(p, mc.ProtocolConfig(n_c=12), 2000, 0)
        assert res.metric("latency_seconds").mean == pytest.approx(res.metric("latency_t0").mean * 1e-5)
        assert res.metric("latency_t0").mean == pytest.approx(2 * res.metric("latency_slots").mean)

    def test_exhaustive_latency_is_full_sweep(self, defaults):
        res = mc.estimate(defaults, mc.ProtocolConfig(mode=mc.EXHAUSTIVE), 3000, 5)
        assert res.histogram[:47].sum() == 0
        assert res.metric("latency_slots").mean == 48.0
        assert res.metric("latency_slots").half_width_95 == 0.0

    def test_exhaustive_slots_match_random_beamforming_when_iid(self, defaults):
        proto = mc.ProtocolConfig(mode=mc.EXHAUSTIVE, fresh_topology_per_slot=True)
        res = mc.estimate(defaults, proto, 10000, 6)
        ps = res.metric("p_s")
        p = analytic.p_success(defaults)
        assert abs(z_score(ps.mean * ps.n_trials, ps.n_trials, p)) < 4

    def test_exhaustive_trial_api(self, defaults):
        topo = make_topology(defaults, [50.0], [1.0])
        out = mc.run_exhaustive_trial(topo, defaults, rng())
        assert out.mode == mc.EXHAUSTIVE and (out.latency_slots in (None, 48))

    def test_certain_detection(self):
        p = NetworkParams(lam=0.05, n_bs=1, n_ue=1, sinr_threshold=1e-6)
        res = mc.estimate(p, mc.ProtocolConfig(n_c=3), 3000, 0)
        assert res.metric("p_f").mean == 0.0
        assert res.metric("latency_slots").mean == 1.0
        assert res.metric("latency_slots").half_width_95 == 0.0

    def test_records_csv(self, defaults, tmp_path):
        res = mc.estimate(defaults, mc.ProtocolConfig(), 300, 0, keep_records=True)
        path = tmp_path / "trials.csv"
        mc.write_trial_records(path, res)
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert list(rows[0]) == ["trial_index", "detected", "latency_slots", "candidate_count_first_slot"]
        assert len(rows) == 300
        failures = [r for r in rows if r["detected"] == "0"]
        assert all(r["latency_slots"] == "" for r in failures)
        assert len(failures) == round(res.metric("p_f").mean * 300)

    def test_records_required(self, defaults, tmp_path):
        res = mc.estimate(defaults, mc.ProtocolConfig(), 10, 0)
        with pytest.raises(ParameterError):
            mc.write_trial_records(tmp_path / "x.csv", res)

    @pytest.mark.parametrize("kwargs", [
        {"n_c": 0}, {"bs_schedule": "round-robin"}, {"ue_schedule": "x"},
        {"fading_refresh": "per-trial"}, {"mode": "oracle"}, {"region_radius": -1.0},
    ])
    def test_protocol_validation(self, kwargs):
        with pytest.raises(ParameterError):
            mc.ProtocolConfig(**kwargs)

    def test_rejects_zero_trials(self, defaults):
        with pytest.raises(ParameterError):
            mc.estimate(defaults, mc.ProtocolConfig(), 0, 0)


class TestSchedules:
    def test_cycle_permutation_visits_each_sector_once(self):
        sched = mc._bs_schedule(rng(), "cycle-permutation", 24, 50, 12)
        for cycle in (sched[:12], sched[12:]):
            assert np.all(np.sort(cycle, axis=0) == np.arange(12)[:, None])

    def test_sequential_ue_schedule(self):
        sched = mc._ue_schedule(rng(), "sequential-per-cycle", 5, 36, 12, 4)
        per_cycle = sched[:, ::12]
        assert np.all((np.diff(per_cycle, axis=1) % 4) == 1)
        assert np.all(sched[:, :12] == sched[:, [0]])

    def test_exhaustive_schedule_covers_all_pairs(self):
        bs, ue = mc._exhaustive_schedule(48, 12)
        assert len(set(zip(bs.tolist(), ue.tolist()))) == 48


def test_fallback_selected_by_environment():
    import os
    import subprocess
    import sys
    env = dict(os.environ, CELLSEARCH_KERNEL="numpy")
    proc = subprocess.run([sys.executable, "-c", "from cellsearch import kernels; print(kernels.BACKEND)"],
                          capture_output=True, text=True, env=env)
    assert proc.stdout.strip() == "numpy"
