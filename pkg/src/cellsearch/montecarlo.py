"""Monte Carlo simulation of the random-beamforming and exhaustive protocols.

BSs form a PPP around a typical UE at the origin. Each BS's link is LoS
with probability ``exp(-beta r)``; blocked links carry no power at all, so
only LoS BSs ever enter a slot computation. Sector ``k`` of a node with
``N`` sectors spans ``[off + 2 pi k / N, off + 2 pi (k+1) / N)`` where
``off`` is a per-node random orientation.

Seeding
-------
Trials are grouped in fixed blocks of :data:`BLOCK_TRIALS`. Trial ``i``
belongs to block ``i // BLOCK_TRIALS`` whose generator is
``default_rng(SeedSequence(master_seed, spawn_key=(block,)))``, so results
do not depend on how blocks are spread over workers. Within a block the
draw order is: LoS counts, radii, angles, BS sector offsets, UE sector
offsets, BS schedules, UE schedules, fading.
"""
from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kernels
from .analytic import los_mean_count
from .errors import ParameterError
from .model import TWO_PI, NetworkParams, antenna_gain, derive_constants

BLOCK_TRIALS = 2048

RB = "random-beamforming"
EXHAUSTIVE = "exhaustive"
BS_SCHEDULES = ("iid", "cycle-permutation")
UE_SCHEDULES = ("iid-per-cycle", "sequential-per-cycle")
Z95 = 1.959963984540054


@dataclass(frozen=True)
class ProtocolConfig:
    """How a cell-search trial is run.

    ``fresh_topology_per_slot`` draws an independent network for every
    mini-slot, which makes slots i.i.d.; it is the mode to use when checking
    against the analytic engine. The default keeps the network fixed for a
    whole trial.
    """

    n_c: int = 12
    bs_schedule: str = "cycle-permutation"
    ue_schedule: str = "iid-per-cycle"
    fading_refresh: str = "per-slot"
    region_radius: Optional[float] = None
    mode: str = RB
    fresh_topology_per_slot: bool = False

    def __post_init__(self):
        if isinstance(self.n_c, bool) or int(self.n_c) != self.n_c or self.n_c < 1:
            raise ParameterError(f"n_c must be an integer >= 1, got {self.n_c!r}")
        object.__setattr__(self, "n_c", int(self.n_c))
        if self.bs_schedule not in BS_SCHEDULES:
            raise ParameterError(f"bs_schedule must be one of {BS_SCHEDULES}, got {self.bs_schedule!r}")
        if self.ue_schedule not in UE_SCHEDULES:
            raise ParameterError(f"ue_schedule must be one of {UE_SCHEDULES}, got {self.ue_schedule!r}")
        if self.fading_refresh != "per-slot":
            raise ParameterError("only per-slot fading refresh is supported")
        if self.mode not in (RB, EXHAUSTIVE):
            raise ParameterError(f"mode must be {RB!r} or {EXHAUSTIVE!r}, got {self.mode!r}")
        if self.region_radius is not None and not self.region_radius > 0:
            raise ParameterError(f"region_radius must be > 0, got {self.region_radius!r}")

    def radius(self, params: NetworkParams) -> float:
        return self.region_radius if self.region_radius is not None else 40.0 / params.beta

    def slots(self, params: NetworkParams) -> int:
        return params.n_bs * params.n_ue if self.mode == EXHAUSTIVE else self.n_c


@dataclass
class Topology:
    """One network realization seen from the typical UE at the origin."""

    positions: np.ndarray
    los: np.ndarray
    bs_offsets: np.ndarray
    ue_offset: float
    region_radius: float
    params: NetworkParams

    @property
    def distances(self) -> np.ndarray:
        return np.hypot(self.positions[:, 0], self.positions[:, 1])

    @property
    def angles(self) -> np.ndarray:
        return np.arctan2(self.positions[:, 1], self.positions[:, 0])

    def bs_target_sectors(self) -> np.ndarray:
        """Sector each BS must select to point at the origin."""
        return sector_index(self.angles + math.pi, self.bs_offsets, self.params.n_bs)

    def ue_sectors(self) -> np.ndarray:
        """UE sector containing each BS."""
        return sector_index(self.angles, self.ue_offset, self.params.n_ue)


@dataclass(frozen=True)
class SlotOutcome:
    detected: bool
    best_sinr: Optional[float]
    candidate_count: int


@dataclass(frozen=True)
class TrialOutcome:
    detected: bool
    latency_slots: Optional[int]
    mode: str
    candidate_count_first_slot: int = 0


@dataclass(frozen=True)
class MetricEstimate:
    name: str
    mean: float
    half_width_95: float
    n_trials: int


@dataclass
class SimulationResult:
    metrics: list
    histogram: np.ndarray
    n_trials: int
    protocol: ProtocolConfig
    records: Optional[dict] = field(default=None, repr=False)

    def metric(self, name: str) -> MetricEstimate:
        for m in self.metrics:
            if m.name == name:
                return m
        raise KeyError(name)


def sector_index(angle, offset, n_sectors: int):
    width = TWO_PI / n_sectors
    idx = np.floor(np.mod(np.asarray(angle) - offset, TWO_PI) / width).astype(np.int64)
    return np.minimum(idx, n_sectors - 1)


def proportion_estimate(name: str, successes: int, n: int) -> MetricEstimate:
    p = successes / n
    return MetricEstimate(name, p, Z95 * math.sqrt(p * (1.0 - p) / n), n)


def mean_estimate(name: str, values: np.ndarray) -> MetricEstimate:
    n = int(values.size)
    if n == 0:
        return MetricEstimate(name, math.nan, math.nan, 0)
    sd = float(values.std(ddof=1)) if n > 1 else 0.0
    return MetricEstimate(name, float(values.mean()), Z95 * sd / math.sqrt(n), n)


# -- topology sampling ---------------------------------------------------------

def sample_topology(params: NetworkParams, region_radius: float, rng: np.random.Generator) -> Topology:
    """Full PPP realization in a disc, every BS with its blockage mark."""
    if not region_radius > 0:
        raise ParameterError(f"region_radius must be > 0, got {region_radius!r}")
    n = rng.poisson(params.lam * math.pi * region_radius**2)
    r = region_radius * np.sqrt(rng.random(n))
    phi = rng.uniform(0.0, TWO_PI, n)
    los = rng.random(n) < np.exp(-params.beta * r)
    bs_offsets = rng.uniform(0.0, TWO_PI, n)
    ue_offset = float(rng.uniform(0.0, TWO_PI))
    positions = np.column_stack([r * np.cos(phi), r * np.sin(phi)])
    return Topology(positions, los, bs_offsets, ue_offset, region_radius, params)


def _truncated_gamma2(rng, scale, radius, n):
    # density proportional to r exp(-r/scale) on [0, radius]
    r = rng.gamma(2.0, scale, n)
    bad = np.flatnonzero(r > radius)
    while bad.size:
        r[bad] = rng.gamma(2.0, scale, bad.size)
        bad = bad[r[bad] > radius]
    return r


@dataclass
class _LosBatch:
    seg_start: np.ndarray
    r: np.ndarray
    phi: np.ndarray
    bs_offsets: np.ndarray
    ue_offsets: np.ndarray


def sample_los_batch(params: NetworkParams, region_radius: float, n_seg: int, rng) -> _LosBatch:
    """LoS BSs only, for ``n_seg`` independent networks.

    The LoS BSs of a PPP with independent blockage marks are themselves a
    PPP with intensity ``lam exp(-beta r)``; their radii have density
    proportional to ``r exp(-beta r)``. Sampling that directly is
    equivalent in law to :func:`sample_topology` followed by discarding
    blocked BSs.
    """
    mean = los_mean_count(params.lam, params.beta, region_radius)
    counts = rng.poisson(mean, n_seg)
    seg_start = np.zeros(n_seg + 1, dtype=np.int64)
    np.cumsum(counts, out=seg_start[1:])
    total = int(seg_start[-1])
    r = _truncated_gamma2(rng, 1.0 / params.beta, region_radius, total)
    phi = rng.uniform(0.0, TWO_PI, total)
    bs_offsets = rng.uniform(0.0, TWO_PI, total)
    ue_offsets = rng.uniform(0.0, TWO_PI, n_seg)
    return _LosBatch(seg_start, r, phi, bs_offsets, ue_offsets)


# -- schedules -----------------------------------------------------------------

def _bs_schedule(rng, kind: str, n_slots: int, n_bs_total: int, n_sectors: int) -> np.ndarray:
    if kind == "iid":
        return rng.integers(0, n_sectors, size=(n_slots, n_bs_total), dtype=np.int64)
    n_cycles = -(-n_slots // n_sectors)
    perms = rng.random((n_cycles, n_bs_total, n_sectors)).argsort(axis=2)
    perms = perms.transpose(0, 2, 1).reshape(n_cycles * n_sectors, n_bs_total)
    return np.ascontiguousarray(perms[:n_slots], dtype=np.int64)


def _ue_schedule(rng, kind: str, n_trials: int, n_slots: int, n_bs: int, n_ue: int) -> np.ndarray:
    n_cycles = -(-n_slots // n_bs)
    if kind == "iid-per-cycle":
        per_cycle = rng.integers(0, n_ue, size=(n_trials, n_cycles), dtype=np.int64)
    else:
        start = rng.integers(0, n_ue, size=(n_trials, 1), dtype=np.int64)
        per_cycle = (start + np.arange(n_cycles)) % n_ue
    return np.ascontiguousarray(np.repeat(per_cycle, n_bs, axis=1)[:, :n_slots])


def _exhaustive_schedule(n_slots: int, n_bs: int):
    slot = np.arange(n_slots)
    return slot % n_bs, slot // n_bs


def _side_gains(params: NetworkParams) -> tuple[float, float]:
    g_bs, eps = antenna_gain(params.theta_bs, params.epsilon)
    g_ue, _ = antenna_gain(params.theta_ue, params.epsilon)
    return eps / g_bs, eps / g_ue


# -- single-slot and single-trial API -------------------------------------------

def slot_sinr(topology: Topology, bs_beam_choices, ue_sector: int, fading, params: NetworkParams) -> SlotOutcome:
    """Evaluate one mini-slot on a full topology.

    ``bs_beam_choices`` and ``fading`` hold one entry per BS in the topology
    (blocked BSs included; they contribute nothing).
    """
    dc = derive_constants(params)
    side_bs, side_ue = _side_gains(params)
    choices = np.asarray(bs_beam_choices)
    h = np.asarray(fading, dtype=float)
    bs_ok = choices == topology.bs_target_sectors()
    ue_ok = topology.ue_sectors() == ue_sector
    w = np.where(bs_ok, 1.0, side_bs) * np.where(ue_ok, 1.0, side_ue)
    w = np.where(topology.los, w, 0.0)
    aligned = topology.los & bs_ok & ue_ok
    received = np.flatnonzero(w > 0)
    if received.size == 0:
        return SlotOutcome(False, None, 0)
    r = topology.distances[received]
    power = w[received] * h[received] * dc.pathloss_const * r ** (-params.alpha)
    total = power.sum()
    sinr = power / (total - power + dc.sigma2_norm)
    best = float(sinr.max())
    return SlotOutcome(best >= params.sinr_threshold, best, int(aligned.sum()))


def _segment_arrays(topology: Topology):
    keep = np.flatnonzero(topology.los)
    r = topology.distances[keep]
    return (
        np.array([0, keep.size], dtype=np.int64),
        r,
        topology.bs_target_sectors()[keep],
        topology.ue_sectors()[keep],
    )


def _run_single(topology, params, bs_choice, ue_choice, fading):
    dc = derive_constants(params)
    side_bs, side_ue = _side_gains(params)
    seg_start, r, target, ue_sec = _segment_arrays(topology)
    gain = dc.pathloss_const * r ** (-params.alpha)
    first, cand = kernels.first_detection(
        seg_start, np.ascontiguousarray(gain), target, ue_sec,
        np.ascontiguousarray(bs_choice, dtype=np.int64), np.ascontiguousarray(fading),
        np.ascontiguousarray(ue_choice, dtype=np.int64).reshape(1, -1),
        side_bs, side_ue, dc.sigma2_norm, params.sinr_threshold,
    )
    return int(first[0]), int(cand[0])


def run_rb_trial(topology: Topology, protocol: ProtocolConfig, params: NetworkParams,
                 rng: np.random.Generator) -> TrialOutcome:
    """Random-beamforming search on a fixed topology, stopping at first detection.

    Draws BS schedules for all ``n_c`` slots, then the UE schedule, then
    fading for all slots.
    """
    n_los = int(topology.los.sum())
    n_c = protocol.n_c
    bs_choice = _bs_schedule(rng, protocol.bs_schedule, n_c, n_los, params.n_bs)
    ue_choice = _ue_schedule(rng, protocol.ue_schedule, 1, n_c, params.n_bs, params.n_ue)
    fading = rng.standard_exponential((n_c, n_los))
    first, cand = _run_single(topology, params, bs_choice, ue_choice, fading)
    return TrialOutcome(first > 0, first or None, RB, cand)


def run_exhaustive_trial(topology: Topology, params: NetworkParams, rng: np.random.Generator) -> TrialOutcome:
    """Sweep every (BS sector, UE sector) pair once; latency is the full sweep."""
    n_los = int(topology.los.sum())
    n_slots = params.n_bs * params.n_ue
    bs_sector, ue_sector = _exhaustive_schedule(n_slots, params.n_bs)
    bs_choice = np.repeat(bs_sector[:, None], n_los, axis=1)
    fading = rng.standard_exponential((n_slots, n_los))
    first, cand = _run_single(topology, params, bs_choice, ue_sector, fading)
    return TrialOutcome(first > 0, n_slots if first else None, EXHAUSTIVE, cand)


# -- batched estimation ---------------------------------------------------------

@dataclass
class BlockOutcome:
    first: np.ndarray          # first detecting slot per trial, 0 if none
    cand_first: np.ndarray     # aligned candidates in slot 1 per trial
    slot_hits: int             # detections counted toward the per-slot estimate
    slot_count: int


def simulate_block(params: NetworkParams, protocol: ProtocolConfig, master_seed: int,
                   block: int, n_trials: int, backend=None) -> BlockOutcome:
    """Run ``n_trials`` trials of block ``block`` with its own generator."""
    kernel = backend or kernels.first_detection
    rng = np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(block,)))
    dc = derive_constants(params)
    side_bs, side_ue = _side_gains(params)
    n_slots = protocol.slots(params)
    radius = protocol.radius(params)
    fresh = protocol.fresh_topology_per_slot
    n_seg = n_trials * n_slots if fresh else n_trials

    topo = sample_los_batch(params, radius, n_seg, rng)
    n_tot = topo.r.size
    gain = dc.pathloss_const * topo.r ** (-params.alpha)
    target = sector_index(topo.phi + math.pi, topo.bs_offsets, params.n_bs)
    seg_of = np.repeat(np.arange(n_seg), np.diff(topo.seg_start))
    ue_sec = sector_index(topo.phi, topo.ue_offsets[seg_of], params.n_ue)

    if protocol.mode == EXHAUSTIVE:
        bs_sector, ue_sector = _exhaustive_schedule(n_slots, params.n_bs)
        if fresh:
            seg_slot = np.tile(np.arange(n_slots), n_trials)
            bs_choice = bs_sector[seg_slot][seg_of][None, :]
            ue_choice = ue_sector[seg_slot][:, None]
        else:
            bs_choice = np.repeat(bs_sector[:, None], n_tot, axis=1)
            ue_choice = np.tile(ue_sector, (n_trials, 1))
    else:
        if fresh:
            # a single slot per network: either schedule reduces to a uniform sector
            bs_choice = _bs_schedule(rng, protocol.bs_schedule, 1, n_tot, params.n_bs)
            ue_choice = _ue_schedule(rng, protocol.ue_schedule, n_trials, n_slots,
                                     params.n_bs, params.n_ue).reshape(n_seg, 1)
        else:
            bs_choice = _bs_schedule(rng, protocol.bs_schedule, n_slots, n_tot, params.n_bs)
            ue_choice = _ue_schedule(rng, protocol.ue_schedule, n_trials, n_slots,
                                     params.n_bs, params.n_ue)
    fading = rng.standard_exponential(bs_choice.shape)

    first, cand = kernel(
        topo.seg_start, gain, target, ue_sec,
        np.ascontiguousarray(bs_choice, dtype=np.int64), fading,
        np.ascontiguousarray(ue_choice, dtype=np.int64),
        side_bs, side_ue, dc.sigma2_norm, params.sinr_threshold,
    )
    if fresh:
        hits = (first > 0).reshape(n_trials, n_slots)
        any_hit = hits.any(axis=1)
        trial_first = np.where(any_hit, hits.argmax(axis=1) + 1, 0)
        return BlockOutcome(trial_first, cand.reshape(n_trials, n_slots)[:, 0],
                            int(hits.sum()), hits.size)
    return BlockOutcome(first, cand, int((first == 1).sum()), n_trials)


def _block_sizes(n_trials: int):
    full, rest = divmod(n_trials, BLOCK_TRIALS)
    return [BLOCK_TRIALS] * full + ([rest] if rest else [])


def _run_block(args):
    return simulate_block(*args)


def estimate(params: NetworkParams, protocol: ProtocolConfig, n_trials: int, master_seed: int,
             workers: int = 1, keep_records: bool = False) -> SimulationResult:
    """Monte Carlo estimates of P_s, P_f and the conditional latency.

    The per-slot success estimate uses every simulated slot when networks
    are redrawn per slot, and the first slot of each trial otherwise.
    """
    if n_trials < 1:
        raise ParameterError(f"n_trials must be >= 1, got {n_trials!r}")
    jobs = [(params, protocol, master_seed, b, n) for b, n in enumerate(_block_sizes(n_trials))]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            blocks = list(pool.map(_run_block, jobs))
    else:
        blocks = [_run_block(j) for j in jobs]

    first = np.concatenate([b.first for b in blocks])
    cand = np.concatenate([b.cand_first for b in blocks])
    slot_hits = sum(b.slot_hits for b in blocks)
    slot_count = sum(b.slot_count for b in blocks)
    n_slots = protocol.slots(params)

    detected = first > 0
    if protocol.mode == EXHAUSTIVE:
        latency = np.where(detected, n_slots, 0)
    else:
        latency = first
    hist = np.bincount(latency[detected], minlength=n_slots + 1)[1:]
    lat_slots = latency[detected].astype(float)
    t_slot_t0 = derive_constants(params).t_slot_t0

    metrics = [
        proportion_estimate("p_s", slot_hits, slot_count),
        proportion_estimate("p_f", int((~detected).sum()), n_trials),
        mean_estimate("latency_slots", lat_slots),
        mean_estimate("latency_t0", lat_slots * t_slot_t0),
    ]
    if params.t0_seconds is not None:
        metrics.append(mean_estimate("latency_seconds", lat_slots * t_slot_t0 * params.t0_seconds))
    records = None
    if keep_records:
        records = {
            "trial_index": np.arange(n_trials),
            "detected": detected,
            "latency_slots": latency,
            "candidate_count_first_slot": cand,
        }
    return SimulationResult(metrics, hist, n_trials, protocol, records)


def write_trial_records(path, result: SimulationResult):
    """Per-trial CSV: trial_index, detected, latency_slots, candidate_count_first_slot."""
    if result.records is None:
        raise ParameterError("simulation was run without keep_records=True")
    rec = result.records
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["trial_index", "detected", "latency_slots", "candidate_count_first_slot"])
        for i, d, lat, c in zip(rec["trial_index"], rec["detected"], rec["latency_slots"],
                                rec["candidate_count_first_slot"]):
            writer.writerow([int(i), int(d), int(lat) if d else "", int(c)])
