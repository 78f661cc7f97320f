"""Physical-layer primitives and the network parameter record.

Everything downstream (analytic engine, Monte Carlo engine, optimizer)
consumes linear quantities. dB/dBm inputs are converted exactly once, in
:func:`derive_constants`.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Optional

from .errors import ParameterError

TWO_PI = 2.0 * math.pi

# Rounded value; the published curves are reproduced with it to ~1e-11.
SPEED_OF_LIGHT = 3.0e8

# N_BS * N_UE at which the mini-slot reaches its minimum duration t0.
REFERENCE_BEAM_PAIRS = 48


def db_to_linear(x_db: float) -> float:
    return 10.0 ** (x_db / 10.0)


@dataclass(frozen=True)
class NetworkParams:
    """All physical and protocol parameters of one network configuration.

    Defaults are the baseline operating point: 30 dBm BS power, path-loss
    exponent 3, blockage exponent 0.02/m, 0 dB threshold, 28 GHz carrier,
    1 MHz control bandwidth, 7 dB noise figure, -174 dBm/Hz thermal noise,
    density 1e-3 BS/m^2, 12 BS sectors and 4 UE sectors.

    ``lam`` is the BS density (``lambda`` is reserved in Python; config
    files and the CLI use ``lambda``). ``t0_seconds`` is optional: without
    it, latencies are reported in units of the minimum mini-slot ``t0``.
    """

    lam: float = 1e-3
    n_bs: int = 12
    n_ue: int = 4
    alpha: float = 3.0
    beta: float = 0.02
    sinr_threshold: float = 1.0
    p_bs_dbm: float = 30.0
    fc_hz: float = 28e9
    bandwidth_hz: float = 1e6
    noise_psd_dbm_hz: float = -174.0
    noise_figure_db: float = 7.0
    t0_seconds: Optional[float] = None
    epsilon: float = 0.0

    def __post_init__(self):
        if not (self.lam > 0 and math.isfinite(self.lam)):
            raise ParameterError(f"lambda must be > 0, got {self.lam!r}")
        for name in ("n_bs", "n_ue"):
            value = getattr(self, name)
            if isinstance(value, bool) or int(value) != value or value < 1:
                raise ParameterError(f"{name} must be a positive integer, got {value!r}")
            object.__setattr__(self, name, int(value))
        if not self.alpha > 2:
            raise ParameterError(f"alpha must be > 2, got {self.alpha!r}")
        if not self.beta > 0:
            raise ParameterError(f"beta must be > 0, got {self.beta!r}")
        if not self.sinr_threshold > 0:
            raise ParameterError(f"sinr_threshold must be > 0, got {self.sinr_threshold!r}")
        if not 0 <= self.epsilon < 1:
            raise ParameterError(f"epsilon must lie in [0, 1), got {self.epsilon!r}")
        if not (self.fc_hz > 0 and self.bandwidth_hz > 0):
            raise ParameterError("fc_hz and bandwidth_hz must be > 0")
        if self.t0_seconds is not None and not self.t0_seconds > 0:
            raise ParameterError(f"t0_seconds must be > 0, got {self.t0_seconds!r}")

    @property
    def theta_bs(self) -> float:
        return TWO_PI / self.n_bs

    @property
    def theta_ue(self) -> float:
        return TWO_PI / self.n_ue

    def replace(self, **changes) -> "NetworkParams":
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class DerivedConstants:
    g_bs: float
    g_ue: float
    pathloss_const: float
    sigma2_norm: float
    sigma2_eff: float
    # slot duration in units of t0, and in seconds when t0 is known
    t_slot_t0: float
    t_slot: Optional[float]


def antenna_gain(theta: float, epsilon: float = 0.0) -> tuple[float, float]:
    """Main- and side-lobe gain of an ideal sectorized pattern.

    Parameters
    ----------
    theta : float
        Beamwidth in radians, ``0 < theta <= 2*pi``.
    epsilon : float
        Side-lobe gain, ``0 <= epsilon < 1``.

    Returns
    -------
    (main, side) : tuple of float
        ``main = (2*pi - (2*pi - theta)*epsilon) / theta`` and ``side = epsilon``.
    """
    if not 0 < theta <= TWO_PI * (1 + 1e-15):
        raise ParameterError(f"beamwidth must lie in (0, 2*pi], got {theta!r}")
    if not 0 <= epsilon < 1:
        raise ParameterError(f"epsilon must lie in [0, 1), got {epsilon!r}")
    theta = min(theta, TWO_PI)
    return (TWO_PI - (TWO_PI - theta) * epsilon) / theta, float(epsilon)


def mini_slot_duration(n_bs: int, n_ue: int, t0: float = 1.0) -> float:
    """Mini-slot duration ``max(t0, 48 t0 / (n_bs n_ue))``."""
    if n_bs < 1 or n_ue < 1:
        raise ParameterError("sector counts must be >= 1")
    if not t0 > 0:
        raise ParameterError(f"t0 must be > 0, got {t0!r}")
    return max(t0, REFERENCE_BEAM_PAIRS * t0 / (n_bs * n_ue))


def pathloss_constant(fc_hz: float, alpha: float) -> float:
    return (SPEED_OF_LIGHT / (4.0 * math.pi * fc_hz)) ** alpha


def path_loss(r: float, params: NetworkParams) -> float:
    """Linear attenuation ``K r^-alpha`` at distance ``r`` meters."""
    if not r > 0:
        raise ParameterError(f"distance must be > 0, got {r!r}")
    return pathloss_constant(params.fc_hz, params.alpha) * r ** (-params.alpha)


def los_probability(r: float, beta: float) -> float:
    """Probability that a link of length ``r`` is unblocked, ``exp(-beta r)``."""
    if r < 0:
        raise ParameterError(f"distance must be >= 0, got {r!r}")
    return math.exp(-beta * r)


def noise_power_dbm(params: NetworkParams) -> float:
    """Receiver noise power ``W + 10 log10(B) + NF`` in dBm."""
    return params.noise_psd_dbm_hz + 10.0 * math.log10(params.bandwidth_hz) + params.noise_figure_db


def derive_constants(params: NetworkParams) -> DerivedConstants:
    g_bs, _ = antenna_gain(params.theta_bs, params.epsilon)
    g_ue, _ = antenna_gain(params.theta_ue, params.epsilon)
    K = pathloss_constant(params.fc_hz, params.alpha)
    noise_mw = db_to_linear(noise_power_dbm(params))
    p_bs_mw = db_to_linear(params.p_bs_dbm)
    sigma2 = noise_mw / (p_bs_mw * g_bs * g_ue)
    t_slot_t0 = mini_slot_duration(params.n_bs, params.n_ue, 1.0)
    t_slot = None
    if params.t0_seconds is not None:
        t_slot = mini_slot_duration(params.n_bs, params.n_ue, params.t0_seconds)
    return DerivedConstants(
        g_bs=g_bs,
        g_ue=g_ue,
        pathloss_const=K,
        sigma2_norm=sigma2,
        sigma2_eff=sigma2 / K,
        t_slot_t0=t_slot_t0,
        t_slot=t_slot,
    )
