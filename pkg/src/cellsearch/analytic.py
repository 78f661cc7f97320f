"""Closed forms and quadratures for random-beamforming cell search.

The per-mini-slot success probability is a nested integral: the outer
integral runs over the distance of the serving BS, and the inner one
computes the interference exponent ``J(r)`` whose exponential is the Laplace
transform of the aligned LoS interference. Both integrands carry an
``exp(-beta * x)`` factor, so the infinite upper limits are truncated at a
multiple of ``1/beta`` (see :class:`QuadratureConfig`).

Detection is written as ``h >= T r^alpha (I + sigma2_eff)`` where
``sigma2_eff = sigma2 / K`` absorbs the distance-independent path-loss
constant; interference is expressed in the same ``r^-alpha`` units.
"""
from __future__ import annotations

import functools
import math
import warnings
from dataclasses import dataclass
from typing import Optional

from scipy import integrate

from .errors import LowThresholdWarning, NumericalError, ParameterError, UndefinedLatencyError
from .model import TWO_PI, NetworkParams, derive_constants

# Below this linear threshold the union-bound step over-counts noticeably.
UNION_BOUND_MIN_THRESHOLD = 0.4


@dataclass(frozen=True)
class QuadratureConfig:
    rel_tol: float = 1e-8
    abs_tol: float = 1e-12
    r_max_factor: float = 40.0
    v_max_factor: float = 40.0
    max_subdivisions: int = 200

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ParameterError("quadrature tolerances must be positive")
        if self.max_subdivisions < 10:
            raise ParameterError("max_subdivisions must be >= 10")
        if self.r_max_factor < 10 or self.v_max_factor < 10:
            raise ParameterError("truncation factors must be >= 10")


DEFAULT_QUAD = QuadratureConfig()


@dataclass(frozen=True)
class AnalyticResult:
    n_c: int
    p_s: float
    p_no_los: float
    p_f: float
    expected_latency_slots: float
    expected_latency_t0: float
    expected_latency_seconds: Optional[float]
    quadrature_error_estimate: float
    warnings: tuple = ()


@dataclass(frozen=True)
class LatencyResult:
    slots: float
    t0_units: float
    seconds: Optional[float] = None


def p_no_los(lam: float, beta: float) -> float:
    """Probability that no BS in the plane has a LoS link to the origin."""
    if not (lam > 0 and beta > 0):
        raise ParameterError("lambda and beta must be > 0")
    return math.exp(-2.0 * lam * math.pi / beta**2)


def p_no_los_finite(lam: float, beta: float, radius: float) -> float:
    """No-LoS probability restricted to the disc of the given radius.

    The LoS BSs inside the disc form a thinned PPP whose mean count is
    ``2 pi lam / beta^2 * (1 - (beta R + 1) exp(-beta R))``. Note the
    ``exp(-beta R)``: a printed variant of this expression carries
    ``exp(+beta R)``, which diverges as ``R -> inf`` and cannot reach the
    whole-plane limit :func:`p_no_los`.
    """
    if not radius > 0:
        raise ParameterError(f"radius must be > 0, got {radius!r}")
    if not (lam > 0 and beta > 0):
        raise ParameterError("lambda and beta must be > 0")
    x = beta * radius
    # 1 - (x+1)e^-x, written to stay accurate for small x
    mass = -math.expm1(-x) - x * math.exp(-x)
    return math.exp(-2.0 * lam * math.pi * mass / beta**2)


def los_mean_count(lam: float, beta: float, radius: float = math.inf) -> float:
    """Mean number of LoS BSs within ``radius`` of the origin."""
    if math.isinf(radius):
        return 2.0 * math.pi * lam / beta**2
    x = beta * radius
    return 2.0 * math.pi * lam * (-math.expm1(-x) - x * math.exp(-x)) / beta**2


def _require_analytic(params: NetworkParams):
    if params.epsilon != 0:
        raise ParameterError("the analytic engine requires epsilon = 0")


def _alignment_density(params: NetworkParams) -> float:
    return TWO_PI * params.lam / (params.n_bs * params.n_ue)


def _quad(f, a, b, quad: QuadratureConfig, points=None, what="integral"):
    pts = [p for p in (points or ()) if a < p < b] or None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        out = integrate.quad(
            f, a, b, epsabs=quad.abs_tol, epsrel=quad.rel_tol,
            limit=quad.max_subdivisions, points=pts, full_output=1,
        )
    value, abserr = out[0], out[1]
    if len(out) > 3 and out[2].get("last", 0) >= quad.max_subdivisions:
        raise NumericalError(f"{what} did not converge: {out[3].splitlines()[0]}", abserr)
    if len(out) > 3:
        # roundoff-limited but finished; accept when the error is within tolerance
        if abserr > max(quad.abs_tol, quad.rel_tol * abs(value)) * 100:
            raise NumericalError(f"{what} did not converge: {out[3].splitlines()[0]}", abserr)
    return value, abserr


def _interference_exponent(r: float, params: NetworkParams, quad: QuadratureConfig):
    tr = params.sinr_threshold * r**params.alpha
    alpha, beta = params.alpha, params.beta
    if tr == 0:
        return 0.0, 0.0

    def integrand(v):
        return tr * math.exp(-beta * v) * v / (v**alpha + tr)

    # the integrand bends where v^alpha crosses T r^alpha
    knee = tr ** (1.0 / alpha)
    vmax = quad.v_max_factor / beta
    value, err = _quad(integrand, 0.0, vmax, quad, points=[knee, 1.0 / beta],
                       what=f"interference integral at r={r:g}")
    a = _alignment_density(params)
    return a * value, a * err


def interference_exponent(r: float, params: NetworkParams, quad: QuadratureConfig = DEFAULT_QUAD) -> float:
    """Exponent ``J(r)`` with ``L_I(T r^alpha) = exp(-J(r))``."""
    if not r > 0:
        raise ParameterError(f"distance must be > 0, got {r!r}")
    return _interference_exponent(r, params, quad)[0]


@functools.lru_cache(maxsize=4096)
def _p_success(params: NetworkParams, quad: QuadratureConfig) -> tuple[float, float]:
    dc = derive_constants(params)
    a = _alignment_density(params)
    T, alpha, beta = params.sinr_threshold, params.alpha, params.beta
    t_sigma = T * dc.sigma2_eff
    inner_err = [0.0]

    def integrand(r):
        if r == 0.0:
            return 0.0
        J, err = _interference_exponent(r, params, quad)
        inner_err[0] = max(inner_err[0], err)
        return math.exp(-t_sigma * r**alpha - J - beta * r) * a * r

    rmax = quad.r_max_factor / beta
    points = [1.0 / beta]
    if t_sigma > 0:
        points.append(t_sigma ** (-1.0 / alpha))
    value, err = _quad(integrand, 0.0, rmax, quad, points=points, what="success-probability integral")
    err_total = err + value * inner_err[0]
    if value > 1.0:
        if value - 1.0 <= quad.abs_tol:
            value = 1.0
        else:
            raise NumericalError(f"success probability quadrature exceeded 1 ({value!r})", err_total)
    return max(value, 0.0), err_total


def _threshold_warning(params: NetworkParams) -> Optional[str]:
    if params.sinr_threshold < UNION_BOUND_MIN_THRESHOLD:
        return (f"SINR threshold {params.sinr_threshold:g} is below {UNION_BOUND_MIN_THRESHOLD}; "
                "the success probability is then an upper bound")
    return None


def p_success_with_error(params: NetworkParams, quad: QuadratureConfig = DEFAULT_QUAD) -> tuple[float, float]:
    """Per-mini-slot success probability and its absolute error estimate."""
    _require_analytic(params)
    msg = _threshold_warning(params)
    if msg:
        warnings.warn(msg, LowThresholdWarning, stacklevel=3)
    return _p_success(params, quad)


def p_success(params: NetworkParams, quad: QuadratureConfig = DEFAULT_QUAD) -> float:
    """Probability that the typical UE detects a pilot in one mini-slot."""
    return p_success_with_error(params, quad)[0]


def _miss_power(p_s: float, n: int) -> float:
    # (1 - p_s)^n without underflow surprises at large n
    if p_s >= 1.0:
        return 0.0
    return math.exp(n * math.log1p(-p_s))


def _check_budget(n_c):
    if isinstance(n_c, bool) or int(n_c) != n_c or n_c < 1:
        raise ParameterError(f"mini-slot budget must be an integer >= 1, got {n_c!r}")
    return int(n_c)


def p_failure(n_c: int, params: NetworkParams, quad: QuadratureConfig = DEFAULT_QUAD) -> float:
    """Detection failure probability within ``n_c`` mini-slots."""
    n_c = _check_budget(n_c)
    p_s = p_success(params, quad)
    return max(_miss_power(p_s, n_c), p_no_los(params.lam, params.beta))


def latency_pmf(n: int, n_c: int, params: NetworkParams, quad: QuadratureConfig = DEFAULT_QUAD) -> float:
    """Probability of detection at slot ``n`` given detection within ``n_c`` slots.

    Normalized by the geometric miss mass ``(1 - P_s)^n_c`` rather than the
    floored failure probability, so the PMF sums to one and its mean is
    exactly :func:`expected_latency`.
    """
    n_c = _check_budget(n_c)
    if isinstance(n, bool) or int(n) != n or not 1 <= n <= n_c:
        raise ParameterError(f"slot index must lie in [1, {n_c}], got {n!r}")
    p_s = p_success(params, quad)
    if p_s == 0.0:
        raise UndefinedLatencyError("success probability is zero; latency is undefined")
    detect_mass = -math.expm1(n_c * math.log1p(-p_s)) if p_s < 1 else 1.0
    return _miss_power(p_s, int(n) - 1) * p_s / detect_mass


def expected_latency_slots(n_c: int, p_s: float) -> float:
    """Mean of the truncated geometric law on ``{1..n_c}`` with success ``p_s``.

    ``[1 - (n_c+1) q^n_c + n_c q^(n_c+1)] / [(1 - q^n_c) p_s]`` with
    ``q = 1 - p_s``; the numerator is evaluated as
    ``(1 - q^n_c) - n_c q^n_c p_s``, which is algebraically identical.
    """
    if not p_s > 0:
        raise UndefinedLatencyError("success probability is zero; latency is undefined")
    if p_s >= 1.0:
        return 1.0
    log_q = math.log1p(-p_s)
    q_nc = math.exp(n_c * log_q)
    detect_mass = -math.expm1(n_c * log_q)
    numer = detect_mass - n_c * q_nc * p_s
    return numer / (detect_mass * p_s)


def expected_latency(n_c: int, params: NetworkParams, quad: QuadratureConfig = DEFAULT_QUAD) -> LatencyResult:
    """Expected search latency given detection within ``n_c`` mini-slots."""
    n_c = _check_budget(n_c)
    p_s = p_success(params, quad)
    slots = expected_latency_slots(n_c, p_s)
    dc = derive_constants(params)
    seconds = slots * dc.t_slot if dc.t_slot is not None else None
    return LatencyResult(slots=slots, t0_units=slots * dc.t_slot_t0, seconds=seconds)


def expected_latency_limit(params: NetworkParams, quad: QuadratureConfig = DEFAULT_QUAD) -> LatencyResult:
    """Unbounded-budget latency: geometric mean ``1 / P_s`` slots."""
    p_s = p_success(params, quad)
    if p_s == 0.0:
        raise UndefinedLatencyError("success probability is zero; latency is undefined")
    dc = derive_constants(params)
    slots = 1.0 / p_s
    seconds = slots * dc.t_slot if dc.t_slot is not None else None
    return LatencyResult(slots=slots, t0_units=slots * dc.t_slot_t0, seconds=seconds)


def exhaustive_baseline(params: NetworkParams, quad: QuadratureConfig = DEFAULT_QUAD) -> tuple[float, float]:
    """Failure probability and latency (t0 units) of one exhaustive scan."""
    n_pairs = params.n_bs * params.n_ue
    p_f = p_failure(n_pairs, params, quad)
    return p_f, n_pairs * derive_constants(params).t_slot_t0


def evaluate(n_c: int, params: NetworkParams, quad: QuadratureConfig = DEFAULT_QUAD) -> AnalyticResult:
    """Every analytic metric for one budget, bundled with the quadrature error."""
    n_c = _check_budget(n_c)
    notes = []
    msg = _threshold_warning(params)
    if msg:
        notes.append(msg)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", LowThresholdWarning)
        p_s, err = p_success_with_error(params, quad)
        lat = expected_latency(n_c, params, quad)
        p_f = p_failure(n_c, params, quad)
    return AnalyticResult(
        n_c=n_c,
        p_s=p_s,
        p_no_los=p_no_los(params.lam, params.beta),
        p_f=p_f,
        expected_latency_slots=lat.slots,
        expected_latency_t0=lat.t0_units,
        expected_latency_seconds=lat.seconds,
        quadrature_error_estimate=err,
        warnings=tuple(notes),
    )
