"""Integer beamwidth design: pick the BS sector count that minimizes latency.

For ``k`` scan cycles the budget is ``N_c = k * N_BS`` mini-slots. Every
candidate ``N_BS`` in the range is evaluated (no unimodality assumption),
and the feasible point with the smallest latency wins; ties go to the
smallest ``N_BS``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

from . import analytic
from .analytic import DEFAULT_QUAD, QuadratureConfig
from .errors import ParameterError
from .model import NetworkParams


@dataclass(frozen=True)
class DesignProblem:
    p_f_max: float
    k: int = 1
    n_bs_range: tuple = (1, 64)
    base: NetworkParams = field(default_factory=NetworkParams)
    # extension: also scan these UE sector counts (None = keep base.n_ue)
    n_ue_values: Optional[Sequence[int]] = None

    def __post_init__(self):
        if not 0 <= self.p_f_max <= 1:
            raise ParameterError(f"p_f_max must lie in [0, 1], got {self.p_f_max!r}")
        if isinstance(self.k, bool) or int(self.k) != self.k or self.k < 1:
            raise ParameterError(f"k must be a positive integer, got {self.k!r}")
        lo, hi = self.n_bs_range
        if not (1 <= lo <= hi):
            raise ParameterError(f"n_bs_range must be a non-empty range of positive integers, got {self.n_bs_range!r}")
        if self.n_ue_values is not None:
            object.__setattr__(self, "n_ue_values", tuple(int(v) for v in self.n_ue_values))
            if not self.n_ue_values or min(self.n_ue_values) < 1:
                raise ParameterError("n_ue_values must be non-empty positive integers")


@dataclass(frozen=True)
class FrontierPoint:
    n_bs: int
    n_ue: int
    p_f: float
    latency_t0: float
    feasible: bool


@dataclass(frozen=True)
class DesignSolution:
    n_bs_opt: Optional[int]
    n_ue_opt: Optional[int]
    latency_t0: Optional[float]
    p_f_achieved: Optional[float]
    frontier: tuple
    p_no_los_floor: float

    @property
    def feasible(self) -> bool:
        return self.n_bs_opt is not None


def evaluate_point(n_bs: int, n_ue: int, problem: DesignProblem, quad: QuadratureConfig) -> FrontierPoint:
    params = problem.base.replace(n_bs=n_bs, n_ue=n_ue)
    n_c = problem.k * n_bs
    p_f = analytic.p_failure(n_c, params, quad)
    latency = analytic.expected_latency(n_c, params, quad).t0_units
    return FrontierPoint(n_bs, n_ue, p_f, latency, p_f <= problem.p_f_max)


def solve(problem: DesignProblem, quad: QuadratureConfig = DEFAULT_QUAD) -> DesignSolution:
    lo, hi = problem.n_bs_range
    n_ue_values = problem.n_ue_values or (problem.base.n_ue,)
    frontier = tuple(
        evaluate_point(n_bs, n_ue, problem, quad)
        for n_ue in n_ue_values
        for n_bs in range(lo, hi + 1)
    )
    floor = analytic.p_no_los(problem.base.lam, problem.base.beta)
    feasible = [pt for pt in frontier if pt.feasible]
    if not feasible:
        return DesignSolution(None, None, None, None, frontier, floor)
    best = min(feasible, key=lambda pt: (pt.latency_t0, pt.n_bs, pt.n_ue))
    return DesignSolution(best.n_bs, best.n_ue, best.latency_t0, best.p_f, frontier, floor)
