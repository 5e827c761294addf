"""The resilience model as a function of exposed-branch failure times."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from pcegrid.distributions import JointInput
from pcegrid.errors import DomainError, ShapeError
from pcegrid.grid.cascade import CascadeOutcome, settle, simulate_event
from pcegrid.grid.case import NetworkCase, load_case
from pcegrid.grid.weather import (
    FragilityCurve,
    WeatherEvent,
    default_fragility,
    default_weather,
    failure_time_distribution,
)

__all__ = ["GridStudy"]


def _simulate_rows(args):
    study, rows = args
    return [study.outcome(r).phi_ls for r in rows]


@dataclass(frozen=True, eq=False)
class GridStudy:
    """Maps a vector of failure times to the load-served rate of the event.

    The input law is one failure-time distribution per exposed branch, built
    from the fragility curve and the wind profile.
    """

    case: NetworkCase
    fragility: FragilityCurve = field(default_factory=default_fragility)
    weather: WeatherEvent = field(default_factory=default_weather)
    max_iter: int = 1000

    @classmethod
    def default(cls) -> "GridStudy":
        return cls(load_case())

    @cached_property
    def exposed(self) -> tuple[int, ...]:
        exposed = self.weather.resolve_exposed(self.case)
        if not exposed:
            raise DomainError("the weather event exposes no branch of the case")
        return exposed

    @property
    def dim(self) -> int:
        return len(self.exposed)

    @property
    def horizon(self) -> int:
        return self.weather.horizon

    @cached_property
    def joint(self) -> JointInput:
        law = failure_time_distribution(self.fragility, self.weather)
        names = []
        for k in self.exposed:
            a, b = self.case.branch_endpoints(k)
            names.append(f"tau_{a}_{b}" if f"tau_{a}_{b}" not in names else f"tau_{a}_{b}_{k}")
        return JointInput(tuple(law for _ in self.exposed), tuple(names))

    @cached_property
    def settled(self) -> tuple[NetworkCase, float]:
        return settle(self.case, self.max_iter)

    def outcome(self, tau) -> CascadeOutcome:
        return simulate_event(
            self.case, tau, self.exposed, self.horizon, self.max_iter, settled=self.settled
        )

    def __call__(self, x, workers: int = 1) -> np.ndarray:
        """Load-served rate (MW/h) for each row of ``x``."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.dim:
            raise ShapeError(f"expected {self.dim} failure times per row, got {x.shape[1]}")
        self.settled  # noqa: B018 - computed once before any fan-out
        if workers <= 1 or x.shape[0] < 2 * workers:
            return np.array([self.outcome(r).phi_ls for r in x])
        chunks = np.array_split(x, workers)
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = pool.map(_simulate_rows, [(self, c) for c in chunks])
            return np.concatenate([np.asarray(p, dtype=float) for p in parts])
