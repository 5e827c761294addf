"""Fragility curves, hourly wind profiles and the failure-time laws they induce."""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from pcegrid.distributions import DiscreteHourly
from pcegrid.errors import DomainError

__all__ = [
    "FragilityCurve",
    "WeatherEvent",
    "failure_time_distribution",
    "hourly_hazard",
    "default_fragility",
    "default_weather",
]


@dataclass(frozen=True)
class FragilityCurve:
    """Hourly failure probability as a piecewise-linear function of wind speed.

    Values outside the breakpoint range are clamped to the end values.
    """

    wind: tuple[float, ...]  # m/s, non-decreasing
    prob: tuple[float, ...]  # per hour of exposure

    def __post_init__(self):
        wind = tuple(float(w) for w in self.wind)
        prob = tuple(float(p) for p in self.prob)
        if len(wind) != len(prob) or not wind:
            raise DomainError("fragility curve needs matching, non-empty breakpoint lists")
        if any(b < a for a, b in zip(wind, wind[1:])):
            raise DomainError("fragility wind speeds must be non-decreasing")
        if any(not 0.0 <= p <= 1.0 for p in prob):
            raise DomainError("fragility probabilities must lie in [0, 1]")
        if any(b < a for a, b in zip(prob, prob[1:])):
            raise DomainError("fragility probabilities must be non-decreasing in wind speed")
        object.__setattr__(self, "wind", wind)
        object.__setattr__(self, "prob", prob)

    def __call__(self, speed):
        return np.interp(np.asarray(speed, dtype=float), self.wind, self.prob)

    @classmethod
    def constant(cls, p: float) -> "FragilityCurve":
        return cls((0.0,), (p,))

    def to_dict(self):
        return {"wind": list(self.wind), "prob": list(self.prob)}

    @classmethod
    def from_dict(cls, data) -> "FragilityCurve":
        try:
            return cls(tuple(data["wind"]), tuple(data["prob"]))
        except (KeyError, TypeError) as exc:
            raise DomainError(f"malformed fragility curve: {exc}") from exc


@dataclass(frozen=True)
class WeatherEvent:
    wind: tuple[float, ...]  # one speed per hour 1..T
    exposed_branches: tuple[int, ...] = ()  # branch positions (0-based) in the case
    exposed_buses: tuple[int, ...] = ()  # bus ids of the affected area

    def __post_init__(self):
        object.__setattr__(self, "wind", tuple(float(w) for w in self.wind))
        object.__setattr__(self, "exposed_branches", tuple(int(b) for b in self.exposed_branches))
        object.__setattr__(self, "exposed_buses", tuple(int(b) for b in self.exposed_buses))
        if not self.wind:
            raise DomainError("weather event needs at least one hour")

    @property
    def horizon(self) -> int:
        return len(self.wind)

    def resolve_exposed(self, case) -> tuple[int, ...]:
        """Explicit branch list if given, else every branch touching an affected bus."""
        if self.exposed_branches:
            bad = [b for b in self.exposed_branches if not 0 <= b < case.n_branch]
            if bad:
                raise DomainError(f"exposed branches {bad} do not exist in the case")
            return self.exposed_branches
        area = set(self.exposed_buses)
        return tuple(
            k for k in range(case.n_branch) if set(case.branch_endpoints(k)) & area
        )

    def to_dict(self):
        return {
            "horizon": self.horizon,
            "wind": list(self.wind),
            "exposed_branches": list(self.exposed_branches),
            "exposed_buses": list(self.exposed_buses),
        }

    @classmethod
    def from_dict(cls, data) -> "WeatherEvent":
        try:
            wind = tuple(data["wind"])
        except (KeyError, TypeError) as exc:
            raise DomainError(f"malformed weather event: {exc}") from exc
        if "horizon" in data and int(data["horizon"]) != len(wind):
            raise DomainError(f"horizon {data['horizon']} but {len(wind)} wind values")
        return cls(wind, tuple(data.get("exposed_branches", ())), tuple(data.get("exposed_buses", ())))


def hourly_hazard(fragility: FragilityCurve, weather: WeatherEvent) -> np.ndarray:
    return fragility(np.asarray(weather.wind))


def failure_time_distribution(
    fragility: FragilityCurve, weather: WeatherEvent, branch: int | None = None
) -> DiscreteHourly:
    """Law of the first failure hour of a branch exposed to ``weather``.

    Hours ``1..T`` carry ``h_t * prod_{s<t} (1 - h_s)``; the sentinel hour
    ``T + 1`` carries the probability of surviving the whole event.  Every
    exposed branch sees the same wind, so ``branch`` only gets checked
    against an explicit exposed list.
    """
    if branch is not None and weather.exposed_branches and branch not in weather.exposed_branches:
        raise DomainError(f"branch {branch} is not exposed to the weather event")
    h = hourly_hazard(fragility, weather)
    survive = np.concatenate([[1.0], np.cumprod(1.0 - h)])
    masses = np.append(h * survive[:-1], survive[-1])
    hours = np.arange(1, weather.horizon + 2)
    return DiscreteHourly(hours, masses)


def _data_json(name: str):
    return json.loads(resources.files("pcegrid.grid").joinpath("data").joinpath(name).read_text())


def default_fragility() -> FragilityCurve:
    """Synthetic overhead-line fragility curve shipped with the package."""
    return FragilityCurve.from_dict(_data_json("fragility_default.json"))


def default_weather() -> WeatherEvent:
    """Synthetic 24-hour windstorm over buses 12-17 and 20 of the 39-bus case."""
    return WeatherEvent.from_dict(_data_json("weather_default.json"))


def load_fragility(path: str | Path | None) -> FragilityCurve:
    if path is None:
        return default_fragility()
    return FragilityCurve.from_dict(json.loads(Path(path).read_text()))


def load_weather(path: str | Path | None) -> WeatherEvent:
    if path is None:
        return default_weather()
    return WeatherEvent.from_dict(json.loads(Path(path).read_text()))
