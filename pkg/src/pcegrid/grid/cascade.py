"""Hourly cascading-failure simulation and the load-served rate metric."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from pcegrid.errors import ConvergenceError, DomainError, ShapeError
from pcegrid.grid.case import NetworkCase
from pcegrid.grid.powerflow import dc_power_flow

__all__ = ["CascadeOutcome", "cascade_step", "simulate_event", "settle", "phi_ls", "failure_hours", "outcomes_to_csv"]

DEFAULT_MAX_ITER = 1000


@dataclass(frozen=True, eq=False)
class CascadeOutcome:
    load_served: np.ndarray  # MW, hours 0..T
    tripped: tuple[frozenset[int], ...]  # branches lost during each hour 1..T
    phi_ls: float  # MW/h

    @property
    def horizon(self) -> int:
        return self.load_served.size - 1

    def trace_rows(self):
        for hour, served in enumerate(self.load_served):
            lost = sorted(self.tripped[hour - 1]) if hour else []
            yield hour, float(served), " ".join(str(b) for b in lost)


def cascade_step(
    case: NetworkCase, contingencies=(), max_iter: int = DEFAULT_MAX_ITER
) -> tuple[NetworkCase, frozenset[int]]:
    """Remove ``contingencies`` and let protection act until nothing else trips.

    Each iteration re-balances every island (shedding load where capacity is
    short), solves the DC flows and trips every branch loaded beyond its
    rating.  Shed load is not restored.

    Returns
    -------
    (NetworkCase, frozenset of int)
        Final state and every branch lost in this step, contingencies included.
    """
    initial = {int(k) for k in contingencies}
    for k in initial:
        if not 0 <= k < case.n_branch:
            raise DomainError(f"no branch {k}")
    # a contingency on an already-open branch changes nothing
    lost = {k for k in initial if case.branch_status[k]}
    state = case.with_branches_out(lost) if lost else case
    for _ in range(max_iter):
        result = dc_power_flow(state)
        state = result.case
        over = result.overloaded()
        if over.size == 0:
            return state, frozenset(lost)
        lost.update(int(k) for k in over)
        state = state.with_branches_out(over)
    raise ConvergenceError(f"cascade did not settle within {max_iter} iterations")


def phi_ls(trace, t0: int = 0, t_end: int | None = None) -> float:
    """Rate of change of load served between hours ``t0`` and ``t_end``, in MW/h."""
    trace = np.asarray(trace, dtype=float)
    if t_end is None:
        t_end = trace.size - 1
    if t_end <= t0:
        raise DomainError("t_end must exceed t0")
    if t0 < 0 or t_end >= trace.size:
        raise DomainError(f"trace of length {trace.size} does not cover hours {t0}..{t_end}")
    return float((trace[t_end] - trace[t0]) / (t_end - t0))


def failure_hours(tau, horizon: int) -> np.ndarray:
    """Round failure times to the hour; anything beyond the horizon becomes ``horizon + 1``."""
    hours = np.floor(np.asarray(tau, dtype=float) + 0.5).astype(int)
    hours = np.maximum(hours, 1)
    return np.where(hours > horizon, horizon + 1, hours)


def simulate_event(
    case: NetworkCase,
    tau,
    exposed: list[int] | tuple[int, ...],
    horizon: int = 24,
    max_iter: int = DEFAULT_MAX_ITER,
    settled: tuple[NetworkCase, float] | None = None,
) -> CascadeOutcome:
    """Drive the network through one weather event.

    Parameters
    ----------
    case : NetworkCase
    tau : sequence of float
        Failure time (hours) of each exposed branch.
    exposed : sequence of int
        Branch positions the failure times refer to.
    horizon : int
        Event length ``T``; failures rounding past ``T`` never happen.
    settled : (NetworkCase, float), optional
        Pre-computed pre-event state and its load served, to skip the
        initial settling solve when simulating many events on one case.
    """
    tau = np.asarray(tau, dtype=float).ravel()
    if tau.size != len(exposed):
        raise ShapeError(f"{tau.size} failure times for {len(exposed)} exposed branches")
    if settled is None:
        settled = settle(case, max_iter)
    state, served0 = settled
    hours = failure_hours(tau, horizon)
    trace = np.empty(horizon + 1)
    trace[0] = served0
    tripped: list[frozenset[int]] = []
    for t in range(1, horizon + 1):
        due = [exposed[i] for i in np.flatnonzero(hours == t)]
        due = [k for k in due if state.branch_status[k]]
        if due:
            state, lost = cascade_step(state, due, max_iter)
        else:
            lost = frozenset()
        tripped.append(lost)
        trace[t] = state.total_demand()
    return CascadeOutcome(trace, tuple(tripped), phi_ls(trace, 0, horizon))


def settle(case: NetworkCase, max_iter: int = DEFAULT_MAX_ITER) -> tuple[NetworkCase, float]:
    """Pre-event steady state and its load served."""
    state, _ = cascade_step(case, (), max_iter)
    return state, state.total_demand()


def outcomes_to_csv(outcomes) -> tuple[str, str]:
    """Summary CSV (one row per event) and long-format trace CSV."""
    summary, traces = io.StringIO(), io.StringIO()
    ws = csv.writer(summary, lineterminator="\n")
    wt = csv.writer(traces, lineterminator="\n")
    ws.writerow(["row", "phi_ls", "load_served_start", "load_served_end", "n_tripped"])
    wt.writerow(["row", "hour", "load_served", "tripped"])
    for i, out in enumerate(outcomes):
        n_tripped = sum(len(s) for s in out.tripped)
        ws.writerow([i, repr(out.phi_ls), repr(float(out.load_served[0])),
                     repr(float(out.load_served[-1])), n_tripped])
        for hour, served, lost in out.trace_rows():
            wt.writerow([i, hour, repr(served), lost])
    return summary.getvalue(), traces.getvalue()

