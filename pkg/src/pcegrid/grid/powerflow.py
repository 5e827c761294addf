"""DC power flow with per-island generation/load balancing."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from pcegrid.errors import NumericalError
from pcegrid.grid.case import BUS_SLACK, NetworkCase

__all__ = ["DCResult", "islands", "balance_islands", "dc_power_flow"]

_BALANCE_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class DCResult:
    case: NetworkCase  # balanced case: served demand, dispatch and generator statuses applied
    flows: np.ndarray  # MW per branch, zero for out-of-service branches
    theta: np.ndarray  # rad per bus
    island: np.ndarray  # island label per bus
    slack: dict[int, int | None]  # island label -> slack bus position

    @property
    def load_served(self) -> float:
        return self.case.total_demand()

    def overloaded(self, rtol: float = 1e-9) -> np.ndarray:
        """Positions of in-service branches whose flow exceeds their rating."""
        over = np.abs(self.flows) > self.case.rating * (1.0 + rtol)
        return np.flatnonzero(over & self.case.branch_status)


def islands(case: NetworkCase) -> tuple[int, np.ndarray]:
    """Connected components of the in-service branch graph."""
    on = case.branch_status
    n = case.n_bus
    graph = coo_matrix(
        (np.ones(int(on.sum())), (case.branch_from[on], case.branch_to[on])), shape=(n, n)
    )
    return connected_components(graph, directed=False)


def _dispatch(p, pmin, pmax, target):
    """Move setpoints ``p`` towards ``target`` total, proportionally to headroom.

    Returns the new setpoints and a mask of units still online.  When even the
    minimum outputs exceed the target, units trip in ascending capacity order.
    """
    online = np.ones(p.size, dtype=bool)
    p = np.clip(p, pmin, pmax)
    while True:
        total = p[online].sum()
        if total > target:
            room = (p - pmin) * online
            if room.sum() >= total - target - _BALANCE_TOL * max(1.0, target):
                if room.sum() > 0:
                    p = p - room * ((total - target) / room.sum())
                return np.where(online, p, 0.0), online
            # curtail everything to pmin, then shed the smallest unit
            candidates = np.flatnonzero(online)
            smallest = candidates[np.lexsort((candidates, pmax[candidates]))[0]]
            online[smallest] = False
            p = np.where(online, pmin, 0.0)
            continue
        room = (pmax - p) * online
        if total < target and room.sum() > 0:
            p = p + room * min(1.0, (target - total) / room.sum())
        return np.where(online, p, 0.0), online


def balance_islands(case: NetworkCase) -> tuple[NetworkCase, int, np.ndarray, dict[int, int | None]]:
    """Match generation and load inside every island.

    Islands whose demand exceeds their online capacity shed load on every bus
    by the same fraction; islands without capacity serve nothing.  Surplus
    generation is curtailed proportionally (down to ``pmin``), then units trip
    smallest first.  The island slack is the case's slack bus when present,
    otherwise the bus of the largest online unit.
    """
    n_isl, label = islands(case)
    demand = np.array(case.demand)
    gen_p = np.where(case.gen_status, case.gen_p, 0.0)
    gen_status = np.array(case.gen_status)
    gen_island = label[case.gen_bus]
    slack: dict[int, int | None] = {}

    for isl in range(n_isl):
        buses = label == isl
        units = np.flatnonzero((gen_island == isl) & gen_status & (case.gen_pmax > 0))
        load = demand[buses].sum()
        capacity = case.gen_pmax[units].sum()
        if load > capacity:
            demand[buses] *= capacity / load if load > 0 else 0.0
            gen_p[units] = case.gen_pmax[units]
        elif units.size:
            p, online = _dispatch(
                gen_p[units], case.gen_pmin[units], case.gen_pmax[units], load
            )
            gen_p[units] = p
            gen_status[units] = online
            # islands can lose their whole fleet to over-generation only when load is 0
            if not online.any():
                demand[buses] = 0.0
        # dead generators (status off or pmax 0) produce nothing
        dead = np.flatnonzero((gen_island == isl) & ~gen_status)
        gen_p[dead] = 0.0

        ref = np.flatnonzero(buses & (case.bus_type == BUS_SLACK))
        live = np.flatnonzero((gen_island == isl) & gen_status & (gen_p > 0))
        if ref.size and live.size:
            slack[isl] = int(ref[0])
        elif live.size:
            biggest = live[np.lexsort((live, -case.gen_pmax[live]))[0]]
            slack[isl] = int(case.gen_bus[biggest])
        else:
            slack[isl] = None

    balanced = case.evolve(demand=demand, gen_p=gen_p, gen_status=gen_status)
    return balanced, n_isl, label, slack


def dc_power_flow(case: NetworkCase) -> DCResult:
    """Balance every island and solve ``B theta = P`` on each of them.

    Returns
    -------
    DCResult
        Branch flows in MW, ``(theta_from - theta_to) / x * base_mva``.

    Raises
    ------
    NumericalError
        If the reduced susceptance matrix of an island is singular.
    """
    balanced, n_isl, label, slack = balance_islands(case)
    n = case.n_bus
    inj = -np.array(balanced.demand)
    np.add.at(inj, balanced.gen_bus, balanced.gen_p)
    inj /= case.base_mva

    on = np.flatnonzero(case.branch_status)
    f, t = case.branch_from[on], case.branch_to[on]
    b = 1.0 / case.reactance[on]
    B = np.zeros((n, n))
    np.add.at(B, (f, f), b)
    np.add.at(B, (t, t), b)
    np.add.at(B, (f, t), -b)
    np.add.at(B, (t, f), -b)

    theta = np.zeros(n)
    for isl in range(n_isl):
        ref = slack[isl]
        buses = np.flatnonzero(label == isl)
        if ref is None or buses.size == 1:
            continue  # nothing flows in a dead island or across a lone bus
        rest = buses[buses != ref]
        sub = B[np.ix_(rest, rest)]
        try:
            theta[rest] = np.linalg.solve(sub, inj[rest])
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"singular susceptance matrix in island {isl}") from exc
        if not np.all(np.isfinite(theta[rest])):
            raise NumericalError(f"non-finite angles in island {isl}")

    flows = np.zeros(case.n_branch)
    flows[on] = (theta[f] - theta[t]) * b * case.base_mva
    return DCResult(balanced, flows, theta, label, slack)
