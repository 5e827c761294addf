"""Network case data and a reader for MATPOWER-format case files."""

from __future__ import annotations

import re
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path

import numpy as np

from pcegrid.errors import ParseError

__all__ = ["NetworkCase", "parse_case", "load_case", "bundled_case_text", "BUS_LOAD", "BUS_GEN", "BUS_SLACK"]

BUS_LOAD, BUS_GEN, BUS_SLACK, BUS_ISOLATED = 1, 2, 3, 4

# minimum number of columns read from each table (0-based columns used below)
_REQUIRED = {"bus": 3, "gen": 10, "branch": 11}

_TABLE_START = re.compile(r"^\s*mpc\.(\w+)\s*=\s*([\[{])(.*)$")
_SCALAR = re.compile(r"^\s*mpc\.(\w+)\s*=\s*([^;\[{]+);?\s*$")


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class NetworkCase:
    """Bus/branch/generator arrays of a transmission network.

    Bus type codes follow MATPOWER: 1 load (PQ), 2 generator (PV), 3 slack,
    4 isolated.  Demands, ratings and generator limits are in MW.  A branch
    rating of ``inf`` means unlimited.
    """

    base_mva: float
    bus_id: np.ndarray
    bus_type: np.ndarray
    demand: np.ndarray
    branch_from: np.ndarray  # bus positions, not ids
    branch_to: np.ndarray
    reactance: np.ndarray  # p.u.
    rating: np.ndarray
    branch_status: np.ndarray
    gen_bus: np.ndarray  # bus positions
    gen_p: np.ndarray  # dispatch setpoint
    gen_pmax: np.ndarray
    gen_pmin: np.ndarray
    gen_status: np.ndarray

    def __post_init__(self):
        for name, dtype in (
            ("bus_id", int), ("bus_type", int), ("demand", float),
            ("branch_from", int), ("branch_to", int), ("reactance", float),
            ("rating", float), ("branch_status", bool), ("gen_bus", int),
            ("gen_p", float), ("gen_pmax", float), ("gen_pmin", float), ("gen_status", bool),
        ):
            object.__setattr__(self, name, _frozen(getattr(self, name), dtype))

    @property
    def n_bus(self) -> int:
        return self.bus_id.size

    @property
    def n_branch(self) -> int:
        return self.branch_from.size

    @property
    def n_gen(self) -> int:
        return self.gen_bus.size

    def bus_index(self, bus_id: int) -> int:
        hit = np.flatnonzero(self.bus_id == bus_id)
        if hit.size == 0:
            raise KeyError(f"no bus with id {bus_id}")
        return int(hit[0])

    def branch_endpoints(self, k: int) -> tuple[int, int]:
        """Bus ids at the ends of branch ``k``."""
        return int(self.bus_id[self.branch_from[k]]), int(self.bus_id[self.branch_to[k]])

    def branches_within(self, bus_ids) -> list[int]:
        """Branches whose two end buses both belong to ``bus_ids``."""
        ids = set(int(b) for b in bus_ids)
        return [k for k in range(self.n_branch) if set(self.branch_endpoints(k)) <= ids]

    def total_demand(self) -> float:
        return float(self.demand.sum())

    def evolve(self, **changes) -> "NetworkCase":
        return replace(self, **changes)

    def with_branches_out(self, branches) -> "NetworkCase":
        status = np.array(self.branch_status)
        status[list(branches)] = False
        return self.evolve(branch_status=status)


def _strip_comment(line: str) -> str:
    # MATPOWER files quote strings with single quotes; '%' inside strings is rare
    pos = line.find("%")
    return line if pos < 0 else line[:pos]


def _read_tables(text: str):
    tables: dict[str, list[tuple[int, list[str]]]] = {}
    starts: dict[str, int] = {}
    scalars: dict[str, tuple[int, str]] = {}
    current = None
    cell = False
    lines = text.splitlines()
    for lineno, raw in enumerate(lines, start=1):
        line = _strip_comment(raw).strip()
        if not line:
            continue
        if current is None:
            m = _TABLE_START.match(line)
            if m:
                current, cell = m.group(1), m.group(2) == "{"
                starts[current] = lineno
                tables[current] = []
                line = m.group(3)
            else:
                s = _SCALAR.match(line)
                if s:
                    scalars[s.group(1)] = (lineno, s.group(2).strip())
                continue
        elif _TABLE_START.match(line):
            raise ParseError(
                f"table mpc.{current} (opened on line {starts[current]}) is never closed", lineno
            )
        closer = "}" if cell else "]"
        done = closer in line
        if done:
            line = line[: line.index(closer)]
        if not cell:
            for chunk in line.split(";"):
                tokens = chunk.replace(",", " ").split()
                if tokens:
                    tables[current].append((lineno, tokens))
        if done:
            current = None
    if current is not None:
        raise ParseError(f"table mpc.{current} is never closed", starts[current])
    return tables, starts, scalars, len(lines)


def _numeric(name: str, rows):
    required = _REQUIRED[name]
    width = None
    out = []
    for lineno, tokens in rows:
        try:
            values = [float(t) for t in tokens]
        except ValueError:
            bad = next(t for t in tokens if not _is_float(t))
            raise ParseError(f"non-numeric entry {bad!r} in mpc.{name}", lineno) from None
        if len(values) < required:
            raise ParseError(
                f"mpc.{name} row has {len(values)} columns, at least {required} required", lineno
            )
        if width is None:
            width = len(values)
        elif len(values) != width:
            raise ParseError(f"mpc.{name} row has {len(values)} columns, expected {width}", lineno)
        out.append((lineno, values))
    return out


def _is_float(token: str) -> bool:
    try:
        float(token)
    except ValueError:
        return False
    return True


def parse_case(text: str) -> NetworkCase:
    """Read a MATPOWER case (``mpc.baseMVA``, ``mpc.bus``, ``mpc.gen``, ``mpc.branch``).

    Columns and tables the DC model does not use are ignored.  Bus ids may be
    arbitrary positive integers; they are mapped to positions.

    Raises
    ------
    ParseError
        For a missing or unterminated table, a malformed row or a reference to
        an unknown bus.  The error carries the offending 1-based line number.
    """
    tables, starts, scalars, n_lines = _read_tables(text)
    for name in ("bus", "gen", "branch"):
        if name not in tables:
            raise ParseError(f"missing table mpc.{name}", n_lines)
        if not tables[name]:
            raise ParseError(f"table mpc.{name} is empty", starts[name])

    base_mva = 100.0
    if "baseMVA" in scalars:
        lineno, value = scalars["baseMVA"]
        try:
            base_mva = float(value)
        except ValueError:
            raise ParseError(f"invalid baseMVA {value!r}", lineno) from None
        if base_mva <= 0:
            raise ParseError("baseMVA must be positive", lineno)

    bus_rows = _numeric("bus", tables["bus"])
    position: dict[int, int] = {}
    bus_id, bus_type, demand = [], [], []
    for lineno, row in bus_rows:
        bid = row[0]
        if bid != int(bid) or bid <= 0:
            raise ParseError(f"invalid bus id {bid}", lineno)
        if int(bid) in position:
            raise ParseError(f"duplicate bus id {int(bid)}", lineno)
        if int(row[1]) not in (1, 2, 3, 4) or row[1] != int(row[1]):
            raise ParseError(f"invalid bus type {row[1]}", lineno)
        position[int(bid)] = len(bus_id)
        bus_id.append(int(bid))
        bus_type.append(int(row[1]))
        demand.append(row[2])

    def locate(bid, lineno, what):
        if bid != int(bid) or int(bid) not in position:
            raise ParseError(f"{what} references unknown bus {bid:g}", lineno)
        return position[int(bid)]

    gen_bus, gen_p, gen_pmax, gen_pmin, gen_status = [], [], [], [], []
    for lineno, row in _numeric("gen", tables["gen"]):
        gen_bus.append(locate(row[0], lineno, "generator"))
        gen_p.append(row[1])
        gen_status.append(row[7] > 0)
        if row[8] < 0:
            raise ParseError("negative generator Pmax", lineno)
        gen_pmax.append(row[8])
        gen_pmin.append(row[9])

    b_from, b_to, react, rating, b_status = [], [], [], [], []
    for lineno, row in _numeric("branch", tables["branch"]):
        b_from.append(locate(row[0], lineno, "branch"))
        b_to.append(locate(row[1], lineno, "branch"))
        if row[3] == 0:
            raise ParseError("branch reactance must be non-zero", lineno)
        if row[5] < 0:
            raise ParseError("negative branch rating", lineno)
        react.append(row[3])
        rating.append(row[5] if row[5] > 0 else np.inf)  # MATPOWER: 0 means unlimited
        b_status.append(row[10] > 0)

    return NetworkCase(
        base_mva=base_mva,
        bus_id=bus_id,
        bus_type=bus_type,
        demand=demand,
        branch_from=b_from,
        branch_to=b_to,
        reactance=react,
        rating=rating,
        branch_status=b_status,
        gen_bus=gen_bus,
        gen_p=gen_p,
        gen_pmax=gen_pmax,
        gen_pmin=gen_pmin,
        gen_status=gen_status,
    )


def bundled_case_text(name: str = "case39") -> str:
    return resources.files("pcegrid.grid").joinpath("data").joinpath(f"{name}.m").read_text()


def load_case(path: str | Path | None = None) -> NetworkCase:
    """Parse a case file; ``None`` selects the bundled 39-bus case."""
    if path is None:
        return parse_case(bundled_case_text())
    return parse_case(Path(path).read_text())
