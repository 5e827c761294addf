"""Experiment designs: Monte Carlo, Latin hypercube and maximin Latin hypercube.

All designs are generated in quantile space ``[0, 1]^M`` and mapped to
physical space through the marginal quantile functions.  Both coordinates
are kept on the :class:`ExperimentDesign`, since space-filling criteria are
measured on the quantiles.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from typing import Any

import numpy as np
from scipy.spatial.distance import pdist

from pcegrid.distributions import JointInput
from pcegrid.errors import DomainError, SizeError

__all__ = [
    "ExperimentDesign",
    "mcs_design",
    "lhs_design",
    "mmlhs_design",
    "mmlhs_candidates",
    "min_pairwise_distance",
    "make_design",
    "read_design_csv",
]

METHODS = ("MCS", "LHS", "MmLHS")
DEFAULT_N_CANDIDATES = 100


@dataclass(frozen=True, eq=False)
class ExperimentDesign:
    samples: np.ndarray
    quantiles: np.ndarray
    method: str
    seed: int | None
    n_candidates: int | None = None
    names: tuple[str, ...] = ()

    def __post_init__(self):
        for arr in (self.samples, self.quantiles):
            arr.setflags(write=False)
        if self.samples.shape != self.quantiles.shape:
            raise DomainError("samples and quantiles must have the same shape")
        if not self.names:
            object.__setattr__(self, "names", tuple(f"x{i + 1}" for i in range(self.dim)))

    @property
    def n(self) -> int:
        return self.samples.shape[0]

    @property
    def dim(self) -> int:
        return self.samples.shape[1]

    def metadata(self) -> dict[str, Any]:
        return {
            "method": self.method,
            "seed": self.seed,
            "n_candidates": self.n_candidates,
            "n_samples": self.n,
            "dim": self.dim,
            "names": list(self.names),
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.names)
        for row in self.samples:
            writer.writerow([repr(float(v)) for v in row])
        return buf.getvalue()

    def to_json(self) -> str:
        data = self.metadata()
        data["samples"] = self.samples.tolist()
        data["quantiles"] = self.quantiles.tolist()
        data["min_distance"] = min_pairwise_distance(self) if self.n >= 2 else None
        return json.dumps(data, indent=2, sort_keys=True)


def read_design_csv(text: str) -> tuple[tuple[str, ...], np.ndarray]:
    """Parse a design CSV written by :meth:`ExperimentDesign.to_csv`."""
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise DomainError("empty design file")
    header = tuple(rows[0])
    try:
        data = np.array([[float(v) for v in r] for r in rows[1:] if r], dtype=float)
    except ValueError as exc:
        raise DomainError(f"non-numeric design entry: {exc}") from exc
    data = data.reshape(-1, len(header))
    return header, data


def _rng(seed) -> np.random.Generator:
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    return np.random.Generator(np.random.Philox(seed))


def _check_n(n: int, minimum: int = 1):
    if not isinstance(n, (int, np.integer)) or n < minimum:
        raise DomainError(f"number of samples must be an integer >= {minimum}, got {n!r}")


def _lhs_quantiles(rng: np.random.Generator, n: int, dim: int) -> np.ndarray:
    u = np.empty((n, dim))
    for j in range(dim):
        strata = rng.permutation(n)
        col = (strata + rng.random(n)) / n
        # guard the stratum boundary against rounding of (k + r) / n
        bad = np.floor(col * n) != strata
        col[bad] = (strata[bad] + 0.5) / n
        u[:, j] = col
    return u


def _build(joint: JointInput, u: np.ndarray, method: str, seed, n_candidates=None):
    return ExperimentDesign(
        samples=joint.quantile(u),
        quantiles=u,
        method=method,
        seed=seed,
        n_candidates=n_candidates,
        names=joint.names,
    )


def mcs_design(joint: JointInput, n: int, seed: int) -> ExperimentDesign:
    """``n`` independent draws from ``joint``."""
    _check_n(n)
    u = _rng(seed).random((n, joint.dim))
    return _build(joint, u, "MCS", seed)


def lhs_design(joint: JointInput, n: int, seed) -> ExperimentDesign:
    """Jittered Latin hypercube: one point per stratum ``[i/n, (i+1)/n)`` in every column."""
    _check_n(n)
    u = _lhs_quantiles(_rng(seed), n, joint.dim)
    return _build(joint, u, "LHS", seed if not isinstance(seed, np.random.SeedSequence) else None)


def mmlhs_candidates(
    joint: JointInput, n: int, n_candidates: int, seed: int
) -> list[ExperimentDesign]:
    """Regenerate the candidate pool searched by :func:`mmlhs_design`.

    Candidate ``i`` is drawn from the ``i``-th child of ``SeedSequence(seed)``.
    """
    _check_n(n)
    if n_candidates < 1:
        raise DomainError("n_candidates must be >= 1")
    children = np.random.SeedSequence(seed).spawn(n_candidates)
    return [lhs_design(joint, n, child) for child in children]


def mmlhs_design(
    joint: JointInput, n: int, n_candidates: int = DEFAULT_N_CANDIDATES, seed: int = 0
) -> ExperimentDesign:
    """Best of ``n_candidates`` Latin hypercubes under the maximin criterion.

    Each candidate is scored by its smallest pairwise Euclidean distance in
    quantile space; the largest score wins and ties go to the lowest
    candidate index.
    """
    _check_n(n, minimum=2)
    candidates = mmlhs_candidates(joint, n, n_candidates, seed)
    scores = np.array([min_pairwise_distance(c) for c in candidates])
    best = candidates[int(np.argmax(scores))]  # argmax returns the first maximum
    return ExperimentDesign(
        samples=best.samples,
        quantiles=best.quantiles,
        method="MmLHS",
        seed=seed,
        n_candidates=n_candidates,
        names=joint.names,
    )


def min_pairwise_distance(design: ExperimentDesign | np.ndarray) -> float:
    """Minimum Euclidean distance over unordered pairs of quantile-space points."""
    u = design.quantiles if isinstance(design, ExperimentDesign) else np.asarray(design, float)
    u = u.reshape(u.shape[0], -1)
    if u.shape[0] < 2:
        raise SizeError("minimum distance needs at least two points")
    return float(pdist(u).min())


def make_design(
    method: str,
    joint: JointInput,
    n: int,
    seed: int,
    n_candidates: int = DEFAULT_N_CANDIDATES,
) -> ExperimentDesign:
    """Dispatch on a method name (case-insensitive)."""
    key = method.lower()
    if key == "mcs":
        return mcs_design(joint, n, seed)
    if key == "lhs":
        return lhs_design(joint, n, seed)
    if key == "mmlhs":
        return mmlhs_design(joint, n, n_candidates, seed)
    raise DomainError(f"unknown design method {method!r}; expected one of {METHODS}")
