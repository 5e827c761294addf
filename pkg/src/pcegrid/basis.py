"""Truncated multivariate orthonormal bases built from tensor products."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from pcegrid.design import ExperimentDesign
from pcegrid.distributions import JointInput, RecurrenceCoeffs, eval_orthonormal_table, stieltjes_recurrence
from pcegrid.errors import DomainError, ShapeError

__all__ = [
    "BasisSet",
    "qnorm_truncation",
    "eval_multivariate",
    "design_matrix",
    "recurrences_for",
]

_QNORM_SLACK = 1e-12

MultiIndex = tuple[int, ...]


@dataclass(frozen=True)
class BasisSet:
    indices: tuple[MultiIndex, ...]
    p: int
    q: float

    def __post_init__(self):
        idx = tuple(tuple(int(a) for a in alpha) for alpha in self.indices)
        object.__setattr__(self, "indices", idx)
        if not idx or any(idx[0]):
            raise DomainError("basis must start with the zero multi-index")
        if len(set(idx)) != len(idx):
            raise DomainError("duplicate multi-indices in basis")
        if len({len(a) for a in idx}) != 1:
            raise DomainError("multi-indices of unequal length")

    def __len__(self):
        return len(self.indices)

    @property
    def dim(self) -> int:
        return len(self.indices[0])

    def as_array(self) -> np.ndarray:
        return np.array(self.indices, dtype=int).reshape(len(self), self.dim)

    def max_degrees(self) -> np.ndarray:
        """Largest univariate degree used in each dimension."""
        return self.as_array().max(axis=0)

    def subset(self, positions: Sequence[int]) -> "BasisSet":
        return BasisSet(tuple(self.indices[i] for i in positions), self.p, self.q)

    def to_dict(self):
        return {"p": self.p, "q": self.q, "indices": [list(a) for a in self.indices]}

    @classmethod
    def from_dict(cls, data) -> "BasisSet":
        return cls(tuple(tuple(a) for a in data["indices"]), int(data["p"]), float(data["q"]))


def _in_qball(alpha: MultiIndex, p: int, q: float) -> bool:
    if q == 1.0:
        return sum(alpha) <= p
    nz = [a for a in alpha if a]
    if not nz:
        return True
    return sum(a**q for a in nz) ** (1.0 / q) <= p * (1.0 + _QNORM_SLACK)


def _qball_candidates(dim: int, p: int, q: float):
    # depth-first over coordinates, pruning once the partial q-sum leaves the ball;
    # q <= 1 implies the q-norm bounds the total degree, so |alpha| <= p as well
    budget = float(p) if q == 1.0 else (p * (1.0 + _QNORM_SLACK)) ** q

    def walk(prefix, degree_left, qsum):
        if len(prefix) == dim:
            yield tuple(prefix)
            return
        for a in range(degree_left + 1):
            s = qsum + (a if q == 1.0 else a**q)
            if a and s > budget:
                break
            prefix.append(a)
            yield from walk(prefix, degree_left - a, s)
            prefix.pop()

    yield from walk([], p, 0.0)


def qnorm_truncation(dim: int, p: int, q: float = 1.0) -> BasisSet:
    """Multi-indices with ``(sum alpha_i^q)^(1/q) <= p``.

    Ordered by total degree, then lexicographically with larger leading
    entries first, e.g. ``(0,0), (1,0), (0,1), (2,0), (1,1), (0,2)``.
    """
    if dim < 1:
        raise DomainError("dimension must be >= 1")
    if p < 0:
        raise DomainError("degree must be >= 0")
    if not (0.0 < q <= 1.0):
        raise DomainError(f"q must lie in (0, 1], got {q}")
    members = [a for a in _qball_candidates(dim, p, q) if _in_qball(a, p, q)]
    members.sort(key=lambda a: (sum(a), tuple(-x for x in a)))
    return BasisSet(tuple(members), p, float(q))


def recurrences_for(joint: JointInput, degrees) -> tuple[RecurrenceCoeffs, ...]:
    """Recurrence per input dimension, up to the requested degree in each."""
    degrees = np.broadcast_to(np.asarray(degrees, dtype=int), (joint.dim,))
    return tuple(stieltjes_recurrence(m, int(d)) for m, d in zip(joint.marginals, degrees))


def _tables(bs: BasisSet, recurrences, x: np.ndarray):
    if x.ndim != 2 or x.shape[1] != bs.dim or len(recurrences) != bs.dim:
        raise ShapeError(
            f"basis of dimension {bs.dim} cannot be evaluated on points of shape {x.shape} "
            f"with {len(recurrences)} recurrences"
        )
    maxdeg = bs.max_degrees()
    return [eval_orthonormal_table(rc, int(d), x[:, i]) for i, (rc, d) in enumerate(zip(recurrences, maxdeg))]


def _matrix(bs: BasisSet, recurrences, x: np.ndarray) -> np.ndarray:
    tables = _tables(bs, recurrences, x)
    idx = bs.as_array()
    out = np.ones((x.shape[0], len(bs)))
    for i, table in enumerate(tables):
        out *= table[:, idx[:, i]]
    return out


def eval_multivariate(bs: BasisSet, recurrences, point) -> np.ndarray:
    """All basis polynomials at one ``M``-dimensional point."""
    point = np.asarray(point, dtype=float)
    if point.ndim != 1:
        raise ShapeError("expected a single point")
    return _matrix(bs, recurrences, point[None, :])[0]


def design_matrix(bs: BasisSet, recurrences, x) -> np.ndarray:
    """Evaluate every basis polynomial at every design point.

    Parameters
    ----------
    bs : BasisSet
    recurrences : sequence of RecurrenceCoeffs
        One per input dimension, each of degree at least the basis' maximum
        degree in that dimension.
    x : ExperimentDesign or array of shape (n, M)

    Returns
    -------
    ndarray of shape (n, len(bs))
    """
    if isinstance(x, ExperimentDesign):
        x = x.samples
    return _matrix(bs, recurrences, np.asarray(x, dtype=float))
