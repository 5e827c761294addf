"""Marginal input distributions and their orthonormal polynomial families.

Every marginal exposes ``cdf``/``quantile`` for inverse-transform sampling and
a finite discretization (nodes and weights) from which the three-term
recurrence of its orthonormal polynomials is built.  The recurrence uses the
Gautschi convention

.. math::

    \\sqrt{\\beta_{k+1}}\\,\\psi_{k+1}(x) = (x - \\alpha_k)\\psi_k(x)
        - \\sqrt{\\beta_k}\\,\\psi_{k-1}(x), \\qquad \\psi_0 = 1,\\ \\psi_{-1} = 0,

with :math:`\\beta_0 = 1` the total mass of the (probability) measure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np
from scipy import special, stats

from pcegrid.errors import DegreeError, DomainError, IllConditionedError

__all__ = [
    "Marginal",
    "Uniform",
    "Gaussian",
    "DiscreteHourly",
    "Empirical",
    "JointInput",
    "RecurrenceCoeffs",
    "quantile",
    "stieltjes_recurrence",
    "eval_orthonormal",
    "eval_orthonormal_table",
    "marginal_from_dict",
]

# relative threshold below which a recurrence coefficient counts as zero
_BETA_RTOL = 1e-24


def _check_probability(u):
    u = np.asarray(u, dtype=float)
    if np.any(~np.isfinite(u)) or np.any(u < 0.0) or np.any(u > 1.0):
        raise DomainError("probability must lie in [0, 1]")
    return u


class Marginal:
    """Base class of the one-dimensional input laws."""

    kind: str = ""
    continuous: bool = True

    @property
    def support(self) -> tuple[float, float]:
        raise NotImplementedError

    def cdf(self, x):
        raise NotImplementedError

    def quantile(self, u):
        raise NotImplementedError

    def mean(self) -> float:
        nodes, weights = self.discretize(1)
        return float(weights @ nodes)

    def discretize(self, p_max: int) -> tuple[np.ndarray, np.ndarray]:
        """Nodes and positive weights summing to one that reproduce the first
        ``2 * p_max`` moments of the law exactly (or, for atomic laws, the law itself)."""
        raise NotImplementedError

    def params(self) -> dict[str, Any]:
        raise NotImplementedError

    def to_dict(self) -> dict[str, Any]:
        lo, hi = self.support
        return {
            "kind": self.kind,
            "params": self.params(),
            "support": [None if math.isinf(lo) else lo, None if math.isinf(hi) else hi],
        }


def _n_quadrature(p_max: int) -> int:
    return max(64, 4 * p_max * 64)


@dataclass(frozen=True)
class Uniform(Marginal):
    lo: float
    hi: float

    kind = "uniform"

    def __post_init__(self):
        if not (np.isfinite(self.lo) and np.isfinite(self.hi) and self.hi > self.lo):
            raise DomainError(f"invalid uniform bounds [{self.lo}, {self.hi}]")

    @property
    def support(self):
        return (float(self.lo), float(self.hi))

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.clip((x - self.lo) / (self.hi - self.lo), 0.0, 1.0)

    def quantile(self, u):
        u = _check_probability(u)
        return self.lo + u * (self.hi - self.lo)

    def mean(self):
        return 0.5 * (self.lo + self.hi)

    def discretize(self, p_max):
        x, w = special.roots_legendre(_n_quadrature(p_max))
        half = 0.5 * (self.hi - self.lo)
        return self.lo + half * (x + 1.0), w / w.sum()

    def params(self):
        return {"lo": float(self.lo), "hi": float(self.hi)}


@dataclass(frozen=True)
class Gaussian(Marginal):
    mean_: float
    std: float

    kind = "gaussian"

    def __post_init__(self):
        if not (np.isfinite(self.mean_) and self.std > 0 and np.isfinite(self.std)):
            raise DomainError(f"invalid gaussian parameters ({self.mean_}, {self.std})")

    @property
    def support(self):
        return (-math.inf, math.inf)

    def cdf(self, x):
        return stats.norm.cdf(x, loc=self.mean_, scale=self.std)

    def quantile(self, u):
        u = _check_probability(u)
        return stats.norm.ppf(u, loc=self.mean_, scale=self.std)

    def mean(self):
        return float(self.mean_)

    def discretize(self, p_max):
        x, w = special.roots_hermitenorm(_n_quadrature(p_max))
        keep = w > 0
        return self.mean_ + self.std * x[keep], w[keep] / w[keep].sum()

    def params(self):
        return {"mean": float(self.mean_), "std": float(self.std)}


class _Atomic(Marginal):
    """Shared machinery for laws with finitely many atoms."""

    continuous = False
    values: np.ndarray
    weights: np.ndarray

    @staticmethod
    def _normalize(values, weights):
        values = np.asarray(values, dtype=float)
        weights = np.asarray(weights, dtype=float)
        if values.ndim != 1 or values.shape != weights.shape or values.size == 0:
            raise DomainError("atoms and weights must be equal-length non-empty vectors")
        if np.any(weights < 0) or not np.all(np.isfinite(weights)):
            raise DomainError("atom weights must be finite and non-negative")
        total = weights.sum()
        if total <= 0:
            raise DomainError("atom weights sum to zero")
        if np.any(np.diff(values) <= 0):
            raise DomainError("atoms must be strictly increasing")
        weights = weights / total
        weights.setflags(write=False)
        values.setflags(write=False)
        return values, weights

    @property
    def support(self):
        return (float(self.values[0]), float(self.values[-1]))

    @property
    def n_atoms(self) -> int:
        """Number of atoms carrying positive mass."""
        return int(np.count_nonzero(self.weights > 0))

    def cdf(self, x):
        cum = np.cumsum(self.weights)
        idx = np.searchsorted(self.values, np.asarray(x, dtype=float), side="right")
        return np.where(idx > 0, cum[np.maximum(idx - 1, 0)], 0.0)

    def quantile(self, u):
        u = _check_probability(u)
        cum = np.cumsum(self.weights)
        cum[-1] = 1.0
        # smallest atom whose cumulative mass reaches u, skipping zero-mass atoms
        # at the lower end so that u = 0 maps onto the first atom with mass
        idx = np.searchsorted(cum, u - 1e-14 * (u > 0), side="left")
        first = int(np.argmax(self.weights > 0))
        idx = np.maximum(idx, first)
        return self.values[np.minimum(idx, self.values.size - 1)]

    def mean(self):
        return float(self.weights @ self.values)

    def discretize(self, p_max):
        keep = self.weights > 0
        return np.array(self.values[keep]), np.array(self.weights[keep])


class DiscreteHourly(_Atomic):
    """Probability mass on whole hours of an event horizon.

    Parameters
    ----------
    hours : sequence of int
        Strictly increasing hours carrying the atoms.
    probs : sequence of float
        Mass per hour; must sum to 1 (within 1e-9) and is renormalized exactly.
    """

    kind = "discrete_hourly"

    def __init__(self, hours: Sequence[float], probs: Sequence[float]):
        total = float(np.sum(np.asarray(probs, dtype=float)))
        if not abs(total - 1.0) <= 1e-9:
            raise DomainError(f"hourly probabilities sum to {total!r}, not 1")
        self.values, self.weights = self._normalize(hours, probs)

    @property
    def hours(self) -> np.ndarray:
        return self.values

    @property
    def probs(self) -> np.ndarray:
        return self.weights

    @classmethod
    def from_mapping(cls, masses: dict[float, float]) -> "DiscreteHourly":
        hours = sorted(masses)
        return cls(hours, [masses[h] for h in hours])

    def params(self):
        return {"hours": self.values.tolist(), "probs": self.weights.tolist()}

    def __eq__(self, other):
        return (
            type(other) is type(self)
            and np.array_equal(self.values, other.values)
            and np.array_equal(self.weights, other.weights)
        )

    def __hash__(self):
        return hash((self.kind, self.values.tobytes(), self.weights.tobytes()))

    def __repr__(self):
        return f"DiscreteHourly(hours={self.values.tolist()}, probs={self.weights.tolist()})"


class Empirical(_Atomic):
    """Weighted empirical law on sorted support values."""

    kind = "empirical"

    def __init__(self, values: Sequence[float], weights: Sequence[float] | None = None):
        values = np.asarray(values, dtype=float)
        if weights is None:
            uniq, counts = np.unique(values, return_counts=True)
            values, weights = uniq, counts.astype(float)
        self.values, self.weights = self._normalize(values, weights)

    def params(self):
        return {"values": self.values.tolist(), "weights": self.weights.tolist()}

    def __eq__(self, other):
        return (
            type(other) is type(self)
            and np.array_equal(self.values, other.values)
            and np.array_equal(self.weights, other.weights)
        )

    def __hash__(self):
        return hash((self.kind, self.values.tobytes(), self.weights.tobytes()))

    def __repr__(self):
        return f"Empirical(n_atoms={self.values.size})"


def marginal_from_dict(data: dict[str, Any]) -> Marginal:
    """Inverse of :meth:`Marginal.to_dict`."""
    try:
        kind = data["kind"]
        params = data["params"]
        if kind == "uniform":
            return Uniform(float(params["lo"]), float(params["hi"]))
        if kind == "gaussian":
            return Gaussian(float(params["mean"]), float(params["std"]))
        if kind == "discrete_hourly":
            return DiscreteHourly(params["hours"], params["probs"])
        if kind == "empirical":
            return Empirical(params["values"], params.get("weights"))
    except (KeyError, TypeError) as exc:
        raise DomainError(f"malformed marginal specification: {data!r}") from exc
    raise DomainError(f"unknown marginal kind {kind!r}")


@dataclass(frozen=True)
class JointInput:
    """Independent marginals stacked into an ``M``-dimensional input."""

    marginals: tuple[Marginal, ...]
    names: tuple[str, ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "marginals", tuple(self.marginals))
        if not self.marginals:
            raise DomainError("joint input needs at least one marginal")
        names = tuple(self.names) or tuple(f"x{i + 1}" for i in range(len(self.marginals)))
        if len(names) != len(self.marginals):
            raise DomainError("one name per marginal expected")
        object.__setattr__(self, "names", names)

    @property
    def dim(self) -> int:
        return len(self.marginals)

    def quantile(self, u: np.ndarray) -> np.ndarray:
        """Map an ``(n, M)`` array of probabilities to physical space column-wise."""
        u = np.atleast_2d(np.asarray(u, dtype=float))
        if u.shape[1] != self.dim:
            raise DomainError(f"expected {self.dim} columns, got {u.shape[1]}")
        return np.column_stack([m.quantile(u[:, i]) for i, m in enumerate(self.marginals)])

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return self.quantile(rng.random((n, self.dim)))

    def to_dict(self) -> dict[str, Any]:
        return {"names": list(self.names), "marginals": [m.to_dict() for m in self.marginals]}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "JointInput":
        margs = [marginal_from_dict(m) for m in data["marginals"]]
        return cls(tuple(margs), tuple(data.get("names") or ()))


@dataclass(frozen=True)
class RecurrenceCoeffs:
    """Three-term recurrence of an orthonormal polynomial family.

    ``alpha[k]`` and ``beta[k]`` for ``k = 0..p_max``; ``beta[0]`` is the
    total mass (one for probability measures).
    """

    alpha: tuple[float, ...]
    beta: tuple[float, ...]

    def __post_init__(self):
        if len(self.alpha) != len(self.beta) or not self.alpha:
            raise DomainError("alpha and beta must have equal, non-zero length")
        if any(b <= 0 for b in self.beta[1:]):
            raise IllConditionedError(next(k for k, b in enumerate(self.beta) if k and b <= 0))

    @property
    def p_max(self) -> int:
        return len(self.alpha) - 1


def quantile(m: Marginal, u):
    """Inverse CDF of ``m``; for atomic laws the smallest atom with cumulative mass >= ``u``."""
    out = m.quantile(u)
    return float(out) if np.ndim(out) == 0 else out


def stieltjes_recurrence(m: Marginal, p_max: int) -> RecurrenceCoeffs:
    """Recurrence coefficients of the polynomials orthonormal w.r.t. ``m``.

    The law is replaced by a discrete measure (Gauss-type rule for the
    classical kinds, the atoms themselves otherwise) and the coefficients are
    obtained by Lanczos orthogonal reduction of ``diag(nodes)`` started from
    ``sqrt(weights)``, with full reorthogonalization.

    Raises
    ------
    IllConditionedError
        When a ``beta_k`` is numerically zero, i.e. the measure supports fewer
        than ``p_max + 1`` orthonormal polynomials.
    """
    if p_max < 0:
        raise DegreeError("p_max must be non-negative")
    nodes, weights = m.discretize(p_max)
    if nodes.size < p_max + 1:
        raise IllConditionedError(
            nodes.size,
            f"measure with {nodes.size} atoms supports degree <= {nodes.size - 1}, "
            f"requested {p_max}",
        )

    center = float(weights @ nodes)
    scale = float(np.max(np.abs(nodes - center))) or 1.0
    x = (nodes - center) / scale  # recurrences are affine-equivariant

    alpha = np.zeros(p_max + 1)
    beta = np.zeros(p_max + 1)
    beta[0] = 1.0
    basis = np.zeros((p_max + 1, x.size))
    basis[0] = np.sqrt(weights)
    for k in range(p_max + 1):
        v = x * basis[k]
        alpha[k] = basis[k] @ v
        if k == p_max:
            break
        v -= alpha[k] * basis[k]
        if k > 0:
            v -= np.sqrt(beta[k]) * basis[k - 1]
        for _ in range(2):
            v -= basis[: k + 1].T @ (basis[: k + 1] @ v)
        norm2 = float(v @ v)
        if not norm2 > _BETA_RTOL:
            raise IllConditionedError(k + 1)
        beta[k + 1] = norm2
        basis[k + 1] = v / math.sqrt(norm2)

    alpha = center + scale * alpha
    beta[1:] *= scale * scale
    return RecurrenceCoeffs(tuple(alpha.tolist()), tuple(beta.tolist()))


def eval_orthonormal_table(rc: RecurrenceCoeffs, degree: int, x) -> np.ndarray:
    """Values ``psi_0..psi_degree`` at ``x``; shape ``x.shape + (degree + 1,)``."""
    if degree < 0 or degree > rc.p_max:
        raise DegreeError(f"degree {degree} outside 0..{rc.p_max}")
    x = np.asarray(x, dtype=float)
    out = np.empty(x.shape + (degree + 1,))
    out[..., 0] = 1.0 / math.sqrt(rc.beta[0])
    if degree >= 1:
        out[..., 1] = (x - rc.alpha[0]) * out[..., 0] / math.sqrt(rc.beta[1])
    for k in range(1, degree):
        out[..., k + 1] = (
            (x - rc.alpha[k]) * out[..., k] - math.sqrt(rc.beta[k]) * out[..., k - 1]
        ) / math.sqrt(rc.beta[k + 1])
    return out


def eval_orthonormal(rc: RecurrenceCoeffs, degree: int, x):
    """Evaluate ``psi_degree`` at ``x`` by forward recurrence."""
    out = eval_orthonormal_table(rc, degree, x)[..., degree]
    return float(out) if np.ndim(out) == 0 else out
