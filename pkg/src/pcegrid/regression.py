"""Least-squares and sparse (hybrid LARS) estimation of PCE coefficients."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any

import numpy as np
import scipy.linalg

from pcegrid.basis import BasisSet, design_matrix, recurrences_for
from pcegrid.design import ExperimentDesign
from pcegrid.distributions import JointInput
from pcegrid.errors import DomainError, FitError, LeverageSaturationError, ShapeError, SingularMatrixError, SizeError

__all__ = [
    "PceModel",
    "LarsStep",
    "ols_fit",
    "lars_path",
    "loo_error",
    "hybrid_lars_fit",
]

_LEVERAGE_LIMIT = 1.0 - 1e-12
# LOO values this close to the best one are treated as ties; the smaller model wins
_LOO_TIE = 1e-20


@dataclass(frozen=True)
class FitDiagnostics:
    loo_error: float
    empirical_error: float
    active_set_size: int
    n_samples: int

    def to_dict(self):
        return {
            "loo_error": self.loo_error,
            "empirical_error": self.empirical_error,
            "active_set_size": self.active_set_size,
            "n_samples": self.n_samples,
        }


@dataclass(frozen=True, eq=False)
class PceModel:
    """A fitted expansion: candidate basis, coefficient per basis term, input law."""

    basis: BasisSet
    coefficients: np.ndarray
    joint: JointInput
    diagnostics: FitDiagnostics | None = None
    design_seed: int | None = None
    design_method: str | None = None
    extra: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        coef = np.array(self.coefficients, dtype=float)
        if coef.shape != (len(self.basis),):
            raise ShapeError(f"{coef.size} coefficients for a basis of size {len(self.basis)}")
        if self.basis.dim != self.joint.dim:
            raise ShapeError("basis and joint input dimensions differ")
        coef.setflags(write=False)
        object.__setattr__(self, "coefficients", coef)

    @cached_property
    def recurrences(self):
        return recurrences_for(self.joint, self.basis.max_degrees())

    @property
    def active(self) -> np.ndarray:
        return np.flatnonzero(self.coefficients)

    def predict(self, x) -> np.ndarray:
        if isinstance(x, ExperimentDesign):
            x = x.samples
        x = np.atleast_2d(np.asarray(x, dtype=float))
        active = self.active
        if active.size == 0:
            return np.zeros(x.shape[0])
        sub = self.basis.subset(np.union1d([0], active))
        coef = self.coefficients[np.union1d([0], active)]
        return design_matrix(sub, self.recurrences, x) @ coef

    def to_dict(self) -> dict[str, Any]:
        return {
            "basis": self.basis.to_dict(),
            "coefficients": self.coefficients.tolist(),
            "joint": self.joint.to_dict(),
            "diagnostics": self.diagnostics.to_dict() if self.diagnostics else None,
            "design_seed": self.design_seed,
            "design_method": self.design_method,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "PceModel":
        diag = data.get("diagnostics")
        return cls(
            basis=BasisSet.from_dict(data["basis"]),
            coefficients=np.asarray(data["coefficients"], dtype=float),
            joint=JointInput.from_dict(data["joint"]),
            diagnostics=FitDiagnostics(**diag) if diag else None,
            design_seed=data.get("design_seed"),
            design_method=data.get("design_method"),
        )


def ols_fit(A, y) -> np.ndarray:
    """Least-squares coefficients via an SVD-based solve.

    Raises
    ------
    SingularMatrixError
        If ``A`` is not of full column rank; carries the numerical rank.
    """
    A = np.asarray(A, dtype=float)
    y = np.asarray(y, dtype=float)
    if A.ndim != 2 or y.shape != (A.shape[0],):
        raise ShapeError(f"incompatible shapes {A.shape} and {y.shape}")
    coef, _, rank, _ = np.linalg.lstsq(A, y, rcond=None)
    if rank < A.shape[1]:
        raise SingularMatrixError(int(rank), A.shape[1])
    return coef


def loo_error(A_active, y, coeffs) -> float:
    r"""Corrected relative leave-one-out error.

    .. math::

        \varepsilon = \frac{\frac1N\sum_i \left(\frac{y_i - \hat y_i}{1 - h_i}\right)^2}
                           {\widehat{\mathrm{Var}}[y]}
                      \cdot \frac{N}{N-P}\left(1 + \frac{\mathrm{tr}\,(A^TA/N)^{-1}}{N}\right)

    with ``h_i`` the hat-matrix leverages and the sample variance (``ddof=1``)
    in the denominator.
    """
    A = np.asarray(A_active, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = A.shape
    if n <= p:
        raise LeverageSaturationError(f"{n} samples cannot cross-validate {p} terms")
    q, r = np.linalg.qr(A)
    h = np.einsum("ij,ij->i", q, q)
    if np.any(h >= _LEVERAGE_LIMIT):
        raise LeverageSaturationError(f"leverage {h.max():.15g} saturates at 1")
    resid = y - A @ np.asarray(coeffs, dtype=float)
    var = float(np.var(y, ddof=1))
    if var == 0.0:
        scale = max(1.0, float(np.max(np.abs(y))))
        return 0.0 if np.all(np.abs(resid) <= 1e-12 * scale) else math.inf
    rinv = scipy.linalg.solve_triangular(r, np.eye(p))
    correction = n / (n - p) * (1.0 + float(np.sum(rinv**2)))
    return float(np.mean((resid / (1.0 - h)) ** 2) / var * correction)


@dataclass(frozen=True)
class LarsStep:
    """Active columns (intercept first) and the LARS coefficients at the end of the step."""

    active: tuple[int, ...]
    coefficients: np.ndarray


def lars_path(A, y, max_steps: int | None = None) -> list[LarsStep]:
    """Least-angle regression path; column 0 of ``A`` is the intercept.

    Non-intercept columns are centred and scaled to unit norm internally.  The
    first entry is the intercept-only model; each further entry adds the
    inactive column most correlated with the current residual after moving
    equiangularly until the next column ties.  At most ``min(N - 1, P - 1)``
    columns are added, and the path stops once every correlation vanishes.
    """
    A = np.asarray(A, dtype=float)
    y = np.asarray(y, dtype=float)
    n, P = A.shape
    if y.shape != (n,):
        raise ShapeError(f"incompatible shapes {A.shape} and {y.shape}")

    X = A[:, 1:]
    means = X.mean(axis=0)
    Xc = X - means
    norms = np.linalg.norm(Xc, axis=0)
    usable = norms > 1e-10 * max(1.0, float(norms.max(initial=0.0))) * math.sqrt(n)
    Xs = np.zeros_like(Xc)
    Xs[:, usable] = Xc[:, usable] / norms[usable]

    y_mean = float(y.mean())
    yc = y - y_mean
    tol = 1e-11 * max(float(np.linalg.norm(y)), 1e-300)
    beta = np.zeros(P - 1)

    def snapshot(active):
        coef = np.zeros(P)
        coef[1:][usable] = beta[usable] / norms[usable]
        coef[0] = y_mean - means @ coef[1:]
        return LarsStep((0,) + tuple(sorted(j + 1 for j in active)), coef)

    path = [snapshot([])]
    limit = min(n - 1, P - 1) if max_steps is None else min(max_steps, n - 1, P - 1)
    active: list[int] = []
    candidates = usable.copy()
    mu = np.zeros(n)

    while len(active) < limit:
        c = Xs.T @ (yc - mu)
        inactive = candidates.copy()
        inactive[active] = False
        if not inactive.any():
            break
        abs_c = np.where(inactive, np.abs(c), -np.inf)
        j = int(np.argmax(abs_c))
        if abs_c[j] <= tol:
            break
        trial = active + [j]
        signs = np.sign(c[trial])
        XA = Xs[:, trial] * signs
        gram = XA.T @ XA
        try:
            cho = scipy.linalg.cho_factor(gram)
            g1 = scipy.linalg.cho_solve(cho, np.ones(len(trial)))
        except np.linalg.LinAlgError:
            g1 = None
        if g1 is None or not np.all(np.isfinite(g1)) or g1.sum() <= 0:
            # column is collinear with the active set; never reconsider it
            candidates[j] = False
            continue
        if np.linalg.cond(gram) > 1e12:
            candidates[j] = False
            continue
        active = trial
        big_a = 1.0 / math.sqrt(float(g1.sum()))
        w = big_a * g1
        u = XA @ w
        a = Xs.T @ u
        big_c = float(np.mean(np.abs(c[active])))

        rest = candidates.copy()
        rest[active] = False
        gamma = big_c / big_a
        if rest.any() and len(active) < limit:
            cr, ar = c[rest], a[rest]
            with np.errstate(divide="ignore", invalid="ignore"):
                g = np.concatenate([(big_c - cr) / (big_a - ar), (big_c + cr) / (big_a + ar)])
            g = g[np.isfinite(g) & (g > 1e-15 * gamma)]
            if g.size:
                gamma = min(gamma, float(g.min()))
        mu = mu + gamma * u
        beta[active] += gamma * w * signs
        path.append(snapshot(active))
    return path


def _refit(A, y, cols):
    sub = A[:, cols]
    coef = ols_fit(sub, y)
    return coef, loo_error(sub, y, coef)


def hybrid_lars_fit(
    x,
    y,
    basis: BasisSet,
    recurrences=None,
    joint: JointInput | None = None,
    target_loo: float | None = None,
    patience: int = 2,
) -> PceModel:
    """Sparse PCE by LARS selection followed by least-squares refits.

    Every active set on the LARS path is refitted by ordinary least squares
    and scored by the corrected leave-one-out error; the best-scoring set is
    kept (ties go to the smaller set) and all other coefficients are zero.
    The path is abandoned once the score has risen ``patience`` times in a row,
    or as soon as a set reaches ``target_loo`` when that is given.

    Parameters
    ----------
    x : ExperimentDesign or array of shape (n, M)
    y : array of shape (n,)
    basis : BasisSet
        Candidate terms.
    recurrences : sequence of RecurrenceCoeffs, optional
        Built from ``joint`` when omitted.
    joint : JointInput
        Input law carried by the returned model.  Neither a design nor a bare
        array records it, so it must always be given.
    """
    seed = method = None
    if isinstance(x, ExperimentDesign):
        seed, method = x.seed, x.method
        x = x.samples
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.asarray(y, dtype=float)
    if y.shape != (x.shape[0],):
        raise ShapeError(f"{x.shape[0]} design points but {y.size} outputs")
    if y.size < 3:
        raise SizeError("hybrid LARS needs at least 3 samples")
    if joint is None:
        raise DomainError("joint input law is required")
    if recurrences is None:
        recurrences = recurrences_for(joint, basis.max_degrees())

    A = design_matrix(basis, recurrences, x)
    path = lars_path(A, y)

    scores: list[tuple[float, tuple[int, ...], np.ndarray]] = []
    previous = math.inf
    rises = 0
    for step in path:
        cols = list(step.active)
        try:
            coef, score = _refit(A, y, cols)
        except (SingularMatrixError, LeverageSaturationError):
            coef, score = None, math.inf
        if coef is not None:
            scores.append((score, step.active, coef))
            if target_loo is not None and score <= target_loo:
                break
        rises = rises + 1 if score > previous else 0
        if rises >= patience:
            break
        previous = score

    if not scores:
        raise FitError("no active set on the LARS path admits a least-squares refit")
    best = min(s for s, _, _ in scores)
    score, cols, coef = next(t for t in scores if t[0] <= best + _LOO_TIE)
    if target_loo is not None and scores[-1][0] <= target_loo:
        score, cols, coef = scores[-1]

    full = np.zeros(len(basis))
    full[list(cols)] = coef
    resid = y - A[:, list(cols)] @ coef
    var = float(np.var(y, ddof=1))
    emp = float(np.mean(resid**2) / var) if var > 0 else 0.0
    diag = FitDiagnostics(
        loo_error=float(score),
        empirical_error=emp,
        active_set_size=int(np.count_nonzero(full)) or 1,
        n_samples=int(y.size),
    )
    return PceModel(basis, full, joint, diag, design_seed=seed, design_method=method)
