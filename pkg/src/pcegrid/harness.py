"""Replicated PCE studies: stability of moment estimates across experiment designs.

A study fits one sparse expansion per (design method, sample size, replicate)
and summarizes how the moment estimates spread across replicates, against
reference moments from the model's analytic values or a Monte Carlo oracle.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Protocol

import numpy as np

from pcegrid.basis import design_matrix, qnorm_truncation, recurrences_for
from pcegrid.design import DEFAULT_N_CANDIDATES, METHODS, make_design
from pcegrid.distributions import JointInput, Uniform
from pcegrid.errors import DomainError, PceGridError
from pcegrid.postproc import pce_mean, pce_std, robust_std
from pcegrid.regression import hybrid_lars_fit

__all__ = [
    "Model",
    "ConstantModel",
    "IdentityModel",
    "SparsePolynomialModel",
    "IshigamiModel",
    "OracleMoments",
    "mcs_oracle",
    "StabilityStudyConfig",
    "StabilityReport",
    "run_study",
    "relative_error",
    "make_model",
]

DEFAULT_SAMPLE_SIZES = tuple(range(20, 101, 10))
_METHOD_CODE = {"MCS": 0, "LHS": 1, "MmLHS": 2}
# asymptotic sd of the normal-consistent MAD, in units of sigma / sqrt(n)
_MAD_SE_FACTOR = 1.1664


class Model(Protocol):
    name: str
    joint: JointInput

    def __call__(self, x: np.ndarray) -> np.ndarray: ...


@dataclass(frozen=True)
class ConstantModel:
    value: float = 5.0
    dim: int = 2
    name: str = "constant"

    @property
    def joint(self):
        return JointInput((Uniform(0.0, 1.0),) * self.dim)

    def __call__(self, x):
        return np.full(np.atleast_2d(x).shape[0], float(self.value))

    def reference(self):
        return self.value, 0.0


@dataclass(frozen=True)
class IdentityModel:
    """First coordinate of a uniform(0, 1) input."""

    name: str = "identity"

    @property
    def joint(self):
        return JointInput((Uniform(0.0, 1.0),))

    def __call__(self, x):
        return np.atleast_2d(x)[:, 0].astype(float)

    def reference(self):
        return 0.5, math.sqrt(1.0 / 12.0)


@dataclass(frozen=True)
class SparsePolynomialModel:
    """A known combination of orthonormal polynomials in uniform(-1, 1) inputs.

    ``terms`` maps multi-indices to coefficients, so the exact mean is the
    constant term and the exact variance the sum of the other squares.
    """

    terms: tuple[tuple[tuple[int, ...], float], ...] = (
        ((0, 0, 0, 0), 2.0),
        ((1, 0, 0, 0), 1.5),
        ((0, 0, 1, 0), -0.8),
        ((1, 1, 0, 0), 0.6),
        ((0, 0, 0, 2), 0.4),
        ((0, 1, 0, 2), -0.3),
        ((3, 0, 0, 0), 0.25),
    )
    name: str = "sparse_polynomial"

    @property
    def dim(self) -> int:
        return len(self.terms[0][0])

    @property
    def joint(self):
        return JointInput((Uniform(-1.0, 1.0),) * self.dim)

    def _basis(self):
        from pcegrid.basis import BasisSet

        idx = [a for a, _ in self.terms]
        if any(idx[0]):
            raise DomainError("first term must be the constant")
        degree = max(sum(a) for a in idx)
        return BasisSet(tuple(idx), degree, 1.0)

    def __call__(self, x):
        basis = self._basis()
        rec = recurrences_for(self.joint, basis.max_degrees())
        coef = np.array([c for _, c in self.terms])
        return design_matrix(basis, rec, np.atleast_2d(x)) @ coef

    def reference(self):
        coef = np.array([c for _, c in self.terms])
        return float(coef[0]), float(np.sqrt(np.sum(coef[1:] ** 2)))


@dataclass(frozen=True)
class IshigamiModel:
    """``sin x1 + a sin^2 x2 + b x3^4 sin x1`` on uniform(-pi, pi)^3."""

    a: float = 7.0
    b: float = 0.1
    name: str = "ishigami"

    @property
    def joint(self):
        return JointInput((Uniform(-math.pi, math.pi),) * 3)

    def __call__(self, x):
        x = np.atleast_2d(x)
        s1 = np.sin(x[:, 0])
        return s1 + self.a * np.sin(x[:, 1]) ** 2 + self.b * x[:, 2] ** 4 * s1

    def reference(self):
        a, b, pi = self.a, self.b, math.pi
        var = a**2 / 8 + b * pi**4 / 5 + b**2 * pi**8 / 18 + 0.5
        return a / 2, math.sqrt(var)


def make_model(name: str, **kwargs) -> Model:
    """Built-in model by name; ``grid`` builds the default windstorm study."""
    name = name.lower()
    if name == "constant":
        return ConstantModel(**kwargs)
    if name == "identity":
        return IdentityModel()
    if name in ("sparse_polynomial", "polynomial"):
        return SparsePolynomialModel()
    if name == "ishigami":
        return IshigamiModel(**kwargs)
    if name == "grid":
        from pcegrid.grid.study import GridStudy

        return GridStudy.default()
    raise DomainError(f"unknown model {name!r}")


def _model_name(model) -> str:
    return getattr(model, "name", type(model).__name__)


def _evaluate(model, x, workers: int = 1) -> np.ndarray:
    if workers > 1:
        try:
            return np.asarray(model(x, workers=workers), dtype=float)
        except TypeError:
            pass
    return np.asarray(model(x), dtype=float)


@dataclass(frozen=True)
class OracleMoments:
    mean: float
    std: float  # ordinary sample standard deviation (ddof=1)
    robust_std: float
    mean_se: float
    robust_std_se: float
    n: int

    def to_dict(self):
        return asdict(self)


def mcs_oracle(model, n: int, seed: int, workers: int = 1) -> OracleMoments:
    """Plain Monte Carlo reference moments with standard-error estimates.

    The robust-spread error uses the normal-theory asymptotic variance of
    the MAD, so it is only indicative for strongly non-normal outputs.
    """
    if n < 2:
        raise DomainError("the oracle needs at least two model runs")
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    y = _evaluate(model, model.joint.sample(n, rng), workers)
    std = float(np.std(y, ddof=1))
    rstd = robust_std(y)
    return OracleMoments(
        mean=float(np.mean(y)),
        std=std,
        robust_std=rstd,
        mean_se=std / math.sqrt(n),
        robust_std_se=_MAD_SE_FACTOR * rstd / math.sqrt(n),
        n=n,
    )


def relative_error(estimate: float, reference: float) -> float:
    """``|estimate - reference| / |reference|``; infinite for a zero reference
    unless the estimate is zero as well."""
    if reference == 0:
        return 0.0 if estimate == 0 else math.inf
    return abs(estimate - reference) / abs(reference)


@dataclass(frozen=True)
class StabilityStudyConfig:
    model: str = "ishigami"
    methods: tuple[str, ...] = METHODS
    sample_sizes: tuple[int, ...] = DEFAULT_SAMPLE_SIZES
    replicates: int = 25
    seed: int = 0
    p: int = 3
    q: float = 1.0
    n_candidates: int = DEFAULT_N_CANDIDATES
    oracle_samples: int = 10_000
    target_loo: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "methods", tuple(_canonical_method(m) for m in self.methods))
        object.__setattr__(self, "sample_sizes", tuple(int(n) for n in self.sample_sizes))
        if self.replicates < 2:
            raise DomainError("a stability study needs at least 2 replicates")
        if not self.sample_sizes or min(self.sample_sizes) < 2:
            raise DomainError("sample sizes must be >= 2")
        if not self.methods:
            raise DomainError("at least one design method is required")

    def replicate_seed(self, method: str, n: int, replicate: int) -> int:
        ss = np.random.SeedSequence([self.seed, _METHOD_CODE[method], n, replicate])
        return int(ss.generate_state(1, dtype=np.uint32)[0])


def _canonical_method(name: str) -> str:
    for m in METHODS:
        if m.lower() == str(name).lower():
            return m
    raise DomainError(f"unknown design method {name!r}")


@dataclass(frozen=True)
class ReplicateResult:
    method: str
    n_samples: int
    replicate: int
    seed: int
    mean: float
    std: float
    loo_error: float
    active_set_size: int
    error: str | None = None


@dataclass(frozen=True)
class StabilityRow:
    method: str
    n_samples: int
    n_ok: int
    n_failed: int
    mean_of_means: float
    std_of_means: float
    mean_of_stds: float
    std_of_stds: float
    mean_of_vars: float
    std_of_vars: float
    ref_mean: float
    ref_std: float
    err_mean: float
    err_std: float


@dataclass(frozen=True)
class StabilityReport:
    model: str
    config: StabilityStudyConfig
    rows: tuple[StabilityRow, ...]
    replicates: tuple[ReplicateResult, ...]
    reference: dict = field(default_factory=dict)

    def row(self, method: str, n: int) -> StabilityRow:
        method = _canonical_method(method)
        return next(r for r in self.rows if r.method == method and r.n_samples == n)

    def series(self, method: str, attr: str) -> np.ndarray:
        method = _canonical_method(method)
        return np.array([getattr(r, attr) for r in self.rows if r.method == method])

    @property
    def n_failed(self) -> int:
        return sum(r.n_failed for r in self.rows)

    def aggregate_csv(self) -> str:
        return _csv(list(StabilityRow.__dataclass_fields__), [asdict(r) for r in self.rows])

    def replicates_csv(self) -> str:
        return _csv(list(ReplicateResult.__dataclass_fields__), [asdict(r) for r in self.replicates])

    def table_csv(self) -> str:
        """Reference row followed by one row per (method, size): mean, Err(mean), std, Err(std)."""
        head = ["method", "n_samples", "mu", "err_mu_pct", "sigma", "err_sigma_pct"]
        rows = [{
            "method": self.reference.get("source", "reference"), "n_samples": "",
            "mu": self.reference["mean"], "err_mu_pct": "", "sigma": self.reference["std"],
            "err_sigma_pct": "",
        }]
        for r in self.rows:
            rows.append({
                "method": f"PCE-{r.method}", "n_samples": r.n_samples,
                "mu": r.mean_of_means, "err_mu_pct": 100 * r.err_mean,
                "sigma": r.mean_of_stds, "err_sigma_pct": 100 * r.err_std,
            })
        return _csv(head, rows)

    def to_json(self) -> str:
        return json.dumps(
            {
                "model": self.model,
                "config": asdict(self.config),
                "reference": self.reference,
                "rows": [asdict(r) for r in self.rows],
                "n_failed": self.n_failed,
            },
            indent=2,
            sort_keys=True,
        )


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return "" if v is None else v


def _csv(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for r in rows:
        writer.writerow([_fmt(r[h]) for h in header])
    return buf.getvalue()


def _fit_replicate(args) -> ReplicateResult:
    model, cfg, method, n, rep = args
    seed = cfg.replicate_seed(method, n, rep)
    joint = model.joint
    try:
        design = make_design(method, joint, n, seed, cfg.n_candidates)
        y = _evaluate(model, design.samples)
        basis = qnorm_truncation(joint.dim, cfg.p, cfg.q)
        fit = hybrid_lars_fit(design, y, basis, joint=joint, target_loo=cfg.target_loo)
    except (PceGridError, np.linalg.LinAlgError) as exc:
        return ReplicateResult(method, n, rep, seed, math.nan, math.nan, math.nan, 0,
                               f"{type(exc).__name__}: {exc}")
    return ReplicateResult(
        method, n, rep, seed, pce_mean(fit), pce_std(fit),
        fit.diagnostics.loo_error, fit.diagnostics.active_set_size,
    )


def _reference(model, cfg: StabilityStudyConfig, workers: int) -> dict:
    if hasattr(model, "reference"):
        mean, std = model.reference()
        return {"source": "analytic", "mean": float(mean), "std": float(std)}
    oracle = mcs_oracle(model, cfg.oracle_samples, cfg.seed, workers)
    return {
        "source": "MCS",
        "mean": oracle.mean,
        "std": oracle.robust_std,
        "plain_std": oracle.std,
        "mean_se": oracle.mean_se,
        "std_se": oracle.robust_std_se,
        "n": oracle.n,
    }


def _spread(values: np.ndarray) -> float:
    return float(np.std(values, ddof=1)) if values.size > 1 else 0.0


def run_study(
    cfg: StabilityStudyConfig | None = None, model=None, workers: int = 1
) -> StabilityReport:
    """Fit every (method, size, replicate) and aggregate across replicates.

    ``model`` overrides the built-in model named in ``cfg``.  Replicates that
    fail to fit are kept in ``replicates`` with their error message, left out
    of the aggregates and counted in ``n_failed``.  The report depends only
    on ``cfg`` and ``model``, not on ``workers`` or completion order.
    """
    cfg = cfg or StabilityStudyConfig()
    if model is None:
        model = make_model(cfg.model)
    tasks = [
        (model, cfg, method, n, rep)
        for method in cfg.methods
        for n in cfg.sample_sizes
        for rep in range(cfg.replicates)
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_fit_replicate, tasks, chunksize=max(1, len(tasks) // (4 * workers))))
    else:
        results = [_fit_replicate(t) for t in tasks]

    ref = _reference(model, cfg, workers)
    rows = []
    for method in cfg.methods:
        for n in cfg.sample_sizes:
            group = [r for r in results if r.method == method and r.n_samples == n]
            ok = [r for r in group if r.error is None]
            means = np.array([r.mean for r in ok])
            stds = np.array([r.std for r in ok])
            variances = stds**2
            mom = float(means.mean()) if ok else math.nan
            mos = float(stds.mean()) if ok else math.nan
            rows.append(StabilityRow(
                method, n, len(ok), len(group) - len(ok),
                mom, _spread(means), mos, _spread(stds),
                float(variances.mean()) if ok else math.nan, _spread(variances),
                ref["mean"], ref["std"],
                relative_error(mom, ref["mean"]), relative_error(mos, ref["std"]),
            ))
    return StabilityReport(_model_name(model), cfg, tuple(rows), tuple(results), ref)
