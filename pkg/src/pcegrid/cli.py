"""Command-line front end: ``pcegrid {design,fit,moments,simulate,stability}``.

Every command reads an optional JSON config (``--config``) whose values are
overridden by flags, and writes its artifacts into ``--out`` (default ``.``).
Outputs depend only on the config and seed, so reruns are byte-identical.

Exit codes: 0 success, 1 usage, 2 input data, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from pcegrid import errors
from pcegrid.basis import qnorm_truncation
from pcegrid.design import METHODS, ExperimentDesign, make_design, read_design_csv
from pcegrid.harness import StabilityStudyConfig, make_model, run_study
from pcegrid.postproc import empirical_moments, pce_moments, robust_std, surrogate_sample
from pcegrid.regression import PceModel, hybrid_lars_fit

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_NUMERICAL = 0, 1, 2, 3

_NUMERICAL = (
    errors.IllConditionedError,
    errors.SingularMatrixError,
    errors.LeverageSaturationError,
    errors.FitError,
    errors.NumericalError,
    errors.ConvergenceError,
    np.linalg.LinAlgError,
    FloatingPointError,
)


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class StudyConfig:
    """Everything a command may need; unset paths select the bundled data."""

    case: str | None = None
    fragility: str | None = None
    weather: str | None = None
    model: str = "grid"
    method: str = "MmLHS"
    n_samples: int | None = None  # None: ten samples per input dimension
    n_candidates: int = 100
    seed: int = 0
    p: int = 3
    q: float = 1.0
    out_dir: str = "."
    workers: int = 1
    # stability study
    methods: tuple[str, ...] = ("LHS", "MmLHS")
    sample_sizes: tuple[int, ...] = tuple(range(20, 101, 10))
    replicates: int = 25
    oracle_samples: int = 10_000
    # moments
    surrogate_samples: int = 10_000

    def validate(self) -> "StudyConfig":
        for key in ("case", "fragility", "weather"):
            path = getattr(self, key)
            if path is not None and not Path(path).is_file():
                raise errors.DomainError(f"{key} file {path} does not exist")
        checks = [
            (self.n_samples is None or self.n_samples >= 1, "n_samples must be >= 1"),
            (self.n_candidates >= 1, "n_candidates must be >= 1"),
            (self.seed >= 0, "seed must be >= 0"),
            (self.p >= 0, "p must be >= 0"),
            (0 < self.q <= 1, "q must lie in (0, 1]"),
            (self.workers >= 1, "workers must be >= 1"),
            (self.replicates >= 2, "replicates must be >= 2"),
            (self.oracle_samples >= 2, "oracle_samples must be >= 2"),
            (self.surrogate_samples >= 2, "surrogate_samples must be >= 2"),
            (len(self.sample_sizes) > 0 and min(self.sample_sizes) >= 2, "sample sizes must be >= 2"),
        ]
        for ok, message in checks:
            if not ok:
                raise errors.DomainError(message)
        return replace(self, method=_method(self.method), methods=tuple(_method(m) for m in self.methods))


def _method(name: str) -> str:
    for m in METHODS:
        if m.lower() == str(name).lower():
            return m
    raise errors.DomainError(f"unknown design method {name!r}; expected one of {', '.join(METHODS)}")


def load_config(path: str | None) -> StudyConfig:
    """Read a JSON config; relative paths inside it resolve against its folder."""
    if path is None:
        return StudyConfig()
    cfg_path = Path(path)
    try:
        data = json.loads(cfg_path.read_text())
    except json.JSONDecodeError as exc:
        raise errors.DomainError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise errors.DomainError("config must be a JSON object")
    known = {f.name for f in fields(StudyConfig)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise errors.DomainError(f"unknown config keys: {', '.join(unknown)}")
    for key in ("case", "fragility", "weather", "out_dir"):
        if data.get(key) is not None:
            data[key] = str(cfg_path.parent / data[key])
    for key in ("methods", "sample_sizes"):
        if key in data:
            data[key] = tuple(data[key])
    return StudyConfig(**data)


def _model(cfg: StudyConfig):
    if cfg.model.lower() != "grid":
        return make_model(cfg.model)
    from pcegrid.grid.case import load_case
    from pcegrid.grid.study import GridStudy
    from pcegrid.grid.weather import load_fragility, load_weather

    return GridStudy(load_case(cfg.case), load_fragility(cfg.fragility), load_weather(cfg.weather))


def _write(out: Path, name: str, text: str) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    target = out / name
    target.write_text(text)
    return target


def _read_table(path: str) -> tuple[list[str], list[list[str]]]:
    rows = [r for r in csv.reader(io.StringIO(Path(path).read_text())) if r]
    if not rows:
        raise errors.DomainError(f"{path} is empty")
    return rows[0], rows[1:]


def _read_column(path: str, column: str | None) -> np.ndarray:
    """One numeric column of a CSV: ``column``, else ``phi_ls``, else the last one."""
    header, rows = _read_table(path)
    if column is None:
        column = "phi_ls" if "phi_ls" in header else header[-1]
    if column not in header:
        raise errors.DomainError(f"{path} has no column {column!r}")
    j = header.index(column)
    try:
        return np.array([float(r[j]) for r in rows])
    except (ValueError, IndexError) as exc:
        raise errors.DomainError(f"bad value in column {column!r} of {path}: {exc}") from exc


# -- commands ---------------------------------------------------------------


def cmd_design(cfg: StudyConfig, args) -> list[Path]:
    model = _model(cfg)
    joint = model.joint
    n = cfg.n_samples if cfg.n_samples is not None else 10 * joint.dim
    design = make_design(cfg.method, joint, n, cfg.seed, cfg.n_candidates)
    out = Path(cfg.out_dir)
    return [_write(out, "design.csv", design.to_csv()), _write(out, "design.json", design.to_json())]


def cmd_fit(cfg: StudyConfig, args) -> list[Path]:
    header, x = read_design_csv(Path(args.design).read_text())
    y = _read_column(args.outputs, args.column)
    if y.size != x.shape[0]:
        raise errors.ShapeError(f"design has {x.shape[0]} rows but outputs have {y.size}")
    joint = _model(cfg).joint
    if x.shape[1] != joint.dim:
        raise errors.ShapeError(f"design has {x.shape[1]} columns, the model has {joint.dim} inputs")
    meta_path = Path(args.design).with_suffix(".json")
    seed, method = cfg.seed, cfg.method
    if meta_path.is_file():
        meta = json.loads(meta_path.read_text())
        seed, method = meta.get("seed", seed), meta.get("method", method)
    design = ExperimentDesign(x, _quantiles(joint, x), method, seed, names=header)
    fit = hybrid_lars_fit(design, y, qnorm_truncation(joint.dim, cfg.p, cfg.q), joint=joint)
    return [_write(Path(cfg.out_dir), "model.json", fit.to_json())]


def _quantiles(joint, x: np.ndarray) -> np.ndarray:
    return np.column_stack([m.cdf(x[:, i]) for i, m in enumerate(joint.marginals)])


def cmd_moments(cfg: StudyConfig, args) -> list[Path]:
    if args.model_file is None and args.data is None:
        raise UsageError("moments needs --model-file, --data or both")
    report: dict = {}
    if args.model_file is not None:
        model = PceModel.from_dict(json.loads(Path(args.model_file).read_text()))
        sample = surrogate_sample(model, cfg.surrogate_samples, cfg.seed)
        report["pce"] = pce_moments(model).to_dict()
        report["surrogate"] = {
            "n": cfg.surrogate_samples,
            "seed": cfg.seed,
            "mean": float(np.mean(sample)),
            "robust_std": robust_std(sample),
        }
    if args.data is not None:
        data = _read_column(args.data, args.column)
        report["data"] = {
            "n": int(data.size),
            "robust": empirical_moments(data, robust=True).to_dict(),
            "plain": empirical_moments(data, robust=False).to_dict(),
        }
    return [_write(Path(cfg.out_dir), "moments.json", json.dumps(report, indent=2, sort_keys=True))]


def cmd_simulate(cfg: StudyConfig, args) -> list[Path]:
    from pcegrid.grid.cascade import outcomes_to_csv

    study = _model(replace(cfg, model="grid"))
    _, tau = read_design_csv(Path(args.tau).read_text())
    if tau.shape[1] != study.dim:
        raise errors.ShapeError(
            f"tau file has {tau.shape[1]} columns but the event exposes {study.dim} branches"
        )
    outcomes = [study.outcome(row) for row in tau]
    summary, traces = outcomes_to_csv(outcomes)
    out = Path(cfg.out_dir)
    return [_write(out, "outcomes.csv", summary), _write(out, "traces.csv", traces)]


def cmd_stability(cfg: StudyConfig, args) -> list[Path]:
    study_cfg = StabilityStudyConfig(
        model=cfg.model,
        methods=cfg.methods,
        sample_sizes=cfg.sample_sizes,
        replicates=cfg.replicates,
        seed=cfg.seed,
        p=cfg.p,
        q=cfg.q,
        n_candidates=cfg.n_candidates,
        oracle_samples=cfg.oracle_samples,
    )
    report = run_study(study_cfg, _model(cfg), workers=cfg.workers)
    out = Path(cfg.out_dir)
    written = [
        _write(out, "stability_aggregate.csv", report.aggregate_csv()),
        _write(out, "stability_replicates.csv", report.replicates_csv()),
        _write(out, "stability_table.csv", report.table_csv()),
        _write(out, "stability.json", report.to_json()),
    ]
    if report.n_failed:
        print(f"warning: {report.n_failed} replicate fits failed", file=sys.stderr)
    return written


# -- argument parsing -------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _positive(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not an integer") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"{value} must be >= 1")
    return value


def _non_negative(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not an integer") from None
    if value < 0:
        raise argparse.ArgumentTypeError(f"{value} must be >= 0")
    return value


def _int_list(text: str) -> tuple[int, ...]:
    try:
        values = tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not a comma-separated list of integers") from None
    if not values or min(values) < 2:
        raise argparse.ArgumentTypeError("sample sizes must be integers >= 2")
    return values


def _method_choice(text: str) -> str:
    try:
        return _method(text)
    except errors.DomainError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _method_list(text: str) -> tuple[str, ...]:
    return tuple(_method_choice(v.strip()) for v in text.split(",") if v.strip())


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file; flags override its values")
    common.add_argument("--out", dest="out_dir", help="output directory (default: .)")
    common.add_argument("--seed", type=_non_negative, help="master random seed")
    common.add_argument("--workers", type=_positive, help="worker processes")
    common.add_argument("--case", help="MATPOWER case file (default: bundled 39-bus case)")
    common.add_argument("--fragility", help="fragility curve JSON")
    common.add_argument("--weather", help="weather event JSON")
    common.add_argument("--model", help="grid (default), ishigami, sparse_polynomial, constant or identity")

    pce = argparse.ArgumentParser(add_help=False)
    pce.add_argument("--p", type=_non_negative, help="maximum total degree (default 3)")
    pce.add_argument("--q", type=float, help="q-norm in (0, 1] (default 1)")

    parser = _Parser(prog="pcegrid", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("design", parents=[common], help="write an experiment design")
    p.add_argument("--method", type=_method_choice, help="mcs, lhs or mmlhs (default mmlhs)")
    p.add_argument("--n", dest="n_samples", type=_positive, help="number of samples (default 10 per input)")
    p.add_argument("--n-candidates", dest="n_candidates", type=_positive, help="MmLHS candidate pool size")
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("fit", parents=[common, pce], help="fit a sparse PCE to design outputs")
    p.add_argument("--design", required=True, help="design CSV")
    p.add_argument("--outputs", required=True, help="CSV with one output per design row")
    p.add_argument("--column", help="output column (default: phi_ls if present, else the last)")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("moments", parents=[common], help="moments of a fitted PCE and/or raw outputs")
    p.add_argument("--model-file", help="model JSON written by fit")
    p.add_argument("--data", help="CSV of model outputs, e.g. Monte Carlo runs")
    p.add_argument("--column", help="column of --data (default: phi_ls if present, else the last)")
    p.add_argument("--samples", dest="surrogate_samples", type=_positive,
                   help="surrogate evaluations for the robust spread (default 10000)")
    p.set_defaults(func=cmd_moments)

    p = sub.add_parser("simulate", parents=[common], help="run the windstorm model on failure times")
    p.add_argument("--tau", required=True, help="CSV of failure times, one column per exposed branch")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("stability", parents=[common, pce], help="replicated design-stability study")
    p.add_argument("--methods", type=_method_list, help="comma-separated design methods")
    p.add_argument("--sizes", dest="sample_sizes", type=_int_list, help="comma-separated sample sizes")
    p.add_argument("--replicates", type=_positive)
    p.add_argument("--n-candidates", dest="n_candidates", type=_positive)
    p.add_argument("--oracle-samples", dest="oracle_samples", type=_positive)
    p.set_defaults(func=cmd_stability)
    return parser


def _merge(cfg: StudyConfig, args) -> StudyConfig:
    names = {f.name for f in fields(StudyConfig)}
    overrides = {k: v for k, v in vars(args).items() if k in names and v is not None}
    return replace(cfg, **overrides)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = _merge(load_config(args.config), args)
        if cfg.model.lower() not in ("grid", "ishigami", "sparse_polynomial", "polynomial", "constant", "identity"):
            raise UsageError(f"unknown model {cfg.model!r}")
        cfg = cfg.validate()
        for path in args.func(cfg, args):
            print(path)
    except UsageError as exc:
        print(f"pcegrid: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except _NUMERICAL as exc:
        print(f"pcegrid: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (errors.PceGridError, OSError, ValueError, KeyError, TypeError) as exc:
        print(f"pcegrid: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
