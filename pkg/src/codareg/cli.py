"""Command line interface for the modeling pipeline.

Subcommands: ``inspect`` (dataset summary), ``transform`` (write the
model's covariate coordinates), ``fit`` (regression fit and
coefficient table), ``evaluate`` (one model end to end with report
artifacts), ``run-all`` (all three models). Options may come from a
plain ``key = value`` config file; command line flags override it.

Exit codes: 0 success, 1 data or configuration error, 2 a fit stopped
before converging (artifacts are still written), 3 I/O error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .errors import CodaError, DomainError
from .pipeline import (
    MODELS,
    PipelineConfig,
    build_model_frame,
    emit_report,
    load_dataset,
    preprocess,
    run_model,
    write_epca_trace,
    write_pca_variance,
)

_CONFIG_KEYS = (
    "data",
    "model",
    "components",
    "delta",
    "train_years",
    "test_years",
    "out_dir",
    "reclose",
    "standardize_scores",
)

_BOOL_WORDS = {"true": True, "yes": True, "1": True,
               "false": False, "no": False, "0": False}


def _parse_years(text: str) -> tuple:
    try:
        return tuple(int(part) for part in str(text).split(",") if part.strip())
    except ValueError:
        raise DomainError(f"cannot parse year list {text!r}") from None


def _parse_bool(text) -> bool:
    if isinstance(text, bool):
        return text
    word = str(text).strip().lower()
    if word not in _BOOL_WORDS:
        raise DomainError(f"cannot parse boolean {text!r}")
    return _BOOL_WORDS[word]


def parse_config_file(path) -> dict:
    """Read ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DomainError(f"{path}:{lineno}: expected key = value")
        key, _, value = line.partition("=")
        key = key.strip().replace("-", "_")
        if key not in _CONFIG_KEYS:
            raise DomainError(f"{path}:{lineno}: unknown key {key!r}")
        values[key] = value.strip()
    return values


def build_config(args) -> PipelineConfig:
    """Merge defaults, the config file, and command line flags."""
    file_values = parse_config_file(args.config) if args.config else {}
    converters = {
        "data": str,
        "model": str,
        "components": int,
        "delta": float,
        "train_years": _parse_years,
        "test_years": _parse_years,
        "out_dir": str,
        "reclose": _parse_bool,
        "standardize_scores": _parse_bool,
    }
    kwargs = {}
    for key, convert in converters.items():
        flag_value = getattr(args, key, None)
        if flag_value is not None:
            kwargs[key] = flag_value
        elif key in file_values:
            kwargs[key] = convert(file_values[key])
    if "data" not in kwargs:
        raise DomainError("no input data file configured; pass --data or set it in the config file")
    return PipelineConfig(**kwargs)


def _require_model(config: PipelineConfig) -> str:
    if config.model is None:
        raise DomainError("no model configured; pass --model or set it in the config file")
    return config.model


def _fit_ok(report) -> bool:
    if not report.fit.converged:
        return False
    if report.factorization is not None and not report.factorization.converged:
        return False
    return True


def _print_fit(report) -> None:
    table = report.wald_table
    print(f"model {report.model}: n_train={report.n_train} dispersion={report.fit.dispersion:.6g} "
          f"loglik={report.fit.loglik:.10g} converged={report.fit.converged}")
    width = max(len(name) for name in table.names)
    print(f"{'name':<{width}}  {'estimate':>12}  {'std_error':>12}  {'z_value':>10}  {'p_value':>10}")
    for name, est, se, z, p in zip(table.names, table.estimate, table.std_error,
                                   table.z_value, table.p_value):
        print(f"{name:<{width}}  {est:>12.6g}  {se:>12.6g}  {z:>10.4g}  {p:>10.4g}")


def _cmd_inspect(args) -> int:
    config = build_config(args)
    dataset = load_dataset(config.data)
    summary = dataset.summary()
    print(f"rows: {summary['n_rows']}")
    print("year counts: " + ", ".join(f"{y}: {c}" for y, c in summary["year_counts"].items()))
    print("mine types: " + ", ".join(f"{t}: {c}" for t, c in summary["type_counts"].items()))
    print(f"response mean: {summary['response_mean']:.6g}")
    print(f"response variance: {summary['response_var']:.6g}")
    print(f"max exposure: {summary['exposure_max']:.6g}")
    print(f"flagged rows (proportions off 1): {summary['n_flagged_rows']}")
    return 0


def _cmd_transform(args) -> int:
    config = build_config(args)
    model = _require_model(config)
    dataset = load_dataset(config.data)
    inputs = preprocess(dataset, config.delta, reclose=config.reclose)
    frame, result = build_model_frame(
        model, inputs,
        components=config.components,
        standardize_scores=config.standardize_scores,
    )
    names = [n for n in frame.design.names
             if frame.provenance[n] not in ("intercept", "dummy:TYPE_OF_MINE")]
    cols = [frame.design.names.index(n) for n in names]
    values = frame.design.values[:, cols]
    if config.out_dir is None:
        print(f"model {model}: {values.shape[0]} rows x {len(names)} coordinates "
              f"({', '.join(names)}); pass --out-dir to write them")
    else:
        out = Path(config.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        lines = ["YEAR," + ",".join(names)]
        for year, row in zip(frame.year, values):
            lines.append(str(int(year)) + "," + ",".join(repr(float(v)) for v in row))
        path = out / "coordinates.csv"
        path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
        written = [path]
        if model == "NBPCA":
            written.append(write_pca_variance(result, out / "pca_variance.csv"))
        elif model == "NBEPCA":
            written.append(write_epca_trace(result, out / "epca_loss_trace.csv"))
        for p in written:
            print(f"wrote {p}")
    if result is not None and not result.converged:
        return 2
    return 0


def _cmd_fit(args) -> int:
    config = build_config(args)
    model = _require_model(config)
    report = run_model(model, config)
    _print_fit(report)
    if config.out_dir is not None:
        for path in emit_report(report, config.out_dir):
            print(f"wrote {path}")
    return 0 if _fit_ok(report) else 2


def _cmd_evaluate(args) -> int:
    config = build_config(args)
    model = _require_model(config)
    report = run_model(model, config)
    print(f"model {model}: in-sample chi-square {report.insample.statistic:.10g}, "
          f"out-of-sample {report.outsample.statistic:.10g}")
    if config.out_dir is not None:
        for path in emit_report(report, config.out_dir):
            print(f"wrote {path}")
    return 0 if _fit_ok(report) else 2


def _cmd_run_all(args) -> int:
    config = build_config(args)
    dataset = load_dataset(config.data)
    code = 0
    for model in MODELS:
        report = run_model(model, config, dataset=dataset)
        print(f"model {model}: in-sample chi-square {report.insample.statistic:.10g}, "
              f"out-of-sample {report.outsample.statistic:.10g}")
        if config.out_dir is not None:
            for path in emit_report(report, Path(config.out_dir) / model.lower()):
                print(f"wrote {path}")
        if not _fit_ok(report):
            code = 2
    return code


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="key = value configuration file")
    parser.add_argument("--data", help="input CSV path")
    parser.add_argument("--model", choices=MODELS, help="model family")
    parser.add_argument("--components", type=int, help="factorization components (default 5)")
    parser.add_argument("--delta", type=float, help="zero replacement value (default 1e-6)")
    parser.add_argument("--train-years", dest="train_years", type=_parse_years,
                        help="comma-separated training years (default 2013,2014,2015)")
    parser.add_argument("--test-years", dest="test_years", type=_parse_years,
                        help="comma-separated test years (default 2016)")
    parser.add_argument("--out-dir", dest="out_dir", help="directory for emitted artifacts")
    parser.add_argument("--reclose", action="store_const", const=True, default=None,
                        help="renormalize compositions after zero replacement")
    parser.add_argument("--standardize-scores", dest="standardize_scores",
                        action="store_const", const=True, default=None,
                        help="z-score factorization score columns")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="codareg",
        description="Compositional covariates for negative binomial count regression.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    commands = {
        "inspect": (_cmd_inspect, "summarize the input dataset"),
        "transform": (_cmd_transform, "write the model's covariate coordinates"),
        "fit": (_cmd_fit, "fit one model and show its coefficients"),
        "evaluate": (_cmd_evaluate, "run one model end to end with chi-square validation"),
        "run-all": (_cmd_run_all, "run all three models"),
    }
    for name, (func, help_text) in commands.items():
        p = sub.add_parser(name, help=help_text)
        _add_common(p)
        p.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, stream=sys.stderr,
                        format="%(levelname)s %(message)s")
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 0 for --help and 2 for usage errors; keep 2
        # reserved for convergence failures.
        return 0 if exc.code == 0 else 1
    try:
        return args.func(args)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except CodaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
