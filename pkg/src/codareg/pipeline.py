"""End-to-end modeling pipeline for the mine injury dataset.

Stages: CSV ingestion with typed validation, preprocessing (zero
replacement, composition assembly, dummy coding), covariate
construction per model, a year-based train/test split, negative
binomial fitting, chi-square validation on both splits, and
deterministic report emission.

Three model families share the same response, exposure, and mine-type
dummies and differ in how the ten activity proportions enter:

- ``NB``     isometric-logratio coordinates (9 columns),
- ``NBPCA``  leading PCA scores of the centered clr matrix,
- ``NBEPCA`` leading exponential-family PCA scores.

Factorizations are fitted on the whole dataset before splitting; the
split applies only to the regression and its validation.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import NamedTuple, Optional

import numpy as np
import pandas as pd

from .composition import CompositionMatrix
from .errors import (
    DimensionMismatchError,
    DomainError,
    EmptySplitError,
    MissingColumnError,
    TypeParseError,
    UnknownCategoryError,
    WrongMethodError,
)
from .factorization import (
    EpcaOptions,
    FactorizationResult,
    epca_fit,
    pca_fit,
    variance_explained,
)
from .logratio import ContrastMatrix, contrast_matrix, transform_matrix
from .nbglm import DesignMatrix, NegBinFit, WaldTable, backtransform_ilr_coeffs, nb_fit, wald
from .validation import ChiSquareReport, chi_square_report

__all__ = [
    "PCT_COLUMNS",
    "MINE_TYPES",
    "DUMMY_NAMES",
    "REQUIRED_COLUMNS",
    "MODELS",
    "Dataset",
    "ModelInputs",
    "ModelFrame",
    "PipelineConfig",
    "RunReport",
    "load_dataset",
    "preprocess",
    "split_by_year",
    "build_model_frame",
    "run_model",
    "emit_report",
    "write_pca_variance",
    "write_epca_trace",
]

logger = logging.getLogger(__name__)

# The ten activity-proportion columns, in schema order.
PCT_COLUMNS = (
    "PCT_HRS_UNDERGROUND",
    "PCT_HRS_SURFACE",
    "PCT_HRS_STRIP",
    "PCT_HRS_AUGER",
    "PCT_HRS_CULM_BANK",
    "PCT_HRS_DREDGE",
    "PCT_HRS_OTHER_SURFACE",
    "PCT_HRS_SHOP_YARD",
    "PCT_HRS_MILL_PREP",
    "PCT_HRS_OFFICE",
)

# Known mine types; the first is the dummy-coding baseline.
MINE_TYPES = ("Mill", "Sand & gravel", "Surface", "Underground")
DUMMY_NAMES = MINE_TYPES[1:]

REQUIRED_COLUMNS = ("YEAR", "TYPE_OF_MINE", "AVG_EMP_TOTAL", "NUM_INJURIES") + PCT_COLUMNS

MODELS = ("NB", "NBPCA", "NBEPCA")

# |sum(PCT) - 1| beyond this flags the row at load time.
_CLOSURE_FLAG_TOL = 1e-6


@dataclass
class Dataset:
    """A validated table of mine-year records.

    ``frame`` holds the typed columns (any unrecognized input columns
    are carried through untouched); ``flagged_rows`` lists positional
    indices whose activity proportions do not sum to 1 within 1e-6.
    """

    frame: pd.DataFrame
    flagged_rows: np.ndarray

    @property
    def n(self) -> int:
        return len(self.frame)

    def summary(self) -> dict:
        """Row counts and the headline statistics of the key columns."""
        year = self.frame["YEAR"].to_numpy()
        y = self.frame["NUM_INJURIES"].to_numpy()
        years, counts = np.unique(year, return_counts=True)
        types = self.frame["TYPE_OF_MINE"].value_counts().to_dict()
        return {
            "n_rows": int(len(self.frame)),
            "year_counts": {int(k): int(v) for k, v in zip(years, counts)},
            "type_counts": {str(k): int(v) for k, v in sorted(types.items())},
            "response_mean": float(y.mean()),
            "response_var": float(y.var(ddof=1)) if y.size > 1 else 0.0,
            "exposure_max": float(self.frame["AVG_EMP_TOTAL"].max()),
            "pct_strip_mean": float(self.frame["PCT_HRS_STRIP"].mean()),
            "n_flagged_rows": int(self.flagged_rows.size),
        }


class ModelInputs(NamedTuple):
    """Preprocessed model ingredients, aligned by row."""

    compositions: CompositionMatrix
    dummies: np.ndarray
    y: np.ndarray
    exposure: np.ndarray
    year: np.ndarray


@dataclass
class ModelFrame:
    """A ready-to-fit design with its aligned response and exposure.

    ``provenance`` records which transform produced each design column.
    """

    design: DesignMatrix
    y: np.ndarray
    exposure: np.ndarray
    year: np.ndarray
    provenance: dict

    def __post_init__(self):
        n = self.design.n
        for name in ("y", "exposure", "year"):
            arr = np.asarray(getattr(self, name))
            if arr.shape != (n,):
                raise DimensionMismatchError(f"{name} must have length {n}")
        if set(self.provenance) != set(self.design.names):
            raise DimensionMismatchError("provenance must cover exactly the design columns")

    @property
    def n(self) -> int:
        return self.design.n


@dataclass
class PipelineConfig:
    """Everything a pipeline run depends on, echoed into its report."""

    data: str
    model: Optional[str] = None
    components: int = 5
    delta: float = 1e-6
    train_years: tuple = (2013, 2014, 2015)
    test_years: tuple = (2016,)
    out_dir: Optional[str] = None
    reclose: bool = False
    standardize_scores: bool = False

    def __post_init__(self):
        if self.model is not None and self.model not in MODELS:
            raise DomainError(f"model must be one of {MODELS}, got {self.model!r}")
        if int(self.components) < 1:
            raise DomainError(f"components must be >= 1, got {self.components}")
        self.components = int(self.components)
        self.delta = float(self.delta)
        if not (np.isfinite(self.delta) and self.delta > 0.0):
            raise DomainError(f"delta must be positive, got {self.delta}")
        self.train_years = tuple(int(v) for v in self.train_years)
        self.test_years = tuple(int(v) for v in self.test_years)
        if not self.train_years or not self.test_years:
            raise DomainError("train_years and test_years must be nonempty")
        if set(self.train_years) & set(self.test_years):
            raise DomainError("train_years and test_years overlap")
        self.reclose = bool(self.reclose)
        self.standardize_scores = bool(self.standardize_scores)

    def echo(self) -> dict:
        """Plain-types view for the report."""
        return {
            "data": str(self.data),
            "model": self.model,
            "components": self.components,
            "delta": self.delta,
            "train_years": list(self.train_years),
            "test_years": list(self.test_years),
            "reclose": self.reclose,
            "standardize_scores": self.standardize_scores,
        }


@dataclass
class RunReport:
    """Everything one model run produced.

    ``timing_seconds`` is informational and deliberately excluded from
    the serialized report so identical runs emit identical bytes.
    """

    model: str
    config: dict
    fit: NegBinFit
    wald_table: WaldTable
    insample: ChiSquareReport
    outsample: ChiSquareReport
    n_train: int
    n_test: int
    provenance: dict
    coef_composition: Optional[dict] = None
    variance: Optional[np.ndarray] = None
    factorization: Optional[FactorizationResult] = None
    timing_seconds: float = 0.0

    def __post_init__(self):
        if self.model not in MODELS:
            raise WrongMethodError(f"model must be one of {MODELS}, got {self.model!r}")
        if not isinstance(self.insample, ChiSquareReport) or not isinstance(
                self.outsample, ChiSquareReport):
            raise DimensionMismatchError("both sample reports are required")

    def to_json_dict(self) -> dict:
        """Serializable view with full-precision floats and no timing."""
        out = {
            "model": self.model,
            "config": self.config,
            "n_train": int(self.n_train),
            "n_test": int(self.n_test),
            "dispersion": float(self.fit.dispersion),
            "loglik": float(self.fit.loglik),
            "converged": bool(self.fit.converged),
            "n_iterations": int(self.fit.n_iterations),
            "provenance": dict(sorted(self.provenance.items())),
            "coefficients": [
                {
                    "name": name,
                    "estimate": float(est),
                    "std_error": float(se),
                    "z_value": float(z),
                    "p_value": float(p),
                }
                for name, est, se, z, p in zip(
                    self.wald_table.names,
                    self.wald_table.estimate,
                    self.wald_table.std_error,
                    self.wald_table.z_value,
                    self.wald_table.p_value,
                )
            ],
            "insample": self.insample.to_dict(),
            "outsample": self.outsample.to_dict(),
        }
        if self.coef_composition is not None:
            out["coef_composition"] = {k: float(v) for k, v in self.coef_composition.items()}
        if self.variance is not None:
            out["variance_explained"] = [float(v) for v in self.variance]
        if self.factorization is not None and self.factorization.method == "epca":
            out["epca"] = {
                "loss": float(self.factorization.loss),
                "n_iterations": int(self.factorization.loss_trace.size - 1),
                "converged": bool(self.factorization.converged),
                "n_clamped": int(self.factorization.n_clamped),
            }
        return out


def _coerce_numeric(frame: pd.DataFrame, col: str, *, integer: bool = False,
                    minimum: float | None = None, maximum: float | None = None) -> np.ndarray:
    raw = frame[col]
    vals = pd.to_numeric(raw, errors="coerce")
    bad = vals.isna().to_numpy()
    if bad.any():
        i = int(np.argmax(bad))
        shown = raw.iloc[i]
        reason = "missing value" if pd.isna(shown) else f"cannot parse {shown!r}"
        raise TypeParseError(f"column {col}, row {i}: {reason}")
    arr = vals.to_numpy(dtype=float)
    if integer and np.any(arr != np.round(arr)):
        i = int(np.argmax(arr != np.round(arr)))
        raise TypeParseError(f"column {col}, row {i}: {arr[i]!r} is not an integer")
    if minimum is not None and np.any(arr < minimum):
        i = int(np.argmax(arr < minimum))
        raise TypeParseError(f"column {col}, row {i}: {arr[i]!r} is below {minimum}")
    if maximum is not None and np.any(arr > maximum):
        i = int(np.argmax(arr > maximum))
        raise TypeParseError(f"column {col}, row {i}: {arr[i]!r} is above {maximum}")
    return arr.astype(np.int64) if integer else arr


def load_dataset(path) -> Dataset:
    """Read and validate the mine CSV.

    The header must contain the fourteen columns the pipeline uses
    (``YEAR``, ``TYPE_OF_MINE``, ``AVG_EMP_TOTAL``, ``NUM_INJURIES``
    and the ten ``PCT_HRS_*`` columns, case-sensitive); any further
    columns are carried through unused. Rows whose activity
    proportions do not sum to 1 within 1e-6 are kept but flagged and
    logged.

    Raises
    ------
    MissingColumnError
        Listing every absent required column.
    TypeParseError
        With the row and column of the first offending cell.
    """
    frame = pd.read_csv(path)
    missing = [c for c in REQUIRED_COLUMNS if c not in frame.columns]
    if missing:
        raise MissingColumnError(f"missing required columns: {missing}")
    frame = frame.reset_index(drop=True)
    out = frame.copy()
    out["YEAR"] = _coerce_numeric(frame, "YEAR", integer=True)
    out["NUM_INJURIES"] = _coerce_numeric(frame, "NUM_INJURIES", integer=True, minimum=0)
    out["AVG_EMP_TOTAL"] = _coerce_numeric(frame, "AVG_EMP_TOTAL", minimum=1.0)
    for col in PCT_COLUMNS:
        out[col] = _coerce_numeric(frame, col, minimum=0.0, maximum=1.0)
    types = frame["TYPE_OF_MINE"]
    if types.isna().any():
        i = int(np.argmax(types.isna().to_numpy()))
        raise TypeParseError(f"column TYPE_OF_MINE, row {i}: missing value")
    out["TYPE_OF_MINE"] = types.astype(str)
    sums = out[list(PCT_COLUMNS)].to_numpy().sum(axis=1)
    flagged = np.flatnonzero(np.abs(sums - 1.0) > _CLOSURE_FLAG_TOL)
    logger.info("loaded %d rows from %s", len(out), path)
    if flagged.size:
        logger.warning(
            "%d rows have activity proportions not summing to 1 within %.0e",
            flagged.size, _CLOSURE_FLAG_TOL,
        )
    return Dataset(frame=out, flagged_rows=flagged)


def preprocess(dataset: Dataset, delta: float = 1e-6, *, reclose: bool = False) -> ModelInputs:
    """Turn a dataset into aligned model ingredients.

    Zero proportions are replaced by ``delta`` (without renormalizing,
    so a row's sum grows by ``delta`` per replaced zero; pass
    ``reclose=True`` to renormalize instead). ``TYPE_OF_MINE`` becomes
    three dummies with ``Mill`` as baseline. The response, exposure,
    and year columns pass through unchanged.

    Raises
    ------
    UnknownCategoryError
        If a mine type is outside the known set.
    """
    delta = float(delta)
    if not (np.isfinite(delta) and delta > 0.0):
        raise DomainError(f"delta must be positive, got {delta}")
    frame = dataset.frame
    types = frame["TYPE_OF_MINE"].to_numpy()
    known = np.isin(types, MINE_TYPES)
    if not known.all():
        i = int(np.argmax(~known))
        raise UnknownCategoryError(
            f"column TYPE_OF_MINE, row {i}: unknown category {types[i]!r}"
        )
    pct = frame[list(PCT_COLUMNS)].to_numpy(dtype=float).copy()
    pct[pct == 0.0] = delta
    if reclose:
        pct = pct / pct.sum(axis=1, keepdims=True)
        rtol = 1e-9
    else:
        # Replacement adds up to d*delta per row on top of the 1e-6
        # closure slack allowed at load time.
        rtol = max(1e-4, 2.0 * pct.shape[1] * delta + _CLOSURE_FLAG_TOL)
    compositions = CompositionMatrix(pct, kappa=1.0, rtol=rtol)
    dummies = np.column_stack([(types == t).astype(float) for t in DUMMY_NAMES])
    return ModelInputs(
        compositions=compositions,
        dummies=dummies,
        y=frame["NUM_INJURIES"].to_numpy(dtype=np.int64),
        exposure=frame["AVG_EMP_TOTAL"].to_numpy(dtype=float),
        year=frame["YEAR"].to_numpy(dtype=np.int64),
    )


def split_by_year(frame: ModelFrame, train_years=(2013, 2014, 2015),
                  test_years=(2016,)) -> tuple[ModelFrame, ModelFrame]:
    """Partition a model frame into train and test by calendar year.

    The year sets must be disjoint; rows in neither set are dropped.
    Row order within each side follows the input.
    """
    train_years = {int(v) for v in train_years}
    test_years = {int(v) for v in test_years}
    if train_years & test_years:
        raise DomainError("train and test years overlap")
    train_mask = np.isin(frame.year, sorted(train_years))
    test_mask = np.isin(frame.year, sorted(test_years))
    if not train_mask.any():
        raise EmptySplitError(f"no rows in training years {sorted(train_years)}")
    if not test_mask.any():
        raise EmptySplitError(f"no rows in test years {sorted(test_years)}")

    def take(mask: np.ndarray) -> ModelFrame:
        return ModelFrame(
            design=DesignMatrix(frame.design.values[mask], frame.design.names),
            y=frame.y[mask],
            exposure=frame.exposure[mask],
            year=frame.year[mask],
            provenance=dict(frame.provenance),
        )

    return take(train_mask), take(test_mask)


def _standardized(scores: np.ndarray) -> np.ndarray:
    sd = scores.std(axis=0)
    if np.any(sd == 0.0):
        raise DomainError("cannot standardize a constant score column")
    return (scores - scores.mean(axis=0)) / sd


def build_model_frame(model: str, inputs: ModelInputs, *, components: int = 5,
                      basis: ContrastMatrix | None = None,
                      standardize_scores: bool = False,
                      epca_options: EpcaOptions | None = None,
                      ) -> tuple[ModelFrame, Optional[FactorizationResult]]:
    """Construct the design for one model family from shared inputs.

    Factorizations (NBPCA, NBEPCA) are fitted on all rows of
    ``inputs``; call this before any train/test split.
    """
    if model not in MODELS:
        raise WrongMethodError(f"model must be one of {MODELS}, got {model!r}")
    comps = inputs.compositions
    n = comps.n
    provenance = {"(Intercept)": "intercept"}
    for name in DUMMY_NAMES:
        provenance[name] = "dummy:TYPE_OF_MINE"
    result = None
    if model == "NB":
        if basis is None:
            basis = contrast_matrix(comps.d)
        coords = transform_matrix(comps, "ilr", basis)
        coord_names = [f"V{k + 1}" for k in range(comps.d - 1)]
        provenance.update({name: "ilr" for name in coord_names})
    else:
        Z = transform_matrix(comps, "clr").T
        if model == "NBPCA":
            result = pca_fit(Z, components)
            tag = "pca:clr"
        else:
            result = epca_fit(Z, components, epca_options)
            tag = "epca:clr"
        coords = result.scores.T
        if standardize_scores:
            coords = _standardized(coords)
        coord_names = [f"PC{k + 1}" for k in range(components)]
        provenance.update({name: tag for name in coord_names})
    design = DesignMatrix(
        np.column_stack([np.ones(n), inputs.dummies, coords]),
        ["(Intercept)", *DUMMY_NAMES, *coord_names],
    )
    frame = ModelFrame(
        design=design,
        y=inputs.y,
        exposure=inputs.exposure,
        year=inputs.year,
        provenance=provenance,
    )
    return frame, result


def run_model(model: str, config: PipelineConfig, *, dataset: Dataset | None = None,
              basis: ContrastMatrix | None = None) -> RunReport:
    """Run one model family end to end and collect its report.

    Loads (unless ``dataset`` is supplied), preprocesses, builds the
    design, splits by year, fits the regression on the training side,
    and evaluates the chi-square on both sides. A fit that stops at
    its iteration cap is reported, not raised.
    """
    start = time.perf_counter()
    if model not in MODELS:
        raise WrongMethodError(f"model must be one of {MODELS}, got {model!r}")
    if dataset is None:
        dataset = load_dataset(config.data)
    inputs = preprocess(dataset, config.delta, reclose=config.reclose)
    frame, result = build_model_frame(
        model, inputs,
        components=config.components,
        basis=basis,
        standardize_scores=config.standardize_scores,
    )
    train, test = split_by_year(frame, config.train_years, config.test_years)
    fit = nb_fit(train.design, train.y, train.exposure)
    table = wald(fit)
    insample = chi_square_report(train.y, fit, train.design, train.exposure)
    outsample = chi_square_report(test.y, fit, test.design, test.exposure)
    coef_composition = None
    if model == "NB":
        used_basis = basis if basis is not None else contrast_matrix(inputs.compositions.d)
        comp = backtransform_ilr_coeffs(fit.beta[1 + len(DUMMY_NAMES):], used_basis)
        coef_composition = dict(zip(PCT_COLUMNS, comp.values))
    variance = None
    if model == "NBPCA":
        variance = variance_explained(result)
    return RunReport(
        model=model,
        config=config.echo(),
        fit=fit,
        wald_table=table,
        insample=insample,
        outsample=outsample,
        n_train=train.n,
        n_test=test.n,
        provenance=frame.provenance,
        coef_composition=coef_composition,
        variance=variance,
        factorization=result,
        timing_seconds=time.perf_counter() - start,
    )


def _write_text(path: Path, text: str) -> None:
    path.write_text(text, encoding="utf-8", newline="\n")


def _csv_lines(header: list[str], rows) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def _fmt(x) -> str:
    return repr(float(x))


def write_pca_variance(result: FactorizationResult, path) -> Path:
    """Write per-component variance fractions and their running total.

    One row per meaningful component of the centered matrix (at most
    d - 1).
    """
    ratios = variance_explained(result)
    keep = min(result.d - 1, ratios.size)
    cumulative = np.cumsum(ratios)
    rows = (
        [str(k + 1), _fmt(ratios[k]), _fmt(cumulative[k])]
        for k in range(keep)
    )
    path = Path(path)
    _write_text(path, _csv_lines(["component", "proportion", "cumulative"], rows))
    return path


def write_epca_trace(result: FactorizationResult, path) -> Path:
    """Write the EPCA loss trace with the accepted step sizes per iteration."""
    if result.method != "epca":
        raise WrongMethodError("loss trace dump requires an epca result")
    trace = result.loss_trace
    steps = result.step_trace
    rows = []
    for i, loss in enumerate(trace):
        if i == 0:
            rows.append(["0", _fmt(loss), "", ""])
        else:
            rows.append([str(i), _fmt(loss), _fmt(steps[i - 1, 0]), _fmt(steps[i - 1, 1])])
    path = Path(path)
    _write_text(path, _csv_lines(["iteration", "loss", "step_scores", "step_loadings"], rows))
    return path


def emit_report(report: RunReport, out_dir) -> list[Path]:
    """Write the report artifacts and return their paths.

    Always: ``report.json`` (sorted keys, full-precision floats, no
    timing) and ``coefficients.csv`` plus the two chi-square scatter
    files. NBPCA adds ``pca_variance.csv`` (one row per meaningful
    component); NBEPCA adds ``epca_loss_trace.csv``. Output is byte
    deterministic for identical inputs.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    path = out / "report.json"
    _write_text(path, json.dumps(report.to_json_dict(), sort_keys=True, indent=2) + "\n")
    written.append(path)

    table = report.wald_table
    rows = (
        [name, _fmt(est), _fmt(se), _fmt(z), _fmt(p)]
        for name, est, se, z, p in zip(table.names, table.estimate, table.std_error,
                                       table.z_value, table.p_value)
    )
    path = out / "coefficients.csv"
    _write_text(path, _csv_lines(["name", "estimate", "std_error", "z_value", "p_value"], rows))
    written.append(path)

    for suffix, chi in (("in", report.insample), ("out", report.outsample)):
        rows = (
            [str(j), _fmt(o), _fmt(e)]
            for j, (o, e) in enumerate(chi.scatter)
        )
        path = out / f"chisq_scatter_{suffix}.csv"
        _write_text(path, _csv_lines(["j", "log1p_observed", "log1p_expected"], rows))
        written.append(path)

    if report.model == "NBPCA" and report.factorization is not None:
        written.append(write_pca_variance(report.factorization, out / "pca_variance.csv"))

    if report.model == "NBEPCA" and report.factorization is not None:
        written.append(write_epca_trace(report.factorization, out / "epca_loss_trace.csv"))

    return written
