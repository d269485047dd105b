"""Shared fixtures: synthetic mine-like datasets and the optional real file.

The synthetic builder produces a CSV that satisfies the loader contract
(ten activity proportions summing to exactly 1, integer counts, exposure
>= 1) with sparse compositions and negative-binomial responses, so every
pipeline stage can run without the real dataset. Tests that reproduce
published reference statistics require the real file; point
``CODAREG_MINE_DATA`` at it or drop it at ``data/mine_injuries.csv``.
"""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from codareg.pipeline import MINE_TYPES, PCT_COLUMNS

MINE_DATA_ENV = "CODAREG_MINE_DATA"
MINE_DATA_DEFAULT = Path(__file__).resolve().parent.parent / "data" / "mine_injuries.csv"


def find_mine_data() -> Path | None:
    """Locate the real mine CSV, if the user provided one."""
    env = os.environ.get(MINE_DATA_ENV)
    if env:
        path = Path(env)
        if path.is_file():
            return path
    if MINE_DATA_DEFAULT.is_file():
        return MINE_DATA_DEFAULT
    return None


def make_mine_frame(n: int = 1200, seed: int = 20130841) -> pd.DataFrame:
    """Deterministic synthetic table with the loader's fourteen columns.

    Compositions are sparse (about a third of the cells are exact
    zeros), rounded to six decimals, and rebalanced so each row sums to
    exactly 1. Counts follow a negative binomial model whose mean
    depends on mine type and on the two dominant activity shares, so
    the fitted models have real signal to find.
    """
    rng = np.random.default_rng(seed)
    years = np.tile([2013, 2014, 2015, 2016], n // 4 + 1)[:n]
    types = rng.choice(MINE_TYPES, size=n, p=[0.06, 0.45, 0.41, 0.08])

    raw = rng.dirichlet(np.full(len(PCT_COLUMNS), 0.35), size=n)
    pct = np.round(raw, 6)
    pct[pct < 5e-5] = 0.0
    largest = np.argmax(pct, axis=1)
    pct[np.arange(n), largest] += 1.0 - pct.sum(axis=1)
    assert np.all(pct >= 0.0) and np.all(pct <= 1.0)

    exposure = 1.0 + np.round(rng.gamma(2.0, 30.0, size=n))

    # Ground-truth rates: type effects plus two composition effects on
    # the zero-replaced log scale, keeping the mean response below 1.
    logs = np.log(np.where(pct == 0.0, 1e-6, pct))
    clr_rows = logs - logs.mean(axis=1, keepdims=True)
    eta = (
        -4.6
        + 0.35 * (types == "Underground")
        - 0.25 * (types == "Sand & gravel")
        + 0.04 * clr_rows[:, 0]
        - 0.03 * clr_rows[:, 2]
    )
    mu = exposure * np.exp(eta)
    r_true = 1.3
    y = rng.negative_binomial(r_true, r_true / (r_true + mu))

    frame = pd.DataFrame({
        "YEAR": years,
        "TYPE_OF_MINE": types,
        "AVG_EMP_TOTAL": exposure,
        "NUM_INJURIES": y,
    })
    for j, col in enumerate(PCT_COLUMNS):
        frame[col] = pct[:, j]
    # an extra column the loader must carry through untouched
    frame["MINE_ID"] = [f"m{i:05d}" for i in range(n)]
    return frame


@pytest.fixture(scope="session")
def synth_frame() -> pd.DataFrame:
    return make_mine_frame()


@pytest.fixture(scope="session")
def synth_csv(synth_frame, tmp_path_factory) -> Path:
    path = tmp_path_factory.mktemp("data") / "synthetic_mines.csv"
    synth_frame.to_csv(path, index=False)
    return path


@pytest.fixture(scope="session")
def small_csv(tmp_path_factory) -> Path:
    """A smaller table for subprocess-driven CLI tests."""
    path = tmp_path_factory.mktemp("data") / "small_mines.csv"
    make_mine_frame(n=480, seed=77041).to_csv(path, index=False)
    return path


@pytest.fixture(scope="session")
def mine_csv() -> Path:
    """The real dataset, when available; otherwise skip the test."""
    path = find_mine_data()
    if path is None:
        pytest.skip(
            f"real mine dataset not available; set {MINE_DATA_ENV} or place the "
            f"file at {MINE_DATA_DEFAULT}"
        )
    return path
