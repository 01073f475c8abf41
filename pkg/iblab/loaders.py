"""Readers for the input files of the command-line tool.

- Covariance JSON: `{"blocks": [["X", 1], ["Y", 1]], "cov": [[...], ...]}`.
- SEM JSON: `{"dims": {...}, "edges": [{"from", "to", "coef"}], "noise_cov": {...}}`,
  or the name of a built-in scenario such as `chain_xty`.
- pmf CSV: long format, one row per atom; the last column `p` holds the
  probability and the two or three columns before it the symbols of X, Y
  (and T).
- pmf JSON: `{"pmf": nested list}`, indexed [x, y] or [x, y, t].
- Data CSV: one column per feature with a header row; columns whose names
  start with "X" belong to X and those starting with "Y" to Y.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd
from numpy.typing import NDArray

from iblab.dvib_linear import copula_transform
from iblab.gaussian_core import GaussianJoint
from iblab.sem_lab import SCENARIOS, LinearGaussianSem, scenario

__all__ = [
    "InputFileError",
    "read_covariance",
    "read_sem",
    "read_pmf",
    "read_data",
    "joint_from_data",
]

logger = logging.getLogger(__name__)


class InputFileError(ValueError):
    """Raised when an input file cannot be read or parsed."""


def _read_json(filepath: str | Path) -> Any:
    try:
        return json.loads(Path(filepath).read_text(encoding="utf8"))
    except OSError as e:
        raise InputFileError(f"Cannot read {filepath}: {e.strerror}.") from None
    except json.JSONDecodeError as e:
        raise InputFileError(f"{filepath} is not valid JSON: {e.msg}.") from None


def read_covariance(filepath: str | Path) -> GaussianJoint:
    """Read a GaussianJoint from its JSON document."""
    data = _read_json(filepath)
    try:
        return GaussianJoint.from_dict(data)
    except (KeyError, TypeError) as e:
        raise InputFileError(f"{filepath} is not a covariance document: {e!r}.") from None


def read_sem(source: str | Path) -> LinearGaussianSem:
    """Read a SEM from a JSON file, or build a named scenario."""
    if str(source) in SCENARIOS and not Path(source).exists():
        return scenario(str(source))
    return LinearGaussianSem.from_dict(_read_json(source))


def read_pmf(filepath: str | Path) -> NDArray[np.float64]:
    """Read a two- or three-way pmf from CSV (long format) or JSON.

    Symbols are ordered by sorting each column's distinct values; atoms
    missing from a CSV have probability zero.
    """
    path = Path(filepath)
    if path.suffix.lower() == ".json":
        data = _read_json(path)
        try:
            pmf = np.asarray(data["pmf"], dtype=np.float64)
        except (KeyError, TypeError, ValueError) as e:
            raise InputFileError(f"{filepath} is not a pmf document: {e!r}.") from None
    else:
        try:
            df = pd.read_csv(path)
        except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
            raise InputFileError(f"Cannot read {filepath}: {e}.") from None
        if df.columns[-1] != "p" or df.shape[1] not in (3, 4):
            raise InputFileError(
                f"{filepath} must have 2 or 3 symbol columns followed by a 'p' column."
            )
        cats = [pd.Categorical(df[col]) for col in df.columns[:-1]]
        pmf = np.zeros([len(c.categories) for c in cats])
        np.add.at(pmf, tuple(c.codes for c in cats), df["p"].to_numpy(dtype=np.float64))
    if pmf.ndim not in (2, 3):
        raise InputFileError(f"pmf in {filepath} must have 2 or 3 axes, got {pmf.ndim}.")
    return pmf


def read_data(filepath: str | Path) -> pd.DataFrame:
    """Read a data CSV and check that it has X and Y columns."""
    try:
        df = pd.read_csv(filepath)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise InputFileError(f"Cannot read {filepath}: {e}.") from None
    x_cols = [c for c in df.columns if str(c).startswith("X")]
    y_cols = [c for c in df.columns if str(c).startswith("Y")]
    if not x_cols or not y_cols:
        raise InputFileError(f"{filepath} needs columns named X... and Y....")
    if len(x_cols) + len(y_cols) != df.shape[1]:
        extra = sorted(set(df.columns) - set(x_cols) - set(y_cols))
        raise InputFileError(f"Columns {extra} belong to neither X nor Y.")
    return df[x_cols + y_cols]


def joint_from_data(df: pd.DataFrame, copula: bool = False) -> GaussianJoint:
    """The sample covariance of a data frame from `read_data`, as a joint over X and Y.

    With `copula`, every column goes through `copula_transform` first.
    """
    values = df.to_numpy(dtype=np.float64)
    if copula:
        values = copula_transform(values)
    n_x = sum(1 for c in df.columns if str(c).startswith("X"))
    cov = np.cov(values, rowvar=False)
    cov = 0.5 * (cov + cov.T)
    logger.info("Estimated a %dx%d covariance from %d rows.", *cov.shape, values.shape[0])
    return GaussianJoint([("X", n_x), ("Y", df.shape[1] - n_x)], cov)
