"""CSV ingestion and emission for datasets and coefficient vectors."""
import logging
from pathlib import Path

import numpy as np
import pandas as pd

from hdglm.exceptions import DimensionMismatch, InvalidData
from hdglm.model_zoo.synthetic import Dataset

logger = logging.getLogger(__name__)

BETA_SIDECAR = "beta_true.csv"
FLOAT_FORMAT = "%.17g"


def _sidecar_path(path):
    return Path(path).with_name(BETA_SIDECAR)


def read_vector(path):
    values = pd.read_csv(path, header=None).iloc[:, 0].to_numpy(dtype=float)
    if not np.all(np.isfinite(values)):
        raise InvalidData(f"Non-finite entries in {path}")
    return values


def write_vector(path, values):
    pd.DataFrame(np.asarray(values, dtype=float).ravel()).to_csv(
        path, header=False, index=False, float_format=FLOAT_FORMAT, lineterminator="\n"
    )


def read_dataset(path, beta_path=None):
    """
    Read a ``x1,...,xp,y`` CSV. The true coefficients are picked up from
    ``beta_path`` or, failing that, from a ``beta_true.csv`` next to the file.
    """
    try:
        frame = pd.read_csv(path, encoding="utf-8")
    except (pd.errors.ParserError, UnicodeDecodeError) as err:
        raise InvalidData(f"Could not parse {path}: {err}") from err

    columns = list(frame.columns)
    expected = [f"x{j + 1}" for j in range(len(columns) - 1)] + ["y"]
    if len(columns) < 2 or columns != expected:
        raise DimensionMismatch(f"Header of {path} must be x1,...,xp,y")
    try:
        X = frame[expected[:-1]].to_numpy(dtype=float)
        y = frame["y"].to_numpy(dtype=float)
    except ValueError as err:
        raise InvalidData(f"Non-numeric entries in {path}") from err

    beta = None
    beta_path = Path(beta_path) if beta_path is not None else _sidecar_path(path)
    if beta_path.exists():
        beta = read_vector(beta_path)
    logger.info("Read dataset %s with n=%d p=%d", path, X.shape[0], X.shape[1])
    return Dataset(X, y, beta)


def write_dataset(dataset, path):
    """Write the CSV and, for synthetic data, the ``beta_true.csv`` sidecar."""
    frame = pd.DataFrame(dataset.X, columns=[f"x{j + 1}" for j in range(dataset.p)])
    frame["y"] = dataset.y
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n", encoding="utf-8")
    if dataset.beta_true is not None:
        write_vector(_sidecar_path(path), dataset.beta_true)
