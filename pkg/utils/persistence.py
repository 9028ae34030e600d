"""
File formats shared by the CLI and the dashboard: observation windows,
nuisance and signal spec files, the threshold cache and CSV records.
"""

import json
import logging
import os

import numpy as np
import pandas as pd

from harmonics.errors import LengthMismatch
from utils.quantiles import ThresholdTable

logger = logging.getLogger(__name__)


def load_json(path, fallback=None):
    """Read a JSON file, returning `fallback` when it does not exist."""
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except FileNotFoundError:
        if fallback is None:
            raise
        logger.info("%s not found, using built-in defaults", path)
        return fallback


def save_json(data, path):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(data, f, indent=2, sort_keys=True)
        f.write("\n")


def observation_from_dict(data):
    """Validate {"N": int, "y": [reals]} and return the window as a float array."""
    y = np.asarray(data["y"], dtype=float)
    N = int(data.get("N", len(y)))
    if y.ndim != 1 or len(y) != N:
        raise LengthMismatch(f"Observation declares N={N} but holds {y.size} values")
    if not np.all(np.isfinite(y)):
        raise ValueError("Observation contains non-finite values")
    return y


def observation_to_dict(y):
    y = np.asarray(y, dtype=float)
    return {"N": int(len(y)), "y": [float(v) for v in y]}


def read_observation_table(source, filename):
    """
    Read a single-column observation from an uploaded CSV or Excel file.

    Args:
        source: Path or file-like object
        filename: Name used to pick the parser

    Returns:
        Float array of the first numeric column
    """
    if filename.endswith(".csv"):
        df = pd.read_csv(source)
    elif filename.endswith((".xls", ".xlsx")):
        df = pd.read_excel(source)
    elif filename.endswith(".json"):
        data = json.load(source) if hasattr(source, "read") else load_json(source)
        return observation_from_dict(data)
    else:
        raise ValueError(f"Unsupported observation file type: {filename}")

    numeric = df.select_dtypes(include=[np.number])
    if numeric.shape[1] == 0:
        raise ValueError(f"No numeric column found in {filename}")
    return observation_from_dict({"y": numeric.iloc[:, 0].dropna().to_numpy()})


def load_observation(path):
    return read_observation_table(path, os.fspath(path))


def save_observation(y, path):
    save_json(observation_to_dict(y), path)


def load_threshold_table(path):
    return ThresholdTable.from_dict(load_json(path, fallback={}))


def save_threshold_table(table, path):
    save_json(table.to_dict(), path)


def records_to_csv(df, path=None):
    """CSV with LF line endings and shortest round-trip floats; returns the text when path is None."""
    text = df.to_csv(index=False, lineterminator="\n", float_format=None)
    if path is None:
        return text
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(text)
    return text
