"""
Utility functions for the Killing Geometry Toolkit: CSV/JSON input and output
"""

import json
import logging
import os
import tempfile

import numpy as np
import pandas as pd

from config import FLOAT_FORMAT
from exceptions import GridMismatch, ValidationError
from holonomy import BaseCurve

logger = logging.getLogger(__name__)


def check_output_path(path):
    """Fail early when the directory of an output file is missing or read-only"""
    if path is None:
        return None
    directory = os.path.dirname(os.path.abspath(path))
    if not os.path.isdir(directory):
        raise ValidationError("output", f"directory {directory} does not exist")
    if not os.access(directory, os.W_OK):
        raise ValidationError("output", f"directory {directory} is not writable")
    if os.path.isdir(path):
        raise ValidationError("output", f"{path} is a directory")
    return os.path.abspath(path)


def _atomic_write(path, write):
    path = os.path.abspath(path)
    handle = tempfile.NamedTemporaryFile(
        "w", dir=os.path.dirname(path), prefix=".", suffix=".tmp", delete=False, newline=""
    )
    try:
        with handle:
            write(handle)
        os.replace(handle.name, path)
    except BaseException:
        if os.path.exists(handle.name):
            os.remove(handle.name)
        raise
    return path


def write_csv_atomic(frame, path):
    """Write a DataFrame with 17 significant digits; the file appears only when complete"""
    path = _atomic_write(
        path, lambda handle: frame.to_csv(handle, index=False, float_format=FLOAT_FORMAT, na_rep="nan")
    )
    logger.info(f"✓ Wrote {len(frame)} rows to {path}")
    return path


def _to_builtin(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"{type(value).__name__} is not JSON serialisable")


def write_json_atomic(data, path):
    path = _atomic_write(
        path, lambda handle: json.dump(data, handle, indent=2, sort_keys=True, default=_to_builtin)
    )
    logger.info(f"✓ Wrote {path}")
    return path


def grid_frame(domain, **columns):
    """Long-format table (x, y, columns...) over the nodes of the domain"""
    X_, Y_ = domain.mesh
    mask = domain.mask
    data = {"x": X_[mask], "y": Y_[mask]}
    for name, values in columns.items():
        values = np.asarray(values, dtype=float)
        if values.shape != domain.shape:
            raise GridMismatch(domain.shape, values.shape)
        data[name] = values[mask]
    return pd.DataFrame(data)


def read_curve_csv(path, closed=None):
    """Base curve through the samples of a CSV with columns s (or t), x and y"""
    try:
        df = pd.read_csv(path)
    except FileNotFoundError:
        raise ValidationError("curve", f"file {path} not found")
    parameter = "s" if "s" in df.columns else "t"
    missing = {parameter, "x", "y"} - set(df.columns)
    if missing:
        raise ValidationError("curve", f"{path} is missing columns {sorted(missing)}")
    return BaseCurve.from_samples(df[parameter].to_numpy(), df["x"].to_numpy(), df["y"].to_numpy(),
                                  closed=closed)


def read_grid_csv(path, domain, column):
    """
    Values of ``column`` from a CSV with columns x, y, <column>, placed on the
    model grid. Rows must sit on grid nodes; nodes without a row are NaN.
    """
    try:
        df = pd.read_csv(path)
    except FileNotFoundError:
        raise ValidationError("graph", f"file {path} not found")
    missing = {"x", "y", column} - set(df.columns)
    if missing:
        raise ValidationError("graph", f"{path} is missing columns {sorted(missing)}")
    x0, _, y0, _ = domain.bounds
    i = (df["x"].to_numpy() - x0) / domain.hx
    j = (df["y"].to_numpy() - y0) / domain.hy
    ii = np.rint(i).astype(int)
    jj = np.rint(j).astype(int)
    off_grid = (np.abs(i - ii) > 1e-6) | (np.abs(j - jj) > 1e-6)
    outside = (ii < 0) | (ii >= domain.nx) | (jj < 0) | (jj >= domain.ny)
    if np.any(off_grid | outside):
        raise GridMismatch(domain.shape, f"{int(np.sum(off_grid | outside))} rows off the grid")
    values = np.full(domain.shape, np.nan)
    values[ii, jj] = df[column].to_numpy(dtype=float)
    return values
