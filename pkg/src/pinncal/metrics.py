"""Error statistics shared by the calibration studies."""

from __future__ import annotations

import numpy as np


def relative_error(identified: float, true_value: float) -> float:
    """Signed relative error in percent."""
    if true_value == 0:
        raise ValueError("reference value must be nonzero")
    return 100.0 * (identified - true_value) / true_value


def mare(relative_errors) -> float:
    """Mean absolute relative error (percent) over repeat runs."""
    errs = np.asarray(list(relative_errors), dtype=np.float64)
    if errs.size < 1:
        raise ValueError("need at least one run")
    return float(np.abs(errs).mean())


def sem(samples) -> float:
    """Standard error of the mean, sample (n-1) standard deviation over
    sqrt(n)."""
    arr = np.asarray(list(samples), dtype=np.float64)
    if arr.size < 2:
        raise ValueError("SEM needs at least two samples")
    return float(arr.std(ddof=1) / np.sqrt(arr.size))


def relative_l2(pred: np.ndarray, ref: np.ndarray) -> float:
    """Discrete relative L2 norm over a validation point set."""
    pred = np.asarray(pred, dtype=np.float64)
    ref = np.asarray(ref, dtype=np.float64)
    denom = np.linalg.norm(ref)
    if denom == 0:
        raise ValueError("reference field has zero norm")
    return float(np.linalg.norm(pred - ref) / denom)
