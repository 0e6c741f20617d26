"""
Location quotients and the two cultural advantage ratios built on them.

All functions accept numpy arrays or pandas objects and return the same
kind; undefined entries are NaN.
"""

import numpy as np
import pandas as pd


def location_quotient(q):
    """
    LQ[i, j] = (q[i, j] / sum_j q[i, :]) / (sum_i q[:, j] / sum q).

    Rows are regions, columns industries. Entries in a zero row or zero
    column are NaN; the rest are computed normally.
    """
    values = np.asarray(q, dtype=float)
    if values.ndim != 2:
        raise ValueError("location_quotient expects a 2-D region x industry matrix")
    if np.any(values < 0):
        raise ValueError("location_quotient expects nonnegative quantities")
    row = values.sum(axis=1, keepdims=True)
    col = values.sum(axis=0, keepdims=True)
    total = values.sum()
    with np.errstate(divide="ignore", invalid="ignore"):
        lq = (values / row) / (col / total)
    lq[np.broadcast_to((row <= 0) | (col <= 0) | (total <= 0), lq.shape)] = np.nan
    if isinstance(q, pd.DataFrame):
        return pd.DataFrame(lq, index=q.index, columns=q.columns)
    return lq


def _advantage(part, whole):
    part_values = np.asarray(part, dtype=float)
    whole_values = np.asarray(whole, dtype=float)
    if part_values.shape != whole_values.shape:
        raise ValueError("part and whole must have the same shape")
    usable = np.isfinite(part_values) & np.isfinite(whole_values) & (whole_values > 0)
    result = np.full(part_values.shape, np.nan)
    if usable.any():
        city = part_values[usable].sum() / whole_values[usable].sum()
        if city > 0:
            result[usable] = (part_values[usable] / whole_values[usable]) / city
    if isinstance(part, pd.Series):
        return pd.Series(result, index=part.index)
    return result


def cultural_expenditure_advantage(ce, te):
    """
    CEA_i = (CE_i / TE_i) / (sum CE / sum TE).

    Wards with TE_i = 0 (or missing data) are NaN and left out of the city
    ratio. All values are NaN when no culture spending is recorded.
    """
    return _advantage(ce, te)


def cultural_venue_advantage(cv, tv):
    """CVA_i = (CV_i / TV_i) / (sum CV / sum TV); NaN where TV_i = 0."""
    return _advantage(cv, tv)
