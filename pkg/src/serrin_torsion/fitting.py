"""Regression helpers for sweep tables: series fits and decay slopes."""

import numpy as np

__all__ = ["fit_even_series", "loglog_slope"]


def fit_even_series(eps, values, orders=(0, 2, 4)):
    """Least-squares fit of values(eps) = sum_k c_k eps^k over the orders.

    Returns the coefficients keyed by order. The sweep should carry at
    least one more point than there are orders so the fit is a genuine
    regression rather than interpolation.
    """
    eps = np.asarray(eps, dtype=float)
    values = np.asarray(values, dtype=float)
    A = np.stack([eps**k for k in orders], axis=1)
    coeffs, *_ = np.linalg.lstsq(A, values, rcond=None)
    return {k: float(c) for k, c in zip(orders, coeffs)}


def loglog_slope(eps, values):
    """Fitted slope of log|values| against log(eps)."""
    eps = np.asarray(eps, dtype=float)
    mags = np.abs(np.asarray(values, dtype=float))
    if np.any(mags == 0.0):
        raise ValueError("zero value in a log-log slope fit")
    return float(np.polyfit(np.log(eps), np.log(mags), 1)[0])
