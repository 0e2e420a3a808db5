"""Pure numpy implementation of the exponential-family kernels.

Used when the compiled extension is unavailable or when
``MAXENTSD_PURE_PYTHON`` is set.
"""
import numpy as np


def log_partition(H, w, lam):
    expo = -(H @ lam)
    s = expo.max()
    if not np.isfinite(s):
        return float("nan")
    z = np.dot(w, np.exp(expo - s))
    if not z > 0.0:
        return float("nan")
    return float(s + np.log(z))


def tilted_moments(H, w, lam):
    expo = -(H @ lam)
    s = expo.max()
    M = H.shape[1]
    if not np.isfinite(s):
        return float("nan"), np.full(M, np.nan), np.full((M, M), np.nan)
    p = w * np.exp(expo - s)
    z = p.sum()
    if not z > 0.0:
        return float("nan"), np.full(M, np.nan), np.full((M, M), np.nan)
    p /= z
    mu = p @ H
    c = H - mu
    cov = (c * p[:, None]).T @ c
    return float(s + np.log(z)), mu, 0.5 * (cov + cov.T)
