"""Pure numpy implementations of the numerical kernels.

Used when the compiled extension is unavailable, and as the reference the
compiled kernels are benchmarked and tested against.
"""
import math

import numpy as np
from scipy.linalg import solve_triangular

_LOG_2PI = math.log(2.0 * math.pi)


def gaussian_log_prob(X, means, chols):
    """Per-component Gaussian log-densities.

    :param X: (n, d) samples.
    :param means: (k, d) component means.
    :param chols: (k, d, d) lower Cholesky factors of the covariances.
    :returns: (n, k) array of ln N(x_i; mu_j, Sigma_j).
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    n, d = X.shape
    k = means.shape[0]
    out = np.empty((n, k))
    for j in range(k):
        L = chols[j]
        z = solve_triangular(L, (X - means[j]).T, lower=True, check_finite=False)
        log_det = 2.0 * np.sum(np.log(np.diag(L)))
        out[:, j] = -0.5 * (d * _LOG_2PI + log_det + np.sum(z * z, axis=0))
    return out


def logsumexp_rows(A):
    A = np.asarray(A, dtype=np.float64)
    m = np.max(A, axis=1)
    safe = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        return safe + np.log(np.sum(np.exp(A - safe[:, None]), axis=1))


def mutual_information_codes(x, y, nx, ny):
    """Plug-in mutual information (nats) of two integer-coded series."""
    x = np.asarray(x, dtype=np.int64)
    y = np.asarray(y, dtype=np.int64)
    n = x.shape[0]
    joint = np.bincount(x * ny + y, minlength=nx * ny).reshape(nx, ny).astype(np.float64)
    px = joint.sum(axis=1)
    py = joint.sum(axis=0)
    i, j = np.nonzero(joint)
    c = joint[i, j]
    terms = (c / n) * np.log(c * n / (px[i] * py[j]))
    return max(math.fsum(terms.tolist()), 0.0)
