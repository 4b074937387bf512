"""Full-covariance Gaussian mixtures: log-density and EM fitting."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np

from agenet import kernels


class FitError(ValueError):
    """A mixture could not be fitted (e.g. too few samples)."""


class ConvergenceWarning(UserWarning):
    pass


@dataclass(frozen=True, eq=False)
class GmmParams:
    """Weights (k,), means (k, d) and covariances (k, d, d) of one mixture."""

    weights: np.ndarray
    means: np.ndarray
    covariances: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64).reshape(-1)
        mu = np.array(self.means, dtype=np.float64)
        cov = np.array(self.covariances, dtype=np.float64)
        k = w.shape[0]
        if mu.ndim == 1:
            mu = mu.reshape(k, -1)
        d = mu.shape[1]
        cov = cov.reshape(k, d, d)
        if k == 0 or mu.shape[0] != k:
            raise ValueError(f"weights/means disagree on component count ({k} vs {mu.shape[0]})")
        if np.any(w <= 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError(f"weights must be positive and sum to 1, got {w}")
        if not np.all(np.isfinite(mu)) or not np.all(np.isfinite(cov)):
            raise ValueError("non-finite mean or covariance")
        if np.max(np.abs(cov - np.swapaxes(cov, 1, 2)), initial=0.0) > 1e-10:
            raise ValueError("covariance not symmetric")
        for a in (w, mu, cov):
            a.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", mu)
        object.__setattr__(self, "covariances", cov)
        self.chols  # raises on non-PD covariances

    @property
    def n_components(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    @cached_property
    def chols(self) -> np.ndarray:
        try:
            L = np.linalg.cholesky(self.covariances)
        except np.linalg.LinAlgError:
            raise ValueError("covariance not positive definite") from None
        L.setflags(write=False)
        return L

    @cached_property
    def log_weights(self) -> np.ndarray:
        return np.log(self.weights)

    def component_log_prob(self, X: np.ndarray) -> np.ndarray:
        """(n, k) array of ln c_j + ln N(x_i; mu_j, Sigma_j)."""
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.dim:
            raise ValueError(f"dimension mismatch: samples have {X.shape[1]} features, mixture has {self.dim}")
        return kernels.gaussian_log_prob(X, self.means, self.chols) + self.log_weights

    def score_samples(self, X: np.ndarray) -> np.ndarray:
        """Per-sample mixture log-density, shape (n,)."""
        return kernels.logsumexp_rows(self.component_log_prob(X))


def log_density(gmm: GmmParams, x) -> float:
    """ln f(x) for a single feature vector."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("log_density expects one feature vector; use GmmParams.score_samples for batches")
    return float(gmm.score_samples(x[None, :])[0])


@dataclass(frozen=True)
class EmConfig:
    max_iters: int = 200
    tol: float = 1e-6
    # covariance ridge as a fraction of the samples' mean per-feature variance
    reg_eps: float = 1e-6
    n_restarts: int = 3
    seed: int = 0

    def __post_init__(self):
        if self.max_iters < 1 or self.n_restarts < 1:
            raise ValueError("max_iters and n_restarts must be positive")
        if not self.tol > 0 or not self.reg_eps > 0:
            raise ValueError("tol and reg_eps must be positive")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")


@dataclass(frozen=True, eq=False)
class EmResult:
    params: GmmParams
    log_likelihood: float
    history: tuple = field(repr=False)
    converged: bool
    n_iter: int
    restart: int
    ridge: float = 0.0


def _kmeanspp(X, k, rng):
    n = X.shape[0]
    centers = [int(rng.integers(n))]
    d2 = np.sum((X - X[centers[0]]) ** 2, axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total > 0:
            idx = int(rng.choice(n, p=d2 / total))
        else:
            idx = int(rng.integers(n))
        centers.append(idx)
        d2 = np.minimum(d2, np.sum((X - X[idx]) ** 2, axis=1))
    return X[centers]


def _m_step(X, resp, reg_eps, prev: Optional[GmmParams] = None):
    n, d = X.shape
    k = resp.shape[1]
    nk = resp.sum(axis=0)
    means = np.empty((k, d))
    covs = np.empty((k, d, d))
    eye = np.eye(d)
    for j in range(k):
        if nk[j] < 1e-10:
            # dead component: keep previous parameters at negligible weight
            if prev is not None:
                means[j], covs[j] = prev.means[j], prev.covariances[j]
            else:
                means[j] = X[0]
                covs[j] = np.cov(X.T, bias=True).reshape(d, d) + reg_eps * eye
            continue
        r = resp[:, j]
        means[j] = r @ X / nk[j]
        diff = X - means[j]
        c = (diff * r[:, None]).T @ diff / nk[j]
        covs[j] = 0.5 * (c + c.T) + reg_eps * eye
    w = np.maximum(nk, 1e-300)
    return GmmParams(w / w.sum(), means, covs)


def _run_em(X, k, config, ridge, rng, restart):
    centers = _kmeanspp(X, k, rng)
    d2 = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    hard = np.argmin(d2, axis=1)
    resp = np.zeros((X.shape[0], k))
    resp[np.arange(X.shape[0]), hard] = 1.0
    params = _m_step(X, resp, ridge)

    history = []
    converged = False
    n_iter = 0
    while True:
        logp = params.component_log_prob(X)
        ll_i = kernels.logsumexp_rows(logp)
        ll = float(np.sum(ll_i))
        if history and abs(ll - history[-1]) <= config.tol * abs(history[-1]):
            history.append(ll)
            converged = True
            break
        history.append(ll)
        if n_iter >= config.max_iters:
            break
        resp = np.exp(logp - ll_i[:, None])
        params = _m_step(X, resp, ridge, prev=params)
        n_iter += 1
    return EmResult(params, ll, tuple(history), converged, n_iter, restart, ridge)


def fit_em(samples, k: int, config: EmConfig = EmConfig(), cell: str = "") -> EmResult:
    """Fit a k-component full-covariance mixture by EM.

    Samples are put into a canonical (lexicographic) order first, so the
    result does not depend on the order they were supplied in. The best of
    ``config.n_restarts`` k-means++ initialisations is returned; ties go to
    the earliest restart.
    """
    X = np.atleast_2d(np.asarray(samples, dtype=np.float64))
    where = f" for cell {cell}" if cell else ""
    if k < 1:
        raise FitError(f"number of components must be positive{where}")
    if X.shape[0] < k:
        raise FitError(f"need at least {k} samples{where}, got {X.shape[0]}")
    if not np.all(np.isfinite(X)):
        raise FitError(f"non-finite samples{where}")
    X = X[np.lexsort(X.T[::-1])]
    mean_var = float(np.mean(X.var(axis=0)))
    # all-constant samples have no scale to be relative to
    ridge = config.reg_eps * mean_var if mean_var > 0 else config.reg_eps

    best = None
    for r in range(config.n_restarts):
        rng = np.random.default_rng([config.seed, r])
        res = _run_em(X, k, config, ridge, rng, r)
        if best is None or res.log_likelihood > best.log_likelihood:
            best = res
    if not best.converged:
        warnings.warn(
            f"EM did not converge within {config.max_iters} iterations{where}", ConvergenceWarning, stacklevel=2
        )
    return best
