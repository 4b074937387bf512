"""Independent reference computations shared by the tests."""
import itertools
from fractions import Fraction

import numpy as np
from scipy.special import logsumexp
from scipy.stats import multivariate_normal

from agenet.bayes_net import BnModel
from agenet.gmm import GmmParams


def random_gmm(rng, k, d):
    w = rng.dirichlet(np.ones(k) * 2.0)
    means = rng.normal(scale=2.0, size=(k, d))
    A = rng.normal(size=(k, d, d))
    covs = A @ np.swapaxes(A, 1, 2) + 0.5 * np.eye(d)
    return GmmParams(w, means, covs)


def random_model(rng, d=None, max_k=3):
    d = d or int(rng.integers(1, 4))
    gmms = tuple(
        tuple(random_gmm(rng, int(rng.integers(1, max_k + 1)), d) for _ in range(2)) for _ in range(6)
    )
    prior = rng.dirichlet(np.ones(6) * 3.0)
    prior_log = np.log(prior)
    prior_log -= np.log(np.exp(prior_log).sum())
    return BnModel(
        gmms=gmms,
        qs_prob=rng.uniform(0.05, 0.95, size=6),
        age_log_prior=prior_log,
        feature_indices=tuple(range(d)),
        shift=rng.normal(size=d),
        scale=rng.uniform(0.5, 2.0, size=d),
        n_raw_features=d,
    )


def mixture_logpdf(g: GmmParams, Z):
    """ln f(z) via scipy's multivariate normal, independent of agenet's kernels."""
    comps = np.stack(
        [np.log(g.weights[j]) + multivariate_normal(g.means[j], g.covariances[j]).logpdf(Z).reshape(-1)
         for j in range(g.n_components)],
        axis=1,
    )
    return logsumexp(comps, axis=1)


def brute_force_log_scores(model: BnModel, X):
    """ln sum over all 2^n sleep assignments of p(a) prod_i p(x_i|s_i,a) p(s_i|a)."""
    X = np.atleast_2d(X)
    Z = (X[:, list(model.feature_indices)] - model.shift) / model.scale
    n = Z.shape[0]
    assignments = np.array(list(itertools.product((0, 1), repeat=n)))
    scores = []
    for a in range(6):
        L = np.stack(
            [
                mixture_logpdf(model.gmms[a][0], Z) + np.log(model.qs_prob[a]),
                mixture_logpdf(model.gmms[a][1], Z) + np.log(1.0 - model.qs_prob[a]),
            ],
            axis=1,
        )
        joint = L[np.arange(n)[None, :], assignments].sum(axis=1)
        scores.append(model.age_log_prior[a] + logsumexp(joint))
    return np.array(scores)


def alpha_pairable(ratings_a, ratings_b, metric):
    """Krippendorff's alpha from its pairable-values definition, in exact rationals.

    ``metric(c, k, counts)`` gives delta^2 as a Fraction; ``counts`` maps each
    value to its number of pairable occurrences.
    """
    units = list(zip(ratings_a, ratings_b))
    values = [v for u in units for v in u]
    n = len(values)
    counts = {}
    for v in values:
        counts[v] = counts.get(v, 0) + 1
    d_o = Fraction(0)
    for u in units:
        d_o += sum(metric(x, y, counts) for x in u for y in u) / Fraction(len(u) - 1)
    d_o /= n
    d_e = Fraction(0)
    for i, x in enumerate(values):
        for j, y in enumerate(values):
            if i != j:
                d_e += metric(x, y, counts)
    d_e /= n * (n - 1)
    return 1 - d_o / d_e


def nominal_metric(c, k, counts):
    return Fraction(int(c != k))


def ordinal_metric(c, k, counts):
    lo, hi = min(c, k), max(c, k)
    s = sum(Fraction(counts.get(g, 0)) for g in range(lo, hi + 1))
    v = s - Fraction(counts.get(lo, 0) + counts.get(hi, 0), 2)
    return v * v if c != k else Fraction(0)


def planted_features(seed, n=1200, n_noise=20):
    """Column 0 = age index (function of label), column 1 its duplicate,
    column 2 a noisy sleep-state indicator, then pure noise."""
    rng = np.random.default_rng(seed)
    age = rng.integers(0, 6, size=n)
    state = rng.integers(0, 2, size=n)
    labels = age * 2 + state
    planted = age + 0.0
    sleep = state + rng.normal(scale=0.3, size=n)
    noise = rng.normal(size=(n, n_noise))
    X = np.column_stack([planted, planted.copy(), sleep, noise])
    perm = rng.permutation(X.shape[1])
    return X[:, perm], labels, int(np.flatnonzero(perm == 0)[0]), int(np.flatnonzero(perm == 1)[0])
