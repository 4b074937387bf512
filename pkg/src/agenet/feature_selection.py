"""Minimum-redundancy maximum-relevance feature ranking (difference form).

Continuous features are discretised by equal-frequency binning and scored
with plug-in mutual information against the 12-class augmented label.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from agenet import kernels
from agenet.domain import Dataset, ValidationError, augment


@dataclass(frozen=True)
class MrmrConfig:
    n_bins: int = 10
    max_features: int = 12

    def __post_init__(self):
        if self.n_bins < 2:
            raise ValueError("n_bins must be at least 2")
        if self.max_features < 1:
            raise ValueError("max_features must be positive")


@dataclass(frozen=True)
class FeatureRanking:
    indices: tuple
    scores: tuple

    def top(self, d: int) -> list[int]:
        if d > len(self.indices):
            raise ValueError(f"ranking holds {len(self.indices)} features, {d} requested")
        return list(self.indices[:d])


def _codes(v):
    v = np.asarray(v)
    uniq, codes = np.unique(v, return_inverse=True)
    return codes.reshape(-1).astype(np.int64), len(uniq)


def mutual_information(x, y) -> float:
    """Plug-in mutual information in nats between two discrete series."""
    x = np.asarray(x).reshape(-1)
    y = np.asarray(y).reshape(-1)
    if x.shape != y.shape:
        raise ValueError(f"length mismatch: {x.shape[0]} vs {y.shape[0]}")
    if x.shape[0] == 0:
        raise ValueError("empty series")
    cx, nx = _codes(x)
    cy, ny = _codes(y)
    return kernels.mutual_information_codes(cx, cy, nx, ny)


def equal_frequency_bins(values, n_bins: int) -> np.ndarray:
    """Bin by rank into ``n_bins`` equally populated bins.

    Tied values all take the bin of their lowest rank, so ties never split.
    """
    v = np.asarray(values, dtype=np.float64)
    n = v.shape[0]
    order = np.sort(v)
    first_rank = np.searchsorted(order, v, side="left")
    return (first_rank * n_bins) // n


def select(X, labels, config: MrmrConfig = MrmrConfig()) -> FeatureRanking:
    """Greedy mRMR: maximise relevance minus mean redundancy with the chosen set.

    Ties in score go to the lowest feature index.
    """
    X = np.asarray(X, dtype=np.float64)
    labels = np.asarray(labels).reshape(-1)
    n, m = X.shape
    if labels.shape[0] != n:
        raise ValueError(f"{n} rows but {labels.shape[0]} labels")
    if config.max_features > m:
        raise ValueError(f"max_features={config.max_features} exceeds {m} available features")
    if n < config.n_bins:
        raise ValueError(f"too few rows ({n}) for {config.n_bins} bins")
    if np.unique(labels).size < 2:
        raise ValueError("label vector is constant; relevance is undefined")

    binned = np.empty((m, n), dtype=np.int64)
    nb = np.empty(m, dtype=np.int64)
    for j in range(m):
        binned[j], nb[j] = _codes(equal_frequency_bins(X[:, j], config.n_bins))
    y, ny = _codes(labels)

    relevance = np.array([kernels.mutual_information_codes(binned[j], y, nb[j], ny) for j in range(m)])
    redundancy = np.zeros(m)
    chosen: list[int] = []
    scores: list[float] = []
    candidate = np.ones(m, dtype=bool)
    for step in range(config.max_features):
        if step == 0:
            score = relevance.copy()
        else:
            last = chosen[-1]
            for j in np.flatnonzero(candidate):
                redundancy[j] += kernels.mutual_information_codes(binned[j], binned[last], nb[j], nb[last])
            score = relevance - redundancy / len(chosen)
        score = np.where(candidate, score, -np.inf)
        best = int(np.argmax(score))
        chosen.append(best)
        scores.append(float(score[best]))
        candidate[best] = False
    return FeatureRanking(tuple(chosen), tuple(scores))


def augmented_labels(dataset: Dataset) -> np.ndarray:
    """One augmented (age, state) label per epoch, concatenated over recordings."""
    out = []
    for rec in dataset.recordings:
        if not rec.labeled:
            raise ValidationError(f"recording {rec.recording_id} has no sleep labels")
        a = int(rec.age_group)
        out.append(np.array([augment(a, s) for s in rec.sleep_labels], dtype=np.int64))
    return np.concatenate(out) if out else np.empty(0, dtype=np.int64)


def rank_features(dataset: Dataset, config: MrmrConfig) -> FeatureRanking:
    X, _, _ = dataset.stacked()
    return select(X, augmented_labels(dataset), config)
