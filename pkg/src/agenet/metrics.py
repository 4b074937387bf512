"""Confusion matrices and two-rater Krippendorff's alpha (nominal, ordinal)."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

NOMINAL = "nominal"
ORDINAL = "ordinal"

# Krippendorff's reliability convention: >= .800 reliable, >= .667 tentative
ALPHA_BANDS = (
    (0.8, "almost-perfect"),
    (0.667, "tentative"),
    (-1.0, "unreliable"),
)


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    counts: np.ndarray  # rows = true, columns = predicted

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def accuracy(self) -> float:
        return float(np.trace(self.counts) / self.total) if self.total else float("nan")

    @property
    def per_class_accuracy(self) -> np.ndarray:
        """Diagonal over row sums; NaN for classes with no true items."""
        rows = self.counts.sum(axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(rows > 0, np.diag(self.counts) / rows, np.nan)

    def beyond_adjacent(self) -> int:
        """Number of items misclassified by more than one class index."""
        i, j = np.indices(self.counts.shape)
        return int(self.counts[np.abs(i - j) > 1].sum())


def confusion(true: Sequence[int], pred: Sequence[int], n_classes: int) -> ConfusionMatrix:
    t = np.asarray(true, dtype=np.int64).reshape(-1)
    p = np.asarray(pred, dtype=np.int64).reshape(-1)
    if t.shape != p.shape:
        raise ValueError(f"length mismatch: {t.shape[0]} true vs {p.shape[0]} predicted labels")
    for name, v in (("true", t), ("predicted", p)):
        if v.size and (v.min() < 0 or v.max() >= n_classes):
            raise ValueError(f"{name} label out of range 0..{n_classes - 1}")
    counts = np.bincount(t * n_classes + p, minlength=n_classes * n_classes).reshape(n_classes, n_classes)
    return ConfusionMatrix(counts)


@dataclass(frozen=True)
class AgreementTable:
    """Paired ratings of the same units by two raters over categories 0..n-1."""

    pairs: tuple
    n_categories: int
    scale: str = NOMINAL

    def __post_init__(self):
        pairs = tuple((int(a), int(b)) for a, b in self.pairs)
        if not pairs:
            raise ValueError("agreement table needs at least one pair")
        if self.scale not in (NOMINAL, ORDINAL):
            raise ValueError(f"unknown scale {self.scale!r}")
        for a, b in pairs:
            if not (0 <= a < self.n_categories and 0 <= b < self.n_categories):
                raise ValueError(f"rating pair {(a, b)} outside 0..{self.n_categories - 1}")
        object.__setattr__(self, "pairs", pairs)

    @classmethod
    def from_lists(cls, a, b, n_categories, scale=NOMINAL):
        a, b = list(a), list(b)
        if len(a) != len(b):
            raise ValueError("rating lists differ in length")
        return cls(tuple(zip(a, b)), n_categories, scale)

    def coincidences(self) -> np.ndarray:
        c = self.n_categories
        p = np.asarray(self.pairs, dtype=np.int64)
        o = np.bincount(p[:, 0] * c + p[:, 1], minlength=c * c).reshape(c, c).astype(np.float64)
        return o + o.T


@dataclass(frozen=True)
class Alpha:
    value: float
    observed: float
    expected: float
    degenerate: bool = False

    def __float__(self) -> float:
        return self.value


def distance_matrix(marginals: np.ndarray, scale: str) -> np.ndarray:
    """Squared difference function delta^2(c, k) for the given scale."""
    c = marginals.shape[0]
    if scale == NOMINAL:
        return 1.0 - np.eye(c)
    cum = np.concatenate([[0.0], np.cumsum(marginals)])
    delta = np.zeros((c, c))
    for i in range(c):
        for k in range(i + 1, c):
            v = cum[k + 1] - cum[i] - (marginals[i] + marginals[k]) / 2.0
            delta[i, k] = delta[k, i] = v * v
    return delta


def krippendorff_alpha(table: AgreementTable) -> Alpha:
    """Two-rater alpha from the coincidence matrix.

    Returns alpha = 1 flagged ``degenerate`` when expected disagreement is
    zero (a single category used throughout).
    """
    if len(table.pairs) < 2:
        raise ValueError("alpha needs at least two rated units")
    o = table.coincidences()
    n_c = o.sum(axis=1)
    n = n_c.sum()
    delta = distance_matrix(n_c, table.scale)
    d_o = float(np.sum(o * delta) / n)
    d_e = float(np.sum(np.outer(n_c, n_c) * delta) / (n * (n - 1)))
    if d_e == 0.0:
        return Alpha(1.0, d_o, d_e, degenerate=True)
    return Alpha(1.0 - d_o / d_e, d_o, d_e)


def alpha(a, b, n_categories: int, scale: str = NOMINAL) -> Alpha:
    return krippendorff_alpha(AgreementTable.from_lists(a, b, n_categories, scale))


def interpret_alpha(value: float) -> str:
    if not -1.0 <= value <= 1.0:
        raise ValueError(f"alpha must lie in [-1, 1], got {value}")
    for lower, name in ALPHA_BANDS:
        if value >= lower:
            return name
    raise AssertionError("unreachable")
