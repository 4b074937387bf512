"""Patient-stratified nested cross-validation with grid search over (d, k_QS, k_nonQS)."""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from agenet.bayes_net import BnModel, TrainingError, log_posterior, predict_sleep, train
from agenet.domain import N_AGE_GROUPS, Dataset, ValidationError, check
from agenet.feature_selection import MrmrConfig, rank_features
from agenet.gmm import EmConfig
from agenet.metrics import NOMINAL, ORDINAL, alpha, confusion

log = logging.getLogger(__name__)

DEFAULT_GRID = tuple((d, kq, kn) for d in (2, 4, 8, 12) for kq in (1, 2, 3) for kn in (1, 2, 3))


class CvError(RuntimeError):
    pass


@dataclass(frozen=True)
class CvPlan:
    outer_folds: int = 10
    inner_folds: int = 18
    grid: tuple = DEFAULT_GRID
    seed: int = 0
    n_bins: int = 10

    def __post_init__(self):
        grid = tuple(tuple(int(v) for v in g) for g in self.grid)
        if self.outer_folds < 2 or self.inner_folds < 2:
            raise ValueError("fold counts must be at least 2")
        if not grid or any(len(g) != 3 or min(g) < 1 for g in grid):
            raise ValueError("grid must be a non-empty list of positive (d, k_qs, k_nonqs) triples")
        object.__setattr__(self, "grid", grid)


def split_by_patient(dataset: Dataset, n_folds: int, seed: int = 0) -> dict[str, int]:
    """Map each patient id to a fold: seeded shuffle, then round-robin."""
    patients = dataset.patients
    if len(patients) < n_folds:
        raise CvError(f"{len(patients)} patients cannot fill {n_folds} folds")
    order = np.random.default_rng(seed).permutation(len(patients))
    return {patients[p]: i % n_folds for i, p in enumerate(order)}


def fold_members(assignment: dict[str, int], n_folds: int) -> list[list[str]]:
    folds: list[list[str]] = [[] for _ in range(n_folds)]
    for pid in sorted(assignment):
        folds[assignment[pid]].append(pid)
    return folds


def _grid_key(point, score):
    d, kq, kn = point
    # higher score first, then smaller d, then fewer components
    return (-score, d, kq + kn, kq)


@dataclass
class GridResult:
    best: tuple
    scores: dict
    skipped: list
    inner_folds: int
    inner_splits: list = field(default_factory=list)
    skipped_folds: list = field(default_factory=list)


def _n_inner(n_patients: int, requested: int) -> int:
    if n_patients >= requested:
        return requested
    n = max(2, n_patients - 1)
    warnings.warn(f"inner folds reduced from {requested} to {n} ({n_patients} training patients)", stacklevel=3)
    return n


def grid_search(train_set: Dataset, plan: CvPlan, em: EmConfig = EmConfig(), seed: Optional[int] = None) -> GridResult:
    """Choose (d, k_qs, k_nonqs) by inner patient CV scored with ordinal age alpha.

    The mRMR ranking is refitted on every inner training split; since the
    greedy ranking is prefix-consistent, one ranking of length max(d) serves
    every grid point. Inner out-of-fold predictions are pooled across inner
    folds before alpha is computed.
    """
    seed = plan.seed if seed is None else seed
    patients = train_set.patients
    n_inner = _n_inner(len(patients), plan.inner_folds)
    folds = fold_members(split_by_patient(train_set, n_inner, seed), n_inner)
    max_d = min(max(g[0] for g in plan.grid), train_set.n_features)
    grid = [g for g in plan.grid if g[0] <= train_set.n_features]
    if len(grid) < len(plan.grid):
        warnings.warn("grid points with d above the feature count were dropped", stacklevel=2)
    if not grid:
        raise CvError("no grid point fits the available feature count")

    preds = {g: ([], []) for g in grid}
    failed: dict = {}
    splits = []
    skipped_folds = []
    for i, test_patients in enumerate(folds):
        inner_train = train_set.subset(set(patients) - set(test_patients))
        inner_test = train_set.subset(test_patients)
        missing = sorted(set(range(N_AGE_GROUPS)) - {int(r.age_group) for r in inner_train.recordings})
        if missing:
            # no grid point can train here; the fold is unusable rather than the point
            skipped_folds.append(i)
            warnings.warn(f"inner fold {i} skipped: training split lacks age groups {missing}", stacklevel=2)
            continue
        splits.append({"train": sorted(inner_train.patients), "test": sorted(test_patients)})
        ranking = rank_features(inner_train, MrmrConfig(n_bins=plan.n_bins, max_features=max_d))
        for g in grid:
            if g in failed:
                continue
            d, kq, kn = g
            try:
                model = train(inner_train, d, kq, kn, em, ranking.top(d))
            except TrainingError as exc:
                failed[g] = f"inner fold {i}: {exc}"
                warnings.warn(f"grid point {g} skipped: {exc}", stacklevel=2)
                continue
            for rec in inner_test.recordings:
                preds[g][0].append(int(rec.age_group))
                preds[g][1].append(int(log_posterior(model, rec).map_age))
    if len(skipped_folds) == n_inner:
        raise CvError("no inner training split covers all six age groups")

    scores = {}
    for g in grid:
        if g in failed:
            continue
        scores[g] = alpha(preds[g][0], preds[g][1], N_AGE_GROUPS, ORDINAL).value
    if not scores:
        raise CvError("every grid point failed to train: " + "; ".join(f"{g}: {m}" for g, m in failed.items()))
    best = min(scores, key=lambda g: _grid_key(g, scores[g]))
    return GridResult(best, scores, sorted(failed.items()), n_inner, splits, skipped_folds)


@dataclass
class RecordingResult:
    recording_id: str
    patient_id: str
    fold: int
    pma_weeks: float
    true_age: int
    predicted_age: int
    probs: list
    sleep_alpha: Optional[float]
    sleep_alpha_degenerate: bool
    sleep_accuracy: Optional[float]


@dataclass
class FoldResult:
    fold: int
    params: tuple
    grid_scores: dict
    skipped: list
    train_patients: list
    test_patients: list
    inner_splits: list
    features: list
    skipped_inner_folds: list = field(default_factory=list)


@dataclass
class CvReport:
    folds: list
    recordings: list
    confusion: np.ndarray
    accuracy: float
    alpha_ordinal: float
    beyond_adjacent: int

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "alpha_ordinal": self.alpha_ordinal,
            "beyond_adjacent": self.beyond_adjacent,
            "n_recordings": len(self.recordings),
            "confusion": self.confusion.tolist(),
            "per_class_accuracy": [
                None if np.isnan(v) else float(v) for v in confusion_accuracy(self.confusion)
            ],
            "folds": [
                {
                    "fold": f.fold,
                    "d": f.params[0],
                    "k_qs": f.params[1],
                    "k_nonqs": f.params[2],
                    "features": f.features,
                    "grid_scores": [{"d": g[0], "k_qs": g[1], "k_nonqs": g[2], "alpha_ordinal": s}
                                    for g, s in sorted(f.grid_scores.items())],
                    "skipped": [{"point": list(g), "reason": m} for g, m in f.skipped],
                    "train_patients": f.train_patients,
                    "test_patients": f.test_patients,
                    "inner_splits": f.inner_splits,
                    "skipped_inner_folds": f.skipped_inner_folds,
                }
                for f in self.folds
            ],
            "recordings": [vars(r) for r in self.recordings],
        }


def confusion_accuracy(counts: np.ndarray) -> np.ndarray:
    rows = counts.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(rows > 0, np.diag(counts) / rows, np.nan)


def _sleep_agreement(model: BnModel, rec, age: int):
    dec = predict_sleep(model, rec, age)
    if not rec.labeled:
        return None, False, None
    acc = float(np.mean(dec.states == rec.sleep_labels))
    if rec.n_epochs < 2:
        return None, False, acc
    a = alpha(rec.sleep_labels, dec.states, 2, NOMINAL)
    return a.value, a.degenerate, acc


def run_cv(dataset: Dataset, plan: CvPlan = CvPlan(), em: EmConfig = EmConfig()) -> CvReport:
    """Outer patient CV; each fold runs its own grid search and mRMR."""
    check(dataset)
    if any(not r.labeled for r in dataset.recordings):
        raise ValidationError("cross-validation requires sleep labels on every recording")
    assignment = split_by_patient(dataset, plan.outer_folds, plan.seed)
    folds = fold_members(assignment, plan.outer_folds)
    all_patients = set(dataset.patients)

    fold_results = []
    rec_results = []
    for i, test_patients in enumerate(folds):
        try:
            train_set = dataset.subset(all_patients - set(test_patients))
            test_set = dataset.subset(test_patients)
            gr = grid_search(train_set, plan, em, seed=plan.seed + 1 + i)
            d, kq, kn = gr.best
            ranking = rank_features(train_set, MrmrConfig(n_bins=plan.n_bins, max_features=d))
            model = train(train_set, d, kq, kn, em, ranking.top(d))
        except (TrainingError, CvError, ValueError) as exc:
            raise CvError(f"outer fold {i} failed: {exc}") from exc
        log.info("fold %d: d=%d k_qs=%d k_nonqs=%d", i, d, kq, kn)
        fold_results.append(
            FoldResult(
                fold=i,
                params=gr.best,
                grid_scores=gr.scores,
                skipped=gr.skipped,
                train_patients=sorted(train_set.patients),
                test_patients=sorted(test_patients),
                inner_splits=gr.inner_splits,
                features=list(ranking.top(d)),
                skipped_inner_folds=gr.skipped_folds,
            )
        )
        for rec in test_set.recordings:
            post = log_posterior(model, rec)
            s_alpha, s_degen, s_acc = _sleep_agreement(model, rec, post.map_age)
            rec_results.append(
                RecordingResult(
                    recording_id=rec.recording_id,
                    patient_id=rec.patient_id,
                    fold=i,
                    pma_weeks=rec.pma_weeks,
                    true_age=int(rec.age_group),
                    predicted_age=int(post.map_age),
                    probs=[float(p) for p in post.probs],
                    sleep_alpha=s_alpha,
                    sleep_alpha_degenerate=s_degen,
                    sleep_accuracy=s_acc,
                )
            )

    order = {r.recording_id: j for j, r in enumerate(dataset.recordings)}
    rec_results.sort(key=lambda r: order[r.recording_id])
    true = [r.true_age for r in rec_results]
    pred = [r.predicted_age for r in rec_results]
    cm = confusion(true, pred, N_AGE_GROUPS)
    return CvReport(
        folds=fold_results,
        recordings=rec_results,
        confusion=cm.counts,
        accuracy=cm.accuracy,
        alpha_ordinal=alpha(true, pred, N_AGE_GROUPS, ORDINAL).value,
        beyond_adjacent=cm.beyond_adjacent(),
    )
