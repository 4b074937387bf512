"""The age-dependent network: training and brain-age / sleep-state inference.

Each recording's age posterior combines, for every age group, the log prior
with the per-epoch log-likelihood marginalised over the two sleep states.
Epochs are treated as conditionally independent given age.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from agenet.domain import (
    N_AGE_GROUPS,
    N_STATES,
    AgeGroup,
    Dataset,
    Recording,
    SleepState,
    ValidationError,
    check,
)
from agenet.gmm import EmConfig, EmResult, FitError, fit_em


class TrainingError(RuntimeError):
    pass


UNIFORM_AGE_LOG_PRIOR = np.full(N_AGE_GROUPS, -math.log(N_AGE_GROUPS))


@dataclass(frozen=True, eq=False)
class BnModel:
    gmms: tuple  # [age][state] -> GmmParams
    qs_prob: np.ndarray
    age_log_prior: np.ndarray
    feature_indices: tuple
    shift: np.ndarray
    scale: np.ndarray
    n_raw_features: int
    training: dict = field(default_factory=dict)

    def __post_init__(self):
        gmms = tuple(tuple(row) for row in self.gmms)
        if len(gmms) != N_AGE_GROUPS or any(len(row) != N_STATES for row in gmms):
            raise ValueError("gmms must be a 6x2 grid")
        d = len(self.feature_indices)
        for a, row in enumerate(gmms):
            for s, g in enumerate(row):
                if g.dim != d:
                    raise ValueError(f"GMM ({a},{SleepState(s).name}) has dimension {g.dim}, expected {d}")
        q = np.array(self.qs_prob, dtype=np.float64)
        prior = np.array(self.age_log_prior, dtype=np.float64)
        # trained models are strictly inside (0, 1); generating models may be degenerate
        if q.shape != (N_AGE_GROUPS,) or np.any(q < 0) or np.any(q > 1):
            raise ValueError("qs_prob must hold 6 probabilities")
        if prior.shape != (N_AGE_GROUPS,) or abs(np.exp(prior).sum() - 1.0) > 1e-12:
            raise ValueError("age_log_prior must be 6 log-probabilities summing to 1")
        shift = np.array(self.shift, dtype=np.float64).reshape(d)
        scale = np.array(self.scale, dtype=np.float64).reshape(d)
        if np.any(scale <= 0):
            raise ValueError("standardization scale must be positive")
        idx = tuple(int(i) for i in self.feature_indices)
        if any(i < 0 or i >= self.n_raw_features for i in idx):
            raise ValueError("feature index outside the raw feature range")
        for a in (q, prior, shift, scale):
            a.setflags(write=False)
        object.__setattr__(self, "gmms", gmms)
        object.__setattr__(self, "qs_prob", q)
        object.__setattr__(self, "age_log_prior", prior)
        object.__setattr__(self, "shift", shift)
        object.__setattr__(self, "scale", scale)
        object.__setattr__(self, "feature_indices", idx)

    @property
    def dim(self) -> int:
        return len(self.feature_indices)

    def transform(self, X: np.ndarray) -> np.ndarray:
        """Select and standardise raw feature columns."""
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.n_raw_features:
            raise ValidationError(
                f"dimension mismatch: data has {X.shape[1]} raw features, model expects {self.n_raw_features}"
            )
        return (X[:, list(self.feature_indices)] - self.shift) / self.scale


@dataclass(frozen=True, eq=False)
class AgePosterior:
    log_scores: np.ndarray
    probs: np.ndarray
    map_age: AgeGroup


@dataclass(frozen=True, eq=False)
class SleepDecoding:
    states: np.ndarray  # SleepState codes per epoch
    qs_posterior: np.ndarray


def _epochs(recording: Union[Recording, np.ndarray]) -> np.ndarray:
    X = recording.epochs if isinstance(recording, Recording) else np.asarray(recording, dtype=np.float64)
    X = np.atleast_2d(X)
    if X.shape[0] == 0:
        raise ValidationError("recording has no epochs")
    return X


def epoch_log_joint(model: BnModel, recording) -> np.ndarray:
    """(n, 6, 2) array of ln p(x_i | s, a) + ln p(s | a)."""
    Z = model.transform(_epochs(recording))
    with np.errstate(divide="ignore"):
        log_q = np.log(model.qs_prob)
        log_not_q = np.log1p(-model.qs_prob)
    out = np.empty((Z.shape[0], N_AGE_GROUPS, N_STATES))
    for a in range(N_AGE_GROUPS):
        out[:, a, 0] = model.gmms[a][0].score_samples(Z) + log_q[a]
        out[:, a, 1] = model.gmms[a][1].score_samples(Z) + log_not_q[a]
    return out


def posterior_from_scores(log_scores: np.ndarray) -> AgePosterior:
    log_scores = np.asarray(log_scores, dtype=np.float64)
    if not np.all(np.isfinite(log_scores)):
        raise FloatingPointError("non-finite age log score")
    p = np.exp(log_scores - log_scores.max())
    p /= p.sum()
    return AgePosterior(log_scores, p, AgeGroup(int(np.argmax(log_scores))))


def log_posterior(model: BnModel, recording) -> AgePosterior:
    """Unnormalised log posterior over the six age groups for one recording."""
    terms = epoch_log_joint(model, recording)
    per_epoch = np.logaddexp(terms[:, :, 0], terms[:, :, 1])
    # exactly rounded sum: independent of epoch order
    scores = np.array([model.age_log_prior[a] + math.fsum(per_epoch[:, a]) for a in range(N_AGE_GROUPS)])
    return posterior_from_scores(scores)


def predict_age(model: BnModel, recording) -> AgeGroup:
    return log_posterior(model, recording).map_age


def predict_sleep(model: BnModel, recording, age: int) -> SleepDecoding:
    """Per-epoch sleep-state decoding at a fixed (usually MAP) age group."""
    age = AgeGroup(age)
    terms = epoch_log_joint(model, recording)[:, age, :]
    with np.errstate(invalid="ignore"):
        qs = np.exp(terms[:, 0] - np.logaddexp(terms[:, 0], terms[:, 1]))
    states = np.where(terms[:, 0] >= terms[:, 1], int(SleepState.QS), int(SleepState.NONQS)).astype(np.int8)
    return SleepDecoding(states, qs)


def _cell_name(a: int, s: int) -> str:
    return f"age group {a} ({AgeGroup(a).label} weeks) / {SleepState(s).name}"


def fit_standardization(X: np.ndarray):
    shift = X.mean(axis=0)
    scale = X.std(axis=0)
    scale = np.where(scale > 0, scale, 1.0)
    return shift, scale


def train(
    dataset: Dataset,
    d: int,
    k_qs: int,
    k_nonqs: int,
    em: EmConfig = EmConfig(),
    selected: Sequence[int] = None,
) -> BnModel:
    """Fit the 12 (age, state) mixtures and the per-age QS probabilities.

    ``selected`` lists the raw feature indices to use (e.g. an mRMR
    ranking prefix); it must have length ``d``. QS probabilities are
    Laplace-smoothed counts, ``(n_qs + 1) / (n + 2)``.
    """
    check(dataset)
    if selected is None:
        selected = list(range(d))
    selected = [int(i) for i in selected]
    if len(selected) != d:
        raise TrainingError(f"selected feature list has length {len(selected)}, expected d={d}")
    if len(set(selected)) != d or any(not 0 <= i < dataset.n_features for i in selected):
        raise TrainingError("selected features must be distinct valid indices")
    if any(not r.labeled for r in dataset.recordings):
        raise TrainingError("supervised training requires sleep labels on every recording")

    present = {int(r.age_group) for r in dataset.recordings}
    for a in range(N_AGE_GROUPS):
        if a not in present:
            raise TrainingError(f"no training recordings in age group {a} ({AgeGroup(a).label} weeks)")

    X, ages, states = dataset.stacked()
    X = X[:, selected]
    shift, scale = fit_standardization(X)
    Z = (X - shift) / scale

    ks = (k_qs, k_nonqs)
    need = max(ks) + 1
    gmms = []
    qs_prob = np.empty(N_AGE_GROUPS)
    cells = []
    for a in range(N_AGE_GROUPS):
        in_age = ages == a
        n_qs = int(np.sum(in_age & (states == 0)))
        qs_prob[a] = (n_qs + 1) / (int(in_age.sum()) + 2)
        row = []
        for s in range(N_STATES):
            mask = in_age & (states == s)
            n = int(mask.sum())
            if n < need:
                raise TrainingError(f"cell {_cell_name(a, s)} has {n} labeled epochs, need at least {need}")
            try:
                res: EmResult = fit_em(Z[mask], ks[s], em, cell=_cell_name(a, s))
            except FitError as exc:
                raise TrainingError(str(exc)) from exc
            row.append(res.params)
            cells.append(
                {
                    "age": a,
                    "state": SleepState(s).name,
                    "n_epochs": n,
                    "k": ks[s],
                    "log_likelihood": res.log_likelihood,
                    "n_iter": res.n_iter,
                    "converged": res.converged,
                }
            )
        gmms.append(tuple(row))

    training = {
        "d": d,
        "k_qs": k_qs,
        "k_nonqs": k_nonqs,
        "em": {
            "max_iters": em.max_iters,
            "tol": em.tol,
            "reg_eps": em.reg_eps,
            "n_restarts": em.n_restarts,
            "seed": em.seed,
        },
        "cells": cells,
    }
    return BnModel(
        gmms=tuple(gmms),
        qs_prob=qs_prob,
        age_log_prior=UNIFORM_AGE_LOG_PRIOR.copy(),
        feature_indices=tuple(selected),
        shift=shift,
        scale=scale,
        n_raw_features=dataset.n_features,
        training=training,
    )
