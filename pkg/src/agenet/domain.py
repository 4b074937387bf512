"""Core data types: age groups, sleep states, recordings and datasets."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

N_AGE_GROUPS = 6
N_STATES = 2
N_AUGMENTED = N_AGE_GROUPS * N_STATES

# lower-inclusive bin edges in PMA weeks
AGE_EDGES = (30.0, 32.0, 34.0, 36.0, 38.0)


class ValidationError(ValueError):
    """Input data violates a structural invariant."""


class AgeGroup(enum.IntEnum):
    LT30 = 0
    W30_31 = 1
    W32_33 = 2
    W34_35 = 3
    W36_37 = 4
    GE38 = 5

    @property
    def bounds(self) -> tuple[float, float]:
        """Half-open PMA interval ``[lower, upper)`` in weeks."""
        lower = -math.inf if self == 0 else AGE_EDGES[self - 1]
        upper = math.inf if self == N_AGE_GROUPS - 1 else AGE_EDGES[self]
        return lower, upper

    @property
    def label(self) -> str:
        return ("<30", "30-31", "32-33", "34-35", "36-37", ">=38")[self]


class SleepState(enum.IntEnum):
    QS = 0
    NONQS = 1

    @classmethod
    def parse(cls, text: str) -> "SleepState":
        try:
            return cls[text.strip().upper().replace("-", "").replace("_", "")]
        except KeyError:
            raise ValidationError(f"unknown sleep label {text!r} (expected QS or NONQS)") from None


def age_group_of(pma_weeks: float) -> AgeGroup:
    if not isinstance(pma_weeks, (int, float, np.floating, np.integer)) or not math.isfinite(pma_weeks):
        raise ValidationError(f"PMA must be a finite number, got {pma_weeks!r}")
    if pma_weeks <= 0:
        raise ValidationError(f"PMA must be positive, got {pma_weeks!r}")
    return AgeGroup(sum(pma_weeks >= edge for edge in AGE_EDGES))


def augment(age: int, state: int) -> int:
    """Augmented 12-class label combining age group and sleep state."""
    age, state = AgeGroup(age), SleepState(state)
    return int(age) * N_STATES + int(state)


def split_augmented(code: int) -> tuple[AgeGroup, SleepState]:
    if not 0 <= code < N_AUGMENTED:
        raise ValidationError(f"augmented label out of range: {code}")
    return AgeGroup(code // N_STATES), SleepState(code % N_STATES)


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Recording:
    """One EEG recording: an (n, m) matrix of epoch features plus metadata.

    Construction only coerces types; invariants are checked by :func:`validate`
    so that malformed input can be reported rather than rejected outright.
    """

    patient_id: str
    recording_id: str
    pma_weeks: float
    epochs: np.ndarray
    sleep_labels: Optional[np.ndarray] = None

    def __post_init__(self):
        epochs = np.array(self.epochs, dtype=np.float64)
        if epochs.ndim == 1:
            epochs = epochs.reshape(1, -1) if epochs.size else epochs.reshape(0, 0)
        object.__setattr__(self, "epochs", _frozen(epochs))
        if self.sleep_labels is not None:
            labels = np.array([int(SleepState(s)) for s in self.sleep_labels], dtype=np.int8)
            object.__setattr__(self, "sleep_labels", _frozen(labels))
        object.__setattr__(self, "pma_weeks", float(self.pma_weeks))

    @property
    def n_epochs(self) -> int:
        return self.epochs.shape[0]

    @property
    def n_features(self) -> int:
        return self.epochs.shape[1]

    @property
    def age_group(self) -> AgeGroup:
        return age_group_of(self.pma_weeks)

    @property
    def labeled(self) -> bool:
        return self.sleep_labels is not None


@dataclass(frozen=True, eq=False)
class Dataset:
    recordings: tuple[Recording, ...]
    feature_names: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "recordings", tuple(self.recordings))
        object.__setattr__(self, "feature_names", tuple(self.feature_names))

    def __len__(self) -> int:
        return len(self.recordings)

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    @property
    def patients(self) -> list[str]:
        return sorted({r.patient_id for r in self.recordings})

    def subset(self, patients) -> "Dataset":
        keep = set(patients)
        return Dataset(tuple(r for r in self.recordings if r.patient_id in keep), self.feature_names)

    def stacked(self, require_labels: bool = True):
        """Pool all epochs into ``(X, age_index, state_index)`` arrays."""
        if not self.recordings:
            raise ValidationError("dataset has no recordings")
        if require_labels:
            missing = [r.recording_id for r in self.recordings if not r.labeled]
            if missing:
                raise ValidationError(f"recordings without sleep labels: {', '.join(missing[:5])}")
        X = np.concatenate([r.epochs for r in self.recordings], axis=0)
        ages = np.concatenate([np.full(r.n_epochs, int(r.age_group), dtype=np.int64) for r in self.recordings])
        states = None
        if require_labels:
            states = np.concatenate([r.sleep_labels for r in self.recordings]).astype(np.int64)
        return X, ages, states


@dataclass(frozen=True)
class Diagnostic:
    recording_id: Optional[str]
    field: str
    message: str
    epoch: Optional[int] = None

    def __str__(self) -> str:
        where = self.recording_id or "<dataset>"
        if self.epoch is not None:
            where += f"[epoch {self.epoch}]"
        return f"{where}: {self.field}: {self.message}"


def validate(dataset: Dataset) -> list[Diagnostic]:
    """Check every type invariant; returns one diagnostic per violation."""
    out: list[Diagnostic] = []
    m = dataset.n_features
    seen_ids = set()
    for rec in dataset.recordings:
        rid = rec.recording_id
        if rid in seen_ids:
            out.append(Diagnostic(rid, "recording_id", "duplicate recording id"))
        seen_ids.add(rid)
        if not math.isfinite(rec.pma_weeks) or rec.pma_weeks <= 0:
            out.append(Diagnostic(rid, "pma_weeks", f"must be finite and positive, got {rec.pma_weeks}"))
        if rec.epochs.ndim != 2 or rec.n_epochs == 0:
            out.append(Diagnostic(rid, "epochs", "recording has no epochs"))
            continue
        if rec.n_features != m:
            out.append(Diagnostic(rid, "epochs", f"feature dimension {rec.n_features} != {m} feature names"))
        bad_rows = np.flatnonzero(~np.isfinite(rec.epochs).all(axis=1))
        for i in bad_rows:
            out.append(Diagnostic(rid, "epochs", "non-finite feature value", epoch=int(i)))
        if rec.sleep_labels is not None and len(rec.sleep_labels) != rec.n_epochs:
            out.append(
                Diagnostic(rid, "sleep_labels", f"{len(rec.sleep_labels)} labels for {rec.n_epochs} epochs")
            )
    return out


def check(dataset: Dataset) -> Dataset:
    """Raise :class:`ValidationError` listing every diagnostic, else return the dataset."""
    diags = validate(dataset)
    if diags:
        raise ValidationError("invalid dataset:\n  " + "\n  ".join(map(str, diags)))
    return dataset


def make_dataset(recordings: Sequence[Recording], feature_names: Optional[Sequence[str]] = None) -> Dataset:
    recordings = tuple(recordings)
    if feature_names is None:
        m = recordings[0].n_features if recordings else 0
        feature_names = [f"f_{j}" for j in range(m)]
    return Dataset(recordings, tuple(feature_names))
