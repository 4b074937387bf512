"""Ancestral sampling from a BnModel to build labeled synthetic datasets."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from agenet.bayes_net import UNIFORM_AGE_LOG_PRIOR, BnModel
from agenet.domain import N_AGE_GROUPS, Dataset, Recording
from agenet.gmm import GmmParams

# PMA sampling range per group; the open ends are clipped to 27 and 42 weeks
PMA_RANGES = ((27.0, 30.0), (30.0, 32.0), (32.0, 34.0), (34.0, 36.0), (36.0, 38.0), (38.0, 42.0))

# recordings per age group in the reference cohort
REFERENCE_GROUP_SIZES = (8, 17, 21, 14, 19, 23)


@dataclass(frozen=True, eq=False)
class SynthSpec:
    model: BnModel
    recordings_per_group: tuple = REFERENCE_GROUP_SIZES
    epochs_per_recording: tuple = (100, 300)  # inclusive range
    n_patients: int = 40
    noise_features: int = 0
    seed: int = 0

    def __post_init__(self):
        rpg = tuple(int(v) for v in self.recordings_per_group)
        if len(rpg) != N_AGE_GROUPS or min(rpg) < 0 or sum(rpg) < 1:
            raise ValueError("recordings_per_group needs 6 non-negative counts with at least one recording")
        lo, hi = (int(v) for v in self.epochs_per_recording)
        if not 1 <= lo <= hi:
            raise ValueError("epochs_per_recording must be a range of positive integers")
        if not 1 <= self.n_patients <= sum(rpg):
            raise ValueError("n_patients must be between 1 and the number of recordings")
        if self.noise_features < 0:
            raise ValueError("noise_features must be non-negative")
        if self.model.n_raw_features != self.model.dim or self.model.feature_indices != tuple(range(self.model.dim)):
            raise ValueError("generating model must use its raw features 0..d-1 directly")
        object.__setattr__(self, "recordings_per_group", rpg)
        object.__setattr__(self, "epochs_per_recording", (lo, hi))


def _sample_gmm(gmm: GmmParams, n: int, rng: np.random.Generator) -> np.ndarray:
    comp = rng.choice(gmm.n_components, size=n, p=gmm.weights)
    z = rng.standard_normal((n, gmm.dim))
    return gmm.means[comp] + np.einsum("nij,nj->ni", gmm.chols[comp], z)


def sample_recording(model: BnModel, age: int, n_epochs: int, rng: np.random.Generator, noise_features: int = 0):
    """Draw ``(raw epochs, sleep states)`` for one recording at a fixed age group."""
    states = np.where(rng.random(n_epochs) < model.qs_prob[age], 0, 1).astype(np.int8)
    Z = np.empty((n_epochs, model.dim))
    for s in (0, 1):
        idx = np.flatnonzero(states == s)
        if idx.size:
            Z[idx] = _sample_gmm(model.gmms[age][s], idx.size, rng)
    X = Z * model.scale + model.shift
    if noise_features:
        X = np.hstack([X, rng.standard_normal((n_epochs, noise_features))])
    return X, states


def sample_dataset(spec: SynthSpec) -> Dataset:
    """Sample recordings group by group; each gets its own child seed.

    Recordings are spread over patients by a seeded shuffle followed by
    round-robin assignment, so a patient typically contributes recordings
    at several ages.
    """
    total = sum(spec.recordings_per_group)
    root = np.random.SeedSequence(spec.seed)
    assign_seq, *rec_seqs = root.spawn(total + 1)
    order = np.random.default_rng(assign_seq).permutation(total)
    patient_of = np.empty(total, dtype=np.int64)
    patient_of[order] = np.arange(total) % spec.n_patients

    lo, hi = spec.epochs_per_recording
    recordings = []
    r = 0
    for age, count in enumerate(spec.recordings_per_group):
        for _ in range(count):
            rng = np.random.default_rng(rec_seqs[r])
            pma_lo, pma_hi = PMA_RANGES[age]
            pma = float(rng.uniform(pma_lo, pma_hi))
            n_epochs = int(rng.integers(lo, hi + 1))
            X, states = sample_recording(spec.model, age, n_epochs, rng, spec.noise_features)
            recordings.append(
                Recording(
                    patient_id=f"P{patient_of[r]:03d}",
                    recording_id=f"R{r:04d}",
                    pma_weeks=pma,
                    epochs=X,
                    sleep_labels=states,
                )
            )
            r += 1
    m = spec.model.dim + spec.noise_features
    return Dataset(tuple(recordings), tuple(f"f_{j}" for j in range(m)))


def _directions(d: int):
    age_dir = np.ones(d) / np.sqrt(d)
    if d == 1:
        return age_dir, np.ones(1)
    state_dir = np.where(np.arange(d) % 2 == 0, 1.0, -1.0)
    state_dir -= state_dir @ age_dir * age_dir
    return age_dir, state_dir / np.linalg.norm(state_dir)


def make_separable_model(
    separation: float,
    d: int,
    k_qs: int = 1,
    k_nonqs: int = 1,
    seed: int = 0,
    state_gap: float = 3.0,
) -> BnModel:
    """Generating model with age groups strung along one axis.

    Group means sit ``separation`` apart along a fixed direction, so
    adjacent groups are the most confusable. QS and non-QS differ by
    ``state_gap`` along an orthogonal direction; within-state component
    offsets are shared across ages. Covariances are identity and q_a is
    drawn from [0.2, 0.5].
    """
    if not separation > 0:
        raise ValueError("separation must be positive")
    if d < 1 or k_qs < 1 or k_nonqs < 1:
        raise ValueError("d, k_qs and k_nonqs must be positive")
    rng = np.random.default_rng(seed)
    age_dir, state_dir = _directions(d)
    ks = (k_qs, k_nonqs)
    offsets, weights = [], []
    for s in (0, 1):
        off = rng.normal(scale=1.0, size=(ks[s], d)) if ks[s] > 1 else np.zeros((1, d))
        off -= off.mean(axis=0)
        w = rng.dirichlet(np.full(ks[s], 5.0)) if ks[s] > 1 else np.ones(1)
        offsets.append(off + (state_gap / 2.0) * (1 if s == 0 else -1) * state_dir)
        weights.append(w)
    qs_prob = rng.uniform(0.2, 0.5, size=N_AGE_GROUPS)

    gmms = []
    for a in range(N_AGE_GROUPS):
        center = separation * (a - (N_AGE_GROUPS - 1) / 2.0) * age_dir
        row = []
        for s in (0, 1):
            cov = np.broadcast_to(np.eye(d), (ks[s], d, d))
            row.append(GmmParams(weights[s], center + offsets[s], cov))
        gmms.append(tuple(row))
    return BnModel(
        gmms=tuple(gmms),
        qs_prob=qs_prob,
        age_log_prior=UNIFORM_AGE_LOG_PRIOR.copy(),
        feature_indices=tuple(range(d)),
        shift=np.zeros(d),
        scale=np.ones(d),
        n_raw_features=d,
        training={"synthetic": {"separation": separation, "seed": seed}},
    )


def make_inseparable_model(d: int, k_qs: int = 1, k_nonqs: int = 1, seed: int = 0, q: float = 0.35) -> BnModel:
    """Every age group shares one set of state mixtures and one QS probability."""
    base = make_separable_model(1.0, d, k_qs, k_nonqs, seed)
    row = base.gmms[0]
    return BnModel(
        gmms=tuple(row for _ in range(N_AGE_GROUPS)),
        qs_prob=np.full(N_AGE_GROUPS, q),
        age_log_prior=UNIFORM_AGE_LOG_PRIOR.copy(),
        feature_indices=base.feature_indices,
        shift=base.shift,
        scale=base.scale,
        n_raw_features=d,
        training={"synthetic": {"inseparable": True, "seed": seed}},
    )


def bhattacharyya_gaussian(mu1, cov1, mu2, cov2) -> float:
    """Bhattacharyya distance between two multivariate normals."""
    mu1, mu2 = np.asarray(mu1, float), np.asarray(mu2, float)
    cov = (np.asarray(cov1, float) + np.asarray(cov2, float)) / 2.0
    diff = mu1 - mu2
    term1 = diff @ np.linalg.solve(cov, diff) / 8.0
    _, ld = np.linalg.slogdet(cov)
    _, ld1 = np.linalg.slogdet(cov1)
    _, ld2 = np.linalg.slogdet(cov2)
    return float(term1 + 0.5 * (ld - 0.5 * (ld1 + ld2)))


def group_moments(model: BnModel, age: int):
    """Mean and covariance of the age group's marginal feature distribution."""
    q = model.qs_prob[age]
    parts = []
    for s, ps in ((0, q), (1, 1.0 - q)):
        g = model.gmms[age][s]
        for j in range(g.n_components):
            parts.append((ps * g.weights[j], g.means[j], g.covariances[j]))
    mean = sum(w * m for w, m, _ in parts)
    cov = sum(w * (c + np.outer(m - mean, m - mean)) for w, m, c in parts)
    return mean, cov


def group_distance(model: BnModel, a: int, b: int) -> float:
    """Bhattacharyya distance between moment-matched Gaussians of two groups."""
    return bhattacharyya_gaussian(*group_moments(model, a), *group_moments(model, b))


def sample_unit(model: BnModel, age: int, n_epochs: int, seed: int) -> Recording:
    rng = np.random.default_rng(seed)
    X, states = sample_recording(model, age, n_epochs, rng)
    pma = float(rng.uniform(*PMA_RANGES[age]))
    return Recording("P-probe", f"probe-{age}-{seed}", pma, X, states)


def dataset_from(model: BnModel, ages: Sequence[int], n_epochs: int, seed: int) -> Dataset:
    recs = [sample_unit(model, a, n_epochs, seed * 1000 + i) for i, a in enumerate(ages)]
    return Dataset(tuple(recs), tuple(f"f_{j}" for j in range(model.n_raw_features)))
