import math

import numpy as np
import pytest

from agenet.bayes_net import (
    UNIFORM_AGE_LOG_PRIOR,
    BnModel,
    TrainingError,
    log_posterior,
    posterior_from_scores,
    predict_age,
    predict_sleep,
    train,
)
from agenet.domain import Dataset, Recording, SleepState, ValidationError
from agenet.gmm import EmConfig, GmmParams
from agenet.synth import SynthSpec, make_separable_model, sample_dataset, sample_recording, sample_unit

from helpers import brute_force_log_scores, random_model

MU_QS = [0.0, 1.0, 2.0, 3.0, 4.0, 5.0]
MU_NQS = [2.0, 2.5, 3.0, 3.5, 4.0, 4.5]
SIGMA2 = 0.8
Q = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6]


def hand_model(prior=None):
    gmms = tuple(
        (GmmParams([1.0], [[MU_QS[a]]], [[[SIGMA2]]]), GmmParams([1.0], [[MU_NQS[a]]], [[[SIGMA2]]]))
        for a in range(6)
    )
    return BnModel(
        gmms=gmms,
        qs_prob=Q,
        age_log_prior=UNIFORM_AGE_LOG_PRIOR if prior is None else prior,
        feature_indices=(0,),
        shift=[0.0],
        scale=[1.0],
        n_raw_features=1,
    )


def normal_pdf(x, mu, s2):
    return math.exp(-((x - mu) ** 2) / (2 * s2)) / math.sqrt(2 * math.pi * s2)


def flat_model(d=2):
    g = (GmmParams([1.0], [np.zeros(d)], [np.eye(d)]), GmmParams([1.0], [np.ones(d)], [np.eye(d)]))
    return BnModel(
        gmms=(g,) * 6,
        qs_prob=[0.3] * 6,
        age_log_prior=UNIFORM_AGE_LOG_PRIOR,
        feature_indices=tuple(range(d)),
        shift=np.zeros(d),
        scale=np.ones(d),
        n_raw_features=d,
    )


class TestLogPosterior:
    def test_single_epoch_hand_computation(self):
        x = 1.7
        post = log_posterior(hand_model(), np.array([[x]]))
        for a in range(6):
            expected = math.log(1 / 6) + math.log(
                Q[a] * normal_pdf(x, MU_QS[a], SIGMA2) + (1 - Q[a]) * normal_pdf(x, MU_NQS[a], SIGMA2)
            )
            assert post.log_scores[a] == pytest.approx(expected, abs=1e-12)

    def test_age_independent_model_is_uniform(self, rng):
        post = log_posterior(flat_model(), rng.normal(size=(30, 2)))
        np.testing.assert_allclose(post.probs, np.full(6, 1 / 6), atol=1e-15)
        assert post.map_age == 0

    @pytest.mark.parametrize("seed", range(10))
    def test_matches_brute_force_enumeration(self, seed):
        rng = np.random.default_rng(seed)
        model = random_model(rng)
        X = rng.normal(scale=2.0, size=(int(rng.integers(1, 11)), model.dim))
        got = log_posterior(model, X).log_scores
        want = brute_force_log_scores(model, X)
        np.testing.assert_allclose(got, want, rtol=1e-9)

    def test_epoch_order_invariance(self, rng):
        model = random_model(rng, d=3)
        X = rng.normal(size=(200, 3))
        a = log_posterior(model, X).log_scores
        b = log_posterior(model, X[rng.permutation(200)]).log_scores
        np.testing.assert_allclose(a, b, rtol=1e-14)

    def test_constant_shift_invariance(self, rng):
        scores = rng.normal(scale=100, size=6)
        a, b = posterior_from_scores(scores), posterior_from_scores(scores + 12345.678)
        assert a.map_age == b.map_age
        np.testing.assert_allclose(a.probs, b.probs, atol=1e-12)

    def test_no_underflow_on_long_recordings(self):
        model = make_separable_model(3.0, 3, seed=0)
        rec = sample_unit(model, 2, 5000, seed=1)
        post = log_posterior(model, rec)
        assert np.all(np.isfinite(post.log_scores))
        assert post.map_age == 2
        assert abs(post.probs.sum() - 1) <= 1e-12

    def test_dimension_mismatch(self):
        with pytest.raises(ValidationError, match="dimension"):
            log_posterior(hand_model(), np.zeros((3, 2)))

    def test_monotone_evidence(self):
        model = make_separable_model(1.0, 2, seed=4)
        rng = np.random.default_rng(8)
        X, _ = sample_recording(model, 3, 100, rng)
        for n in range(1, 101):
            assert np.all(np.isfinite(log_posterior(model, X[:n]).log_scores))
        assert predict_age(model, X) == 3


class TestPredict:
    def test_argmax(self):
        assert posterior_from_scores([-5, -4, -1, -3, -9, -8]).map_age == 2

    def test_tie_goes_to_lower_index(self):
        assert posterior_from_scores([-5, -4, -1, -3, -1, -8]).map_age == 2

    def test_separated_model_recovers_group(self):
        model = make_separable_model(2.0, 3, 1, 2, seed=11)
        hits = 0
        for trial in range(200):
            g = trial % 6
            hits += predict_age(model, sample_unit(model, g, 20, seed=trial)) == g
        assert hits >= 190


class TestPredictSleep:
    def test_dominant_likelihood(self):
        g = tuple(
            (GmmParams([1.0], [[0.0]], [[[1.0]]]), GmmParams([1.0], [[10.0]], [[[1.0]]])) for _ in range(6)
        )
        model = BnModel(g, [0.5] * 6, UNIFORM_AGE_LOG_PRIOR, (0,), [0.0], [1.0], 1)
        dec = predict_sleep(model, np.array([[0.0]]), 0)
        assert dec.states[0] == SleepState.QS
        assert dec.qs_posterior[0] > 0.999

    def test_prior_dominates_equal_likelihoods(self):
        g = tuple((GmmParams([1.0], [[0.0]], [[[1.0]]]),) * 2 for _ in range(6))
        model = BnModel(g, [1 - 1e-9] * 6, UNIFORM_AGE_LOG_PRIOR, (0,), [0.0], [1.0], 1)
        dec = predict_sleep(model, np.linspace(-3, 3, 25)[:, None], 4)
        assert np.all(dec.states == SleepState.QS)

    def test_hand_posterior(self):
        model = hand_model()
        xs = np.array([-1.0, 0.5, 2.2, 3.9])
        for age in (1, 4):
            dec = predict_sleep(model, xs[:, None], age)
            for i, x in enumerate(xs):
                pq = Q[age] * normal_pdf(x, MU_QS[age], SIGMA2)
                pn = (1 - Q[age]) * normal_pdf(x, MU_NQS[age], SIGMA2)
                assert dec.qs_posterior[i] == pytest.approx(pq / (pq + pn), abs=1e-12)
                assert dec.states[i] == (0 if pq >= pn else 1)


def _labeled_dataset(counts_qs=30, n=100, skip_group=None, rng=None):
    rng = rng or np.random.default_rng(0)
    recs = []
    for a, pma in enumerate((29.0, 31.0, 33.0, 35.0, 37.0, 39.0)):
        if a == skip_group:
            continue
        labels = [0] * counts_qs + [1] * (n - counts_qs)
        recs.append(Recording(f"p{a}", f"r{a}", pma, rng.normal(size=(n, 3)) + a, labels))
    return Dataset(tuple(recs), ("a", "b", "c"))


class TestTrain:
    def test_laplace_smoothed_qs_prob(self):
        model = train(_labeled_dataset(), 2, 1, 1, EmConfig(), [0, 2])
        np.testing.assert_allclose(model.qs_prob, 31 / 102, rtol=0, atol=1e-15)
        assert model.feature_indices == (0, 2)
        np.testing.assert_allclose(np.exp(model.age_log_prior), 1 / 6)

    def test_missing_group_named(self):
        with pytest.raises(TrainingError, match="age group 3"):
            train(_labeled_dataset(skip_group=3), 2, 1, 1, EmConfig(), [0, 1])

    def test_too_few_cell_epochs(self):
        with pytest.raises(TrainingError, match="QS"):
            train(_labeled_dataset(counts_qs=2), 2, 2, 1, EmConfig(), [0, 1])

    def test_requires_labels(self):
        ds = _labeled_dataset()
        recs = list(ds.recordings)
        recs[0] = Recording("p0", "r0", 29.0, recs[0].epochs, None)
        with pytest.raises(TrainingError, match="labels"):
            train(Dataset(tuple(recs), ds.feature_names), 2, 1, 1, EmConfig(), [0, 1])

    def test_selected_length_checked(self):
        with pytest.raises(TrainingError):
            train(_labeled_dataset(), 2, 1, 1, EmConfig(), [0])

    def test_recovers_generating_parameters(self):
        rng = np.random.default_rng(5)
        gmms = []
        for a in range(6):
            qs = GmmParams([1.0], [[a * 1.0, 0.0]], [np.eye(2) * 0.5])
            nqs = GmmParams([0.4, 0.6], [[a * 1.0 - 2, 4.0], [a * 1.0 + 2, 4.0]], [np.eye(2) * 0.5] * 2)
            gmms.append((qs, nqs))
        q = rng.uniform(0.2, 0.5, size=6)
        truth = BnModel(tuple(gmms), q, UNIFORM_AGE_LOG_PRIOR, (0, 1), [0, 0], [1, 1], 2)
        ds = sample_dataset(SynthSpec(truth, (10,) * 6, (300, 300), n_patients=12, seed=3))
        model = train(ds, 2, 1, 2, EmConfig(), [0, 1])
        np.testing.assert_allclose(model.qs_prob, q, atol=0.05)
        for a in range(6):
            for s in range(2):
                fitted = model.gmms[a][s].means * model.scale + model.shift
                true = truth.gmms[a][s].means
                fo, to = np.argsort(fitted[:, 0]), np.argsort(true[:, 0])
                np.testing.assert_allclose(fitted[fo], true[to], atol=0.3)

    def test_model_invariants(self):
        model = train(_labeled_dataset(), 3, 2, 2, EmConfig(), [0, 1, 2])
        assert all(g.dim == 3 for row in model.gmms for g in row)
        assert np.all((model.qs_prob > 0) & (model.qs_prob < 1))
        assert abs(np.exp(model.age_log_prior).sum() - 1) <= 1e-12
