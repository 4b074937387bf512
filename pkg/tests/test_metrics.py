import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from agenet.metrics import (
    NOMINAL,
    ORDINAL,
    AgreementTable,
    alpha,
    confusion,
    interpret_alpha,
    krippendorff_alpha,
)

from helpers import alpha_pairable, nominal_metric, ordinal_metric

pair_lists = st.lists(st.tuples(st.integers(0, 5), st.integers(0, 5)), min_size=2, max_size=40)


class TestConfusion:
    def test_perfect(self):
        cm = confusion([0, 1, 2, 5], [0, 1, 2, 5], 6)
        assert np.array_equal(cm.counts, np.diag([1, 1, 1, 0, 0, 1]))
        assert cm.accuracy == 1.0

    def test_single_column(self):
        cm = confusion([0, 1, 2, 3], [2, 2, 2, 2], 6)
        assert np.count_nonzero(cm.counts.sum(axis=0)) == 1
        assert cm.counts[:, 2].sum() == 4

    def test_random_accuracy_matches_count(self, rng):
        t = rng.integers(0, 6, size=200)
        p = np.where(rng.random(200) < 0.6, t, rng.integers(0, 6, size=200))
        cm = confusion(t, p, 6)
        assert cm.total == 200
        assert cm.accuracy == sum(int(a == b) for a, b in zip(t, p)) / 200

    def test_per_class_undefined_rows(self):
        cm = confusion([0, 0, 1], [0, 1, 1], 3)
        acc = cm.per_class_accuracy
        assert acc[0] == 0.5 and acc[1] == 1.0 and np.isnan(acc[2])

    def test_beyond_adjacent(self):
        assert confusion([0, 0, 3, 5], [1, 2, 0, 5], 6).beyond_adjacent() == 2

    def test_errors(self):
        with pytest.raises(ValueError):
            confusion([0, 1], [0], 6)
        with pytest.raises(ValueError):
            confusion([0, 6], [0, 1], 6)


class TestAlpha:
    def test_identical(self):
        for scale in (NOMINAL, ORDINAL):
            assert alpha([0, 1, 2, 3, 1], [0, 1, 2, 3, 1], 6, scale).value == 1.0

    def test_nominal_hand_table(self):
        # coincidences o00=o11=10, o01=o10=10; n0=n1=20, n=40
        # alpha = 1 - (n-1)(o01+o10)/(2 n0 n1) = 1 - 39*20/800 = 1/40
        pairs = [(0, 0)] * 5 + [(1, 1)] * 5 + [(0, 1)] * 5 + [(1, 0)] * 5
        a = krippendorff_alpha(AgreementTable(tuple(pairs), 2, NOMINAL))
        assert a.value == pytest.approx(0.025, abs=1e-12)
        assert a.observed == pytest.approx(0.5, abs=1e-15)
        assert a.expected == pytest.approx(800 / 1560, abs=1e-15)

    def test_ordinal_hand_table(self):
        # ratings a=[0,0,1,2,2], b=[0,1,1,2,1]; coincidence marginals n=(3,4,3), n=10
        # delta(0,1) = (3+4 - 3.5)^2 = 12.25, delta(1,2) = (4+3-3.5)^2 = 12.25,
        # delta(0,2) = (10 - 3)^2 = 49
        # observed: o01=o10=1, o12=o21=1 -> D_o = (2*12.25 + 2*12.25)/10 = 4.9
        # expected: 2*(3*4*12.25 + 4*3*12.25 + 3*3*49)/(10*9) = 2*(147+147+441)/90 = 16.333...
        a = alpha([0, 0, 1, 2, 2], [0, 1, 1, 2, 1], 3, ORDINAL)
        assert a.observed == pytest.approx(4.9, abs=1e-12)
        assert a.expected == pytest.approx(1470 / 90, abs=1e-12)
        assert a.value == pytest.approx(1 - 4.9 / (1470 / 90), abs=1e-12)

    @pytest.mark.parametrize(
        "a,b,c",
        [
            ([0, 1, 2, 3, 4, 5, 0, 2], [0, 1, 3, 3, 5, 5, 1, 2], 6),
            ([0, 0, 1, 1, 2, 2, 3], [1, 0, 1, 2, 2, 3, 3], 4),
            ([5, 4, 3, 2, 1, 0, 5, 5], [0, 4, 3, 2, 1, 0, 5, 4], 6),
        ],
    )
    def test_matches_pairable_definition(self, a, b, c):
        for scale, metric in ((NOMINAL, nominal_metric), (ORDINAL, ordinal_metric)):
            want = float(alpha_pairable(a, b, metric))
            assert alpha(a, b, c, scale).value == pytest.approx(want, abs=1e-12)

    def test_adjacent_beats_full_span(self):
        true = [0, 1, 2, 3, 4, 5] * 4
        adjacent = list(true)
        far = list(true)
        for i in range(0, 24, 4):
            adjacent[i] = true[i] + 1 if true[i] < 5 else 4
            far[i] = 5 if true[i] < 3 else 0
        a_adj = alpha(true, adjacent, 6, ORDINAL).value
        a_far = alpha(true, far, 6, ORDINAL).value
        assert sum(x != y for x, y in zip(true, adjacent)) == sum(x != y for x, y in zip(true, far))
        assert a_adj > a_far

    def test_degenerate(self):
        a = alpha([2, 2, 2], [2, 2, 2], 6, ORDINAL)
        assert a.value == 1.0 and a.degenerate

    def test_needs_two_units(self):
        with pytest.raises(ValueError):
            alpha([1], [1], 3)

    @given(pair_lists, st.permutations(range(6)))
    def test_nominal_relabel_invariance(self, pairs, perm):
        a = krippendorff_alpha(AgreementTable(tuple(pairs), 6, NOMINAL))
        relabeled = tuple((perm[x], perm[y]) for x, y in pairs)
        b = krippendorff_alpha(AgreementTable(relabeled, 6, NOMINAL))
        assert a.degenerate == b.degenerate
        assert a.value == pytest.approx(b.value, abs=1e-12)

    @given(pair_lists)
    def test_ordinal_reversal_invariance(self, pairs):
        a = krippendorff_alpha(AgreementTable(tuple(pairs), 6, ORDINAL))
        b = krippendorff_alpha(AgreementTable(tuple((5 - x, 5 - y) for x, y in pairs), 6, ORDINAL))
        assert a.value == pytest.approx(b.value, abs=1e-12)

    @given(pair_lists)
    def test_one_iff_no_observed_disagreement(self, pairs):
        a = krippendorff_alpha(AgreementTable(tuple(pairs), 6, NOMINAL))
        if not a.degenerate:
            assert (a.value == 1.0) == (a.observed == 0.0)

    @given(pair_lists)
    def test_fixing_a_disagreement_increases_nominal_alpha(self, pairs):
        dis = [i for i, (x, y) in enumerate(pairs) if x != y]
        if not dis:
            return
        before = krippendorff_alpha(AgreementTable(tuple(pairs), 6, NOMINAL))
        fixed = list(pairs)
        x, _ = fixed[dis[0]]
        fixed[dis[0]] = (x, x)
        after = krippendorff_alpha(AgreementTable(tuple(fixed), 6, NOMINAL))
        if not before.degenerate and not after.degenerate:
            assert after.value > before.value - 1e-12

    @given(
        st.integers(1, 3),
        st.lists(st.tuples(st.integers(0, 5), st.integers(0, 5)).filter(lambda p: p[0] != p[1]), min_size=1, max_size=8),
    )
    def test_ordinal_not_below_maximally_distant(self, reps, disagreements):
        """Agreeing units over all categories plus some disagreements, versus the
        same number of disagreements all spanning the full 0..5 range."""
        base = [(c, c) for c in range(6)] * reps
        a = krippendorff_alpha(AgreementTable(tuple(base + disagreements), 6, ORDINAL))
        b = krippendorff_alpha(AgreementTable(tuple(base + [(0, 5)] * len(disagreements)), 6, ORDINAL))
        assert a.value >= b.value - 1e-12


class TestInterpret:
    def test_bands(self):
        assert interpret_alpha(0.91) == "almost-perfect"
        assert interpret_alpha(1.0) == "almost-perfect"
        assert interpret_alpha(0.8) == "almost-perfect"
        assert interpret_alpha(0.79) == "tentative"
        assert interpret_alpha(0.3) == "unreliable"

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            interpret_alpha(1.2)
