from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kddvae.errors import EvalError
from kddvae.metrics import (
    LabeledScores,
    average_ranks,
    auroc,
    per_category_eval,
    roc_curve,
    trapezoid_area,
)
from kddvae.schema import AttackCategory


def pair_counting_auroc(scores, labels) -> float:
    """Naive O(n^2) oracle: (concordant + ties/2) / (P*N)."""
    scores = np.asarray(scores)
    labels = np.asarray(labels, dtype=bool)
    pos = scores[labels]
    neg = scores[~labels]
    concordant = ties = 0
    for sp in pos:
        for sn in neg:
            if sp > sn:
                concordant += 1
            elif sp == sn:
                ties += 1
    return (concordant + 0.5 * ties) / (len(pos) * len(neg))


def threshold_enumeration_roc(scores, labels):
    """Naive oracle for the curve: evaluate 'score > tau' at every distinct
    score plus one below the minimum."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=bool)
    P = labels.sum()
    N = (~labels).sum()
    taus = sorted(set(scores), reverse=True)
    taus.append(scores.min() - 1.0)
    points = []
    for tau in taus:
        predicted = scores > tau
        tp = int((predicted & labels).sum())
        fp = int((predicted & ~labels).sum())
        points.append((fp / N, tp / P))
    return points


def random_instance(rng, n=200, tie_fraction=0.3):
    scores = rng.standard_normal(n)
    quantized = np.round(scores[: int(n * tie_fraction)], 1)
    scores[: len(quantized)] = quantized  # inject ties
    labels = rng.random(n) < 0.4
    if not labels.any():
        labels[0] = True
    if labels.all():
        labels[0] = False
    return scores, labels


class TestRocCurve:
    def test_perfect_separation(self):
        ls = LabeledScores(scores=[0.9, 0.1], is_anomaly=[True, False])
        curve = roc_curve(ls)
        assert curve.auroc == 1.0
        points = list(zip(curve.fpr, curve.tpr))
        assert (0.0, 1.0) in points
        assert points[0] == (0.0, 0.0)
        assert points[-1] == (1.0, 1.0)

    def test_all_tied_diagonal(self):
        ls = LabeledScores(scores=[1.0, 1.0, 1.0, 1.0], is_anomaly=[True, False, True, False])
        curve = roc_curve(ls)
        np.testing.assert_array_equal(curve.fpr, [0.0, 1.0])
        np.testing.assert_array_equal(curve.tpr, [0.0, 1.0])
        assert curve.auroc == 0.5

    def test_matches_threshold_enumeration_oracle(self):
        rng = np.random.default_rng(0)
        for _ in range(25):
            scores, labels = random_instance(rng)
            curve = roc_curve(LabeledScores(scores=scores, is_anomaly=labels))
            oracle = threshold_enumeration_roc(scores, labels)
            got = list(zip(curve.fpr, curve.tpr))
            assert got == oracle

    def test_thresholds_reproduce_points(self):
        rng = np.random.default_rng(1)
        scores, labels = random_instance(rng, n=120)
        curve = roc_curve(LabeledScores(scores=scores, is_anomaly=labels))
        for i in range(curve.n_points):
            predicted = scores > curve.thresholds[i]
            assert int((predicted & labels).sum()) == curve.tp[i]
            assert int((predicted & ~labels).sum()) == curve.fp[i]

    def test_monotone_and_bracketed(self):
        rng = np.random.default_rng(2)
        for _ in range(10):
            scores, labels = random_instance(rng)
            curve = roc_curve(LabeledScores(scores=scores, is_anomaly=labels))
            assert np.all(np.diff(curve.fpr) >= 0)
            assert np.all(np.diff(curve.tpr) >= 0)
            assert curve.fpr[0] == 0.0 and curve.tpr[0] == 0.0
            assert curve.fpr[-1] == 1.0 and curve.tpr[-1] == 1.0
            assert np.all((curve.fpr >= 0) & (curve.fpr <= 1))
            assert np.all((curve.tpr >= 0) & (curve.tpr <= 1))

    def test_stored_auroc_is_trapezoid_of_points(self):
        rng = np.random.default_rng(3)
        scores, labels = random_instance(rng)
        curve = roc_curve(LabeledScores(scores=scores, is_anomaly=labels))
        assert curve.auroc == trapezoid_area(curve.fpr, curve.tpr)

    def test_single_class_rejected(self):
        with pytest.raises(EvalError):
            roc_curve(LabeledScores(scores=[1.0, 2.0], is_anomaly=[True, True]))
        with pytest.raises(EvalError):
            auroc(LabeledScores(scores=[1.0, 2.0], is_anomaly=[False, False]))


class TestAuroc:
    def test_perfect(self):
        assert auroc(LabeledScores(scores=[3.0, 2.0, 1.0], is_anomaly=[True, True, False])) == 1.0

    def test_matches_pair_counting_exactly(self):
        rng = np.random.default_rng(4)
        for _ in range(30):
            scores, labels = random_instance(rng)
            ls = LabeledScores(scores=scores, is_anomaly=labels)
            assert auroc(ls) == pair_counting_auroc(scores, labels)

    def test_rank_vs_trapezoid_1e12(self):
        rng = np.random.default_rng(5)
        for _ in range(30):
            scores, labels = random_instance(rng, n=400)
            ls = LabeledScores(scores=scores, is_anomaly=labels)
            assert abs(auroc(ls) - roc_curve(ls).auroc) <= 1e-12

    def test_independent_labels_near_half(self):
        rng = np.random.default_rng(6)
        scores = rng.standard_normal(10_000)
        labels = rng.random(10_000) < 0.5
        ls = LabeledScores(scores=scores, is_anomaly=labels)
        assert abs(auroc(ls) - 0.5) < 0.05

    def test_monotone_transform_invariance(self):
        rng = np.random.default_rng(7)
        scores, labels = random_instance(rng)
        a1 = auroc(LabeledScores(scores=scores, is_anomaly=labels))
        a2 = auroc(LabeledScores(scores=2.0 * scores + 1.0, is_anomaly=labels))
        assert a1 == a2

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=25, deadline=None)
    def test_label_reversal_complement(self, seed):
        rng = np.random.default_rng(seed)
        scores = rng.standard_normal(60)  # continuous, ties impossible
        labels = rng.random(60) < 0.5
        if not labels.any() or labels.all():
            labels[0] = True
            labels[1] = False
        a = auroc(LabeledScores(scores=scores, is_anomaly=labels))
        b = auroc(LabeledScores(scores=scores, is_anomaly=~labels))
        assert a + b == pytest.approx(1.0, abs=1e-12)

    def test_average_ranks(self):
        np.testing.assert_array_equal(
            average_ranks(np.array([10.0, 20.0, 20.0, 30.0])), [1.0, 2.5, 2.5, 4.0]
        )

    def test_exact_rational_trapezoid_matches_oracle(self):
        # The curve's integer counts admit an exact trapezoid; it must equal
        # the pair-counting value as a rational number.
        rng = np.random.default_rng(8)
        scores, labels = random_instance(rng, n=150)
        ls = LabeledScores(scores=scores, is_anomaly=labels)
        curve = roc_curve(ls)
        P, N = curve.n_pos, curve.n_neg
        area = Fraction(0)
        for i in range(curve.n_points - 1):
            dx = Fraction(int(curve.fp[i + 1] - curve.fp[i]), N)
            ysum = Fraction(int(curve.tp[i] + curve.tp[i + 1]), P)
            area += dx * ysum / 2
        oracle = pair_counting_auroc(scores, labels)
        assert area == Fraction(oracle).limit_denominator(4 * P * N)


class TestPerCategory:
    @staticmethod
    def labeled(scores, labels, cats):
        return LabeledScores(
            scores=np.asarray(scores, dtype=float),
            is_anomaly=np.asarray(labels, dtype=bool),
            categories=np.asarray(cats),
        )

    def test_single_category_dataset(self):
        ls = self.labeled(
            [0.1, 0.2, 0.9, 0.8],
            [False, False, True, True],
            ["Normal", "Normal", "DoS", "DoS"],
        )
        with pytest.warns(UserWarning):
            curves = per_category_eval(ls)
        assert set(curves) == {AttackCategory.DOS}
        assert curves[AttackCategory.DOS].auroc == 1.0

    def test_partition_counts(self):
        rng = np.random.default_rng(9)
        n = 120
        scores = rng.standard_normal(n)
        cats = rng.choice(["Normal", "DoS", "Probe", "U2R", "R2L"], size=n)
        labels = cats != "Normal"
        if not (cats == "Normal").any():
            cats[0] = "Normal"
            labels[0] = False
        ls = self.labeled(scores, labels, cats)
        curves = per_category_eval(ls)
        n_normal = int((cats == "Normal").sum())
        for cat, curve in curves.items():
            n_cat = int((cats == cat.value).sum())
            # positives-of-category + all normals = points used for this curve
            assert curve.n_pos == n_cat
            assert curve.n_neg == n_normal
            excluded = n - n_cat - n_normal
            assert excluded == int(labels.sum()) - n_cat

    @pytest.mark.filterwarnings("ignore:no .* attacks present")
    def test_other_categories_excluded(self):
        # A huge-scoring Probe attack must not influence the DoS curve.
        ls = self.labeled(
            [0.0, 1.0, 0.5, 99.0],
            [False, False, True, True],
            ["Normal", "Normal", "DoS", "Probe"],
        )
        curves = per_category_eval(ls)
        dos = curves[AttackCategory.DOS]
        assert dos.n_pos == 1 and dos.n_neg == 2
        # DoS attack at 0.5 sits between the normals -> auroc 0.5
        assert dos.auroc == 0.5

    @pytest.mark.filterwarnings("ignore:no .* attacks present")
    def test_global_within_category_extremes(self):
        rng = np.random.default_rng(10)
        n = 50
        scores = rng.standard_normal(n)
        cats = rng.choice(["Normal", "DoS", "Probe"], size=n, p=[0.5, 0.25, 0.25])
        labels = cats != "Normal"
        cats[0], labels[0] = "Normal", False
        cats[1], labels[1] = "DoS", True
        cats[2], labels[2] = "Probe", True
        ls = self.labeled(scores, labels, cats)
        per_cat = {c: cur.auroc for c, cur in per_category_eval(ls).items()}
        overall = auroc(LabeledScores(scores=scores, is_anomaly=labels))
        assert min(per_cat.values()) - 1e-12 <= overall <= max(per_cat.values()) + 1e-12

    def test_requires_categories(self):
        with pytest.raises(EvalError):
            per_category_eval(LabeledScores(scores=[1.0, 2.0], is_anomaly=[True, False]))
