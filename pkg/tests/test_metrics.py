import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mabdeploy.core import MetricKind
from mabdeploy.metrics import (DegenerateBatch, ScoredBatch, balanced_accuracy, compute_metric,
                               confusion_counts, pr_auc, roc_auc)
from oracles import pr_auc_by_thresholds, roc_auc_by_pairs


@pytest.mark.parametrize("scores, labels, expected", [
    ([.9, .8, .1, .2], [1, 1, 0, 0], 1.0),
    ([.9, .9, .9, .9], [1, 1, 0, 0], 0.5),
    ([.6, .4, .7, .2, .9], [1, 0, 0, 0, 1], 5 / 6),
])
def test_balanced_accuracy_examples(scores, labels, expected):
    assert balanced_accuracy(scores, labels, 0.5) == pytest.approx(expected, abs=1e-12)


def test_confusion_counts_hand_example():
    cc = confusion_counts([.6, .4, .7, .2, .9], [1, 0, 0, 0, 1], 0.5)
    assert (cc.tp, cc.fp, cc.tn, cc.fn) == (2, 1, 2, 0)
    assert cc.total == 5


def test_threshold_is_inclusive():
    assert balanced_accuracy([0.5, 0.4], [1, 0], 0.5) == 1.0


@pytest.mark.parametrize("scores, labels, expected", [
    ([.9, .8, .7], [1, 1, 1], 1.0),
    ([.9, .1], [0, 1], 0.5),
])
def test_pr_auc_examples(scores, labels, expected):
    assert pr_auc(scores, labels) == pytest.approx(expected)


def test_pr_auc_tie_block_counts_as_one_threshold():
    # a stable per-item order would give 1.0 here
    assert pr_auc([0.5, 0.5], [1, 0]) == pytest.approx(0.5)
    assert pr_auc([0.5, 0.5], [0, 1]) == pytest.approx(0.5)


@pytest.mark.parametrize("scores, labels, expected", [
    ([.9, .1], [1, 0], 1.0),
    ([.5, .5], [1, 0], 0.5),
])
def test_roc_auc_examples(scores, labels, expected):
    assert roc_auc(scores, labels) == expected


@pytest.mark.parametrize("fn, labels", [
    (lambda s, y: balanced_accuracy(s, y, 0.5), [1, 1]),
    (lambda s, y: balanced_accuracy(s, y, 0.5), [0, 0]),
    (pr_auc, [0, 0]),
    (roc_auc, [1, 1]),
    (roc_auc, [0, 0]),
])
def test_degenerate_batches_raise(fn, labels):
    with pytest.raises(DegenerateBatch):
        fn([0.3, 0.7], labels)


@pytest.mark.parametrize("scores, labels", [
    ([1.2, 0.1], [1, 0]),
    ([-0.1, 0.1], [1, 0]),
    ([float("nan"), 0.1], [1, 0]),
    ([0.2, 0.1], [2, 0]),
    ([0.2], [1, 0]),
    ([], []),
])
def test_invalid_batches_rejected(scores, labels):
    with pytest.raises(ValueError):
        ScoredBatch(scores, labels)


def test_scored_batch_dispatch():
    sb = ScoredBatch([0.9, 0.2, 0.6], [1, 0, 0])
    assert sb.metric(MetricKind.ROC_AUC) == 1.0
    assert sb.metric(MetricKind.PR_AUC) == 1.0
    assert sb.metric(MetricKind.BALANCED_ACCURACY, 0.5) == 0.75
    assert compute_metric("roc_auc", sb.scores, sb.labels) == 1.0


batches = st.integers(2, 32).flatmap(lambda n: st.tuples(
    st.lists(st.integers(0, 10).map(lambda k: k / 10), min_size=n, max_size=n),
    st.lists(st.integers(0, 1), min_size=n, max_size=n),
)).filter(lambda sb: 0 < sum(sb[1]) < len(sb[1]))


@given(batches)
def test_pr_auc_matches_threshold_oracle(sb):
    scores, labels = sb
    assert pr_auc(scores, labels) == pytest.approx(pr_auc_by_thresholds(scores, labels), abs=1e-9)


@given(batches)
def test_roc_auc_matches_pair_oracle(sb):
    scores, labels = sb
    assert roc_auc(scores, labels) == roc_auc_by_pairs(scores, labels)


@given(batches, st.sampled_from(["square", "sqrt", "affine"]))
def test_metrics_invariant_under_monotone_transform(sb, kind):
    scores, labels = sb
    f = {"square": lambda x: x ** 2, "sqrt": np.sqrt, "affine": lambda x: 0.25 + 0.5 * x}[kind]
    t = f(np.asarray(scores))
    assert pr_auc(t, labels) == pytest.approx(pr_auc(scores, labels), abs=1e-12)
    assert roc_auc(t, labels) == pytest.approx(roc_auc(scores, labels), abs=1e-12)
    thr = 0.45
    assert balanced_accuracy(t, labels, float(f(np.float64(thr)))) == pytest.approx(
        balanced_accuracy(scores, labels, thr), abs=1e-12)


@given(st.integers(2, 32).flatmap(lambda n: st.tuples(
    st.lists(st.floats(0, 1), min_size=n, max_size=n, unique=True),
    st.lists(st.integers(0, 1), min_size=n, max_size=n))).filter(lambda sb: 0 < sum(sb[1]) < len(sb[1])))
def test_roc_label_swap_duality(sb):
    scores, labels = sb
    swapped = [1 - y for y in labels]
    assert roc_auc(scores, swapped) == pytest.approx(1 - roc_auc(scores, labels), abs=1e-12)


@given(st.lists(st.integers(0, 1), min_size=2, max_size=40).filter(lambda y: 0 < sum(y) < len(y)),
       st.floats(0.001, 1.0))
def test_balanced_accuracy_of_label_matching_scores(labels, thr):
    assert balanced_accuracy([float(y) for y in labels], labels, thr) == 1.0


@settings(deadline=None, max_examples=5)
@given(st.integers(0, 2**32 - 1))
def test_pr_auc_of_random_scorer_tracks_prevalence(seed):
    rng = np.random.default_rng(seed)
    prevalence = 0.2
    labels = (rng.random(10_000) < prevalence).astype(int)
    scores = rng.random(10_000)
    assert abs(pr_auc(scores, labels) - labels.mean()) < 0.05
