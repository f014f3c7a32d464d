import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mabdeploy.analysis import (ChunkTooShort, EventRecord, LogParseError, chunk_scores, dominant_model_per_chunk,
                                format_events_csv, read_events_csv, selection_trace, transition_matrix,
                                write_analysis)


def log_of(seq, chunk=2, metrics=None):
    metrics = metrics or [0.5] * len(seq)
    return [EventRecord(chunk, b, m, metrics[b], 0.0) for b, m in enumerate(seq)]


def test_chunk_scores_are_unweighted_means():
    log = log_of([0, 0], 2, [0.6, 0.8]) + log_of([1, 1, 1], 3, [0.5, 0.5, 0.8]) + log_of([0], 1, [0.1])
    scores, overall = chunk_scores(log, eval_start_chunk=2)
    assert scores == pytest.approx({2: 0.7, 3: 0.6})
    assert overall == pytest.approx(0.65)


def test_overall_reproduces_reported_naive_row():
    # chunk-wise balanced accuracies of the always-deploy-newest policy on census data
    chunks = [0.6259, 0.6130, 0.6305, 0.5967, 0.5281, 0.5567]
    log = [EventRecord(c + 2, 0, c + 1, v, 0.0) for c, v in enumerate(chunks)]
    _, overall = chunk_scores(log)
    assert overall == pytest.approx(0.5915, abs=5e-4)


def test_no_evaluated_chunks_is_an_error():
    with pytest.raises(ValueError):
        chunk_scores(log_of([0], 1), eval_start_chunk=2)


def test_dominant_model_ties_go_to_lowest_index():
    assert dominant_model_per_chunk(log_of([3, 1, 3, 1, 2])) == {2: 1}
    assert dominant_model_per_chunk(log_of([2, 2, 0])) == {2: 2}


@given(st.lists(st.integers(0, 6), min_size=1, max_size=30), st.randoms())
def test_dominant_model_ignores_batch_order(seq, rnd):
    shuffled = list(seq)
    rnd.shuffle(shuffled)
    assert dominant_model_per_chunk(log_of(seq)) == dominant_model_per_chunk(log_of(shuffled))


def test_hand_scripted_transition_counts():
    tm = transition_matrix(log_of([2, 0, 2, 0]), 2)
    assert tm.models == (0, 2)
    assert tm.counts.tolist() == [[0, 1], [2, 0]]
    assert tm.probs.tolist() == [[0.0, 1.0], [1.0, 0.0]]


def test_single_model_chunk_self_transition():
    tm = transition_matrix(log_of([4, 4, 4]), 2)
    assert tm.probs.tolist() == [[1.0]]


def test_last_only_model_has_zero_row():
    tm = transition_matrix(log_of([0, 0, 1]), 2)
    assert tm.probs.tolist() == [[0.5, 0.5], [0.0, 0.0]]


def test_one_batch_chunk_is_too_short():
    with pytest.raises(ChunkTooShort):
        transition_matrix(log_of([1]), 2)


@given(st.lists(st.integers(0, 9), min_size=2, max_size=200))
def test_transition_rows_are_distributions(seq):
    tm = transition_matrix(log_of(seq), 2)
    sums = tm.probs.sum(axis=1)
    assert np.all((np.abs(sums - 1) <= 1e-12) | (sums == 0))
    assert tm.counts.sum() == len(seq) - 1


def test_selection_trace_round_trips(tmp_path):
    log = log_of([0, 1, 1], 2, [0.25, 0.5, 0.75]) + log_of([2, 0], 3)
    p = tmp_path / "events.csv"
    p.write_text(format_events_csv(log))
    assert selection_trace(read_events_csv(p)) == selection_trace(log)


@given(st.lists(st.tuples(st.integers(1, 7), st.integers(0, 6), st.floats(0, 1), st.sampled_from([0.0, 1.0])),
                min_size=1, max_size=40))
def test_event_csv_round_trip_is_exact(tmp_path_factory, rows):
    log = [EventRecord(c, b, m, x, r) for b, (c, m, x, r) in enumerate(rows)]
    p = tmp_path_factory.mktemp("ev") / "events.csv"
    p.write_text(format_events_csv(log))
    assert read_events_csv(p) == log


@pytest.mark.parametrize("body, line", [
    ("chunk,batch,selected_model,metric,reward\n2,0,1,0.5,1.0\n2,1,1,0.5\n", 3),
    ("chunk,batch,model,metric,reward\n", 1),
    ("chunk,batch,selected_model,metric,reward\n2,0,x,0.5,1.0\n", 2),
    ("chunk,batch,selected_model,metric,reward\n2,0,1,nan,1.0\n", 2),
    ("", 1),
])
def test_malformed_logs_report_line(tmp_path, body, line):
    p = tmp_path / "events.csv"
    p.write_text(body)
    with pytest.raises(LogParseError) as exc:
        read_events_csv(p)
    assert exc.value.line == line


def test_write_analysis_artifacts(tmp_path):
    log = log_of([0, 0], 1) + log_of([1, 0, 1], 2, [0.5, 0.6, 0.7]) + log_of([2], 3, [0.9])
    names = {p.name for p in write_analysis(log, tmp_path)}
    assert names == {"chunk_scores.csv", "dominant_models.csv", "selection_trace.csv", "transitions_chunk2.json"}
    assert (tmp_path / "chunk_scores.csv").read_text() == "chunk,score\n2,0.600000\n3,0.900000\noverall,0.750000\n"
    tm = json.loads((tmp_path / "transitions_chunk2.json").read_text())
    assert tm["counts"] == [[0, 1], [1, 0]]
