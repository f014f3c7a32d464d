"""Event-log post-processing: score tables, dominant models, transitions.

Every function here is a pure function of the event log, so logs produced
by any system in the same CSV format can be analysed.
"""
from __future__ import annotations

import csv
import io
import json
from collections import Counter, defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .core import ModelId

EVENT_COLUMNS = ("chunk", "batch", "selected_model", "metric", "reward")


@dataclass(frozen=True)
class EventRecord:
    chunk: int
    batch: int
    selected: ModelId
    metric: float
    reward: float
    policy_snapshot_digest: str = ""


class LogParseError(ValueError):
    def __init__(self, line: int, reason: str):
        self.line = line
        super().__init__(f"line {line}: {reason}")


class ChunkTooShort(ValueError):
    pass


@dataclass(frozen=True)
class TransitionMatrix:
    chunk: int
    models: tuple[ModelId, ...]
    probs: np.ndarray
    counts: np.ndarray

    def to_json(self) -> str:
        return json.dumps({
            "chunk": self.chunk,
            "models": list(self.models),
            "probs": self.probs.tolist(),
            "counts": self.counts.tolist(),
        }, indent=2) + "\n"


def _by_chunk(log: Iterable[EventRecord]) -> dict[int, list[EventRecord]]:
    out: dict[int, list[EventRecord]] = defaultdict(list)
    for r in log:
        out[r.chunk].append(r)
    return {c: sorted(rs, key=lambda r: r.batch) for c, rs in sorted(out.items())}


def chunk_scores(log: Sequence[EventRecord], eval_start_chunk: int = 2) -> tuple[dict[int, float], float]:
    """Mean metric per evaluated chunk, and the unweighted mean of those chunk means."""
    per_chunk = {c: float(np.mean([r.metric for r in rs]))
                 for c, rs in _by_chunk(log).items() if c >= eval_start_chunk}
    if not per_chunk:
        raise ValueError("log has no records in evaluated chunks")
    return per_chunk, float(np.mean(list(per_chunk.values())))


def dominant_model_per_chunk(log: Sequence[EventRecord]) -> dict[int, ModelId]:
    out = {}
    for c, rs in _by_chunk(log).items():
        counts = Counter(r.selected for r in rs)
        top = max(counts.values())
        out[c] = min(m for m, k in counts.items() if k == top)
    return out


def transition_matrix(log: Sequence[EventRecord], chunk: int) -> TransitionMatrix:
    """Row-normalized counts of consecutive-batch switches inside one chunk."""
    rs = _by_chunk(log).get(chunk, [])
    if len(rs) < 2:
        raise ChunkTooShort(f"chunk {chunk} has {len(rs)} batch(es); need at least 2")
    seq = [r.selected for r in rs]
    models = tuple(sorted(set(seq)))
    pos = {m: i for i, m in enumerate(models)}
    counts = np.zeros((len(models), len(models)), dtype=np.int64)
    for a, b in zip(seq, seq[1:]):
        counts[pos[a], pos[b]] += 1
    out = counts.sum(axis=1, keepdims=True)
    probs = np.divide(counts, out, out=np.zeros(counts.shape), where=out > 0)
    return TransitionMatrix(chunk, models, probs, counts)


def selection_trace(log: Sequence[EventRecord]) -> list[tuple[int, int, ModelId]]:
    return [(r.chunk, r.batch, r.selected) for r in log]


# ---------------------------------------------------------------------------
# event log and artifact IO

def format_events_csv(log: Sequence[EventRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(EVENT_COLUMNS)
    for r in log:
        w.writerow([r.chunk, r.batch, r.selected, repr(float(r.metric)), repr(float(r.reward))])
    return buf.getvalue()


def read_events_csv(path) -> list[EventRecord]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise LogParseError(1, "empty file")
        if tuple(h.strip() for h in header) != EVENT_COLUMNS:
            raise LogParseError(1, f"header must be {','.join(EVENT_COLUMNS)}")
        log = []
        for row in reader:
            line = reader.line_num
            if len(row) != len(EVENT_COLUMNS):
                raise LogParseError(line, f"expected {len(EVENT_COLUMNS)} fields, got {len(row)}")
            try:
                chunk, batch, model = int(row[0]), int(row[1]), int(row[2])
                metric, reward = float(row[3]), float(row[4])
            except ValueError as exc:
                raise LogParseError(line, str(exc)) from None
            if min(chunk, batch, model) < 0 or not (np.isfinite(metric) and np.isfinite(reward)):
                raise LogParseError(line, "negative index or non-finite value")
            log.append(EventRecord(chunk, batch, model, metric, reward))
    if not log:
        raise LogParseError(1, "no records")
    return log


def write_analysis(log: Sequence[EventRecord], out_dir, eval_start_chunk: int = 2) -> list[Path]:
    """Write every analysis artifact derived from ``log``; returns the paths written."""
    out_dir = Path(out_dir)
    written = []

    def put(name: str, text: str):
        p = out_dir / name
        p.write_text(text, encoding="utf-8")
        written.append(p)

    scores, overall = chunk_scores(log, eval_start_chunk)
    lines = ["chunk,score"] + [f"{c},{s:.6f}" for c, s in scores.items()] + [f"overall,{overall:.6f}"]
    put("chunk_scores.csv", "\n".join(lines) + "\n")

    dom = dominant_model_per_chunk(log)
    put("dominant_models.csv", "\n".join(["chunk,model"] + [f"{c},{m}" for c, m in dom.items()]) + "\n")

    metric_of = {(r.chunk, r.batch): r.metric for r in log}
    lines = ["chunk,batch,selected_model,metric"] + [
        f"{c},{b},{m},{metric_of[(c, b)]:.6f}" for c, b, m in selection_trace(log)]
    put("selection_trace.csv", "\n".join(lines) + "\n")

    for c, rs in _by_chunk(log).items():
        if c >= eval_start_chunk and len(rs) >= 2:
            put(f"transitions_chunk{c}.json", transition_matrix(log, c).to_json())
    return written
