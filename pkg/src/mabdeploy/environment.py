"""The dual-timescale deployment simulator.

The stream is cut into equal chunks; a model is trained at the end of each
chunk on everything seen so far and joins the candidate set at the start of
the next chunk. Inside a chunk the active policy picks one model per batch.
Every model is scored on every row up front (a :class:`ScoreMatrix`), so the
simulation itself is a cheap replay and any arm can be evaluated on any
batch.
"""
from __future__ import annotations

import csv
import functools
import json
import logging
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import analysis
from .analysis import EventRecord
from .core import ChunkPlan, ExperimentConfig, MetricKind, ModelId, SyntheticScenario, config_digest
from .learner import generate_stream, train_scorer
from .metrics import DegenerateBatch, compute_metric
from .policies import PolicyContext, make_policy
from .rewards import RewardSpec, binary_improvement

log = logging.getLogger(__name__)

_MODEL_COL = re.compile(r"m(\d+)$")


class InsufficientData(ValueError):
    pass


class ReplayError(ValueError):
    pass


class ParseError(ReplayError):
    def __init__(self, line: int, reason: str):
        self.line = line
        super().__init__(f"line {line}: {reason}")


class MissingColumn(ReplayError):
    pass


class ScoreOutOfRange(ReplayError):
    def __init__(self, row, model: ModelId):
        self.row, self.model = row, model
        super().__init__(f"score for row {row}, model m{model} outside [0, 1]")


@dataclass(frozen=True)
class ScoreMatrix:
    row_ids: np.ndarray
    labels: np.ndarray
    columns: np.ndarray  # (n_models, n_rows)

    def __post_init__(self):
        n = len(self.row_ids)
        if len(self.labels) != n or self.columns.ndim != 2 or self.columns.shape[1] != n:
            raise ValueError("every model column must cover every row")
        if len(np.unique(self.row_ids)) != n:
            raise ValueError("row ids must be unique")
        for a in (self.row_ids, self.labels, self.columns):
            a.setflags(write=False)

    @property
    def n_models(self) -> int:
        return self.columns.shape[0]

    def __len__(self) -> int:
        return len(self.row_ids)


@dataclass
class RunResult:
    events: list[EventRecord]
    summary: dict
    validation_scores: list[float]


# ---------------------------------------------------------------------------
# stream layout

def chunk_length(n_rows: int, plan: ChunkPlan) -> int:
    length = n_rows // plan.num_chunks
    if length < plan.batch_size:
        raise InsufficientData(
            f"{n_rows} rows give chunks of {length}; need at least one full batch of {plan.batch_size}")
    return length


def batch_bounds(chunk: int, length: int, batch_size: int) -> list[tuple[int, int]]:
    """Row ranges of the batches of ``chunk``; a trailing partial batch is kept."""
    lo = chunk * length
    return [(s, min(s + batch_size, lo + length)) for s in range(lo, lo + length, batch_size)]


def build_cumulative_splits(n_rows: int, plan: ChunkPlan, validation_fraction: float, seed: int):
    """Per chunk t, a disjoint (train, val) split of all rows in chunks 0..t."""
    length = chunk_length(n_rows, plan)
    splits = []
    for t in range(plan.num_chunks):
        pool = np.arange((t + 1) * length)
        rng = np.random.default_rng([seed, t])
        shuffled = rng.permutation(pool)
        n_val = min(max(1, int(round(validation_fraction * len(pool)))), len(pool) - 1)
        splits.append((np.sort(shuffled[n_val:]), np.sort(shuffled[:n_val])))
    return splits


# ---------------------------------------------------------------------------
# inputs

def _open_csv(path):
    try:
        return open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise ReplayError(f"cannot read {path}: {exc.strerror}") from None


def load_replay_scores(path) -> ScoreMatrix:
    """Read ``row_id,label,m0,...,mk``; rows are the stream in file order."""
    with _open_csv(path) as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader, [])]
        for col in ("row_id", "label"):
            if col not in header:
                raise MissingColumn(f"header lacks '{col}'")
        model_cols = {}
        for i, h in enumerate(header):
            m = _MODEL_COL.match(h)
            if m:
                model_cols[int(m.group(1))] = i
        if not model_cols:
            raise MissingColumn("no model columns m0..mk")
        k = len(model_cols)
        if sorted(model_cols) != list(range(k)):
            raise MissingColumn(f"model columns must be m0..m{k - 1} without gaps")
        i_row, i_lab = header.index("row_id"), header.index("label")
        order = [model_cols[m] for m in range(k)]
        row_ids, labels, scores = [], [], []
        for row in reader:
            line = reader.line_num
            if not row:
                continue
            if len(row) != len(header):
                raise ParseError(line, f"expected {len(header)} fields, got {len(row)}")
            try:
                rid = int(row[i_row])
                lab = int(row[i_lab])
                vals = [float(row[j]) for j in order]
            except ValueError as exc:
                raise ParseError(line, str(exc)) from None
            if lab not in (0, 1):
                raise ParseError(line, f"label {lab} is not binary")
            for m, v in enumerate(vals):
                if not 0.0 <= v <= 1.0:
                    raise ScoreOutOfRange(rid, m)
            row_ids.append(rid)
            labels.append(lab)
            scores.append(vals)
    if not row_ids:
        raise ParseError(2, "no data rows")
    if len(set(row_ids)) != len(row_ids):
        raise ParseError(1, "row_id values are not unique")
    return ScoreMatrix(np.array(row_ids), np.array(labels, dtype=np.int8),
                       np.array(scores, dtype=float).T.copy())


def load_dataset(path, label_column: str = "label"):
    """Numeric feature CSV with one binary label column; returns (X, y)."""
    with _open_csv(path) as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader, [])]
        if label_column not in header:
            raise MissingColumn(f"header lacks label column '{label_column}'")
        i_lab = header.index(label_column)
        feats = [i for i in range(len(header)) if i != i_lab]
        if not feats:
            raise MissingColumn("no feature columns")
        X, y = [], []
        for row in reader:
            line = reader.line_num
            if not row:
                continue
            if len(row) != len(header):
                raise ParseError(line, f"expected {len(header)} fields, got {len(row)}")
            try:
                lab = int(row[i_lab])
                X.append([float(row[i]) for i in feats])
            except ValueError as exc:
                raise ParseError(line, str(exc)) from None
            if lab not in (0, 1):
                raise ParseError(line, f"label {lab} is not binary")
            y.append(lab)
    if not y:
        raise ParseError(2, "no data rows")
    return np.array(X, dtype=float), np.array(y, dtype=np.int8)


def _trained_matrix(X, y, plan: ChunkPlan, validation_fraction: float, seed_seq: np.random.SeedSequence,
                    overfit=None) -> ScoreMatrix:
    """Train one scorer per chunk boundary (except after the last chunk) and score every row."""
    split_seed, train_seed = (int(s.generate_state(1)[0]) for s in seed_seq.spawn(2))
    splits = build_cumulative_splits(len(y), plan, validation_fraction, split_seed)
    cols = []
    for t in range(plan.num_chunks - 1):
        train_rows = splits[t][0]
        strength = overfit[t] if overfit is not None else 0.0
        scorer = train_scorer(X[train_rows], y[train_rows], strength, seed=[train_seed, t])
        cols.append(scorer.score(X))
    return ScoreMatrix(np.arange(len(y)), np.asarray(y, dtype=np.int8), np.clip(np.array(cols), 0.0, 1.0))


@functools.lru_cache(maxsize=16)
def synthetic_score_matrix(scenario: SyntheticScenario, plan: ChunkPlan, validation_fraction: float,
                           seed: int) -> ScoreMatrix:
    data_ss, model_ss = _seed_streams(seed)[:2]
    X, y = generate_stream(scenario, plan.num_chunks, np.random.default_rng(data_ss))
    return _trained_matrix(X, y, plan, validation_fraction, model_ss, scenario.overfit_schedule)


def _seed_streams(seed: int):
    # data, model training, policy
    return np.random.SeedSequence(seed).spawn(3)


def _split_seed(seed: int) -> int:
    return int(_seed_streams(seed)[1].spawn(2)[0].generate_state(1)[0])


def build_score_matrix(cfg: ExperimentConfig, base_dir=None) -> ScoreMatrix:
    src = cfg.scorer_source
    if src.kind == "synthetic":
        return synthetic_score_matrix(src.scenario, cfg.chunk_plan, cfg.validation_fraction, cfg.seed)
    path = Path(src.path)
    if base_dir is not None and not path.is_absolute():
        path = Path(base_dir) / path
    if src.kind == "replay":
        return load_replay_scores(path)
    X, y = load_dataset(path, src.label_column)
    return _trained_matrix(X, y, cfg.chunk_plan, cfg.validation_fraction, _seed_streams(cfg.seed)[1])


def validation_scores(matrix: ScoreMatrix, cfg: ExperimentConfig) -> list[float]:
    """Each model's metric on the held-out part of the pool it was trained from.

    An undefined metric (single-class validation split) scores 0.
    """
    splits = build_cumulative_splits(len(matrix), cfg.chunk_plan, cfg.validation_fraction, _split_seed(cfg.seed))
    out = []
    for m in range(min(matrix.n_models, cfg.chunk_plan.num_chunks - 1)):
        val = splits[m][1]
        try:
            out.append(compute_metric(cfg.metric, matrix.columns[m][val], matrix.labels[val], cfg.metric_threshold))
        except DegenerateBatch:
            out.append(0.0)
    return out


# ---------------------------------------------------------------------------
# the loop

def simulate(matrix: ScoreMatrix, cfg: ExperimentConfig, val_scores=None) -> list[EventRecord]:
    plan, spec = cfg.chunk_plan, cfg.policy_spec
    length = chunk_length(len(matrix), plan)
    if val_scores is None:
        val_scores = validation_scores(matrix, cfg)
    policy = make_policy(spec)
    rng = np.random.default_rng(_seed_streams(cfg.seed)[2])
    reward_spec = RewardSpec(spec.r_pos, spec.r_neg)
    n_models = min(matrix.n_models, plan.num_chunks - 1)

    records: list[EventRecord] = []
    prev_metric: float | None = None
    t_global = 0
    # chunk 0 has no model yet; model t joins at chunk t + 1
    for chunk in range(1, plan.num_chunks):
        if chunk - 1 < n_models:
            policy.add_model(chunk - 1, val_scores[chunk - 1])
        available = tuple(range(min(chunk, n_models)))
        for b, (lo, hi) in enumerate(batch_bounds(chunk, length, plan.batch_size)):
            t_global += 1
            ctx = PolicyContext(available, t_global, chunk, prev_metric, hi - lo)
            selected = policy.select(ctx, rng)
            labels = matrix.labels[lo:hi]
            cache: dict[ModelId, float | None] = {}

            def evaluate(m: ModelId, lo=lo, hi=hi, labels=labels, cache=cache):
                if m not in cache:
                    try:
                        cache[m] = compute_metric(cfg.metric, matrix.columns[m][lo:hi], labels, cfg.metric_threshold)
                    except DegenerateBatch:
                        cache[m] = None
                return cache[m]

            if spec.reward_baseline == "per_arm" and policy.arms[selected].last_metric is not None:
                baseline = policy.arms[selected].last_metric
            else:
                baseline = prev_metric
            metric = evaluate(selected)
            if metric is None:
                # carry the baseline forward; equal to baseline means no reward
                metric = baseline if baseline is not None else 0.0
                reward = spec.r_neg
            else:
                reward = binary_improvement(metric, baseline, reward_spec)
            policy.observe(ctx, selected, metric, reward, evaluate)
            records.append(EventRecord(chunk, b, selected, metric, reward, policy.digest()))
            prev_metric = metric
    return records


def summarize(events, cfg: ExperimentConfig) -> dict:
    scores, overall = analysis.chunk_scores(events, cfg.chunk_plan.eval_start_chunk)
    return {
        "policy": cfg.policy_spec.name,
        "overall": overall,
        "chunk_scores": list(scores.values()),
        "config_digest": config_digest(cfg),
        "seed": cfg.seed,
    }


def run_experiment(cfg: ExperimentConfig, base_dir=None) -> RunResult:
    matrix = build_score_matrix(cfg, base_dir)
    vals = validation_scores(matrix, cfg)
    log.info("running %s over %d rows, %d models", cfg.policy_spec.name, len(matrix), matrix.n_models)
    events = simulate(matrix, cfg, vals)
    return RunResult(events, summarize(events, cfg), vals)


def write_run(result: RunResult, out_dir, eval_start_chunk: int) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "events.csv").write_text(analysis.format_events_csv(result.events), encoding="utf-8")
    (out / "snapshots.csv").write_text(
        "chunk,batch,policy_digest\n" + "".join(
            f"{r.chunk},{r.batch},{r.policy_snapshot_digest}\n" for r in result.events), encoding="utf-8")
    (out / "summary.json").write_text(json.dumps(result.summary, indent=2) + "\n", encoding="utf-8")
    # analysis reads the log back so run and analyze produce identical artifacts
    analysis.write_analysis(analysis.read_events_csv(out / "events.csv"), out, eval_start_chunk)
