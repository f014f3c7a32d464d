"""Shared domain types and experiment configuration.

Everything here is a frozen value type. Configs are loaded from JSON and
validated field by field; unknown keys are rejected so a typo never silently
falls back to a default.
"""
from __future__ import annotations

import enum
import hashlib
import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Iterable

ModelId = int

POLICY_NAMES = ("naive", "validation", "ab_test", "epsilon_greedy", "ucb", "thompson")
SOURCE_KINDS = ("replay", "dataset", "synthetic")
REWARD_BASELINES = ("pipeline", "per_arm")
MAX_SEED = 2**64 - 1


@dataclass(frozen=True)
class InvalidField:
    name: str
    reason: str

    def __str__(self) -> str:
        return f"{self.name}: {self.reason}"


class ConfigError(ValueError):
    """Raised with every violated field of a config, not just the first."""

    def __init__(self, errors: Iterable[InvalidField]):
        self.errors = list(errors)
        super().__init__("; ".join(str(e) for e in self.errors))


@dataclass(frozen=True)
class LabeledExample:
    row_id: int
    label: int


@dataclass(frozen=True)
class Batch:
    chunk_index: int
    batch_index: int
    rows: tuple[int, ...]  # positions into the stream

    def __post_init__(self):
        if not self.rows:
            raise ValueError("batch must be non-empty")

    def __len__(self) -> int:
        return len(self.rows)


@dataclass(frozen=True)
class ChunkPlan:
    num_chunks: int = 8
    batch_size: int = 300
    eval_start_chunk: int = 2


class MetricKind(str, enum.Enum):
    BALANCED_ACCURACY = "balanced_accuracy"
    PR_AUC = "pr_auc"
    ROC_AUC = "roc_auc"


@dataclass(frozen=True)
class PolicySpec:
    """Tagged policy choice. Only the hyperparameters of ``name`` are read."""

    name: str = "naive"
    # epsilon-greedy
    epsilon: float = 0.1
    epsilon_decay: float = 0.0
    # UCB
    c: float = 0.1
    # A/B test
    alpha: float = 0.05
    power: float = 0.8
    delta: float = 0.05
    sigma_window: int = 10
    # Thompson prior
    prior_mu: float = 0.5
    prior_kappa: float = 1.0
    prior_alpha: float = 1.0
    prior_beta: float = 1.0
    # rewards
    r_pos: float = 1.0
    r_neg: float = 0.0
    reward_baseline: str = "pipeline"


@dataclass(frozen=True)
class SyntheticScenario:
    num_features: int = 10
    drift_schedule: tuple[float, ...] = (0.0,) * 8
    overfit_schedule: tuple[float, ...] = (0.0,) * 7
    class_imbalance: float = 0.24
    examples_per_chunk: int = 3000
    signal_strength: float = 3.0


@dataclass(frozen=True)
class ScorerSource:
    kind: str = "synthetic"
    path: str | None = None
    label_column: str = "label"
    scenario: SyntheticScenario | None = None


@dataclass(frozen=True)
class ExperimentConfig:
    chunk_plan: ChunkPlan = field(default_factory=ChunkPlan)
    metric: MetricKind = MetricKind.BALANCED_ACCURACY
    policy_spec: PolicySpec = field(default_factory=PolicySpec)
    seed: int = 0
    scorer_source: ScorerSource = field(default_factory=lambda: ScorerSource(scenario=SyntheticScenario()))
    validation_fraction: float = 0.2
    metric_threshold: float = 0.5


def fraud_like_scenario(num_chunks: int = 8, overfit_from: int = 2, overfit_strength: float = 1.0) -> SyntheticScenario:
    """Heavily imbalanced stream where every model from ``overfit_from`` on memorizes its training labels."""
    return SyntheticScenario(
        num_features=6,
        drift_schedule=(0.0,) + (0.05,) * (num_chunks - 1),
        overfit_schedule=tuple(overfit_strength if m >= overfit_from else 0.0 for m in range(num_chunks - 1)),
        class_imbalance=0.011,
        examples_per_chunk=7000,
        signal_strength=3.0,
    )


def census_like_scenario(num_chunks: int = 8) -> SyntheticScenario:
    return SyntheticScenario(
        num_features=10,
        drift_schedule=(0.0,) + (0.3,) * (num_chunks - 1),
        overfit_schedule=(0.0,) * (num_chunks - 1),
        class_imbalance=0.24,
        examples_per_chunk=3000,
        signal_strength=2.0,
    )


# ---------------------------------------------------------------------------
# validation

def _is_int(x) -> bool:
    return isinstance(x, int) and not isinstance(x, bool)


def _is_real(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and x == x and abs(x) != float("inf")


def _check_policy(p: PolicySpec) -> list[InvalidField]:
    errs = []
    if p.name not in POLICY_NAMES:
        errs.append(InvalidField("policy_spec.name", f"must be one of {', '.join(POLICY_NAMES)}"))
    for name in ("epsilon", "epsilon_decay", "c", "alpha", "power", "delta", "prior_mu",
                 "prior_kappa", "prior_alpha", "prior_beta", "r_pos", "r_neg"):
        if not _is_real(getattr(p, name)):
            errs.append(InvalidField(f"policy_spec.{name}", "must be a finite real"))
    if errs:
        return errs
    if not 0.0 <= p.epsilon <= 1.0:
        errs.append(InvalidField("policy_spec.epsilon", "must lie in [0, 1]"))
    if p.epsilon_decay < 0:
        errs.append(InvalidField("policy_spec.epsilon_decay", "must be >= 0"))
    if p.c < 0:
        errs.append(InvalidField("policy_spec.c", "must be >= 0"))
    # the normal quantile is infinite at 0 and 1
    if not 0.0 < p.alpha < 1.0:
        errs.append(InvalidField("policy_spec.alpha", "must lie in (0, 1)"))
    if not 0.0 < p.power < 1.0:
        errs.append(InvalidField("policy_spec.power", "must lie in (0, 1)"))
    if p.delta <= 0:
        errs.append(InvalidField("policy_spec.delta", "must be > 0"))
    if not _is_int(p.sigma_window) or p.sigma_window < 2:
        errs.append(InvalidField("policy_spec.sigma_window", "must be an integer >= 2"))
    if p.prior_kappa <= 0:
        errs.append(InvalidField("policy_spec.prior_kappa", "must be > 0"))
    if p.prior_alpha <= 0.5:
        errs.append(InvalidField("policy_spec.prior_alpha", "must be > 0.5"))
    if p.prior_beta <= 0:
        errs.append(InvalidField("policy_spec.prior_beta", "must be > 0"))
    if not p.r_pos > p.r_neg:
        errs.append(InvalidField("policy_spec.r_pos", "must exceed r_neg"))
    if p.reward_baseline not in REWARD_BASELINES:
        errs.append(InvalidField("policy_spec.reward_baseline", f"must be one of {', '.join(REWARD_BASELINES)}"))
    return errs


def _check_scenario(s: SyntheticScenario, num_chunks: int | None) -> list[InvalidField]:
    pre = "scorer_source.scenario"
    errs = []
    if not _is_int(s.num_features) or s.num_features < 1:
        errs.append(InvalidField(f"{pre}.num_features", "must be a positive integer"))
    if not _is_int(s.examples_per_chunk) or s.examples_per_chunk < 1:
        errs.append(InvalidField(f"{pre}.examples_per_chunk", "must be a positive integer"))
    if not (_is_real(s.class_imbalance) and 0.0 < s.class_imbalance < 1.0):
        errs.append(InvalidField(f"{pre}.class_imbalance", "must lie in (0, 1)"))
    if not (_is_real(s.signal_strength) and s.signal_strength > 0):
        errs.append(InvalidField(f"{pre}.signal_strength", "must be > 0"))
    if not all(_is_real(x) and x >= 0 for x in s.drift_schedule):
        errs.append(InvalidField(f"{pre}.drift_schedule", "entries must be finite and >= 0"))
    if not all(_is_real(x) and 0.0 <= x <= 1.0 for x in s.overfit_schedule):
        errs.append(InvalidField(f"{pre}.overfit_schedule", "entries must lie in [0, 1]"))
    if num_chunks is not None:
        if len(s.drift_schedule) != num_chunks:
            errs.append(InvalidField(f"{pre}.drift_schedule", f"length must equal num_chunks ({num_chunks})"))
        if len(s.overfit_schedule) != num_chunks - 1:
            errs.append(InvalidField(f"{pre}.overfit_schedule", f"length must equal num_chunks - 1 ({num_chunks - 1})"))
    return errs


def validate_config(cfg: ExperimentConfig) -> ExperimentConfig:
    """Return ``cfg`` unchanged if every invariant holds, else raise ConfigError listing all violations."""
    errs: list[InvalidField] = []
    plan = cfg.chunk_plan
    plan_ok = True
    if not _is_int(plan.num_chunks) or plan.num_chunks < 3:
        errs.append(InvalidField("chunk_plan.num_chunks", "must be an integer >= 3"))
        plan_ok = False
    if not _is_int(plan.batch_size) or plan.batch_size < 1:
        errs.append(InvalidField("chunk_plan.batch_size", "must be a positive integer"))
    if not _is_int(plan.eval_start_chunk) or plan.eval_start_chunk < 1:
        errs.append(InvalidField("chunk_plan.eval_start_chunk", "must be an integer >= 1"))
    elif plan_ok and plan.num_chunks < plan.eval_start_chunk + 1:
        errs.append(InvalidField("chunk_plan.eval_start_chunk", "num_chunks must be >= eval_start_chunk + 1"))

    if not isinstance(cfg.metric, MetricKind):
        errs.append(InvalidField("metric", f"must be one of {', '.join(m.value for m in MetricKind)}"))
    if not (_is_real(cfg.metric_threshold) and 0.0 <= cfg.metric_threshold <= 1.0):
        errs.append(InvalidField("metric_threshold", "must lie in [0, 1]"))
    errs.extend(_check_policy(cfg.policy_spec))
    if not _is_int(cfg.seed) or not 0 <= cfg.seed <= MAX_SEED:
        errs.append(InvalidField("seed", "must be an unsigned 64-bit integer"))
    if not (_is_real(cfg.validation_fraction) and 0.0 < cfg.validation_fraction < 1.0):
        errs.append(InvalidField("validation_fraction", "must lie in (0, 1)"))

    src = cfg.scorer_source
    if src.kind not in SOURCE_KINDS:
        errs.append(InvalidField("scorer_source.kind", f"must be one of {', '.join(SOURCE_KINDS)}"))
    elif src.kind == "synthetic":
        if src.scenario is None:
            errs.append(InvalidField("scorer_source.scenario", "required for synthetic sources"))
        else:
            errs.extend(_check_scenario(src.scenario, plan.num_chunks if plan_ok else None))
    elif not src.path:
        errs.append(InvalidField("scorer_source.path", f"required for {src.kind} sources"))
    if errs:
        raise ConfigError(errs)
    return cfg


# ---------------------------------------------------------------------------
# (de)serialization

def _build(cls, data: Any, prefix: str, errs: list[InvalidField], nested: dict | None = None):
    if not isinstance(data, dict):
        errs.append(InvalidField(prefix or "<root>", "must be a JSON object"))
        return None
    known = {f.name for f in fields(cls)}
    for key in sorted(set(data) - known):
        errs.append(InvalidField(f"{prefix}{key}", "unknown key"))
    kwargs = {}
    for key in known & set(data):
        value = data[key]
        if nested and key in nested:
            value = nested[key](value, f"{prefix}{key}.", errs)
        kwargs[key] = value
    return cls(**kwargs)


def _tuple_of(value, name, errs):
    if not isinstance(value, (list, tuple)):
        errs.append(InvalidField(name.rstrip("."), "must be a list"))
        return ()
    return tuple(value)


def _scenario(data, prefix, errs):
    if data is None:
        return None
    return _build(SyntheticScenario, data, prefix, errs,
                  {"drift_schedule": _tuple_of, "overfit_schedule": _tuple_of})


def _metric(value, prefix, errs):
    try:
        return MetricKind(value)
    except ValueError:
        errs.append(InvalidField("metric", f"must be one of {', '.join(m.value for m in MetricKind)}"))
        return MetricKind.BALANCED_ACCURACY


def config_from_dict(data: dict) -> ExperimentConfig:
    """Build and validate a config; fails closed on unknown keys at every level."""
    errs: list[InvalidField] = []
    nested = {
        "chunk_plan": lambda v, p, e: _build(ChunkPlan, v, p, e),
        "policy_spec": lambda v, p, e: _build(PolicySpec, v, p, e),
        "scorer_source": lambda v, p, e: _build(ScorerSource, v, p, e, {"scenario": _scenario}),
        "metric": lambda v, p, e: _metric(v, p, e),
    }
    cfg = _build(ExperimentConfig, data, "", errs, nested)
    if errs or cfg is None or None in (cfg.chunk_plan, cfg.policy_spec, cfg.scorer_source):
        raise ConfigError(errs)
    return validate_config(cfg)


def config_to_dict(cfg: ExperimentConfig) -> dict:
    d = asdict(cfg)
    d["metric"] = cfg.metric.value
    scen = d["scorer_source"]["scenario"]
    if scen is not None:
        scen["drift_schedule"] = list(scen["drift_schedule"])
        scen["overfit_schedule"] = list(scen["overfit_schedule"])
    return d


def dump_config(cfg: ExperimentConfig) -> str:
    return json.dumps(config_to_dict(cfg), indent=2, sort_keys=True) + "\n"


def save_config(cfg: ExperimentConfig, path) -> None:
    Path(path).write_text(dump_config(cfg), encoding="utf-8")


def load_config(path) -> ExperimentConfig:
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([InvalidField("<file>", f"invalid JSON at line {exc.lineno}: {exc.msg}")]) from None
    return config_from_dict(data)


def config_digest(cfg: ExperimentConfig) -> str:
    canon = json.dumps(config_to_dict(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def with_seed(cfg: ExperimentConfig, seed: int) -> ExperimentConfig:
    return validate_config(replace(cfg, seed=seed))
