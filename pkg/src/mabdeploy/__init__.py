"""Simulate ML model deployment policies (naive, validation, A/B, bandits) on a chunked data stream."""
from .core import (ChunkPlan, ConfigError, ExperimentConfig, MetricKind, PolicySpec, ScorerSource,
                   SyntheticScenario, census_like_scenario, fraud_like_scenario, load_config, validate_config)
from .environment import ScoreMatrix, run_experiment
from .policies import make_policy

__all__ = [
    "ChunkPlan", "ConfigError", "ExperimentConfig", "MetricKind", "PolicySpec", "ScorerSource",
    "SyntheticScenario", "census_like_scenario", "fraud_like_scenario", "load_config", "validate_config",
    "ScoreMatrix", "run_experiment", "make_policy",
]
