import numpy as np
import pytest

from mabdeploy.core import ChunkPlan, ExperimentConfig, MetricKind, PolicySpec, ScorerSource, SyntheticScenario

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def small_scenario(num_chunks=5, overfit=None, prevalence=0.3):
    return SyntheticScenario(
        num_features=4,
        drift_schedule=(0.0,) + (0.1,) * (num_chunks - 1),
        overfit_schedule=tuple(overfit) if overfit else (0.0,) * (num_chunks - 1),
        class_imbalance=prevalence,
        examples_per_chunk=400,
        signal_strength=2.5,
    )


def small_config(policy="naive", num_chunks=5, seed=3, **policy_kw):
    return ExperimentConfig(
        chunk_plan=ChunkPlan(num_chunks=num_chunks, batch_size=50, eval_start_chunk=2),
        metric=MetricKind.BALANCED_ACCURACY,
        policy_spec=PolicySpec(name=policy, **policy_kw),
        seed=seed,
        scorer_source=ScorerSource(kind="synthetic", scenario=small_scenario(num_chunks)),
    )


@pytest.fixture
def small_cfg():
    return small_config()


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
