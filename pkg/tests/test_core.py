import json
from dataclasses import replace

import pytest
from hypothesis import given, strategies as st

from mabdeploy.core import (ChunkPlan, ConfigError, ExperimentConfig, MetricKind, PolicySpec, ScorerSource,
                            census_like_scenario, config_from_dict, config_to_dict, dump_config,
                            fraud_like_scenario, load_config, save_config, validate_config)


def census_cfg(**policy):
    return ExperimentConfig(chunk_plan=ChunkPlan(8, 300, 2), policy_spec=PolicySpec(name="ucb", **policy),
                            scorer_source=ScorerSource(kind="synthetic", scenario=census_like_scenario()))


def names(exc):
    return {e.name for e in exc.value.errors}


def test_reference_hyperparameters_accepted():
    cfg = census_cfg(epsilon=0.1, c=0.1)
    assert validate_config(cfg) is cfg


def test_epsilon_one_is_on_the_boundary():
    validate_config(census_cfg(epsilon=1.0))


def test_zero_delta_rejected():
    with pytest.raises(ConfigError) as exc:
        validate_config(census_cfg(delta=0.0))
    assert names(exc) == {"policy_spec.delta"}


def test_every_violation_is_reported():
    cfg = replace(census_cfg(epsilon=1.5, c=-1.0, r_pos=0.0), chunk_plan=ChunkPlan(2, 0, 2), validation_fraction=1.0)
    with pytest.raises(ConfigError) as exc:
        validate_config(cfg)
    assert {"policy_spec.epsilon", "policy_spec.c", "policy_spec.r_pos", "chunk_plan.num_chunks",
            "chunk_plan.batch_size", "validation_fraction"} <= names(exc)


def test_eval_start_must_leave_a_chunk():
    with pytest.raises(ConfigError) as exc:
        cfg = replace(census_cfg(), chunk_plan=ChunkPlan(3, 10, 3),
                      scorer_source=ScorerSource(kind="synthetic", scenario=census_like_scenario(3)))
        validate_config(cfg)
    assert names(exc) == {"chunk_plan.eval_start_chunk"}


def test_schedule_lengths_checked_against_chunks():
    src = ScorerSource(kind="synthetic", scenario=fraud_like_scenario(num_chunks=6))
    with pytest.raises(ConfigError) as exc:
        validate_config(replace(census_cfg(), scorer_source=src))
    assert names(exc) == {"scorer_source.scenario.drift_schedule", "scorer_source.scenario.overfit_schedule"}


def test_replay_needs_path():
    with pytest.raises(ConfigError) as exc:
        validate_config(replace(census_cfg(), scorer_source=ScorerSource(kind="replay")))
    assert names(exc) == {"scorer_source.path"}


def test_unknown_keys_fail_closed():
    d = config_to_dict(census_cfg())
    d["policy_spec"]["epsilonn"] = 0.2
    d["extra"] = 1
    with pytest.raises(ConfigError) as exc:
        config_from_dict(d)
    assert names(exc) == {"policy_spec.epsilonn", "extra"}


def test_unknown_metric_rejected():
    d = config_to_dict(census_cfg())
    d["metric"] = "f1"
    with pytest.raises(ConfigError):
        config_from_dict(d)


def test_seed_must_fit_u64():
    with pytest.raises(ConfigError):
        validate_config(replace(census_cfg(), seed=2**64))
    validate_config(replace(census_cfg(), seed=2**64 - 1))


def test_file_round_trip(tmp_path):
    cfg = replace(census_cfg(), metric=MetricKind.PR_AUC, seed=2**63 + 11)
    save_config(cfg, tmp_path / "c.json")
    assert load_config(tmp_path / "c.json") == cfg


def test_bad_json_reports_line(tmp_path):
    p = tmp_path / "c.json"
    p.write_text("{\n  \"seed\": ,\n}")
    with pytest.raises(ConfigError, match="line 2"):
        load_config(p)


policy_specs = st.builds(
    PolicySpec,
    name=st.sampled_from(["naive", "validation", "ab_test", "epsilon_greedy", "ucb", "thompson"]),
    epsilon=st.floats(0, 1),
    epsilon_decay=st.floats(0, 10),
    c=st.floats(0, 5),
    alpha=st.floats(0.001, 0.999),
    power=st.floats(0.001, 0.999),
    delta=st.floats(1e-6, 1),
    prior_kappa=st.floats(0.01, 100),
    prior_alpha=st.floats(0.51, 100),
    prior_beta=st.floats(0.01, 100),
)


@given(policy_specs, st.integers(0, 2**64 - 1), st.sampled_from(list(MetricKind)),
       st.floats(0.01, 0.99), st.floats(0, 1))
def test_config_round_trips_bit_exactly(spec, seed, metric, frac, thr):
    cfg = ExperimentConfig(chunk_plan=ChunkPlan(8, 300, 2), metric=metric, policy_spec=spec, seed=seed,
                           scorer_source=ScorerSource(kind="synthetic", scenario=fraud_like_scenario()),
                           validation_fraction=frac, metric_threshold=thr)
    text = dump_config(cfg)
    back = config_from_dict(json.loads(text))
    assert back == cfg
    assert dump_config(back) == text


@given(policy_specs)
def test_validate_is_idempotent(spec):
    cfg = replace(census_cfg(), policy_spec=spec)
    assert validate_config(validate_config(cfg)) == cfg
