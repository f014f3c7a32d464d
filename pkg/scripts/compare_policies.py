"""Run all six deployment policies on one scenario and print a score table.

    python3 scripts/compare_policies.py --scenario census --seed 7
"""
import argparse
from dataclasses import replace

from mabdeploy.core import (ChunkPlan, ExperimentConfig, MetricKind, PolicySpec, ScorerSource,
                            census_like_scenario, fraud_like_scenario)
from mabdeploy.environment import run_experiment

SCENARIOS = {
    "census": (census_like_scenario, MetricKind.BALANCED_ACCURACY, 300, 0.1),
    "fraud": (fraud_like_scenario, MetricKind.PR_AUC, 700, 1.0),
}


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--scenario", choices=sorted(SCENARIOS), default="census")
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--epsilon", type=float, default=0.3)
    args = ap.parse_args()

    make, metric, batch, c = SCENARIOS[args.scenario]
    cfg = ExperimentConfig(chunk_plan=ChunkPlan(8, batch, 2), metric=metric, seed=args.seed,
                           policy_spec=PolicySpec(name="naive"),
                           scorer_source=ScorerSource(kind="synthetic", scenario=make()))
    print(f"{args.scenario}, {metric.value}, seed {args.seed}")
    for name in ("validation", "naive", "ab_test", "epsilon_greedy", "ucb", "thompson"):
        res = run_experiment(replace(cfg, policy_spec=PolicySpec(name=name, epsilon=args.epsilon, c=c)))
        chunks = ", ".join(f"{s:.4f}" for s in res.summary["chunk_scores"])
        print(f"{name:<16} {res.summary['overall']:.4f}  [{chunks}]")


if __name__ == "__main__":
    main()
