"""Epsilon-greedy vs always-deploy-newest on the overfitting fraud-like stream, over several seeds.

    python3 scripts/fraud_trend.py --seeds 10
"""
import argparse
from dataclasses import replace
from pathlib import Path
from statistics import median

from mabdeploy.analysis import dominant_model_per_chunk
from mabdeploy.core import PolicySpec, load_config, with_seed
from mabdeploy.environment import run_experiment

CONFIG = Path(__file__).resolve().parent.parent / "configs" / "fraud_epsilon_greedy.json"


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--config", default=str(CONFIG))
    args = ap.parse_args()

    base = load_config(args.config)
    eval_start = base.chunk_plan.eval_start_chunk
    wins = 0
    print(f"{'seed':>4} {'eps-greedy':>10} {'naive':>8}  dominant (eps-greedy)")
    for seed in range(args.seeds):
        cfg = with_seed(base, seed)
        eps = run_experiment(cfg)
        naive = run_experiment(replace(cfg, policy_spec=PolicySpec(name="naive")))
        dom = [m for c, m in dominant_model_per_chunk(eps.events).items() if c >= eval_start]
        wins += eps.summary["overall"] >= naive.summary["overall"]
        print(f"{seed:>4} {eps.summary['overall']:>10.4f} {naive.summary['overall']:>8.4f}  {dom} (median {median(dom)})")
    print(f"epsilon-greedy at least as good as naive in {wins}/{args.seeds} seeds")


if __name__ == "__main__":
    main()
