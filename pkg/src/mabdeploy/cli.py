"""Command-line entry point.

    mabdeploy run <config.json> -o <dir> [--seed N] [--force]
    mabdeploy sweep <sweep.json> -o <dir> [--jobs N] [--per-variant-seeds] [--seed N] [--force]
    mabdeploy analyze <events.csv> -o <dir> [--eval-start K] [--force]

Exit status: 0 success, 1 invalid input (config, sweep spec, log, output
dir), 2 runtime failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import analysis
from .core import ConfigError, InvalidField, PolicySpec, config_from_dict, config_to_dict, load_config, with_seed
from .environment import run_experiment, write_run

log = logging.getLogger("mabdeploy")

EXIT_OK, EXIT_INPUT, EXIT_RUNTIME = 0, 1, 2
SWEEP_KEYS = {"base", "variants", "seeds"}


class UsageError(Exception):
    pass


def _prepare_out(path, force: bool) -> Path:
    out = Path(path)
    if out.exists() and not out.is_dir():
        raise UsageError(f"{out} exists and is not a directory")
    if out.exists() and any(out.iterdir()) and not force:
        raise UsageError(f"{out} is not empty; pass --force to overwrite")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load(path, seed):
    path = Path(path)
    if not path.is_file():
        raise UsageError(f"config file {path} not found")
    cfg = load_config(path)
    if seed is not None:
        cfg = with_seed(cfg, seed)
    return cfg


def _fmt_row(name, summary) -> str:
    chunks = " ".join(f"{s:.4f}" for s in summary["chunk_scores"])
    return f"{name:<24} {summary['overall']:.4f}  [{chunks}]"


def cmd_run(args) -> int:
    cfg = _load(args.config, args.seed)
    out = _prepare_out(args.output, args.force)
    result = run_experiment(cfg, base_dir=Path(args.config).parent)
    write_run(result, out, cfg.chunk_plan.eval_start_chunk)
    print(_fmt_row(cfg.policy_spec.name, result.summary))
    return EXIT_OK


def variant_seed(base_seed: int, index: int) -> int:
    ss = np.random.SeedSequence(base_seed, spawn_key=(index,))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def load_sweep(path, seed=None, per_variant_seeds=False):
    """Expand a sweep spec into ``[(name, config)]``; variants overlay the base policy_spec."""
    path = Path(path)
    if not path.is_file():
        raise UsageError(f"sweep file {path} not found")
    try:
        spec = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError([InvalidField("<file>", f"invalid JSON at line {exc.lineno}: {exc.msg}")]) from None
    if not isinstance(spec, dict):
        raise ConfigError([InvalidField("<root>", "must be a JSON object")])
    errs = [InvalidField(k, "unknown key") for k in sorted(set(spec) - SWEEP_KEYS)]
    variants = spec.get("variants")
    if not isinstance(variants, list) or not variants:
        errs.append(InvalidField("variants", "must be a non-empty list"))
    seeds = spec.get("seeds", "same")
    if seeds not in ("same", "per_variant"):
        errs.append(InvalidField("seeds", "must be 'same' or 'per_variant'"))
    if errs:
        raise ConfigError(errs)
    base = config_from_dict(spec.get("base", {}))
    if seed is not None:
        base = with_seed(base, seed)
    per_variant_seeds = per_variant_seeds or seeds == "per_variant"
    out = []
    for i, v in enumerate(variants):
        if not isinstance(v, dict) or set(v) - {"name", "policy_spec"}:
            raise ConfigError([InvalidField(f"variants[{i}]", "allowed keys are name, policy_spec")])
        d = config_to_dict(base)
        d["policy_spec"].update(v.get("policy_spec", {}))
        try:
            cfg = config_from_dict(d)
        except ConfigError as exc:
            raise ConfigError([InvalidField(f"variants[{i}].{e.name}", e.reason) for e in exc.errors]) from None
        if per_variant_seeds:
            cfg = with_seed(cfg, variant_seed(base.seed, i))
        out.append((str(v.get("name") or f"{i:02d}_{cfg.policy_spec.name}"), cfg))
    names = [n for n, _ in out]
    if len(set(names)) != len(names):
        raise ConfigError([InvalidField("variants", "variant names must be unique")])
    return out


def _run_variant(job):
    name, cfg, out_dir, base_dir = job
    try:
        result = run_experiment(cfg, base_dir=base_dir)
        write_run(result, out_dir, cfg.chunk_plan.eval_start_chunk)
        return name, result.summary, None
    except Exception as exc:  # recorded per variant, the sweep carries on
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        (Path(out_dir) / "error.txt").write_text(f"{type(exc).__name__}: {exc}\n", encoding="utf-8")
        return name, None, f"{type(exc).__name__}: {exc}"


def comparison_csv(rows, eval_chunks) -> str:
    header = ["variant", "policy", "seed", "status", "overall"] + [f"chunk_{c}" for c in eval_chunks]
    lines = [",".join(header)]
    for name, cfg, summary, err in rows:
        if summary is None:
            vals = [""] * (1 + len(eval_chunks))
            status = "error"
        else:
            vals = [f"{summary['overall']:.6f}"] + [f"{s:.6f}" for s in summary["chunk_scores"]]
            status = "ok"
        lines.append(",".join([name, cfg.policy_spec.name, str(cfg.seed), status] + vals))
    return "\n".join(lines) + "\n"


def cmd_sweep(args) -> int:
    variants = load_sweep(args.sweep, args.seed, args.per_variant_seeds)
    out = _prepare_out(args.output, args.force)
    base_dir = Path(args.sweep).parent
    jobs = [(name, cfg, out / name, base_dir) for name, cfg in variants]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_run_variant, jobs))
    else:
        results = [_run_variant(j) for j in jobs]
    plan = variants[0][1].chunk_plan
    eval_chunks = list(range(plan.eval_start_chunk, plan.num_chunks))
    rows = [(name, cfg, summary, err) for (name, cfg), (_, summary, err) in zip(variants, results)]
    (out / "comparison.csv").write_text(comparison_csv(rows, eval_chunks), encoding="utf-8")
    failed = 0
    for name, _, summary, err in rows:
        if summary is None:
            failed += 1
            print(f"{name:<24} FAILED  {err}")
            log.error("variant %s failed: %s", name, err)
        else:
            print(_fmt_row(name, summary))
    return EXIT_RUNTIME if failed else EXIT_OK


def cmd_analyze(args) -> int:
    events = Path(args.events)
    if not events.is_file():
        raise UsageError(f"event log {events} not found")
    try:
        records = analysis.read_events_csv(events)
    except analysis.LogParseError as exc:
        raise UsageError(f"{events}:{exc.line}: {exc}") from None
    out = _prepare_out(args.output, args.force)
    analysis.write_analysis(records, out, args.eval_start)
    scores, overall = analysis.chunk_scores(records, args.eval_start)
    print(_fmt_row(events.stem, {"overall": overall, "chunk_scores": list(scores.values())}))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mabdeploy", description="Simulate model-deployment policies on a chunked stream.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one experiment")
    r.add_argument("config")
    r.add_argument("-o", "--output", required=True)
    r.add_argument("--seed", type=int)
    r.add_argument("--force", action="store_true")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="run several policy variants and compare them")
    s.add_argument("sweep")
    s.add_argument("-o", "--output", required=True)
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--seed", type=int)
    s.add_argument("--per-variant-seeds", action="store_true")
    s.add_argument("--force", action="store_true")
    s.set_defaults(func=cmd_sweep)

    a = sub.add_parser("analyze", help="rebuild analysis artifacts from an event log")
    a.add_argument("events")
    a.add_argument("-o", "--output", required=True)
    a.add_argument("--eval-start", type=int, default=2)
    a.add_argument("--force", action="store_true")
    a.set_defaults(func=cmd_analyze)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    if getattr(args, "jobs", 1) < 1:
        print("error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_INPUT
    try:
        return args.func(args)
    except ConfigError as exc:
        print("invalid configuration:", file=sys.stderr)
        for e in exc.errors:
            print(f"  {e}", file=sys.stderr)
        return EXIT_INPUT
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:
        log.debug("runtime failure", exc_info=True)
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
