"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import fields, replace
from pathlib import Path

from .core import CohortSchema, criteria_from_profile, fmt, load_cohort, load_profile, write_cohort
from .errors import DimensionMismatch, PrefRewardError
from .evolve import GAConfig
from .metrics import temporal_eval, write_eval_rows
from .pareto import DominanceMode, domination_pairs, write_pairs
from .reward import RewardModel, TrainConfig, TransformKind, fit_reward
from .simulator import (
    SimConfig,
    SyntheticTask,
    aggregate_traces,
    make_cohort,
    make_task,
    profile_of,
    run_dmta,
    write_aggregate,
    write_traces,
)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _kinds(text: str) -> list[TransformKind]:
    try:
        return [TransformKind.parse(k) for k in text.split(",") if k.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad kind list {text!r}; use sigmoid/gaussian") from None


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    return json.loads(Path(path).read_text(encoding="utf-8"))


def _known(cls, doc: dict, section: str) -> dict:
    allowed = {f.name for f in fields(cls)}
    unknown = set(doc) - allowed
    if unknown:
        raise ValueError(f"unknown {section} config keys: {sorted(unknown)}")
    return doc


def _train_config(args, doc: dict) -> TrainConfig:
    cfg = TrainConfig(**_known(TrainConfig, doc.get("train", {}), "train"))
    overrides = {
        "epochs": args.epochs,
        "step_size": args.step_size,
        "max_pairs_per_epoch": args.max_pairs,
        "optimizer": args.optimizer,
    }
    cfg = replace(cfg, **{k: v for k, v in overrides.items() if v is not None})
    return replace(cfg, seed=args.seed)


def _add_train_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--epochs", type=int)
    p.add_argument("--step-size", type=float)
    p.add_argument("--max-pairs", type=int, help="maximum pairs per epoch")
    p.add_argument("--optimizer", choices=["adam", "gd"])
    p.add_argument("--restarts", type=int, default=4)
    p.add_argument("--config", help="JSON document with 'train' (and 'ga', 'sim') sections")


def _add_cohort_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--cohort", required=True, help="cohort CSV")
    p.add_argument("--profile", required=True, help="profile JSON")
    p.add_argument("--schema", help="JSON column mapping for the cohort CSV")
    p.add_argument("--mode", choices=["strict", "weak"], default="strict")


def _cohort_and_criteria(args):
    schema = CohortSchema.from_dict(_load_config(args.schema)) if args.schema else None
    table = load_cohort(args.cohort, schema)
    profile = load_profile(args.profile)
    criteria = criteria_from_profile(profile)
    if criteria.K != table.K:
        raise DimensionMismatch(f"profile has {criteria.K} assays, cohort has {table.K}")
    if table.assay_names and list(table.assay_names) != profile.names:
        raise DimensionMismatch(
            f"profile assays {profile.names} do not match cohort assays {list(table.assay_names)}"
        )
    return table, criteria


def _component_kinds(args, n: int) -> list[TransformKind]:
    kinds = args.kinds or [TransformKind.SIGMOID] * n
    if len(kinds) != n:
        raise DimensionMismatch(f"{len(kinds)} transform kinds given for {n} components")
    return kinds


def cmd_simulate(args) -> None:
    doc = _load_config(args.config)
    if args.task:
        task = SyntheticTask.from_dict(json.loads(Path(args.task).read_text(encoding="utf-8")))
    else:
        task = make_task(args.task_seed, args.d, args.kinds or ["sigmoid", "gaussian"])
    sim_doc = _known(SimConfig, doc.get("sim", {}), "sim")
    ga = GAConfig(**_known(GAConfig, doc.get("ga", {}), "ga"))
    train_cfg = TrainConfig(**_known(TrainConfig, doc.get("train", {}), "train"))
    cfg = SimConfig(**{**sim_doc, "ga": ga, "train": train_cfg})
    overrides = {
        "cycles": args.cycles,
        "repeats": args.repeats,
        "seed_pool": args.seed_pool,
        "keep_per_cycle": args.keep,
        "selection": args.selection,
        "seed_with": args.seed_with,
        "restarts": args.restarts,
    }
    cfg = replace(cfg, **{k: v for k, v in overrides.items() if v is not None})
    cfg = replace(cfg, master_seed=args.seed, dominance=DominanceMode(args.mode))
    traces = run_dmta(task, cfg, guidance=args.guidance)
    write_traces(traces, args.out)
    agg_path = args.aggregate_out or str(Path(args.out).with_name(Path(args.out).stem + "_aggregate.csv"))
    write_aggregate(aggregate_traces(traces), agg_path)


def cmd_train_reward(args) -> None:
    table, criteria = _cohort_and_criteria(args)
    cfg = _train_config(args, _load_config(args.config))
    pairs = domination_pairs(table, criteria, DominanceMode(args.mode))
    kinds = _component_kinds(args, table.N)
    model, report = fit_reward(kinds, pairs, table, cfg, args.restarts, args.standardize)
    model.save(args.out)
    if args.report:
        with open(args.report, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["epoch", "loss", "final_pair_accuracy"])
            last = len(report.loss_per_epoch)
            for e, value in enumerate(report.loss_per_epoch, start=1):
                w.writerow([e, fmt(value), fmt(report.final_pair_accuracy) if e == last else ""])


def cmd_eval_temporal(args) -> None:
    table, criteria = _cohort_and_criteria(args)
    if not table.has_evaluations:
        raise DimensionMismatch("cohort needs an 'eval' column for temporal evaluation")
    reference = RewardModel.load(args.reference)
    if reference.N != table.N:
        raise DimensionMismatch(f"reference model has {reference.N} components, cohort has {table.N}")
    cfg = _train_config(args, _load_config(args.config))
    kinds = _component_kinds(args, table.N)
    cycles = sorted(set(int(c) for c in table.cycles))
    first = args.first_cycle if args.first_cycle is not None else max(cycles[0] + 1, 1)
    last = args.last_cycle if args.last_cycle is not None else cycles[-1]
    rows = temporal_eval(
        table, criteria, kinds, reference, cfg, first, last,
        mode=DominanceMode(args.mode), restarts=args.restarts,
    )
    write_eval_rows(rows, args.out)


def cmd_gen_task(args) -> None:
    task = make_task(args.seed, args.d, args.kinds or ["sigmoid", "gaussian"])
    text = task.dumps()
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_gen_cohort(args) -> None:
    if args.task:
        task = SyntheticTask.from_dict(json.loads(Path(args.task).read_text(encoding="utf-8")))
    else:
        task = make_task(args.task_seed, args.d, args.kinds or ["sigmoid", "gaussian"])
    write_cohort(make_cohort(task, args.n, args.cycles, args.seed), args.out)
    if args.profile_out:
        prof = profile_of(task)
        doc = {"assays": [
            {"name": a.name,
             "lower": None if a.lower == float("-inf") else a.lower,
             "upper": None if a.upper == float("inf") else a.upper}
            for a in prof.assays
        ]}
        Path(args.profile_out).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def cmd_pairs(args) -> None:
    table, criteria = _cohort_and_criteria(args)
    write_pairs(domination_pairs(table, criteria, DominanceMode(args.mode)), args.out)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="paretoreward", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="run simulated design cycles")
    p.add_argument("--task-seed", type=int, default=101)
    p.add_argument("--task", help="task JSON (overrides --task-seed)")
    p.add_argument("--kinds", type=_kinds, help="comma-separated transform kinds")
    p.add_argument("--d", type=int, default=16)
    p.add_argument("--selection", choices=["topk", "kmeans"])
    p.add_argument("--guidance", choices=["learned", "oracle"], default="learned")
    p.add_argument("--cycles", type=int)
    p.add_argument("--repeats", type=int)
    p.add_argument("--seed-pool", type=int)
    p.add_argument("--keep", type=int, help="designs kept per cycle")
    p.add_argument("--seed-with", choices=["pool", "selected"])
    p.add_argument("--restarts", type=int)
    p.add_argument("--mode", choices=["strict", "weak"], default="strict")
    p.add_argument("--config", help="JSON document with 'sim', 'ga', 'train' sections")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--aggregate-out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("train-reward", help="fit a reward model to a cohort")
    _add_cohort_flags(p)
    _add_train_flags(p)
    p.add_argument("--kinds", type=_kinds, help="transform kind per component (default: sigmoid)")
    p.add_argument("--standardize", action="store_true", help="initialise on standardised components")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="model JSON")
    p.add_argument("--report", help="per-epoch loss CSV")
    p.set_defaults(func=cmd_train_reward)

    p = sub.add_parser("eval-temporal", help="per-cycle rank evaluation against a reference model")
    _add_cohort_flags(p)
    _add_train_flags(p)
    p.add_argument("--reference", required=True, help="reference model JSON")
    p.add_argument("--kinds", type=_kinds)
    p.add_argument("--first-cycle", type=int)
    p.add_argument("--last-cycle", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval_temporal)

    p = sub.add_parser("gen-task", help="write a synthetic task description")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--d", type=int, default=16)
    p.add_argument("--kinds", type=_kinds)
    p.add_argument("--out")
    p.set_defaults(func=cmd_gen_task)

    p = sub.add_parser("gen-cohort", help="write a synthetic cohort CSV (and matching profile)")
    p.add_argument("--task-seed", type=int, default=0)
    p.add_argument("--task")
    p.add_argument("--kinds", type=_kinds)
    p.add_argument("--d", type=int, default=16)
    p.add_argument("--n", type=int, default=500)
    p.add_argument("--cycles", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--profile-out")
    p.set_defaults(func=cmd_gen_cohort)

    p = sub.add_parser("pairs", help="write the dominance pairs of a cohort")
    _add_cohort_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_pairs)
    return parser


def cli_main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        print(e, file=sys.stderr)
        return 1
    except SystemExit as e:  # --help
        return 0 if e.code in (0, None) else 1
    try:
        args.func(args)
    except (PrefRewardError, ValueError, KeyError, OSError, json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    return 0


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
