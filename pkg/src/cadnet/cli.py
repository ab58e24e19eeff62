"""Experiment runner CLI.

Subcommands mirror the benchmark protocols: `train` runs n seeded runs of one
configuration and appends a summary row (mean/std/bootstrap CI), `sweep`
crosses a parameter's value list with the runs, `validate` checks a dataset
file structurally and against the published statistics. All results go to
CSV with the full resolved configuration in every row, so any row can be
re-run bit-exactly from its own fields.

Exit codes: 0 success, 1 validation failure, 2 usage/IO error.
"""

from __future__ import annotations

import argparse
import csv
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields

import numpy as np

from .config import ExperimentConfig, parse_field
from .data import DataFormatError, Dataset, SplitSpec, load_dataset, make_split
from .presets import BENCHMARK_STATS, DEFAULT_SPLIT, PRESETS
from .stats import aggregate_stats
from .training import train

SPLIT_SALT = 0x5EED17
BOOT_SALT = 0xB005


@dataclass
class RunPlan:
    """One resolved experiment: dataset, config, split protocol, run count,
    optional sweep, and where the CSV goes."""

    dataset_path: str
    config: ExperimentConfig
    n_runs: int
    split: SplitSpec
    seed_base: int = 0
    jobs: int = 1
    sweep: tuple[str, list] | None = None
    out_path: str | None = None
    gamma_out: str | None = None
    n_boot: int = 10000

    def validate(self) -> "RunPlan":
        if self.n_runs < 1:
            raise ValueError("runs must be >= 1")
        if self.sweep is not None:
            name = self.sweep[0]
            known = {f.name for f in fields(ExperimentConfig)} | {"train_per_class"}
            if name not in known:
                raise ValueError(f"unknown sweep parameter {name!r}")
        return self


CONFIG_COLUMNS = [f.name for f in fields(ExperimentConfig) if f.name != "seed"]
CSV_COLUMNS = (
    ["row", "dataset", "config_hash", "split_kind", "train_per_class"]
    + CONFIG_COLUMNS
    + ["sweep_param", "sweep_value", "seed", "split_id",
       "test_acc", "best_val_epoch", "wall_clock_ms",
       "n_runs", "mean_acc", "std_acc", "ci_low", "ci_high"]
)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


@dataclass
class _RunTask:
    path: str
    dataset_name: str
    cfg: ExperimentConfig
    split: SplitSpec
    sweep_param: str | None
    sweep_value: str | None


_dataset_cache: dict = {}


def _cached_dataset(path: str, row_normalize: bool) -> Dataset:
    key = (path, row_normalize)
    if key not in _dataset_cache:
        _dataset_cache[key] = load_dataset(path, row_normalize=row_normalize)
    return _dataset_cache[key]


def _split_id(spec: SplitSpec, seed: int) -> str:
    if spec.kind == "standard" and spec.train_per_class is None:
        return "standard"
    if spec.kind == "standard":
        return f"standard-tpc{spec.train_per_class}-seed{seed}"
    return f"{spec.kind}-seed{seed}"


def _execute_run(task: _RunTask) -> dict:
    d = _cached_dataset(task.path, task.cfg.row_normalize)
    rng = np.random.default_rng((task.cfg.seed, SPLIT_SALT))
    splits = make_split(d, task.split, rng)
    result = train(d.graph, d.features, d.labels, splits, task.cfg)
    row = {
        "row": "run",
        "dataset": task.dataset_name,
        "config_hash": task.cfg.content_hash(),
        "split_kind": task.split.kind,
        "train_per_class": task.split.train_per_class,
        "sweep_param": task.sweep_param,
        "sweep_value": task.sweep_value,
        "seed": task.cfg.seed,
        "split_id": _split_id(task.split, task.cfg.seed),
        "test_acc": result.test_accuracy,
        "best_val_epoch": result.best_val_epoch,
        "wall_clock_ms": result.wall_clock_ms,
    }
    for name in CONFIG_COLUMNS:
        row[name] = getattr(task.cfg, name)
    row["_gamma"] = result.gamma_histogram
    return row


def run_plan(plan: RunPlan) -> list[dict]:
    """Execute every (sweep value x run) and append per-group summary rows."""
    plan.validate()
    dataset_name = _cached_dataset(plan.dataset_path, plan.config.row_normalize).name

    groups: list[tuple[str | None, str | None, ExperimentConfig, SplitSpec]] = []
    if plan.sweep is None:
        groups.append((None, None, plan.config, plan.split))
    else:
        name, values = plan.sweep
        for value in values:
            if name == "train_per_class":
                cfg = plan.config
                split = SplitSpec(plan.split.kind, int(value),
                                  plan.split.val_size, plan.split.test_size)
            else:
                cfg = plan.config.with_overrides(**{name: value})
                split = plan.split
            groups.append((name, _fmt(value), cfg, split))

    tasks = []
    for sweep_param, sweep_value, cfg, split in groups:
        for i in range(plan.n_runs):
            tasks.append(_RunTask(plan.dataset_path, dataset_name,
                                  cfg.with_overrides(seed=plan.seed_base + i).validate(),
                                  split, sweep_param, sweep_value))

    if plan.jobs > 1:
        with ProcessPoolExecutor(max_workers=plan.jobs) as pool:
            results = list(pool.map(_execute_run, tasks))
    else:
        results = [_execute_run(t) for t in tasks]

    rows: list[dict] = []
    for gi, (sweep_param, sweep_value, cfg, split) in enumerate(groups):
        group_rows = results[gi * plan.n_runs:(gi + 1) * plan.n_runs]
        rows.extend(group_rows)
        summary = {
            "row": "summary",
            "dataset": dataset_name,
            "config_hash": cfg.content_hash(),
            "split_kind": split.kind,
            "train_per_class": split.train_per_class,
            "sweep_param": sweep_param,
            "sweep_value": sweep_value,
            "n_runs": plan.n_runs,
        }
        for name in CONFIG_COLUMNS:
            summary[name] = getattr(cfg, name)
        accs = [r["test_acc"] for r in group_rows]
        if plan.n_runs >= 2:
            st = aggregate_stats(accs, n_boot=plan.n_boot,
                                 rng=np.random.default_rng((plan.seed_base, BOOT_SALT)))
            summary.update(mean_acc=st.mean, std_acc=st.std,
                           ci_low=st.ci_low, ci_high=st.ci_high)
        else:
            summary.update(mean_acc=accs[0])
        rows.append(summary)
    return rows


def write_csv(rows: list[dict], stream) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in rows:
        writer.writerow([_fmt(row.get(col)) for col in CSV_COLUMNS])


def write_gamma_csv(rows: list[dict], stream) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(["seed", "node", "gamma"])
    for row in rows:
        if row.get("row") != "run":
            continue
        for node, value in enumerate(row.get("_gamma", [])):
            writer.writerow([row["seed"], node, repr(value)])


# -- argument handling --------------------------------------------------------

def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--preset", choices=sorted(PRESETS))
    p.add_argument("--config", help="key=value config file applied over the preset")
    p.add_argument("--aggregator",
                   choices=["adacad", "cad_only", "rw", "symna", "ppr", "hk", "none"])
    p.add_argument("--K", type=int, dest="K")
    p.add_argument("--beta", type=float)
    p.add_argument("--hidden", type=int)
    p.add_argument("--lr", type=float, dest="lr0")
    p.add_argument("--epochs", type=int)
    p.add_argument("--leak-slope", type=float, dest="leak_slope")
    p.add_argument("--p-drop", type=float, dest="p_drop")
    p.add_argument("--weight-decay", type=float, dest="weight_decay")
    p.add_argument("--lambda-ent", type=float, dest="lambda_ent")
    p.add_argument("--entropy-reduction", choices=["mean", "sum"],
                   dest="entropy_reduction")
    p.add_argument("--lr-drop-every", type=int, dest="lr_drop_every")
    p.add_argument("--lr-drop-factor", type=float, dest="lr_drop_factor")
    p.add_argument("--early-stop-window", type=int, dest="early_stop_window")
    p.add_argument("--early-stop-metric", choices=["acc", "loss"],
                   dest="early_stop_metric")
    p.add_argument("--self-loops", choices=["on", "off"])
    p.add_argument("--row-normalize", choices=["on", "off"])
    p.add_argument("--detach-transition", action="store_true", default=None)
    p.add_argument("--ppr-alpha", type=float, dest="ppr_alpha")
    p.add_argument("--hk-time", type=float, dest="hk_time")


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--dataset", required=True)
    _add_config_flags(p)
    p.add_argument("--runs", type=int, default=1)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--seed-base", type=int, default=0, dest="seed_base")
    p.add_argument("--split", choices=["standard", "random-planetoid", "random-per-class"])
    p.add_argument("--train-per-class", type=int, dest="train_per_class")
    p.add_argument("--val-size", type=int, dest="val_size")
    p.add_argument("--test-size", type=int, dest="test_size")
    p.add_argument("--boot", type=int, default=10000,
                   help="bootstrap resamples for the summary CI")
    p.add_argument("--out", help="CSV output path (default: stdout)")
    p.add_argument("--gamma-out", dest="gamma_out",
                   help="write per-node gamma values of each run to this CSV")


def resolve_config(args) -> ExperimentConfig:
    cfg = PRESETS[args.preset] if args.preset else ExperimentConfig()
    if args.config:
        overrides = {}
        with open(args.config, "r", encoding="utf-8") as fh:
            for ln, raw in enumerate(fh, start=1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ValueError(f"{args.config}:{ln}: expected key=value, got {line!r}")
                key, _, value = line.partition("=")
                overrides[key.strip()] = parse_field(key.strip(), value)
        cfg = cfg.with_overrides(**overrides)
    flag_fields = ["aggregator", "K", "beta", "hidden", "lr0", "epochs",
                   "leak_slope", "p_drop", "weight_decay", "lambda_ent",
                   "entropy_reduction", "lr_drop_every", "lr_drop_factor",
                   "early_stop_window", "early_stop_metric", "detach_transition",
                   "ppr_alpha", "hk_time"]
    overrides = {name: getattr(args, name) for name in flag_fields
                 if getattr(args, name, None) is not None}
    if args.self_loops is not None:
        overrides["self_loops"] = args.self_loops == "on"
    if args.row_normalize is not None:
        overrides["row_normalize"] = args.row_normalize == "on"
    return cfg.with_overrides(**overrides).validate()


def resolve_split(args, dataset_name: str) -> SplitSpec:
    kind = args.split or DEFAULT_SPLIT.get(dataset_name, "standard")
    return SplitSpec(kind=kind, train_per_class=args.train_per_class,
                     val_size=args.val_size,
                     test_size=args.test_size if args.test_size is not None else
                     (1000 if kind == "random-planetoid" else None))


def _build_plan(args, sweep=None) -> RunPlan | int:
    try:
        cfg = resolve_config(args)
    except (ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        d = _cached_dataset(args.dataset, cfg.row_normalize)
    except FileNotFoundError:
        print(f"error: dataset file not found: {args.dataset}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: cannot read {args.dataset}: {exc}", file=sys.stderr)
        return 2
    except DataFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    plan = RunPlan(dataset_path=args.dataset, config=cfg, n_runs=args.runs,
                   split=resolve_split(args, d.name), seed_base=args.seed_base,
                   jobs=args.jobs, sweep=sweep, out_path=args.out,
                   gamma_out=args.gamma_out, n_boot=args.boot)
    try:
        plan.validate()
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return plan


def _emit(plan: RunPlan) -> int:
    try:
        rows = run_plan(plan)
    except (ValueError, DataFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if plan.out_path:
        with open(plan.out_path, "w", encoding="utf-8") as fh:
            write_csv(rows, fh)
    else:
        write_csv(rows, sys.stdout)
    if plan.gamma_out:
        with open(plan.gamma_out, "w", encoding="utf-8") as fh:
            write_gamma_csv(rows, fh)
    return 0


def cmd_train(args) -> int:
    plan = _build_plan(args)
    if isinstance(plan, int):
        return plan
    return _emit(plan)


def cmd_sweep(args) -> int:
    try:
        values = [parse_field(args.param, v) if args.param != "train_per_class"
                  else int(v) for v in args.values.split(",")]
    except (ValueError, KeyError) as exc:
        print(f"error: bad sweep values: {exc}", file=sys.stderr)
        return 2
    plan = _build_plan(args, sweep=(args.param, values))
    if isinstance(plan, int):
        return plan
    return _emit(plan)


def cmd_validate(args) -> int:
    try:
        d = load_dataset(args.dataset)
    except DataFormatError as exc:
        print(f"FAIL: {exc}")
        return 1
    except OSError as exc:
        print(f"error: cannot read {args.dataset}: {exc}", file=sys.stderr)
        return 2
    print(f"structure OK: {d.name} ({d.n_nodes} nodes, {d.graph.n_edges} edges, "
          f"{d.n_features} features, {d.n_classes} classes)")
    failures = 0
    if d.name in BENCHMARK_STATS:
        nodes, edges, feats, classes = BENCHMARK_STATS[d.name]
        for label, got, want in (("nodes", d.n_nodes, nodes),
                                 ("edges", d.graph.n_edges, edges),
                                 ("features", d.n_features, feats),
                                 ("classes", d.n_classes, classes)):
            if got == want:
                print(f"{label} {got} OK")
            else:
                print(f"{label} {got} MISMATCH (expected {want})")
                failures += 1
        if DEFAULT_SPLIT.get(d.name) == "standard":
            if d.standard_split is None:
                print("standard split MISSING")
                failures += 1
            else:
                sizes = {k: v.size for k, v in d.standard_split.items()}
                want_sizes = {"train": 20 * d.n_classes, "val": 500, "test": 1000}
                for part, want in want_sizes.items():
                    if sizes[part] == want:
                        print(f"split {part} {sizes[part]} OK")
                    else:
                        print(f"split {part} {sizes[part]} MISMATCH (expected {want})")
                        failures += 1
    else:
        print(f"no published statistics for {d.name!r}; structural checks only")
    return 1 if failures else 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="cadnet",
        description="Class-attentive diffusion experiments on node-classification benchmarks")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="run n seeded training runs of one config")
    _add_run_flags(p_train)
    p_train.set_defaults(func=cmd_train)

    p_sweep = sub.add_parser("sweep", help="cross a parameter value list with the runs")
    _add_run_flags(p_sweep)
    p_sweep.add_argument("--param", required=True,
                         help="config field to sweep (or train_per_class)")
    p_sweep.add_argument("--values", required=True,
                         help="comma-separated sweep values")
    p_sweep.set_defaults(func=cmd_sweep)

    p_val = sub.add_parser("validate", help="check a dataset file")
    p_val.add_argument("--dataset", required=True)
    p_val.set_defaults(func=cmd_validate)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
