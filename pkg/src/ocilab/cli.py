"""Command-line entry points.

Subcommands: generate (scenario config -> JSON), validate (scenario JSON ->
violations), import-dataset (image folder -> feature manifest), run (one
experiment), suite (grid file -> all runs + summary), report (results dir
-> CSV/Markdown tables).

Exit codes: 0 success, 1 config error, 2 data error, 3 runtime divergence.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import (
    parse_kv_file,
    run_config_from_dict,
    scenario_config_from_mapping,
)
from .dataset import import_image_folder
from .errors import ConfigError, DataError, DivergenceError, OcilabError, ScenarioError
from .harness import RunConfig, run_experiment, run_suite
from .learner import SgdConfig
from .report import (
    aggregate,
    cells_to_csv,
    cells_to_markdown,
    rows_from_results_dir,
    suite_rows_to_csv,
)
from .scenario import (
    build_scenario,
    dump_scenario,
    load_scenario,
    scenario_warnings,
    validate_scenario,
)


def _add_scenario_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--scenario-config", help="key=value scenario config file")
    parser.add_argument("--total-classes", dest="total_classes")
    parser.add_argument("--num-tasks", dest="num_tasks")
    parser.add_argument("--category", dest="category")
    parser.add_argument("--alpha-set", dest="alpha_set", help="comma-separated integers")
    parser.add_argument("--beta-set", dest="beta_set", help="comma-separated integers")
    parser.add_argument("--distribution", dest="distribution", choices=["exponential", "gaussian"])
    parser.add_argument("--exponential-rate", dest="exponential_rate")
    parser.add_argument("--gaussian-std", dest="gaussian_std")
    parser.add_argument("--class-cap", dest="class_cap")
    parser.add_argument(
        "--samples-per-class", dest="samples_per_class",
        help="integer budget for every class, or id:count pairs",
    )
    parser.add_argument("--scenario-seed", dest="rng_seed")


_SCENARIO_FLAG_KEYS = (
    "total_classes", "num_tasks", "category", "alpha_set", "beta_set",
    "distribution", "exponential_rate", "gaussian_std", "class_cap",
    "samples_per_class", "rng_seed",
)


def _scenario_from_args(args: argparse.Namespace):
    mapping = parse_kv_file(args.scenario_config) if args.scenario_config else {}
    overrides = {key: getattr(args, key) for key in _SCENARIO_FLAG_KEYS}
    return scenario_config_from_mapping(mapping, overrides)


def _cmd_generate(args: argparse.Namespace) -> int:
    cfg = _scenario_from_args(args)
    scenario = build_scenario(cfg)
    text = dump_scenario(scenario)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    for warning in scenario_warnings(scenario):
        print(f"warning: {warning}", file=sys.stderr)
    if args.stats:
        introduced = len(scenario.introduced_classes())
        sizes = [t.num_classes for t in scenario.tasks]
        print(
            f"tasks={scenario.num_tasks} distinct_classes={introduced} "
            f"task_class_counts={sizes}",
            file=sys.stderr,
        )
    return 0


def _cmd_validate(args: argparse.Namespace) -> int:
    scenario = load_scenario(args.scenario)
    violations = validate_scenario(scenario)
    for message in violations:
        print(f"violation: {message}")
    for warning in scenario_warnings(scenario):
        print(f"warning: {warning}")
    if violations:
        print(f"{len(violations)} violation(s)")
        return 1
    print("ok")
    return 0


def _cmd_import_dataset(args: argparse.Namespace) -> int:
    try:
        width, height = (int(v) for v in args.size.lower().split("x"))
    except ValueError as exc:
        raise ConfigError(f"--size expects WIDTHxHEIGHT, got {args.size!r}") from exc
    store = import_image_folder(args.source, args.destination, size=(width, height))
    print(
        f"imported {store.num_classes} classes, "
        f"{sum(store.counts().values())} samples, dim={store.feature_dim}"
    )
    return 0


def _cmd_run(args: argparse.Namespace) -> int:
    if args.config:
        payload = json.loads(Path(args.config).read_text())
    else:
        payload = {}
    if "scenario" not in payload:
        payload["scenario"] = None  # replaced below

    scenario = (
        run_config_from_dict(dict(payload)).scenario
        if payload.get("scenario")
        else _scenario_from_args(args)
    )

    def pick(flag, key, default):
        if flag is not None:
            return flag
        return payload.get(key, default)

    sgd = SgdConfig(
        learning_rate=float(pick(args.lr, "learning_rate", 0.001)),
        weight_decay=float(pick(args.wd, "weight_decay", 1e-4)),
    )
    if isinstance(payload.get("sgd"), dict):
        sgd = SgdConfig(**payload["sgd"]) if args.lr is None and args.wd is None else sgd

    hidden = pick(args.hidden_dim, "hidden_dim", 64)
    cfg = RunConfig(
        scenario=scenario,
        dataset=pick(args.dataset, "dataset", None),
        method=pick(args.method, "method", None),
        seed=args.seed,
        gate_enabled=bool(pick(args.gate, "gate_enabled", False)),
        buffer_capacity=int(pick(args.buffer, "buffer_capacity", 0)),
        sgd=sgd,
        batch_size=int(pick(args.batch_size, "batch_size", 16)),
        test_per_class=int(pick(args.test_per_class, "test_per_class", 20)),
        hidden_dim=None if hidden in (None, "none", "linear") else int(hidden),
        buffer_update_source=pick(args.buffer_update_source, "buffer_update_source", "gated"),
        eval_every_batches=(
            int(args.eval_every) if args.eval_every is not None
            else payload.get("eval_every_batches")
        ),
        checkpoint_every=(
            int(args.checkpoint_every) if args.checkpoint_every is not None
            else payload.get("checkpoint_every")
        ),
        output_dir=pick(args.out, "output_dir", None),
    )
    if cfg.dataset is None or cfg.method is None:
        raise ConfigError("run needs --dataset and --method (flags or config file)")
    result = run_experiment(cfg, resume_from=args.resume)
    print(f"average_accuracy={result.average_accuracy:.4f}")
    if result.output_dir:
        print(f"results written to {result.output_dir}")
    return 0


def _cmd_suite(args: argparse.Namespace) -> int:
    payload = json.loads(Path(args.grid).read_text())
    entries = payload["runs"] if isinstance(payload, dict) else payload
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    names, configs = [], []
    for i, entry in enumerate(entries):
        name = entry.get("name", f"run_{i:04d}")
        data = dict(entry)
        data.setdefault("output_dir", str(out_dir / name))
        configs.append(run_config_from_dict(data))
        names.append(name)
    rows = run_suite(configs, names=names, max_workers=args.max_workers)
    suite_rows_to_csv(rows, out_dir / "suite_runs.csv")
    cells = aggregate([r for r in rows if r.error is None])
    markdown = cells_to_markdown(cells)
    (out_dir / "suite_table.md").write_text(markdown)
    cells_to_csv(cells, out_dir / "suite_table.csv")
    print(markdown, end="")
    failures = [r for r in rows if r.error is not None]
    for row in failures:
        print(f"failed: {row.name}: {row.error}", file=sys.stderr)
    return 0


def _cmd_report(args: argparse.Namespace) -> int:
    rows = rows_from_results_dir(args.results)
    cells = aggregate(rows)
    markdown = cells_to_markdown(cells)
    if args.out_md:
        Path(args.out_md).write_text(markdown)
    if args.out_csv:
        cells_to_csv(cells, args.out_csv)
    print(markdown, end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ocilab")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="build a scenario and write it as JSON")
    _add_scenario_flags(p)
    p.add_argument("--out", help="output path (default: stdout)")
    p.add_argument("--stats", action="store_true", help="print schedule statistics to stderr")
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("validate", help="check a scenario JSON file")
    p.add_argument("scenario")
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("import-dataset", help="image folder -> feature CSV manifest")
    p.add_argument("source")
    p.add_argument("destination")
    p.add_argument("--size", default="8x8", help="downscale size WIDTHxHEIGHT (default 8x8)")
    p.set_defaults(func=_cmd_import_dataset)

    p = sub.add_parser("run", help="run one experiment")
    p.add_argument("--config", help="JSON run config file")
    _add_scenario_flags(p)
    p.add_argument("--dataset", help="manifest directory or synthetic: spec")
    p.add_argument("--method", choices=["finetune", "er_random", "er_random_ncm", "er_mir", "er_gss"])
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--gate", action="store_const", const=True, default=None,
                   help="enable the dual-virtual-model update gate")
    p.add_argument("--buffer", type=int, help="exemplar buffer capacity")
    p.add_argument("--lr", type=float)
    p.add_argument("--wd", type=float)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--test-per-class", dest="test_per_class", type=int)
    p.add_argument("--hidden-dim", dest="hidden_dim")
    p.add_argument("--buffer-update-source", dest="buffer_update_source",
                   choices=["gated", "full"])
    p.add_argument("--eval-every", dest="eval_every", type=int)
    p.add_argument("--checkpoint-every", dest="checkpoint_every", type=int)
    p.add_argument("--resume", help="checkpoint file to continue from")
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("suite", help="run a grid of configs and summarize")
    p.add_argument("grid", help="JSON grid file")
    p.add_argument("--out", required=True, help="suite output directory")
    p.add_argument("--max-workers", dest="max_workers", type=int, default=1)
    p.set_defaults(func=_cmd_suite)

    p = sub.add_parser("report", help="summarize a directory of results")
    p.add_argument("results")
    p.add_argument("--out-csv", dest="out_csv")
    p.add_argument("--out-md", dest="out_md")
    p.set_defaults(func=_cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ScenarioError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except DivergenceError as exc:
        print(f"divergence: {exc}", file=sys.stderr)
        return 3
    except OcilabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
