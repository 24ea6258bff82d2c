"""End-to-end experiment driver.

Wires scenario -> stream -> (buffer, gate, learner) -> metrics for one
seeded run, with optional mid-run checkpointing, plus a grid runner for
method x category x task-size suites.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import buffer as buf
from .dataset import parse_dataset_spec, split_store
from .errors import ConfigError, DataError, OcilabError
from .gating import (
    GateState,
    PriorDistribution,
    BranchRecord,
    gate_batch,
    observe_labels,
    set_threshold,
    write_branch_log,
)
from .learner import (
    ClassifierState,
    SgdConfig,
    classifier_from_dict,
    classifier_to_dict,
    init_classifier,
    loss_and_grads,
    save_classifier,
    sgd_step,
)
from .metrics import AccuracyMatrix, average_accuracy, build_test_sets, evaluate_row
from .scenario import Scenario, ScenarioConfig, build_scenario
from .stream import LabeledVector, materialize_stream

RESULTS_VERSION = 1
CHECKPOINT_FILE = "checkpoint.json"

METHODS = ("finetune", "er_random", "er_random_ncm", "er_mir", "er_gss")
BUFFER_PRESETS = {"0.5K": 500, "1K": 1000, "2K": 2000, "5K": 5000}
TASK_SIZE_PRESETS = (5, 10, 20)


@dataclass
class RunConfig:
    """Everything one experiment run depends on."""

    scenario: ScenarioConfig
    dataset: str
    method: str
    seed: int
    gate_enabled: bool = False
    buffer_capacity: int = 0
    sgd: SgdConfig = field(default_factory=SgdConfig)
    batch_size: int = 16
    test_per_class: int = 20
    hidden_dim: int | None = 64
    buffer_update_source: str = "gated"  # or "full"
    mir_candidates: int = 50
    gss_candidates: int = 10
    eval_every_batches: int | None = None
    checkpoint_every: int | None = None
    output_dir: str | None = None

    def __post_init__(self) -> None:
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if self.method == "finetune":
            if self.buffer_capacity > 0:
                raise ConfigError("finetune trains on incoming data only; buffer_capacity must be 0")
            if self.gate_enabled:
                raise ConfigError("finetune does not gate; gate_enabled must be False")
        else:
            if self.buffer_capacity < 1:
                raise ConfigError(f"{self.method} needs buffer_capacity >= 1")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.test_per_class < 1:
            raise ConfigError("test_per_class must be >= 1")
        if self.buffer_update_source not in ("gated", "full"):
            raise ConfigError("buffer_update_source must be 'gated' or 'full'")


def config_to_dict(cfg: RunConfig) -> dict:
    payload = dataclasses.asdict(cfg)
    scenario = payload["scenario"]
    scenario["alpha_set"] = list(scenario["alpha_set"])
    scenario["beta_set"] = list(scenario["beta_set"])
    scenario["samples_per_class"] = {
        str(k): v for k, v in scenario["samples_per_class"].items()
    }
    if scenario["appearance_weights"] is not None:
        scenario["appearance_weights"] = {
            str(k): v for k, v in scenario["appearance_weights"].items()
        }
    return payload


def config_hash(cfg: RunConfig) -> str:
    canon = json.dumps(config_to_dict(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


@dataclass
class RunResult:
    config: RunConfig
    scenario: Scenario
    matrix: AccuracyMatrix
    average_accuracy: float
    random_init_accuracy: list[float]
    branch_log: list[BranchRecord]
    curve: list[tuple[int, float]]
    final_state: ClassifierState
    final_buffer: buf.ExemplarBuffer
    output_dir: str | None = None


class _Replay:
    """Update/retrieve dispatch for the configured replay method."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.kind = cfg.method

    def retrieve(
        self,
        buffer: buf.ExemplarBuffer,
        reference: list[LabeledVector],
        k: int,
        state: ClassifierState,
        rng: np.random.Generator,
    ) -> list[LabeledVector]:
        if self.kind == "er_mir":
            return buf.retrieve_interfered(
                buffer, k, reference, state, self.cfg.sgd, rng,
                candidate_size=self.cfg.mir_candidates,
            )
        return buf.retrieve_random(buffer, k, rng)

    def update(
        self,
        buffer: buf.ExemplarBuffer,
        batch: list[LabeledVector],
        state: ClassifierState,
        rng: np.random.Generator,
    ) -> None:
        if self.kind == "er_gss":
            buf.update_gradient_similarity(
                buffer, batch, state, rng, candidate_size=self.cfg.gss_candidates
            )
        else:
            buf.update_random(buffer, batch, rng)


def _rngs_for(cfg: RunConfig) -> dict[str, np.random.Generator]:
    children = np.random.SeedSequence(cfg.seed).spawn(4)
    names = ("stream", "init", "buffer", "retrieval")
    return {name: np.random.default_rng(seq) for name, seq in zip(names, children)}


def _scenario_config_with_budgets(cfg: RunConfig, budgets: dict[int, int]) -> ScenarioConfig:
    if cfg.scenario.samples_per_class:
        return cfg.scenario
    return dataclasses.replace(cfg.scenario, samples_per_class=budgets)


def run_experiment(cfg: RunConfig, resume_from: str | Path | None = None) -> RunResult:
    """Execute one run; fully deterministic for a fixed config.

    ``resume_from`` points at a checkpoint file written by a previous
    invocation of the same config; the run continues from that position and
    produces results identical to an uninterrupted run.
    """
    store = parse_dataset_spec(cfg.dataset)
    if store.num_classes != cfg.scenario.total_classes:
        raise DataError(
            f"dataset has {store.num_classes} classes but the scenario config "
            f"expects {cfg.scenario.total_classes}"
        )
    train_store, test_store = split_store(store, cfg.test_per_class)
    scenario_cfg = _scenario_config_with_budgets(cfg, train_store.counts())
    scenario = build_scenario(scenario_cfg)
    test_sets = build_test_sets(scenario, test_store)

    rngs = _rngs_for(cfg)
    streams = materialize_stream(scenario, train_store, cfg.batch_size, rngs["stream"])
    init_state = init_classifier(
        store.feature_dim, scenario.total_classes, cfg.hidden_dim, rngs["init"]
    )
    b_hat = [float(a) for a in evaluate_row(init_state, test_sets)]

    replay = _Replay(cfg)
    use_ncm = cfg.method == "er_random_ncm"
    run_hash = config_hash(cfg)

    if resume_from is not None:
        snap = json.loads(Path(resume_from).read_text())
        if snap.get("config_hash") != run_hash:
            raise ConfigError("checkpoint was written by a different run configuration")
        state = classifier_from_dict(snap["model"])
        buffer = buf.buffer_from_dict(snap["buffer"])
        gate = GateState(
            threshold=snap["gate"]["threshold"],
            prior=PriorDistribution(set(snap["gate"]["seen_labels"])),
            branch_log=[BranchRecord(**r) for r in snap["gate"]["branch_log"]],
        )
        matrix = AccuracyMatrix(scenario.num_tasks)
        matrix.values = np.array(snap["matrix"], dtype=float)
        curve = [tuple(point) for point in snap["curve"]]
        rngs["buffer"].bit_generator.state = snap["rng"]["buffer"]
        rngs["retrieval"].bit_generator.state = snap["rng"]["retrieval"]
        start_task, start_batch = snap["position"]
        step = snap["step"]
    else:
        state = init_state.copy()
        buffer = buf.ExemplarBuffer(cfg.buffer_capacity)
        gate = GateState()
        matrix = AccuracyMatrix(scenario.num_tasks)
        curve = []
        start_task, start_batch, step = 0, 0, 0

    out_dir = Path(cfg.output_dir) if cfg.output_dir else None
    if out_dir:
        out_dir.mkdir(parents=True, exist_ok=True)

    def maybe_checkpoint(task_pos: int, batch_pos: int) -> None:
        if out_dir is None or cfg.checkpoint_every is None:
            return
        if step == 0 or step % cfg.checkpoint_every != 0:
            return
        snap = {
            "version": RESULTS_VERSION,
            "config_hash": run_hash,
            "position": [task_pos, batch_pos],
            "step": step,
            "model": classifier_to_dict(state),
            "buffer": buf.buffer_to_dict(buffer),
            "gate": {
                "threshold": gate.threshold,
                "seen_labels": sorted(gate.prior.seen_labels),
                "branch_log": [dataclasses.asdict(r) for r in gate.branch_log],
            },
            "matrix": matrix.to_lists(),
            "curve": [list(point) for point in curve],
            "rng": {
                "buffer": rngs["buffer"].bit_generator.state,
                "retrieval": rngs["retrieval"].bit_generator.state,
            },
        }
        (out_dir / CHECKPOINT_FILE).write_text(json.dumps(snap) + "\n")

    for task_stream in streams[start_task:]:
        ti = task_stream.task_index
        first_batch = start_batch if ti == start_task else 0
        for bi in range(first_batch, len(task_stream.batches)):
            batch = task_stream.batches[bi]
            gating_now = cfg.gate_enabled and gate.active and ti > 0
            if cfg.method == "finetune":
                data, exemplars = list(batch), []
            elif gating_now:
                def retrieve(reference: list[LabeledVector], k: int) -> list[LabeledVector]:
                    return replay.retrieve(buffer, reference, k, state, rngs["retrieval"])

                data, exemplars, _ = gate_batch(batch, buffer, state, gate, retrieve, step, ti)
            else:
                data = list(batch)
                exemplars = replay.retrieve(buffer, batch, len(batch), state, rngs["retrieval"])

            train_batch = data + exemplars
            if train_batch:
                _, grads = loss_and_grads(state, train_batch)
                sgd_step(state, grads, cfg.sgd)

            if cfg.method != "finetune":
                source = data if cfg.buffer_update_source == "gated" else list(batch)
                replay.update(buffer, source, state, rngs["buffer"])
            observe_labels(gate, batch)
            step += 1
            if cfg.eval_every_batches and step % cfg.eval_every_batches == 0:
                means = buf.class_means(buffer) if use_ncm else None
                row = evaluate_row(state, test_sets, means)
                curve.append((step, float(row.mean())))
            maybe_checkpoint(ti, bi + 1)

        means = buf.class_means(buffer) if use_ncm and len(buffer) else None
        row = evaluate_row(state, test_sets, means)
        matrix.set_row(ti, row)
        if ti == 0 and cfg.gate_enabled and not gate.active:
            # Threshold measures the same argmax predictor the gate's
            # virtual models use, even in nearest-mean runs.
            th_row = row if not use_ncm else evaluate_row(state, test_sets[:1])
            set_threshold(gate, float(th_row[0]))

    avg = average_accuracy(matrix)
    result = RunResult(
        config=cfg,
        scenario=scenario,
        matrix=matrix,
        average_accuracy=avg,
        random_init_accuracy=b_hat,
        branch_log=gate.branch_log,
        curve=curve,
        final_state=state,
        final_buffer=buffer,
        output_dir=str(out_dir) if out_dir else None,
    )
    if out_dir:
        _write_outputs(result, out_dir)
    return result


def _write_outputs(result: RunResult, out_dir: Path) -> None:
    cfg = result.config
    branch_log_file = None
    if cfg.gate_enabled:
        branch_log_file = "branch_log.csv"
        write_branch_log(result.branch_log, out_dir / branch_log_file)
    save_classifier(result.final_state, out_dir / "model.json")
    payload = {
        "version": RESULTS_VERSION,
        "config": config_to_dict(cfg),
        "config_hash": config_hash(cfg),
        "method": cfg.method,
        "gate_enabled": cfg.gate_enabled,
        "seed": cfg.seed,
        "scenario_seed": result.scenario.rng_seed,
        "category": cfg.scenario.category,
        "distribution": cfg.scenario.distribution,
        "num_tasks": result.scenario.num_tasks,
        "buffer_capacity": cfg.buffer_capacity,
        "accuracy_matrix": result.matrix.to_lists(),
        "average_accuracy": result.average_accuracy,
        "random_init_accuracy": result.random_init_accuracy,
        "curve": [list(point) for point in result.curve],
        "branch_log_file": branch_log_file,
        "final_model_file": "model.json",
    }
    (out_dir / "results.json").write_text(
        json.dumps(payload, sort_keys=True, separators=(",", ":")) + "\n"
    )


@dataclass
class SuiteRow:
    name: str
    method: str
    gate_enabled: bool
    category: str
    num_tasks: int
    distribution: str
    buffer_capacity: int
    seed: int
    average_accuracy: float | None
    error: str | None = None


def _run_suite_entry(entry: tuple[str, RunConfig]) -> SuiteRow:
    name, cfg = entry
    base = SuiteRow(
        name=name,
        method=cfg.method,
        gate_enabled=cfg.gate_enabled,
        category=cfg.scenario.category,
        num_tasks=cfg.scenario.num_tasks,
        distribution=cfg.scenario.distribution,
        buffer_capacity=cfg.buffer_capacity,
        seed=cfg.seed,
        average_accuracy=None,
    )
    try:
        result = run_experiment(cfg)
    except OcilabError as exc:
        base.error = f"{type(exc).__name__}: {exc}"
        return base
    base.average_accuracy = result.average_accuracy
    return base


def run_suite(
    configs: list[RunConfig],
    names: list[str] | None = None,
    max_workers: int = 1,
) -> list[SuiteRow]:
    """Run every config; individual failures are recorded, not raised."""
    if names is None:
        names = [f"run_{i:04d}" for i in range(len(configs))]
    if len(names) != len(configs):
        raise ConfigError("names and configs must have equal length")
    entries = list(zip(names, configs))
    if max_workers <= 1:
        return [_run_suite_entry(e) for e in entries]
    with ProcessPoolExecutor(max_workers=max_workers) as pool:
        return list(pool.map(_run_suite_entry, entries))
