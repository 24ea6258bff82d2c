"""Probabilistic generation of class-incremental task schedules.

A scenario is an ordered list of tasks. Each task holds a set of classes
appearing for the first time, a set of repeated classes, and per-class
sample counts. Schedules satisfy three structural properties:

1. the class count per task varies, with at least one new class per task
   and strictly fewer classes than the full catalog;
2. sample counts within a task are generally unequal;
3. classes may reappear across tasks.

How many classes repeat and how many are new per task is driven by two
integer hyperparameters (``alpha`` scales repetition, ``beta`` scales
novelty) through a configurable nonnegative draw distribution. Consumption
category presets pin the hyperparameter candidate sets and a cap on the
number of distinct classes a schedule may ever introduce.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError, ScenarioError

SCENARIO_SCHEMA_VERSION = 1

# Consumption-category presets: candidate sets for the repetition (alpha)
# and novelty (beta) hyperparameters.
CATEGORY_PRESETS: dict[str, tuple[tuple[int, ...], tuple[int, ...]]] = {
    "short_term": ((9, 10, 11, 12), (1, 2, 3)),
    "moderate_term": ((5, 6, 7, 8), (4, 5, 6)),
    "long_term": ((1, 2, 3, 4), (7, 8, 9)),
}

# Expected span of distinct classes introduced over a run, per category.
# Exact values exist for the two reference catalog sizes; other sizes fall
# back to fractions of the catalog.
_EXACT_CLASS_RANGES: dict[tuple[str, int], tuple[int, int]] = {
    ("short_term", 101): (20, 40),
    ("moderate_term", 101): (40, 80),
    ("long_term", 101): (80, 101),
    ("short_term", 74): (10, 30),
    ("moderate_term", 74): (30, 50),
    ("long_term", 74): (50, 74),
}
_FRACTION_CLASS_RANGES: dict[str, tuple[float, float]] = {
    "short_term": (0.15, 0.40),
    "moderate_term": (0.40, 0.70),
    "long_term": (0.70, 1.00),
}


def category_class_range(category: str, total_classes: int) -> tuple[int, int]:
    """Span [lo, hi] of distinct classes a category is expected to introduce."""
    if category not in CATEGORY_PRESETS:
        raise ConfigError(f"unknown category {category!r}")
    exact = _EXACT_CLASS_RANGES.get((category, total_classes))
    if exact is not None:
        return exact
    f_lo, f_hi = _FRACTION_CLASS_RANGES[category]
    lo = max(1, round(f_lo * total_classes))
    hi = max(lo, round(f_hi * total_classes))
    return lo, min(hi, total_classes)


@dataclass(frozen=True)
class ScenarioConfig:
    """All knobs of the schedule generator.

    ``samples_per_class`` maps class id -> total sample budget for the run;
    the generator only partitions budgets, it never invents them. An empty
    map is allowed for configs used as templates (the experiment harness
    fills budgets in from the dataset manifest).
    """

    total_classes: int
    num_tasks: int
    alpha_set: tuple[int, ...]
    beta_set: tuple[int, ...]
    rng_seed: int
    samples_per_class: dict[int, int] = field(default_factory=dict)
    distribution: str = "exponential"  # or "gaussian"
    exponential_rate: float = 1.0
    gaussian_mean: float = 0.0
    gaussian_std: float = 0.4
    appearance: str = "uniform"
    appearance_weights: dict[int, float] | None = None
    category: str = "custom"
    class_cap: int | None = None
    # Draw alpha/beta once per run instead of once per task.
    fixed_hyperparams: bool = False

    def __post_init__(self) -> None:
        if self.total_classes < 2:
            raise ConfigError("total_classes must be >= 2")
        if self.num_tasks < 1:
            raise ConfigError("num_tasks must be >= 1")
        for name, values in (("alpha_set", self.alpha_set), ("beta_set", self.beta_set)):
            if not values:
                raise ConfigError(f"{name} must be non-empty")
            if any(v < 1 for v in values):
                raise ConfigError(f"{name} elements must be >= 1")
        if self.class_cap is not None and not 1 <= self.class_cap <= self.total_classes:
            raise ConfigError("class_cap must satisfy 1 <= class_cap <= total_classes")
        if self.distribution not in ("exponential", "gaussian"):
            raise ConfigError(f"unknown distribution {self.distribution!r}")
        if self.distribution == "exponential" and self.exponential_rate <= 0:
            raise ConfigError("exponential_rate must be > 0")
        if self.distribution == "gaussian" and self.gaussian_std <= 0:
            raise ConfigError("gaussian_std must be > 0")
        if self.appearance != "uniform":
            raise ConfigError(f"unknown appearance distribution {self.appearance!r}")
        for cid, budget in self.samples_per_class.items():
            if not 0 <= cid < self.total_classes:
                raise ConfigError(f"budget for class {cid} outside catalog [0, {self.total_classes})")
            if budget < 1:
                raise ConfigError(f"budget for class {cid} must be >= 1")

    @property
    def effective_cap(self) -> int:
        return self.total_classes if self.class_cap is None else self.class_cap


def config_from_category(
    category: str,
    total_classes: int,
    num_tasks: int,
    rng_seed: int,
    samples_per_class: dict[int, int] | None = None,
    **overrides,
) -> ScenarioConfig:
    """Build a config with alpha/beta sets and class cap pinned by a preset.

    The cap is the high end of the category's class range, floored at
    ``num_tasks`` so that every task can still introduce a new class.
    """
    if category not in CATEGORY_PRESETS:
        raise ConfigError(f"unknown category {category!r}; expected one of {sorted(CATEGORY_PRESETS)}")
    alpha_set, beta_set = CATEGORY_PRESETS[category]
    _, hi = category_class_range(category, total_classes)
    cap = min(max(hi, num_tasks), total_classes)
    return ScenarioConfig(
        total_classes=total_classes,
        num_tasks=num_tasks,
        alpha_set=alpha_set,
        beta_set=beta_set,
        rng_seed=rng_seed,
        samples_per_class=dict(samples_per_class or {}),
        category=category,
        class_cap=cap,
        **overrides,
    )


@dataclass(frozen=True)
class TaskSpec:
    """One task: which classes appear and how many samples each gets."""

    index: int
    new_classes: tuple[int, ...]
    repeated_classes: tuple[int, ...]
    sample_counts: dict[int, int]
    alpha: int
    beta: int

    @property
    def classes(self) -> tuple[int, ...]:
        return tuple(sorted(self.new_classes + self.repeated_classes))

    @property
    def num_classes(self) -> int:
        return len(self.new_classes) + len(self.repeated_classes)

    @property
    def num_samples(self) -> int:
        return sum(self.sample_counts.values())


@dataclass(frozen=True)
class Scenario:
    """A realized schedule plus the budgets it was built from."""

    tasks: tuple[TaskSpec, ...]
    total_classes: int
    rng_seed: int
    samples_per_class: dict[int, int]

    @property
    def num_tasks(self) -> int:
        return len(self.tasks)

    def introduced_classes(self) -> set[int]:
        out: set[int] = set()
        for task in self.tasks:
            out.update(task.new_classes)
        return out


def _round_half_up(x: float) -> int:
    return math.floor(x + 0.5)


def _draw_magnitude(config: ScenarioConfig, rng: np.random.Generator) -> float:
    """One nonnegative draw from the configured count distribution."""
    if config.distribution == "exponential":
        return float(rng.exponential(1.0 / config.exponential_rate))
    return abs(float(rng.normal(config.gaussian_mean, config.gaussian_std)))


def imbalance_factor(total_classes: int, encountered: int, alpha: int) -> float:
    """Schedule imbalance: unseen-class mass divided by the repetition knob."""
    if alpha < 1:
        raise ConfigError("alpha must be a positive integer")
    if encountered > total_classes:
        raise ConfigError("encountered classes cannot exceed the catalog size")
    return (total_classes - encountered) / alpha


def sample_class_counts(
    config: ScenarioConfig,
    task_index: int,
    num_introduced: int,
    rng: np.random.Generator,
    alpha: int | None = None,
    beta: int | None = None,
) -> tuple[int, int, int, int]:
    """Sample (k_new, k_repeat) for one task; returns (k_new, k_repeat, alpha, beta).

    Raw counts are independent draws from the count distribution scaled by
    beta (new) and alpha (repeat), rounded half-up, then clamped so that:
    at least one new class appears, enough unintroduced classes remain for
    every later task, repeats never exceed what has been introduced, and
    the task stays strictly below the full catalog size.
    """
    if task_index >= config.num_tasks:
        raise ScenarioError(f"task index {task_index} out of range for {config.num_tasks} tasks")
    if alpha is None:
        alpha = int(rng.choice(config.alpha_set))
    if beta is None:
        beta = int(rng.choice(config.beta_set))

    raw_repeat = _round_half_up(_draw_magnitude(config, rng) * alpha)
    raw_new = _round_half_up(_draw_magnitude(config, rng) * beta)

    tasks_left = config.num_tasks - 1 - task_index
    # Reserve one unintroduced class per remaining task.
    upper_new = config.effective_cap - num_introduced - tasks_left
    if upper_new < 1:
        raise ScenarioError(
            f"task {task_index}: no unintroduced classes left under cap "
            f"{config.effective_cap} (introduced {num_introduced}, {tasks_left} tasks left)"
        )
    k_new = min(max(raw_new, 1), upper_new, config.total_classes - 1)
    k_repeat = min(max(raw_repeat, 0), num_introduced, config.total_classes - 1 - k_new)
    if task_index == 0:
        k_repeat = 0
    return k_new, k_repeat, alpha, beta


def sample_appearance(
    k_new: int,
    k_repeat: int,
    introduced: set[int],
    catalog_size: int,
    rng: np.random.Generator,
    weights: dict[int, float] | None = None,
) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Draw which classes appear: k_new from the unintroduced pool and
    k_repeat from the introduced pool, each without replacement.

    Weights default to uniform over each pool.
    """
    if k_new < 1:
        raise ScenarioError("every task must introduce at least one new class (k_new >= 1)")
    if k_repeat < 0:
        raise ScenarioError("k_repeat must be >= 0")
    unintroduced = sorted(set(range(catalog_size)) - introduced)
    if k_new > len(unintroduced):
        raise ScenarioError(
            f"unintroduced pool exhausted: requested {k_new} new classes, {len(unintroduced)} available"
        )
    if k_repeat > len(introduced):
        raise ScenarioError(
            f"introduced pool exhausted: requested {k_repeat} repeats, {len(introduced)} available"
        )
    new = _weighted_subset(unintroduced, k_new, weights, rng)
    repeated = _weighted_subset(sorted(introduced), k_repeat, weights, rng)
    return new, repeated


def _weighted_subset(
    pool: list[int],
    k: int,
    weights: dict[int, float] | None,
    rng: np.random.Generator,
) -> tuple[int, ...]:
    if k == 0:
        return ()
    if weights is None:
        picks = rng.choice(len(pool), size=k, replace=False)
    else:
        w = np.array([weights.get(c, 0.0) for c in pool], dtype=float)
        if np.any(w < 0):
            raise ScenarioError("appearance weights must be nonnegative")
        total = w.sum()
        if total <= 0:
            raise ScenarioError("appearance weights sum to zero over the candidate pool")
        picks = rng.choice(len(pool), size=k, replace=False, p=w / total)
    return tuple(sorted(pool[i] for i in picks))


def allocate_samples(draft: Scenario, samples_per_class: dict[int, int]) -> Scenario:
    """Fill in per-task sample counts from whole-run class budgets.

    A class with budget M occurring in m tasks gets floor(M/m) samples per
    occurrence; the remainder M mod m goes to its first occurrence. Budgets
    are conserved exactly.
    """
    occurrences: dict[int, list[int]] = {}
    for task in draft.tasks:
        for cid in task.new_classes + task.repeated_classes:
            occurrences.setdefault(cid, []).append(task.index)

    counts_per_task: list[dict[int, int]] = [dict() for _ in draft.tasks]
    for cid, task_indices in sorted(occurrences.items()):
        if cid not in samples_per_class:
            raise ScenarioError(f"class {cid} appears in the schedule but has no sample budget")
        budget = samples_per_class[cid]
        m = len(task_indices)
        if budget < m:
            raise ScenarioError(
                f"class {cid}: budget {budget} cannot cover {m} occurrences (needs >= 1 each)"
            )
        base, remainder = divmod(budget, m)
        for j, ti in enumerate(task_indices):
            counts_per_task[ti][cid] = base + (remainder if j == 0 else 0)

    tasks = tuple(
        replace(task, sample_counts=counts_per_task[task.index]) for task in draft.tasks
    )
    return replace(draft, tasks=tasks, samples_per_class=dict(samples_per_class))


def build_scenario(config: ScenarioConfig) -> Scenario:
    """Generate a full schedule. Deterministic for a fixed config (incl. seed)."""
    cap = config.effective_cap
    if cap < config.num_tasks:
        raise ConfigError(
            f"cannot introduce at least one new class per task: class cap {cap} "
            f"< num_tasks {config.num_tasks}"
        )
    if not config.samples_per_class:
        raise ConfigError("samples_per_class is empty; budgets are required to build a scenario")

    rng = np.random.default_rng(config.rng_seed)
    fixed_alpha = fixed_beta = None
    if config.fixed_hyperparams:
        fixed_alpha = int(rng.choice(config.alpha_set))
        fixed_beta = int(rng.choice(config.beta_set))

    introduced: set[int] = set()
    drafts: list[TaskSpec] = []
    for i in range(config.num_tasks):
        try:
            k_new, k_repeat, alpha, beta = sample_class_counts(
                config, i, len(introduced), rng, alpha=fixed_alpha, beta=fixed_beta
            )
            new, repeated = sample_appearance(
                k_new, k_repeat, introduced, config.total_classes, rng,
                weights=config.appearance_weights,
            )
        except ScenarioError as exc:
            raise ScenarioError(f"task {i}: {exc}") from exc
        introduced.update(new)
        drafts.append(TaskSpec(i, new, repeated, {}, alpha, beta))

    draft = Scenario(
        tasks=tuple(drafts),
        total_classes=config.total_classes,
        rng_seed=config.rng_seed,
        samples_per_class={},
    )
    scenario = allocate_samples(draft, config.samples_per_class)
    violations = validate_scenario(scenario)
    if violations:
        raise ScenarioError("generated scenario failed validation: " + "; ".join(violations))
    return scenario


def validate_scenario(scenario: Scenario) -> list[str]:
    """Check structural properties; returns one message per violation.

    Covers: per-task class-count bounds and novelty, disjointness of
    new/repeated sets, positive sample counts, and exact conservation of
    budgets over classes that occur. Unequal within-task sample sizes are
    advisory only; see ``scenario_warnings``.
    """
    violations: list[str] = []
    n = scenario.total_classes
    seen: set[int] = set()
    allocated: dict[int, int] = {}

    for task in scenario.tasks:
        label = f"task {task.index}"
        k = task.num_classes
        if not 1 <= k < n:
            violations.append(f"class-count bound, {label}: K={k} outside [1, {n})")
        if not task.new_classes:
            violations.append(f"novelty, {label}: introduces no new class")
        overlap = set(task.new_classes) & set(task.repeated_classes)
        if overlap:
            violations.append(f"{label}: classes {sorted(overlap)} are both new and repeated")
        stale = set(task.new_classes) & seen
        if stale:
            violations.append(f"novelty, {label}: classes {sorted(stale)} marked new but seen before")
        unseen = set(task.repeated_classes) - seen
        if unseen:
            violations.append(f"repetition, {label}: classes {sorted(unseen)} marked repeated but never seen")
        if set(task.sample_counts) != set(task.classes):
            violations.append(f"{label}: sample_counts keys do not match the task's classes")
        for cid, count in task.sample_counts.items():
            if count < 1:
                violations.append(f"{label}: class {cid} has count {count} < 1")
            allocated[cid] = allocated.get(cid, 0) + count
        seen.update(task.new_classes)
        seen.update(task.repeated_classes)

    for cid, total in sorted(allocated.items()):
        budget = scenario.samples_per_class.get(cid)
        if budget is not None and total != budget:
            violations.append(f"conservation, class {cid}: allocated {total} != budget {budget}")

    return violations


def scenario_warnings(scenario: Scenario) -> list[str]:
    """Advisory findings: properties expected with positive probability."""
    warnings: list[str] = []
    multi_class_tasks = [t for t in scenario.tasks if t.num_classes > 1]
    if multi_class_tasks:
        unequal = any(len(set(t.sample_counts.values())) > 1 for t in multi_class_tasks)
        if not unequal:
            warnings.append("no task has unequal per-class sample counts (imbalance not realized)")
    if scenario.num_tasks > 1 and all(not t.repeated_classes for t in scenario.tasks):
        warnings.append("no class ever repeats across tasks (repetition not realized)")
    return warnings


def scenario_to_dict(scenario: Scenario) -> dict:
    return {
        "version": SCENARIO_SCHEMA_VERSION,
        "seed": scenario.rng_seed,
        "N": scenario.total_classes,
        "tasks": [
            {
                "i": task.index,
                "new": list(task.new_classes),
                "repeat": list(task.repeated_classes),
                "counts": {str(cid): count for cid, count in sorted(task.sample_counts.items())},
                "alpha": task.alpha,
                "beta": task.beta,
            }
            for task in scenario.tasks
        ],
    }


def scenario_from_dict(payload: dict) -> Scenario:
    version = payload.get("version")
    if version != SCENARIO_SCHEMA_VERSION:
        raise ConfigError(f"unsupported scenario schema version {version!r}")
    tasks = []
    budgets: dict[int, int] = {}
    for entry in payload["tasks"]:
        counts = {int(cid): int(cnt) for cid, cnt in entry["counts"].items()}
        for cid, cnt in counts.items():
            budgets[cid] = budgets.get(cid, 0) + cnt
        tasks.append(
            TaskSpec(
                index=int(entry["i"]),
                new_classes=tuple(sorted(int(c) for c in entry["new"])),
                repeated_classes=tuple(sorted(int(c) for c in entry["repeat"])),
                sample_counts=counts,
                alpha=int(entry["alpha"]),
                beta=int(entry["beta"]),
            )
        )
    return Scenario(
        tasks=tuple(tasks),
        total_classes=int(payload["N"]),
        rng_seed=int(payload["seed"]),
        samples_per_class=budgets,
    )


def dump_scenario(scenario: Scenario) -> str:
    """Canonical JSON serialization; byte-stable for a fixed scenario."""
    return json.dumps(scenario_to_dict(scenario), sort_keys=True, separators=(",", ":")) + "\n"


def save_scenario(scenario: Scenario, path: str | Path) -> None:
    Path(path).write_text(dump_scenario(scenario))


def load_scenario(path: str | Path) -> Scenario:
    return scenario_from_dict(json.loads(Path(path).read_text()))
