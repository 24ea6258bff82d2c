from __future__ import annotations

import dataclasses

import numpy as np
import pytest

from ocilab.errors import ConfigError, ScenarioError
from ocilab.scenario import (
    Scenario,
    ScenarioConfig,
    TaskSpec,
    allocate_samples,
    build_scenario,
    category_class_range,
    config_from_category,
    dump_scenario,
    imbalance_factor,
    load_scenario,
    sample_appearance,
    sample_class_counts,
    scenario_from_dict,
    scenario_to_dict,
    scenario_warnings,
    validate_scenario,
)


def basic_config(**overrides) -> ScenarioConfig:
    defaults = dict(
        total_classes=10,
        num_tasks=4,
        alpha_set=(2, 3),
        beta_set=(1, 2),
        rng_seed=42,
        samples_per_class={c: 50 for c in range(10)},
    )
    defaults.update(overrides)
    return ScenarioConfig(**defaults)


# --- config validation ---


def test_config_rejects_empty_alpha_set():
    with pytest.raises(ConfigError):
        basic_config(alpha_set=())


def test_config_rejects_zero_hyperparameter():
    with pytest.raises(ConfigError):
        basic_config(beta_set=(0, 1))


def test_config_rejects_bad_cap():
    with pytest.raises(ConfigError):
        basic_config(class_cap=11)
    with pytest.raises(ConfigError):
        basic_config(class_cap=0)


def test_category_preset_pins_sets_and_cap():
    cfg = config_from_category("short_term", 101, 10, rng_seed=0)
    assert cfg.alpha_set == (9, 10, 11, 12)
    assert cfg.beta_set == (1, 2, 3)
    assert cfg.class_cap == 40
    cfg = config_from_category("long_term", 74, 20, rng_seed=0)
    assert cfg.alpha_set == (1, 2, 3, 4)
    assert cfg.beta_set == (7, 8, 9)
    assert cfg.class_cap == 74


def test_category_cap_floors_at_num_tasks():
    # 20-class catalog: the short-term span tops out below 10 tasks' needs.
    lo, hi = category_class_range("short_term", 20)
    assert hi < 10
    cfg = config_from_category("short_term", 20, 10, rng_seed=0)
    assert cfg.class_cap == 10


# --- imbalance factor ---


def test_imbalance_factor_direct():
    assert imbalance_factor(101, 40, 5) == pytest.approx(12.2)


def test_imbalance_factor_all_encountered():
    assert imbalance_factor(74, 74, 3) == 0.0


def test_imbalance_factor_boundary():
    assert imbalance_factor(101, 0, 1) == 101.0


def test_imbalance_factor_rejects_bad_alpha():
    with pytest.raises(ConfigError):
        imbalance_factor(101, 40, 0)


# --- class-count sampling ---


def test_first_task_never_repeats():
    cfg = basic_config()
    for seed in range(50):
        rng = np.random.default_rng(seed)
        k_new, k_repeat, _, _ = sample_class_counts(cfg, 0, 0, rng)
        assert k_repeat == 0
        assert k_new >= 1


def test_degenerate_distribution_forces_hyperparameter():
    # A Gaussian with tiny spread centered at 1 makes every draw ~1, so the
    # sampled counts hit the hyperparameter values exactly.
    cfg = basic_config(
        alpha_set=(1,), beta_set=(1,),
        distribution="gaussian", gaussian_mean=1.0, gaussian_std=1e-12,
    )
    rng = np.random.default_rng(0)
    k_new, k_repeat, alpha, beta = sample_class_counts(cfg, 1, 3, rng)
    assert (alpha, beta) == (1, 1)
    assert k_new == 1
    assert k_repeat == 1  # min(1, introduced-so-far)

    rng = np.random.default_rng(0)
    k_new, k_repeat, _, _ = sample_class_counts(cfg, 1, 0, rng)
    assert k_repeat == 0  # nothing introduced yet


def test_counts_respect_cap_reserve():
    cfg = basic_config(class_cap=5, num_tasks=5, beta_set=(9,))
    rng = np.random.default_rng(3)
    for introduced, task_index in ((0, 0), (1, 1), (2, 2)):
        k_new, _, _, _ = sample_class_counts(cfg, task_index, introduced, rng)
        # one class must stay in reserve per remaining task
        assert k_new <= cfg.effective_cap - introduced - (cfg.num_tasks - 1 - task_index)


def test_counts_stay_below_catalog():
    cfg = basic_config(
        total_classes=4, num_tasks=2, alpha_set=(50,), beta_set=(50,),
        samples_per_class={c: 50 for c in range(4)},
    )
    rng = np.random.default_rng(9)
    k_new, k_repeat, _, _ = sample_class_counts(cfg, 1, 2, rng)
    assert 1 <= k_new + k_repeat < 4


# --- appearance sampling ---


def test_appearance_rejects_zero_new():
    with pytest.raises(ScenarioError):
        sample_appearance(0, 0, set(), 5, np.random.default_rng(0))


def test_appearance_forced_full_pool():
    new, repeated = sample_appearance(1, 3, {1, 2, 3}, 5, np.random.default_rng(0))
    assert set(repeated) == {1, 2, 3}
    assert len(new) == 1 and new[0] in {0, 4}


def test_appearance_pool_exhaustion_names_pool():
    with pytest.raises(ScenarioError, match="unintroduced"):
        sample_appearance(3, 0, {0, 1, 2, 3}, 5, np.random.default_rng(0))
    with pytest.raises(ScenarioError, match="introduced"):
        sample_appearance(1, 2, {0}, 5, np.random.default_rng(0))


def test_appearance_uniformity_monte_carlo():
    # Drawing 2 of 5 classes: each class should appear with frequency 0.4.
    rng = np.random.default_rng(2024)
    hits = np.zeros(5)
    trials = 10_000
    for _ in range(trials):
        new, _ = sample_appearance(2, 0, set(), 5, rng)
        for c in new:
            hits[c] += 1
    freq = hits / trials
    assert np.all(np.abs(freq - 0.4) < 0.02)


def test_appearance_respects_weights():
    rng = np.random.default_rng(5)
    weights = {0: 1.0, 1: 1.0, 2: 0.0, 3: 0.0, 4: 0.0}
    for _ in range(200):
        new, _ = sample_appearance(2, 0, set(), 5, rng, weights=weights)
        assert set(new) == {0, 1}


# --- allocation ---


def _draft(task_classes: list[tuple[tuple[int, ...], tuple[int, ...]]], n: int = 10) -> Scenario:
    tasks = tuple(
        TaskSpec(i, new, rep, {}, alpha=1, beta=1)
        for i, (new, rep) in enumerate(task_classes)
    )
    return Scenario(tasks=tasks, total_classes=n, rng_seed=0, samples_per_class={})


def test_allocation_even_split():
    # class 5 with 500 samples over 5 occurrences -> 100 per appearance
    draft = _draft([((5,), ())] + [((i,), (5,)) for i in range(4)])
    scenario = allocate_samples(draft, {5: 500, 0: 10, 1: 10, 2: 10, 3: 10})
    assert [t.sample_counts[5] for t in scenario.tasks] == [100] * 5


def test_allocation_remainder_to_first_occurrence():
    draft = _draft([((5,), ())] + [((i,), (5,)) for i in range(4)])
    scenario = allocate_samples(draft, {5: 502, 0: 10, 1: 10, 2: 10, 3: 10})
    assert [t.sample_counts[5] for t in scenario.tasks] == [102, 100, 100, 100, 100]


def test_allocation_infeasible_budget():
    draft = _draft([((5,), ())] + [((i,), (5,)) for i in range(4)])
    with pytest.raises(ScenarioError):
        allocate_samples(draft, {5: 3, 0: 10, 1: 10, 2: 10, 3: 10})


def test_allocation_oracle_random_pairs():
    # Independent script for the stated rule: equal floor share everywhere,
    # the whole remainder on the first occurrence.
    rng = np.random.default_rng(77)
    for _ in range(200):
        occurrences = int(rng.integers(1, 12))
        budget = int(rng.integers(occurrences, 2000))
        base, remainder = divmod(budget, occurrences)
        expected = [base + (remainder if j == 0 else 0) for j in range(occurrences)]

        classes = [((0,), ())] + [((j,), (0,)) for j in range(1, occurrences)]
        draft = _draft(classes, n=occurrences + 1)
        budgets = {0: budget}
        budgets.update({j: occurrences for j in range(1, occurrences)})
        scenario = allocate_samples(draft, budgets)
        got = [t.sample_counts[0] for t in scenario.tasks]
        assert got == expected
        assert sum(got) == budget


# --- build + validate ---


def test_build_deterministic_serialization():
    cfg = basic_config(rng_seed=7)
    a = dump_scenario(build_scenario(cfg))
    b = dump_scenario(build_scenario(cfg))
    assert a == b


def test_build_different_seeds_differ():
    a = dump_scenario(build_scenario(basic_config(rng_seed=1)))
    b = dump_scenario(build_scenario(basic_config(rng_seed=2)))
    assert a != b


def test_build_rejects_more_tasks_than_classes():
    with pytest.raises(ConfigError):
        build_scenario(
            ScenarioConfig(
                total_classes=4,
                num_tasks=5,
                alpha_set=(1,),
                beta_set=(1,),
                rng_seed=0,
                samples_per_class={c: 10 for c in range(4)},
            )
        )


def test_build_rejects_empty_budgets():
    with pytest.raises(ConfigError):
        build_scenario(basic_config(samples_per_class={}))


def test_build_short_term_vfn_range():
    budgets = {c: 200 for c in range(74)}
    for seed in range(30):
        cfg = config_from_category("short_term", 74, 10, rng_seed=seed, samples_per_class=budgets)
        distinct = len(build_scenario(cfg).introduced_classes())
        assert 10 <= distinct <= 30


def test_build_output_validates_clean():
    for seed in range(25):
        scenario = build_scenario(basic_config(rng_seed=seed))
        assert validate_scenario(scenario) == []


def test_build_records_hyperparams_per_task():
    scenario = build_scenario(basic_config(rng_seed=11))
    for task in scenario.tasks:
        assert task.alpha in (2, 3)
        assert task.beta in (1, 2)


def test_fixed_hyperparams_mode_uses_one_pair():
    scenario = build_scenario(basic_config(rng_seed=11, fixed_hyperparams=True))
    assert len({t.alpha for t in scenario.tasks}) == 1
    assert len({t.beta for t in scenario.tasks}) == 1


def test_validate_flags_repeat_only_task():
    scenario = build_scenario(basic_config(rng_seed=3))
    tasks = list(scenario.tasks)
    bad = TaskSpec(
        index=tasks[3].index,
        new_classes=(),
        repeated_classes=tasks[3].classes,
        sample_counts=tasks[3].sample_counts,
        alpha=1,
        beta=1,
    )
    tasks[3] = bad
    broken = dataclasses.replace(scenario, tasks=tuple(tasks))
    messages = validate_scenario(broken)
    assert any("novelty, task 3" in m for m in messages)


def test_validate_flags_conservation_breach():
    scenario = build_scenario(basic_config(rng_seed=3))
    budgets = dict(scenario.samples_per_class)
    some_class = next(iter(scenario.tasks[0].new_classes))
    budgets[some_class] += 5
    broken = dataclasses.replace(scenario, samples_per_class=budgets)
    messages = validate_scenario(broken)
    assert any(f"conservation, class {some_class}" in m for m in messages)


def test_conservation_exact_over_many_seeds():
    for seed in range(25):
        scenario = build_scenario(basic_config(rng_seed=seed))
        totals: dict[int, int] = {}
        for task in scenario.tasks:
            for cid, count in task.sample_counts.items():
                totals[cid] = totals.get(cid, 0) + count
        for cid, total in totals.items():
            assert total == scenario.samples_per_class[cid]


def test_warning_when_all_counts_equal():
    tasks = (
        TaskSpec(0, (0, 1), (), {0: 5, 1: 5}, 1, 1),
        TaskSpec(1, (2,), (0,), {2: 5, 0: 5}, 1, 1),
    )
    scenario = Scenario(tasks=tasks, total_classes=4, rng_seed=0,
                        samples_per_class={0: 10, 1: 5, 2: 5})
    assert validate_scenario(scenario) == []
    assert any("unequal" in w for w in scenario_warnings(scenario))


# --- serialization ---


def test_scenario_json_round_trip():
    scenario = build_scenario(basic_config(rng_seed=99))
    restored = scenario_from_dict(scenario_to_dict(scenario))
    assert dump_scenario(restored) == dump_scenario(scenario)
    assert restored.samples_per_class == {
        cid: total for cid, total in scenario.samples_per_class.items()
        if any(cid in t.sample_counts for t in scenario.tasks)
    }


def test_scenario_file_round_trip(tmp_path):
    scenario = build_scenario(basic_config(rng_seed=5))
    path = tmp_path / "scenario.json"
    path.write_text(dump_scenario(scenario))
    assert dump_scenario(load_scenario(path)) == dump_scenario(scenario)


def test_scenario_golden_file_shape():
    scenario = build_scenario(basic_config(rng_seed=7))
    payload = scenario_to_dict(scenario)
    assert set(payload) == {"version", "seed", "N", "tasks"}
    assert payload["version"] == 1
    assert payload["seed"] == 7
    assert payload["N"] == 10
    for entry in payload["tasks"]:
        assert set(entry) == {"i", "new", "repeat", "counts", "alpha", "beta"}
