"""Config file parsing: key=value scenario files and JSON run/grid entries.

Scenario files are flat ``key = value`` lines with ``#`` comments, one key
per ScenarioConfig field. ``samples_per_class`` accepts either a single
integer (the same budget for every class) or ``id:count`` pairs separated
by commas. Run configs arrive as JSON objects (suite grid files) or are
assembled from CLI flags.
"""

from __future__ import annotations

from pathlib import Path

from .errors import ConfigError
from .harness import RunConfig
from .learner import SgdConfig
from .scenario import CATEGORY_PRESETS, ScenarioConfig, config_from_category


def parse_kv_file(path: str | Path) -> dict[str, str]:
    mapping: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        mapping[key.strip()] = value.strip()
    return mapping


def _parse_int_list(value: str) -> tuple[int, ...]:
    try:
        return tuple(int(part) for part in value.split(",") if part.strip())
    except ValueError as exc:
        raise ConfigError(f"expected comma-separated integers, got {value!r}") from exc


def parse_budgets(value: str, total_classes: int) -> dict[int, int]:
    value = value.strip()
    if ":" not in value:
        budget = int(value)
        return {cid: budget for cid in range(total_classes)}
    out: dict[int, int] = {}
    for part in value.split(","):
        if not part.strip():
            continue
        cid, count = part.split(":")
        out[int(cid)] = int(count)
    return out


_SCENARIO_KEYS = {
    "total_classes", "num_tasks", "alpha_set", "beta_set", "rng_seed",
    "samples_per_class", "distribution", "exponential_rate", "gaussian_mean",
    "gaussian_std", "category", "class_cap", "fixed_hyperparams",
}


def scenario_config_from_mapping(
    mapping: dict[str, str], overrides: dict[str, str] | None = None
) -> ScenarioConfig:
    merged = dict(mapping)
    merged.update({k: v for k, v in (overrides or {}).items() if v is not None})
    unknown = set(merged) - _SCENARIO_KEYS
    if unknown:
        raise ConfigError(f"unknown scenario config keys: {sorted(unknown)}")
    try:
        total_classes = int(merged["total_classes"])
        num_tasks = int(merged["num_tasks"])
        rng_seed = int(merged["rng_seed"])
    except KeyError as exc:
        raise ConfigError(f"scenario config missing required key {exc}") from exc

    budgets: dict[int, int] = {}
    if "samples_per_class" in merged:
        budgets = parse_budgets(merged["samples_per_class"], total_classes)

    common = dict(
        distribution=merged.get("distribution", "exponential"),
        exponential_rate=float(merged.get("exponential_rate", 1.0)),
        gaussian_mean=float(merged.get("gaussian_mean", 0.0)),
        gaussian_std=float(merged.get("gaussian_std", 0.4)),
        fixed_hyperparams=merged.get("fixed_hyperparams", "false").lower() == "true",
    )

    category = merged.get("category", "custom")
    if category in CATEGORY_PRESETS:
        for pinned in ("alpha_set", "beta_set", "class_cap"):
            if pinned in merged:
                raise ConfigError(f"category {category!r} pins {pinned}; remove it or use category=custom")
        return config_from_category(
            category, total_classes, num_tasks, rng_seed,
            samples_per_class=budgets, **common,
        )
    if category != "custom":
        raise ConfigError(f"unknown category {category!r}")
    if "alpha_set" not in merged or "beta_set" not in merged:
        raise ConfigError("custom scenarios need explicit alpha_set and beta_set")
    cap = merged.get("class_cap")
    return ScenarioConfig(
        total_classes=total_classes,
        num_tasks=num_tasks,
        alpha_set=_parse_int_list(merged["alpha_set"]),
        beta_set=_parse_int_list(merged["beta_set"]),
        rng_seed=rng_seed,
        samples_per_class=budgets,
        category="custom",
        class_cap=int(cap) if cap is not None else None,
        **common,
    )


def scenario_config_from_dict(payload: dict) -> ScenarioConfig:
    """Typed (JSON) scenario config, as found in suite grid files."""
    data = dict(payload)
    category = data.get("category", "custom")
    budgets = {int(k): int(v) for k, v in data.get("samples_per_class", {}).items()}
    common = {
        key: data[key]
        for key in (
            "distribution", "exponential_rate", "gaussian_mean", "gaussian_std",
            "fixed_hyperparams",
        )
        if key in data
    }
    if category in CATEGORY_PRESETS:
        return config_from_category(
            category,
            int(data["total_classes"]),
            int(data["num_tasks"]),
            int(data["rng_seed"]),
            samples_per_class=budgets,
            **common,
        )
    return ScenarioConfig(
        total_classes=int(data["total_classes"]),
        num_tasks=int(data["num_tasks"]),
        alpha_set=tuple(int(a) for a in data["alpha_set"]),
        beta_set=tuple(int(b) for b in data["beta_set"]),
        rng_seed=int(data["rng_seed"]),
        samples_per_class=budgets,
        category="custom",
        class_cap=data.get("class_cap"),
        **common,
    )


def run_config_from_dict(payload: dict) -> RunConfig:
    data = dict(payload)
    data.pop("name", None)
    scenario = scenario_config_from_dict(data.pop("scenario"))
    sgd = SgdConfig(**data.pop("sgd", {}))
    hidden = data.pop("hidden_dim", 64)
    return RunConfig(
        scenario=scenario,
        sgd=sgd,
        hidden_dim=None if hidden in (None, "none", "linear") else int(hidden),
        **data,
    )
