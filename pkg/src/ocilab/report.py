"""Aggregate per-run results into method x category tables with gate deltas."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

from .errors import DataError
from .harness import SuiteRow

# Grouping key for one table cell: everything except seed and gating.
CellKey = tuple[str, str, int, str, int]


@dataclass
class CellStats:
    method: str
    category: str
    num_tasks: int
    distribution: str
    buffer_capacity: int
    mean_plain: float | None
    mean_gated: float | None
    n_plain: int
    n_gated: int

    @property
    def delta(self) -> float | None:
        if self.mean_plain is None or self.mean_gated is None:
            return None
        return self.mean_gated - self.mean_plain


def rows_from_results_dir(directory: str | Path) -> list[SuiteRow]:
    """Collect every results.json under a directory into suite rows."""
    directory = Path(directory)
    paths = sorted(directory.rglob("results.json"))
    if not paths:
        raise DataError(f"no results.json files under {directory}")
    rows = []
    for path in paths:
        payload = json.loads(path.read_text())
        rows.append(
            SuiteRow(
                name=str(path.parent.name),
                method=payload["method"],
                gate_enabled=payload["gate_enabled"],
                category=payload["category"],
                num_tasks=payload["num_tasks"],
                distribution=payload["distribution"],
                buffer_capacity=payload["buffer_capacity"],
                seed=payload["seed"],
                average_accuracy=payload["average_accuracy"],
            )
        )
    return rows


def aggregate(rows: list[SuiteRow]) -> list[CellStats]:
    """Mean average-accuracy per cell, with gated/plain variants side by side."""
    groups: dict[CellKey, dict[bool, list[float]]] = {}
    for row in rows:
        if row.average_accuracy is None:
            continue
        key = (row.method, row.category, row.num_tasks, row.distribution, row.buffer_capacity)
        groups.setdefault(key, {True: [], False: []})[row.gate_enabled].append(row.average_accuracy)

    cells = []
    for key in sorted(groups):
        method, category, num_tasks, distribution, capacity = key
        gated = groups[key][True]
        plain = groups[key][False]
        cells.append(
            CellStats(
                method=method,
                category=category,
                num_tasks=num_tasks,
                distribution=distribution,
                buffer_capacity=capacity,
                mean_plain=sum(plain) / len(plain) if plain else None,
                mean_gated=sum(gated) / len(gated) if gated else None,
                n_plain=len(plain),
                n_gated=len(gated),
            )
        )
    return cells


def _fmt(value: float | None) -> str:
    return "-" if value is None else f"{100 * value:.2f}"


def cells_to_markdown(cells: list[CellStats]) -> str:
    lines = [
        "| method | category | tasks | distribution | buffer | accuracy | +gate | gain |",
        "|---|---|---|---|---|---|---|---|",
    ]
    for c in cells:
        lines.append(
            f"| {c.method} | {c.category} | {c.num_tasks} | {c.distribution} "
            f"| {c.buffer_capacity} | {_fmt(c.mean_plain)} | {_fmt(c.mean_gated)} "
            f"| {_fmt(c.delta)} |"
        )
    return "\n".join(lines) + "\n"


def cells_to_csv(cells: list[CellStats], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["method", "category", "num_tasks", "distribution", "buffer_capacity",
             "accuracy", "accuracy_gated", "gain", "n_plain", "n_gated"]
        )
        for c in cells:
            writer.writerow(
                [c.method, c.category, c.num_tasks, c.distribution, c.buffer_capacity,
                 "" if c.mean_plain is None else repr(c.mean_plain),
                 "" if c.mean_gated is None else repr(c.mean_gated),
                 "" if c.delta is None else repr(c.delta),
                 c.n_plain, c.n_gated]
            )


def suite_rows_to_csv(rows: list[SuiteRow], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["name", "method", "gate_enabled", "category", "num_tasks", "distribution",
             "buffer_capacity", "seed", "average_accuracy", "error"]
        )
        for r in rows:
            writer.writerow(
                [r.name, r.method, r.gate_enabled, r.category, r.num_tasks, r.distribution,
                 r.buffer_capacity, r.seed,
                 "" if r.average_accuracy is None else repr(r.average_accuracy),
                 r.error or ""]
            )
