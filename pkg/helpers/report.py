"""Side-by-side comparison of finished training runs."""

import csv
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from helpers.errors import InputError
from helpers.logging import MAIN_LOGGER_NAME
from helpers.svg_plot import line_plot
from helpers.training import CURVE_COLUMNS

logger = logging.getLogger(MAIN_LOGGER_NAME)

RUN_REPORT = "report.json"
METRIC_SETS = ("best_val", "best_test", "peak_val", "peak_test")
METRIC_NAMES = ("roc_auc", "sensitivity", "specificity", "accuracy", "f1")
SUMMARY_COLUMNS = ("run", "model", "param_count", "best_epoch", "peak_epoch", "stopped_epoch")


@dataclass(frozen=True)
class RunSummary:
    name: str
    path: Path
    report: dict[str, Any]

    @property
    def history(self) -> list[dict[str, Any]]:
        return self.report.get("history", [])

    def metric(self, metric_set: str, name: str) -> float | None:
        return self.report.get("metrics", {}).get(metric_set, {}).get(name)


def find_runs(paths: list[Path | str]) -> list[Path]:
    """
    Run directories under the given paths. A path holding report.json is a
    run itself; otherwise its immediate subdirectories are searched.
    """
    runs: list[Path] = []
    for raw in paths:
        path = Path(raw)
        if not path.is_dir():
            raise InputError(f"Run directory not found: {path}")
        if (path / RUN_REPORT).is_file():
            runs.append(path)
            continue
        runs.extend(sorted(p for p in path.iterdir() if (p / RUN_REPORT).is_file()))
    if not runs:
        raise InputError(
            f"No finished runs (directories with {RUN_REPORT}) under: "
            + ", ".join(str(p) for p in paths)
        )
    return runs


def load_runs(paths: list[Path | str]) -> list[RunSummary]:
    summaries = []
    seen: dict[str, int] = {}
    for path in find_runs(paths):
        try:
            report = json.loads((path / RUN_REPORT).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise InputError(f"{path / RUN_REPORT} is not valid JSON: {exc}") from exc
        name = path.name
        if name in seen:
            seen[name] += 1
            name = f"{name}_{seen[name]}"
        else:
            seen[name] = 0
        summaries.append(RunSummary(name=name, path=path, report=report))
    return summaries


def _metric_columns() -> list[str]:
    return [f"{metric_set}_{name}" for metric_set in METRIC_SETS for name in METRIC_NAMES]


def _fmt(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _mean_std(values: list[float]) -> tuple[float, float] | None:
    if not values:
        return None
    mean = sum(values) / len(values)
    var = sum((v - mean) ** 2 for v in values) / len(values)
    return mean, math.sqrt(var)


def write_comparison(path: Path, runs: list[RunSummary]) -> Path:
    """One row per run; mean and population std rows when there are two or more."""
    metric_columns = _metric_columns()
    rows = []
    for run in runs:
        row = [run.name] + [run.report.get(key) for key in SUMMARY_COLUMNS[1:]]
        row += [
            run.metric(metric_set, name) for metric_set in METRIC_SETS for name in METRIC_NAMES
        ]
        rows.append(row)
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(SUMMARY_COLUMNS + tuple(metric_columns))
        for row in rows:
            writer.writerow([_fmt(v) for v in row])
        if len(rows) >= 2:
            stats = [
                _mean_std([r[i] for r in rows if isinstance(r[i], (int, float))])
                for i in range(2, len(rows[0]))
            ]
            for label, pick in (("mean", 0), ("std", 1)):
                writer.writerow(
                    [label, ""] + [_fmt(None if s is None else float(s[pick])) for s in stats]
                )
    return path


def write_curves_table(path: Path, runs: list[RunSummary]) -> Path:
    """epoch column plus four curve columns per run; shorter runs leave blanks."""
    curve_fields = CURVE_COLUMNS[1:]
    epochs = sorted({record["epoch"] for run in runs for record in run.history})
    by_run = [{record["epoch"]: record for record in run.history} for run in runs]
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(
            ["epoch"] + [f"{run.name}/{field}" for run in runs for field in curve_fields]
        )
        for epoch in epochs:
            row = [str(epoch)]
            for records in by_run:
                record = records.get(epoch, {})
                row += [_fmt(record.get(field)) for field in curve_fields]
            writer.writerow(row)
    return path


def _series(runs: list[RunSummary], field: str) -> dict[str, tuple[list[int], list]]:
    return {
        f"{run.name} {field}": (
            [r["epoch"] for r in run.history],
            [r.get(field) for r in run.history],
        )
        for run in runs
    }


def compare_runs(run_paths: list[Path | str], out_dir: Path | str) -> dict[str, Path]:
    """
    Write comparison.csv, curves.csv, auc.svg and loss.svg for the runs.

    Raises:
        InputError: when no finished run is found.
    """
    runs = load_runs(run_paths)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    outputs = {
        "comparison": write_comparison(out_dir / "comparison.csv", runs),
        "curves": write_curves_table(out_dir / "curves.csv", runs),
        "auc_plot": line_plot(
            out_dir / "auc.svg",
            {**_series(runs, "train_auc"), **_series(runs, "val_auc")},
            title="ROC-AUC per epoch",
            y_label="ROC-AUC",
            y_limits=(0.0, 1.0),
        ),
        "loss_plot": line_plot(
            out_dir / "loss.svg",
            {**_series(runs, "train_loss"), **_series(runs, "val_loss")},
            title="Loss per epoch",
            y_label="BCE loss",
        ),
    }
    logger.info(f"Compared {len(runs)} run(s) into {out_dir}")
    return outputs
