import argparse
import csv
import logging
from pathlib import Path

from helpers.logging import MAIN_LOGGER_NAME, log_command
from helpers.manifest import AugmentedManifest, write_json_atomic
from helpers.metrics import MetricsReport
from helpers.run_manifest import RunRecorder, render_config
from helpers.training import evaluate as score_checkpoint

logger = logging.getLogger(MAIN_LOGGER_NAME)

METRIC_COLUMNS = ("split", "threshold", "roc_auc", "sensitivity", "specificity", "accuracy", "f1")


def write_metrics_csv(path: Path, split: str, report: MetricsReport) -> Path:
    values = report.to_dict()
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(METRIC_COLUMNS + ("tp", "fp", "tn", "fn"))
        row = [split] + ["" if values[c] is None else repr(values[c]) for c in METRIC_COLUMNS[1:]]
        confusion = values["confusion"]
        writer.writerow(row + [confusion[k] for k in ("tp", "fp", "tn", "fn")])
    return path


def register_evaluate_command(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser(
        "eval",
        help="Score a checkpoint on one split of an augmented dataset",
    )
    parser.add_argument("--checkpoint", required=True, help="Checkpoint file (.ckpt)")
    parser.add_argument("--manifest", required=True, help="Augmented manifest.json")
    parser.add_argument("--split", default="test", choices=["val", "test"])
    parser.add_argument("--threshold", type=float, default=0.5)
    parser.add_argument(
        "--out", default=None, help="Output directory (default: <checkpoint dir>/eval_<split>)"
    )
    parser.add_argument("--threads", type=int, default=None, help="Worker threads")
    parser.add_argument("--dry-run", action="store_true", help="Print the config and exit")

    @log_command
    def evaluate(
        checkpoint: str,
        manifest: str,
        split: str = "test",
        threshold: float = 0.5,
        out: str | None = None,
        threads: int | None = None,
        dry_run: bool = False,
    ) -> str:
        """Write metrics.json and metrics.csv for the split at the threshold."""
        out_dir = Path(out) if out else Path(checkpoint).parent / f"eval_{split}"
        config = {
            "checkpoint": checkpoint,
            "manifest": manifest,
            "split": split,
            "threshold": threshold,
            "out": str(out_dir),
        }
        if dry_run:
            return render_config(config)

        recorder = RunRecorder("eval", config)
        report = score_checkpoint(
            checkpoint, AugmentedManifest.load(manifest), split, threshold, threads
        )
        out_dir.mkdir(parents=True, exist_ok=True)
        write_json_atomic(out_dir / "metrics.json", {"split": split, **report.to_dict()})
        write_metrics_csv(out_dir / "metrics.csv", split, report)
        recorder.finish(out_dir, inputs=[checkpoint, manifest], outputs=[out_dir])

        auc = "undefined (single class)" if report.roc_auc is None else f"{report.roc_auc:.4f}"
        c = report.confusion
        return "\n".join(
            [
                f"Split: {split} ({c.total} images), threshold {threshold:.2f}",
                f"ROC-AUC: {auc}",
                f"Sensitivity: {report.sensitivity:.4f}",
                f"Specificity: {report.specificity:.4f}",
                f"Accuracy: {report.accuracy:.4f}",
                f"F1: {report.f1:.4f}",
                f"Confusion: tp={c.tp} fp={c.fp} tn={c.tn} fn={c.fn}",
                f"Written to {out_dir}",
            ]
        )

    parser.set_defaults(handler=evaluate)
