import argparse
import logging
from pathlib import Path

from helpers.config import resolve_run_config
from helpers.logging import MAIN_LOGGER_NAME, log_command
from helpers.manifest import AugmentedManifest
from helpers.model import MODEL_KINDS
from helpers.run_manifest import RunRecorder, render_config
from helpers.training import train as fit

logger = logging.getLogger(MAIN_LOGGER_NAME)

MODEL_CHOICES = [
    name for kind, spec in MODEL_KINDS.items() for name in (kind, *spec.aliases)
]


def register_train_command(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser(
        "train",
        help="Train ZACH-ViT or the Minimal ViT baseline on an augmented dataset",
        description=(
            "Config layers: built-in defaults, then --config YAML, then the "
            "flags below. Image size always comes from the augmented manifest."
        ),
    )
    parser.add_argument("--manifest", required=True, help="Augmented manifest.json")
    parser.add_argument("--out", required=True, help="Run directory")
    parser.add_argument("--model", default="zachvit", choices=MODEL_CHOICES)
    parser.add_argument("--config", default=None, help="YAML file with model/train sections")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--epochs", type=int, default=None, help="Maximum epochs")
    parser.add_argument("--lr", type=float, default=None, help="Adam learning rate")
    parser.add_argument("--batch-size", type=int, default=None)
    parser.add_argument("--patience", type=int, default=None, help="Early stopping patience")
    parser.add_argument("--dtype", default=None, choices=["float32", "float64"])
    parser.add_argument("--threads", type=int, default=None, help="Worker threads")
    parser.add_argument("--dry-run", action="store_true", help="Print the config and exit")

    @log_command
    def train(
        manifest: str,
        out: str,
        model: str = "zachvit",
        config: str | None = None,
        seed: int | None = None,
        epochs: int | None = None,
        lr: float | None = None,
        batch_size: int | None = None,
        patience: int | None = None,
        dtype: str | None = None,
        threads: int | None = None,
        dry_run: bool = False,
    ) -> str:
        """
        Fit the model and write best/peak/last checkpoints, curves.csv and
        report.json into the run directory.
        """
        augmented = AugmentedManifest.load(manifest)
        resolved = resolve_run_config(
            model,
            config_path=config,
            overrides={
                "train": {
                    "seed": seed,
                    "max_epochs": epochs,
                    "learning_rate": lr,
                    "batch_size": batch_size,
                    "early_stop_patience": patience,
                    "dtype": dtype,
                }
            },
            geometry=augmented.geometry,
        )
        run_config = {**resolved.to_dict(), "manifest": manifest, "regime": augmented.regime}
        if dry_run:
            return render_config(run_config)

        recorder = RunRecorder("train", run_config)
        result = fit(
            resolved.kind,
            augmented,
            resolved.train,
            out,
            model_config=resolved.model,
            threads=threads,
        )
        recorder.finish(
            out,
            inputs=[manifest],
            outputs=[out],
            extra={"train_seconds": round(result.train_seconds, 3)},
        )

        lines = [
            f"Run directory: {Path(out)}",
            f"Model: {resolved.kind} ({sum(p.size for p in result.model.params):,} parameters)",
            f"Epochs run: {result.stopped_epoch}, best (val loss) epoch: {result.best_epoch}, "
            f"peak (val AUC) epoch: {result.peak_epoch}",
        ]
        for name, report in result.reports.items():
            auc = "n/a" if report.roc_auc is None else f"{report.roc_auc:.4f}"
            lines.append(
                f"  {name}: AUC {auc}, sens {report.sensitivity:.3f}, "
                f"spec {report.specificity:.3f}, F1 {report.f1:.3f}"
            )
        return "\n".join(lines)

    parser.set_defaults(handler=train)
