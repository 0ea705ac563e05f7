"""
Training loop with early stopping, and split evaluation.

Each epoch visits the training images in a Fisher-Yates order keyed by
(seed, epoch), keeps the last partial batch, then scores the validation
split in eval mode. Three checkpoints are kept: `best.ckpt` (lowest
validation loss, the weights the returned model ends up with),
`peak.ckpt` (highest validation AUC) and `last.ckpt` (rewritten after every
epoch and saved once before training, so a failed run always leaves the
last good weights behind).
"""

import csv
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Literal

import numpy as np

from helpers.checkpoint import load_checkpoint, save_checkpoint
from helpers.env_config import get_num_threads
from helpers.errors import (
    ConfigurationError,
    GeometryError,
    NonFiniteError,
    UndefinedMetricError,
)
from helpers.logging import MAIN_LOGGER_NAME
from helpers.manifest import AugmentedManifest, write_json_atomic
from helpers.metrics import (
    EpochRecord,
    MetricsReport,
    class_weights,
    metrics_report,
    roc_auc,
)
from helpers.model import DTYPES, MODEL_KINDS, VisionModel, build_model, normalize_kind
from helpers.ops import sigmoid, sigmoid_bce
from helpers.optim import Adam, AdamConfig
from helpers.prng import Xoshiro256pp, fisher_yates
from helpers.tensor import Tape, backward

logger = logging.getLogger(MAIN_LOGGER_NAME)

CURVE_COLUMNS = ("epoch", "train_loss", "train_auc", "val_loss", "val_auc")
EVAL_BATCH_SIZE = 32


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-4
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    max_epochs: int = 23
    early_stop_patience: int = 5
    batch_size: int = 8
    class_weighting: Literal["auto", "off"] = "auto"
    eval_threshold: float = 0.5
    seed: int = 0
    dtype: str = "float32"

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ConfigurationError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if self.max_epochs < 1:
            raise ConfigurationError(f"max_epochs must be at least 1, got {self.max_epochs}")
        if not 0 <= self.early_stop_patience <= self.max_epochs:
            raise ConfigurationError(
                f"early_stop_patience must be in [0, max_epochs={self.max_epochs}], "
                f"got {self.early_stop_patience}"
            )
        if self.batch_size < 1:
            raise ConfigurationError(f"batch_size must be at least 1, got {self.batch_size}")
        if self.class_weighting not in ("auto", "off"):
            raise ConfigurationError(
                f"class_weighting must be 'auto' or 'off', got {self.class_weighting!r}"
            )
        if not 0.0 <= self.eval_threshold <= 1.0:
            raise ConfigurationError(f"eval_threshold must be in [0, 1], got {self.eval_threshold}")
        if self.dtype not in DTYPES:
            raise ConfigurationError(f"dtype must be one of {', '.join(DTYPES)}")

    @property
    def adam(self) -> AdamConfig:
        return AdamConfig(
            learning_rate=self.learning_rate,
            beta1=self.adam_beta1,
            beta2=self.adam_beta2,
            eps=self.adam_eps,
        )

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


@dataclass
class TrainResult:
    model: VisionModel
    history: list[EpochRecord]
    best_epoch: int
    peak_epoch: int
    stopped_epoch: int
    class_weights: tuple[float, float]
    reports: dict[str, MetricsReport]
    train_seconds: float


def model_config_for(kind: str, geometry: dict[str, Any], config=None):
    """
    Model config matching a manifest's image geometry.

    Without an explicit config the kind's defaults are used at the
    manifest's height and width; an explicit config must already agree.
    """
    spec = MODEL_KINDS[normalize_kind(kind)]
    height, width = int(geometry["height"]), int(geometry["width"])
    if config is None:
        return spec.config_cls(image_height=height, image_width=width)
    check_geometry(config, height, width)
    return config


def check_geometry(config, height: int, width: int) -> None:
    if (config.image_height, config.image_width) != (height, width):
        raise GeometryError(
            f"model expects {config.image_height}x{config.image_width} images, "
            f"data is {height}x{width}"
        )


def _to_float(images: np.ndarray, dtype: str) -> np.ndarray:
    return images.astype(DTYPES[dtype]) / DTYPES[dtype](255.0)


def predict_logits(
    model: VisionModel,
    images: np.ndarray,
    batch_size: int = EVAL_BATCH_SIZE,
    threads: int = 1,
) -> np.ndarray:
    """Eval-mode logits for 8-bit images; batches may run on worker threads."""
    starts = list(range(0, len(images), batch_size))

    def _batch(start: int) -> np.ndarray:
        x = _to_float(images[start : start + batch_size], model.dtype)
        return model.forward(x, mode="eval").numpy().reshape(-1)

    if threads > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(_batch, starts))
    else:
        parts = [_batch(start) for start in starts]
    return np.concatenate(parts).astype(np.float64)


def _bce(logits: np.ndarray, labels: np.ndarray) -> float:
    per_sample = np.maximum(logits, 0) - logits * labels + np.log1p(np.exp(-np.abs(logits)))
    return float(np.mean(per_sample))


def _safe_auc(scores: np.ndarray, labels: np.ndarray) -> float | None:
    try:
        return roc_auc(scores, labels)
    except UndefinedMetricError:
        return None


def write_curves(path: Path | str, history: list[EpochRecord]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(CURVE_COLUMNS)
        for record in history:
            writer.writerow(
                ["" if value is None else repr(value) for value in asdict(record).values()]
            )
    return path


def train(
    model_kind: str,
    manifest: AugmentedManifest,
    config: TrainConfig,
    out_dir: Path | str,
    model_config=None,
    threads: int | None = None,
) -> TrainResult:
    """
    Fit a model on the manifest's train split, early-stopping on val loss.

    Raises:
        GeometryError: if `model_config` disagrees with the manifest geometry.
        NonFiniteError: if the training loss turns NaN/Inf; `last.ckpt`
            holds the weights from the last completed epoch.
    """
    out_dir = Path(out_dir)
    threads = threads or get_num_threads()
    started = time.perf_counter()
    kind = normalize_kind(model_kind)
    model_config = model_config_for(kind, manifest.geometry, model_config)
    train_x, train_y, _ = manifest.load_split("train")
    val_x, val_y, _ = manifest.load_split("val")
    weights = class_weights(train_y) if config.class_weighting == "auto" else (1.0, 1.0)

    model = build_model(kind, model_config, seed=config.seed, dtype=config.dtype)
    optimizer = Adam(list(model.params), config.adam)
    if config.learning_rate == 0:
        logger.warning("learning_rate is 0: parameters will not change")
    logger.info(
        f"Training {kind} ({sum(p.size for p in model.params)} parameters) on "
        f"{len(train_y)} train / {len(val_y)} val images, class weights "
        f"({weights[0]:.4f}, {weights[1]:.4f})"
    )
    save_checkpoint(model, out_dir / "last.ckpt", extra={"epoch": 0})

    history: list[EpochRecord] = []
    best_loss, best_epoch = math.inf, 0
    peak_auc, peak_epoch = -math.inf, 0
    wait = 0
    epoch = 0
    for epoch in range(1, config.max_epochs + 1):
        epoch_stream = Xoshiro256pp.from_key(config.seed, "epoch", epoch)
        order = fisher_yates(range(len(train_y)), epoch_stream)
        dropout_stream = Xoshiro256pp.from_key(config.seed, "dropout", epoch)
        loss_sum = 0.0
        epoch_logits = np.empty(len(train_y))
        for start in range(0, len(order), config.batch_size):
            idx = np.asarray(order[start : start + config.batch_size])
            x = _to_float(train_x[idx], config.dtype)
            y = train_y[idx]
            optimizer.zero_grad()
            with Tape():
                logits = model.forward(x, mode="train", stream=dropout_stream)
                loss = sigmoid_bce(logits, y, weights)
            value = loss.item()
            if not math.isfinite(value):
                logger.error(f"Non-finite loss at epoch {epoch}, batch starting at {start}")
                raise NonFiniteError(
                    f"training loss became {value} at epoch {epoch}; "
                    f"{out_dir / 'last.ckpt'} holds the last good weights"
                )
            backward(loss)
            optimizer.step()
            loss_sum += value * len(idx)
            epoch_logits[idx] = logits.numpy().reshape(-1)
            logger.debug(f"epoch {epoch} batch {start // config.batch_size}: loss {value:.6f}")

        val_logits = predict_logits(model, val_x, threads=threads)
        record = EpochRecord(
            epoch=epoch,
            train_loss=loss_sum / len(train_y),
            train_auc=_safe_auc(epoch_logits, train_y),
            val_loss=_bce(val_logits, val_y),
            val_auc=_safe_auc(val_logits, val_y),
        )
        history.append(record)
        logger.info(
            f"epoch {epoch}/{config.max_epochs}: train_loss={record.train_loss:.4f} "
            f"val_loss={record.val_loss:.4f} val_auc={record.val_auc}"
        )

        if record.val_auc is not None and record.val_auc > peak_auc:
            peak_auc, peak_epoch = record.val_auc, epoch
            save_checkpoint(model, out_dir / "peak.ckpt", extra={"epoch": epoch})
        save_checkpoint(model, out_dir / "last.ckpt", extra={"epoch": epoch})
        if record.val_loss < best_loss:
            best_loss, best_epoch = record.val_loss, epoch
            wait = 0
            save_checkpoint(model, out_dir / "best.ckpt", extra={"epoch": epoch})
        else:
            wait += 1
            if wait >= config.early_stop_patience:
                logger.info(
                    f"Early stopping at epoch {epoch}: no val loss improvement "
                    f"for {wait} epoch(s)"
                )
                break

    if peak_epoch == 0:
        save_checkpoint(model, out_dir / "peak.ckpt", extra={"epoch": best_epoch})
        peak_epoch = best_epoch
    best_model, _ = load_checkpoint(out_dir / "best.ckpt")
    train_seconds = time.perf_counter() - started

    reports = {}
    for name, ckpt in (("best", "best.ckpt"), ("peak", "peak.ckpt")):
        scored = best_model if name == "best" else load_checkpoint(out_dir / ckpt)[0]
        for split in ("val", "test"):
            if not manifest.split(split):
                continue
            reports[f"{name}_{split}"] = evaluate_model(
                scored, manifest, split, config.eval_threshold, threads=threads
            )
    write_curves(out_dir / "curves.csv", history)
    write_json_atomic(
        out_dir / "report.json",
        {
            "model": kind,
            "param_count": sum(p.size for p in best_model.params),
            "best_epoch": best_epoch,
            "peak_epoch": peak_epoch,
            "stopped_epoch": epoch,
            "class_weights": list(weights),
            "history": [asdict(r) for r in history],
            "metrics": {name: report.to_dict() for name, report in reports.items()},
        },
    )
    logger.info(
        f"Finished {kind}: best epoch {best_epoch} (val loss {best_loss:.4f}), "
        f"peak val AUC {peak_auc} at epoch {peak_epoch}, {train_seconds:.1f}s"
    )
    return TrainResult(
        model=best_model,
        history=history,
        best_epoch=best_epoch,
        peak_epoch=peak_epoch,
        stopped_epoch=epoch,
        class_weights=weights,
        reports=reports,
        train_seconds=train_seconds,
    )


def evaluate_model(
    model: VisionModel,
    manifest: AugmentedManifest,
    split: str,
    threshold: float = 0.5,
    threads: int | None = None,
) -> MetricsReport:
    """Exam-level metrics on a split's canonical stride images."""
    check_geometry(model.config, *manifest.image_size)
    images, labels, _ = manifest.load_split(split)
    logits = predict_logits(model, images, threads=threads or get_num_threads())
    return metrics_report(sigmoid(logits), labels, threshold)


def evaluate(
    checkpoint_path: Path | str,
    manifest: AugmentedManifest,
    split: str = "test",
    threshold: float = 0.5,
    threads: int | None = None,
) -> MetricsReport:
    model, _ = load_checkpoint(checkpoint_path)
    return evaluate_model(model, manifest, split, threshold, threads)
