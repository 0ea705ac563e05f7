"""Tests for the training loop, early stopping and evaluation."""

import csv
import json

import numpy as np
import pytest

from helpers.checkpoint import load_checkpoint
from helpers.errors import ConfigurationError, GeometryError
from helpers.manifest import AugmentedManifest
from helpers.metrics import EpochRecord
from helpers.model import ZachVitConfig, build_model
from helpers.training import CURVE_COLUMNS, TrainConfig, evaluate, train, write_curves

TINY = ZachVitConfig(
    image_height=32,
    image_width=32,
    channels=1,
    embed_dim=16,
    block_units=(16, 8),
    heads_per_block=(2, 2),
)


def run(manifest_path, out_dir, **overrides):
    values = {"max_epochs": 2, "early_stop_patience": 1, "batch_size": 4, "dtype": "float64"}
    values.update(overrides)
    manifest = AugmentedManifest.load(manifest_path)
    return train("zachvit", manifest, TrainConfig(**values), out_dir, TINY, threads=1)


@pytest.fixture(scope="module")
def trained(small_vis_dataset, tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    return run(small_vis_dataset, out, max_epochs=2, early_stop_patience=2), out


class TestTrain:
    def test_writes_checkpoints_and_reports(self, trained):
        result, out = trained
        for name in ("best.ckpt", "peak.ckpt", "last.ckpt", "curves.csv", "report.json"):
            assert (out / name).is_file()
        report = json.loads((out / "report.json").read_text())
        assert report["model"] == "zachvit"
        assert report["best_epoch"] == result.best_epoch
        assert set(report["metrics"]) == {"best_val", "best_test", "peak_val", "peak_test"}
        assert len(report["history"]) == len(result.history) == 2

    def test_class_weights_come_from_train_split(self, trained):
        result, _ = trained
        # 13 training exams, 4 positive
        assert result.class_weights == pytest.approx((13 / 18, 13 / 8))

    def test_curves_csv_has_one_row_per_epoch(self, trained):
        result, out = trained
        with open(out / "curves.csv", newline="") as handle:
            rows = list(csv.reader(handle))
        assert tuple(rows[0]) == CURVE_COLUMNS
        assert [int(r[0]) for r in rows[1:]] == [r.epoch for r in result.history]

    def test_returned_model_is_the_best_checkpoint(self, trained):
        result, out = trained
        best, manifest = load_checkpoint(out / "best.ckpt")
        assert manifest["extra"]["epoch"] == result.best_epoch
        for a, b in zip(result.model.params, best.params):
            np.testing.assert_array_equal(a.value.numpy(), b.value.numpy())

    def test_same_seed_reproduces_weights(self, trained, small_vis_dataset, tmp_path):
        result, _ = trained
        again = run(small_vis_dataset, tmp_path, max_epochs=2, early_stop_patience=2)
        assert [r.train_loss for r in again.history] == [r.train_loss for r in result.history]
        for a, b in zip(result.model.params, again.model.params):
            np.testing.assert_array_equal(a.value.numpy(), b.value.numpy())

    def test_evaluate_scores_the_test_split(self, trained, small_vis_dataset):
        _, out = trained
        report = evaluate(out / "best.ckpt", AugmentedManifest.load(small_vis_dataset), "test")
        assert report.confusion.total == 3
        assert report.roc_auc is None or 0.0 <= report.roc_auc <= 1.0


def test_zero_learning_rate_keeps_initial_weights(small_vis_dataset, tmp_path):
    result = run(
        small_vis_dataset, tmp_path, learning_rate=0.0, max_epochs=1, early_stop_patience=1
    )
    initial = build_model("zachvit", TINY, seed=0, dtype="float64")
    for a, b in zip(initial.params, result.model.params):
        np.testing.assert_array_equal(a.value.numpy(), b.value.numpy())


def test_early_stopping_on_flat_validation_loss(small_vis_dataset, tmp_path):
    result = run(
        small_vis_dataset, tmp_path, learning_rate=0.0, max_epochs=5, early_stop_patience=1
    )
    assert result.best_epoch == 1
    assert result.stopped_epoch == 2
    assert len(result.history) == 2


def test_model_geometry_must_match_manifest(small_vis_dataset, tmp_path):
    manifest = AugmentedManifest.load(small_vis_dataset)
    wrong = ZachVitConfig(image_height=64, image_width=64, channels=1)
    config = TrainConfig(max_epochs=1, early_stop_patience=1)
    with pytest.raises(GeometryError, match="64x64"):
        train("zachvit", manifest, config, tmp_path, wrong)


@pytest.mark.parametrize(
    "overrides",
    [
        {"max_epochs": 0},
        {"max_epochs": 3, "early_stop_patience": 4},
        {"batch_size": 0},
        {"learning_rate": -1.0},
        {"class_weighting": "inverse"},
        {"dtype": "float16"},
    ],
)
def test_invalid_train_config(overrides):
    with pytest.raises(ConfigurationError):
        TrainConfig(**overrides)


def test_undefined_auc_is_written_as_empty_cell(tmp_path):
    history = [EpochRecord(1, 0.7, None, 0.69, 0.5)]
    path = write_curves(tmp_path / "curves.csv", history)
    assert path.read_text().splitlines()[1] == "1,0.7,,0.69,0.5"
