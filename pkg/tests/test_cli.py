"""Tests for the zachvit command line: dispatch, exit codes and command logging."""

import ast
import json
import logging

import pytest

from helpers.errors import EXIT_CONFIG_ERROR, EXIT_INPUT_ERROR, EXIT_OK, EXIT_VERIFICATION_FAILED
from helpers.logging import COMMANDS_LOGGER_NAME
from helpers.run_manifest import RUN_MANIFEST_FILENAME
from helpers.verify import SuiteResult
from main import main

TINY_CONFIG = """\
model:
  channels: 1
  embed_dim: 16
  block_units: [16, 8]
  heads_per_block: [2, 2]
train:
  max_epochs: 1
  early_stop_patience: 1
  batch_size: 4
  dtype: float64
"""


@pytest.mark.parametrize(
    "argv, command, expected_kwargs",
    [
        (
            ["synth", "--out", "data", "--dry-run"],
            "synth",
            {"out": "data", "patients": 95, "prevalence": 0.295, "dry_run": True},
        ),
        (
            ["synth", "--out", "data", "--patients", "40", "--seed", "3", "--dry-run"],
            "synth",
            {"out": "data", "patients": 40, "seed": 3},
        ),
        (
            ["verify", "--suite", "params", "--suite", "auc-oracle", "--dry-run"],
            "verify",
            {"suite": ["params", "auc-oracle"], "seed": 0},
        ),
    ],
)
def test_command_logs_kwargs(caplog, capsys, argv, command, expected_kwargs):
    with caplog.at_level(logging.INFO, logger=COMMANDS_LOGGER_NAME):
        assert main(argv) == EXIT_OK

    record = next(r for r in caplog.records if f"Command called: {command}" in r.message)

    kwargs_str = record.message.split("kwargs=")[1]
    kwargs = ast.literal_eval(kwargs_str)

    for key, value in expected_kwargs.items():
        assert kwargs[key] == value, f"Expected {key}={value}, got {kwargs.get(key)}"


def test_dry_run_prints_resolved_config(capsys, tmp_path):
    assert main(["synth", "--out", str(tmp_path / "d"), "--frames", "4", "--dry-run"]) == EXIT_OK
    printed = json.loads(capsys.readouterr().out)
    assert printed["synth"]["frames_per_video"] == 4
    assert not (tmp_path / "d").exists()


def test_missing_required_flag_exits_with_usage_error():
    with pytest.raises(SystemExit) as excinfo:
        main(["synth"])
    assert excinfo.value.code == 2


def test_unknown_command_exits_with_usage_error():
    with pytest.raises(SystemExit) as excinfo:
        main(["explode"])
    assert excinfo.value.code == 2


def test_too_few_patients_is_a_configuration_error(tmp_path, caplog):
    code = main(["synth", "--out", str(tmp_path / "d"), "--patients", "3", "--frames", "1"])
    assert code == EXIT_CONFIG_ERROR
    assert "synth failed" in caplog.text


def test_bad_regime_is_a_configuration_error(small_dataset, tmp_path):
    argv = ["augment", "--manifest", str(small_dataset), "--out", str(tmp_path / "a")]
    assert main([*argv, "--regime", "ssda:4"]) == EXIT_CONFIG_ERROR


def test_missing_checkpoint_is_an_input_error(small_vis_dataset, tmp_path):
    missing = tmp_path / "none.ckpt"
    argv = ["eval", "--checkpoint", str(missing), "--manifest", str(small_vis_dataset)]
    assert main(argv) == EXIT_INPUT_ERROR


def test_failed_suite_exits_with_one(monkeypatch, tmp_path, capsys):
    monkeypatch.setattr(
        "tools.verify.run_suites",
        lambda names, seed=0: [SuiteResult("params", False, {"ratio": 0.9}, "ratio too high")],
    )
    code = main(["verify", "--suite", "params", "--out", str(tmp_path / "v")])
    assert code == EXIT_VERIFICATION_FAILED
    report = json.loads((tmp_path / "v" / "verify.json").read_text())
    assert report["results"][0]["passed"] is False


def test_fast_suites_pass(tmp_path, capsys):
    out = tmp_path / "v"
    code = main(["verify", "--suite", "params", "--suite", "auc-oracle", "--out", str(out)])
    assert code == EXIT_OK
    assert "PASS  params" in capsys.readouterr().out
    assert (out / RUN_MANIFEST_FILENAME).is_file()


def test_augment_train_eval_report_pipeline(small_dataset, tmp_path, capsys):
    augmented = tmp_path / "vis"
    config = tmp_path / "tiny.yaml"
    config.write_text(TINY_CONFIG)
    steps = [
        ["augment", "--manifest", str(small_dataset), "--out", str(augmented),
         "--regime", "vis", "--size", "32"],
        ["train", "--manifest", str(augmented / "manifest.json"), "--out", str(tmp_path / "run"),
         "--config", str(config), "--threads", "1"],
        ["eval", "--checkpoint", str(tmp_path / "run" / "best.ckpt"),
         "--manifest", str(augmented / "manifest.json"), "--split", "val"],
        ["report", "--runs", str(tmp_path / "run"), "--out", str(tmp_path / "report")],
    ]  # fmt: skip
    for argv in steps:
        assert main(argv) == EXIT_OK, argv[0]

    metrics = json.loads((tmp_path / "run" / "eval_val" / "metrics.json").read_text())
    assert metrics["split"] == "val"
    assert metrics["confusion"]["tp"] + metrics["confusion"]["fn"] == 1
    run_manifest = json.loads((tmp_path / "run" / RUN_MANIFEST_FILENAME).read_text())
    assert run_manifest["command"] == "train"
    assert run_manifest["config"]["model"]["image_height"] == 32
    assert "train_seconds" in run_manifest["extra"]
    assert (tmp_path / "report" / "comparison.csv").is_file()


def test_train_geometry_conflict_is_a_configuration_error(small_vis_dataset, tmp_path):
    config = tmp_path / "big.yaml"
    config.write_text("model:\n  image_height: 224\n")
    argv = ["train", "--manifest", str(small_vis_dataset), "--out", str(tmp_path / "run")]
    assert main([*argv, "--config", str(config), "--dry-run"]) == EXIT_CONFIG_ERROR
