"""Tests for layered run configuration."""

import pytest

from helpers.config import (
    builtin_defaults,
    deep_merge,
    load_yaml,
    resolve_run_config,
    shipped_config,
)
from helpers.errors import ConfigurationError, GeometryError, InputError

GEOMETRY = {"height": 112, "width": 112}


def test_deep_merge_overrides_leaves_without_mutating():
    base = {"model": {"embed_dim": 128, "heads_per_block": [4, 4, 4]}, "train": {"seed": 0}}
    merged = deep_merge(base, {"model": {"embed_dim": 64}})
    assert merged["model"] == {"embed_dim": 64, "heads_per_block": [4, 4, 4]}
    assert base["model"]["embed_dim"] == 128


def test_defaults_leave_geometry_to_the_manifest():
    defaults = builtin_defaults("zachvit")
    assert "image_height" not in defaults["model"]
    assert defaults["train"]["max_epochs"] == 23


@pytest.mark.parametrize("kind", ["zachvit", "minimal_vit"])
def test_shipped_configs_match_builtin_defaults(kind):
    from_file = resolve_run_config(kind, shipped_config(kind), geometry=GEOMETRY)
    from_defaults = resolve_run_config(kind, geometry=GEOMETRY)
    assert from_file == from_defaults


def test_flags_win_over_file(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text("train:\n  learning_rate: 1.0e-3\n  batch_size: 4\n")
    resolved = resolve_run_config(
        "zachvit",
        path,
        overrides={"train": {"learning_rate": 5.0e-4, "seed": None}},
        geometry=GEOMETRY,
    )
    assert resolved.train.learning_rate == 5.0e-4
    assert resolved.train.batch_size == 4
    assert resolved.train.seed == 0


def test_geometry_comes_from_manifest():
    resolved = resolve_run_config("zachvit", geometry={"height": 128, "width": 112})
    assert (resolved.model.image_height, resolved.model.image_width) == (128, 112)


def test_conflicting_geometry_is_rejected(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text("model:\n  image_height: 224\n")
    with pytest.raises(GeometryError, match="image_height=224"):
        resolve_run_config("zachvit", path, geometry=GEOMETRY)


def test_bare_off_is_read_as_a_string(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text("train:\n  class_weighting: off\n")
    resolved = resolve_run_config("zachvit", path, geometry=GEOMETRY)
    assert resolved.train.class_weighting == "off"


@pytest.mark.parametrize(
    "text,match",
    [
        ("train:\n  momentum: 0.9\n", "momentum"),
        ("model:\n  depth: 4\n", "depth"),
        ("optimizer:\n  lr: 1\n", "unknown section"),
        ("- a\n- b\n", "mapping"),
        ("train: [unclosed\n", "not valid YAML"),
    ],
)
def test_bad_config_files(tmp_path, text, match):
    path = tmp_path / "run.yaml"
    path.write_text(text)
    with pytest.raises(ConfigurationError, match=match):
        resolve_run_config("zachvit", path, geometry=GEOMETRY)


def test_patience_longer_than_training_is_rejected():
    with pytest.raises(ConfigurationError, match="early_stop_patience"):
        resolve_run_config(
            "zachvit", overrides={"train": {"max_epochs": 2}}, geometry=GEOMETRY
        )


def test_missing_file_is_input_error(tmp_path):
    with pytest.raises(InputError, match="not found"):
        load_yaml(tmp_path / "absent.yaml")


def test_empty_file_is_all_defaults(tmp_path):
    path = tmp_path / "empty.yaml"
    path.write_text("")
    assert load_yaml(path) == {}
