"""
Layered run configuration: built-in defaults <- YAML file <- CLI flags.

A run config file has two sections, `model:` and `train:`. Image height
and width are not part of the built-in defaults: they come from the
augmented manifest the run trains on, and an explicit value that
disagrees with the manifest is a geometry error.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import yaml

from helpers.errors import ConfigurationError, GeometryError, InputError
from helpers.logging import MAIN_LOGGER_NAME
from helpers.model import MODEL_KINDS, config_from_dict, normalize_kind
from helpers.training import TrainConfig

logger = logging.getLogger(MAIN_LOGGER_NAME)

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"
SECTIONS = ("model", "train")
GEOMETRY_KEYS = ("image_height", "image_width")


def load_yaml(path: Path | str) -> dict[str, Any]:
    path = Path(path)
    if not path.is_file():
        raise InputError(f"Config file not found: {path}")
    try:
        payload = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"{path} is not valid YAML: {exc}") from exc
    if payload is None:
        return {}
    if not isinstance(payload, dict):
        raise ConfigurationError(f"{path} must hold a mapping, got {type(payload).__name__}")
    unknown = sorted(set(payload) - set(SECTIONS))
    if unknown:
        raise ConfigurationError(
            f"{path}: unknown section(s) {', '.join(unknown)}; expected model and train"
        )
    return payload


def deep_merge(base: dict[str, Any], override: dict[str, Any]) -> dict[str, Any]:
    """Recursive dict merge; override wins, neither input is modified."""
    merged = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def builtin_defaults(kind: str) -> dict[str, Any]:
    spec = MODEL_KINDS[normalize_kind(kind)]
    model = spec.config_cls().to_dict()
    for key in GEOMETRY_KEYS:
        model.pop(key)
    return {"model": model, "train": TrainConfig().to_dict()}


@dataclass(frozen=True)
class RunConfig:
    kind: str
    model: Any
    train: TrainConfig

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, "model": self.model.to_dict(), "train": self.train.to_dict()}


def resolve_run_config(
    kind: str,
    config_path: Path | str | None = None,
    overrides: dict[str, dict[str, Any]] | None = None,
    geometry: dict[str, Any] | None = None,
) -> RunConfig:
    """
    Merge the three layers and validate the result.

    Args:
        kind: model kind ("zachvit" or "minimal_vit"; "minimal-vit" accepted).
        config_path: optional YAML file with model/train sections.
        overrides: values from CLI flags, by section; None values are ignored.
        geometry: augmented-manifest geometry supplying image height/width.

    Raises:
        ConfigurationError: for unknown keys or invalid values.
        GeometryError: when an explicit image size disagrees with `geometry`.
    """
    kind = normalize_kind(kind)
    layers = builtin_defaults(kind)
    if config_path is not None:
        layers = deep_merge(layers, load_yaml(config_path))
    for section, values in (overrides or {}).items():
        layers = deep_merge(layers, {section: {k: v for k, v in values.items() if v is not None}})

    model_values = dict(layers.get("model") or {})
    if geometry is not None:
        for key, geo_key in zip(GEOMETRY_KEYS, ("height", "width")):
            expected = int(geometry[geo_key])
            if key in model_values and int(model_values[key]) != expected:
                raise GeometryError(
                    f"config sets {key}={model_values[key]} but the manifest images "
                    f"have {geo_key} {expected}"
                )
            model_values[key] = expected

    train_values = dict(layers.get("train") or {})
    # YAML 1.1 reads a bare `off` as false
    if train_values.get("class_weighting") is False:
        train_values["class_weighting"] = "off"
    unknown = sorted(set(train_values) - set(TrainConfig.__dataclass_fields__))
    if unknown:
        raise ConfigurationError(f"unknown train config key(s): {', '.join(unknown)}")
    try:
        train = TrainConfig(**train_values)
    except TypeError as exc:
        raise ConfigurationError(f"invalid train config: {exc}") from exc
    resolved = RunConfig(kind=kind, model=config_from_dict(kind, model_values), train=train)
    logger.debug(f"Resolved config: {resolved.to_dict()}")
    return resolved


def shipped_config(kind: str) -> Path:
    return CONFIG_DIR / f"{normalize_kind(kind)}.yaml"
