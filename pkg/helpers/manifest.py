"""
Dataset and augmented-dataset manifests (JSON).

A dataset manifest lists patients with their label, split and the four
probe-view video directories (paths relative to the manifest). An augmented
manifest lists the stride images produced from one, each with the
provenance needed to regenerate it, plus the image geometry.
"""

import hashlib
import json
import logging
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from helpers.errors import EmptyInputError, InputError
from helpers.imaging import Roi, read_pgm
from helpers.logging import MAIN_LOGGER_NAME

logger = logging.getLogger(MAIN_LOGGER_NAME)

SPLITS = ("train", "val", "test")
MANIFEST_VERSION = 1
MANIFEST_FILENAME = "manifest.json"


def sha256_file(path: Path | str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_json_atomic(path: Path | str, payload: dict[str, Any]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    os.replace(tmp, path)
    return path


def _read_json(path: Path, kind: str) -> dict[str, Any]:
    if not path.is_file():
        raise InputError(f"Manifest not found: {path}")
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InputError(f"{path} is not valid JSON: {exc}") from exc
    if payload.get("kind") != kind:
        raise InputError(
            f"{path} is a {payload.get('kind', 'unknown')!r} manifest, expected {kind!r}"
        )
    return payload


@dataclass(frozen=True)
class ViewEntry:
    dir: str
    view_index: int
    roi: Roi | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "dir": self.dir,
            "view_index": self.view_index,
            "roi": list(self.roi) if self.roi is not None else None,
        }


@dataclass(frozen=True)
class PatientEntry:
    patient_id: str
    label: int
    split: str
    views: tuple[ViewEntry, ...]
    sub_type: str | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "patient_id": self.patient_id,
            "label": self.label,
            "split": self.split,
            "sub_type": self.sub_type,
            "views": [view.to_dict() for view in self.views],
        }


def _parse_patient(raw: dict[str, Any], source: Path) -> PatientEntry:
    try:
        patient = PatientEntry(
            patient_id=str(raw["patient_id"]),
            label=int(raw["label"]),
            split=str(raw["split"]),
            sub_type=raw.get("sub_type"),
            views=tuple(
                ViewEntry(
                    dir=str(view["dir"]),
                    view_index=int(view["view_index"]),
                    roi=tuple(view["roi"]) if view.get("roi") is not None else None,
                )
                for view in raw["views"]
            ),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"{source}: malformed patient entry {raw!r} ({exc})") from exc
    if patient.label not in (0, 1):
        raise InputError(f"{source}: patient {patient.patient_id} has label {patient.label}")
    if patient.split not in SPLITS:
        raise InputError(f"{source}: patient {patient.patient_id} has split {patient.split!r}")
    if sorted(v.view_index for v in patient.views) != [1, 2, 3, 4]:
        raise InputError(
            f"{source}: patient {patient.patient_id} must list views 1 to 4 exactly once"
        )
    return patient


@dataclass
class DatasetManifest:
    patients: list[PatientEntry]
    root: Path = field(default_factory=Path)
    meta: dict[str, Any] = field(default_factory=dict)

    def by_split(self, split: str) -> list[PatientEntry]:
        return [p for p in self.patients if p.split == split]

    def view_path(self, view: ViewEntry) -> Path:
        return self.root / view.dir

    @classmethod
    def load(cls, path: Path | str) -> "DatasetManifest":
        path = Path(path)
        payload = _read_json(path, "dataset")
        patients = [_parse_patient(raw, path) for raw in payload.get("patients", [])]
        seen: dict[str, str] = {}
        for patient in patients:
            if patient.patient_id in seen:
                raise InputError(
                    f"{path}: patient {patient.patient_id} appears more than once"
                )
            seen[patient.patient_id] = patient.split
        return cls(patients=patients, root=path.parent, meta=payload.get("meta", {}))

    def save(self, path: Path | str) -> Path:
        payload = {
            "kind": "dataset",
            "version": MANIFEST_VERSION,
            "meta": self.meta,
            "patients": [p.to_dict() for p in self.patients],
        }
        return write_json_atomic(path, payload)


@dataclass(frozen=True)
class ImageEntry:
    path: str
    label: int
    split: str
    source_patient: str
    regime: str
    permutation: tuple[int, ...] | None
    seed: int | None
    view_index: int | None = None

    def to_dict(self) -> dict[str, Any]:
        out = asdict(self)
        out["permutation"] = list(self.permutation) if self.permutation else None
        return out


@dataclass
class AugmentedManifest:
    images: list[ImageEntry]
    geometry: dict[str, Any]
    regime: str
    source: dict[str, Any] = field(default_factory=dict)
    root: Path = field(default_factory=Path)

    @property
    def image_size(self) -> tuple[int, int]:
        return int(self.geometry["height"]), int(self.geometry["width"])

    def split(self, split: str) -> list[ImageEntry]:
        return [entry for entry in self.images if entry.split == split]

    def load_split(self, split: str) -> tuple[np.ndarray, np.ndarray, list[str]]:
        """Raw 8-bit images [n, H, W], labels [n] and source patient ids."""
        entries = self.split(split)
        if not entries:
            raise EmptyInputError(f"augmented manifest has no {split} images")
        height, width = self.image_size
        images = np.empty((len(entries), height, width), dtype=np.uint8)
        for i, entry in enumerate(entries):
            pixels = read_pgm(self.root / entry.path)
            if pixels.shape != (height, width):
                raise InputError(
                    f"{entry.path} is {pixels.shape[0]}x{pixels.shape[1]}, "
                    f"manifest geometry is {height}x{width}"
                )
            images[i] = pixels
        labels = np.array([entry.label for entry in entries], dtype=np.int64)
        logger.debug(f"Loaded {len(entries)} {split} images from {self.root}")
        return images, labels, [entry.source_patient for entry in entries]

    @classmethod
    def load(cls, path: Path | str) -> "AugmentedManifest":
        path = Path(path)
        payload = _read_json(path, "augmented")
        try:
            images = [
                ImageEntry(
                    path=str(raw["path"]),
                    label=int(raw["label"]),
                    split=str(raw["split"]),
                    source_patient=str(raw["source_patient"]),
                    regime=str(raw["regime"]),
                    permutation=tuple(raw["permutation"]) if raw.get("permutation") else None,
                    seed=raw.get("seed"),
                    view_index=raw.get("view_index"),
                )
                for raw in payload["images"]
            ]
            geometry = dict(payload["geometry"])
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"{path}: malformed augmented manifest ({exc})") from exc
        return cls(
            images=images,
            geometry=geometry,
            regime=str(payload.get("regime", "")),
            source=payload.get("source", {}),
            root=path.parent,
        )

    def save(self, path: Path | str) -> Path:
        payload = {
            "kind": "augmented",
            "version": MANIFEST_VERSION,
            "regime": self.regime,
            "geometry": self.geometry,
            "source": self.source,
            "images": [entry.to_dict() for entry in self.images],
        }
        return write_json_atomic(path, payload)
