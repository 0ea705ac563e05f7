"""
Video-to-image transformations and ShuffleStrides augmentation.

- VI: one view's frames concatenated left to right in temporal order.
- SVI: the same after a seeded Fisher-Yates shuffle of the frames.
- VIS: the four views rendered as horizontal bands and stacked top to
  bottom in a given view order.
- SSDA: all 24 view orders of the exam, then for every prime seed all 24
  orders again with every view's frames shuffled by that seed.

Frames are preprocessed (threshold, ROI crop, upper half) and concatenated
at their native size; the strip is resized once to the target band size.
"""

import itertools
import logging
import re
import shutil
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal

import numpy as np

from helpers.env_config import get_num_threads
from helpers.errors import ConfigurationError, GeometryError, InputError, MissingFilesError
from helpers.imaging import Roi, preprocess_frame, read_frames, resize_bilinear, write_pgm
from helpers.logging import MAIN_LOGGER_NAME
from helpers.manifest import (
    MANIFEST_FILENAME,
    AugmentedManifest,
    DatasetManifest,
    ImageEntry,
    PatientEntry,
    sha256_file,
)
from helpers.prng import shuffle_with_seed

logger = logging.getLogger(MAIN_LOGGER_NAME)

PRIME_SEEDS = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29)
VIEW_COUNT = 4
CANONICAL_ORDER = (1, 2, 3, 4)
VIEW_ORDERS: tuple[tuple[int, ...], ...] = tuple(itertools.permutations(CANONICAL_ORDER))

RegimeMode = Literal["VI", "SVI", "VIS", "SSDA"]


@dataclass(frozen=True)
class VideoClip:
    frames: tuple[np.ndarray, ...]
    view_index: int
    fps: float = 30.0
    roi: Roi | None = None

    def __post_init__(self):
        if not self.frames:
            raise InputError(f"view {self.view_index} has no frames")
        shape = self.frames[0].shape
        if any(frame.shape != shape for frame in self.frames):
            raise InputError(f"view {self.view_index} mixes frame sizes")
        if not 1 <= self.view_index <= VIEW_COUNT:
            raise InputError(f"view_index must be in 1..4, got {self.view_index}")
        object.__setattr__(self, "frames", tuple(self.frames))

    def reordered(self, order: Sequence[int]) -> "VideoClip":
        return VideoClip(
            frames=tuple(self.frames[i] for i in order),
            view_index=self.view_index,
            fps=self.fps,
            roi=self.roi,
        )


@dataclass(frozen=True)
class ExamRecord:
    patient_id: str
    views: tuple[VideoClip, ...]
    label: int

    def __post_init__(self):
        if self.label not in (0, 1):
            raise InputError(f"exam {self.patient_id}: label must be 0 or 1, got {self.label}")
        indices = sorted(view.view_index for view in self.views)
        if indices != list(CANONICAL_ORDER):
            raise InputError(
                f"exam {self.patient_id} needs views 1 to 4 exactly once, got {indices}"
            )
        ordered = tuple(sorted(self.views, key=lambda v: v.view_index))
        object.__setattr__(self, "views", ordered)

    def view(self, view_index: int) -> VideoClip:
        return self.views[view_index - 1]


@dataclass(frozen=True)
class Provenance:
    patient_id: str
    regime: str
    permutation: tuple[int, ...] | None
    seed: int | None
    view_index: int | None = None


@dataclass(frozen=True)
class StrideImage:
    pixels: np.ndarray
    provenance: Provenance
    label: int | None = None


@dataclass(frozen=True)
class RegimeSpec:
    mode: RegimeMode = "SSDA"
    seed_set: tuple[int, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "seed_set", tuple(int(s) for s in self.seed_set))
        if self.mode not in ("VI", "SVI", "VIS", "SSDA"):
            raise ConfigurationError(f"unknown regime mode {self.mode!r}")
        for seed in self.seed_set:
            check_seed(seed)
        if len(set(self.seed_set)) != len(self.seed_set):
            raise ConfigurationError(f"duplicate seeds in {list(self.seed_set)}")
        if self.mode in ("VI", "VIS") and self.seed_set:
            raise ConfigurationError(f"{self.mode} takes no shuffle seeds")
        if self.mode == "SVI" and not self.seed_set:
            raise ConfigurationError("SVI needs at least one shuffle seed")

    @classmethod
    def parse(cls, text: str) -> "RegimeSpec":
        """
        Accepts `vis`, `vi`, `svi:2,3`, `ssda0`, `ssda:2,3,...` and the
        tag forms `0-SSDA`, `0_2-SSDA`, `0_2_3-SSDA`, ... and `SSDA10`.
        """
        raw = text.strip()
        lowered = raw.lower()
        if lowered == "vis":
            return cls("VIS")
        if lowered == "vi":
            return cls("VI")
        if lowered in ("ssda0", "0-ssda"):
            return cls("SSDA")
        if lowered == "ssda10":
            return cls("SSDA", PRIME_SEEDS)
        for prefix, mode in (("ssda:", "SSDA"), ("svi:", "SVI")):
            if lowered.startswith(prefix):
                return cls(mode, _parse_seed_list(raw[len(prefix) :].split(","), raw))
        match = re.fullmatch(r"0((?:_\d+)+)-ssda", lowered)
        if match:
            return cls("SSDA", _parse_seed_list(match.group(1).strip("_").split("_"), raw))
        raise ConfigurationError(
            f"unknown regime {text!r}; use vis, vi, svi:S,..., ssda0, ssda:S,..., "
            "a tag like 0_2-SSDA, or SSDA10"
        )

    @property
    def tag(self) -> str:
        if self.mode == "VIS":
            return "VIS"
        if self.mode == "VI":
            return "VI"
        if self.mode == "SVI":
            return "SVI:" + ",".join(str(s) for s in self.seed_set)
        if self.seed_set == PRIME_SEEDS:
            return "SSDA10"
        return "_".join(["0", *(str(s) for s in self.seed_set)]) + "-SSDA"

    @property
    def images_per_exam(self) -> int:
        if self.mode == "VIS":
            return 1
        if self.mode == "VI":
            return VIEW_COUNT
        if self.mode == "SVI":
            return VIEW_COUNT * len(self.seed_set)
        return len(VIEW_ORDERS) * (1 + len(self.seed_set))


def _parse_seed_list(parts: Sequence[str], source: str) -> tuple[int, ...]:
    try:
        return tuple(int(p) for p in parts if p.strip())
    except ValueError as exc:
        raise ConfigurationError(f"regime {source!r} has a non-integer seed") from exc


def check_seed(seed: int) -> int:
    if seed not in PRIME_SEEDS:
        raise ConfigurationError(
            f"shuffle seed {seed} is not one of the primes {list(PRIME_SEEDS)}"
        )
    return seed


@dataclass(frozen=True)
class StrideGeometry:
    """Band layout of a stride image; height is always four bands."""

    width: int
    band_height: int
    aligned: bool = False
    patch_size: int = 16

    @classmethod
    def for_image(cls, image_size: int = 112, patch_size: int = 16, aligned: bool = False):
        """
        Unaligned, a square image splits into four bands of image_size / 4
        rows. Aligned mode rounds the band up to whole patch rows, making
        the image taller than wide (224 -> 4 x 64 = 256).
        """
        if image_size % VIEW_COUNT:
            raise GeometryError(f"image size {image_size} does not split into four bands")
        if image_size % patch_size:
            raise GeometryError(
                f"image size {image_size} is not a multiple of patch size {patch_size}"
            )
        band = image_size // VIEW_COUNT
        if aligned:
            band = -(-band // patch_size) * patch_size
        return cls(width=image_size, band_height=band, aligned=aligned, patch_size=patch_size)

    @property
    def height(self) -> int:
        return self.band_height * VIEW_COUNT

    def to_dict(self) -> dict:
        return {
            "height": self.height,
            "width": self.width,
            "band_height": self.band_height,
            "aligned": self.aligned,
            "patch_size": self.patch_size,
        }


def render_strip(clip: VideoClip, size: tuple[int, int] | None = None) -> np.ndarray:
    """Preprocess every frame, concatenate left to right, optionally resize once."""
    strip = np.concatenate([preprocess_frame(frame, clip.roi) for frame in clip.frames], axis=1)
    if size is None:
        return strip
    return resize_bilinear(strip, *size)


def shuffle_frames(clip: VideoClip, seed: int) -> VideoClip:
    check_seed(seed)
    return clip.reordered(shuffle_with_seed(range(len(clip.frames)), seed))


def video_to_vi(
    clip: VideoClip, size: tuple[int, int] | None = None, patient_id: str = ""
) -> StrideImage:
    return StrideImage(
        pixels=render_strip(clip, size),
        provenance=Provenance(patient_id, "VI", None, None, clip.view_index),
    )


def video_to_svi(
    clip: VideoClip, seed: int, size: tuple[int, int] | None = None, patient_id: str = ""
) -> StrideImage:
    shuffled = shuffle_frames(clip, seed)
    return StrideImage(
        pixels=render_strip(shuffled, size),
        provenance=Provenance(patient_id, "SVI", None, seed, clip.view_index),
    )


def check_order(order: Sequence[int]) -> tuple[int, ...]:
    order = tuple(int(v) for v in order)
    if sorted(order) != list(CANONICAL_ORDER):
        raise InputError(f"view order must be a permutation of [1, 2, 3, 4], got {list(order)}")
    return order


def _render_bands(
    exam: ExamRecord, geometry: StrideGeometry, seed: int | None
) -> dict[int, np.ndarray]:
    size = (geometry.band_height, geometry.width)
    bands = {}
    for clip in exam.views:
        source = shuffle_frames(clip, seed) if seed is not None else clip
        bands[clip.view_index] = render_strip(source, size)
    return bands


def _stack(bands: dict[int, np.ndarray], order: tuple[int, ...]) -> np.ndarray:
    return np.concatenate([bands[v] for v in order], axis=0)


def exam_to_vis(
    exam: ExamRecord,
    order: Sequence[int] = CANONICAL_ORDER,
    geometry: StrideGeometry | None = None,
    seed: int | None = None,
) -> StrideImage:
    order = check_order(order)
    geometry = geometry or StrideGeometry.for_image()
    bands = _render_bands(exam, geometry, seed)
    return StrideImage(
        pixels=_stack(bands, order),
        provenance=Provenance(exam.patient_id, "VIS", order, seed),
        label=exam.label,
    )


def ssda_expand(
    exam: ExamRecord,
    regime: RegimeSpec,
    geometry: StrideGeometry | None = None,
) -> list[StrideImage]:
    """
    Every image a regime produces for one exam, in a fixed order.

    SSDA output is ordered by seed position (unshuffled first, then each
    seed in the order given) and within that by lexicographic view order.
    VI and SVI emit one full-size image per view.
    """
    geometry = geometry or StrideGeometry.for_image()
    tag = regime.tag
    if regime.mode == "VIS":
        image = exam_to_vis(exam, CANONICAL_ORDER, geometry)
        provenance = Provenance(exam.patient_id, tag, CANONICAL_ORDER, None)
        return [StrideImage(image.pixels, provenance, exam.label)]
    if regime.mode in ("VI", "SVI"):
        size = (geometry.height, geometry.width)
        seeds: tuple[int | None, ...] = regime.seed_set if regime.mode == "SVI" else (None,)
        out = []
        for seed in seeds:
            for clip in exam.views:
                source = shuffle_frames(clip, seed) if seed is not None else clip
                out.append(
                    StrideImage(
                        render_strip(source, size),
                        Provenance(exam.patient_id, tag, None, seed, clip.view_index),
                        exam.label,
                    )
                )
        return out

    out = []
    for seed in (None, *regime.seed_set):
        bands = _render_bands(exam, geometry, seed)
        for order in VIEW_ORDERS:
            out.append(
                StrideImage(
                    _stack(bands, order),
                    Provenance(exam.patient_id, tag, order, seed),
                    exam.label,
                )
            )
    return out


def load_exam(manifest: DatasetManifest, patient: PatientEntry) -> ExamRecord:
    views = tuple(
        VideoClip(
            frames=tuple(read_frames(manifest.view_path(view))),
            view_index=view.view_index,
            roi=view.roi,
        )
        for view in patient.views
    )
    return ExamRecord(patient_id=patient.patient_id, views=views, label=patient.label)


def missing_inputs(manifest: DatasetManifest) -> list[str]:
    missing = []
    for patient in manifest.patients:
        for view in patient.views:
            path = manifest.view_path(view)
            if not path.is_dir() or not any(path.glob("*.pgm")):
                missing.append(str(path))
    return missing


def _image_name(image: StrideImage) -> str:
    prov = image.provenance
    seed = f"s{prov.seed}" if prov.seed is not None else "s0"
    if prov.permutation is not None:
        return f"{seed}_o{''.join(str(v) for v in prov.permutation)}.pgm"
    return f"{seed}_v{prov.view_index}.pgm"


def _expand_patient(
    manifest: DatasetManifest,
    patient: PatientEntry,
    regime: RegimeSpec,
    geometry: StrideGeometry,
    staging: Path,
) -> list[ImageEntry]:
    exam = load_exam(manifest, patient)
    active = regime if patient.split == "train" else RegimeSpec("VIS")
    entries = []
    for image in ssda_expand(exam, active, geometry):
        rel = Path("images") / patient.split / patient.patient_id / _image_name(image)
        write_pgm(staging / rel, image.pixels)
        prov = image.provenance
        entries.append(
            ImageEntry(
                path=rel.as_posix(),
                label=patient.label,
                split=patient.split,
                source_patient=patient.patient_id,
                regime=prov.regime,
                permutation=prov.permutation,
                seed=prov.seed,
                view_index=prov.view_index,
            )
        )
    return entries


def _check_output(output_dir: Path) -> None:
    """Accept a missing or empty directory, or a previous augmented output."""
    if not output_dir.exists():
        return
    if not output_dir.is_dir():
        raise ConfigurationError(f"output path {output_dir} exists and is not a directory")
    if not any(output_dir.iterdir()) or (output_dir / MANIFEST_FILENAME).is_file():
        return
    raise ConfigurationError(
        f"output directory {output_dir} is not empty and holds no augmented manifest"
    )


def expand_dataset(
    manifest_path: Path | str,
    regime: RegimeSpec,
    output_dir: Path | str,
    geometry: StrideGeometry | None = None,
    threads: int | None = None,
) -> AugmentedManifest:
    """
    Materialise a regime over a dataset.

    Training exams get the full regime; validation and test exams get the
    single canonical stride image. Work is built in a staging directory
    that replaces `output_dir` only once everything is written.

    Raises:
        MissingFilesError: listing every missing or empty view directory.
    """
    manifest_path = Path(manifest_path)
    output_dir = Path(output_dir)
    geometry = geometry or StrideGeometry.for_image()
    threads = threads or get_num_threads()
    manifest = DatasetManifest.load(manifest_path)

    missing = missing_inputs(manifest)
    if missing:
        logger.error(f"{len(missing)} view directories are missing or empty")
        raise MissingFilesError(missing)

    _check_output(output_dir)
    staging = output_dir.with_name(output_dir.name + ".partial")
    if staging.exists():
        shutil.rmtree(staging)
    staging.mkdir(parents=True)
    try:
        with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
            per_patient = list(
                pool.map(
                    lambda p: _expand_patient(manifest, p, regime, geometry, staging),
                    manifest.patients,
                )
            )
        entries = [entry for batch in per_patient for entry in batch]
        augmented = AugmentedManifest(
            images=entries,
            geometry=geometry.to_dict(),
            regime=regime.tag,
            source={"path": str(manifest_path), "sha256": sha256_file(manifest_path)},
            root=output_dir,
        )
        augmented.save(staging / MANIFEST_FILENAME)
        if output_dir.exists():
            shutil.rmtree(output_dir)
        staging.rename(output_dir)
    except BaseException:
        shutil.rmtree(staging, ignore_errors=True)
        raise
    logger.info(
        f"Expanded {len(manifest.patients)} exams into {len(entries)} images "
        f"({regime.tag}, {geometry.height}x{geometry.width}) at {output_dir}"
    )
    return augmented
