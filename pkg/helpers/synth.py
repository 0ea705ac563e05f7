"""
Synthetic lung-ultrasound-like exams.

Every frame is a dark noisy background with a bright horizontal pleural
band near the top. Class 1 adds wide, bright vertical streaks that run from
the band to the bottom of the frame. Class 0 mixes three textures: few
short irregular streaks with patchy blobs (NCIP-like), many thin short
streaks under a thickened band (ILD-like), and repeated horizontal bands
with speckle (healthy-like).

All structure is drawn inside the region the default ROI keeps after the
half-height cut, so preprocessing never crops it away. Views of one exam
share their streak layout and jitter it independently per view and frame.
"""

import logging
import math
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any

import numpy as np

from helpers.env_config import get_num_threads
from helpers.errors import ConfigurationError
from helpers.imaging import default_roi, write_frames
from helpers.logging import MAIN_LOGGER_NAME
from helpers.manifest import (
    MANIFEST_FILENAME,
    SPLITS,
    DatasetManifest,
    PatientEntry,
    ViewEntry,
)
from helpers.prng import Xoshiro256pp, fisher_yates
from helpers.ssda import VIEW_COUNT, ExamRecord, VideoClip

logger = logging.getLogger(MAIN_LOGGER_NAME)

SUB_TYPES = ("ncip", "ild", "healthy")
SPLIT_RATIO = (61, 18, 16)

BACKGROUND_LEVEL = 45.0
PLEURA_LEVEL = 205.0
BLINE_LEVEL = 235.0


@dataclass(frozen=True)
class SynthSpec:
    n_patients: int = 95
    prevalence: float = 0.295
    frames_per_video: int = 16
    frame_size: int = 112
    noise_level: float = 0.05
    class0_mix: tuple[float, float, float] = (0.4, 0.3, 0.3)
    master_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "class0_mix", tuple(float(w) for w in self.class0_mix))
        if self.n_patients <= 0:
            raise ConfigurationError(f"n_patients must be positive, got {self.n_patients}")
        if not 0.0 < self.prevalence < 1.0:
            raise ConfigurationError(f"prevalence must be in (0, 1), got {self.prevalence}")
        if self.frames_per_video <= 0:
            raise ConfigurationError("frames_per_video must be positive")
        if self.frame_size < 32:
            raise ConfigurationError(f"frame_size must be at least 32, got {self.frame_size}")
        if self.noise_level < 0:
            raise ConfigurationError(f"noise_level must be >= 0, got {self.noise_level}")
        if len(self.class0_mix) != len(SUB_TYPES) or min(self.class0_mix) < 0:
            raise ConfigurationError("class0_mix needs three non-negative weights")
        if not math.isclose(sum(self.class0_mix), 1.0, abs_tol=1e-9):
            raise ConfigurationError(
                f"class0_mix weights must sum to 1, got {sum(self.class0_mix)}"
            )

    def to_dict(self) -> dict[str, Any]:
        out = asdict(self)
        out["class0_mix"] = list(self.class0_mix)
        return out


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def largest_remainder(total: int, weights: Sequence[float]) -> list[int]:
    """
    Split `total` into integer parts proportional to `weights`.

    Floors first, then hands the leftover units to the largest fractional
    parts; ties go to the earlier part.
    """
    scale = float(sum(weights))
    quotas = [total * w / scale for w in weights]
    parts = [math.floor(q) for q in quotas]
    leftover = total - sum(parts)
    order = sorted(range(len(weights)), key=lambda i: (-(quotas[i] - parts[i]), i))
    for i in order[:leftover]:
        parts[i] += 1
    return parts


def split_counts(n_patients: int, prevalence: float) -> dict[str, tuple[int, int]]:
    """
    (positives, negatives) per split.

    Raises:
        ConfigurationError: if some split would lack a positive or a negative.
    """
    sizes = largest_remainder(n_patients, SPLIT_RATIO)
    n_pos = _round_half_up(prevalence * n_patients)
    positives = largest_remainder(n_pos, sizes) if n_pos else [0, 0, 0]
    counts = {}
    for split, size, pos in zip(SPLITS, sizes, positives):
        if pos < 1 or size - pos < 1:
            raise ConfigurationError(
                f"{n_patients} patients at prevalence {prevalence} give the {split} split "
                f"{pos} positive and {size - pos} negative patients; every split needs "
                "at least one of each"
            )
        counts[split] = (pos, size - pos)
    return counts


@dataclass(frozen=True)
class _Layout:
    """Exam-level structure shared by the four views."""

    pleura_row: float
    streak_cols: tuple[float, ...]
    blob_centers: tuple[tuple[float, float], ...]


class _FrameCanvas:
    def __init__(self, size: int):
        self.size = size
        self.rows = np.arange(size, dtype=np.float64)[:, None]
        self.cols = np.arange(size, dtype=np.float64)[None, :]
        roi_x, _, roi_w, roi_h = default_roi(size, size)
        self.left = roi_x + 2
        self.right = roi_x + roi_w - 3
        self.depth = roi_h // 2

    def band(self, center: float, thickness: float) -> np.ndarray:
        return (np.abs(self.rows - center) <= thickness / 2.0) & self._inside_cols()

    def streak(self, col: float, width: float, top: float, bottom: float) -> np.ndarray:
        vertical = (self.rows >= top) & (self.rows < bottom)
        return vertical & (np.abs(self.cols - col) <= width / 2.0)

    def blob(self, row: float, col: float, radius: float) -> np.ndarray:
        return (self.rows - row) ** 2 + (self.cols - col) ** 2 <= radius**2

    def _inside_cols(self) -> np.ndarray:
        return (self.cols >= self.left) & (self.cols <= self.right)


def _exam_layout(
    label: int, sub_type: str | None, canvas: _FrameCanvas, stream: Xoshiro256pp
) -> _Layout:
    unit = canvas.size / 112.0
    pleura = (6.0 + 3.0 * stream.random()) * unit
    span = canvas.right - canvas.left
    if label == 1:
        n_streaks = 4 + stream.below(3)
    elif sub_type == "ild":
        n_streaks = 9 + stream.below(4)
    elif sub_type == "ncip":
        n_streaks = 1 + stream.below(2)
    else:
        n_streaks = 0
    cols = tuple(
        canvas.left + span * (i + 0.2 + 0.6 * stream.random()) / n_streaks
        for i in range(n_streaks)
    )
    blobs = ()
    if sub_type == "ncip":
        blobs = tuple(
            (
                pleura + (4.0 + 12.0 * stream.random()) * unit,
                canvas.left + span * stream.random(),
            )
            for _ in range(3 + stream.below(3))
        )
    return _Layout(pleura_row=pleura, streak_cols=cols, blob_centers=blobs)


def _render_frame(
    label: int,
    sub_type: str | None,
    layout: _Layout,
    canvas: _FrameCanvas,
    noise_level: float,
    stream: Xoshiro256pp,
) -> np.ndarray:
    unit = canvas.size / 112.0
    frame = np.full((canvas.size, canvas.size), BACKGROUND_LEVEL)
    pleura = layout.pleura_row + (stream.random() - 0.5) * unit
    thickness = (5.0 if sub_type == "ild" else 2.0) * unit
    frame[canvas.band(pleura, thickness)] = PLEURA_LEVEL

    bottom = canvas.depth + 2.0 * unit
    for col in layout.streak_cols:
        jitter = (stream.random() - 0.5) * 4.0 * unit
        if label == 1:
            mask = canvas.streak(col + jitter, 7.0 * unit, pleura, bottom)
            frame[mask] = BLINE_LEVEL
        elif sub_type == "ild":
            length = (6.0 + 6.0 * stream.random()) * unit
            frame[canvas.streak(col + jitter, 1.0, pleura, pleura + length)] = 150.0
        else:
            length = (5.0 + 8.0 * stream.random()) * unit
            frame[canvas.streak(col + jitter, 3.0 * unit, pleura, pleura + length)] = 170.0

    for row, col in layout.blob_centers:
        radius = (2.5 + 2.0 * stream.random()) * unit
        frame[canvas.blob(row, col + (stream.random() - 0.5) * 3.0 * unit, radius)] = 180.0

    if sub_type == "healthy":
        spacing = max(pleura, 4.0 * unit)
        echo = pleura + spacing
        level = 175.0
        while echo < bottom:
            frame[canvas.band(echo, 2.0 * unit)] = level
            echo += spacing
            level *= 0.85
        speckle = (stream.random_array(frame.shape) < 0.04) & (canvas.rows > pleura)
        frame[speckle] = 105.0

    if noise_level > 0:
        frame = frame + stream.standard_normal(frame.shape) * (noise_level * 255.0)
    return np.clip(np.rint(frame), 0, 255).astype(np.uint8)


def generate_exam(
    label: int,
    sub_type: str | None = None,
    seed: int = 0,
    patient_id: str = "synthetic",
    frame_size: int = 112,
    frames_per_video: int = 16,
    noise_level: float = 0.05,
) -> ExamRecord:
    """
    Build one four-view exam; the result is a pure function of the arguments.

    Raises:
        ConfigurationError: if the label is not binary or a sub-type is given
            for class 1 (or missing or unknown for class 0).
    """
    if label not in (0, 1):
        raise ConfigurationError(f"label must be 0 or 1, got {label}")
    if label == 1 and sub_type is not None:
        raise ConfigurationError("sub_type only applies to class 0 exams")
    if label == 0 and sub_type not in SUB_TYPES:
        raise ConfigurationError(
            f"class 0 exams need sub_type in {', '.join(SUB_TYPES)}, got {sub_type!r}"
        )
    canvas = _FrameCanvas(frame_size)
    stream = Xoshiro256pp.from_key(seed, "exam")
    layout = _exam_layout(label, sub_type, canvas, stream)
    roi = default_roi(frame_size, frame_size)
    views = []
    for view_index in range(1, VIEW_COUNT + 1):
        view_stream = stream.fork("view", view_index)
        shift = (view_stream.random() - 0.5) * 6.0 * canvas.size / 112.0
        view_layout = _Layout(
            pleura_row=layout.pleura_row,
            streak_cols=tuple(c + shift for c in layout.streak_cols),
            blob_centers=tuple((r, c + shift) for r, c in layout.blob_centers),
        )
        frames = tuple(
            _render_frame(label, sub_type, view_layout, canvas, noise_level, view_stream)
            for _ in range(frames_per_video)
        )
        views.append(VideoClip(frames=frames, view_index=view_index, roi=roi))
    return ExamRecord(patient_id=patient_id, views=tuple(views), label=label)


def _pick_sub_type(weights: Sequence[float], stream: Xoshiro256pp) -> str:
    u = stream.random()
    acc = 0.0
    for name, weight in zip(SUB_TYPES, weights):
        acc += weight
        if u < acc:
            return name
    return SUB_TYPES[-1]


def plan_patients(spec: SynthSpec) -> list[PatientEntry]:
    """Patient ids, splits, labels and sub-types, without any pixels."""
    counts = split_counts(spec.n_patients, spec.prevalence)
    slots = [
        (split, label)
        for split in SPLITS
        for label, n in ((1, counts[split][0]), (0, counts[split][1]))
        for _ in range(n)
    ]
    slots = fisher_yates(slots, Xoshiro256pp.from_key(spec.master_seed, "assign"))
    width = max(4, len(str(spec.n_patients)))
    roi = default_roi(spec.frame_size, spec.frame_size)
    patients = []
    for index, (split, label) in enumerate(slots):
        patient_id = f"p{index:0{width}d}"
        sub_type = None
        if label == 0:
            stream = Xoshiro256pp.from_key(spec.master_seed, "subtype", index)
            sub_type = _pick_sub_type(spec.class0_mix, stream)
        views = tuple(
            ViewEntry(dir=f"videos/{patient_id}/view{v}", view_index=v, roi=roi)
            for v in range(1, VIEW_COUNT + 1)
        )
        patients.append(PatientEntry(patient_id, label, split, views, sub_type))
    return patients


def _write_patient(spec: SynthSpec, index: int, patient: PatientEntry, out_dir: Path) -> None:
    exam = generate_exam(
        patient.label,
        patient.sub_type,
        seed=Xoshiro256pp.from_key(spec.master_seed, "patient", index).next_u64(),
        patient_id=patient.patient_id,
        frame_size=spec.frame_size,
        frames_per_video=spec.frames_per_video,
        noise_level=spec.noise_level,
    )
    for entry, clip in zip(patient.views, exam.views):
        write_frames(out_dir / entry.dir, list(clip.frames))


def generate_dataset(
    spec: SynthSpec, out_dir: Path | str, threads: int | None = None
) -> DatasetManifest:
    """Write every patient's frames under `out_dir` plus `manifest.json`."""
    out_dir = Path(out_dir)
    patients = plan_patients(spec)
    threads = threads or get_num_threads()
    out_dir.mkdir(parents=True, exist_ok=True)
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        list(
            pool.map(
                lambda item: _write_patient(spec, item[0], item[1], out_dir),
                enumerate(patients),
            )
        )
    manifest = DatasetManifest(patients=patients, root=out_dir, meta={"synth": spec.to_dict()})
    manifest.save(out_dir / MANIFEST_FILENAME)
    summary = {split: len(manifest.by_split(split)) for split in SPLITS}
    logger.info(
        f"Generated {spec.n_patients} synthetic patients at {out_dir} "
        f"(train/val/test = {summary['train']}/{summary['val']}/{summary['test']}, "
        f"{sum(p.label for p in patients)} positive)"
    )
    return manifest
