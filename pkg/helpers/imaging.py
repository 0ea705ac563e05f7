"""
Frame preprocessing and PGM file handling.

Raw frames are 8-bit grayscale arrays. The preprocessing order is fixed:
scale to [0, 1], zero every pixel whose original value is below 93, crop to
the region of interest, keep the upper half of the crop, then bilinear
resize to the requested size.
"""

import logging
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from helpers.errors import InputError
from helpers.logging import MAIN_LOGGER_NAME

logger = logging.getLogger(MAIN_LOGGER_NAME)

INTENSITY_THRESHOLD = 93
ROI_WIDTH_FRACTION = 0.8
ROI_HEIGHT_FRACTION = 0.6

Roi = tuple[int, int, int, int]


def default_roi(height: int, width: int) -> Roi:
    """Centered 80% of the width, upper 60% of the height, as (x, y, w, h)."""
    roi_w = max(1, round(width * ROI_WIDTH_FRACTION))
    roi_h = max(1, round(height * ROI_HEIGHT_FRACTION))
    return ((width - roi_w) // 2, 0, roi_w, roi_h)


def threshold_frame(raw: np.ndarray) -> np.ndarray:
    """Zero every pixel below the intensity threshold (0-255 scale)."""
    raw = np.asarray(raw)
    return np.where(raw < INTENSITY_THRESHOLD, 0, raw).astype(raw.dtype)


def resize_bilinear(pixels: np.ndarray, height: int, width: int) -> np.ndarray:
    """Bilinear resize of a float image in [0, 1]; same-size input is returned as is."""
    pixels = np.asarray(pixels, dtype=np.float64)
    if pixels.shape == (height, width):
        return pixels.copy()
    if height <= 0 or width <= 0:
        raise InputError(f"cannot resize to {height}x{width}")
    image = Image.fromarray(pixels.astype(np.float32))
    resized = image.resize((width, height), resample=Image.Resampling.BILINEAR)
    return np.clip(np.asarray(resized, dtype=np.float64), 0.0, 1.0)


def check_roi(roi: Roi, height: int, width: int) -> Roi:
    x, y, w, h = (int(v) for v in roi)
    if w <= 0 or h <= 0 or x < 0 or y < 0 or x + w > width or y + h > height:
        raise InputError(
            f"ROI {[x, y, w, h]} does not fit inside a {height}x{width} frame"
        )
    return (x, y, w, h)


def preprocess_frame(
    raw: np.ndarray,
    roi: Roi | None = None,
    size: tuple[int, int] | None = None,
) -> np.ndarray:
    """
    Run the full preprocessing chain on one 8-bit frame.

    Args:
        raw: 8-bit grayscale frame, shape (H0, W0).
        roi: crop rectangle (x, y, w, h); defaults to `default_roi`.
        size: target (height, width); None keeps the half-height crop size.

    Returns:
        Float64 array in [0, 1].

    Raises:
        InputError: if the frame is not 2D or the ROI falls outside it.
    """
    raw = np.asarray(raw)
    if raw.ndim != 2:
        raise InputError(f"expected a 2D grayscale frame, got shape {raw.shape}")
    height, width = raw.shape
    x, y, w, h = check_roi(roi if roi is not None else default_roi(height, width), height, width)

    scaled = raw.astype(np.float64) / 255.0
    scaled[raw < INTENSITY_THRESHOLD] = 0.0
    cropped = scaled[y : y + h, x : x + w]
    upper = cropped[: max(1, h // 2)]
    if size is None:
        return upper.copy()
    return resize_bilinear(upper, *size)


def quantize(pixels: np.ndarray) -> np.ndarray:
    """[0, 1] floats to uint8, rounding half away from zero."""
    scaled = np.clip(np.asarray(pixels, dtype=np.float64), 0.0, 1.0) * 255.0
    return np.floor(scaled + 0.5).astype(np.uint8)


def read_pgm(path: Path | str) -> np.ndarray:
    path = Path(path)
    try:
        with Image.open(path) as image:
            if image.mode != "L":
                raise InputError(f"{path} is not an 8-bit grayscale PGM (mode {image.mode})")
            return np.asarray(image, dtype=np.uint8).copy()
    except FileNotFoundError as exc:
        raise InputError(f"Frame not found: {path}") from exc
    except UnidentifiedImageError as exc:
        raise InputError(f"{path} is not a readable PGM file") from exc


def write_pgm(path: Path | str, pixels: np.ndarray) -> Path:
    """Write a binary (P5) 8-bit PGM. Float input is quantized first."""
    path = Path(path)
    arr = np.asarray(pixels)
    if arr.dtype != np.uint8:
        arr = quantize(arr)
    if arr.ndim != 2:
        raise InputError(f"PGM output must be 2D, got shape {arr.shape}")
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(arr).save(path, format="PPM")
    return path


def frame_name(index: int) -> str:
    return f"{index:04d}.pgm"


def read_frames(directory: Path | str) -> list[np.ndarray]:
    """All frames of one video directory, in file-name order."""
    directory = Path(directory)
    if not directory.is_dir():
        raise InputError(f"Video directory not found: {directory}")
    files = sorted(directory.glob("*.pgm"))
    if not files:
        raise InputError(f"Video directory {directory} holds no PGM frames")
    return [read_pgm(f) for f in files]


def write_frames(directory: Path | str, frames: list[np.ndarray]) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    return [write_pgm(directory / frame_name(i), frame) for i, frame in enumerate(frames)]
