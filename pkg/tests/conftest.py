from pathlib import Path

import pytest

import helpers.env_config  # noqa: F401
from helpers.manifest import MANIFEST_FILENAME
from helpers.ssda import RegimeSpec, StrideGeometry, expand_dataset
from helpers.synth import SynthSpec, generate_dataset

# 20 patients is the smallest cohort that keeps both classes in every split
SMALL_SPEC = SynthSpec(
    n_patients=20, frames_per_video=3, frame_size=32, noise_level=0.05, master_seed=1
)


@pytest.fixture(scope="session")
def small_dataset(tmp_path_factory) -> Path:
    """Manifest path of a small synthetic dataset with 32x32 frames."""
    root = tmp_path_factory.mktemp("synth")
    generate_dataset(SMALL_SPEC, root, threads=1)
    return root / MANIFEST_FILENAME


@pytest.fixture(scope="session")
def small_vis_dataset(tmp_path_factory, small_dataset) -> Path:
    """Augmented manifest path: one 32x32 stride image per exam."""
    out = tmp_path_factory.mktemp("vis") / "augmented"
    expand_dataset(
        small_dataset, RegimeSpec("VIS"), out, StrideGeometry.for_image(32), threads=1
    )
    return out / MANIFEST_FILENAME
