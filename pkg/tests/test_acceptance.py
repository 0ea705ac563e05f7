"""
End-to-end learning and reproducibility on the default synthetic cohort.

These runs take minutes on a laptop CPU; select them with `pytest -m slow`.
"""

import pytest

from helpers.manifest import MANIFEST_FILENAME, AugmentedManifest
from helpers.ssda import RegimeSpec, StrideGeometry, expand_dataset
from helpers.synth import SynthSpec, generate_dataset
from helpers.training import TrainConfig, train

pytestmark = pytest.mark.slow

OUTPUT_FILES = ("best.ckpt", "peak.ckpt", "last.ckpt", "curves.csv", "report.json")


@pytest.fixture(scope="module")
def augmented(tmp_path_factory) -> AugmentedManifest:
    root = tmp_path_factory.mktemp("acceptance")
    generate_dataset(SynthSpec(), root / "synth", threads=1)
    return expand_dataset(
        root / "synth" / MANIFEST_FILENAME,
        RegimeSpec.parse("0_2-SSDA"),
        root / "ssda",
        StrideGeometry.for_image(112),
        threads=1,
    )


@pytest.fixture(scope="module")
def runs(augmented, tmp_path_factory):
    out = tmp_path_factory.mktemp("runs")
    first = train("zachvit", augmented, TrainConfig(), out / "first", threads=1)
    second = train("zachvit", augmented, TrainConfig(), out / "second", threads=1)
    return (first, out / "first"), (second, out / "second")


def test_split_sizes(augmented):
    counts = {s: len(augmented.split(s)) for s in ("train", "val", "test")}
    assert counts == {"train": 61 * 48, "val": 18, "test": 16}


def test_zachvit_learns_the_synthetic_task(runs):
    (result, _), _ = runs
    assert max(r.val_auc for r in result.history if r.val_auc is not None) >= 0.95
    assert result.reports["peak_test"].roc_auc >= 0.90
    assert len(result.history) <= 23


def test_identical_seeds_give_identical_files(runs):
    (_, first), (_, second) = runs
    for name in OUTPUT_FILES:
        assert (first / name).read_bytes() == (second / name).read_bytes(), name
