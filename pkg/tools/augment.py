import argparse
import logging
from collections import Counter

from helpers.logging import MAIN_LOGGER_NAME, log_command
from helpers.manifest import SPLITS
from helpers.run_manifest import RunRecorder, render_config
from helpers.ssda import RegimeSpec, StrideGeometry, expand_dataset

logger = logging.getLogger(MAIN_LOGGER_NAME)


def register_augment_command(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser(
        "augment",
        help="Expand a dataset into stride images under an augmentation regime",
        description=(
            "Training exams get every image of the regime; validation and "
            "test exams get one canonical stride image each."
        ),
    )
    parser.add_argument("--manifest", required=True, help="Dataset manifest.json")
    parser.add_argument("--out", required=True, help="Output directory")
    parser.add_argument(
        "--regime",
        default="ssda0",
        help="vis, vi, svi:S,..., ssda0, ssda:S,..., 0_2-SSDA style tags or SSDA10",
    )
    parser.add_argument(
        "--aligned",
        action="store_true",
        help="Round each view band up to whole patch rows",
    )
    parser.add_argument("--size", type=int, default=112, help="Stride image width")
    parser.add_argument("--patch", type=int, default=16, help="Model patch size")
    parser.add_argument("--threads", type=int, default=None, help="Worker threads")
    parser.add_argument("--dry-run", action="store_true", help="Print the config and exit")

    @log_command
    def augment(
        manifest: str,
        out: str,
        regime: str = "ssda0",
        aligned: bool = False,
        size: int = 112,
        patch: int = 16,
        threads: int | None = None,
        dry_run: bool = False,
    ) -> str:
        """Materialise the regime's stride images and an augmented manifest."""
        spec = RegimeSpec.parse(regime)
        geometry = StrideGeometry.for_image(size, patch_size=patch, aligned=aligned)
        config = {
            "regime": spec.tag,
            "seed_set": list(spec.seed_set),
            "geometry": geometry.to_dict(),
            "manifest": manifest,
        }
        if dry_run:
            return render_config(config)

        recorder = RunRecorder("augment", config)
        augmented = expand_dataset(manifest, spec, out, geometry=geometry, threads=threads)
        recorder.finish(out, inputs=[manifest], outputs=[out])

        counts = Counter(entry.split for entry in augmented.images)
        return "\n".join(
            [
                f"Augmented dataset: {out}",
                f"Regime: {spec.tag} ({spec.images_per_exam} images per training exam)",
                f"Geometry: {geometry.height}x{geometry.width}",
                *(f"  {split}: {counts.get(split, 0)} images" for split in SPLITS),
            ]
        )

    parser.set_defaults(handler=augment)
