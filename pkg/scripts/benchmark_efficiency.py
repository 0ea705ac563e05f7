"""
Inference timing and parameter counts for ZACH-ViT and the Minimal ViT.

Usage:
    python scripts/benchmark_efficiency.py [batch_size] [repeats]

Example:
    python scripts/benchmark_efficiency.py 8 5

Numbers depend on the machine; nothing here is asserted.
"""

import logging
import sys
import time

import numpy as np

from helpers.logging import MAIN_LOGGER_NAME
from helpers.model import MinimalVit, MinimalVitConfig, ZachVit, ZachVitConfig, param_count
from helpers.prng import Xoshiro256pp

logger = logging.getLogger(MAIN_LOGGER_NAME)


def time_forward(model, images: np.ndarray, repeats: int) -> float:
    """Median milliseconds of one eval-mode forward pass over the batch."""
    model.forward(images[:1])
    timings = []
    for _ in range(repeats):
        started = time.perf_counter()
        model.forward(images)
        timings.append((time.perf_counter() - started) * 1000.0)
    return float(np.median(timings))


def benchmark(batch_size: int = 8, repeats: int = 5) -> None:
    models = {
        "zachvit": ZachVit(ZachVitConfig(), dtype="float32"),
        "minimal_vit": MinimalVit(MinimalVitConfig(), dtype="float32"),
    }
    images = Xoshiro256pp.from_key(0, "benchmark").random_array((batch_size, 224, 224, 3))
    counts = {}
    for name, model in models.items():
        counts[name] = param_count(model.params)
        ms = time_forward(model, images.astype(np.float32), repeats)
        print(f"{name:12s} params={counts[name]:>9,}  {ms:8.1f} ms/batch of {batch_size}")
    print(f"parameter ratio zachvit/minimal_vit = {counts['zachvit'] / counts['minimal_vit']:.3f}")


if __name__ == "__main__":
    batch = int(sys.argv[1]) if len(sys.argv) > 1 else 8
    reps = int(sys.argv[2]) if len(sys.argv) > 2 else 5
    logger.debug(f"Benchmarking with batch_size={batch}, repeats={reps}")
    benchmark(batch, reps)
