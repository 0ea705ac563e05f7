"""
Machine-checkable properties of the library, runnable as named suites.

Every suite returns a SuiteResult with the measured quantities; a suite
fails when a measurement crosses its bound. Suites build their inputs from
a seeded stream, so reruns measure exactly the same numbers.
"""

import logging
from collections.abc import Callable
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from helpers.errors import ConfigurationError
from helpers.gradcheck import check_input_gradients, check_parameter_gradients
from helpers.logging import MAIN_LOGGER_NAME
from helpers.metrics import pairwise_concordance, roc_auc
from helpers.model import (
    MinimalVit,
    MinimalVitConfig,
    ParameterStore,
    ZachVit,
    ZachVitConfig,
    adaptive_add,
    param_count,
)
from helpers.ops import (
    AttentionParams,
    dense,
    gap,
    gelu,
    layer_norm,
    multi_head_attention,
    sigmoid_bce,
    softmax_rows,
)
from helpers.prng import Xoshiro256pp, fisher_yates
from helpers.ssda import (
    PRIME_SEEDS,
    VIEW_ORDERS,
    RegimeSpec,
    StrideGeometry,
    exam_to_vis,
    ssda_expand,
)
from helpers.synth import generate_exam
from helpers.tensor import Operand, Parameter, Tensor, matmul, reshape, sum_all

logger = logging.getLogger(MAIN_LOGGER_NAME)

GRADCHECK_TOLERANCE = 1e-4
INVARIANCE_TOLERANCE = 1e-10
BASELINE_MIN_DEVIATION = 1e-3
AUC_TOLERANCE = 1e-9
ZACHVIT_PARAM_BAND = (225_000, 275_000)
MINIMAL_VIT_PARAM_BAND = (558_000, 682_000)
MAX_PARAM_RATIO = 0.5


@dataclass
class SuiteResult:
    name: str
    passed: bool
    measured: dict[str, Any] = field(default_factory=dict)
    message: str = ""

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "passed": self.passed,
            "measured": self.measured,
            "message": self.message,
        }


def _param(name: str, stream: Xoshiro256pp, *shape: int) -> Parameter:
    return Parameter(name, stream.standard_normal(shape) * 0.5)


def _contract(x: Operand, weights: np.ndarray) -> Tensor:
    """Scalar sum(x * weights) built from taped primitives only."""
    flat = reshape(x, (1, weights.size))
    return sum_all(matmul(flat, Tensor(weights.reshape(-1, 1))))


def op_gradient_errors(seed: int = 0) -> dict[str, float]:
    """Max relative finite-difference error per operation (64-bit)."""
    stream = Xoshiro256pp.from_key(seed, "gradcheck")
    rand = stream.standard_normal
    errors: dict[str, float] = {}

    errors["matmul"] = check_input_gradients(
        lambda a, b: sum_all(matmul(a, b)), [rand((5, 4)), rand((4, 3))]
    )

    w, b = _param("dense/W", stream, 4, 2), _param("dense/b", stream, 2)
    x, c = rand((3, 4)), rand((3, 2))
    errors["dense.input"] = check_input_gradients(lambda t: _contract(dense(t, w, b), c), [x])
    errors["dense.params"] = max(
        check_parameter_gradients(lambda: _contract(dense(Tensor(x), w, b), c), [w, b]).values()
    )

    gamma, beta = _param("ln/gamma", stream, 5), _param("ln/beta", stream, 5)
    x, c = rand((3, 5)), rand((3, 5))
    errors["layer_norm.input"] = check_input_gradients(
        lambda t: _contract(layer_norm(t, gamma, beta), c), [x]
    )
    errors["layer_norm.params"] = max(
        check_parameter_gradients(
            lambda: _contract(layer_norm(Tensor(x), gamma, beta), c), [gamma, beta]
        ).values()
    )

    x, c = rand((2, 3, 4)), rand((2, 3, 4))
    errors["softmax"] = check_input_gradients(lambda t: _contract(softmax_rows(t), c), [x])
    errors["gelu"] = check_input_gradients(lambda t: _contract(gelu(t), c), [x])
    errors["gap"] = check_input_gradients(lambda t: _contract(gap(t), c[:, 0, :]), [x])

    attn = AttentionParams(
        wq=_param("attn/Wq", stream, 8, 8),
        wk=_param("attn/Wk", stream, 8, 8),
        wv=_param("attn/Wv", stream, 8, 8),
        wo=_param("attn/Wo", stream, 8, 8),
        bo=_param("attn/bo", stream, 8),
    )
    x, c = rand((4, 8)), rand((4, 8))
    errors["attention.input"] = check_input_gradients(
        lambda t: _contract(multi_head_attention(t, attn, heads=2), c), [x]
    )
    errors["attention.params"] = max(
        check_parameter_gradients(
            lambda: _contract(multi_head_attention(Tensor(x), attn, heads=2), c),
            [attn.wq, attn.wk, attn.wv, attn.wo, attn.bo],
        ).values()
    )

    labels = np.array([[1.0], [0.0], [1.0], [0.0]])
    errors["sigmoid_bce"] = check_input_gradients(
        lambda t: sigmoid_bce(t, labels, (0.7, 1.6)), [rand((4, 1)) * 3.0]
    )

    store = ParameterStore(seed=seed)
    x, y, c = rand((2, 6)), rand((2, 4)), rand((2, 4))
    adaptive_add(Tensor(x), Tensor(y), store, "check")
    errors["adaptive_add.input"] = check_input_gradients(
        lambda a, b: _contract(adaptive_add(a, b, store, "check"), c), [x, y]
    )
    errors["adaptive_add.params"] = max(
        check_parameter_gradients(
            lambda: _contract(adaptive_add(Tensor(x), Tensor(y), store, "check"), c),
            list(store),
        ).values()
    )
    return errors


def tiny_zachvit(seed: int = 0) -> ZachVit:
    """Two blocks, width 16, nine tokens, single channel, no dropout."""
    config = ZachVitConfig(
        image_height=48,
        image_width=48,
        channels=1,
        patch_size=16,
        embed_dim=16,
        block_units=(16, 8),
        heads_per_block=(2, 2),
        dropout_rate=0.0,
    )
    return ZachVit(config, seed=seed, dtype="float64")


def suite_gradcheck(seed: int = 0) -> SuiteResult:
    errors = op_gradient_errors(seed)
    model = tiny_zachvit(seed)
    image = Xoshiro256pp.from_key(seed, "gradcheck-image").random_array((48, 48))
    label = np.array([1.0])
    model_errors = check_parameter_gradients(
        lambda: sigmoid_bce(model.forward(image), label), list(model.params)
    )
    errors["zachvit.end_to_end"] = max(model_errors.values())
    worst = max(errors, key=errors.get)
    passed = errors[worst] <= GRADCHECK_TOLERANCE
    return SuiteResult(
        "gradcheck",
        passed,
        {"max_relative_error": errors[worst], "worst": worst, "per_check": errors},
        f"max relative error {errors[worst]:.3e} ({worst}), bound {GRADCHECK_TOLERANCE:g}",
    )


def permutation_deviation(
    model, images: np.ndarray, permutations: int, stream: Xoshiro256pp, chunk: int = 20
) -> float:
    """Largest |logit(X) - logit(pi X)| over random patch-row permutations."""
    worst = 0.0
    for image in images:
        patches = model.patches(image)[0]
        base = model.forward_patches(patches[None]).numpy()[0, 0]
        n = patches.shape[0]
        perms = [fisher_yates(range(n), stream) for _ in range(permutations)]
        for start in range(0, permutations, chunk):
            batch = np.stack([patches[p] for p in perms[start : start + chunk]])
            logits = model.forward_patches(batch).numpy().reshape(-1)
            worst = max(worst, float(np.max(np.abs(logits - base))))
    return worst


def suite_perm_invariance(
    seed: int = 0,
    n_images: int = 20,
    permutations: int = 100,
    zach_config: ZachVitConfig | None = None,
    minimal_config: MinimalVitConfig | None = None,
) -> SuiteResult:
    zach = ZachVit(zach_config or ZachVitConfig(), seed=seed, dtype="float64")
    minimal = MinimalVit(minimal_config or MinimalVitConfig(), seed=seed, dtype="float64")
    cfg = zach.config
    stream = Xoshiro256pp.from_key(seed, "perm-invariance")
    images = stream.random_array((n_images, cfg.image_height, cfg.image_width, cfg.channels))
    zach_dev = permutation_deviation(zach, images, permutations, stream.fork("zachvit"))
    mcfg = minimal.config
    minimal_images = images
    if (mcfg.image_height, mcfg.image_width, mcfg.channels) != images.shape[1:]:
        minimal_images = stream.random_array(
            (n_images, mcfg.image_height, mcfg.image_width, mcfg.channels)
        )
    minimal_dev = permutation_deviation(
        minimal, minimal_images, permutations, stream.fork("minimal_vit")
    )
    passed = zach_dev <= INVARIANCE_TOLERANCE and minimal_dev > BASELINE_MIN_DEVIATION
    return SuiteResult(
        "perm-invariance",
        passed,
        {
            "zachvit_max_deviation": zach_dev,
            "minimal_vit_max_deviation": minimal_dev,
            "images": n_images,
            "permutations": permutations,
        },
        f"ZACH-ViT max deviation {zach_dev:.3e} (bound {INVARIANCE_TOLERANCE:g}); "
        f"Minimal ViT max deviation {minimal_dev:.3e} (must exceed {BASELINE_MIN_DEVIATION:g})",
    )


def suite_params(seed: int = 0) -> SuiteResult:
    zach = param_count(ZachVit(ZachVitConfig(), seed=seed).params)
    minimal = param_count(MinimalVit(MinimalVitConfig(), seed=seed).params)
    ratio = zach / minimal
    passed = (
        ZACHVIT_PARAM_BAND[0] <= zach <= ZACHVIT_PARAM_BAND[1]
        and MINIMAL_VIT_PARAM_BAND[0] <= minimal <= MINIMAL_VIT_PARAM_BAND[1]
        and ratio <= MAX_PARAM_RATIO
    )
    return SuiteResult(
        "params",
        passed,
        {"zachvit": zach, "minimal_vit": minimal, "ratio": ratio},
        f"ZACH-ViT {zach:,} in {ZACHVIT_PARAM_BAND}, Minimal ViT {minimal:,} in "
        f"{MINIMAL_VIT_PARAM_BAND}, ratio {ratio:.3f} <= {MAX_PARAM_RATIO}",
    )


def suite_auc_oracle(seed: int = 0, instances: int = 200) -> SuiteResult:
    stream = Xoshiro256pp.from_key(seed, "auc-oracle")
    worst = 0.0
    for _ in range(instances):
        n = 2 + stream.below(199)
        # coarse rounding forces ties
        scores = np.round(stream.random_array(n), 1)
        labels = (stream.random_array(n) < 0.5).astype(np.int64)
        labels[0], labels[1] = 0, 1
        worst = max(worst, abs(roc_auc(scores, labels) - pairwise_concordance(scores, labels)))
    return SuiteResult(
        "auc-oracle",
        worst <= AUC_TOLERANCE,
        {"max_abs_difference": worst, "instances": instances},
        f"max |trapezoidal - concordance| = {worst:.3e} over {instances} instances",
    )


def suite_ssda_cardinality(seed: int = 0) -> SuiteResult:
    exam = generate_exam(1, seed=seed, frame_size=32, frames_per_video=4)
    geometry = StrideGeometry.for_image(32, patch_size=16)
    measured: dict[str, Any] = {}
    passed = True
    for regime in (RegimeSpec("SSDA"), RegimeSpec("SSDA", (2,)), RegimeSpec("SSDA", PRIME_SEEDS)):
        images = ssda_expand(exam, regime, geometry)
        expected = 24 * (1 + len(regime.seed_set))
        measured[regime.tag] = len(images)
        passed &= len(images) == expected
    first = ssda_expand(exam, RegimeSpec("SSDA", (2,)), geometry)
    again = ssda_expand(exam, RegimeSpec("SSDA", (2,)), geometry)
    deterministic = all(np.array_equal(a.pixels, b.pixels) for a, b in zip(first, again))
    orders = [img.provenance.permutation for img in first[:24]]
    covers = sorted(orders) == sorted(VIEW_ORDERS) and len(set(orders)) == 24
    measured.update({"deterministic": deterministic, "orders_cover_s4": covers})
    passed = passed and deterministic and covers
    return SuiteResult(
        "ssda-cardinality",
        passed,
        measured,
        ", ".join(f"{k}={v}" for k, v in measured.items()),
    )


def view_permutation_deviation(seed: int = 0, aligned: bool = True, image_size: int = 112) -> float:
    geometry = StrideGeometry.for_image(image_size, patch_size=16, aligned=aligned)
    model = ZachVit(
        ZachVitConfig(image_height=geometry.height, image_width=geometry.width),
        seed=seed,
        dtype="float64",
    )
    exam = generate_exam(1, seed=seed, frame_size=image_size, frames_per_video=4)
    images = np.stack([exam_to_vis(exam, order, geometry).pixels for order in VIEW_ORDERS])
    logits = model.forward(images).numpy().reshape(-1)
    return float(np.max(np.abs(logits - logits[0])))


def suite_view_invariance(seed: int = 0) -> SuiteResult:
    aligned = view_permutation_deviation(seed, aligned=True)
    unaligned = view_permutation_deviation(seed, aligned=False)
    logger.warning(
        f"View-order deviation without patch alignment: {unaligned:.3e} (reported only)"
    )
    return SuiteResult(
        "view-invariance",
        aligned <= INVARIANCE_TOLERANCE,
        {"aligned_max_deviation": aligned, "unaligned_max_deviation": unaligned},
        f"aligned max deviation {aligned:.3e} (bound {INVARIANCE_TOLERANCE:g}); "
        f"unaligned {unaligned:.3e} (reported only)",
    )


SUITES: dict[str, Callable[..., SuiteResult]] = {
    "gradcheck": suite_gradcheck,
    "perm-invariance": suite_perm_invariance,
    "params": suite_params,
    "auc-oracle": suite_auc_oracle,
    "ssda-cardinality": suite_ssda_cardinality,
    "view-invariance": suite_view_invariance,
}


def run_suites(names: list[str], seed: int = 0) -> list[SuiteResult]:
    unknown = [name for name in names if name not in SUITES]
    if unknown:
        raise ConfigurationError(
            f"unknown suite(s) {', '.join(unknown)}; choose from {', '.join(SUITES)}"
        )
    results = []
    for name in names:
        logger.info(f"Running verification suite {name}")
        result = SUITES[name](seed=seed)
        level = logging.INFO if result.passed else logging.ERROR
        logger.log(level, f"{name}: {'PASS' if result.passed else 'FAIL'} | {result.message}")
        results.append(result)
    return results
