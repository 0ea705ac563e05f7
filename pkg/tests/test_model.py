"""Tests for ZACH-ViT, the Minimal ViT baseline and their building blocks."""

import numpy as np
import pytest

from helpers.errors import ConfigurationError, GeometryError
from helpers.model import (
    MinimalVit,
    MinimalVitConfig,
    ParameterStore,
    ZachVit,
    ZachVitConfig,
    adaptive_add,
    assemble_patches,
    build_model,
    config_from_dict,
    extract_patches,
    normalize_kind,
    param_count,
)
from helpers.prng import Xoshiro256pp, fisher_yates
from helpers.tensor import Parameter, Tensor
from helpers.verify import permutation_deviation, tiny_zachvit


def small_zachvit(**overrides) -> ZachVit:
    values = {
        "image_height": 64,
        "image_width": 48,
        "channels": 1,
        "patch_size": 16,
        "embed_dim": 32,
        "block_units": (24, 16),
        "heads_per_block": (4, 4),
    }
    values.update(overrides)
    return ZachVit(ZachVitConfig(**values), seed=0, dtype="float64")


class TestParameterCounts:
    def test_default_zachvit_count(self):
        assert param_count(ZachVit(ZachVitConfig()).params) == 260_033

    def test_default_minimal_vit_count(self):
        assert param_count(MinimalVit(MinimalVitConfig()).params) == 592_385

    def test_single_dense_layer_count(self):
        weight = Parameter("embed/W", np.zeros((768, 128)))
        bias = Parameter("embed/b", np.zeros(128))
        assert param_count([weight, bias]) == 98_432

    def test_zachvit_has_no_positional_table_or_class_token(self):
        names = ZachVit(ZachVitConfig()).params.names()
        assert not [n for n in names if "pos" in n or "cls" in n]

    def test_minimal_vit_has_positional_table(self):
        model = MinimalVit(MinimalVitConfig())
        assert model.params["pos_embed"].shape == (196, 64)

    def test_projection_only_where_width_changes(self):
        names = ZachVit(ZachVitConfig()).params.names()
        projections = sorted(n for n in names if "/proj/" in n)
        # width 128 -> 96 -> 64 -> 32 changes at every MLP residual, never at attention
        assert projections == [
            f"block{i}/mlp_residual/proj/{p}" for i in range(3) for p in ("W", "b")
        ]


class TestInvariance:
    def test_zachvit_ignores_patch_order(self):
        model = small_zachvit()
        images = Xoshiro256pp.from_seed(1).random_array((3, 64, 48, 1))
        deviation = permutation_deviation(model, images, 10, Xoshiro256pp.from_seed(2))
        assert deviation <= 1e-10

    def test_minimal_vit_depends_on_patch_order(self):
        config = MinimalVitConfig(image_height=64, image_width=48, channels=1)
        model = MinimalVit(config, seed=0, dtype="float64")
        images = Xoshiro256pp.from_seed(1).random_array((2, 64, 48, 1))
        deviation = permutation_deviation(model, images, 5, Xoshiro256pp.from_seed(2))
        assert deviation > 1e-3

    def test_train_mode_with_same_stream_is_reproducible(self):
        model = small_zachvit(dropout_rate=0.3)
        image = Xoshiro256pp.from_seed(4).random_array((64, 48))
        a = model.forward(image, mode="train", stream=Xoshiro256pp.from_seed(7)).numpy()
        b = model.forward(image, mode="train", stream=Xoshiro256pp.from_seed(7)).numpy()
        np.testing.assert_array_equal(a, b)


class TestForward:
    def test_logit_shape_per_image(self):
        model = small_zachvit()
        out = model.forward(np.zeros((5, 64, 48)))
        assert out.shape == (5, 1)

    def test_grayscale_is_replicated_to_channels(self):
        model = small_zachvit(channels=3)
        gray = Xoshiro256pp.from_seed(3).random_array((64, 48))
        rgb = np.repeat(gray[..., None], 3, axis=-1)
        np.testing.assert_array_equal(model.forward(gray).numpy(), model.forward(rgb).numpy())

    def test_wrong_image_size_is_geometry_error(self):
        with pytest.raises(GeometryError, match="64x48"):
            small_zachvit().forward(np.zeros((48, 48)))

    def test_minimal_vit_rejects_other_token_counts(self):
        model = MinimalVit(MinimalVitConfig(image_height=32, image_width=32, channels=1, depth=1))
        with pytest.raises(GeometryError, match="positional table"):
            model.forward_patches(np.zeros((1, 9, 256)))

    def test_gelu_variant_builds_same_parameters(self):
        plain = small_zachvit()
        with_gelu = small_zachvit(mlp_activation="gelu")
        assert plain.params.names() == with_gelu.params.names()
        image = np.full((64, 48), 0.5)
        assert not np.array_equal(plain.forward(image).numpy(), with_gelu.forward(image).numpy())

    def test_tiny_model_is_float64(self):
        model = tiny_zachvit()
        assert model.dtype == "float64"
        assert model.forward(np.zeros((48, 48))).dtype == np.float64


class TestPatches:
    def test_row_major_patch_order(self):
        image = np.arange(4 * 4, dtype=np.float64).reshape(4, 4, 1)
        patches = extract_patches(image, 2)
        np.testing.assert_array_equal(patches[0], [0, 1, 4, 5])
        np.testing.assert_array_equal(patches[1], [2, 3, 6, 7])
        np.testing.assert_array_equal(patches[2], [8, 9, 12, 13])

    def test_assemble_inverts_extract(self):
        image = Xoshiro256pp.from_seed(0).random_array((32, 48, 3))
        patches = extract_patches(image, 16)
        np.testing.assert_array_equal(assemble_patches(patches, 32, 48, 3, 16), image)

    def test_indivisible_image_is_geometry_error(self):
        with pytest.raises(GeometryError):
            extract_patches(np.zeros((30, 32, 1)), 16)

    def test_permuting_patch_rows_then_reassembling(self):
        image = Xoshiro256pp.from_seed(6).random_array((32, 32, 1))
        patches = extract_patches(image, 16)
        order = fisher_yates(range(4), Xoshiro256pp.from_seed(1))
        shuffled = assemble_patches(patches[order], 32, 32, 1, 16)
        np.testing.assert_array_equal(np.sort(shuffled.ravel()), np.sort(image.ravel()))


class TestAdaptiveAdd:
    def test_equal_widths_add_without_parameters(self):
        store = ParameterStore()
        out = adaptive_add(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))), store, "s")
        np.testing.assert_array_equal(out.numpy(), np.full((2, 3), 2.0))
        assert len(store) == 0

    def test_projection_is_created_once_per_site(self):
        store = ParameterStore()
        x, y = Tensor(np.ones((2, 5))), Tensor(np.ones((2, 3)))
        adaptive_add(x, y, store, "site")
        adaptive_add(x, y, store, "site")
        assert store.names() == ["site/proj/W", "site/proj/b"]
        assert store["site/proj/W"].shape == (5, 3)

    def test_square_projection_starts_as_identity(self):
        store = ParameterStore()
        store.get_or_create("p", (4, 4), "projection")
        np.testing.assert_array_equal(store["p"].value.numpy(), np.eye(4))


class TestConfig:
    @pytest.mark.parametrize(
        "overrides",
        [
            {"heads_per_block": (4, 4)},
            {"block_units": ()},
            {"dropout_rate": 1.0},
            {"mlp_activation": "relu"},
            {"heads_per_block": (3, 4, 4)},
        ],
    )
    def test_invalid_zachvit_config(self, overrides):
        with pytest.raises(ConfigurationError):
            ZachVitConfig(**overrides)

    def test_indivisible_image_is_geometry_error(self):
        with pytest.raises(GeometryError):
            ZachVitConfig(image_height=100)

    def test_config_from_dict_rejects_unknown_keys(self):
        with pytest.raises(ConfigurationError, match="depth"):
            config_from_dict("zachvit", {"depth": 3})

    def test_config_from_dict_accepts_lists(self):
        config = config_from_dict("zachvit", {"block_units": [64, 32], "heads_per_block": [4, 4]})
        assert config.block_units == (64, 32)

    @pytest.mark.parametrize("alias", ["minimal_vit", "minimal-vit"])
    def test_minimal_vit_aliases(self, alias):
        assert normalize_kind(alias) == "minimal_vit"

    def test_unknown_kind(self):
        with pytest.raises(ConfigurationError, match="unknown model kind"):
            build_model("resnet")

    def test_same_seed_same_initial_weights(self):
        a, b = small_zachvit(), small_zachvit()
        for pa, pb in zip(a.params, b.params):
            np.testing.assert_array_equal(pa.value.numpy(), pb.value.numpy())
