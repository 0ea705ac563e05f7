"""
ZACH-ViT and the Minimal ViT baseline.

ZACH-ViT embeds non-overlapping patches with a single Dense layer, adds no
positional table and no class token, runs a short hierarchy of pre-norm
blocks whose residuals project on width changes (AdaptiveAdd), pools by
averaging tokens and emits one logit. Because nothing depends on token
order, the logit is invariant to any permutation of the patch rows.

The Minimal ViT baseline is a standard pre-norm ViT (8 blocks, 64 wide)
with a learned positional table and the same pooled head; the positional
table is what breaks the symmetry.

Parameters are created lazily on first use, Keras style, and every model
runs one eval-mode forward pass at construction so the parameter set is
complete before anything counts or saves it.
"""

import logging
from collections.abc import Iterable, Iterator
from dataclasses import asdict, dataclass, field
from typing import Any, ClassVar

import numpy as np

from helpers.errors import ConfigurationError, GeometryError, ShapeError
from helpers.logging import MAIN_LOGGER_NAME
from helpers.ops import (
    DEFAULT_LN_EPS,
    AttentionParams,
    Mode,
    dense,
    dropout,
    gap,
    gelu,
    layer_norm,
    multi_head_attention,
)
from helpers.prng import Xoshiro256pp
from helpers.tensor import Operand, Parameter, Tensor, add, as_array

logger = logging.getLogger(MAIN_LOGGER_NAME)

MLP_ACTIVATIONS = ("none", "gelu")
DTYPES = {"float32": np.float32, "float64": np.float64}


def _check_geometry(height: int, width: int, channels: int, patch_size: int) -> None:
    if patch_size <= 0 or channels <= 0:
        raise ConfigurationError(
            f"patch_size and channels must be positive, got {patch_size} and {channels}"
        )
    if height <= 0 or width <= 0 or height % patch_size or width % patch_size:
        raise GeometryError(
            f"image {height}x{width} is not divisible into {patch_size}-pixel patches"
        )


@dataclass(frozen=True)
class ZachVitConfig:
    image_height: int = 224
    image_width: int = 224
    channels: int = 3
    patch_size: int = 16
    embed_dim: int = 128
    block_units: tuple[int, ...] = (96, 64, 32)
    heads_per_block: tuple[int, ...] = (4, 4, 4)
    dropout_rate: float = 0.1
    mlp_dropout: bool = False
    mlp_activation: str = "none"
    ln_eps: float = DEFAULT_LN_EPS

    def __post_init__(self):
        object.__setattr__(self, "block_units", tuple(int(u) for u in self.block_units))
        object.__setattr__(
            self, "heads_per_block", tuple(int(h) for h in self.heads_per_block)
        )
        self.validate()

    def validate(self) -> None:
        _check_geometry(self.image_height, self.image_width, self.channels, self.patch_size)
        if not self.block_units:
            raise ConfigurationError("block_units must name at least one block")
        if len(self.heads_per_block) != len(self.block_units):
            raise ConfigurationError(
                f"heads_per_block has {len(self.heads_per_block)} entries "
                f"but block_units has {len(self.block_units)}"
            )
        if self.embed_dim <= 0 or any(u <= 0 for u in self.block_units):
            raise ConfigurationError("embed_dim and block_units must be positive")
        for idx, (width, heads) in enumerate(
            zip(self.block_input_widths, self.heads_per_block)
        ):
            if heads <= 0 or width % heads:
                raise ConfigurationError(
                    f"block {idx}: {heads} heads do not divide its input width {width}"
                )
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ConfigurationError(f"dropout_rate must be in [0, 1), got {self.dropout_rate}")
        if self.mlp_activation not in MLP_ACTIVATIONS:
            raise ConfigurationError(
                f"mlp_activation must be one of {', '.join(MLP_ACTIVATIONS)}"
            )

    @property
    def block_input_widths(self) -> tuple[int, ...]:
        return (self.embed_dim,) + self.block_units[:-1]

    @property
    def num_patches(self) -> int:
        return (self.image_height // self.patch_size) * (self.image_width // self.patch_size)

    @property
    def patch_dim(self) -> int:
        return self.patch_size * self.patch_size * self.channels

    def to_dict(self) -> dict[str, Any]:
        out = asdict(self)
        out["block_units"] = list(self.block_units)
        out["heads_per_block"] = list(self.heads_per_block)
        return out


@dataclass(frozen=True)
class MinimalVitConfig:
    image_height: int = 224
    image_width: int = 224
    channels: int = 3
    patch_size: int = 16
    embed_dim: int = 64
    depth: int = 8
    heads: int = 4
    mlp_dim: int = 384
    dropout_rate: float = 0.1
    ln_eps: float = DEFAULT_LN_EPS

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        _check_geometry(self.image_height, self.image_width, self.channels, self.patch_size)
        if self.depth <= 0 or self.embed_dim <= 0 or self.mlp_dim <= 0:
            raise ConfigurationError("depth, embed_dim and mlp_dim must be positive")
        if self.heads <= 0 or self.embed_dim % self.heads:
            raise ConfigurationError(
                f"{self.heads} heads do not divide embed_dim {self.embed_dim}"
            )
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ConfigurationError(f"dropout_rate must be in [0, 1), got {self.dropout_rate}")

    @property
    def num_patches(self) -> int:
        return (self.image_height // self.patch_size) * (self.image_width // self.patch_size)

    @property
    def patch_dim(self) -> int:
        return self.patch_size * self.patch_size * self.channels

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


class ParameterStore:
    """
    Ordered, uniquely named parameters of one model.

    `get_or_create` initialises a parameter the first time a name is asked
    for, drawing from the store's own stream, so creation order fixes the
    initial values.
    """

    def __init__(self, seed: int = 0, dtype: str = "float64"):
        if dtype not in DTYPES:
            raise ConfigurationError(f"dtype must be one of {', '.join(DTYPES)}, got {dtype}")
        self.dtype = dtype
        self._stream = Xoshiro256pp.from_key(seed, "init")
        self._params: dict[str, Parameter] = {}

    def get_or_create(self, name: str, shape: tuple[int, ...], init: str) -> Parameter:
        param = self._params.get(name)
        if param is not None:
            if param.shape != tuple(shape):
                raise ShapeError(
                    f"parameter {name} exists with shape {param.shape}, requested {tuple(shape)}"
                )
            return param
        param = Parameter(name, self._initial_value(tuple(shape), init))
        self._params[name] = param
        logger.debug(f"Created parameter {name} {param.shape} ({init})")
        return param

    def _initial_value(self, shape: tuple[int, ...], init: str) -> np.ndarray:
        dtype = DTYPES[self.dtype]
        if init == "zeros":
            return np.zeros(shape, dtype=dtype)
        if init == "ones":
            return np.ones(shape, dtype=dtype)
        if init == "projection" and len(shape) == 2 and shape[0] == shape[1]:
            return np.eye(shape[0], dtype=dtype)
        if init in ("glorot", "projection"):
            fan_in = shape[0] if len(shape) > 1 else 1
            fan_out = shape[-1]
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            u = self._stream.random_array(shape)
            return ((2.0 * u - 1.0) * limit).astype(dtype)
        raise ConfigurationError(f"unknown initialiser {init!r}")

    def add(self, param: Parameter) -> None:
        if param.name in self._params:
            raise ConfigurationError(f"duplicate parameter name {param.name}")
        self._params[param.name] = param

    def names(self) -> list[str]:
        return list(self._params)

    def zero_grad(self) -> None:
        for param in self._params.values():
            param.zero_grad()

    def __getitem__(self, name: str) -> Parameter:
        return self._params[name]

    def __contains__(self, name: object) -> bool:
        return name in self._params

    def __iter__(self) -> Iterator[Parameter]:
        return iter(self._params.values())

    def __len__(self) -> int:
        return len(self._params)


def param_count(params: Iterable[Parameter]) -> int:
    """Exact number of scalar elements across all parameters."""
    return sum(param.size for param in params)


def extract_patches(images: np.ndarray, patch_size: int) -> np.ndarray:
    """
    [..., H, W, C] -> [..., N, patch_size * patch_size * C].

    Patches are taken in row-major order over the patch grid and each patch
    is flattened row-major (rows, then columns, then channels).
    """
    images = np.asarray(images)
    if images.ndim < 3:
        raise ShapeError(f"extract_patches needs [..., H, W, C], got {images.shape}")
    *lead, h, w, c = images.shape
    if patch_size <= 0 or h % patch_size or w % patch_size:
        raise GeometryError(
            f"image {h}x{w} is not divisible into {patch_size}-pixel patches"
        )
    gh, gw = h // patch_size, w // patch_size
    grid = images.reshape(*lead, gh, patch_size, gw, patch_size, c)
    k = len(lead)
    order = list(range(k)) + [k, k + 2, k + 1, k + 3, k + 4]
    return grid.transpose(order).reshape(*lead, gh * gw, patch_size * patch_size * c)


def assemble_patches(
    patches: np.ndarray, height: int, width: int, channels: int, patch_size: int
) -> np.ndarray:
    """Inverse of extract_patches for a single image."""
    gh, gw = height // patch_size, width // patch_size
    grid = np.asarray(patches).reshape(gh, gw, patch_size, patch_size, channels)
    return grid.transpose(0, 2, 1, 3, 4).reshape(height, width, channels)


def adaptive_add(x: Operand, y: Operand, store: ParameterStore, site: str) -> Tensor:
    """
    Residual sum that projects x to y's width when they differ.

    The projection (a Dense with bias) for a call site is created the first
    time that site sees mismatched widths and reused afterwards.
    """
    x_shape, y_shape = as_array(x).shape, as_array(y).shape
    if x_shape[:-1] != y_shape[:-1]:
        raise ShapeError(
            f"adaptive_add {site}: token counts differ, x{x_shape} vs y{y_shape}"
        )
    d_x, d_y = x_shape[-1], y_shape[-1]
    if d_x == d_y:
        return add(x, y)
    weight = store.get_or_create(f"{site}/proj/W", (d_x, d_y), "projection")
    bias = store.get_or_create(f"{site}/proj/b", (d_y,), "zeros")
    return add(dense(x, weight, bias), y)


class VisionModel:
    """Shared input handling for both architectures."""

    kind: ClassVar[str]
    config: Any

    def __init__(self, config, seed: int = 0, dtype: str = "float64"):
        self.config = config
        self.seed = seed
        self.params = ParameterStore(seed=seed, dtype=dtype)
        self._build()

    @property
    def dtype(self) -> str:
        return self.params.dtype

    def _build(self) -> None:
        cfg = self.config
        probe = np.zeros((1, cfg.image_height, cfg.image_width, cfg.channels))
        self.forward(probe, mode="eval")
        logger.debug(
            f"Built {self.kind} with {len(self.params)} tensors, "
            f"{param_count(self.params)} parameters"
        )

    def prepare_images(self, images: np.ndarray) -> np.ndarray:
        """Accept [H, W], [B, H, W], [H, W, C] or [B, H, W, C]; replicate grayscale."""
        cfg = self.config
        arr = np.asarray(images, dtype=DTYPES[self.dtype])
        hw = (cfg.image_height, cfg.image_width)
        if arr.ndim in (2, 3) and arr.shape[-2:] == hw:
            arr = np.repeat(arr[..., np.newaxis], cfg.channels, axis=-1)
        elif arr.ndim in (3, 4) and arr.shape[-3:] == hw + (cfg.channels,):
            pass
        else:
            raise GeometryError(
                f"{self.kind} expects images of {hw[0]}x{hw[1]}x{cfg.channels}, "
                f"got array of shape {arr.shape}"
            )
        if arr.ndim == 3:
            arr = arr[np.newaxis]
        return arr

    def patches(self, images: np.ndarray) -> np.ndarray:
        return extract_patches(self.prepare_images(images), self.config.patch_size)

    def forward(
        self,
        images: np.ndarray,
        mode: Mode = "eval",
        stream: Xoshiro256pp | None = None,
    ) -> Tensor:
        """Logits of shape [B, 1]; no sigmoid applied."""
        return self.forward_patches(self.patches(images), mode=mode, stream=stream)

    def forward_patches(
        self,
        patches: Operand | np.ndarray,
        mode: Mode = "eval",
        stream: Xoshiro256pp | None = None,
    ) -> Tensor:
        raise NotImplementedError

    def _as_patches(self, patches: Operand | np.ndarray) -> Operand:
        if isinstance(patches, np.ndarray):
            patches = Tensor(patches.astype(DTYPES[self.dtype], copy=False))
        shape = as_array(patches).shape
        if len(shape) < 2 or shape[-1] != self.config.patch_dim:
            raise GeometryError(
                f"{self.kind} expects patch rows of width {self.config.patch_dim}, got {shape}"
            )
        return patches

    def _ln(self, prefix: str, width: int) -> tuple[Parameter, Parameter]:
        return (
            self.params.get_or_create(f"{prefix}/gamma", (width,), "ones"),
            self.params.get_or_create(f"{prefix}/beta", (width,), "zeros"),
        )

    def _dense(self, prefix: str, d_in: int, d_out: int) -> tuple[Parameter, Parameter]:
        return (
            self.params.get_or_create(f"{prefix}/W", (d_in, d_out), "glorot"),
            self.params.get_or_create(f"{prefix}/b", (d_out,), "zeros"),
        )

    def _attention(self, prefix: str, width: int) -> AttentionParams:
        get = self.params.get_or_create
        return AttentionParams(
            wq=get(f"{prefix}/Wq", (width, width), "glorot"),
            wk=get(f"{prefix}/Wk", (width, width), "glorot"),
            wv=get(f"{prefix}/Wv", (width, width), "glorot"),
            wo=get(f"{prefix}/Wo", (width, width), "glorot"),
            bo=get(f"{prefix}/bo", (width,), "zeros"),
        )


class ZachVit(VisionModel):
    kind = "zachvit"
    config: ZachVitConfig

    def forward_patches(self, patches, mode="eval", stream=None) -> Tensor:
        cfg = self.config
        x = self._as_patches(patches)
        z = dense(x, *self._dense("patch_embed", cfg.patch_dim, cfg.embed_dim))
        width = cfg.embed_dim
        for idx, (units, heads) in enumerate(zip(cfg.block_units, cfg.heads_per_block)):
            prefix = f"block{idx}"
            y = layer_norm(z, *self._ln(f"{prefix}/ln1", width), eps=cfg.ln_eps)
            y = multi_head_attention(y, self._attention(f"{prefix}/attn", width), heads)
            y = dropout(y, cfg.dropout_rate, mode, stream)
            z_mid = adaptive_add(z, y, self.params, f"{prefix}/attn_residual")
            f = layer_norm(z_mid, *self._ln(f"{prefix}/ln2", width), eps=cfg.ln_eps)
            f = dense(f, *self._dense(f"{prefix}/dense", width, units))
            if cfg.mlp_activation == "gelu":
                f = gelu(f)
            if cfg.mlp_dropout:
                f = dropout(f, cfg.dropout_rate, mode, stream)
            z = adaptive_add(z_mid, f, self.params, f"{prefix}/mlp_residual")
            width = units
        pooled = gap(z)
        return dense(pooled, *self._dense("head", width, 1))


class MinimalVit(VisionModel):
    kind = "minimal_vit"
    config: MinimalVitConfig

    def forward_patches(self, patches, mode="eval", stream=None) -> Tensor:
        cfg = self.config
        x = self._as_patches(patches)
        n = as_array(x).shape[-2]
        if n != cfg.num_patches:
            raise GeometryError(
                f"minimal_vit has a positional table for {cfg.num_patches} patches, got {n}"
            )
        d = cfg.embed_dim
        z = dense(x, *self._dense("patch_embed", cfg.patch_dim, d))
        z = add(z, self.params.get_or_create("pos_embed", (n, d), "glorot"))
        for idx in range(cfg.depth):
            prefix = f"block{idx}"
            y = layer_norm(z, *self._ln(f"{prefix}/ln1", d), eps=cfg.ln_eps)
            y = multi_head_attention(y, self._attention(f"{prefix}/attn", d), cfg.heads)
            y = dropout(y, cfg.dropout_rate, mode, stream)
            z = add(z, y)
            y = layer_norm(z, *self._ln(f"{prefix}/ln2", d), eps=cfg.ln_eps)
            y = gelu(dense(y, *self._dense(f"{prefix}/mlp1", d, cfg.mlp_dim)))
            y = dense(y, *self._dense(f"{prefix}/mlp2", cfg.mlp_dim, d))
            y = dropout(y, cfg.dropout_rate, mode, stream)
            z = add(z, y)
        z = layer_norm(z, *self._ln("final_ln", d), eps=cfg.ln_eps)
        return dense(gap(z), *self._dense("head", d, 1))


@dataclass(frozen=True)
class ModelSpec:
    model_cls: type[VisionModel]
    config_cls: type
    aliases: tuple[str, ...] = field(default_factory=tuple)


MODEL_KINDS: dict[str, ModelSpec] = {
    "zachvit": ModelSpec(ZachVit, ZachVitConfig),
    "minimal_vit": ModelSpec(MinimalVit, MinimalVitConfig, aliases=("minimal-vit",)),
}


def normalize_kind(kind: str) -> str:
    for name, spec in MODEL_KINDS.items():
        if kind == name or kind in spec.aliases:
            return name
    raise ConfigurationError(
        f"unknown model kind {kind!r}; expected one of {', '.join(MODEL_KINDS)}"
    )


def config_from_dict(kind: str, values: dict[str, Any]):
    spec = MODEL_KINDS[normalize_kind(kind)]
    known = set(spec.config_cls.__dataclass_fields__)
    unknown = sorted(set(values) - known)
    if unknown:
        raise ConfigurationError(
            f"unknown {kind} config key(s): {', '.join(unknown)}"
        )
    try:
        return spec.config_cls(**values)
    except TypeError as exc:
        raise ConfigurationError(f"invalid {kind} config: {exc}") from exc


def build_model(kind: str, config=None, seed: int = 0, dtype: str = "float64") -> VisionModel:
    spec = MODEL_KINDS[normalize_kind(kind)]
    config = config if config is not None else spec.config_cls()
    if not isinstance(config, spec.config_cls):
        raise ConfigurationError(
            f"{kind} needs a {spec.config_cls.__name__}, got {type(config).__name__}"
        )
    return spec.model_cls(config, seed=seed, dtype=dtype)
