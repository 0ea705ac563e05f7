"""
Layer-level differentiable operations built on `helpers.tensor`.

All operations work on the last axis as features and the second-to-last
as tokens; any further leading axes are batch axes. Nothing here adds
positional information, so every token-wise operation commutes with a
permutation of the token rows.
"""

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from helpers.errors import ConfigurationError, EmptyInputError, InputError, ShapeError
from helpers.prng import Xoshiro256pp
from helpers.tensor import (
    Operand,
    Parameter,
    Tensor,
    add,
    apply_op,
    as_array,
    matmul,
    reshape,
    scale,
    swap_axes,
    unbroadcast,
)

Mode = Literal["train", "eval"]

DEFAULT_LN_EPS = 1e-5


def dense(x: Operand, weight: Parameter, bias: Parameter | None = None) -> Tensor:
    """x @ W + b, with b broadcast over every row."""
    x_shape, w_shape = as_array(x).shape, weight.shape
    if len(w_shape) != 2 or not x_shape or x_shape[-1] != w_shape[0]:
        raise ShapeError(
            f"dense {weight.name}: input width {x_shape} does not match weights {w_shape}"
        )
    out = matmul(x, weight)
    if bias is None:
        return out
    if bias.shape != (w_shape[1],):
        raise ShapeError(
            f"dense {bias.name}: bias shape {bias.shape} does not match output width {w_shape[1]}"
        )
    return add(out, bias)


def layer_norm(
    x: Operand,
    gamma: Parameter,
    beta: Parameter,
    eps: float = DEFAULT_LN_EPS,
) -> Tensor:
    """Per-row normalisation with population variance, then gamma * x_hat + beta."""
    if eps <= 0:
        raise ConfigurationError(f"layer_norm eps must be positive, got {eps}")
    arr = as_array(x)
    d = arr.shape[-1]
    if gamma.shape != (d,) or beta.shape != (d,):
        raise ShapeError(
            f"layer_norm: gamma{gamma.shape}/beta{beta.shape} do not match width {d}"
        )
    g_arr, b_arr = as_array(gamma), as_array(beta)
    mean = arr.mean(axis=-1, keepdims=True)
    centered = arr - mean
    var = (centered * centered).mean(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    x_hat = centered * inv_std
    out = x_hat * g_arr + b_arr

    def _backward(g: np.ndarray):
        dx_hat = g * g_arr
        dx = inv_std * (
            dx_hat
            - dx_hat.mean(axis=-1, keepdims=True)
            - x_hat * (dx_hat * x_hat).mean(axis=-1, keepdims=True)
        )
        dgamma = unbroadcast(g * x_hat, g_arr.shape)
        dbeta = unbroadcast(g, b_arr.shape)
        return dx, dgamma, dbeta

    return apply_op("layer_norm", (x, gamma, beta), out, _backward)


def softmax_rows(x: Operand) -> Tensor:
    """Softmax over the last axis with max subtraction."""
    arr = as_array(x)
    shifted = arr - arr.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=-1, keepdims=True)

    def _backward(g: np.ndarray):
        return (out * (g - (g * out).sum(axis=-1, keepdims=True)),)

    return apply_op("softmax", (x,), out, _backward)


_GELU_C = math.sqrt(2.0 / math.pi)


def gelu(x: Operand) -> Tensor:
    """tanh approximation of GELU."""
    arr = as_array(x)
    inner = _GELU_C * (arr + 0.044715 * arr**3)
    t = np.tanh(inner)
    out = 0.5 * arr * (1.0 + t)

    def _backward(g: np.ndarray):
        d_inner = _GELU_C * (1.0 + 3.0 * 0.044715 * arr**2)
        return (g * (0.5 * (1.0 + t) + 0.5 * arr * (1.0 - t * t) * d_inner),)

    return apply_op("gelu", (x,), out, _backward)


@dataclass(frozen=True)
class AttentionParams:
    """Projections of one self-attention layer; no biases on q/k/v."""

    wq: Parameter
    wk: Parameter
    wv: Parameter
    wo: Parameter
    bo: Parameter


def multi_head_attention(x: Operand, params: AttentionParams, heads: int) -> Tensor:
    """
    Scaled dot-product self-attention, query = key = value source.

    Heads are split from the projected width, attended independently with
    scale 1/sqrt(d/heads), concatenated and projected by Wo. No masking.
    """
    shape = as_array(x).shape
    if len(shape) < 2:
        raise ShapeError(f"attention needs [..., N, d] input, got {shape}")
    d = shape[-1]
    if heads <= 0 or d % heads != 0:
        raise ConfigurationError(
            f"attention width {d} is not divisible by {heads} heads"
        )
    head_dim = d // heads
    lead, n = shape[:-2], shape[-2]

    def _split(t: Tensor) -> Tensor:
        return swap_axes(reshape(t, lead + (n, heads, head_dim)), -3, -2)

    q = _split(dense(x, params.wq))
    k = _split(dense(x, params.wk))
    v = _split(dense(x, params.wv))
    scores = scale(matmul(q, swap_axes(k, -1, -2)), 1.0 / math.sqrt(head_dim))
    weights = softmax_rows(scores)
    context = swap_axes(matmul(weights, v), -3, -2)
    merged = reshape(context, lead + (n, d))
    return dense(merged, params.wo, params.bo)


def gap(x: Operand) -> Tensor:
    """Mean over the token axis: [..., N, d] -> [..., d]."""
    arr = as_array(x)
    if arr.ndim < 2:
        raise ShapeError(f"gap needs [..., N, d] input, got {arr.shape}")
    n = arr.shape[-2]
    if n == 0:
        raise EmptyInputError("gap: cannot pool over zero tokens")
    out = arr.mean(axis=-2)

    def _backward(g: np.ndarray):
        expanded = np.expand_dims(g / n, axis=-2)
        return (np.broadcast_to(expanded, arr.shape).copy(),)

    return apply_op("gap", (x,), out, _backward)


def dropout(
    x: Operand,
    rate: float,
    mode: Mode,
    stream: Xoshiro256pp | None,
) -> Operand:
    """
    Inverted dropout. Identity in eval mode or at rate 0; in train mode
    each element survives with probability 1 - rate and is scaled by
    1 / (1 - rate). The mask comes from the given stream.
    """
    if not 0.0 <= rate < 1.0:
        raise ConfigurationError(f"dropout rate must be in [0, 1), got {rate}")
    if mode == "eval" or rate == 0.0:
        return x
    if stream is None:
        raise ConfigurationError("train-mode dropout needs a random stream")
    arr = as_array(x)
    keep = stream.random_array(arr.shape) >= rate
    factor = arr.dtype.type(1.0 / (1.0 - rate))
    mask = keep.astype(arr.dtype) * factor
    out = arr * mask

    def _backward(g: np.ndarray):
        return (g * mask,)

    return apply_op("dropout", (x,), out, _backward)


def sigmoid_bce(
    logits: Operand,
    labels: np.ndarray,
    class_weights: tuple[float, float] = (1.0, 1.0),
) -> Tensor:
    """
    Class-weighted binary cross-entropy on logits, averaged over the batch.

    Uses max(z, 0) - z*y + log1p(exp(-|z|)), which never evaluates log(0).
    Each sample's term is multiplied by the weight of its class.
    """
    z = as_array(logits)
    y = np.asarray(labels, dtype=z.dtype).reshape(z.shape)
    if not np.all((y == 0) | (y == 1)):
        raise InputError("sigmoid_bce: labels must be 0 or 1")
    if z.size == 0:
        raise EmptyInputError("sigmoid_bce: empty batch")
    w0, w1 = class_weights
    w = np.where(y == 1, w1, w0).astype(z.dtype)
    per_sample = np.maximum(z, 0) - z * y + np.log1p(np.exp(-np.abs(z)))
    batch = z.size
    out = np.asarray((w * per_sample).sum() / batch, dtype=z.dtype)

    def _backward(g: np.ndarray):
        sig = sigmoid(z).astype(z.dtype)
        return (g * w * (sig - y) / batch,)

    return apply_op("sigmoid_bce", (logits,), out, _backward)


def sigmoid(z: np.ndarray) -> np.ndarray:
    """Plain numpy logistic function, stable for large |z|."""
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out
