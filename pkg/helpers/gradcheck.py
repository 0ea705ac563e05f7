"""
Central finite-difference checks for tape gradients (64-bit only).

Relative error per element is |analytic - numeric| / max(|analytic|,
|numeric|, floor); the floor keeps near-zero gradients from turning
round-off into huge ratios.
"""

from collections.abc import Callable, Sequence

import numpy as np

from helpers.tensor import Parameter, Tape, Tensor, backward, zero_grad

DEFAULT_STEP = 1e-5
DEFAULT_FLOOR = 1e-5


def relative_error(
    analytic: np.ndarray, numeric: np.ndarray, floor: float = DEFAULT_FLOOR
) -> float:
    if analytic.size == 0:
        return 0.0
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric) / denom))


def numerical_gradient(
    fn: Callable[[np.ndarray], float],
    point: np.ndarray,
    step: float = DEFAULT_STEP,
) -> np.ndarray:
    point = np.array(point, dtype=np.float64, copy=True)
    grad = np.zeros_like(point)
    flat, gflat = point.reshape(-1), grad.reshape(-1)
    for i in range(flat.size):
        original = flat[i]
        flat[i] = original + step
        plus = fn(point)
        flat[i] = original - step
        minus = fn(point)
        flat[i] = original
        gflat[i] = (plus - minus) / (2.0 * step)
    return grad


def check_input_gradients(
    loss_fn: Callable[..., Tensor],
    inputs: Sequence[np.ndarray],
    step: float = DEFAULT_STEP,
) -> float:
    """
    Max relative error of d loss / d input over all inputs.

    `loss_fn` receives one Tensor per input array and must return a scalar.
    """
    arrays = [np.asarray(a, dtype=np.float64) for a in inputs]
    tensors = [Tensor(a, requires_grad=True) for a in arrays]
    with Tape() as tape:
        loss = loss_fn(*tensors)
    backward(loss)

    worst = 0.0
    for idx, (array, tensor) in enumerate(zip(arrays, tensors)):
        analytic = tape.grad(tensor)
        if analytic is None:
            analytic = np.zeros_like(array)

        def _eval(point: np.ndarray, idx=idx) -> float:
            args = [Tensor(point) if j == idx else Tensor(a) for j, a in enumerate(arrays)]
            return loss_fn(*args).item()

        numeric = numerical_gradient(_eval, array, step)
        worst = max(worst, relative_error(analytic, numeric))
    return worst


def check_parameter_gradients(
    loss_fn: Callable[[], Tensor],
    params: Sequence[Parameter],
    step: float = DEFAULT_STEP,
) -> dict[str, float]:
    """Max relative error per parameter name; values are restored afterwards."""
    zero_grad(params)
    with Tape():
        loss = loss_fn()
    backward(loss)

    errors: dict[str, float] = {}
    for param in params:
        analytic = param.grad.copy()
        original = param.value.numpy()

        def _eval(point: np.ndarray, param=param) -> float:
            param.assign(point)
            return loss_fn().item()

        numeric = numerical_gradient(_eval, original, step)
        param.assign(original)
        errors[param.name] = relative_error(analytic, numeric)
    zero_grad(params)
    return errors
