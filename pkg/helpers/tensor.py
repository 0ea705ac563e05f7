"""
Dense tensors with reverse-mode automatic differentiation.

A `Tensor` wraps a read-only numpy array. Operations never mutate their
inputs; they return new tensors. While a `Tape` is active (``with Tape():``)
every operation whose inputs require gradients appends a node to it, and
`backward(loss)` walks those nodes once, newest first, accumulating into
the `Parameter.grad` buffers (the only mutable numeric state).

Only the primitives the models need are provided here; the layer-level
operations (dense, layer norm, attention, ...) live in `helpers.ops`.
"""

import logging
from collections.abc import Callable, Iterable, Sequence
from contextvars import ContextVar
from dataclasses import dataclass

import numpy as np

from helpers.errors import ContractError, ShapeError
from helpers.logging import MAIN_LOGGER_NAME

logger = logging.getLogger(MAIN_LOGGER_NAME)

BackwardFn = Callable[[np.ndarray], Sequence[np.ndarray | None]]


def _float_dtype(data) -> np.dtype:
    if isinstance(data, np.ndarray) and data.dtype == np.float32:
        return np.dtype(np.float32)
    return np.dtype(np.float64)


class Tensor:
    """Immutable n-dimensional float array, optionally tracked by a tape."""

    __slots__ = ("_data", "requires_grad", "_tape", "_node")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        arr = np.array(data, dtype=dtype or _float_dtype(data), copy=True)
        arr.flags.writeable = False
        self._data = arr
        self.requires_grad = requires_grad
        self._tape: "Tape | None" = None
        self._node: int | None = None

    @classmethod
    def _wrap(
        cls,
        arr: np.ndarray,
        requires_grad: bool = False,
        tape: "Tape | None" = None,
        node: int | None = None,
    ) -> "Tensor":
        out = cls.__new__(cls)
        if arr.flags.writeable:
            arr.flags.writeable = False
        out._data = arr
        out.requires_grad = requires_grad
        out._tape = tape
        out._node = node
        return out

    @property
    def data(self) -> np.ndarray:
        return self._data

    @property
    def shape(self) -> tuple[int, ...]:
        return self._data.shape

    @property
    def dtype(self) -> np.dtype:
        return self._data.dtype

    @property
    def size(self) -> int:
        return int(self._data.size)

    @property
    def ndim(self) -> int:
        return self._data.ndim

    def numpy(self) -> np.ndarray:
        return self._data.copy()

    def item(self) -> float:
        if self._data.size != 1:
            raise ContractError(
                f"item() needs a single-element tensor, got shape {self.shape}"
            )
        return float(self._data.reshape(-1)[0])

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, dtype={self.dtype}, requires_grad={self.requires_grad})"


class Parameter:
    """Named trainable tensor with a gradient accumulator of the same shape."""

    __slots__ = ("name", "value", "grad")

    def __init__(self, name: str, value: np.ndarray):
        self.name = name
        self.value = Tensor(value, requires_grad=True)
        self.grad = np.zeros(self.value.shape, dtype=self.value.dtype)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    @property
    def size(self) -> int:
        return self.value.size

    def assign(self, new_value: np.ndarray) -> None:
        """Replace the value with a fresh tensor; shape is fixed for life."""
        if tuple(new_value.shape) != self.shape:
            raise ShapeError(
                f"Parameter {self.name}: cannot assign shape {tuple(new_value.shape)} "
                f"to a parameter of shape {self.shape}"
            )
        self.value = Tensor(new_value, requires_grad=True, dtype=self.value.dtype)

    def accumulate(self, grad: np.ndarray) -> None:
        self.grad += grad

    def zero_grad(self) -> None:
        self.grad = np.zeros(self.shape, dtype=self.value.dtype)

    def __repr__(self) -> str:
        return f"Parameter({self.name!r}, shape={self.shape})"


Operand = Tensor | Parameter


@dataclass(frozen=True)
class _Node:
    op: str
    parents: tuple[int, ...]
    backward: BackwardFn | None


_ACTIVE_TAPE: ContextVar["Tape | None"] = ContextVar("active_tape", default=None)


class Tape:
    """
    Append-only record of operations for one forward pass.

    Node order is creation order, so every node's parents precede it and
    backward can simply walk the list in reverse.
    """

    def __init__(self):
        self.nodes: list[_Node] = []
        self._leaf_ids: dict[int, int] = {}
        self._leaf_refs: list[Tensor] = []
        self._leaf_params: dict[int, Parameter] = {}
        self._leaf_grads: dict[int, np.ndarray] = {}
        self._token = None

    def __enter__(self) -> "Tape":
        self._token = _ACTIVE_TAPE.set(self)
        return self

    def __exit__(self, *exc) -> None:
        if self._token is not None:
            _ACTIVE_TAPE.reset(self._token)
            self._token = None

    def _node_id(self, operand: Operand) -> int | None:
        if isinstance(operand, Parameter):
            tensor, param = operand.value, operand
        else:
            tensor, param = operand, None
        if tensor._tape is self and tensor._node is not None:
            return tensor._node
        if not tensor.requires_grad:
            return None
        key = id(tensor)
        if key not in self._leaf_ids:
            node_id = len(self.nodes)
            self.nodes.append(_Node("leaf", (), None))
            self._leaf_ids[key] = node_id
            self._leaf_refs.append(tensor)
            if param is not None:
                self._leaf_params[node_id] = param
        return self._leaf_ids[key]

    def record(
        self,
        op: str,
        inputs: Sequence[Operand],
        out: np.ndarray,
        backward: BackwardFn,
    ) -> Tensor:
        parents = tuple(
            -1 if node_id is None else node_id
            for node_id in (self._node_id(x) for x in inputs)
        )
        node_id = len(self.nodes)
        self.nodes.append(_Node(op, parents, backward))
        return Tensor._wrap(out, requires_grad=True, tape=self, node=node_id)

    def grad(self, tensor: Tensor) -> np.ndarray | None:
        """Gradient accumulated for a non-parameter leaf tensor, if any."""
        node_id = self._leaf_ids.get(id(tensor))
        if node_id is None:
            return None
        return self._leaf_grads.get(node_id)

    def backward(self, loss: Tensor) -> None:
        if loss._tape is not self or loss._node is None:
            raise ContractError("backward() needs a loss recorded on this tape")
        grads: dict[int, np.ndarray] = {loss._node: np.ones(loss.shape, loss.dtype)}
        for node_id in range(loss._node, -1, -1):
            g = grads.pop(node_id, None)
            if g is None:
                continue
            node = self.nodes[node_id]
            if node.backward is None:
                param = self._leaf_params.get(node_id)
                if param is not None:
                    param.accumulate(g)
                elif node_id in self._leaf_grads:
                    self._leaf_grads[node_id] = self._leaf_grads[node_id] + g
                else:
                    self._leaf_grads[node_id] = g
                continue
            for parent, parent_grad in zip(node.parents, node.backward(g)):
                if parent < 0 or parent_grad is None:
                    continue
                if parent in grads:
                    grads[parent] = grads[parent] + parent_grad
                else:
                    grads[parent] = parent_grad


def backward(loss: Tensor) -> None:
    """
    Reverse-mode accumulation from a scalar loss into every Parameter.grad.

    Gradients accumulate: calling twice without `zero_grad` adds the
    contributions twice. Parameters the loss does not depend on keep
    whatever they held (zeros after a reset).
    """
    if loss.size != 1:
        raise ContractError(f"backward() needs a scalar loss, got shape {loss.shape}")
    if loss._tape is None:
        raise ContractError("backward() needs a loss computed under an active Tape")
    loss._tape.backward(loss)


def zero_grad(params: Iterable[Parameter]) -> None:
    for param in params:
        param.zero_grad()


def as_array(x: Operand) -> np.ndarray:
    return x.value.data if isinstance(x, Parameter) else x.data


def _requires_grad(x: Operand) -> bool:
    return isinstance(x, Parameter) or x.requires_grad


def apply_op(
    op: str,
    inputs: Sequence[Operand],
    out: np.ndarray,
    backward_fn: BackwardFn,
) -> Tensor:
    """Wrap a forward result, recording it when a tape is active and needed."""
    tape = _ACTIVE_TAPE.get()
    if tape is None or not any(_requires_grad(x) for x in inputs):
        return Tensor._wrap(out)
    return tape.record(op, inputs, out, backward_fn)


def unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum out broadcast dimensions so grad matches shape."""
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def matmul(a: Operand, b: Operand) -> Tensor:
    """Matrix product over the last two axes, leading axes broadcast."""
    a_arr, b_arr = as_array(a), as_array(b)
    if a_arr.ndim < 2 or b_arr.ndim < 2 or a_arr.shape[-1] != b_arr.shape[-2]:
        raise ShapeError(
            f"matmul: inner extents do not match, a{a_arr.shape} vs b{b_arr.shape}"
        )
    out = np.matmul(a_arr, b_arr)

    def _backward(g: np.ndarray):
        da = np.matmul(g, np.swapaxes(b_arr, -1, -2))
        db = np.matmul(np.swapaxes(a_arr, -1, -2), g)
        return unbroadcast(da, a_arr.shape), unbroadcast(db, b_arr.shape)

    return apply_op("matmul", (a, b), out, _backward)


def add(a: Operand, b: Operand) -> Tensor:
    """Elementwise sum; b may broadcast over the leading axes of a."""
    a_arr, b_arr = as_array(a), as_array(b)
    try:
        out = a_arr + b_arr
    except ValueError as exc:
        raise ShapeError(f"add: shapes {a_arr.shape} and {b_arr.shape} do not broadcast") from exc

    def _backward(g: np.ndarray):
        return unbroadcast(g, a_arr.shape), unbroadcast(g, b_arr.shape)

    return apply_op("add", (a, b), out, _backward)


def scale(x: Operand, factor: float) -> Tensor:
    arr = as_array(x)
    out = arr * arr.dtype.type(factor)

    def _backward(g: np.ndarray):
        return (g * g.dtype.type(factor),)

    return apply_op("scale", (x,), out, _backward)


def reshape(x: Operand, shape: tuple[int, ...]) -> Tensor:
    arr = as_array(x)
    try:
        out = arr.reshape(shape)
    except ValueError as exc:
        raise ShapeError(f"reshape: cannot view {arr.shape} as {shape}") from exc

    def _backward(g: np.ndarray):
        return (g.reshape(arr.shape),)

    return apply_op("reshape", (x,), out, _backward)


def swap_axes(x: Operand, axis1: int, axis2: int) -> Tensor:
    arr = as_array(x)
    out = np.ascontiguousarray(np.swapaxes(arr, axis1, axis2))

    def _backward(g: np.ndarray):
        return (np.swapaxes(g, axis1, axis2),)

    return apply_op("swap_axes", (x,), out, _backward)


def take_rows(x: Operand, index: np.ndarray) -> Tensor:
    """Gather along the token axis (-2); used to permute patch rows."""
    arr = as_array(x)
    index = np.asarray(index)
    out = np.take(arr, index, axis=-2)

    def _backward(g: np.ndarray):
        dx = np.zeros_like(arr)
        np.add.at(np.moveaxis(dx, -2, 0), index, np.moveaxis(g, -2, 0))
        return (dx,)

    return apply_op("take_rows", (x,), out, _backward)


def sum_all(x: Operand) -> Tensor:
    arr = as_array(x)
    out = np.asarray(arr.sum(), dtype=arr.dtype)

    def _backward(g: np.ndarray):
        return (np.broadcast_to(g, arr.shape).copy(),)

    return apply_op("sum", (x,), out, _backward)
