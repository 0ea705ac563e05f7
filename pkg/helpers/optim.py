"""Adam with bias correction over named Parameters."""

import logging
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field

import numpy as np

from helpers.errors import ConfigurationError, ContractError, NonFiniteError
from helpers.logging import MAIN_LOGGER_NAME
from helpers.tensor import Parameter

logger = logging.getLogger(MAIN_LOGGER_NAME)


@dataclass(frozen=True)
class AdamConfig:
    learning_rate: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ConfigurationError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ConfigurationError("Adam betas must lie in [0, 1)")
        if self.eps <= 0:
            raise ConfigurationError(f"Adam eps must be positive, got {self.eps}")


@dataclass
class AdamState:
    """First and second moments per parameter name."""

    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    t: int = 0


def check_finite_grads(params: Iterable[Parameter]) -> None:
    for param in params:
        if not np.all(np.isfinite(param.grad)):
            raise NonFiniteError(f"non-finite gradient in parameter {param.name}")


def adam_step(
    params: Sequence[Parameter],
    state: AdamState,
    t: int,
    config: AdamConfig,
) -> AdamState:
    """
    One Adam update using each parameter's accumulated `grad`.

    Every gradient is checked before any parameter changes, so a
    non-finite gradient leaves the whole model untouched.

    Raises:
        ContractError: if t < 1.
        NonFiniteError: naming the first parameter with a NaN/Inf gradient.
    """
    if t < 1:
        raise ContractError(f"Adam step index starts at 1, got {t}")
    check_finite_grads(params)
    bc1 = 1.0 - config.beta1**t
    bc2 = 1.0 - config.beta2**t
    for param in params:
        g = param.grad
        m = state.m.get(param.name)
        v = state.v.get(param.name)
        if m is None or v is None:
            m = np.zeros_like(g)
            v = np.zeros_like(g)
        m = config.beta1 * m + (1.0 - config.beta1) * g
        v = config.beta2 * v + (1.0 - config.beta2) * (g * g)
        state.m[param.name] = m.astype(g.dtype, copy=False)
        state.v[param.name] = v.astype(g.dtype, copy=False)
        update = config.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + config.eps)
        param.assign((param.value.data - update).astype(param.value.dtype, copy=False))
    state.t = t
    return state


class Adam:
    def __init__(self, params: Iterable[Parameter], config: AdamConfig | None = None):
        self.params = list(params)
        self.config = config or AdamConfig()
        self.state = AdamState()

    def step(self) -> None:
        adam_step(self.params, self.state, self.state.t + 1, self.config)

    def zero_grad(self) -> None:
        for param in self.params:
            param.zero_grad()
