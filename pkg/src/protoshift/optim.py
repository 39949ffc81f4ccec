"""Episode-local parameter updates: AdamW (default) and plain SGD.

AdamW uses decoupled weight decay: the decay term is applied to the
parameters directly, scaled by lr, independent of the adaptive step.
State lives for one episode only and is never shared.
"""

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeMismatch
from .transforms import TransformParams


class OptimKind(enum.Enum):
    ADAMW = "adamw"
    SGD = "sgd"

    @classmethod
    def from_name(cls, name: str) -> "OptimKind":
        for kind in cls:
            if kind.value == name:
                return kind
        raise ValueError(f"unknown optimizer {name!r}; expected adamw or sgd")


@dataclass(frozen=True)
class OptimConfig:
    kind: OptimKind = OptimKind.ADAMW
    lr: float = 5e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("betas must lie in [0, 1)")
        if self.eps <= 0:
            raise ValueError("eps must be positive")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be >= 0")


@dataclass
class OptimState:
    step_count: int = 0
    first_moment: dict[str, np.ndarray] = field(default_factory=dict)
    second_moment: dict[str, np.ndarray] = field(default_factory=dict)


def init_state(params: TransformParams) -> OptimState:
    state = OptimState()
    for name, arr in params.arrays():
        state.first_moment[name] = np.zeros_like(arr)
        state.second_moment[name] = np.zeros_like(arr)
    return state


def step(
    params: TransformParams,
    grads: dict[str, np.ndarray],
    state: OptimState,
    cfg: OptimConfig,
) -> None:
    """One in-place update of every learnable array.

    SGD: p <- p - lr * g. AdamW: bias-corrected moments with the decoupled
    decay applied before the adaptive term.
    """
    named = params.arrays()
    if {n for n, _ in named} != set(grads):
        raise ShapeMismatch(
            f"gradient keys {sorted(grads)} do not match params "
            f"{sorted(n for n, _ in named)}"
        )
    for name, arr in named:
        if grads[name].shape != arr.shape:
            raise ShapeMismatch(
                f"{name}: gradient shape {grads[name].shape} != param shape {arr.shape}"
            )

    if cfg.kind is OptimKind.SGD:
        for name, arr in named:
            arr -= cfg.lr * grads[name]
        state.step_count += 1
        return

    state.step_count += 1
    t = state.step_count
    bias1 = 1.0 - cfg.beta1**t
    bias2 = 1.0 - cfg.beta2**t
    for name, arr in named:
        g = grads[name]
        m = state.first_moment[name]
        v = state.second_moment[name]
        m *= cfg.beta1
        m += (1.0 - cfg.beta1) * g
        v *= cfg.beta2
        v += (1.0 - cfg.beta2) * g * g
        if cfg.weight_decay:
            arr -= cfg.lr * cfg.weight_decay * arr
        arr -= cfg.lr * (m / bias1) / (np.sqrt(v / bias2) + cfg.eps)
