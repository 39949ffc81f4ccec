"""Learnable prototype modulations: per-class/shared shift, scale, FiLM.

A transform maps (prototypes, params) to modulated unit-norm prototypes.
Params are episode-local: one fresh instance per test sample, never shared
between concurrent episodes.
"""

import enum
from dataclasses import dataclass

import numpy as np

from .errors import ShapeMismatch, ZeroNorm


class TransformKind(enum.Enum):
    PER_CLASS_SHIFT = "shift"
    SHARED_SHIFT = "shared-shift"
    SCALE = "scale"
    SCALE_AND_SHIFT = "scale-shift"
    FILM = "film"

    @classmethod
    def from_name(cls, name: str) -> "TransformKind":
        for kind in cls:
            if kind.value == name:
                return kind
        names = ", ".join(k.value for k in cls)
        raise ValueError(f"unknown transform {name!r}; expected one of {names}")


@dataclass(frozen=True)
class ParamInit:
    shift_init: float = 0.0
    scale_init: float = 1.0
    film_init_sigma: float = 0.02

    def __post_init__(self):
        if self.film_init_sigma < 0:
            raise ValueError("film_init_sigma must be >= 0")


@dataclass
class TransformParams:
    """Learnable arrays for one episode; only the fields the kind demands.

    shift: (C, d) for per-class kinds, (d,) for the shared kind.
    scale: (C, d) multiplicative factors.
    film_weight: (2d, d) affine map producing [gamma, beta]; film_bias: (2d,).
    """

    kind: TransformKind
    shift: np.ndarray | None = None
    scale: np.ndarray | None = None
    film_weight: np.ndarray | None = None
    film_bias: np.ndarray | None = None

    def arrays(self) -> list[tuple[str, np.ndarray]]:
        """Learnable arrays in a fixed, deterministic order."""
        out = []
        for name in ("shift", "scale", "film_weight", "film_bias"):
            arr = getattr(self, name)
            if arr is not None:
                out.append((name, arr))
        return out

    def copy(self) -> "TransformParams":
        kwargs = {name: arr.copy() for name, arr in self.arrays()}
        return TransformParams(kind=self.kind, **kwargs)


def init_params(
    kind: TransformKind,
    n_classes: int,
    dim: int,
    init: ParamInit = ParamInit(),
    seed: int = 0,
) -> TransformParams:
    """Fresh params at their documented starting point.

    Shifts start constant (default 0), scales constant (default 1); FiLM
    weights are Gaussian(0, sigma^2) from ``seed`` with zero bias, so FiLM
    is the only kind that is not the identity at initialization.
    """
    if n_classes < 1 or dim < 1:
        raise ValueError("n_classes and dim must be >= 1")
    if kind is TransformKind.PER_CLASS_SHIFT:
        return TransformParams(kind, shift=np.full((n_classes, dim), init.shift_init))
    if kind is TransformKind.SHARED_SHIFT:
        return TransformParams(kind, shift=np.full(dim, init.shift_init))
    if kind is TransformKind.SCALE:
        return TransformParams(kind, scale=np.full((n_classes, dim), init.scale_init))
    if kind is TransformKind.SCALE_AND_SHIFT:
        return TransformParams(
            kind,
            shift=np.full((n_classes, dim), init.shift_init),
            scale=np.full((n_classes, dim), init.scale_init),
        )
    rng = np.random.default_rng(seed)
    return TransformParams(
        TransformKind.FILM,
        film_weight=rng.normal(0.0, init.film_init_sigma, size=(2 * dim, dim)),
        film_bias=np.zeros(2 * dim),
    )


def modulate(prototypes: np.ndarray, params: TransformParams) -> np.ndarray:
    """Modulated prototype rows before re-normalization."""
    p = np.asarray(prototypes, dtype=np.float64)
    _check_shapes(p, params)
    kind = params.kind
    if kind is TransformKind.PER_CLASS_SHIFT:
        return p + params.shift
    if kind is TransformKind.SHARED_SHIFT:
        return p + params.shift[None, :]
    if kind is TransformKind.SCALE:
        return p * params.scale
    if kind is TransformKind.SCALE_AND_SHIFT:
        return p * params.scale + params.shift
    gamma, beta = film_factors(p, params)
    return gamma * p + beta


def film_factors(prototypes: np.ndarray, params: TransformParams):
    """Per-class (gamma, beta) rows produced by the FiLM affine map."""
    affine = prototypes @ params.film_weight.T + params.film_bias
    d = prototypes.shape[1]
    return affine[:, :d], affine[:, d:]


def apply_transform(prototypes: np.ndarray, params: TransformParams) -> np.ndarray:
    """Modulate and re-normalize each prototype row.

    Raises ZeroNorm naming the class row whose modulated vector collapsed.
    """
    u = modulate(prototypes, params)
    norms = np.linalg.norm(u, axis=1)
    bad = np.flatnonzero(norms <= 1e-12)
    if bad.size:
        raise ZeroNorm(f"transformed prototype for class {bad[0]} has near-zero norm")
    return u / norms[:, None]


def _check_shapes(prototypes: np.ndarray, params: TransformParams) -> None:
    n_classes, dim = prototypes.shape
    kind = params.kind
    if kind is TransformKind.SHARED_SHIFT:
        if params.shift is None or params.shift.shape != (dim,):
            raise ShapeMismatch(f"shared shift must have shape ({dim},)")
        return
    if kind is TransformKind.FILM:
        if params.film_weight is None or params.film_weight.shape != (2 * dim, dim):
            raise ShapeMismatch(f"film_weight must have shape ({2 * dim}, {dim})")
        if params.film_bias is None or params.film_bias.shape != (2 * dim,):
            raise ShapeMismatch(f"film_bias must have shape ({2 * dim},)")
        return
    expected = (n_classes, dim)
    if kind in (TransformKind.PER_CLASS_SHIFT, TransformKind.SCALE_AND_SHIFT):
        if params.shift is None or params.shift.shape != expected:
            raise ShapeMismatch(f"shift must have shape {expected}")
    if kind in (TransformKind.SCALE, TransformKind.SCALE_AND_SHIFT):
        if params.scale is None or params.scale.shape != expected:
            raise ShapeMismatch(f"scale must have shape {expected}")
