"""Dense numeric primitives: L2 normalization, cosine logits, softmax, entropy.

All functions compute in float64 regardless of input dtype and reject
NaN/Inf inputs. They are pure and safe to call concurrently.
"""

import numpy as np

from .errors import DimMismatch, NonFinite, NormError, ZeroNorm

NORM_EPSILON = 1e-12


def _as_f64(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise NonFinite(f"{name} contains NaN or Inf")
    return arr


def l2_normalize(v, eps: float = NORM_EPSILON) -> np.ndarray:
    """Scale a vector to unit L2 norm.

    Raises ZeroNorm when the norm is at or below ``eps``.
    """
    v = _as_f64(v, "vector")
    norm = float(np.linalg.norm(v))
    if norm <= eps:
        raise ZeroNorm(f"norm {norm:.3e} <= {eps:.3e}")
    return v / norm


def l2_normalize_rows(mat, eps: float = NORM_EPSILON) -> np.ndarray:
    """Row-wise unit normalization; reports the first degenerate row."""
    mat = _as_f64(mat, "matrix")
    norms = np.linalg.norm(mat, axis=1)
    bad = np.flatnonzero(norms <= eps)
    if bad.size:
        raise ZeroNorm(f"row {bad[0]} has norm {norms[bad[0]]:.3e} <= {eps:.3e}")
    return mat / norms[:, None]


def cosine_logits(prototypes, x, logit_scale: float) -> np.ndarray:
    """Scaled cosine similarities between each prototype row and ``x``.

    Both operands must already be unit-norm (within 1e-6), so the dot
    product is the cosine; the result is ``logit_scale * P @ x``.
    """
    prototypes = _as_f64(prototypes, "prototypes")
    x = _as_f64(x, "x")
    if prototypes.ndim != 2 or x.ndim != 1:
        raise DimMismatch("expected prototypes (C, d) and x (d,)")
    if prototypes.shape[1] != x.shape[0]:
        raise DimMismatch(
            f"prototype dim {prototypes.shape[1]} != vector dim {x.shape[0]}"
        )
    if logit_scale <= 0:
        raise ValueError("logit_scale must be positive")
    _require_unit_rows(prototypes, "prototypes")
    if abs(np.linalg.norm(x) - 1.0) > 1e-6:
        raise NormError(f"x has norm {np.linalg.norm(x):.8f}, expected 1")
    return logit_scale * (prototypes @ x)


def cosine_logits_rows(prototypes, xs, logit_scale: float) -> np.ndarray:
    """Batched variant: rows of ``xs`` against all prototypes, (n, C)."""
    prototypes = _as_f64(prototypes, "prototypes")
    xs = _as_f64(xs, "views")
    if prototypes.shape[1] != xs.shape[1]:
        raise DimMismatch(
            f"prototype dim {prototypes.shape[1]} != view dim {xs.shape[1]}"
        )
    if logit_scale <= 0:
        raise ValueError("logit_scale must be positive")
    return logit_scale * (xs @ prototypes.T)


def softmax(z) -> np.ndarray:
    """Max-subtracted stable softmax over a logit vector."""
    z = _as_f64(z, "logits")
    shifted = z - z.max()
    e = np.exp(shifted)
    return e / e.sum()


def softmax_rows(z) -> np.ndarray:
    """Row-wise stable softmax over a (n, C) logit matrix."""
    z = _as_f64(z, "logits")
    shifted = z - z.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def entropy(p) -> float:
    """Shannon entropy in nats, with 0*ln(0) taken as 0.

    Input must be a probability distribution: entries in [0, 1] summing
    to 1 within 1e-9.
    """
    p = _as_f64(p, "probabilities")
    validate_prob_dist(p)
    return _entropy_unchecked(p)


def entropy_rows(p) -> np.ndarray:
    """Row-wise entropy of a matrix of distributions (validated per row)."""
    p = _as_f64(p, "probabilities")
    if np.any(p < -1e-12) or np.any(p > 1 + 1e-12):
        raise ValueError("probabilities outside [0, 1]")
    sums = p.sum(axis=1)
    if np.any(np.abs(sums - 1.0) > 1e-9):
        raise ValueError("rows do not sum to 1 within 1e-9")
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, p * np.log(p), 0.0)
    return -terms.sum(axis=1)


def validate_prob_dist(p: np.ndarray) -> None:
    if p.ndim != 1:
        raise ValueError("distribution must be one-dimensional")
    if np.any(p < -1e-12) or np.any(p > 1 + 1e-12):
        raise ValueError("probabilities outside [0, 1]")
    if abs(float(p.sum()) - 1.0) > 1e-9:
        raise ValueError(f"probabilities sum to {p.sum():.12f}, expected 1")


def _entropy_unchecked(p: np.ndarray) -> float:
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, p * np.log(p), 0.0)
    return float(-terms.sum())


def _require_unit_rows(mat: np.ndarray, name: str, tol: float = 1e-6) -> None:
    norms = np.linalg.norm(mat, axis=1)
    bad = np.flatnonzero(np.abs(norms - 1.0) > tol)
    if bad.size:
        raise NormError(
            f"{name} row {bad[0]} has norm {norms[bad[0]]:.8f}, expected 1"
        )
