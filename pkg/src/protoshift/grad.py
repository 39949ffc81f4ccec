"""Marginal-entropy objective and its hand-derived parameter gradient.

The loss: modulate prototypes, score every view by scaled cosine softmax,
keep the k lowest-entropy view distributions (ties broken by lower view
index), average them, and take the Shannon entropy of that average.

The gradient treats the selected index set as a constant, so gradients
flow only through the selected views; ``finite_diff_grad`` checks the
analytic path against central differences of the selection-pinned loss.
"""

import time
from dataclasses import dataclass

import numpy as np

from .errors import InvalidK, ZeroNorm
from .numkernel import entropy_rows, softmax_rows, _entropy_unchecked
from .transforms import (
    ParamInit,
    TransformKind,
    TransformParams,
    init_params,
    modulate,
)


@dataclass
class LossReport:
    loss: float
    selected_view_indices: list[int]
    marginal: np.ndarray
    per_view_entropies: np.ndarray


@dataclass
class GradReport:
    grads: dict[str, np.ndarray]
    loss_report: LossReport


def marginal_entropy_loss(
    prototypes: np.ndarray,
    params: TransformParams,
    views: np.ndarray,
    logit_scale: float,
    k: int,
) -> LossReport:
    """Entropy of the mean distribution over the k most confident views.

    ``selected_view_indices`` are ordered by ascending entropy, then by
    ascending view index on ties.
    """
    views = np.asarray(views, dtype=np.float64)
    n = views.shape[0]
    if not 1 <= k <= n:
        raise InvalidK(f"k={k} outside [1, {n}]")
    transformed = _normalized_transform(prototypes, params)[0]
    logits = logit_scale * (views @ transformed.T)
    dists = softmax_rows(logits)
    entropies = entropy_rows(dists)
    selected = np.argsort(entropies, kind="stable")[:k]
    marginal = dists[selected].mean(axis=0)
    return LossReport(
        loss=_entropy_unchecked(marginal),
        selected_view_indices=[int(i) for i in selected],
        marginal=marginal,
        per_view_entropies=entropies,
    )


def pinned_marginal_entropy(
    prototypes: np.ndarray,
    params: TransformParams,
    views: np.ndarray,
    selected: list[int],
    logit_scale: float,
) -> float:
    """The loss with the view-selection frozen to ``selected``."""
    transformed = _normalized_transform(prototypes, params)[0]
    logits = logit_scale * (np.asarray(views, dtype=np.float64)[selected] @ transformed.T)
    marginal = softmax_rows(logits).mean(axis=0)
    return _entropy_unchecked(marginal)


def marginal_entropy_grad(
    prototypes: np.ndarray,
    params: TransformParams,
    views: np.ndarray,
    logit_scale: float,
    k: int,
) -> GradReport:
    """Analytic gradient of the loss w.r.t. every learnable array.

    Chain, with the selected index set S held constant:
      dL/dmarginal_c = -(ln marginal_c + 1)
      dL/dlogits_ic  = (1/k) q_ic (dL/dm_c - <dL/dm, q_i>)   for i in S
      dL/dp'_c       = scale * sum_i dL/dlogits_ic * x_i
      dL/du_c        = (dL/dp'_c - <dL/dp'_c, p'_c> p'_c) / ||u_c||
    then dL/du maps onto the params of each transform kind.
    """
    prototypes = np.asarray(prototypes, dtype=np.float64)
    views = np.asarray(views, dtype=np.float64)
    n = views.shape[0]
    if not 1 <= k <= n:
        raise InvalidK(f"k={k} outside [1, {n}]")

    transformed, raw_norms = _normalized_transform(prototypes, params)
    logits = logit_scale * (views @ transformed.T)
    dists = softmax_rows(logits)
    entropies = entropy_rows(dists)
    selected = np.argsort(entropies, kind="stable")[:k]
    q_sel = dists[selected]
    x_sel = views[selected]
    marginal = q_sel.mean(axis=0)

    # Classes with exactly zero marginal mass have q_ic == 0 for every
    # selected view, so their (clamped) log never enters the product.
    safe_marginal = np.where(marginal > 0, marginal, 1.0)
    d_marginal = -(np.log(safe_marginal) + 1.0)

    inner = q_sel @ d_marginal
    d_logits = (q_sel * (d_marginal[None, :] - inner[:, None])) / k
    d_transformed = logit_scale * (d_logits.T @ x_sel)

    radial = np.sum(d_transformed * transformed, axis=1, keepdims=True)
    d_raw = (d_transformed - radial * transformed) / raw_norms[:, None]

    grads = _param_grads(prototypes, params, d_raw)
    report = LossReport(
        loss=_entropy_unchecked(marginal),
        selected_view_indices=[int(i) for i in selected],
        marginal=marginal,
        per_view_entropies=entropies,
    )
    return GradReport(grads=grads, loss_report=report)


def finite_diff_grad(
    prototypes: np.ndarray,
    params: TransformParams,
    views: np.ndarray,
    logit_scale: float,
    k: int,
    h: float = 1e-5,
) -> GradReport:
    """Central-difference gradient of the selection-pinned loss.

    The selection is frozen at the unperturbed point so that perturbations
    cannot flip which views are selected, which would invalidate the
    comparison against the analytic gradient.
    """
    if h <= 0:
        raise ValueError("step size h must be positive")
    base = marginal_entropy_loss(prototypes, params, views, logit_scale, k)
    selected = base.selected_view_indices

    grads: dict[str, np.ndarray] = {}
    for name, arr in params.arrays():
        grad = np.zeros_like(arr)
        flat_arr = arr.reshape(-1)
        flat_grad = grad.reshape(-1)
        for j in range(flat_arr.size):
            orig = flat_arr[j]
            flat_arr[j] = orig + h
            up = pinned_marginal_entropy(prototypes, params, views, selected, logit_scale)
            flat_arr[j] = orig - h
            down = pinned_marginal_entropy(prototypes, params, views, selected, logit_scale)
            flat_arr[j] = orig
            flat_grad[j] = (up - down) / (2.0 * h)
        grads[name] = grad
    return GradReport(grads=grads, loss_report=base)


def support_cross_entropy_grad(
    class_embeddings: np.ndarray,
    params: TransformParams,
    support: np.ndarray,
    labels: np.ndarray,
    logit_scale: float,
) -> tuple[float, dict[str, np.ndarray]]:
    """Mean cross-entropy over labeled support embeddings, plus its gradient.

    Same chain as the entropy objective but with dL/dlogits_ic =
    (q_ic - [c == label_i]) / m; used by the support-set adaptation mode.
    """
    class_embeddings = np.asarray(class_embeddings, dtype=np.float64)
    support = np.asarray(support, dtype=np.float64)
    labels = np.asarray(labels)
    m = support.shape[0]

    transformed, raw_norms = _normalized_transform(class_embeddings, params)
    logits = logit_scale * (support @ transformed.T)
    dists = softmax_rows(logits)
    picked = dists[np.arange(m), labels]
    loss = float(-np.log(np.maximum(picked, 1e-300)).mean())

    d_logits = dists.copy()
    d_logits[np.arange(m), labels] -= 1.0
    d_logits /= m
    d_transformed = logit_scale * (d_logits.T @ support)
    radial = np.sum(d_transformed * transformed, axis=1, keepdims=True)
    d_raw = (d_transformed - radial * transformed) / raw_norms[:, None]
    return loss, _param_grads(class_embeddings, params, d_raw)


def max_rel_error(analytic: dict[str, np.ndarray], numeric: dict[str, np.ndarray]) -> float:
    """Worst per-coordinate error, relative above unit magnitude.

    err_j = |a_j - f_j| / max(1, |a_j|, |f_j|): relative for large entries,
    absolute below magnitude 1, so near-zero coordinates do not blow up the
    ratio on finite-difference noise.
    """
    worst = 0.0
    for name, a in analytic.items():
        f = numeric[name]
        denom = np.maximum(1.0, np.maximum(np.abs(a), np.abs(f)))
        worst = max(worst, float((np.abs(a - f) / denom).max()))
    return worst


def random_instance(rng: np.random.Generator, kind: TransformKind):
    """A random well-conditioned problem for gradient checking.

    Moderate logit scales keep softmax away from saturation, where
    finite differences lose all significant digits.
    """
    n_classes = int(rng.integers(2, 11))
    dim = int(rng.integers(4, 33))
    n_views = int(rng.integers(1, 9))
    k = int(rng.integers(1, n_views + 1))
    logit_scale = float(rng.uniform(0.5, 20.0))

    prototypes = _random_unit_rows(rng, n_classes, dim)
    views = _random_unit_rows(rng, n_views, dim)
    params = init_params(kind, n_classes, dim, ParamInit(), seed=int(rng.integers(2**31)))
    for _, arr in params.arrays():
        arr += rng.normal(0.0, 0.1, size=arr.shape)
    return prototypes, params, views, logit_scale, k


def run_gradcheck(trials: int = 100, seed: int = 0, h: float = 1e-5) -> dict:
    """Randomized analytic-vs-finite-difference sweep over every kind.

    Returns the overall and per-kind max relative error plus wall time.
    """
    rng = np.random.default_rng(seed)
    kinds = list(TransformKind)
    per_kind = {kind.value: 0.0 for kind in kinds}
    start = time.monotonic()
    for trial in range(trials):
        kind = kinds[trial % len(kinds)]
        prototypes, params, views, logit_scale, k = random_instance(rng, kind)
        analytic = marginal_entropy_grad(prototypes, params, views, logit_scale, k)
        numeric = finite_diff_grad(prototypes, params, views, logit_scale, k, h)
        err = max_rel_error(analytic.grads, numeric.grads)
        per_kind[kind.value] = max(per_kind[kind.value], err)
    return {
        "trials": trials,
        "max_rel_error": max(per_kind.values()),
        "per_kind": per_kind,
        "seconds": time.monotonic() - start,
    }


def _normalized_transform(prototypes, params) -> tuple[np.ndarray, np.ndarray]:
    raw = modulate(np.asarray(prototypes, dtype=np.float64), params)
    norms = np.linalg.norm(raw, axis=1)
    bad = np.flatnonzero(norms <= 1e-12)
    if bad.size:
        raise ZeroNorm(f"transformed prototype for class {bad[0]} has near-zero norm")
    return raw / norms[:, None], norms


def _param_grads(prototypes, params, d_raw) -> dict[str, np.ndarray]:
    kind = params.kind
    if kind is TransformKind.PER_CLASS_SHIFT:
        return {"shift": d_raw.copy()}
    if kind is TransformKind.SHARED_SHIFT:
        return {"shift": d_raw.sum(axis=0)}
    if kind is TransformKind.SCALE:
        return {"scale": d_raw * prototypes}
    if kind is TransformKind.SCALE_AND_SHIFT:
        return {"scale": d_raw * prototypes, "shift": d_raw.copy()}
    d_gamma = d_raw * prototypes
    d_beta = d_raw
    d_affine = np.concatenate([d_gamma, d_beta], axis=1)
    return {
        "film_weight": d_affine.T @ prototypes,
        "film_bias": d_affine.sum(axis=0),
    }


def _random_unit_rows(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    mat = rng.normal(size=(rows, cols))
    return mat / np.linalg.norm(mat, axis=1, keepdims=True)
