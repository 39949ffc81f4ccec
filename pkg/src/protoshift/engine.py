"""Per-sample adaptation episodes and the dataset driver.

Each test sample gets a fresh set of transform params, optimized for a
configured number of steps on the marginal-entropy objective over its
augmented views, then classified from view 0 with the shifted prototypes.
Episodes are fully independent: no state survives from one sample to the
next, so results do not depend on dataset order or worker count.
"""

import hashlib
import math
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional

import numpy as np

from .errors import DimMismatch, ZeroNorm
from .grad import (
    marginal_entropy_grad,
    marginal_entropy_loss,
    support_cross_entropy_grad,
)
from .numkernel import l2_normalize, l2_normalize_rows
from .optim import OptimConfig, init_state, step
from .prototypes import PrototypeSet
from .transforms import ParamInit, TransformKind, apply_transform, init_params


@dataclass(frozen=True)
class EngineConfig:
    logit_scale: float = 100.0
    selection_ratio: float = 0.1
    n_views: int = 64
    steps: int = 1
    transform: TransformKind = TransformKind.PER_CLASS_SHIFT
    optim: OptimConfig = field(default_factory=OptimConfig)
    param_init: ParamInit = field(default_factory=ParamInit)
    seed: int = 0

    def __post_init__(self):
        if self.logit_scale <= 0:
            raise ValueError("logit_scale must be positive")
        if not 0 < self.selection_ratio <= 1:
            raise ValueError("selection_ratio must lie in (0, 1]")
        if self.n_views < 1:
            raise ValueError("n_views must be >= 1")
        if self.steps < 0:
            raise ValueError("steps must be >= 0")

    def k_for(self, n_views: int) -> int:
        """Selection count: floor(ratio * n), clamped to at least 1."""
        return max(1, math.floor(self.selection_ratio * n_views))


@dataclass
class ViewBatch:
    """All views of one test sample; row 0 is the original image.

    ``label`` is evaluation-only metadata, never visible to adaptation.
    """

    sample_id: str
    views: np.ndarray
    label: Optional[int] = None

    def __post_init__(self):
        self.views = np.asarray(self.views, dtype=np.float64)
        if self.views.ndim != 2 or self.views.shape[0] < 1:
            raise ValueError("views must be a non-empty (n, d) matrix")


@dataclass
class Prediction:
    sample_id: str
    predicted_class: int
    zero_shot_class: int
    pre_entropy: float
    post_entropy: float
    selected_views: list[int]
    fallback: bool = False


@dataclass
class RunSummary:
    samples: int = 0
    labeled: int = 0
    correct: int = 0
    fallbacks: int = 0
    mean_pre_entropy: float = float("nan")
    mean_post_entropy: float = float("nan")

    @property
    def accuracy(self) -> Optional[float]:
        return self.correct / self.labeled if self.labeled else None


@dataclass
class SupportSet:
    """A binary episode: labeled positive/negative embeddings plus a query."""

    positives: np.ndarray
    negatives: np.ndarray
    query: np.ndarray
    steps: int = 64
    class_init_sigma: float = 0.02

    def __post_init__(self):
        self.positives = l2_normalize_rows(np.asarray(self.positives, dtype=np.float64))
        self.negatives = l2_normalize_rows(np.asarray(self.negatives, dtype=np.float64))
        self.query = l2_normalize(np.asarray(self.query, dtype=np.float64))
        if self.positives.shape[0] < 1 or self.negatives.shape[0] < 1:
            raise ValueError("positives and negatives must be non-empty")
        dims = {self.positives.shape[1], self.negatives.shape[1], self.query.shape[0]}
        if len(dims) != 1:
            raise DimMismatch(f"support embeddings mix dimensions {sorted(dims)}")


POSITIVE, NEGATIVE = 0, 1


@dataclass
class BongardResult:
    predicted: int  # POSITIVE or NEGATIVE
    support_accuracy: float
    final_loss: float
    fallback: bool = False


def sample_seed(base_seed: int, sample_id: str) -> int:
    """Stable per-sample seed, independent of process and platform."""
    digest = hashlib.sha256(sample_id.encode("utf-8")).digest()
    return (base_seed * 0x1_0000_0001 + int.from_bytes(digest[:8], "little")) % 2**63


def adapt_one(prototypes: PrototypeSet, batch: ViewBatch, cfg: EngineConfig) -> Prediction:
    """One full adaptation episode for one sample.

    Fresh params are optimized for cfg.steps steps on all views; the final
    prediction scores view 0 only against the transformed prototypes. A
    ZeroNorm anywhere aborts the episode and falls back to the zero-shot
    prediction with the fallback flag set.
    """
    views = batch.views
    if views.shape[1] != prototypes.dim:
        raise DimMismatch(
            f"views dim {views.shape[1]} != prototype dim {prototypes.dim}"
        )
    proto_rows = prototypes.prototypes
    zero_shot_class = int(np.argmax(proto_rows @ views[0]))

    try:
        views = l2_normalize_rows(views)
        params = init_params(
            cfg.transform,
            prototypes.n_classes,
            prototypes.dim,
            cfg.param_init,
            seed=sample_seed(cfg.seed, batch.sample_id),
        )
        k = cfg.k_for(views.shape[0])
        state = init_state(params)
        pre_entropy = None
        for _ in range(cfg.steps):
            report = marginal_entropy_grad(
                proto_rows, params, views, cfg.logit_scale, k
            )
            if pre_entropy is None:
                pre_entropy = report.loss_report.loss
            step(params, report.grads, state, cfg.optim)
        final = marginal_entropy_loss(proto_rows, params, views, cfg.logit_scale, k)
        if pre_entropy is None:
            pre_entropy = final.loss
        transformed = apply_transform(proto_rows, params)
        predicted = int(np.argmax(transformed @ views[0]))
        return Prediction(
            sample_id=batch.sample_id,
            predicted_class=predicted,
            zero_shot_class=zero_shot_class,
            pre_entropy=pre_entropy,
            post_entropy=final.loss,
            selected_views=final.selected_view_indices,
        )
    except ZeroNorm:
        return Prediction(
            sample_id=batch.sample_id,
            predicted_class=zero_shot_class,
            zero_shot_class=zero_shot_class,
            pre_entropy=float("nan"),
            post_entropy=float("nan"),
            selected_views=[],
            fallback=True,
        )


def run_dataset(
    prototypes: PrototypeSet,
    batches: Iterable[ViewBatch],
    cfg: EngineConfig,
    workers: int = 1,
) -> Iterator[Prediction]:
    """Adapt every sample, yielding predictions in input order.

    With workers > 1 episodes run on a thread pool with a bounded window of
    in-flight samples, so unbounded input streams stay streamed; per-sample
    results are identical to the single-worker run because episodes share
    nothing.
    """
    if workers <= 1:
        for batch in batches:
            yield adapt_one(prototypes, batch, cfg)
        return
    window = workers * 4
    pending: deque = deque()
    with ThreadPoolExecutor(max_workers=workers) as pool:
        for batch in batches:
            pending.append(pool.submit(adapt_one, prototypes, batch, cfg))
            if len(pending) >= window:
                yield pending.popleft().result()
        while pending:
            yield pending.popleft().result()


def summarize(
    predictions: Iterable[Prediction],
    labels: Optional[dict[str, int]] = None,
) -> RunSummary:
    """Aggregate accuracy/entropy/fallback statistics over predictions."""
    summary = RunSummary()
    pre, post = [], []
    for p in predictions:
        summary.samples += 1
        if p.fallback:
            summary.fallbacks += 1
        else:
            pre.append(p.pre_entropy)
            post.append(p.post_entropy)
        if labels is not None and p.sample_id in labels:
            summary.labeled += 1
            if p.predicted_class == labels[p.sample_id]:
                summary.correct += 1
    if pre:
        summary.mean_pre_entropy = float(np.mean(pre))
        summary.mean_post_entropy = float(np.mean(post))
    return summary


def bongard_adapt(support: SupportSet, cfg: EngineConfig, seed: int = 0) -> BongardResult:
    """Binary support-set episode.

    Class embeddings are drawn Gaussian(0, sigma^2), normalized and frozen;
    a per-class shift (zero-init) is trained to minimize mean cross-entropy
    over the labeled support embeddings, then the query is classified by
    cosine similarity against the final shifted class embeddings. Ties
    resolve to the positive class (lower index).
    """
    dim = support.query.shape[0]
    rng = np.random.default_rng(seed)
    class_embeddings = rng.normal(0.0, support.class_init_sigma, size=(2, dim))
    support_rows = np.vstack([support.positives, support.negatives])
    labels = np.array(
        [POSITIVE] * support.positives.shape[0]
        + [NEGATIVE] * support.negatives.shape[0]
    )
    try:
        class_embeddings = l2_normalize_rows(class_embeddings)
        params = init_params(TransformKind.PER_CLASS_SHIFT, 2, dim, ParamInit(), seed)
        state = init_state(params)
        for _ in range(support.steps):
            _, grads = support_cross_entropy_grad(
                class_embeddings, params, support_rows, labels, cfg.logit_scale
            )
            step(params, grads, state, cfg.optim)
        shifted = apply_transform(class_embeddings, params)
        loss, _ = support_cross_entropy_grad(
            class_embeddings, params, support_rows, labels, cfg.logit_scale
        )
        support_pred = np.argmax(support_rows @ shifted.T, axis=1)
        support_accuracy = float(np.mean(support_pred == labels))
        predicted = int(np.argmax(shifted @ support.query))
        return BongardResult(predicted, support_accuracy, loss)
    except ZeroNorm:
        means = np.vstack(
            [
                l2_normalize(support.positives.mean(axis=0)),
                l2_normalize(support.negatives.mean(axis=0)),
            ]
        )
        predicted = int(np.argmax(means @ support.query))
        return BongardResult(predicted, float("nan"), float("nan"), fallback=True)
