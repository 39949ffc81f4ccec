"""Synthetic domain-shift data generation and the adaptation timing study.

The generator plants a known global (and optionally per-class) additive
shift between class prototypes and image embeddings, giving a controlled
benchmark where a learned prototype shift has a recoverable signal. The
timing study measures pure adaptation math per sample; it deliberately
contains no encoder.
"""

import statistics
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .engine import (
    NEGATIVE,
    POSITIVE,
    EngineConfig,
    SupportSet,
    ViewBatch,
    adapt_one,
)
from .manifest import Manifest, ManifestSample, write_manifest
from .prototypes import PrototypeSet, save_prototypes
from .tpse import write_tpse


@dataclass(frozen=True)
class SynthSpec:
    n_classes: int = 20
    dim: int = 64
    samples_per_class: int = 25
    prototype_seed: int = 0
    global_shift_norm: float = 0.5
    class_shift_norm: float = 0.0
    view_noise_sigma: float = 0.1
    n_views: int = 64

    def __post_init__(self):
        if self.n_classes < 2:
            raise ValueError("n_classes must be >= 2")
        if min(self.global_shift_norm, self.class_shift_norm, self.view_noise_sigma) < 0:
            raise ValueError("norms and sigma must be >= 0")
        if self.samples_per_class < 1 or self.n_views < 1 or self.dim < 2:
            raise ValueError("samples_per_class, n_views >= 1 and dim >= 2 required")


@dataclass
class BenchResult:
    classes: int
    dim: int
    n_views: int
    mean_ms_per_sample: float
    std_ms: float
    peak_resident_bytes: Optional[int]


def generate_arrays(spec: SynthSpec) -> tuple[PrototypeSet, list[ViewBatch]]:
    """In-memory dataset: prototypes plus one ViewBatch per sample.

    Image embeddings are normalize(prototype + global_shift + class_shift
    + noise); view 0 is the image itself, later views add fresh noise.
    """
    rng = np.random.default_rng(spec.prototype_seed)
    prototypes = _unit_rows(rng, spec.n_classes, spec.dim)
    global_shift = _unit_rows(rng, 1, spec.dim)[0] * spec.global_shift_norm
    class_shifts = _unit_rows(rng, spec.n_classes, spec.dim) * spec.class_shift_norm

    class_names = [f"class_{c:03d}" for c in range(spec.n_classes)]
    batches = []
    sigma = spec.view_noise_sigma
    for c in range(spec.n_classes):
        for s in range(spec.samples_per_class):
            center = prototypes[c] + global_shift + class_shifts[c]
            image = _normalize(center + rng.normal(0.0, sigma, spec.dim))
            views = np.empty((spec.n_views, spec.dim))
            views[0] = image
            for v in range(1, spec.n_views):
                views[v] = _normalize(image + rng.normal(0.0, sigma, spec.dim))
            batches.append(
                ViewBatch(
                    sample_id=f"{class_names[c]}_{s:04d}", views=views, label=c
                )
            )
    proto_set = PrototypeSet(
        class_names=class_names,
        prototypes=prototypes,
        provenance={"pooling": "synthetic", "groups": []},
    )
    return proto_set, batches


def generate(spec: SynthSpec, out_dir) -> Path:
    """Write the synthetic dataset as manifest + TPSE files; returns the
    manifest path. Same spec always produces byte-identical files."""
    out_dir = Path(out_dir)
    views_dir = out_dir / "views"
    views_dir.mkdir(parents=True, exist_ok=True)
    proto_set, batches = generate_arrays(spec)

    save_prototypes(proto_set, out_dir / "prototypes.tpse")
    manifest = Manifest(
        root=out_dir,
        class_names=proto_set.class_names,
        prototype_file="prototypes.tpse",
    )
    for batch in batches:
        rel = f"views/{batch.sample_id}.tpse"
        write_tpse(batch.views, out_dir / rel)
        manifest.samples.append(
            ManifestSample(sample_id=batch.sample_id, views_file=rel, label=batch.label)
        )
    manifest_path = out_dir / "manifest.json"
    write_manifest(manifest, manifest_path)
    return manifest_path


def generate_support_set(
    seed: int, dim: int = 64, n_support: int = 6, noise_sigma: float = 0.25
) -> tuple[SupportSet, int]:
    """A linearly separable binary episode and its ground-truth label.

    Positives cluster around a random direction, negatives around its
    opposite; the query lands on one of the two sides.
    """
    rng = np.random.default_rng(seed)
    axis = _unit_rows(rng, 1, dim)[0]
    positives = [
        _normalize(axis + rng.normal(0.0, noise_sigma, dim)) for _ in range(n_support)
    ]
    negatives = [
        _normalize(-axis + rng.normal(0.0, noise_sigma, dim)) for _ in range(n_support)
    ]
    truth = POSITIVE if rng.random() < 0.5 else NEGATIVE
    sign = 1.0 if truth == POSITIVE else -1.0
    query = _normalize(sign * axis + rng.normal(0.0, noise_sigma, dim))
    support = SupportSet(
        positives=np.vstack(positives), negatives=np.vstack(negatives), query=query
    )
    return support, truth


def time_adapt(
    class_counts: list[int],
    dim: int = 512,
    n_views: int = 64,
    repeats: int = 5,
    warmup: int = 2,
    cfg: Optional[EngineConfig] = None,
    seed: int = 0,
) -> list[BenchResult]:
    """Wall-clock adapt_one timings on in-memory synthetic data.

    One sample per repeat, single worker, file I/O and data generation
    excluded from the timed region.
    """
    if repeats < 3:
        raise ValueError("repeats must be >= 3")
    cfg = cfg or EngineConfig()
    results = []
    for n_classes in class_counts:
        rng = np.random.default_rng(seed + n_classes)
        proto_set = PrototypeSet(
            class_names=[f"class_{c:05d}" for c in range(n_classes)],
            prototypes=_unit_rows(rng, n_classes, dim),
            provenance={"pooling": "synthetic", "groups": []},
        )
        batches = [
            ViewBatch(sample_id=f"bench_{i}", views=_unit_rows(rng, n_views, dim))
            for i in range(warmup + repeats)
        ]
        for batch in batches[:warmup]:
            adapt_one(proto_set, batch, cfg)
        timings = []
        for batch in batches[warmup:]:
            start = time.perf_counter()
            adapt_one(proto_set, batch, cfg)
            timings.append((time.perf_counter() - start) * 1e3)
        results.append(
            BenchResult(
                classes=n_classes,
                dim=dim,
                n_views=n_views,
                mean_ms_per_sample=statistics.fmean(timings),
                std_ms=statistics.stdev(timings),
                peak_resident_bytes=peak_resident_bytes(),
            )
        )
    return results


def peak_resident_bytes() -> Optional[int]:
    """Best-effort peak RSS of this process; None where unavailable."""
    try:
        import resource
    except ImportError:
        return None
    peak_kb = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss
    return int(peak_kb) * 1024


def _unit_rows(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    mat = rng.normal(size=(rows, cols))
    return mat / np.linalg.norm(mat, axis=1, keepdims=True)


def _normalize(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)
