"""Aligned-text tables and matplotlib figures for the report paths.

Figures are rendered headless (Agg) next to the delimited outputs they
accompany. matplotlib is imported lazily so the bulk-compute paths never
pay its import cost.
"""

import json
from pathlib import Path

import numpy as np

from .bench import BenchResult
from .engine import Prediction

BENCH_CONTEXT_NOTE = (
    "Timings cover adaptation math only; no image encoder runs here. "
    "Encoder-inclusive pipelines report on the order of 65 ms per batch on "
    "datacenter GPUs, which is not directly comparable to these numbers."
)


def _plt():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def bench_table(results: list[BenchResult]) -> str:
    lines = [
        f"# {BENCH_CONTEXT_NOTE}",
        f"{'classes':>8} {'dim':>6} {'views':>6} {'mean_ms':>10} {'std_ms':>8} {'peak_rss_mb':>12}",
    ]
    for r in results:
        rss = f"{r.peak_resident_bytes / 2**20:.1f}" if r.peak_resident_bytes else "n/a"
        lines.append(
            f"{r.classes:>8d} {r.dim:>6d} {r.n_views:>6d} "
            f"{r.mean_ms_per_sample:>10.3f} {r.std_ms:>8.3f} {rss:>12}"
        )
    return "\n".join(lines)


def write_bench_records(results: list[BenchResult], out_dir: Path) -> list[Path]:
    """bench.tsv + bench.json next to each other; returns written paths."""
    out_dir.mkdir(parents=True, exist_ok=True)
    tsv = out_dir / "bench.tsv"
    with open(tsv, "w") as fh:
        fh.write("classes\tdim\tn_views\tmean_ms_per_sample\tstd_ms\tpeak_resident_bytes\n")
        for r in results:
            fh.write(
                f"{r.classes}\t{r.dim}\t{r.n_views}\t{r.mean_ms_per_sample!r}\t"
                f"{r.std_ms!r}\t{r.peak_resident_bytes if r.peak_resident_bytes else ''}\n"
            )
    js = out_dir / "bench.json"
    js.write_text(
        json.dumps(
            {
                "note": BENCH_CONTEXT_NOTE,
                "results": [vars(r) for r in results],
            },
            indent=2,
        )
        + "\n"
    )
    return [tsv, js]


def render_bench_figure(results: list[BenchResult], path) -> Path:
    plt = _plt()
    classes = [r.classes for r in results]
    means = [r.mean_ms_per_sample for r in results]
    stds = [r.std_ms for r in results]
    fig, ax = plt.subplots(figsize=(5.5, 3.5))
    ax.errorbar(classes, means, yerr=stds, marker="o", capsize=3)
    ax.set_xscale("log")
    ax.set_xlabel("number of classes")
    ax.set_ylabel("adaptation time per sample (ms)")
    ax.set_title("Per-sample adaptation cost vs. label-set size")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path)


def eval_report(
    predictions: list[Prediction],
    labels: dict[str, int],
    class_names: list[str],
) -> dict:
    """Accuracy table data: overall, zero-shot, and per-class counts."""
    per_class = {c: {"correct": 0, "total": 0} for c in range(len(class_names))}
    correct = zs_correct = labeled = 0
    for p in predictions:
        if p.sample_id not in labels:
            continue
        label = labels[p.sample_id]
        labeled += 1
        per_class[label]["total"] += 1
        if p.predicted_class == label:
            correct += 1
            per_class[label]["correct"] += 1
        if p.zero_shot_class == label:
            zs_correct += 1
    return {
        "samples": len(predictions),
        "labeled": labeled,
        "accuracy": correct / labeled if labeled else None,
        "zero_shot_accuracy": zs_correct / labeled if labeled else None,
        "fallbacks": sum(p.fallback for p in predictions),
        "per_class": {
            class_names[c]: stats for c, stats in per_class.items() if stats["total"]
        },
    }


def eval_table(report: dict) -> str:
    lines = []
    if report["accuracy"] is None:
        lines.append(f"samples: {report['samples']} (no labels; accuracy unavailable)")
    else:
        lines.append(
            f"top-1 accuracy: {100 * report['accuracy']:.2f} "
            f"({report['labeled']} labeled samples)"
        )
        lines.append(f"zero-shot accuracy: {100 * report['zero_shot_accuracy']:.2f}")
    lines.append(f"fallbacks: {report['fallbacks']}")
    if report["per_class"]:
        lines.append(f"{'class':<24} {'correct':>8} {'total':>8} {'acc%':>8}")
        for name, stats in report["per_class"].items():
            acc = 100 * stats["correct"] / stats["total"]
            lines.append(f"{name:<24} {stats['correct']:>8d} {stats['total']:>8d} {acc:>8.2f}")
    return "\n".join(lines)


def render_eval_figures(
    predictions: list[Prediction],
    report: dict,
    out_dir: Path,
) -> list[Path]:
    """Entropy-shift histogram and per-class accuracy bars as PNG files."""
    plt = _plt()
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    pre = np.array([p.pre_entropy for p in predictions if not p.fallback])
    post = np.array([p.post_entropy for p in predictions if not p.fallback])
    if pre.size:
        fig, ax = plt.subplots(figsize=(5.5, 3.5))
        bins = np.linspace(0.0, max(pre.max(), post.max(), 1e-9), 40)
        ax.hist(pre, bins=bins, alpha=0.6, label=f"before (mean {pre.mean():.3f})")
        ax.hist(post, bins=bins, alpha=0.6, label=f"after (mean {post.mean():.3f})")
        ax.set_xlabel("marginal entropy (nats)")
        ax.set_ylabel("samples")
        ax.set_title("Entropy before vs. after adaptation")
        ax.legend()
        fig.tight_layout()
        path = out_dir / "entropy_shift.png"
        fig.savefig(path, dpi=150)
        plt.close(fig)
        written.append(path)

    if report["per_class"]:
        names = list(report["per_class"])
        accs = [
            100 * s["correct"] / s["total"] for s in report["per_class"].values()
        ]
        fig, ax = plt.subplots(figsize=(max(5.5, 0.3 * len(names)), 3.5))
        ax.bar(range(len(names)), accs)
        ax.set_xticks(range(len(names)))
        ax.set_xticklabels(names, rotation=90, fontsize=7)
        ax.set_ylabel("top-1 accuracy (%)")
        ax.set_title("Per-class accuracy")
        fig.tight_layout()
        path = out_dir / "accuracy_per_class.png"
        fig.savefig(path, dpi=150)
        plt.close(fig)
        written.append(path)
    return written
