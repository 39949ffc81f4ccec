"""Command-line surface: pool | adapt | eval | bongard | bench | synth | gradcheck.

Exit codes: 0 success, 2 usage errors, 3 data-format failures (bad
container bytes, inconsistent manifests, foreign files), 4 numeric
failures (degenerate norms, dimension clashes, gradient check above
threshold).
"""

import argparse
import json
import sys
from pathlib import Path

from . import bench as bench_mod
from .engine import (
    NEGATIVE,
    POSITIVE,
    EngineConfig,
    SupportSet,
    bongard_adapt,
    run_dataset,
    sample_seed,
    summarize,
)
from .errors import ClassMismatch, DataFormatError, ManifestError, NumericError
from .grad import run_gradcheck
from .manifest import iter_view_batches, load_manifest, load_prompt_groups
from .optim import OptimConfig, OptimKind
from .predictions import read_predictions, write_predictions
from .prototypes import load_prototypes, pool_macro, pool_micro, save_prototypes
from .tpse import read_tpse
from .transforms import ParamInit, TransformKind

EXIT_OK, EXIT_USAGE, EXIT_FORMAT, EXIT_NUMERIC = 0, 2, 3, 4


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except DataFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except NumericError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="protoshift",
        description="Test-time adaptation of prototype classifiers on cached embeddings",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pool", help="fuse prompt groups into cached prototypes")
    p.add_argument("--manifest", required=True)
    p.add_argument("--mode", choices=["micro", "macro"], default="micro")
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_pool)

    p = sub.add_parser("adapt", help="adapt and predict every sample in a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--prototypes", help="prototype file; defaults to the manifest's")
    p.add_argument("--out", required=True, help="predictions TSV path")
    _add_engine_flags(p)
    p.add_argument("--workers", type=_positive_int, default=1)
    p.set_defaults(handler=cmd_adapt)

    p = sub.add_parser("eval", help="score a predictions file against labels")
    p.add_argument("--predictions", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out-dir", help="where to write eval.json and figures")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(handler=cmd_eval)

    p = sub.add_parser("bongard", help="binary support-set episodes")
    p.add_argument("--episodes", required=True, help="episodes JSON file")
    p.add_argument("--out", help="episode predictions TSV path")
    p.add_argument("--steps", type=_nonneg_int, default=64)
    p.add_argument("--lr", type=_positive_float, default=5e-3)
    p.add_argument("--logit-scale", type=_positive_float, default=100.0)
    p.add_argument("--class-init-sigma", type=_nonneg_float, default=0.02)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(handler=cmd_bongard)

    p = sub.add_parser("bench", help="time adaptation across label-set sizes")
    p.add_argument("--classes", type=_int_list, default=[10, 100, 1000])
    p.add_argument("--dim", type=_positive_int, default=512)
    p.add_argument("--views", type=_positive_int, default=64)
    p.add_argument("--repeats", type=_positive_int, default=5)
    p.add_argument("--warmup", type=_nonneg_int, default=2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", help="where to write bench records and the figure")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(handler=cmd_bench)

    p = sub.add_parser("synth", help="generate a synthetic domain-shift dataset")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--classes", dest="n_classes", type=_positive_int, default=20)
    p.add_argument("--dim", type=_positive_int, default=64)
    p.add_argument("--samples-per-class", type=_positive_int, default=25)
    p.add_argument("--views", type=_positive_int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--global-shift-norm", type=_nonneg_float, default=0.5)
    p.add_argument("--class-shift-norm", type=_nonneg_float, default=0.0)
    p.add_argument("--noise-sigma", type=_nonneg_float, default=0.1)
    p.set_defaults(handler=cmd_synth)

    p = sub.add_parser("gradcheck", help="analytic vs finite-difference gradients")
    p.add_argument("--trials", type=_positive_int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--h", type=_positive_float, default=1e-5)
    p.add_argument("--threshold", type=_positive_float, default=1e-6)
    p.set_defaults(handler=cmd_gradcheck)

    return parser


def _add_engine_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument(
        "--transform",
        type=TransformKind.from_name,
        default=TransformKind.PER_CLASS_SHIFT,
        help="shift | shared-shift | scale | scale-shift | film",
    )
    p.add_argument("--steps", type=_nonneg_int, default=1)
    p.add_argument("--rho", type=_ratio, default=0.1, help="view selection ratio")
    p.add_argument("--views", type=_positive_int, default=None,
                   help="use only the first N views of every sample")
    p.add_argument("--logit-scale", type=_positive_float, default=100.0)
    p.add_argument("--optimizer", type=OptimKind.from_name, default=OptimKind.ADAMW)
    p.add_argument("--lr", type=_positive_float, default=None,
                   help="default 5e-3, or 1e-3 under --profile cross-dataset")
    p.add_argument("--beta1", type=_beta, default=0.9)
    p.add_argument("--beta2", type=_beta, default=0.999)
    p.add_argument("--opt-eps", type=_positive_float, default=1e-8)
    p.add_argument("--weight-decay", type=_nonneg_float, default=0.0)
    p.add_argument("--profile", choices=["default", "cross-dataset"], default="default")
    p.add_argument("--shift-init", type=float, default=0.0)
    p.add_argument("--scale-init", type=float, default=1.0)
    p.add_argument("--film-sigma", type=_nonneg_float, default=0.02)
    p.add_argument("--seed", type=int, default=0)


def engine_config_from(args) -> EngineConfig:
    lr = args.lr
    if lr is None:
        lr = 1e-3 if args.profile == "cross-dataset" else 5e-3
    return EngineConfig(
        logit_scale=args.logit_scale,
        selection_ratio=args.rho,
        n_views=args.views if args.views else 64,
        steps=args.steps,
        transform=args.transform,
        optim=OptimConfig(
            kind=args.optimizer,
            lr=lr,
            beta1=args.beta1,
            beta2=args.beta2,
            eps=args.opt_eps,
            weight_decay=args.weight_decay,
        ),
        param_init=ParamInit(
            shift_init=args.shift_init,
            scale_init=args.scale_init,
            film_init_sigma=args.film_sigma,
        ),
        seed=args.seed,
    )


def cmd_pool(args) -> int:
    manifest = load_manifest(args.manifest)
    groups = load_prompt_groups(manifest)
    pool = pool_micro if args.mode == "micro" else pool_macro
    protos = pool(groups)
    save_prototypes(protos, args.out)
    print(
        f"pooled {len(groups)} group(s) -> {protos.n_classes} prototypes "
        f"(dim {protos.dim}, {args.mode}) -> {args.out}"
    )
    return EXIT_OK


def cmd_adapt(args) -> int:
    manifest = load_manifest(args.manifest)
    proto_path = args.prototypes or (
        manifest.resolve(manifest.prototype_file) if manifest.prototype_file else None
    )
    if proto_path is None:
        raise ManifestError(
            "no prototypes: pass --prototypes or set prototype_file in the manifest"
        )
    protos = load_prototypes(proto_path)
    if protos.class_names != manifest.class_names:
        raise ClassMismatch("prototype class names do not match the manifest")

    cfg = engine_config_from(args)
    batches = iter_view_batches(manifest, n_views=args.views)
    stream = run_dataset(protos, batches, cfg, workers=args.workers)
    written = write_predictions(args.out, stream, protos.class_names)
    summary = summarize(written, labels=manifest.labels_by_id())

    summary_doc = {
        "samples": summary.samples,
        "labeled": summary.labeled,
        "accuracy": summary.accuracy,
        "fallbacks": summary.fallbacks,
        "mean_pre_entropy": summary.mean_pre_entropy,
        "mean_post_entropy": summary.mean_post_entropy,
        "config": {
            "transform": cfg.transform.value,
            "steps": cfg.steps,
            "selection_ratio": cfg.selection_ratio,
            "logit_scale": cfg.logit_scale,
            "optimizer": cfg.optim.kind.value,
            "lr": cfg.optim.lr,
            "weight_decay": cfg.optim.weight_decay,
            "seed": cfg.seed,
            "workers": args.workers,
        },
    }
    Path(str(args.out) + ".summary.json").write_text(
        json.dumps(summary_doc, indent=2) + "\n"
    )
    acc = f"{100 * summary.accuracy:.2f}" if summary.accuracy is not None else "n/a"
    print(
        f"adapted {summary.samples} samples -> {args.out} "
        f"(accuracy {acc}, fallbacks {summary.fallbacks})"
    )
    return EXIT_OK


def cmd_eval(args) -> int:
    from .reporting import eval_report, eval_table, render_eval_figures

    manifest = load_manifest(args.manifest)
    preds = list(read_predictions(args.predictions))
    report = eval_report(preds, manifest.labels_by_id(), manifest.class_names)
    print(eval_table(report))

    out_dir = Path(args.out_dir) if args.out_dir else Path(args.predictions).parent
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "eval.json").write_text(json.dumps(report, indent=2) + "\n")
    if not args.no_figures:
        for fig_path in render_eval_figures(preds, report, out_dir):
            print(f"wrote {fig_path}")
    return EXIT_OK


def cmd_bongard(args) -> int:
    episodes_path = Path(args.episodes)
    try:
        doc = json.loads(episodes_path.read_text())
        episodes = list(doc["episodes"])
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
        raise ManifestError(f"cannot read episodes file {episodes_path}: {exc}") from exc

    cfg = EngineConfig(
        logit_scale=args.logit_scale,
        optim=OptimConfig(kind=OptimKind.ADAMW, lr=args.lr),
    )
    root = episodes_path.parent
    lines = ["episode_id\tpredicted\tsupport_accuracy\tfinal_loss\tfallback"]
    correct = labeled = 0
    for entry in episodes:
        try:
            episode_id = str(entry["episode_id"])
            support = SupportSet(
                positives=read_tpse(root / entry["positives_file"]),
                negatives=read_tpse(root / entry["negatives_file"]),
                query=read_tpse(root / entry["query_file"])[0],
                steps=args.steps,
                class_init_sigma=args.class_init_sigma,
            )
        except (KeyError, TypeError) as exc:
            raise ManifestError(f"bad episode entry: {entry!r}") from exc
        result = bongard_adapt(support, cfg, seed=sample_seed(args.seed, episode_id))
        name = "positive" if result.predicted == POSITIVE else "negative"
        lines.append(
            f"{episode_id}\t{name}\t{result.support_accuracy!r}\t"
            f"{result.final_loss!r}\t{int(result.fallback)}"
        )
        truth = entry.get("label")
        if truth in ("positive", "negative"):
            labeled += 1
            truth_idx = POSITIVE if truth == "positive" else NEGATIVE
            correct += result.predicted == truth_idx
    body = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(body)
    else:
        sys.stdout.write(body)
    if labeled:
        print(f"episode accuracy: {100 * correct / labeled:.2f} ({correct}/{labeled})")
    return EXIT_OK


def cmd_bench(args) -> int:
    from .reporting import bench_table, render_bench_figure, write_bench_records

    results = bench_mod.time_adapt(
        class_counts=args.classes,
        dim=args.dim,
        n_views=args.views,
        repeats=args.repeats,
        warmup=args.warmup,
        seed=args.seed,
    )
    print(bench_table(results))
    if args.out_dir:
        out_dir = Path(args.out_dir)
        for written in write_bench_records(results, out_dir):
            print(f"wrote {written}")
        if not args.no_figures:
            fig = render_bench_figure(results, out_dir / "runtime_vs_classes.png")
            print(f"wrote {fig}")
    return EXIT_OK


def cmd_synth(args) -> int:
    spec = bench_mod.SynthSpec(
        n_classes=args.n_classes,
        dim=args.dim,
        samples_per_class=args.samples_per_class,
        prototype_seed=args.seed,
        global_shift_norm=args.global_shift_norm,
        class_shift_norm=args.class_shift_norm,
        view_noise_sigma=args.noise_sigma,
        n_views=args.views,
    )
    manifest_path = bench_mod.generate(spec, args.out_dir)
    print(f"wrote {manifest_path}")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    result = run_gradcheck(trials=args.trials, seed=args.seed, h=args.h)
    for kind, err in sorted(result["per_kind"].items()):
        print(f"{kind:<16} max rel. err {err:.3e}")
    print(
        f"overall          max rel. err {result['max_rel_error']:.3e} "
        f"({result['trials']} trials, {result['seconds']:.1f}s)"
    )
    if result["max_rel_error"] >= args.threshold:
        print(f"error: exceeds threshold {args.threshold:.1e}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def _positive_int(text: str) -> int:
    value = int(text)
    if value <= 0:
        raise argparse.ArgumentTypeError(f"{text!r} must be a positive integer")
    return value


def _nonneg_int(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"{text!r} must be >= 0")
    return value


def _positive_float(text: str) -> float:
    value = float(text)
    if value <= 0:
        raise argparse.ArgumentTypeError(f"{text!r} must be positive")
    return value


def _nonneg_float(text: str) -> float:
    value = float(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"{text!r} must be >= 0")
    return value


def _ratio(text: str) -> float:
    value = float(text)
    if not 0 < value <= 1:
        raise argparse.ArgumentTypeError(f"{text!r} must lie in (0, 1]")
    return value


def _beta(text: str) -> float:
    value = float(text)
    if not 0 <= value < 1:
        raise argparse.ArgumentTypeError(f"{text!r} must lie in [0, 1)")
    return value


def _int_list(text: str) -> list[int]:
    try:
        values = [int(part) for part in text.split(",") if part]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"{text!r} is not a comma-separated int list") from exc
    if not values or any(v <= 0 for v in values):
        raise argparse.ArgumentTypeError("class counts must be positive integers")
    return values


if __name__ == "__main__":
    sys.exit(main())
