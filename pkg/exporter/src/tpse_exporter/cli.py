"""Command-line surface: `tpse-export prompts` and `tpse-export views`.

Both subcommands write into --out-dir and merge their section into its
manifest.json, so running them in sequence yields a complete dataset for
the engine. Exit codes: 0 ok, 2 usage, 1 export failure.
"""

import argparse
import logging
import sys

from .encoders import get_encoder
from .jobs import ExportError, ExportJob, export_prompts, export_views


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    job = ExportJob(
        model=args.model,
        out_dir=args.out_dir,
        seed=getattr(args, "seed", 0),
        n_augmentations=getattr(args, "augmentations", 63),
        combine_mode=getattr(args, "mode", "plain"),
        templates_file=getattr(args, "templates", None),
        descriptors_file=getattr(args, "descriptors", None),
        classes_file=getattr(args, "classes", None),
        images_file=getattr(args, "images", None),
    )
    try:
        encoder = get_encoder(args.model)
        manifest = args.run(job, encoder)
    except (ExportError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {manifest}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tpse-export",
        description="Encode prompts and image views into TPSE embedding files",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prompts", help="encode prompt texts into per-class groups")
    p.add_argument("--model", default="color-probe",
                   help="'color-probe' or a transformers checkpoint reference")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--templates", help="text file, one template per line with {}")
    p.add_argument("--descriptors", help="JSON file: class -> list of descriptor texts")
    p.add_argument("--classes", help="text file with one class name per line")
    p.add_argument("--mode", choices=["plain", "cross"], default="plain")
    p.set_defaults(run=export_prompts)

    p = sub.add_parser("views", help="encode original + augmented image views")
    p.add_argument("--model", default="color-probe")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--images", required=True,
                   help="JSON file with class_names and images [{path, label}]")
    p.add_argument("--augmentations", type=int, default=63)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(run=export_views)

    return parser


if __name__ == "__main__":
    sys.exit(main())
