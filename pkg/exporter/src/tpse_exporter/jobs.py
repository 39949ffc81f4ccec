"""Export operations: prompt groups and per-sample view files + manifest.

Both operations merge their section into ``<out_dir>/manifest.json`` so a
prompts run and a views run compose into one engine-ready dataset. Class
names must agree between runs; embeddings are L2-normalized and stored as
float32 TPSE containers.
"""

import hashlib
import json
import logging
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from PIL import Image, UnidentifiedImageError

from .augment import original_view, random_resized_crop
from .container import write_tpse

log = logging.getLogger(__name__)


class ExportError(ValueError):
    pass


@dataclass
class ExportJob:
    model: str
    out_dir: Path
    seed: int = 0
    n_augmentations: int = 63
    combine_mode: str = "plain"  # plain | cross
    templates_file: Optional[Path] = None
    descriptors_file: Optional[Path] = None
    classes_file: Optional[Path] = None
    images_file: Optional[Path] = None

    def __post_init__(self):
        self.out_dir = Path(self.out_dir)
        if self.n_augmentations < 0:
            raise ExportError("n_augmentations must be >= 0")
        if self.combine_mode not in ("plain", "cross"):
            raise ExportError(f"unknown combine mode {self.combine_mode!r}")


def export_prompts(job: ExportJob, encoder) -> Path:
    """Encode prompt texts into per-(group, class) TPSE files.

    plain: one group per source — templates formatted with each class
    name, and descriptors prefixed with the class name. cross: one group
    per (template, descriptor index) pairing, which requires every class
    to list the same number of descriptors.
    """
    templates = _read_templates(job.templates_file) if job.templates_file else []
    descriptors = _read_descriptors(job.descriptors_file) if job.descriptors_file else {}
    class_names = _class_names(job, descriptors)

    groups = _build_prompt_groups(job.combine_mode, templates, descriptors, class_names)
    if not groups:
        raise ExportError("no prompt sources: pass templates and/or descriptors")

    group_dir = job.out_dir / "groups"
    group_dir.mkdir(parents=True, exist_ok=True)
    manifest_groups = []
    for group_name, prompts_per_class in groups:
        files = {}
        for idx, cls in enumerate(class_names):
            prompts = prompts_per_class[cls]
            try:
                rows = _normalize_rows(np.asarray(encoder.encode_texts(prompts)))
            except Exception as exc:
                raise ExportError(
                    f"group {group_name!r} class {cls!r}: encoding failed: {exc}"
                ) from exc
            rel = f"groups/{group_name}__{idx:03d}_{_slug(cls)}.tpse"
            write_tpse(rows, job.out_dir / rel)
            files[cls] = rel
        manifest_groups.append({"name": group_name, "files": files})

    return _merge_manifest(job.out_dir, class_names, prompt_groups=manifest_groups)


def export_views(job: ExportJob, encoder) -> Path:
    """Encode each image into one (1 + n_augmentations) x d TPSE file.

    Row 0 is the deterministic original view; augmented rows use a
    per-image RNG derived from the job seed and the image path, so exports
    are reproducible regardless of listing order. Undecodable images are
    skipped with a warning and left out of the manifest.
    """
    if job.images_file is None:
        raise ExportError("export_views needs an images file")
    class_names, entries = _read_images(job.images_file)

    views_dir = job.out_dir / "views"
    views_dir.mkdir(parents=True, exist_ok=True)
    size = encoder.input_size
    samples = []
    for i, entry in enumerate(entries):
        path = Path(entry["path"])
        if not path.is_absolute():
            path = Path(job.images_file).parent / path
        try:
            with Image.open(path) as img:
                img = img.convert("RGB")
                rng = np.random.default_rng(_image_seed(job.seed, str(entry["path"])))
                views = [original_view(img, size)]
                views += [
                    random_resized_crop(img, rng, size)
                    for _ in range(job.n_augmentations)
                ]
        except (OSError, UnidentifiedImageError) as exc:
            log.warning("skipping undecodable image %s: %s", path, exc)
            continue
        rows = _normalize_rows(np.asarray(encoder.encode_images(views)))
        sample_id = f"{i:05d}_{_slug(path.stem)}"
        rel = f"views/{sample_id}.tpse"
        write_tpse(rows, job.out_dir / rel)
        record = {"sample_id": sample_id, "views_file": rel}
        if entry.get("label") is not None:
            record["label"] = int(entry["label"])
        samples.append(record)

    return _merge_manifest(job.out_dir, class_names, samples=samples)


def _build_prompt_groups(mode, templates, descriptors, class_names):
    groups = []
    if mode == "plain":
        if templates:
            groups.append(
                ("templates", {c: [t.format(c) for t in templates] for c in class_names})
            )
        if descriptors:
            groups.append(
                ("descriptors", {c: [f"{c}, {d}" for d in descriptors[c]] for c in class_names})
            )
        return groups

    if not templates or not descriptors:
        raise ExportError("cross mode needs both templates and descriptors")
    counts = {len(v) for v in descriptors.values()}
    if len(counts) != 1:
        raise ExportError(
            f"cross mode needs a uniform descriptor count per class, got {sorted(counts)}"
        )
    (n_descriptors,) = counts
    for ti, template in enumerate(templates):
        for dj in range(n_descriptors):
            groups.append(
                (
                    f"t{ti:02d}_d{dj:02d}",
                    {c: [f"{template.format(c)} {descriptors[c][dj]}"] for c in class_names},
                )
            )
    return groups


def _class_names(job: ExportJob, descriptors: dict) -> list[str]:
    if job.classes_file is not None:
        names = [
            line.strip()
            for line in Path(job.classes_file).read_text().splitlines()
            if line.strip()
        ]
        if not names:
            raise ExportError(f"classes file {job.classes_file} is empty")
        if descriptors and set(names) != set(descriptors):
            raise ExportError("classes file and descriptor classes disagree")
        return names
    if descriptors:
        return list(descriptors)
    raise ExportError("pass --classes when exporting without descriptors")


def _read_templates(path) -> list[str]:
    lines = [line.strip() for line in Path(path).read_text().splitlines() if line.strip()]
    if not lines:
        raise ExportError(f"templates file {path} is empty")
    for line in lines:
        if "{}" not in line:
            raise ExportError(f"template without a {{}} placeholder: {line!r}")
    return lines


def _read_descriptors(path) -> dict[str, list[str]]:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ExportError(f"cannot read descriptors {path}: {exc}") from exc
    if not isinstance(doc, dict) or not doc:
        raise ExportError("descriptors must be a non-empty {class: [text, ...]} object")
    out = {}
    for cls, items in doc.items():
        if not isinstance(items, list) or not items:
            raise ExportError(f"class {cls!r} needs a non-empty descriptor list")
        out[str(cls)] = [str(d) for d in items]
    return out


def _read_images(path) -> tuple[list[str], list[dict]]:
    try:
        doc = json.loads(Path(path).read_text())
        class_names = [str(c) for c in doc["class_names"]]
        entries = list(doc["images"])
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
        raise ExportError(f"cannot read images file {path}: {exc}") from exc
    if not class_names or not entries:
        raise ExportError("images file needs class_names and images")
    for entry in entries:
        label = entry.get("label")
        if label is not None and not 0 <= int(label) < len(class_names):
            raise ExportError(f"label {label!r} out of range for {entry.get('path')!r}")
    return class_names, entries


def _merge_manifest(out_dir: Path, class_names, prompt_groups=None, samples=None) -> Path:
    manifest_path = out_dir / "manifest.json"
    doc = {"class_names": class_names, "samples": []}
    if manifest_path.exists():
        doc = json.loads(manifest_path.read_text())
        if doc.get("class_names") != class_names:
            raise ExportError(
                "manifest already exists with different class names; "
                "export into a fresh directory"
            )
    if prompt_groups is not None:
        doc["prompt_groups"] = prompt_groups
    if samples is not None:
        doc["samples"] = samples
    doc.setdefault("samples", [])
    manifest_path.write_text(json.dumps(doc, indent=2) + "\n")
    return manifest_path


def _normalize_rows(rows: np.ndarray) -> np.ndarray:
    rows = np.asarray(rows, dtype=np.float64)
    norms = np.linalg.norm(rows, axis=1)
    if np.any(norms <= 1e-12):
        raise ExportError("encoder produced a zero-norm embedding")
    return rows / norms[:, None]


def _slug(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9_-]+", "_", text)[:60] or "x"


def _image_seed(base_seed: int, key: str) -> int:
    digest = hashlib.sha256(key.encode("utf-8")).digest()
    return (base_seed * 0x1_0000_0001 + int.from_bytes(digest[:8], "little")) % 2**63
