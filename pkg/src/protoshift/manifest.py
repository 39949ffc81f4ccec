"""Dataset manifests: the human-editable JSON document tying files together.

A manifest lists the ordered class names, an optional cached prototype
file, optional prompt-embedding groups (one TPSE file per class per
group), and the samples with their per-sample view files. All paths are
relative to the manifest's own directory.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Optional

from .engine import ViewBatch
from .errors import ManifestError
from .prototypes import PromptGroup
from .tpse import read_tpse


@dataclass
class ManifestSample:
    sample_id: str
    views_file: str
    label: Optional[int] = None


@dataclass
class ManifestGroup:
    name: str
    files: dict[str, str]  # class name -> TPSE path


@dataclass
class Manifest:
    root: Path
    class_names: list[str]
    prototype_file: Optional[str] = None
    prompt_groups: list[ManifestGroup] = field(default_factory=list)
    samples: list[ManifestSample] = field(default_factory=list)

    def resolve(self, rel: str) -> Path:
        return self.root / rel

    def labels_by_id(self) -> dict[str, int]:
        return {s.sample_id: s.label for s in self.samples if s.label is not None}


def load_manifest(path) -> Manifest:
    """Parse and validate; every referenced file must exist."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ManifestError(f"cannot read manifest {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ManifestError("manifest root must be a JSON object")

    class_names = doc.get("class_names")
    if not isinstance(class_names, list) or not class_names:
        raise ManifestError("manifest needs a non-empty class_names list")
    if len(set(class_names)) != len(class_names):
        raise ManifestError("class_names must be unique")

    manifest = Manifest(
        root=path.parent,
        class_names=[str(c) for c in class_names],
        prototype_file=doc.get("prototype_file"),
    )

    for entry in doc.get("prompt_groups", []):
        try:
            group = ManifestGroup(name=str(entry["name"]), files=dict(entry["files"]))
        except (KeyError, TypeError) as exc:
            raise ManifestError(f"bad prompt_groups entry: {entry!r}") from exc
        missing = set(manifest.class_names) - set(group.files)
        if missing:
            raise ManifestError(
                f"group {group.name!r} lacks files for classes {sorted(missing)}"
            )
        manifest.prompt_groups.append(group)

    n_classes = len(manifest.class_names)
    seen_ids = set()
    for entry in doc.get("samples", []):
        try:
            sample = ManifestSample(
                sample_id=str(entry["sample_id"]),
                views_file=str(entry["views_file"]),
                label=entry.get("label"),
            )
        except (KeyError, TypeError) as exc:
            raise ManifestError(f"bad samples entry: {entry!r}") from exc
        if sample.sample_id in seen_ids:
            raise ManifestError(f"duplicate sample_id {sample.sample_id!r}")
        seen_ids.add(sample.sample_id)
        if sample.label is not None:
            if not isinstance(sample.label, int) or not 0 <= sample.label < n_classes:
                raise ManifestError(
                    f"sample {sample.sample_id!r} label {sample.label!r} "
                    f"not an index into {n_classes} classes"
                )
        manifest.samples.append(sample)

    for rel in _referenced_files(manifest):
        if not manifest.resolve(rel).exists():
            raise ManifestError(f"referenced file does not exist: {rel}")
    return manifest


def write_manifest(manifest: Manifest, path) -> None:
    doc = {"class_names": manifest.class_names}
    if manifest.prototype_file:
        doc["prototype_file"] = manifest.prototype_file
    if manifest.prompt_groups:
        doc["prompt_groups"] = [
            {"name": g.name, "files": g.files} for g in manifest.prompt_groups
        ]
    doc["samples"] = [
        {"sample_id": s.sample_id, "views_file": s.views_file}
        | ({"label": s.label} if s.label is not None else {})
        for s in manifest.samples
    ]
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def iter_view_batches(
    manifest: Manifest, n_views: Optional[int] = None
) -> Iterator[ViewBatch]:
    """Stream samples as ViewBatch, optionally truncated to n_views rows."""
    for sample in manifest.samples:
        views = read_tpse(manifest.resolve(sample.views_file))
        if n_views is not None:
            if views.shape[0] < n_views:
                raise ManifestError(
                    f"sample {sample.sample_id!r} has {views.shape[0]} views, "
                    f"fewer than the requested {n_views}"
                )
            views = views[:n_views]
        yield ViewBatch(sample_id=sample.sample_id, views=views, label=sample.label)


def load_prompt_groups(manifest: Manifest) -> list[PromptGroup]:
    """Materialize every prompt group in manifest class order."""
    if not manifest.prompt_groups:
        raise ManifestError("manifest has no prompt_groups to pool")
    groups = []
    for g in manifest.prompt_groups:
        per_class = {
            cls: read_tpse(manifest.resolve(g.files[cls]))
            for cls in manifest.class_names
        }
        groups.append(PromptGroup(name=g.name, embeddings_per_class=per_class))
    return groups


def _referenced_files(manifest: Manifest) -> Iterator[str]:
    if manifest.prototype_file:
        yield manifest.prototype_file
    for g in manifest.prompt_groups:
        yield from g.files.values()
    for s in manifest.samples:
        yield s.views_file
