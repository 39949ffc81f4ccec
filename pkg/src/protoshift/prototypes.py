"""Class-prototype construction from prompt-embedding groups, plus caching.

Two pooling modes fuse several prompt groups into one prototype per class:
micro averages every normalized embedding jointly (each prompt weighted
equally), macro averages the normalized per-group means (each group
weighted equally). Raw embeddings are always L2-normalized before any
averaging, and means are re-normalized, following the usual embedding
ensembling convention.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ClassMismatch, DimMismatch, FormatError, NormError
from .numkernel import l2_normalize, l2_normalize_rows
from .tpse import read_tpse, write_tpse

SIDECAR_SUFFIX = ".json"


@dataclass
class PromptGroup:
    """One named source of prompt embeddings, keyed by class name.

    Every class maps to an (m_c, d) array of at least one embedding.
    """

    name: str
    embeddings_per_class: dict[str, np.ndarray]

    def __post_init__(self):
        if not self.embeddings_per_class:
            raise ClassMismatch(f"group {self.name!r} has no classes")
        dims = set()
        for cls, emb in self.embeddings_per_class.items():
            emb = np.asarray(emb, dtype=np.float64)
            if emb.ndim != 2 or emb.shape[0] < 1:
                raise ClassMismatch(
                    f"group {self.name!r} class {cls!r} needs >= 1 embedding rows"
                )
            self.embeddings_per_class[cls] = emb
            dims.add(emb.shape[1])
        if len(dims) != 1:
            raise DimMismatch(f"group {self.name!r} mixes dims {sorted(dims)}")


@dataclass
class PrototypeSet:
    """Unit-norm prototype rows aligned with an ordered class-name list."""

    class_names: list[str]
    prototypes: np.ndarray
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.prototypes = np.asarray(self.prototypes, dtype=np.float64)
        n = len(self.class_names)
        if n < 2:
            raise ClassMismatch("a prototype set needs at least 2 classes")
        if len(set(self.class_names)) != n:
            raise ClassMismatch("class names must be unique")
        if self.prototypes.shape[0] != n:
            raise ClassMismatch(
                f"{n} class names but {self.prototypes.shape[0]} prototype rows"
            )
        norms = np.linalg.norm(self.prototypes, axis=1)
        off = np.abs(norms - 1.0)
        if off.max() > 1e-9:
            bad = int(off.argmax())
            raise NormError(
                f"prototype row {bad} has norm {norms[bad]:.12f}, expected 1"
            )

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    @property
    def dim(self) -> int:
        return self.prototypes.shape[1]


def pool_micro(groups: list[PromptGroup]) -> PrototypeSet:
    """Mean over the union of all normalized embeddings, re-normalized."""
    class_names = _common_classes(groups)
    rows = []
    for cls in class_names:
        stacked = np.vstack(
            [l2_normalize_rows(g.embeddings_per_class[cls]) for g in groups]
        )
        rows.append(l2_normalize(stacked.mean(axis=0)))
    return PrototypeSet(
        class_names=class_names,
        prototypes=np.vstack(rows),
        provenance={"pooling": "micro", "groups": [g.name for g in groups]},
    )


def pool_macro(groups: list[PromptGroup]) -> PrototypeSet:
    """Mean of normalized per-group means, re-normalized."""
    class_names = _common_classes(groups)
    rows = []
    for cls in class_names:
        group_means = [
            l2_normalize(l2_normalize_rows(g.embeddings_per_class[cls]).mean(axis=0))
            for g in groups
        ]
        rows.append(l2_normalize(np.vstack(group_means).mean(axis=0)))
    return PrototypeSet(
        class_names=class_names,
        prototypes=np.vstack(rows),
        provenance={"pooling": "macro", "groups": [g.name for g in groups]},
    )


def save_prototypes(protos: PrototypeSet, path) -> None:
    """Write the matrix as TPSE plus a JSON sidecar with names/provenance."""
    path = Path(path)
    write_tpse(protos.prototypes, path)
    sidecar = {
        "class_names": protos.class_names,
        "provenance": protos.provenance,
    }
    Path(str(path) + SIDECAR_SUFFIX).write_text(json.dumps(sidecar, indent=2) + "\n")


def load_prototypes(path) -> PrototypeSet:
    """Read matrix + sidecar back, re-validating unit norms.

    Rows off unit norm by more than 1e-3 indicate a foreign file and raise
    NormError; f32 storage keeps round-trip error far below that. Rows are
    re-normalized exactly after the check so downstream invariants hold.
    """
    path = Path(path)
    mat = read_tpse(path)
    sidecar_path = Path(str(path) + SIDECAR_SUFFIX)
    if not sidecar_path.exists():
        raise FormatError(f"missing prototype sidecar {sidecar_path}")
    try:
        sidecar = json.loads(sidecar_path.read_text())
        class_names = list(sidecar["class_names"])
        provenance = dict(sidecar.get("provenance", {}))
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise FormatError(f"bad prototype sidecar {sidecar_path}: {exc}") from exc
    norms = np.linalg.norm(mat, axis=1)
    off = np.abs(norms - 1.0)
    if off.max() > 1e-3:
        bad = int(off.argmax())
        raise NormError(
            f"stored row {bad} has norm {norms[bad]:.6f}; not a prototype file"
        )
    return PrototypeSet(
        class_names=class_names,
        prototypes=mat / norms[:, None],
        provenance=provenance,
    )


def _common_classes(groups: list[PromptGroup]) -> list[str]:
    if not groups:
        raise ClassMismatch("no prompt groups given")
    first = groups[0]
    class_names = list(first.embeddings_per_class.keys())
    reference = set(class_names)
    dim = first.embeddings_per_class[class_names[0]].shape[1]
    for g in groups[1:]:
        if set(g.embeddings_per_class.keys()) != reference:
            raise ClassMismatch(
                f"group {g.name!r} classes differ from group {first.name!r}"
            )
        g_dim = next(iter(g.embeddings_per_class.values())).shape[1]
        if g_dim != dim:
            raise DimMismatch(f"group {g.name!r} dim {g_dim} != {dim}")
    return class_names
