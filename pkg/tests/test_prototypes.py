import json

import numpy as np
import pytest

from protoshift.errors import ClassMismatch, DimMismatch, FormatError, NormError
from protoshift.prototypes import (
    PromptGroup,
    PrototypeSet,
    load_prototypes,
    pool_macro,
    pool_micro,
    save_prototypes,
)
from protoshift.tpse import write_tpse


def group(name, per_class):
    return PromptGroup(
        name=name,
        embeddings_per_class={k: np.asarray(v, dtype=np.float64) for k, v in per_class.items()},
    )


def unit_rows(rng, rows, cols):
    mat = rng.normal(size=(rows, cols))
    return mat / np.linalg.norm(mat, axis=1, keepdims=True)


class TestPooling:
    def test_single_embedding_identity(self):
        g = group("only", {"a": [[3.0, 4.0]], "b": [[0.0, 2.0]]})
        out = pool_micro([g])
        np.testing.assert_allclose(out.prototypes, [[0.6, 0.8], [0.0, 1.0]], atol=1e-12)
        assert out.class_names == ["a", "b"]
        assert out.provenance["pooling"] == "micro"

    def test_micro_analytic_two_groups(self):
        ga = group("A", {"a": [[1.0, 0.0]], "b": [[0.0, 1.0]]})
        gb = group("B", {"a": [[0.0, 1.0], [0.0, 1.0]], "b": [[1.0, 0.0], [1.0, 0.0]]})
        out = pool_micro([ga, gb])
        expected = np.array([1.0, 2.0]) / np.sqrt(5.0)
        np.testing.assert_allclose(out.prototypes[0], expected, atol=1e-12)

    def test_macro_analytic_two_groups(self):
        ga = group("A", {"a": [[1.0, 0.0]], "b": [[0.0, 1.0]]})
        gb = group("B", {"a": [[0.0, 1.0], [0.0, 1.0]], "b": [[1.0, 0.0], [1.0, 0.0]]})
        out = pool_macro([ga, gb])
        expected = np.array([1.0, 1.0]) / np.sqrt(2.0)
        np.testing.assert_allclose(out.prototypes[0], expected, atol=1e-12)

    def test_single_group_micro_equals_macro(self):
        rng = np.random.default_rng(51)
        g = group(
            "only",
            {f"c{i}": rng.normal(size=(rng.integers(1, 5), 6)) for i in range(4)},
        )
        np.testing.assert_allclose(
            pool_micro([g]).prototypes, pool_macro([g]).prototypes, atol=1e-12
        )

    def test_one_embedding_per_class_micro_equals_macro(self):
        rng = np.random.default_rng(52)
        groups = [
            group(name, {f"c{i}": rng.normal(size=(1, 5)) for i in range(3)})
            for name in ("A", "B", "C")
        ]
        np.testing.assert_allclose(
            pool_micro(groups).prototypes, pool_macro(groups).prototypes, atol=1e-12
        )

    def test_micro_weights_prompts_not_groups(self):
        # One group with two prompts outweighs defaults differently under
        # micro (per prompt) vs macro (per group).
        ga = group("A", {"a": [[1.0, 0.0]], "b": [[0.0, 1.0]]})
        gb = group("B", {"a": [[0.0, 1.0], [0.0, 1.0]], "b": [[1.0, 0.0], [1.0, 0.0]]})
        micro = pool_micro([ga, gb]).prototypes[0]
        macro = pool_macro([ga, gb]).prototypes[0]
        assert micro[1] > macro[1]

    def test_permutation_invariance(self):
        rng = np.random.default_rng(53)
        embs = {f"c{i}": unit_rows(rng, 4, 6) for i in range(3)}
        base_groups = [
            group("A", embs),
            group("B", {k: unit_rows(rng, 2, 6) for k in embs}),
        ]
        base = pool_micro(base_groups).prototypes
        # Shuffle embedding order within each class of each group.
        shuffled_groups = [
            group(g.name, {k: v[rng.permutation(v.shape[0])] for k, v in g.embeddings_per_class.items()})
            for g in base_groups
        ]
        np.testing.assert_allclose(pool_micro(shuffled_groups).prototypes, base, atol=1e-12)
        # Micro is also invariant to group order.
        np.testing.assert_allclose(
            pool_micro(base_groups[::-1]).prototypes, base, atol=1e-12
        )

    def test_rows_unit_norm(self):
        rng = np.random.default_rng(54)
        groups = [
            group("A", {f"c{i}": rng.normal(size=(3, 8)) * 5 for i in range(4)}),
            group("B", {f"c{i}": rng.normal(size=(2, 8)) * 0.1 for i in range(4)}),
        ]
        for pooled in (pool_micro(groups), pool_macro(groups)):
            np.testing.assert_allclose(
                np.linalg.norm(pooled.prototypes, axis=1), 1.0, atol=1e-9
            )

    def test_class_mismatch(self):
        ga = group("A", {"a": [[1.0, 0.0]], "b": [[0.0, 1.0]]})
        gb = group("B", {"a": [[1.0, 0.0]], "zz": [[0.0, 1.0]]})
        with pytest.raises(ClassMismatch):
            pool_micro([ga, gb])

    def test_dim_mismatch(self):
        ga = group("A", {"a": [[1.0, 0.0]], "b": [[0.0, 1.0]]})
        gb = group("B", {"a": [[1.0, 0.0, 0.0]], "b": [[0.0, 1.0, 0.0]]})
        with pytest.raises(DimMismatch):
            pool_micro([ga, gb])

    def test_empty_group_list(self):
        with pytest.raises(ClassMismatch):
            pool_micro([])
        with pytest.raises(ClassMismatch):
            pool_macro([])


class TestPrototypeSetValidation:
    def test_needs_two_classes(self):
        with pytest.raises(ClassMismatch):
            PrototypeSet(class_names=["a"], prototypes=np.array([[1.0, 0.0]]))

    def test_unique_names(self):
        with pytest.raises(ClassMismatch):
            PrototypeSet(class_names=["a", "a"], prototypes=np.eye(2))

    def test_non_unit_rows_rejected(self):
        with pytest.raises(NormError):
            PrototypeSet(class_names=["a", "b"], prototypes=np.eye(2) * 2.0)


class TestSaveLoad:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(55)
        protos = PrototypeSet(
            class_names=["cat", "dog", "eel"],
            prototypes=unit_rows(rng, 3, 16),
            provenance={"pooling": "micro", "groups": ["A"]},
        )
        path = tmp_path / "protos.tpse"
        save_prototypes(protos, path)
        back = load_prototypes(path)
        assert back.class_names == protos.class_names
        assert back.provenance == protos.provenance
        # Storage is f32; rows are re-normalized on load.
        np.testing.assert_allclose(back.prototypes, protos.prototypes, atol=1e-6)
        np.testing.assert_allclose(np.linalg.norm(back.prototypes, axis=1), 1.0, atol=1e-12)

    def test_truncated_file_rejected(self, tmp_path):
        rng = np.random.default_rng(56)
        protos = PrototypeSet(class_names=["a", "b"], prototypes=unit_rows(rng, 2, 4))
        path = tmp_path / "protos.tpse"
        save_prototypes(protos, path)
        path.write_bytes(path.read_bytes()[:-2])
        with pytest.raises(FormatError):
            load_prototypes(path)

    def test_zero_row_rejected_as_foreign(self, tmp_path):
        path = tmp_path / "foreign.tpse"
        write_tpse(np.array([[1.0, 0.0], [0.0, 0.0]]), path)
        (tmp_path / "foreign.tpse.json").write_text(
            json.dumps({"class_names": ["a", "b"]})
        )
        with pytest.raises(NormError):
            load_prototypes(path)

    def test_missing_sidecar(self, tmp_path):
        path = tmp_path / "bare.tpse"
        write_tpse(np.eye(2), path)
        with pytest.raises(FormatError, match="sidecar"):
            load_prototypes(path)

    def test_bad_sidecar_json(self, tmp_path):
        path = tmp_path / "p.tpse"
        write_tpse(np.eye(2), path)
        (tmp_path / "p.tpse.json").write_text("{nope")
        with pytest.raises(FormatError):
            load_prototypes(path)
