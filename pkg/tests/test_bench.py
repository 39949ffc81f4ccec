import numpy as np
import pytest

from protoshift.bench import (
    BenchResult,
    SynthSpec,
    generate,
    generate_arrays,
    generate_support_set,
    time_adapt,
)
from protoshift.engine import EngineConfig, run_dataset, summarize
from protoshift.manifest import iter_view_batches, load_manifest
from protoshift.prototypes import load_prototypes


class TestGenerator:
    def test_zero_noise_zero_shift_is_perfectly_separable(self):
        spec = SynthSpec(
            n_classes=5,
            dim=12,
            samples_per_class=3,
            prototype_seed=1,
            global_shift_norm=0.0,
            class_shift_norm=0.0,
            view_noise_sigma=0.0,
            n_views=4,
        )
        protos, batches = generate_arrays(spec)
        preds = list(run_dataset(protos, batches, EngineConfig(steps=0)))
        labels = {b.sample_id: b.label for b in batches}
        assert summarize(preds, labels).accuracy == 1.0

    def test_views_row_zero_is_the_image(self):
        spec = SynthSpec(
            n_classes=2, dim=6, samples_per_class=2, view_noise_sigma=0.3, n_views=5
        )
        _, batches = generate_arrays(spec)
        for batch in batches:
            norms = np.linalg.norm(batch.views, axis=1)
            np.testing.assert_allclose(norms, 1.0, atol=1e-12)

    def test_generate_twice_byte_identical(self, tmp_path):
        spec = SynthSpec(n_classes=3, dim=8, samples_per_class=2, n_views=3, prototype_seed=5)
        first = tmp_path / "first"
        second = tmp_path / "second"
        generate(spec, first)
        generate(spec, second)
        first_files = sorted(p.relative_to(first) for p in first.rglob("*") if p.is_file())
        second_files = sorted(p.relative_to(second) for p in second.rglob("*") if p.is_file())
        assert first_files == second_files
        for rel in first_files:
            assert (first / rel).read_bytes() == (second / rel).read_bytes()

    def test_generated_manifest_loads_and_runs(self, tmp_path):
        spec = SynthSpec(n_classes=3, dim=8, samples_per_class=2, n_views=4)
        manifest_path = generate(spec, tmp_path / "data")
        manifest = load_manifest(manifest_path)
        protos = load_prototypes(manifest.resolve(manifest.prototype_file))
        preds = list(run_dataset(protos, iter_view_batches(manifest), EngineConfig()))
        assert len(preds) == 6

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            SynthSpec(n_classes=1)
        with pytest.raises(ValueError):
            SynthSpec(view_noise_sigma=-0.1)


class TestSupportSetGenerator:
    def test_reproducible(self):
        a, truth_a = generate_support_set(seed=3)
        b, truth_b = generate_support_set(seed=3)
        assert truth_a == truth_b
        np.testing.assert_array_equal(a.positives, b.positives)
        np.testing.assert_array_equal(a.query, b.query)

    def test_separable_by_construction(self):
        support, truth = generate_support_set(seed=4, dim=32)
        pos_mean = support.positives.mean(axis=0)
        neg_mean = support.negatives.mean(axis=0)
        margin = float(support.query @ (pos_mean - neg_mean))
        assert (margin > 0) == (truth == 0)


class TestTiming:
    def test_repeats_minimum_enforced(self):
        with pytest.raises(ValueError):
            time_adapt([4], dim=8, n_views=4, repeats=2)

    def test_results_shape_and_positivity(self):
        results = time_adapt([4, 8], dim=16, n_views=6, repeats=3, warmup=1)
        assert [r.classes for r in results] == [4, 8]
        for r in results:
            assert isinstance(r, BenchResult)
            assert r.mean_ms_per_sample > 0
            assert r.std_ms >= 0
            assert r.dim == 16 and r.n_views == 6
