import numpy as np
import pytest

import protoshift.prototypes as prototypes_mod
from protoshift.bench import SynthSpec, generate_arrays, generate_support_set
from protoshift.engine import (
    NEGATIVE,
    POSITIVE,
    EngineConfig,
    SupportSet,
    ViewBatch,
    adapt_one,
    bongard_adapt,
    run_dataset,
    summarize,
)
from protoshift.errors import DimMismatch
from protoshift.optim import OptimConfig, OptimKind
from protoshift.prototypes import PrototypeSet
from protoshift.transforms import ParamInit, TransformKind


def unit_rows(rng, rows, cols):
    mat = rng.normal(size=(rows, cols))
    return mat / np.linalg.norm(mat, axis=1, keepdims=True)


def small_dataset(seed=0, n_samples=8):
    spec = SynthSpec(
        n_classes=4,
        dim=16,
        samples_per_class=max(1, n_samples // 4),
        prototype_seed=seed,
        global_shift_norm=0.4,
        view_noise_sigma=0.2,
        n_views=12,
    )
    return generate_arrays(spec)


class TestAdaptOne:
    @pytest.mark.parametrize(
        "kind",
        [
            TransformKind.PER_CLASS_SHIFT,
            TransformKind.SHARED_SHIFT,
            TransformKind.SCALE,
            TransformKind.SCALE_AND_SHIFT,
        ],
    )
    def test_zero_steps_match_zero_shot(self, kind):
        protos, batches = small_dataset()
        cfg = EngineConfig(steps=0, transform=kind)
        for batch in batches:
            pred = adapt_one(protos, batch, cfg)
            assert pred.predicted_class == pred.zero_shot_class
            assert pred.pre_entropy == pred.post_entropy
            assert not pred.fallback

    def test_clustered_two_class_episode(self):
        # All views sit at normalize(e1 + 0.3 e2): the prediction must stay
        # class 0 after one AdamW step, and a small SGD step must lower the
        # marginal entropy.
        protos = PrototypeSet(class_names=["one", "two"], prototypes=np.eye(2))
        view = np.array([1.0, 0.3]) / np.linalg.norm([1.0, 0.3])
        views = np.tile(view, (4, 1))
        batch = ViewBatch(sample_id="x", views=views)

        adamw = EngineConfig(
            logit_scale=5.0, steps=1, optim=OptimConfig(kind=OptimKind.ADAMW, lr=5e-3)
        )
        pred = adapt_one(protos, batch, adamw)
        assert pred.zero_shot_class == 0
        assert pred.predicted_class == 0

        sgd = EngineConfig(
            logit_scale=5.0, steps=1, optim=OptimConfig(kind=OptimKind.SGD, lr=1e-4)
        )
        pred = adapt_one(protos, batch, sgd)
        assert pred.post_entropy < pred.pre_entropy

    def test_single_view_with_small_ratio(self):
        protos, _ = small_dataset()
        rng = np.random.default_rng(71)
        batch = ViewBatch(sample_id="solo", views=unit_rows(rng, 1, 16))
        cfg = EngineConfig(selection_ratio=0.1)
        pred = adapt_one(protos, batch, cfg)
        assert pred.selected_views == [0]
        assert not pred.fallback

    def test_zero_norm_falls_back_to_zero_shot(self):
        protos, batches = small_dataset()
        cfg = EngineConfig(
            transform=TransformKind.SCALE, param_init=ParamInit(scale_init=0.0)
        )
        pred = adapt_one(protos, batches[0], cfg)
        assert pred.fallback
        assert pred.predicted_class == pred.zero_shot_class
        assert np.isnan(pred.pre_entropy)

    def test_exact_tie_breaks_to_lower_index(self):
        protos = PrototypeSet(class_names=["one", "two"], prototypes=np.eye(2))
        view = np.array([[1.0, 1.0]]) / np.sqrt(2.0)
        pred = adapt_one(protos, ViewBatch(sample_id="t", views=view), EngineConfig(steps=0))
        assert pred.predicted_class == 0

    def test_dim_mismatch_rejected(self):
        protos, _ = small_dataset()
        rng = np.random.default_rng(72)
        batch = ViewBatch(sample_id="bad", views=unit_rows(rng, 3, 9))
        with pytest.raises(DimMismatch):
            adapt_one(protos, batch, EngineConfig())

    def test_selection_count_from_ratio(self):
        cfg = EngineConfig(selection_ratio=0.1)
        assert cfg.k_for(64) == 6
        assert cfg.k_for(10) == 1
        assert cfg.k_for(1) == 1
        assert EngineConfig(selection_ratio=1.0).k_for(7) == 7

    def test_unnormalized_views_are_normalized(self):
        protos, _ = small_dataset()
        rng = np.random.default_rng(73)
        views = unit_rows(rng, 6, 16) * 37.5  # stored unnormalized
        scaled = ViewBatch(sample_id="s", views=views)
        unit = ViewBatch(sample_id="s", views=views / 37.5)
        cfg = EngineConfig()
        a = adapt_one(protos, scaled, cfg)
        b = adapt_one(protos, unit, cfg)
        assert a.predicted_class == b.predicted_class
        assert a.pre_entropy == pytest.approx(b.pre_entropy, abs=1e-12)


class TestRunDataset:
    def test_order_invariance(self):
        protos, batches = small_dataset()
        cfg = EngineConfig(seed=3)
        ordered = {p.sample_id: p for p in run_dataset(protos, batches, cfg)}
        rng = np.random.default_rng(74)
        shuffled_batches = [batches[i] for i in rng.permutation(len(batches))]
        shuffled = {p.sample_id: p for p in run_dataset(protos, shuffled_batches, cfg)}
        assert ordered == shuffled

    def test_worker_invariance(self):
        protos, batches = small_dataset()
        cfg = EngineConfig(seed=5)
        single = list(run_dataset(protos, batches, cfg, workers=1))
        multi = list(run_dataset(protos, batches, cfg, workers=4))
        assert single == multi

    def test_results_in_input_order(self):
        protos, batches = small_dataset()
        preds = list(run_dataset(protos, batches, EngineConfig(), workers=3))
        assert [p.sample_id for p in preds] == [b.sample_id for b in batches]

    def test_empty_stream(self):
        protos, _ = small_dataset()
        preds = list(run_dataset(protos, [], EngineConfig()))
        summary = summarize(preds)
        assert preds == []
        assert summary.samples == 0
        assert summary.accuracy is None

    def test_summary_counts(self):
        protos, batches = small_dataset()
        cfg = EngineConfig(steps=0)
        preds = list(run_dataset(protos, batches, cfg))
        labels = {b.sample_id: b.label for b in batches}
        summary = summarize(preds, labels)
        assert summary.samples == len(batches)
        assert summary.labeled == len(batches)
        manual = sum(p.predicted_class == labels[p.sample_id] for p in preds)
        assert summary.accuracy == manual / len(batches)

    def test_all_correct_accuracy_one(self):
        spec = SynthSpec(
            n_classes=3,
            dim=8,
            samples_per_class=2,
            prototype_seed=9,
            global_shift_norm=0.0,
            view_noise_sigma=0.0,
            n_views=4,
        )
        protos, batches = generate_arrays(spec)
        preds = list(run_dataset(protos, batches, EngineConfig(steps=0)))
        summary = summarize(preds, {b.sample_id: b.label for b in batches})
        assert summary.accuracy == 1.0

    def test_prototypes_never_rebuilt_between_runs(self, monkeypatch):
        protos, batches = small_dataset()
        constructions = {"count": 0}
        original = prototypes_mod.PrototypeSet.__post_init__

        def counting(self):
            constructions["count"] += 1
            return original(self)

        monkeypatch.setattr(prototypes_mod.PrototypeSet, "__post_init__", counting)
        cfg = EngineConfig()
        list(run_dataset(protos, batches[:4], cfg))
        list(run_dataset(protos, batches[4:], cfg))
        assert constructions["count"] == 0


class TestBongard:
    def test_separable_support_classified_correctly(self):
        support, truth = generate_support_set(seed=42, dim=32)
        cfg = EngineConfig(optim=OptimConfig(kind=OptimKind.ADAMW, lr=5e-3))
        result = bongard_adapt(support, cfg, seed=1)
        assert result.predicted == truth
        assert result.support_accuracy == 1.0
        assert not result.fallback

    def test_query_side_controls_prediction(self):
        rng = np.random.default_rng(75)
        axis = unit_rows(rng, 1, 16)[0]
        positives = unit_rows(rng, 6, 16) * 0.2 + axis
        negatives = unit_rows(rng, 6, 16) * 0.2 - axis
        cfg = EngineConfig(optim=OptimConfig(kind=OptimKind.ADAMW, lr=5e-3))
        pos_query = SupportSet(positives=positives, negatives=negatives, query=axis)
        neg_query = SupportSet(positives=positives, negatives=negatives, query=-axis)
        assert bongard_adapt(pos_query, cfg, seed=2).predicted == POSITIVE
        assert bongard_adapt(neg_query, cfg, seed=2).predicted == NEGATIVE

    def test_zero_steps_deterministic_given_seed(self):
        support, _ = generate_support_set(seed=7, dim=16)
        support.steps = 0
        cfg = EngineConfig()
        first = bongard_adapt(support, cfg, seed=11)
        second = bongard_adapt(support, cfg, seed=11)
        assert first == second
        assert np.isfinite(first.final_loss)

    def test_default_step_count(self):
        support, _ = generate_support_set(seed=8)
        assert support.steps == 64
        assert support.class_init_sigma == 0.02

    def test_mixed_dims_rejected(self):
        rng = np.random.default_rng(76)
        with pytest.raises(DimMismatch):
            SupportSet(
                positives=unit_rows(rng, 6, 8),
                negatives=unit_rows(rng, 6, 8),
                query=unit_rows(rng, 1, 4)[0],
            )
