import numpy as np
import pytest

from samgog import data, nn
from samgog import downstream as ds_mod
from samgog.degree_alloc import AllocConfig
from samgog.encoder import EncoderConfig
from samgog.sampler import GoGGraph, SamplerConfig, WITHOUT_REPLACEMENT


def make_gog(edge_rows, n):
    edges = (
        np.array(edge_rows, dtype=np.int64)
        if edge_rows
        else np.zeros((0, 3), dtype=np.int64)
    )
    return GoGGraph(edges=edges, num_nodes=n, mode=WITHOUT_REPLACEMENT)


class TestDownstreamForward:
    def test_zero_weights_give_uniform_logits(self):
        config = ds_mod.GoGClassifierConfig(hidden_dim=4)
        state = ds_mod.init_downstream_state(3, 2, config, seed=1)
        state.params[...] = 0.0
        gog = make_gog([[0, 1, 1], [1, 0, 1]], 2)
        h = np.random.default_rng(0).normal(size=(2, 3))
        logits = ds_mod.downstream_forward(gog, h, state, config)
        assert np.all(logits == 0.0)
        assert np.allclose(nn.softmax_rows(logits), 0.5)

    def test_edgeless_gog_reduces_to_per_node_transform(self):
        config = ds_mod.GoGClassifierConfig(hidden_dim=4)
        state = ds_mod.init_downstream_state(3, 2, config, seed=2)
        views = state.views()
        h = np.random.default_rng(1).normal(size=(5, 3))
        gog = make_gog([], 5)
        logits = ds_mod.downstream_forward(gog, h, state, config)
        # with only self-loops the propagation matrix is the identity, so
        # each row is the same per-node MLP of the centered embedding
        centered = h - h.mean(axis=0)
        for i in range(5):
            hidden = np.maximum(
                centered[i] @ views["gog1.W"] + views["gog1.b"], 0.0
            )
            expected = hidden @ views["gog2.W"] + views["gog2.b"]
            assert np.allclose(logits[i], expected, atol=1e-12)

    def test_matches_dense_oracle(self):
        config = ds_mod.GoGClassifierConfig(hidden_dim=4, symmetrize=True)
        state = ds_mod.init_downstream_state(3, 2, config, seed=3)
        views = state.views()
        rng = np.random.default_rng(2)
        h = rng.normal(size=(5, 3))
        rows = [[0, 1, 2], [1, 2, 1], [3, 4, 1], [4, 0, 3], [2, 0, 1]]
        gog = make_gog(rows, 5)

        # independent oracle: build weighted adjacency by loops
        w = np.zeros((5, 5))
        for src, dst, mult in rows:
            w[src][dst] += mult
        w = w + w.T
        for i in range(5):
            w[i][i] += 1.0
        deg = w.sum(axis=1)
        prop = w / np.sqrt(deg)[:, None] / np.sqrt(deg)[None, :]
        centered = h - h.mean(axis=0)
        hidden = np.maximum(
            prop @ centered @ views["gog1.W"] + views["gog1.b"], 0.0
        )
        expected = prop @ hidden @ views["gog2.W"] + views["gog2.b"]

        logits = ds_mod.downstream_forward(gog, h, state, config)
        assert np.allclose(logits, expected, atol=1e-12)

    def test_asymmetric_mode_keeps_direction(self):
        config = ds_mod.GoGClassifierConfig(hidden_dim=3, symmetrize=False)
        state = ds_mod.init_downstream_state(2, 2, config, seed=4)
        gog = make_gog([[0, 1, 1]], 2)
        prop = ds_mod.gog_propagation_matrix(gog, symmetrize=False)
        assert prop[1, 0] == 0.0  # no reverse edge added
        assert prop[0, 1] > 0.0

    def test_gradient_matches_central_differences(self):
        config = ds_mod.GoGClassifierConfig(num_layers=2, hidden_dim=5)
        state = ds_mod.init_downstream_state(4, 2, config, seed=5)
        state.params += 0.05 * np.random.default_rng(7).normal(
            size=state.params.shape
        )
        assert state.params.size <= 200
        rng = np.random.default_rng(3)
        h = rng.normal(size=(6, 4))
        gog = make_gog(
            [[0, 1, 1], [1, 2, 2], [2, 3, 1], [3, 4, 1], [4, 5, 2], [5, 0, 1]], 6
        )
        prop = ds_mod.gog_propagation_matrix(gog, symmetrize=True)
        labels = np.array([0, 1, 0, 1, 0, 1])
        labeled = np.array([0, 1, 2, 3])

        _, grad, _ = ds_mod.downstream_loss_and_grad(
            prop, h, state, config, labels, labeled, train=False
        )

        def loss_at(flat):
            probe = nn.ModelState(spec=state.spec, params=flat.copy())
            loss, _, _ = ds_mod.downstream_loss_and_grad(
                prop, h, probe, config, labels, labeled, train=False
            )
            return loss

        step = 1e-5
        numeric = np.zeros_like(grad)
        for i in range(state.params.size):
            up = state.params.copy()
            up[i] += step
            down = state.params.copy()
            down[i] -= step
            numeric[i] = (loss_at(up) - loss_at(down)) / (2 * step)
        denom = np.maximum(np.maximum(np.abs(grad), np.abs(numeric)), 1e-8)
        assert (np.abs(grad - numeric) / denom).max() < 1e-4


class TestComputeMetrics:
    def test_perfect_predictions(self):
        m = ds_mod.compute_metrics(np.array([0, 1, 2]), np.array([0, 1, 2]))
        assert m.accuracy == 1.0
        assert m.balanced_accuracy == 1.0
        assert m.macro_f1 == 1.0

    def test_all_majority_on_ninety_ten(self):
        true = np.array([0] * 90 + [1] * 10)
        pred = np.zeros(100, dtype=int)
        m = ds_mod.compute_metrics(pred, true, num_classes=2)
        assert m.accuracy == pytest.approx(0.9)
        assert m.balanced_accuracy == pytest.approx(0.5)

    def test_hand_confusion_matrix(self):
        true = np.array([0, 0, 0, 0, 1, 1, 1, 2, 2, 2])
        pred = np.array([0, 0, 1, 2, 1, 1, 0, 2, 2, 1])
        m = ds_mod.compute_metrics(pred, true, num_classes=3)
        assert m.accuracy == pytest.approx(0.6)
        assert m.per_class_accuracy[0] == pytest.approx(0.5)
        assert m.per_class_accuracy[1] == pytest.approx(2 / 3)
        assert m.per_class_accuracy[2] == pytest.approx(2 / 3)
        assert m.balanced_accuracy == pytest.approx((0.5 + 2 / 3 + 2 / 3) / 3)
        assert m.macro_f1 == pytest.approx((4 / 7 + 4 / 7 + 2 / 3) / 3)

    def test_absent_class_contributes_zero_f1(self):
        true = np.array([0, 0, 1, 1])
        pred = np.array([0, 0, 1, 1])
        m = ds_mod.compute_metrics(pred, true, num_classes=3)
        assert m.macro_f1 == pytest.approx(2 / 3)  # classes 0, 1 perfect; 2 empty

    def test_balanced_fixture_equates_accuracy_and_balanced(self):
        rng = np.random.default_rng(5)
        true = np.array([0] * 25 + [1] * 25)
        pred = rng.integers(0, 2, size=50)
        m = ds_mod.compute_metrics(pred, true, num_classes=2)
        assert m.balanced_accuracy == pytest.approx(m.accuracy, abs=1e-12)

    def test_head_tail_accuracy(self):
        true = np.array([0, 0, 1, 1])
        pred = np.array([0, 1, 1, 0])
        m = ds_mod.compute_metrics(pred, true, head_idx=[0, 1], tail_idx=[2, 3])
        assert m.head_accuracy == pytest.approx(0.5)
        assert m.tail_accuracy == pytest.approx(0.5)

    def test_empty_input_rejected(self):
        with pytest.raises(ValueError):
            ds_mod.compute_metrics(np.zeros(0, dtype=int), np.zeros(0, dtype=int))


def pipeline_configs(hidden=6):
    return dict(
        alloc_config=AllocConfig(d_bar=4, k_min=2, k_max=20),
        encoder_config=EncoderConfig(hidden_dim=hidden),
        sampler_config=SamplerConfig(seed=13, samples_per_epoch=2),
        downstream_config=ds_mod.GoGClassifierConfig(hidden_dim=hidden),
    )


class TestFullPipeline:
    def test_separable_classes_reach_perfect_accuracy(self):
        ds = data.make_planted_dataset(num_graphs=40, seed=2, noise=0.0)
        split = data.make_class_imbalanced_split(ds, 1.0, 0.5, 0.25, seed=3)
        res = ds_mod.train_full_pipeline(
            ds, split, epochs=50, seed=4, **pipeline_configs()
        )
        assert res.metrics.accuracy == 1.0
        assert res.metrics.balanced_accuracy == 1.0

    def test_loss_decreases_on_separable_task(self):
        ds = data.make_planted_dataset(num_graphs=40, seed=2, noise=0.0)
        split = data.make_class_imbalanced_split(ds, 1.0, 0.5, 0.25, seed=3)
        res = ds_mod.train_full_pipeline(
            ds, split, epochs=50, seed=4, **pipeline_configs()
        )
        assert res.curve[-1].downstream_loss < res.curve[0].downstream_loss
        assert res.curve[-1].encoder_loss < res.curve[0].encoder_loss

    def test_zero_epochs_returns_untrained_metrics(self):
        ds = data.make_planted_dataset(num_graphs=30, seed=5, noise=0.5)
        split = data.make_class_imbalanced_split(ds, 1.0, 0.5, 0.25, seed=6)
        res = ds_mod.train_full_pipeline(
            ds, split, epochs=0, seed=7, **pipeline_configs()
        )
        assert res.curve == ()
        assert 0.0 <= res.metrics.accuracy <= 1.0

    def test_same_seed_reproduces_report_exactly(self):
        ds = data.make_planted_dataset(num_graphs=30, seed=8, noise=0.8)
        split = data.make_class_imbalanced_split(ds, 3.0, 0.5, 0.25, seed=9)
        a = ds_mod.train_full_pipeline(
            ds, split, epochs=8, seed=10, **pipeline_configs()
        )
        b = ds_mod.train_full_pipeline(
            ds, split, epochs=8, seed=10, **pipeline_configs()
        )
        # nan-aware equality: head/tail accuracy is nan when the partition
        # misses the test set
        np.testing.assert_equal(a.metrics.to_dict(), b.metrics.to_dict())
        np.testing.assert_equal(
            [p.__dict__ for p in a.curve], [p.__dict__ for p in b.curve]
        )

    def test_test_labels_cannot_influence_training(self):
        base = data.make_planted_dataset(num_graphs=30, seed=11, noise=0.8)
        split = data.make_class_imbalanced_split(base, 1.0, 0.5, 0.25, seed=12)
        flipped_graphs = list(base.graphs)
        for i in split.test_idx:
            g = flipped_graphs[i]
            flipped_graphs[i] = data.InputGraph(
                id=g.id, edges=g.edges, node_features=g.node_features,
                label=1 - g.label, node_labels=g.node_labels,
            )
        flipped = data.GraphDataset(
            graphs=tuple(flipped_graphs), num_classes=2,
            feature_scheme=base.feature_scheme, feature_dim=base.feature_dim,
        )
        a = ds_mod.train_full_pipeline(
            base, split, epochs=6, seed=13, **pipeline_configs()
        )
        b = ds_mod.train_full_pipeline(
            flipped, split, epochs=6, seed=13, **pipeline_configs()
        )
        # training trajectories identical; only the final scoring differs
        assert a.curve == b.curve
        assert a.metrics.accuracy == pytest.approx(1.0 - b.metrics.accuracy)

    def test_divergence_reports_epoch(self):
        ds = data.make_planted_dataset(num_graphs=20, seed=14, noise=0.5)
        split = data.make_class_imbalanced_split(ds, 1.0, 0.5, 0.25, seed=15)
        cfg = pipeline_configs()
        with pytest.raises(nn.TrainingError, match="epoch"):
            ds_mod.train_full_pipeline(
                ds, split, epochs=3, seed=16, encoder_lr=1e150, **cfg
            )


def test_encoder_baseline_runs_and_scores():
    ds = data.make_planted_dataset(num_graphs=30, seed=17, noise=0.0)
    split = data.make_class_imbalanced_split(ds, 1.0, 0.5, 0.25, seed=18)
    report = ds_mod.train_encoder_baseline(
        ds, split, EncoderConfig(hidden_dim=6), epochs=40, seed=19
    )
    assert report.accuracy == 1.0
