import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from samgog import nn


def small_spec():
    return nn.ParamSpec((("w", (2, 3)), ("b", (3,))))


class TestParamSpec:
    def test_views_write_through(self):
        spec = small_spec()
        flat = np.zeros(spec.total)
        views = spec.views(flat)
        views["w"][1, 2] = 7.0
        views["b"][0] = -1.0
        assert flat[5] == 7.0 and flat[6] == -1.0

    def test_glorot_bounds_and_zero_bias(self):
        spec = small_spec()
        flat = nn.glorot_init(spec, 1, 2)
        views = spec.views(flat)
        a = math.sqrt(6.0 / 5.0)
        assert np.all(np.abs(views["w"]) <= a)
        assert np.all(views["b"] == 0.0)
        assert np.array_equal(flat, nn.glorot_init(spec, 1, 2))


class TestCrossEntropy:
    def test_uniform_binary_is_ln2(self):
        logits = np.zeros((4, 2))
        labels = np.array([0, 1, 0, 1])
        loss, _ = nn.cross_entropy_and_dlogits(logits, labels, np.arange(4))
        assert loss == pytest.approx(math.log(2.0), abs=1e-12)

    def test_confident_correct_is_near_zero(self):
        logits = np.array([[30.0, 0.0], [0.0, 30.0]])
        labels = np.array([0, 1])
        loss, dlogits = nn.cross_entropy_and_dlogits(logits, labels, np.arange(2))
        assert loss < 1e-10
        assert np.abs(dlogits).max() < 1e-10

    def test_gradient_zero_outside_subset(self):
        logits = np.random.default_rng(0).normal(size=(5, 3))
        labels = np.array([0, 1, 2, 0, 1])
        _, dlogits = nn.cross_entropy_and_dlogits(logits, labels, np.array([1, 3]))
        assert np.all(dlogits[[0, 2, 4]] == 0.0)

    def test_empty_subset_rejected(self):
        with pytest.raises(nn.TrainingError):
            nn.cross_entropy_and_dlogits(
                np.zeros((2, 2)), np.zeros(2, dtype=int), np.zeros(0, dtype=int)
            )

    def test_dlogits_matches_finite_difference(self):
        rng = np.random.default_rng(1)
        logits = rng.normal(size=(4, 3))
        labels = np.array([2, 0, 1, 1])
        subset = np.array([0, 2, 3])
        _, dlogits = nn.cross_entropy_and_dlogits(logits, labels, subset)
        eps = 1e-6
        for i in range(4):
            for j in range(3):
                up = logits.copy()
                up[i, j] += eps
                down = logits.copy()
                down[i, j] -= eps
                lu, _ = nn.cross_entropy_and_dlogits(up, labels, subset)
                ld, _ = nn.cross_entropy_and_dlogits(down, labels, subset)
                assert dlogits[i, j] == pytest.approx((lu - ld) / (2 * eps), abs=1e-8)


class TestNormalizeAdjacency:
    def test_two_node_hand_computation(self):
        # A + I = [[1, 1], [1, 1]], degrees 2 -> every entry 1/2
        a = np.array([[0.0, 1.0], [1.0, 0.0]])
        prop = nn.normalize_adjacency(a)
        assert np.allclose(prop, np.full((2, 2), 0.5), atol=1e-15)

    def test_isolated_node_self_loop_only(self):
        prop = nn.normalize_adjacency(np.zeros((1, 1)))
        assert np.array_equal(prop, np.ones((1, 1)))


class TestOptimizer:
    def make_state(self, params, optimizer="sgd", lr=0.1, schedule="constant"):
        spec = nn.ParamSpec((("p", (params.size,)),))
        return nn.ModelState(
            spec=spec, params=params.astype(float).copy(),
            optimizer=optimizer, learning_rate=lr, schedule=schedule,
        )

    def test_zero_grad_leaves_parameters(self):
        state = self.make_state(np.array([1.0, -2.0]), optimizer="adam")
        before = state.params.copy()
        nn.optimizer_step(state, np.zeros(2))
        assert np.array_equal(state.params, before)

    def test_sgd_unit_rate_with_grad_theta_zeroes(self):
        state = self.make_state(np.array([3.0, -4.0]), optimizer="sgd", lr=1.0)
        nn.optimizer_step(state, state.params.copy())
        assert np.array_equal(state.params, np.zeros(2))

    def test_adam_descends_quadratic_bowl(self):
        state = self.make_state(np.array([5.0, -3.0]), optimizer="adam", lr=0.1)
        losses = []
        for _ in range(10):
            losses.append(float(0.5 * (state.params**2).sum()))
            nn.optimizer_step(state, state.params.copy())
        losses.append(float(0.5 * (state.params**2).sum()))
        assert all(b < a for a, b in zip(losses, losses[1:]))

    def test_inverse_schedule_divides_by_step(self):
        state = self.make_state(np.array([0.0]), optimizer="sgd", lr=1.0,
                                schedule="inverse")
        nn.optimizer_step(state, np.array([1.0]))  # step 1: lr 1
        nn.optimizer_step(state, np.array([1.0]))  # step 2: lr 1/2
        nn.optimizer_step(state, np.array([1.0]))  # step 3: lr 1/3
        assert state.params[0] == pytest.approx(-(1.0 + 0.5 + 1 / 3), abs=1e-12)

    def test_non_finite_grad_halts(self):
        state = self.make_state(np.array([1.0]))
        with pytest.raises(nn.TrainingError):
            nn.optimizer_step(state, np.array([np.nan]))

    def test_length_mismatch_rejected(self):
        state = self.make_state(np.array([1.0]))
        with pytest.raises(nn.TrainingError):
            nn.optimizer_step(state, np.zeros(2))


class TestCheckpoint:
    def test_round_trip(self, tmp_path):
        tensors = {
            "layer1.W": np.random.default_rng(0).normal(size=(3, 4)),
            "layer1.b": np.arange(4.0),
            "scalarish": np.array(2.5),
        }
        path = tmp_path / "ckpt.bin"
        nn.save_checkpoint(str(path), tensors)
        back = nn.load_checkpoint(str(path))
        assert set(back) == set(tensors)
        for name in tensors:
            assert np.array_equal(back[name], tensors[name])

    def test_version_byte_checked(self, tmp_path):
        path = tmp_path / "bad.bin"
        path.write_bytes(b"\x63junk")
        with pytest.raises(ValueError):
            nn.load_checkpoint(str(path))

    def test_model_state_round_trip(self, tmp_path):
        spec = small_spec()
        state = nn.init_model_state(spec, (5,))
        tensors = nn.model_tensors(state)
        path = tmp_path / "m.bin"
        nn.save_checkpoint(str(path), tensors)
        other = nn.init_model_state(spec, (6,))
        assert not np.array_equal(other.params, state.params)
        nn.load_model_params(other, nn.load_checkpoint(str(path)))
        assert np.array_equal(other.params, state.params)


@given(st.lists(st.floats(min_value=-30, max_value=30), min_size=2, max_size=6))
@settings(max_examples=50, deadline=None)
def test_softmax_rows_sum_to_one(row):
    p = nn.softmax_rows(np.array([row]))
    assert p.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.all(p >= 0.0)
