"""Tensor core: softmax, reverse-mode gradients, Adam."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mvfuse.gradcheck import check_gradients, numerical_gradient, relative_error
from mvfuse.tensor import Adam, EmptySupportError, Tensor, backward, concat, softmax, stack


def sum_sq(t):
    return (t * t).sum() * 0.5


class TestSoftmax:
    def test_uniform_logits(self):
        np.testing.assert_allclose(softmax(np.zeros(3)), np.full(3, 1 / 3), atol=1e-15)

    def test_analytic_two_logits(self):
        out = softmax(np.array([0.0, np.log(2.0)]))
        np.testing.assert_allclose(out, [1 / 3, 2 / 3], atol=1e-15)

    def test_masked_matches_removal_oracle(self):
        # oracle: drop the excluded entry, softmax what remains, reinsert a zero
        x = np.array([5.0, 9.9, -1.2])
        out = softmax(x, exclude={1})
        kept = np.exp(x[[0, 2]] - x[[0, 2]].max())
        oracle = kept / kept.sum()
        np.testing.assert_allclose(out[[0, 2]], oracle, atol=1e-15)
        assert out[1] == 0.0
        assert abs(out.sum() - 1.0) < 1e-12

    def test_all_excluded_raises(self):
        with pytest.raises(EmptySupportError):
            softmax(np.array([1.0, 2.0]), exclude={0, 1})

    def test_vector_required(self):
        with pytest.raises(ValueError):
            softmax(np.zeros((2, 2)))

    @given(st.lists(st.floats(-30, 30), min_size=1, max_size=8),
           st.floats(-10, 10))
    @settings(max_examples=60, deadline=None)
    def test_simplex_and_shift_invariance(self, logits, shift):
        x = np.array(logits)
        out = softmax(x)
        assert np.all(out >= 0)
        assert abs(out.sum() - 1.0) < 1e-12
        shifted = softmax(x + shift)
        np.testing.assert_allclose(out, shifted, atol=1e-12)

    def test_masked_shift_invariance_on_support(self):
        x = np.array([0.3, -1.0, 2.0, 0.1])
        base = softmax(x, exclude={2})
        moved = x.copy()
        moved[[0, 1, 3]] += 7.5
        np.testing.assert_allclose(base, softmax(moved, exclude={2}), atol=1e-12)

    def test_differentiable_through_mask(self):
        x = Tensor(np.array([0.5, -0.2, 1.0]), requires_grad=True)
        errs = check_gradients(lambda: sum_sq(softmax(x, exclude={1})), {"x": x})
        assert errs["x"] < 1e-4


class TestBackward:
    def test_sum_gives_ones(self):
        p = Tensor(np.random.default_rng(0).normal(size=(3, 4)), requires_grad=True)
        (grad,) = backward(p.sum(), [p])
        np.testing.assert_array_equal(grad, np.ones((3, 4)))

    def test_half_sum_of_squares_gives_identity(self):
        p = Tensor(np.array([1.0, -2.0, 3.0]), requires_grad=True)
        (grad,) = backward(sum_sq(p), [p])
        np.testing.assert_allclose(grad, p.data, atol=1e-15)

    def test_untouched_leaf_gets_zero(self):
        p = Tensor(np.ones(3), requires_grad=True)
        q = Tensor(np.ones(2), requires_grad=True)
        grads = backward(p.sum(), [p, q])
        np.testing.assert_array_equal(grads[1], np.zeros(2))

    def test_non_scalar_root_raises(self):
        p = Tensor(np.ones(3), requires_grad=True)
        with pytest.raises(ValueError):
            (p * 2.0).backward()

    def test_two_layer_mlp_matches_finite_differences(self):
        rng = np.random.default_rng(7)
        x = Tensor(rng.uniform(-1, 1, (4, 3)), requires_grad=True)
        w1 = Tensor(rng.uniform(-1, 1, (3, 5)), requires_grad=True)
        b1 = Tensor(rng.uniform(-1, 1, 5), requires_grad=True)
        w2 = Tensor(rng.uniform(-1, 1, (5, 2)), requires_grad=True)

        def loss():
            return sum_sq((x @ w1 + b1).tanh() @ w2)

        errs = check_gradients(loss, {"x": x, "w1": w1, "b1": b1, "w2": w2})
        assert max(errs.values()) < 1e-4

    def test_shared_node_accumulates_once_per_path(self):
        p = Tensor(np.array([2.0]), requires_grad=True)
        y = p * p  # dy/dp = 2p through two paths
        (grad,) = backward(y.sum(), [p])
        np.testing.assert_allclose(grad, [4.0])


OPS = {
    "add": lambda a, b: a + b,
    "sub": lambda a, b: a - b,
    "mul": lambda a, b: a * b,
    "div": lambda a, b: a / (b + 2.5),
    "matmul": lambda a, b: a @ b.swapaxes(0, 1),
    "pow": lambda a, b: ((a * a) + 0.5) ** 1.5,
    "exp": lambda a, b: a.exp(),
    "log": lambda a, b: ((a * a) + 0.5).log(),
    "tanh": lambda a, b: a.tanh(),
    "sigmoid": lambda a, b: a.sigmoid(),
    "relu": lambda a, b: (a + 0.01).relu(),
    "mean_axis": lambda a, b: a.mean(axis=0),
    "sum_keepdims": lambda a, b: a.sum(axis=1, keepdims=True),
    "reshape": lambda a, b: a.reshape((6,)),
    "slice": lambda a, b: a[1:, :2],
    "pad": lambda a, b: a.pad_axis(0, 1, 2),
    "softmax_rows": lambda a, b: a.softmax(axis=-1),
    "concat": lambda a, b: concat([a, b], axis=1),
    "stack": lambda a, b: stack([a, b], axis=0),
}


@pytest.mark.parametrize("name", sorted(OPS))
@pytest.mark.parametrize("seed", [0, 1, 2])
def test_op_gradients_match_finite_differences(name, seed):
    rng = np.random.default_rng(seed)
    a = Tensor(rng.uniform(-1, 1, (2, 3)), requires_grad=True)
    b = Tensor(rng.uniform(-1, 1, (2, 3)), requires_grad=True)
    errs = check_gradients(lambda: sum_sq(OPS[name](a, b)), {"a": a, "b": b})
    assert max(errs.values()) < 1e-4, f"{name}: {errs}"


def test_batched_matmul_gradients():
    rng = np.random.default_rng(3)
    a = Tensor(rng.uniform(-1, 1, (2, 3, 4)), requires_grad=True)
    w = Tensor(rng.uniform(-1, 1, (4, 5)), requires_grad=True)
    errs = check_gradients(lambda: sum_sq(a @ w), {"a": a, "w": w})
    assert max(errs.values()) < 1e-4


def test_vector_matmul_gradients():
    rng = np.random.default_rng(4)
    x = Tensor(rng.uniform(-1, 1, 4), requires_grad=True)
    w = Tensor(rng.uniform(-1, 1, (4, 3)), requires_grad=True)
    errs = check_gradients(lambda: sum_sq(x @ w), {"x": x, "w": w})
    assert max(errs.values()) < 1e-4


def test_ops_are_deterministic():
    rng = np.random.default_rng(5)
    a = rng.normal(size=(3, 3))
    first = (Tensor(a).tanh() @ Tensor(a)).softmax(axis=-1).data
    second = (Tensor(a).tanh() @ Tensor(a)).softmax(axis=-1).data
    np.testing.assert_array_equal(first, second)


def test_non_finite_values_rejected():
    with pytest.raises(ValueError):
        Tensor(np.array([1.0, np.inf]))


class TestAdam:
    def test_zero_gradient_fresh_state_leaves_params(self):
        p = Tensor(np.array([1.5, -2.0]), requires_grad=True)
        opt = Adam([p], lr=0.1)
        p.grad = np.zeros(2)
        opt.step()
        np.testing.assert_array_equal(p.data, [1.5, -2.0])

    def test_first_step_matches_hand_evaluation(self):
        # m_hat = v_hat = 1 at step one, so the update is lr / (1 + eps)
        p = Tensor(np.array([1.0]), requires_grad=True)
        opt = Adam([p], lr=0.1)
        p.grad = np.array([1.0])
        opt.step()
        expected = 1.0 - 0.1 * (1.0 / (1.0 + 1e-8))
        assert abs(p.data[0] - expected) < 1e-15
        assert abs(p.data[0] - 0.9) < 1e-8

    def test_identical_inputs_update_identically(self):
        p1 = Tensor(np.array([0.3, 0.7]), requires_grad=True)
        p2 = Tensor(np.array([0.3, 0.7]), requires_grad=True)
        opt = Adam([p1, p2], lr=0.01)
        p1.grad = np.array([0.5, -0.25])
        p2.grad = np.array([0.5, -0.25])
        opt.step()
        np.testing.assert_array_equal(p1.data, p2.data)

    def test_shape_mismatch_raises(self):
        p = Tensor(np.zeros(3), requires_grad=True)
        opt = Adam([p])
        p.grad = np.zeros(2)
        with pytest.raises(ValueError):
            opt.step()

    def test_step_counter_and_decay(self):
        p = Tensor(np.array([1.0]), requires_grad=True)
        opt = Adam([p], lr=0.1)
        for _ in range(3):
            p.grad = np.array([1.0])
            opt.step()
        assert opt.step_count == 3
        assert p.data[0] < 0.9  # keeps moving against a persistent gradient


def test_numerical_gradient_on_quadratic():
    x = np.array([1.0, -2.0, 0.5])
    grad = numerical_gradient(lambda: float(0.5 * np.sum(x**2)), x)
    np.testing.assert_allclose(grad, [1.0, -2.0, 0.5], atol=1e-9)
    assert relative_error(grad, np.array([1.0, -2.0, 0.5])) < 1e-9
