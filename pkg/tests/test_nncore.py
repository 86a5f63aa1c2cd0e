import math

import numpy as np
import pytest

from pssp.errors import (
    AllIgnoredError,
    IndexOutOfRangeError,
    OddDimensionError,
    ShapeMismatchError,
)
from pssp.nncore import (
    AdamState,
    adam_step,
    attention_backward,
    embedding_backward,
    embedding_forward,
    layer_norm,
    layer_norm_backward,
    matmul,
    matmul_backward,
    positional_encoding,
    relu,
    relu_backward,
    scaled_dot_attention,
    softmax_backward,
    softmax_rows,
    sparse_ce_loss,
)

from gradcheck import numerical_grad, rel_err

TRIALS = 20


class TestMatmul:
    def test_identity(self):
        a = np.random.default_rng(0).random((3, 3))
        assert np.array_equal(matmul(np.eye(3), a), a)

    def test_hand_example(self):
        out = matmul(np.array([[1.0, 2.0], [3.0, 4.0]]), np.array([[5.0, 6.0], [7.0, 8.0]]))
        assert np.array_equal(out, np.array([[19.0, 22.0], [43.0, 50.0]]))

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatchError):
            matmul(np.zeros((2, 3)), np.zeros((2, 3)))

    def test_gradcheck(self):
        for trial in range(TRIALS):
            rng = np.random.default_rng(trial)
            m, k, n = rng.integers(1, 6, 3)
            a, b = rng.standard_normal((m, k)), rng.standard_normal((k, n))
            u = rng.standard_normal((m, n))
            da, db = matmul_backward(u, a, b)
            assert rel_err(da, numerical_grad(lambda: float((matmul(a, b) * u).sum()), a)) < 1e-6
            assert rel_err(db, numerical_grad(lambda: float((matmul(a, b) * u).sum()), b)) < 1e-6


class TestSoftmax:
    def test_uniform_row(self):
        assert np.allclose(softmax_rows(np.array([[4.2, 4.2, 4.2]])), 1 / 3, atol=1e-15)

    def test_extreme_row_stable(self):
        out = softmax_rows(np.array([[1000.0, 0.0, -1000.0]]))
        assert np.isfinite(out).all()
        assert np.allclose(out, [[1.0, 0.0, 0.0]], atol=1e-12)

    def test_rows_sum_to_one_within_1e12(self):
        x = np.random.default_rng(1).standard_normal((40, 7)) * 20
        assert np.abs(softmax_rows(x).sum(axis=-1) - 1.0).max() < 1e-12

    def test_shift_invariance_within_1e12(self):
        rng = np.random.default_rng(2)
        x = rng.standard_normal((10, 5))
        shifted = x + rng.standard_normal((10, 1))
        assert np.abs(softmax_rows(x) - softmax_rows(shifted)).max() < 1e-12

    def test_gradcheck(self):
        for trial in range(TRIALS):
            rng = np.random.default_rng(100 + trial)
            x = rng.standard_normal((int(rng.integers(1, 5)), int(rng.integers(2, 7))))
            u = rng.standard_normal(x.shape)
            dx = softmax_backward(u, softmax_rows(x))
            assert rel_err(dx, numerical_grad(lambda: float((softmax_rows(x) * u).sum()), x)) < 1e-6


class TestLayerNorm:
    def test_unit_stats_on_nonconstant_rows(self):
        # rows scaled so the signal variance dominates eps=1e-5
        x = np.random.default_rng(3).standard_normal((20, 32)) * 10.0
        out, _ = layer_norm(x, np.ones(32), np.zeros(32))
        assert np.abs(out.mean(axis=-1)).max() < 1e-12
        assert np.abs(out.var(axis=-1) - 1.0).max() < 1e-6

    def test_constant_row_yields_beta(self):
        beta = np.array([1.0, -2.0, 0.5])
        out, _ = layer_norm(np.full((2, 3), 7.0), np.ones(3), beta)
        assert np.array_equal(out, np.tile(beta, (2, 1)))

    def test_affine_rescale_invariance(self):
        x = np.random.default_rng(4).standard_normal((5, 16)) * 8
        gamma, beta = np.ones(16), np.zeros(16)
        base, _ = layer_norm(x, gamma, beta)
        rescaled, _ = layer_norm(3.5 * x - 2.0, gamma, beta)
        assert np.allclose(base, rescaled, atol=1e-9)

    def test_gradcheck(self):
        for trial in range(TRIALS):
            rng = np.random.default_rng(200 + trial)
            rows, d = int(rng.integers(1, 5)), int(rng.integers(2, 9))
            x = rng.standard_normal((rows, d)) * 3
            gamma = rng.standard_normal(d)
            beta = rng.standard_normal(d)
            u = rng.standard_normal((rows, d))

            def probe():
                return float((layer_norm(x, gamma, beta)[0] * u).sum())

            _, cache = layer_norm(x, gamma, beta)
            dx, dgamma, dbeta = layer_norm_backward(u, cache)
            assert rel_err(dx, numerical_grad(probe, x)) < 1e-6
            assert rel_err(dgamma, numerical_grad(probe, gamma)) < 1e-6
            assert rel_err(dbeta, numerical_grad(probe, beta)) < 1e-6


class TestRelu:
    def test_values(self):
        assert relu(np.array([-1.0, 0.0, 2.0])).tolist() == [0.0, 0.0, 2.0]

    def test_backward_hand_case(self):
        assert relu_backward(np.array([5.0, 5.0]), np.array([-1.0, 2.0])).tolist() == [0.0, 5.0]

    def test_gradcheck_away_from_zero(self):
        for trial in range(TRIALS):
            rng = np.random.default_rng(300 + trial)
            x = rng.standard_normal((3, 4))
            x += np.sign(x) * 0.2  # keep clear of the kink
            u = rng.standard_normal(x.shape)
            dx = relu_backward(u, x)
            assert rel_err(dx, numerical_grad(lambda: float((relu(x) * u).sum()), x)) < 1e-6


class TestEmbedding:
    def test_duplicate_ids_gather_and_accumulate(self):
        table = np.arange(12.0).reshape(4, 3)
        out = embedding_forward(np.array([0, 0]), table)
        assert np.array_equal(out, np.tile(table[0], (2, 1)))
        grad = embedding_backward(np.ones((2, 3)), np.array([0, 0]), 4)
        assert np.array_equal(grad[0], [2.0, 2.0, 2.0])
        assert np.array_equal(grad[1:], np.zeros((3, 3)))

    def test_empty_ids(self):
        out = embedding_forward(np.array([], dtype=np.int64), np.zeros((4, 3)))
        assert out.shape == (0, 3)

    def test_out_of_range(self):
        with pytest.raises(IndexOutOfRangeError):
            embedding_forward(np.array([4]), np.zeros((4, 3)))
        with pytest.raises(IndexOutOfRangeError):
            embedding_forward(np.array([-1]), np.zeros((4, 3)))

    def test_gradcheck_on_table(self):
        for trial in range(TRIALS):
            rng = np.random.default_rng(400 + trial)
            table = rng.standard_normal((5, 4))
            ids = rng.integers(0, 5, int(rng.integers(1, 8)))
            u = rng.standard_normal((len(ids), 4))
            dtable = embedding_backward(u, ids, 5)
            num = numerical_grad(lambda: float((embedding_forward(ids, table) * u).sum()), table)
            assert rel_err(dtable, num) < 1e-6


class TestPositionalEncoding:
    def test_row_zero_alternates(self):
        pe = positional_encoding(4, 6)
        assert np.array_equal(pe[0], [0.0, 1.0, 0.0, 1.0, 0.0, 1.0])

    def test_bounded(self):
        pe = positional_encoding(50, 16)
        assert (np.abs(pe) <= 1.0).all()

    def test_direct_evaluation(self):
        pe = positional_encoding(3, 8)
        assert abs(pe[1, 0] - math.sin(1.0)) < 1e-12
        assert abs(pe[1, 1] - math.cos(1.0)) < 1e-12
        assert abs(pe[2, 2] - math.sin(2.0 / 10000.0 ** (2.0 / 8.0))) < 1e-12

    def test_odd_dimension_rejected(self):
        with pytest.raises(OddDimensionError):
            positional_encoding(4, 7)


class TestAttention:
    def test_single_key_returns_value(self):
        rng = np.random.default_rng(7)
        q, k, v = (rng.standard_normal((1, 8)) for _ in range(3))
        out, _ = scaled_dot_attention(q, k, v)
        assert np.allclose(out, v, atol=1e-15)

    def test_weight_rows_sum_to_one_over_unmasked(self):
        rng = np.random.default_rng(8)
        q, k, v = (rng.standard_normal((6, 4)) for _ in range(3))
        mask = np.array([True, True, False, True, False, True])
        _, (_, _, _, weights, _) = scaled_dot_attention(q, k, v, mask)
        assert np.abs(weights[:, mask].sum(axis=-1) - 1.0).max() < 1e-12
        assert np.array_equal(weights[:, ~mask], np.zeros((6, 2)))

    def test_all_masked_but_one_key_returns_that_value(self):
        rng = np.random.default_rng(9)
        q, k, v = (rng.standard_normal((5, 4)) for _ in range(3))
        mask = np.array([False, False, True, False, False])
        out, _ = scaled_dot_attention(q, k, v, mask)
        assert np.allclose(out, np.tile(v[2], (5, 1)), atol=1e-15)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatchError):
            scaled_dot_attention(np.zeros((2, 3)), np.zeros((2, 4)), np.zeros((2, 4)))

    def test_gradcheck_4x8(self):
        for trial in range(TRIALS):
            rng = np.random.default_rng(500 + trial)
            q, k, v = (rng.standard_normal((4, 8)) for _ in range(3))
            mask = rng.random(4) > 0.3
            mask[0] = True
            u = rng.standard_normal((4, 8))

            def probe():
                return float((scaled_dot_attention(q, k, v, mask)[0] * u).sum())

            _, cache = scaled_dot_attention(q, k, v, mask)
            dq, dk, dv = attention_backward(u, cache)
            assert rel_err(dq, numerical_grad(probe, q)) < 1e-5
            assert rel_err(dk, numerical_grad(probe, k)) < 1e-5
            assert rel_err(dv, numerical_grad(probe, v)) < 1e-5

    def test_gradcheck_batched_heads(self):
        rng = np.random.default_rng(42)
        q, k, v = (rng.standard_normal((2, 2, 3, 4)) for _ in range(3))
        mask = np.ones((2, 1, 1, 3), dtype=bool)
        mask[1, 0, 0, 2] = False
        u = rng.standard_normal((2, 2, 3, 4))

        def probe():
            return float((scaled_dot_attention(q, k, v, mask)[0] * u).sum())

        _, cache = scaled_dot_attention(q, k, v, mask)
        dq, dk, dv = attention_backward(u, cache)
        assert rel_err(dq, numerical_grad(probe, q)) < 1e-5
        assert rel_err(dk, numerical_grad(probe, k)) < 1e-5
        assert rel_err(dv, numerical_grad(probe, v)) < 1e-5


class TestSparseCeLoss:
    def test_uniform_logits_give_ln3(self):
        loss, _ = sparse_ce_loss(np.zeros((4, 3)), np.array([0, 1, 2, 0]))
        assert abs(loss - math.log(3.0)) < 1e-12

    def test_confident_correct_logits_approach_zero(self):
        logits = np.array([[50.0, 0.0, 0.0], [0.0, 50.0, 0.0]])
        loss, _ = sparse_ce_loss(logits, np.array([0, 1]))
        assert loss < 1e-12

    def test_sentinel_rows_ignored_with_zero_grad(self):
        logits = np.random.default_rng(10).standard_normal((3, 3))
        loss_all, _ = sparse_ce_loss(logits[:2], np.array([0, 1]))
        loss_some, grad = sparse_ce_loss(logits, np.array([0, 1, -1]))
        assert abs(loss_all - loss_some) < 1e-15
        assert np.array_equal(grad[2], np.zeros(3))

    def test_all_ignored_raises(self):
        with pytest.raises(AllIgnoredError):
            sparse_ce_loss(np.zeros((2, 3)), np.array([-1, -1]))

    def test_bad_label_raises(self):
        with pytest.raises(IndexOutOfRangeError):
            sparse_ce_loss(np.zeros((1, 3)), np.array([3]))

    def test_gradcheck(self):
        for trial in range(TRIALS):
            rng = np.random.default_rng(600 + trial)
            n = int(rng.integers(2, 7))
            logits = rng.standard_normal((n, 3))
            labels = rng.integers(0, 3, n)
            labels[rng.random(n) < 0.3] = -1
            if (labels == -1).all():
                labels[0] = 0
            _, grad = sparse_ce_loss(logits, labels)
            num = numerical_grad(lambda: sparse_ce_loss(logits, labels)[0], logits)
            assert rel_err(grad, num) < 1e-6


class TestAdam:
    def test_zero_grad_keeps_param(self):
        param = np.array([1.0, -2.0])
        state = AdamState.for_param(param)
        new = adam_step(param, np.zeros(2), state)
        assert np.array_equal(new, param)
        assert state.t == 1

    def test_first_step_magnitude_is_lr_times_sign(self):
        rng = np.random.default_rng(11)
        param = rng.standard_normal(6)
        grad = rng.standard_normal(6) * 4 + np.sign(rng.standard_normal(6))
        state = AdamState.for_param(param, lr=1e-3)
        new = adam_step(param, grad, state)
        # closed form: delta = -lr * g / (|g| + eps) ~= -lr * sign(g)
        assert np.allclose(new - param, -1e-3 * np.sign(grad), atol=1e-8)

    def test_three_steps_descend_quadratic(self):
        x = np.array([1.0])
        state = AdamState.for_param(x, lr=0.1)
        values = [float(x[0] ** 2)]
        for _ in range(3):
            x = adam_step(x, 2.0 * x, state)
            values.append(float(x[0] ** 2))
        assert values[1] < values[0] and values[2] < values[1] and values[3] < values[2]

    def test_t_strictly_increases(self):
        param = np.zeros(3)
        state = AdamState.for_param(param)
        for expected in (1, 2, 3):
            param = adam_step(param, np.ones(3), state)
            assert state.t == expected

    def test_shape_mismatch(self):
        state = AdamState.for_param(np.zeros(3))
        with pytest.raises(ShapeMismatchError):
            adam_step(np.zeros(3), np.zeros(4), state)


class TestDeterminism:
    def test_forwards_bitwise_repeatable(self):
        rng = np.random.default_rng(12)
        x = rng.standard_normal((6, 8)) * 5
        assert np.array_equal(softmax_rows(x), softmax_rows(x.copy()))
        gamma, beta = rng.standard_normal(8), rng.standard_normal(8)
        assert np.array_equal(layer_norm(x, gamma, beta)[0], layer_norm(x.copy(), gamma, beta)[0])
        q, k, v = (rng.standard_normal((4, 8)) for _ in range(3))
        a1, _ = scaled_dot_attention(q, k, v)
        a2, _ = scaled_dot_attention(q.copy(), k.copy(), v.copy())
        assert np.array_equal(a1, a2)
