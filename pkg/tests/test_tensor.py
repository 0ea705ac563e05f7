"""Tests for the tensor core: tape, primitives and layer operations."""

import numpy as np
import pytest

from helpers.errors import (
    ConfigurationError,
    ContractError,
    EmptyInputError,
    InputError,
    ShapeError,
)
from helpers.gradcheck import check_input_gradients
from helpers.ops import (
    AttentionParams,
    dense,
    dropout,
    gap,
    layer_norm,
    multi_head_attention,
    sigmoid,
    sigmoid_bce,
    softmax_rows,
)
from helpers.prng import Xoshiro256pp, fisher_yates
from helpers.tensor import (
    Parameter,
    Tape,
    Tensor,
    add,
    backward,
    matmul,
    scale,
    sum_all,
    take_rows,
    zero_grad,
)
from helpers.verify import GRADCHECK_TOLERANCE, op_gradient_errors


class TestTape:
    def test_matmul_backward_matches_closed_form(self):
        a = np.array([[1.0, 2.0], [3.0, 4.0]])
        w = Parameter("w", np.array([[0.5], [-1.0]]))
        with Tape():
            loss = sum_all(matmul(Tensor(a), w))
        backward(loss)
        np.testing.assert_allclose(w.grad, a.sum(axis=0, keepdims=True).T)

    def test_gradients_accumulate_across_calls(self):
        w = Parameter("w", np.array([2.0, 3.0]))
        for _ in range(2):
            with Tape():
                loss = sum_all(scale(w, 3.0))
            backward(loss)
        np.testing.assert_allclose(w.grad, [6.0, 6.0])
        zero_grad([w])
        np.testing.assert_allclose(w.grad, [0.0, 0.0])

    def test_shared_parameter_sums_both_paths(self):
        w = Parameter("w", np.array([1.0, -2.0]))
        with Tape():
            loss = sum_all(add(w, scale(w, 2.0)))
        backward(loss)
        np.testing.assert_allclose(w.grad, [3.0, 3.0])

    def test_unused_parameter_keeps_zero_grad(self):
        used = Parameter("used", np.ones(3))
        unused = Parameter("unused", np.ones(3))
        with Tape():
            loss = sum_all(used)
        backward(loss)
        np.testing.assert_allclose(unused.grad, np.zeros(3))

    def test_backward_needs_scalar(self):
        w = Parameter("w", np.ones(3))
        with Tape():
            out = scale(w, 2.0)
        with pytest.raises(ContractError, match="scalar"):
            backward(out)

    def test_backward_needs_tape(self):
        w = Parameter("w", np.ones(3))
        loss = sum_all(w)
        with pytest.raises(ContractError, match="Tape"):
            backward(loss)

    def test_tensors_are_read_only(self):
        t = Tensor(np.zeros(3))
        with pytest.raises(ValueError):
            t.data[0] = 1.0

    def test_parameter_shape_is_fixed(self):
        w = Parameter("w", np.zeros((2, 2)))
        with pytest.raises(ShapeError, match="w"):
            w.assign(np.zeros(3))


class TestPrimitives:
    def test_matmul_rejects_inner_mismatch(self):
        with pytest.raises(ShapeError, match="inner extents"):
            matmul(Tensor(np.zeros((2, 3))), Tensor(np.zeros((4, 2))))

    def test_take_rows_scatters_gradient_back(self):
        x = np.arange(6.0).reshape(3, 2)
        err = check_input_gradients(
            lambda t: sum_all(scale(take_rows(t, np.array([2, 0, 1])), 2.0)), [x]
        )
        assert err <= GRADCHECK_TOLERANCE


class TestOps:
    def test_every_op_passes_finite_differences(self):
        errors = op_gradient_errors(seed=0)
        worst = max(errors, key=errors.get)
        assert errors[worst] <= GRADCHECK_TOLERANCE, worst

    def test_softmax_rows_sum_to_one_with_large_inputs(self):
        x = Tensor(np.array([[1000.0, 1001.0, 999.0], [-5.0, 0.0, 5.0]]))
        out = softmax_rows(x).numpy()
        np.testing.assert_allclose(out.sum(axis=-1), [1.0, 1.0])
        assert np.all(np.isfinite(out))

    def test_layer_norm_output_is_standardised(self):
        x = Xoshiro256pp.from_key(1, "ln").standard_normal((4, 8)) * 3.0 + 2.0
        gamma, beta = Parameter("g", np.ones(8)), Parameter("b", np.zeros(8))
        out = layer_norm(Tensor(x), gamma, beta).numpy()
        np.testing.assert_allclose(out.mean(axis=-1), 0.0, atol=1e-12)
        np.testing.assert_allclose(out.var(axis=-1), 1.0, atol=1e-4)

    def test_layer_norm_rejects_non_positive_eps(self):
        gamma, beta = Parameter("g", np.ones(2)), Parameter("b", np.zeros(2))
        with pytest.raises(ConfigurationError):
            layer_norm(Tensor(np.ones((1, 2))), gamma, beta, eps=0.0)

    def test_dense_shape_mismatch_names_parameter(self):
        w = Parameter("head/W", np.zeros((4, 1)))
        with pytest.raises(ShapeError, match="head/W"):
            dense(Tensor(np.zeros((2, 3))), w)

    def test_gap_averages_tokens(self):
        x = Tensor(np.array([[[1.0, 2.0], [3.0, 6.0]]]))
        np.testing.assert_allclose(gap(x).numpy(), [[2.0, 4.0]])

    def test_dropout_is_identity_in_eval_mode(self):
        x = Tensor(np.ones((3, 4)))
        assert dropout(x, 0.5, "eval", None) is x

    def test_dropout_rescales_survivors(self):
        x = Tensor(np.ones((64, 64)))
        out = dropout(x, 0.25, "train", Xoshiro256pp.from_seed(3)).numpy()
        survivors = out[out != 0]
        np.testing.assert_allclose(survivors, 1.0 / 0.75)
        assert 0.65 < survivors.size / out.size < 0.85

    def test_dropout_mask_depends_only_on_stream(self):
        x = Tensor(np.ones((8, 8)))
        a = dropout(x, 0.5, "train", Xoshiro256pp.from_seed(9)).numpy()
        b = dropout(x, 0.5, "train", Xoshiro256pp.from_seed(9)).numpy()
        np.testing.assert_array_equal(a, b)

    @pytest.mark.parametrize("rate", [-0.1, 1.0])
    def test_dropout_rate_bounds(self, rate):
        with pytest.raises(ConfigurationError):
            dropout(Tensor(np.ones(2)), rate, "train", Xoshiro256pp.from_seed(0))

    def test_sigmoid_bce_is_finite_for_extreme_logits(self):
        logits = Tensor(np.array([[1000.0], [-1000.0]]))
        loss = sigmoid_bce(logits, np.array([0, 1])).item()
        assert np.isfinite(loss)
        assert loss == pytest.approx(1000.0)

    def test_sigmoid_bce_applies_class_weights(self):
        logits = Tensor(np.zeros((2, 1)))
        plain = sigmoid_bce(logits, np.array([0, 1])).item()
        weighted = sigmoid_bce(logits, np.array([0, 1]), (1.0, 3.0)).item()
        assert weighted == pytest.approx(plain * 2.0)

    def test_sigmoid_is_stable(self):
        out = sigmoid(np.array([-800.0, 0.0, 800.0]))
        np.testing.assert_allclose(out, [0.0, 0.5, 1.0])

    def test_layer_norm_constant_row_is_zero(self):
        gamma, beta = Parameter("g", np.ones(3)), Parameter("b", np.zeros(3))
        out = layer_norm(Tensor(np.array([[5.0, 5.0, 5.0]])), gamma, beta).numpy()
        np.testing.assert_array_equal(out, [[0.0, 0.0, 0.0]])

    def test_gap_rejects_zero_tokens(self):
        with pytest.raises(EmptyInputError):
            gap(Tensor(np.zeros((0, 3))))

    def test_dropout_keeps_the_expected_value(self):
        x = np.tile(np.array([1.0, 2.0, 3.0, 4.0]), (10_000, 1))
        out = dropout(Tensor(x), 0.5, "train", Xoshiro256pp.from_seed(17)).numpy()
        np.testing.assert_allclose(out.mean(axis=0), x[0], rtol=0.05)
        assert out.mean() == pytest.approx(x.mean(), rel=0.02)

    def test_sigmoid_bce_at_zero_logit_is_log_two(self):
        loss = sigmoid_bce(Tensor(np.zeros((1, 1))), np.array([1])).item()
        assert loss == pytest.approx(np.log(2.0), abs=1e-12)

    def test_sigmoid_bce_confident_correct_logit(self):
        loss = sigmoid_bce(Tensor(np.array([[40.0]])), np.array([1])).item()
        assert 0.0 <= loss < 1e-15

    def test_sigmoid_bce_rejects_non_binary_labels(self):
        with pytest.raises(InputError, match="0 or 1"):
            sigmoid_bce(Tensor(np.zeros((2, 1))), np.array([0.0, 0.5]))


def attention_params(d: int, seed: int) -> AttentionParams:
    stream = Xoshiro256pp.from_key(seed, "attention")
    return AttentionParams(
        wq=Parameter("wq", stream.standard_normal((d, d)) * 0.5),
        wk=Parameter("wk", stream.standard_normal((d, d)) * 0.5),
        wv=Parameter("wv", stream.standard_normal((d, d)) * 0.5),
        wo=Parameter("wo", stream.standard_normal((d, d)) * 0.5),
        bo=Parameter("bo", stream.standard_normal(d)),
    )


class TestAttention:
    def test_permuting_rows_permutes_output(self):
        params = attention_params(8, seed=4)
        stream = Xoshiro256pp.from_key(4, "tokens")
        x = stream.standard_normal((6, 8))
        perm = fisher_yates(range(6), stream)
        out = multi_head_attention(Tensor(x), params, heads=2).numpy()
        permuted = multi_head_attention(Tensor(x[perm]), params, heads=2).numpy()
        assert np.max(np.abs(permuted - out[perm])) <= 1e-10

    def test_single_token_attends_to_itself(self):
        params = attention_params(8, seed=5)
        x = Xoshiro256pp.from_key(5, "tokens").standard_normal((1, 8))
        out = multi_head_attention(Tensor(x), params, heads=2).numpy()
        v = x @ params.wv.value.numpy()
        expected = v @ params.wo.value.numpy() + params.bo.value.numpy()
        np.testing.assert_allclose(out, expected, rtol=1e-12, atol=1e-12)

    def test_width_must_divide_into_heads(self):
        with pytest.raises(ConfigurationError):
            multi_head_attention(Tensor(np.zeros((2, 8))), attention_params(8, seed=0), heads=3)
