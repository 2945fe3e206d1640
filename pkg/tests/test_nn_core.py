"""
Unit tests for fedpoison/nn_core.py - MLP, losses and optimizers

Tests:
- ModelSpec shapes and the flat parameter layout
- Forward pass and softmax probabilities
- Analytic gradients against central differences
- SGD and Adam steps
- Minibatching and parameter vector dumps
"""

import numpy as np
import pytest

from fedpoison.errors import NumericError, ShapeError
from fedpoison.nn_core import (
    SGD,
    Adam,
    Batch,
    ModelSpec,
    ModelState,
    dump_param_vector,
    flatten,
    forward_logits,
    init_model,
    iter_minibatches,
    load_param_vector,
    loss_and_grad,
    make_optimizer,
    optimizer_step,
    predict_proba,
    unflatten,
)


def _random_batch(spec: ModelSpec, size: int, seed: int) -> Batch:
    rng = np.random.default_rng(seed)
    return Batch(
        rng.standard_normal((size, spec.input_dim)),
        rng.integers(0, spec.num_classes, size=size),
    )


class TestModelSpec:
    """Test layer bookkeeping."""

    def test_param_dim(self):
        """Test parameter count: (in + 1) * out summed over layers."""
        spec = ModelSpec((2, 3, 2))
        assert spec.param_dim == (2 + 1) * 3 + (3 + 1) * 2
        assert spec.input_dim == 2
        assert spec.num_classes == 2

    def test_rejects_single_layer(self):
        """Test that a ModelSpec needs input and output widths."""
        with pytest.raises(ShapeError):
            ModelSpec((4,))

    def test_rejects_zero_width(self):
        """Test that layer widths must be positive."""
        with pytest.raises(ShapeError):
            ModelSpec((4, 0, 2))

    def test_rejects_unknown_activation(self):
        """Test that only the rectifier is supported."""
        with pytest.raises(ShapeError):
            ModelSpec((4, 2), activation="tanh")


class TestParameterLayout:
    """Test flatten/unflatten and initialisation."""

    def test_layout_is_weights_then_bias_per_layer(self):
        """Test that W (row-major) precedes b within each layer."""
        spec = ModelSpec((2, 3, 1))
        vector = np.arange(spec.param_dim, dtype=np.float64)
        (w1, b1), (w2, b2) = unflatten(spec, vector)
        assert w1.shape == (2, 3)
        assert w1[0, 1] == 1.0
        assert b1.tolist() == [6.0, 7.0, 8.0]
        assert w2.ravel().tolist() == [9.0, 10.0, 11.0]
        assert b2.tolist() == [12.0]
        assert np.array_equal(flatten([(w1, b1), (w2, b2)]), vector)

    def test_codec_preserves_forward(self):
        """Test a model rebuilt from flatten(unflatten(v)) computes the same logits."""
        spec = ModelSpec((5, 8, 3))
        state = init_model(spec, 2)
        rebuilt = ModelState(spec, flatten(unflatten(spec, state.params)))
        inputs = _random_batch(spec, 6, 0).inputs
        assert np.array_equal(forward_logits(rebuilt, inputs), forward_logits(state, inputs))

    def test_unflatten_wrong_length(self):
        """Test that a vector of the wrong length is rejected."""
        with pytest.raises(ShapeError):
            unflatten(ModelSpec((2, 2)), np.zeros(5))

    def test_model_state_checks_length(self):
        """Test that ModelState refuses a mismatched vector."""
        with pytest.raises(ShapeError):
            ModelState(ModelSpec((2, 2)), np.zeros(7))

    def test_init_model_deterministic(self):
        """Test that the same seed gives the same parameters."""
        spec = ModelSpec((5, 8, 3))
        assert np.array_equal(init_model(spec, 7).params, init_model(spec, 7).params)
        assert not np.array_equal(init_model(spec, 7).params, init_model(spec, 8).params)

    def test_init_model_zero_biases(self):
        """Test that biases start at zero."""
        state = init_model(ModelSpec((5, 8, 3)), 0)
        for _, b in state.layers():
            assert np.all(b == 0.0)


class TestForward:
    """Test the forward pass."""

    def test_logits_shape(self):
        """Test logits are batch x classes."""
        spec = ModelSpec((4, 6, 3))
        state = init_model(spec, 0)
        assert forward_logits(state, np.zeros((5, 4))).shape == (5, 3)

    def test_input_width_mismatch(self):
        """Test that a wrong input width raises ShapeError."""
        state = init_model(ModelSpec((4, 3)), 0)
        with pytest.raises(ShapeError):
            forward_logits(state, np.zeros((2, 5)))

    def test_hand_computed_two_layer_net(self):
        """Test a 2-2-2 rectifier net against logits worked out by hand."""
        spec = ModelSpec((2, 2, 2))
        w1, b1 = np.array([[1.0, -1.0], [2.0, 0.0]]), np.array([0.0, 1.0])
        w2, b2 = np.array([[1.0, 2.0], [3.0, 4.0]]), np.array([0.0, 0.5])
        state = ModelState(spec, flatten([(w1, b1), (w2, b2)]))
        # hidden pre-activation [3, 0], rectified [3, 0]
        assert forward_logits(state, np.array([[1.0, 1.0]])).tolist() == [[3.0, 6.5]]
        # hidden pre-activation [-1, 0]: both units cut, logits are b2
        assert forward_logits(state, np.array([[1.0, -1.0]])).tolist() == [[0.0, 0.5]]

    def test_zero_weights_give_zero_logits(self):
        """Test all-zero weights and biases give all-zero logits for any input."""
        spec = ModelSpec((4, 6, 3))
        state = ModelState(spec, np.zeros(spec.param_dim))
        inputs = _random_batch(spec, 7, 2).inputs * 100.0
        assert np.array_equal(forward_logits(state, inputs), np.zeros((7, 3)))

    def test_rows_are_independent(self):
        """Test a single-row batch equals row 0 of the duplicated two-row batch."""
        spec = ModelSpec((4, 6, 3))
        state = init_model(spec, 5)
        row = _random_batch(spec, 1, 6).inputs
        single = forward_logits(state, row)
        double = forward_logits(state, np.vstack([row, row]))
        assert np.allclose(single[0], double[0], rtol=1e-12, atol=0.0)
        assert np.allclose(double[0], double[1], rtol=1e-12, atol=0.0)

    def test_accepts_batch(self):
        """Test a Batch and its bare input matrix give the same logits."""
        spec = ModelSpec((4, 6, 3))
        state = init_model(spec, 0)
        batch = _random_batch(spec, 5, 3)
        assert np.array_equal(forward_logits(state, batch), forward_logits(state, batch.inputs))

    def test_probabilities_sum_to_one(self):
        """Test softmax rows sum to one."""
        spec = ModelSpec((4, 6, 3))
        batch = _random_batch(spec, 10, 1)
        probs = predict_proba(init_model(spec, 0), batch.inputs)
        assert np.allclose(probs.sum(axis=1), 1.0)
        assert np.all(probs >= 0.0)

    def test_probabilities_stable_for_huge_logits(self):
        """Test that very large logits do not overflow."""
        spec = ModelSpec((2, 2))
        state = ModelState(spec, np.array([1e4, -1e4, 0.0, 0.0, 0.0, 0.0]))
        probs = predict_proba(state, np.array([[1.0, 0.0]]))
        assert np.all(np.isfinite(probs))
        assert probs[0, 0] == pytest.approx(1.0)


class TestLossAndGrad:
    """Test loss values and gradients."""

    def test_gradient_matches_central_differences(self):
        """Test analytic gradient against central differences (rel. err <= 1e-4)."""
        spec = ModelSpec((3, 4, 3))
        state = init_model(spec, 3)
        batch = _random_batch(spec, 6, 4)
        _, analytic = loss_and_grad(state, batch)

        h = 1e-6
        numeric = np.zeros(spec.param_dim)
        for i in range(spec.param_dim):
            step = np.zeros(spec.param_dim)
            step[i] = h
            up, _ = loss_and_grad(ModelState(spec, state.params + step), batch)
            down, _ = loss_and_grad(ModelState(spec, state.params - step), batch)
            numeric[i] = (up - down) / (2 * h)

        rel = np.linalg.norm(numeric - analytic) / max(
            np.linalg.norm(numeric) + np.linalg.norm(analytic), 1e-12
        )
        assert rel <= 1e-4

    def test_uniform_logits_loss_is_log_classes(self):
        """Test that zero parameters give loss ln(C)."""
        spec = ModelSpec((3, 4))
        state = ModelState(spec, np.zeros(spec.param_dim))
        loss, _ = loss_and_grad(state, _random_batch(spec, 5, 0))
        assert loss == pytest.approx(np.log(4))

    def test_negative_sign_negates(self):
        """Test sign=-1 returns the negated loss and gradient."""
        spec = ModelSpec((3, 5, 2))
        state = init_model(spec, 0)
        batch = _random_batch(spec, 8, 1)
        loss, grad = loss_and_grad(state, batch, sign=1)
        neg_loss, neg_grad = loss_and_grad(state, batch, sign=-1)
        assert neg_loss == -loss
        assert np.array_equal(neg_grad, -grad)

    def test_invalid_sign(self):
        """Test that sign must be +1 or -1."""
        spec = ModelSpec((3, 2))
        with pytest.raises(ValueError):
            loss_and_grad(init_model(spec, 0), _random_batch(spec, 2, 0), sign=0)

    def test_label_out_of_range(self):
        """Test that labels beyond the class count are rejected."""
        spec = ModelSpec((2, 2))
        batch = Batch(np.zeros((2, 2)), np.array([0, 2]))
        with pytest.raises(ShapeError):
            loss_and_grad(init_model(spec, 0), batch)

    def test_non_finite_inputs_rejected(self):
        """Test that a batch with NaN inputs raises NumericError."""
        with pytest.raises(NumericError):
            Batch(np.array([[np.nan, 0.0]]), np.array([0]))


class TestOptimizers:
    """Test optimizer updates."""

    def test_sgd_step(self):
        """Test w <- w - lr * g."""
        spec = ModelSpec((2, 2))
        state = init_model(spec, 0)
        grad = np.linspace(-1, 1, spec.param_dim)
        new = optimizer_step(state, grad, SGD(0.5))
        assert np.allclose(new.params, state.params - 0.5 * grad)

    def test_adam_first_step(self):
        """Test that the bias-corrected first Adam step is lr * g / (|g| + eps)."""
        spec = ModelSpec((2, 2))
        state = init_model(spec, 0)
        grad = np.linspace(-1, 1, spec.param_dim)
        new = optimizer_step(state, grad, Adam(0.01))
        expected = state.params - 0.01 * grad / (np.abs(grad) + 1e-8)
        assert np.allclose(new.params, expected)

    def test_make_optimizer(self):
        """Test optimizer factory names."""
        assert make_optimizer("sgd", 0.1).name == "sgd"
        assert make_optimizer("adam", 0.1).name == "adam"
        with pytest.raises(ValueError):
            make_optimizer("rmsprop", 0.1)

    def test_step_shape_mismatch(self):
        """Test that a gradient of the wrong length raises ShapeError."""
        state = init_model(ModelSpec((2, 2)), 0)
        with pytest.raises(ShapeError):
            optimizer_step(state, np.zeros(3), SGD(0.1))

    def test_step_non_finite_gradient(self):
        """Test that a NaN gradient raises NumericError."""
        spec = ModelSpec((2, 2))
        grad = np.zeros(spec.param_dim)
        grad[0] = np.nan
        with pytest.raises(NumericError):
            optimizer_step(init_model(spec, 0), grad, SGD(0.1))

    def test_small_sgd_step_reduces_loss(self):
        """Test one full-batch step at lr=1e-3 does not increase the loss."""
        spec = ModelSpec((3, 6, 2))
        state = init_model(spec, 2)
        batch = _random_batch(spec, 20, 5)
        before, grad = loss_and_grad(state, batch)
        after, _ = loss_and_grad(optimizer_step(state, grad, SGD(1e-3)), batch)
        assert after <= before


class TestMinibatches:
    """Test minibatch iteration."""

    def test_epoch_covers_every_sample_once(self):
        """Test that one epoch visits each row exactly once."""
        batch = Batch(np.arange(10, dtype=np.float64).reshape(10, 1), np.zeros(10))
        chunks = list(iter_minibatches(batch, 4, np.random.default_rng(0)))
        assert [len(c) for c in chunks] == [4, 4, 2]
        seen = np.concatenate([c.inputs.ravel() for c in chunks])
        assert sorted(seen.tolist()) == list(range(10))


class TestParamVectorDump:
    """Test the parameter vector text format."""

    def test_dump_and_load_exact(self, tmp_path):
        """Test that values survive a dump exactly."""
        vector = np.random.default_rng(0).standard_normal(17) * 1e-3
        path = tmp_path / "params.txt"
        dump_param_vector(vector, str(path))
        assert path.read_text().splitlines()[0] == "paramvec v1 17"
        assert np.array_equal(load_param_vector(str(path)), vector)

    def test_load_rejects_bad_header(self, tmp_path):
        """Test that a foreign file is rejected."""
        path = tmp_path / "other.txt"
        path.write_text("hello\n1.0\n")
        with pytest.raises(ShapeError):
            load_param_vector(str(path))

    def test_load_rejects_count_mismatch(self, tmp_path):
        """Test that the header count must match the values."""
        path = tmp_path / "short.txt"
        path.write_text("paramvec v1 3\n1.0\n2.0\n")
        with pytest.raises(ShapeError):
            load_param_vector(str(path))
