"""
Tests for architectures, layers, forward/backward and initialisation.
"""

import math

import numpy as np
import pytest

from app.errors import ShapeError
from app.harness.verify import model_gradient_check
from app.nn import layers
from app.nn.architecture import ConvSpec, ModelArchitecture, PoolSpec, mlp, small_cnn, resolve_architecture
from app.nn.model import backward, cross_entropy, cross_entropy_with_grad, forward, init_model, predict, project
from app.nn.weights import ModelWeights, zeros


class TestArchitecture:
    def test_small_cnn_layout(self):
        shapes = {name: shape for name, shape, _ in small_cnn().parameter_shapes()}
        assert shapes["conv0.weight"] == (6, 3, 5, 5)
        assert shapes["conv1.weight"] == (16, 6, 5, 5)
        assert shapes["fc0.weight"] == (400, 120)
        assert shapes["fc1.weight"] == (120, 84)
        assert shapes["proj0.weight"] == (84, 256)
        assert shapes["proj1.weight"] == (256, 256)
        assert shapes["classifier.weight"] == (256, 10)

    def test_conv_too_large_names_layer(self):
        arch = ModelArchitecture(input_shape=(1, 4, 4), num_classes=2, convs=(ConvSpec(2, 5),))
        with pytest.raises(ShapeError) as exc:
            arch.validate()
        assert exc.value.details["layer"] == 0

    def test_pool_count_must_match_convs(self):
        arch = ModelArchitecture(
            input_shape=(1, 8, 8), num_classes=2, convs=(ConvSpec(2, 3), ConvSpec(2, 3)), pools=(PoolSpec(),)
        )
        with pytest.raises(ShapeError):
            arch.validate()

    def test_fingerprint_tracks_layout(self):
        assert mlp((5,), 3).fingerprint != mlp((5,), 4).fingerprint
        assert mlp((5,), 3).fingerprint == mlp((5,), 3).fingerprint
        assert len(small_cnn().fingerprint) == 16

    def test_auto_resolution(self):
        assert resolve_architecture("auto", (3, 32, 32), 10).name == "small_cnn"
        assert resolve_architecture("auto", (32,), 4, mlp_hidden=16).fc_widths == (16,)

    def test_small_cnn_rejects_other_inputs(self):
        with pytest.raises(ShapeError):
            resolve_architecture("small_cnn", (3, 28, 28), 10)


class TestLayers:
    def test_conv_matches_direct_loops(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=(2, 3, 6, 6))
        w = rng.normal(size=(4, 3, 3, 3))
        b = rng.normal(size=4)
        out, _ = layers.conv2d_forward(x, w, b, stride=1)
        expected = np.zeros((2, 4, 4, 4))
        for n in range(2):
            for o in range(4):
                for i in range(4):
                    for j in range(4):
                        expected[n, o, i, j] = np.sum(x[n, :, i:i + 3, j:j + 3] * w[o]) + b[o]
        np.testing.assert_allclose(out, expected, rtol=1e-10)

    def test_maxpool_routes_gradient_to_first_maximum(self):
        x = np.array([[[[1.0, 3.0], [3.0, 0.0]]]])
        out, cache = layers.maxpool_forward(x)
        assert out[0, 0, 0, 0] == 3.0
        dx = layers.maxpool_backward(np.ones_like(out), cache)
        np.testing.assert_array_equal(dx[0, 0], [[0.0, 1.0], [0.0, 0.0]])

    def test_relu_mask(self):
        out, mask = layers.relu_forward(np.array([-1.0, 0.0, 2.0]))
        np.testing.assert_array_equal(out, [0.0, 0.0, 2.0])
        np.testing.assert_array_equal(layers.relu_backward(np.ones(3), mask), [0.0, 0.0, 1.0])


class TestForward:
    def test_shapes(self, mlp_arch):
        w = init_model(mlp_arch, seed=0)
        trace = forward(w, np.zeros((7, 5), dtype=np.float32))
        assert trace.logits.shape == (7, 3)
        assert trace.z.shape == (7, mlp_arch.projection_dim)
        assert trace.logits.dtype == np.float32

    def test_wrong_input_shape(self, mlp_arch):
        w = init_model(mlp_arch, seed=0)
        with pytest.raises(ShapeError) as exc:
            forward(w, np.zeros((2, 6)))
        assert exc.value.details["got"] == (2, 6)

    def test_cnn_forward(self, cnn_arch):
        w = init_model(cnn_arch, seed=1)
        trace = forward(w, np.ones((2, 2, 8, 8), dtype=np.float32))
        assert trace.logits.shape == (2, 3)

    @pytest.mark.parametrize("arch_fixture", ["mlp_arch", "cnn_arch"])
    def test_single_sample_matches_its_row_in_a_batch(self, arch_fixture, request):
        arch = request.getfixturevalue(arch_fixture)
        w = init_model(arch, seed=4)
        x = np.random.default_rng(1).normal(size=(64, *arch.input_shape)).astype(np.float32)
        alone = forward(w, x[17:18])
        together = forward(w, x)
        np.testing.assert_allclose(alone.logits[0], together.logits[17], atol=1e-6)
        np.testing.assert_allclose(alone.z[0], together.z[17], atol=1e-6)

    def test_init_is_deterministic(self, mlp_arch):
        assert init_model(mlp_arch, 5).equals(init_model(mlp_arch, 5))
        assert not init_model(mlp_arch, 5).equals(init_model(mlp_arch, 6))

    def test_init_bounds_and_zero_biases(self, mlp_arch):
        w = init_model(mlp_arch, 0)
        for name, shape, fan_in in mlp_arch.parameter_shapes():
            if name.endswith(".bias"):
                assert not w[name].any()
            else:
                assert np.abs(w[name]).max() <= 1 / math.sqrt(fan_in) + 1e-7

    def test_zero_weights_predict_class_zero(self, mlp_arch):
        w = zeros(mlp_arch)
        np.testing.assert_array_equal(predict(w, np.ones((4, 5), dtype=np.float32)), [0, 0, 0, 0])

    def test_project_chunks_match_single_pass(self, mlp_arch):
        w = init_model(mlp_arch, 2)
        x = np.random.default_rng(0).normal(size=(10, 5)).astype(np.float32)
        np.testing.assert_allclose(project(w, x, batch_size=3), forward(w, x).z, rtol=1e-5, atol=1e-6)


class TestCrossEntropy:
    def test_uniform_logits(self):
        assert cross_entropy(np.zeros((3, 4)), np.array([0, 1, 3])) == pytest.approx(math.log(4))

    def test_label_out_of_range(self):
        with pytest.raises(ShapeError):
            cross_entropy(np.zeros((2, 3)), np.array([0, 3]))

    def test_gradient_rows_sum_to_zero(self):
        logits = np.random.default_rng(0).normal(size=(5, 4))
        loss, grad = cross_entropy_with_grad(logits, np.array([0, 1, 2, 3, 0]))
        assert loss == pytest.approx(cross_entropy(logits, np.array([0, 1, 2, 3, 0])))
        np.testing.assert_allclose(grad.sum(axis=1), 0.0, atol=1e-12)

    def test_large_logits_are_stable(self):
        loss = cross_entropy(np.array([[1000.0, 0.0]]), np.array([0]))
        assert np.isfinite(loss) and loss == pytest.approx(0.0)


class TestBackward:
    @pytest.mark.parametrize("seed", range(3))
    def test_mlp_matches_finite_differences(self, mlp_arch, seed):
        result = model_gradient_check(mlp_arch, seed)
        assert result.checked > 0
        assert result.passed(1e-3)

    @pytest.mark.parametrize("seed", range(3))
    def test_cnn_matches_finite_differences(self, cnn_arch, seed):
        result = model_gradient_check(cnn_arch, seed)
        assert result.checked > 0
        assert result.passed(1e-3)

    def test_projection_gradient_only_flows_below_classifier(self, mlp_arch):
        w = init_model(mlp_arch, 0)
        x = np.random.default_rng(1).normal(size=(3, 5)).astype(np.float32)
        trace = forward(w, x)
        grads = backward(trace, w, None, d_z=np.ones_like(trace.z))
        assert not grads["classifier.weight"].any()
        assert grads["proj1.weight"].any()

    def test_trace_from_other_architecture(self, mlp_arch):
        w = init_model(mlp_arch, 0)
        other = init_model(mlp((5,), 4, (7,), 4), 0)
        trace = forward(other, np.zeros((1, 5)))
        with pytest.raises(ShapeError):
            backward(trace, w, np.zeros((1, 3)))


def test_weights_reject_wrong_shapes(mlp_arch):
    arrays = {name: np.zeros(shape, dtype=np.float32) for name, shape, _ in mlp_arch.parameter_shapes()}
    arrays["fc0.weight"] = np.zeros((1, 1), dtype=np.float32)
    with pytest.raises(ShapeError):
        ModelWeights(mlp_arch, arrays)
