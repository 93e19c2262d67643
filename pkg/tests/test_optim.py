"""
Tests for the optimizer, gradient checking helpers and checkpoints.
"""

import numpy as np
import pytest

from app.errors import DataFormatError, NumericalError, ShapeError
from app.nn.checkpoint import load_checkpoint, save_checkpoint
from app.nn.gradcheck import finite_diff_grad, gradient_check, relative_error
from app.nn.model import init_model
from app.nn.optim import sgd_step
from app.nn.weights import Gradients, zeros
from app.harness.verify import tiny_mlp


def _full(arch, value):
    return zeros(arch).map(lambda a: np.full_like(a, value))


class TestSgdStep:
    def test_plain_step(self, mlp_arch):
        w = _full(mlp_arch, 1.0)
        g = Gradients(mlp_arch, {name: np.full_like(a, 2.0) for name, a in w})
        new_w, velocity = sgd_step(w, g, None, lr=0.25)
        assert all(np.allclose(a, 0.5) for _, a in new_w)
        assert all(np.allclose(a, 2.0) for _, a in velocity)

    def test_momentum_and_weight_decay(self, mlp_arch):
        w = _full(mlp_arch, 2.0)
        g = Gradients(mlp_arch, {name: np.ones_like(a) for name, a in w})
        velocity = g.scale(0.5)
        new_w, new_v = sgd_step(w, g, velocity, lr=0.1, momentum=0.9, weight_decay=0.01)
        assert all(np.allclose(a, 1.47) for _, a in new_v)
        assert all(np.allclose(a, 1.853) for _, a in new_w)

    def test_input_weights_untouched(self, mlp_arch):
        w = _full(mlp_arch, 1.0)
        snapshot = w.copy()
        sgd_step(w, Gradients(mlp_arch, {n: np.ones_like(a) for n, a in w}), None, lr=0.1)
        assert w.equals(snapshot)

    def test_non_finite_gradient_names_layer(self, mlp_arch):
        w = _full(mlp_arch, 1.0)
        grads = {name: np.zeros_like(a) for name, a in w}
        grads["proj1.weight"][0, 0] = np.nan
        with pytest.raises(NumericalError) as exc:
            sgd_step(w, Gradients(mlp_arch, grads), None, lr=0.1)
        assert exc.value.details["layer"] == "proj1.weight"

    def test_overflowing_weights_name_layer(self, mlp_arch):
        w = _full(mlp_arch, 3e38)
        g = Gradients(mlp_arch, {name: np.full_like(a, -3e38) for name, a in w})
        with pytest.raises(NumericalError) as exc:
            sgd_step(w, g, None, lr=1.0)
        assert exc.value.details["layer"] == w.names()[0]

    def test_plain_sgd_descends_convex_quadratic(self, mlp_arch):
        w = init_model(mlp_arch, 0)
        velocity = None
        losses = []
        for _ in range(20):
            losses.append(0.5 * float(sum(np.sum(a.astype(np.float64) ** 2) for _, a in w)))
            w, velocity = sgd_step(w, Gradients(mlp_arch, {name: a.copy() for name, a in w}), velocity, lr=0.1)
        assert all(later < earlier for earlier, later in zip(losses, losses[1:]))

    def test_architecture_mismatch(self, mlp_arch):
        other = tiny_mlp(input_dim=6)
        with pytest.raises(ShapeError):
            sgd_step(zeros(mlp_arch), zeros(other).zeros_like(), None, lr=0.1)


class TestGradCheck:
    def test_quadratic_objective(self, mlp_arch):
        w = init_model(mlp_arch, 0).astype(np.float64)

        def objective(params):
            return 0.5 * float(sum(np.sum(a ** 2) for _, a in params))

        numeric = finite_diff_grad(w, objective)
        analytic = Gradients(mlp_arch, {name: a.copy() for name, a in w})
        for name, array in numeric:
            assert relative_error(analytic[name], array) < 1e-8
        assert gradient_check(w, objective, analytic, max_entries=5).passed(1e-8)

    def test_wrong_gradient_is_caught(self, mlp_arch):
        w = init_model(mlp_arch, 0).astype(np.float64)

        def objective(params):
            return float(np.sum(params["classifier.bias"] ** 2))

        wrong = w.zeros_like()
        wrong.arrays["classifier.bias"][:] = 1.0
        assert not gradient_check(w, objective, wrong).passed(1e-3)

    def test_relative_error_of_zero_vectors(self):
        assert relative_error(np.zeros(3), np.zeros(3)) == 0.0


class TestCheckpoint:
    def test_save_and_load(self, tmp_path, mlp_arch):
        w = init_model(mlp_arch, 4)
        path = save_checkpoint(tmp_path / "model.fssw", w)
        assert path.read_bytes()[:4] == b"FSSW"
        assert load_checkpoint(path, mlp_arch).equals(w)

    def test_other_architecture_rejected(self, tmp_path, mlp_arch):
        path = save_checkpoint(tmp_path / "model.fssw", init_model(mlp_arch, 4))
        with pytest.raises(ShapeError):
            load_checkpoint(path, tiny_mlp(input_dim=6))

    def test_bad_magic(self, tmp_path, mlp_arch):
        path = save_checkpoint(tmp_path / "model.fssw", init_model(mlp_arch, 4))
        data = bytearray(path.read_bytes())
        data[:4] = b"XXXX"
        path.write_bytes(bytes(data))
        with pytest.raises(DataFormatError):
            load_checkpoint(path, mlp_arch)

    def test_truncated(self, tmp_path, mlp_arch):
        path = save_checkpoint(tmp_path / "model.fssw", init_model(mlp_arch, 4))
        path.write_bytes(path.read_bytes()[:-4])
        with pytest.raises(DataFormatError):
            load_checkpoint(path, mlp_arch)
