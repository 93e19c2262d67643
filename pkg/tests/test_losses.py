"""
Tests for the contrastive losses and the mu_glob schedule.
"""

import math

import numpy as np
import pytest

from app.errors import ShapeError, SimulatorError
from app.harness.verify import (
    bank_from_vectors,
    check_loss_gradients,
    check_loss_oracles,
    scripted_glob,
    scripted_moon,
)
from app.losses.contrastive import (
    ContrastiveContext,
    cosine_sim,
    global_contrastive_loss,
    global_contrastive_loss_batch,
    moon_loss,
    moon_loss_batch,
    total_loss,
)
from app.losses.schedule import ScheduleSpec, mu_glob_at_round
from app.federation.models import RepBank


class TestCosine:
    def test_parallel_and_orthogonal(self):
        assert cosine_sim(np.array([1.0, 0.0]), np.array([3.0, 0.0])) == pytest.approx(1.0)
        assert cosine_sim(np.array([1.0, 0.0]), np.array([0.0, 2.0])) == pytest.approx(0.0)

    def test_zero_vector_floors_to_zero(self):
        assert cosine_sim(np.zeros(3), np.array([1.0, 2.0, 3.0])) == 0.0

    def test_length_mismatch(self):
        with pytest.raises(ShapeError):
            cosine_sim(np.zeros(2), np.zeros(3))


class TestMoonLoss:
    def test_symmetric_case_is_ln2(self):
        rng = np.random.default_rng(0)
        z, other = rng.normal(size=(2, 6))
        loss, grad = moon_loss(z, other, other, 0.5)
        assert loss == pytest.approx(math.log(2), abs=1e-12)
        np.testing.assert_allclose(grad, 0.0, atol=1e-12)

    def test_matches_scripted_formula(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            z, zg, zp = rng.normal(size=(3, 5))
            assert moon_loss(z, zg, zp, 0.3)[0] == pytest.approx(scripted_moon(z, zg, zp, 0.3), abs=1e-9)

    def test_batch_is_row_mean(self):
        rng = np.random.default_rng(2)
        z, zg, zp = rng.normal(size=(3, 4, 5))
        batch_loss, _ = moon_loss_batch(z, zg, zp, 0.5)
        rows = [moon_loss(z[i], zg[i], zp[i], 0.5)[0] for i in range(4)]
        assert batch_loss == pytest.approx(np.mean(rows))

    def test_extreme_temperature_stays_finite(self):
        z = np.array([1.0, 0.0])
        loss, grad = moon_loss(z, np.array([-1.0, 0.0]), z, 1e-4)
        assert np.isfinite(loss) and np.isfinite(grad).all()

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            moon_loss_batch(np.zeros((2, 3)), np.zeros((2, 3)), np.zeros((3, 3)), 0.5)

    def test_tau_must_be_positive(self):
        with pytest.raises(SimulatorError):
            moon_loss(np.ones(2), np.ones(2), np.ones(2), 0.0)


class TestGlobalContrastiveLoss:
    def test_single_class_bank_is_zero(self):
        rng = np.random.default_rng(3)
        z, p = rng.normal(size=(2, 4))
        loss, grad = global_contrastive_loss(z, 2, bank_from_vectors({2: p}), 0.5)
        assert loss == pytest.approx(0.0, abs=1e-12)
        np.testing.assert_allclose(grad, 0.0, atol=1e-12)

    def test_matches_scripted_formula(self):
        rng = np.random.default_rng(4)
        prototypes = {cls: rng.normal(size=6) for cls in range(4)}
        bank = bank_from_vectors(prototypes)
        for label in range(4):
            z = rng.normal(size=6)
            got = global_contrastive_loss(z, label, bank, 0.5)[0]
            assert got == pytest.approx(scripted_glob(z, label, prototypes, 0.5), abs=1e-9)

    def test_absent_class_contributes_zero_but_counts_in_mean(self):
        rng = np.random.default_rng(5)
        prototypes = {0: rng.normal(size=4), 1: rng.normal(size=4)}
        z = rng.normal(size=(2, 4))
        loss, grad, skipped = global_contrastive_loss_batch(z, np.array([0, 3]), bank_from_vectors(prototypes), 0.5)
        assert skipped == 1
        assert loss == pytest.approx(scripted_glob(z[0], 0, prototypes, 0.5) / 2)
        assert not grad[1].any()

    def test_empty_bank(self):
        z = np.ones((3, 4))
        loss, grad, skipped = global_contrastive_loss_batch(z, np.array([0, 1, 2]), RepBank.empty(), 0.5)
        assert loss == 0.0 and skipped == 0
        assert not grad.any()

    def test_decreases_as_own_class_similarity_grows(self):
        z = np.array([1.0, 0.0, 0.0])
        losses = []
        for angle in np.linspace(np.pi, 0.0, 9):
            bank = bank_from_vectors({0: np.array([np.cos(angle), np.sin(angle), 0.0]), 1: np.array([0.0, 0.0, 1.0])})
            losses.append(global_contrastive_loss(z, 0, bank, 0.5)[0])
        assert all(later < earlier for earlier, later in zip(losses, losses[1:]))

    def test_dimension_mismatch(self):
        with pytest.raises(ShapeError):
            global_contrastive_loss_batch(np.ones((1, 4)), np.array([0]), bank_from_vectors({0: np.ones(3)}), 0.5)


@pytest.mark.parametrize("scale", [1e-3, 3.0, 1e4])
def test_losses_ignore_projection_scale(scale):
    rng = np.random.default_rng(6)
    z, zg, zp = rng.normal(size=(3, 6))
    bank = bank_from_vectors({cls: rng.normal(size=6) for cls in range(3)})
    assert moon_loss(scale * z, zg, zp, 0.5)[0] == pytest.approx(moon_loss(z, zg, zp, 0.5)[0], abs=1e-9)
    assert global_contrastive_loss(scale * z, 1, bank, 0.5)[0] == pytest.approx(
        global_contrastive_loss(z, 1, bank, 0.5)[0], abs=1e-9
    )


def test_loss_oracle_suite():
    assert check_loss_oracles(trials=100).passed


def test_loss_gradients_match_finite_differences():
    assert check_loss_gradients(seeds=10).passed


class TestTotalLoss:
    def test_composition(self):
        ctx = ContrastiveContext(tau=0.5, mu_moon=5.0, mu_glob=0.5)
        assert total_loss(1.0, 0.2, 0.4, ctx) == pytest.approx(1.0 + 1.0 + 0.2)

    def test_missing_terms_count_as_zero(self):
        ctx = ContrastiveContext(tau=0.5, mu_moon=5.0, mu_glob=1.0)
        assert total_loss(0.7, None, None, ctx) == 0.7

    def test_negative_weight_rejected(self):
        with pytest.raises(SimulatorError):
            ContrastiveContext(tau=0.5, mu_moon=-1.0, mu_glob=0.0)


class TestSchedule:
    @pytest.fixture
    def spec(self):
        return ScheduleSpec(mu_glob_start=1.0, mu_glob_end=1e-4, total_rounds=100, warmup_rounds=5)

    def test_warmup_holds_start(self, spec):
        assert [mu_glob_at_round(t, spec) for t in range(6)] == [1.0] * 6

    def test_linear_decay(self, spec):
        assert mu_glob_at_round(52, spec) == pytest.approx(1.0 - (47 / 95) * (1.0 - 1e-4))

    def test_end_and_beyond(self, spec):
        assert mu_glob_at_round(100, spec) == 1e-4
        assert mu_glob_at_round(500, spec) == 1e-4

    def test_monotone(self, spec):
        values = [mu_glob_at_round(t, spec) for t in range(120)]
        assert all(b <= a for a, b in zip(values, values[1:]))

    def test_zero_schedule_stays_zero(self):
        spec = ScheduleSpec(0.0, 0.0, 10, 5)
        assert spec.is_off
        assert all(mu_glob_at_round(t, spec) == 0.0 for t in range(12))

    @pytest.mark.parametrize("total,warmup", [(5, 5), (3, 4), (10, -1)])
    def test_invalid_rounds(self, total, warmup):
        with pytest.raises(SimulatorError):
            ScheduleSpec(1.0, 0.1, total, warmup)

    def test_end_above_start_rejected(self):
        with pytest.raises(SimulatorError):
            ScheduleSpec(0.1, 1.0, 10, 2)

    def test_negative_round_rejected(self, spec):
        with pytest.raises(SimulatorError):
            mu_glob_at_round(-1, spec)
