"""
Built-in oracle suite behind the verify subcommand.

Every check compares the implementation against an independent
computation: direct formulas for the losses, central finite differences
for gradients, hand arithmetic for the schedule, optimizer and averaging.
"""

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List

import numpy as np

from app.federation.aggregation import aggregate_weights
from app.federation.models import RepBank, RepEntry
from app.losses.contrastive import (
    global_contrastive_loss,
    global_contrastive_loss_batch,
    moon_loss,
    moon_loss_batch,
)
from app.losses.schedule import ScheduleSpec, mu_glob_at_round
from app.nn.architecture import ConvSpec, ModelArchitecture, PoolSpec
from app.nn.gradcheck import gradient_check, relative_error
from app.nn.model import backward, cross_entropy, cross_entropy_with_grad, forward, init_model
from app.nn.optim import sgd_step
from app.nn.weights import Gradients, ModelWeights, zeros
from app.utils.logging import get_logger

logger = get_logger(__name__)

LOSS_ORACLE_TOL = 1e-5
TRIVIAL_TOL = 1e-6
LAYER_GRAD_TOL = 1e-3
LOSS_GRAD_TOL = 1e-4
EPS = 1e-3


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: Dict[str, Any] = field(default_factory=dict)


@dataclass
class VerifyReport:
    checks: List[CheckResult] = field(default_factory=list)

    @property
    def all_passed(self) -> bool:
        return all(check.passed for check in self.checks)

    def lines(self) -> List[str]:
        out = []
        for check in self.checks:
            extra = ", ".join(f"{k}={v}" for k, v in check.detail.items())
            out.append(f"{'PASS' if check.passed else 'FAIL'}  {check.name}" + (f"  ({extra})" if extra else ""))
        return out


def tiny_mlp(input_dim: int = 5, num_classes: int = 3) -> ModelArchitecture:
    return ModelArchitecture(
        input_shape=(input_dim,), num_classes=num_classes, fc_widths=(7,), proj_widths=(6, 4), name="tiny_mlp"
    )


def tiny_cnn(num_classes: int = 3) -> ModelArchitecture:
    return ModelArchitecture(
        input_shape=(2, 8, 8),
        num_classes=num_classes,
        convs=(ConvSpec(out_channels=3, kernel=3),),
        pools=(PoolSpec(size=2, stride=2),),
        fc_widths=(8,),
        proj_widths=(6, 5),
        name="tiny_cnn",
    )


def bank_from_vectors(vectors: Dict[int, np.ndarray], round: int = 0) -> RepBank:
    """Bank with one single-source entry per class."""
    return RepBank(
        entries={cls: RepEntry(vector=np.asarray(v), count=10, sources=(0,)) for cls, v in vectors.items()},
        round=round,
    )


def _cos(a: np.ndarray, b: np.ndarray) -> float:
    return float(a @ b / (max(np.linalg.norm(a), 1e-12) * max(np.linalg.norm(b), 1e-12)))


def scripted_moon(z: np.ndarray, z_glob: np.ndarray, z_prev: np.ndarray, tau: float) -> float:
    pos = math.exp(_cos(z, z_glob) / tau)
    neg = math.exp(_cos(z, z_prev) / tau)
    return -math.log(pos / (pos + neg))


def scripted_glob(z: np.ndarray, label: int, prototypes: Dict[int, np.ndarray], tau: float) -> float:
    terms = {cls: math.exp(_cos(z, p) / tau) for cls, p in prototypes.items()}
    return -math.log(terms[label] / sum(terms.values()))


def check_loss_oracles(trials: int = 100, seed: int = 0) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        dim = int(rng.integers(2, 16))
        tau = float(rng.uniform(0.1, 1.0))
        z, zg, zp = rng.normal(size=(3, dim))
        worst = max(worst, abs(moon_loss(z, zg, zp, tau)[0] - scripted_moon(z, zg, zp, tau)))

        classes = int(rng.integers(2, 6))
        prototypes = {cls: rng.normal(size=dim) for cls in range(classes)}
        label = int(rng.integers(classes))
        got = global_contrastive_loss(z, label, bank_from_vectors(prototypes), tau)[0]
        worst = max(worst, abs(got - scripted_glob(z, label, prototypes, tau)))
    return CheckResult("loss oracles", worst < LOSS_ORACLE_TOL, {"trials": trials, "max_abs_error": f"{worst:.2e}"})


def check_trivial_losses() -> CheckResult:
    rng = np.random.default_rng(1)
    z, other = rng.normal(size=(2, 8))
    symmetric = moon_loss(z, other, other, 0.5)[0]
    single = global_contrastive_loss(z, 3, bank_from_vectors({3: other}), 0.5)[0]
    passed = abs(symmetric - math.log(2)) < TRIVIAL_TOL and abs(single) < TRIVIAL_TOL
    return CheckResult("trivial loss values", passed, {"ln2_case": f"{symmetric:.8f}", "single_class": f"{single:.2e}"})


def _numeric_grad(fn: Callable[[np.ndarray], float], x: np.ndarray, eps: float = EPS) -> np.ndarray:
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    out = grad.reshape(-1)
    for index in range(flat.size):
        original = flat[index]
        flat[index] = original + eps
        plus = fn(x)
        flat[index] = original - eps
        minus = fn(x)
        flat[index] = original
        out[index] = (plus - minus) / (2 * eps)
    return grad


def check_loss_gradients(seeds: int = 10) -> CheckResult:
    worst = 0.0
    for seed in range(seeds):
        rng = np.random.default_rng(100 + seed)
        z = rng.normal(size=(4, 6))
        z_glob, z_prev = rng.normal(size=(2, 4, 6))
        labels = np.array([0, 1, 2, 5])
        bank = bank_from_vectors({cls: rng.normal(size=6) for cls in range(4)})

        _, analytic = moon_loss_batch(z, z_glob, z_prev, 0.5)
        numeric = _numeric_grad(lambda v: moon_loss_batch(v, z_glob, z_prev, 0.5)[0], z.copy())
        worst = max(worst, relative_error(analytic, numeric))

        _, analytic, _ = global_contrastive_loss_batch(z, labels, bank, 0.5)
        numeric = _numeric_grad(lambda v: global_contrastive_loss_batch(v, labels, bank, 0.5)[0], z.copy())
        worst = max(worst, relative_error(analytic, numeric))
    return CheckResult("loss gradients", worst < LOSS_GRAD_TOL, {"seeds": seeds, "max_rel_error": f"{worst:.2e}"})


def model_gradient_check(arch: ModelArchitecture, seed: int, batch: int = 4):
    """Check backward against finite differences on l_class + <z, r> in float64."""
    rng = np.random.default_rng(seed)
    w = init_model(arch, seed).astype(np.float64)
    x = rng.normal(size=(batch, *arch.input_shape))
    y = rng.integers(arch.num_classes, size=batch)
    probe = rng.normal(size=(batch, arch.projection_dim))

    def objective(params: ModelWeights) -> float:
        trace = forward(params, x)
        return cross_entropy(trace.logits, y) + float(np.sum(trace.z * probe))

    trace = forward(w, x)
    _, d_logits = cross_entropy_with_grad(trace.logits, y)
    analytic = backward(trace, w, d_logits, d_z=probe)
    return gradient_check(w, objective, analytic, eps=EPS, pattern=lambda params: forward(params, x).activation_pattern())


def check_layer_gradients(seeds: int = 10) -> CheckResult:
    worst = 0.0
    checked = skipped = 0
    for arch in (tiny_mlp(), tiny_cnn()):
        for seed in range(seeds):
            result = model_gradient_check(arch, seed)
            worst = max(worst, result.max_error)
            checked += result.checked
            skipped += result.skipped_kinks
    return CheckResult(
        "layer gradients",
        worst < LAYER_GRAD_TOL and checked > 0,
        {"seeds": seeds, "entries": checked, "kinks_skipped": skipped, "max_rel_error": f"{worst:.2e}"},
    )


def check_schedule() -> CheckResult:
    spec = ScheduleSpec(mu_glob_start=1.0, mu_glob_end=1e-4, total_rounds=100, warmup_rounds=5)
    values = [mu_glob_at_round(t, spec) for t in (0, 4, 5, 100, 150)]
    middle = mu_glob_at_round(52, spec)
    expected_middle = 1.0 - (47 / 95) * (1.0 - 1e-4)
    passed = (
        values[:3] == [1.0, 1.0, 1.0]
        and values[3:] == [1e-4, 1e-4]
        and abs(middle - expected_middle) < 1e-12
    )
    return CheckResult("mu_glob schedule", passed, {"t52": f"{middle:.6f}"})


def check_sgd() -> CheckResult:
    arch = tiny_mlp()
    w = zeros(arch).map(lambda a: np.full_like(a, 2.0))
    g = Gradients(arch, {name: np.ones_like(a) for name, a in w})
    v0 = g.scale(0.5)
    new_w, new_v = sgd_step(w, g, v0, lr=0.1, momentum=0.9, weight_decay=0.01)
    # v = 0.9*0.5 + 1 + 0.01*2 = 1.47 ; w = 2 - 0.1*1.47 = 1.853
    passed = all(np.allclose(a, 1.853, atol=1e-6) for _, a in new_w) and all(
        np.allclose(a, 1.47, atol=1e-6) for _, a in new_v
    )
    return CheckResult("sgd step", passed)


def check_aggregation() -> CheckResult:
    arch = tiny_mlp()
    low = zeros(arch)
    high = zeros(arch).map(lambda a: np.full_like(a, 4.0))
    merged = aggregate_weights([(low, 1), (high, 3)])
    scaled = aggregate_weights([(low, 10), (high, 30)])
    passed = all(np.allclose(a, 3.0) for _, a in merged) and merged.equals(scaled)
    return CheckResult("weighted averaging", passed)


def run_verify(seeds: int = 10) -> VerifyReport:
    """Run every check; failures are reported, not raised."""
    report = VerifyReport()
    for name, check in (
        ("loss oracles", check_loss_oracles),
        ("trivial loss values", check_trivial_losses),
        ("loss gradients", lambda: check_loss_gradients(seeds)),
        ("layer gradients", lambda: check_layer_gradients(seeds)),
        ("mu_glob schedule", check_schedule),
        ("sgd step", check_sgd),
        ("weighted averaging", check_aggregation),
    ):
        try:
            result = check()
        except Exception as e:
            logger.exception("Verify check raised", check=name)
            result = CheckResult(name, False, {"error": str(e)})
        logger.info("Verify check", check=result.name, passed=result.passed, **result.detail)
        report.checks.append(result)
    return report
