"""
Central finite differences, used as the oracle for analytic gradients.
"""

from dataclasses import dataclass, field
from typing import Callable, Dict, Optional

import numpy as np

from app.nn.weights import Gradients, ModelWeights

Objective = Callable[[ModelWeights], float]
Pattern = Callable[[ModelWeights], bytes]


def finite_diff_grad(w: ModelWeights, objective: Objective, eps: float = 1e-3) -> Gradients:
    """
    Central-difference gradient of a pure scalar objective, one entry at a time.

    Args:
        w: Point of evaluation (not modified)
        objective: Pure function of the weights
        eps: Step size

    Returns:
        Gradients with (f(w + eps e_i) - f(w - eps e_i)) / 2eps per entry
    """
    probe = w.copy()
    grads = {}
    for name, array in probe:
        out = np.zeros_like(array)
        flat = array.reshape(-1)
        out_flat = out.reshape(-1)
        for index in range(flat.size):
            original = flat[index]
            flat[index] = original + eps
            plus = objective(probe)
            flat[index] = original - eps
            minus = objective(probe)
            flat[index] = original
            out_flat[index] = (plus - minus) / (2 * eps)
        grads[name] = out
    return Gradients(w.arch, grads)


@dataclass
class GradCheckResult:
    """Per-array relative errors between analytic and numeric gradients."""
    errors: Dict[str, float] = field(default_factory=dict)
    checked: int = 0
    skipped_kinks: int = 0

    @property
    def max_error(self) -> float:
        return max(self.errors.values(), default=0.0)

    def passed(self, tolerance: float) -> bool:
        return self.max_error < tolerance


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """||a - n|| / max(||a||, ||n||), floored to avoid 0/0."""
    scale = max(np.linalg.norm(analytic), np.linalg.norm(numeric), 1e-12)
    return float(np.linalg.norm(analytic - numeric) / scale)


def gradient_check(
    w: ModelWeights,
    objective: Objective,
    analytic: Gradients,
    eps: float = 1e-3,
    pattern: Optional[Pattern] = None,
    max_entries: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
) -> GradCheckResult:
    """
    Compare analytic gradients with central differences.

    Args:
        w: Point of evaluation
        objective: Pure scalar function of the weights
        analytic: Gradients computed by backward
        eps: Finite-difference step
        pattern: Optional activation-pattern function; entries whose probes
            change the pattern straddle a rectifier or pooling kink and are skipped
        max_entries: Check at most this many random entries per array
        rng: Generator for entry sampling

    Returns:
        GradCheckResult
    """
    rng = rng or np.random.default_rng(0)
    base_pattern = pattern(w) if pattern else None
    probe = w.copy()
    result = GradCheckResult()

    for name, array in probe:
        flat = array.reshape(-1)
        indices = np.arange(flat.size)
        if max_entries is not None and flat.size > max_entries:
            indices = np.sort(rng.choice(flat.size, size=max_entries, replace=False))

        kept_analytic = []
        kept_numeric = []
        for index in indices:
            original = flat[index]
            flat[index] = original + eps
            plus = objective(probe)
            crossed = pattern is not None and pattern(probe) != base_pattern
            flat[index] = original - eps
            minus = objective(probe)
            crossed = crossed or (pattern is not None and pattern(probe) != base_pattern)
            flat[index] = original
            if crossed:
                result.skipped_kinks += 1
                continue
            kept_analytic.append(analytic[name].reshape(-1)[index])
            kept_numeric.append((plus - minus) / (2 * eps))

        result.checked += len(kept_numeric)
        if kept_numeric:
            result.errors[name] = relative_error(np.array(kept_analytic), np.array(kept_numeric))

    return result
