"""
Decay schedule for the weight of the shared class-wise contrastive term.
"""

from dataclasses import dataclass

from app.errors import SimulatorError


@dataclass(frozen=True)
class ScheduleSpec:
    """Warmup at mu_glob_start for T0 rounds, then linear decay to mu_glob_end at round T."""
    mu_glob_start: float
    mu_glob_end: float
    total_rounds: int
    warmup_rounds: int

    def __post_init__(self) -> None:
        if not self.total_rounds > self.warmup_rounds >= 0:
            raise SimulatorError(
                "Schedule needs total_rounds > warmup_rounds >= 0",
                {"total_rounds": self.total_rounds, "warmup_rounds": self.warmup_rounds},
            )
        if not self.mu_glob_start >= self.mu_glob_end >= 0:
            raise SimulatorError(
                "Schedule needs mu_glob_start >= mu_glob_end >= 0",
                {"mu_glob_start": self.mu_glob_start, "mu_glob_end": self.mu_glob_end},
            )

    @property
    def is_off(self) -> bool:
        return self.mu_glob_start == 0


def mu_glob_at_round(t: int, spec: ScheduleSpec) -> float:
    """
    Weight of the class-wise contrastive term in round t.

    Args:
        t: Round index, 0-based; rounds past T clamp to the end weight
        spec: Schedule

    Returns:
        mu_glob for the round
    """
    if t < 0:
        raise SimulatorError("Round index must be non-negative", {"t": t})
    if t < spec.warmup_rounds:
        return spec.mu_glob_start
    if t >= spec.total_rounds:
        return spec.mu_glob_end
    progress = (t - spec.warmup_rounds) / (spec.total_rounds - spec.warmup_rounds)
    value = spec.mu_glob_start - progress * (spec.mu_glob_start - spec.mu_glob_end)
    return max(value, spec.mu_glob_end)
