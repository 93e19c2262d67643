"""Scalar objectives and schedules."""

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

__all__ = [
    "ContrastiveContext",
    "ScheduleSpec",
    "cosine_sim",
    "global_contrastive_loss",
    "global_contrastive_loss_batch",
    "moon_loss",
    "moon_loss_batch",
    "mu_glob_at_round",
    "total_loss",
]
