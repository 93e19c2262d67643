"""
Contrastive objectives on projected representations.

Both losses take the current projections z and treat every other vector
(global-model projections, previous-model projections, shared class
prototypes) as constants: gradients flow through z only. Per-batch values
are arithmetic means over the rows of z.
"""

import threading
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from app.errors import ShapeError, SimulatorError
from app.utils.logging import get_logger

logger = get_logger(__name__)

NORM_FLOOR = 1e-12

_zero_norm_lock = threading.Lock()
_zero_norm_reported = False


@dataclass(frozen=True)
class ContrastiveContext:
    """Temperature and loss weights in effect for one round."""
    tau: float
    mu_moon: float
    mu_glob: float

    def __post_init__(self) -> None:
        if not self.tau > 0:
            raise SimulatorError("Temperature must be positive", {"tau": self.tau})
        if self.mu_moon < 0 or self.mu_glob < 0:
            raise SimulatorError(
                "Loss weights must be non-negative",
                {"mu_moon": self.mu_moon, "mu_glob": self.mu_glob},
            )


def reset_zero_norm_warning() -> None:
    """Re-arm the once-per-run zero-vector warning."""
    global _zero_norm_reported
    with _zero_norm_lock:
        _zero_norm_reported = False


def _note_zero_norms(norms: np.ndarray) -> None:
    global _zero_norm_reported
    if _zero_norm_reported or not (norms <= NORM_FLOOR).any():
        return
    with _zero_norm_lock:
        if _zero_norm_reported:
            return
        _zero_norm_reported = True
    logger.warning("Zero-norm vector in cosine similarity, similarity floored to 0")


def _check_tau(tau: float) -> None:
    if not tau > 0:
        raise SimulatorError("Temperature must be positive", {"tau": tau})


def _row_cosine(a: np.ndarray, b: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Row-wise cosine similarity and its gradient with respect to a.

    Returns:
        (similarities of shape (n,), d sim / d a of shape (n, d))
    """
    raw_a = np.linalg.norm(a, axis=1)
    raw_b = np.linalg.norm(b, axis=1)
    _note_zero_norms(raw_a)
    _note_zero_norms(raw_b)
    norm_a = np.maximum(raw_a, NORM_FLOOR)[:, None]
    norm_b = np.maximum(raw_b, NORM_FLOOR)[:, None]
    dot = np.sum(a * b, axis=1, keepdims=True)
    sim = dot / (norm_a * norm_b)
    # inside the floor the norm is constant, so only the first term survives
    active = (raw_a > NORM_FLOOR)[:, None]
    grad = b / (norm_a * norm_b) - np.where(active, sim * a / norm_a ** 2, 0.0)
    return sim[:, 0], grad


def _cosine_matrix(z: np.ndarray, prototypes: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Cosine similarity of every z row against every prototype row."""
    raw_z = np.linalg.norm(z, axis=1)
    raw_p = np.linalg.norm(prototypes, axis=1)
    _note_zero_norms(raw_z)
    _note_zero_norms(raw_p)
    norm_z = np.maximum(raw_z, NORM_FLOOR)
    norm_p = np.maximum(raw_p, NORM_FLOOR)
    sims = (z @ prototypes.T) / (norm_z[:, None] * norm_p[None, :])
    return sims, norm_z, norm_p


def cosine_sim(a: np.ndarray, b: np.ndarray) -> float:
    """a.b / (|a||b|) with a 1e-12 floor on each norm."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ShapeError("Cosine similarity needs two vectors of equal length", {"a": a.shape, "b": b.shape})
    sim, _ = _row_cosine(a[None, :], b[None, :])
    return float(sim[0])


def moon_loss_batch(
    z: np.ndarray,
    z_glob: np.ndarray,
    z_prev: np.ndarray,
    tau: float,
) -> Tuple[float, np.ndarray]:
    """
    Model-contrastive loss averaged over a batch.

    Per row: -log( e^{sim(z,z_glob)/tau} / (e^{sim(z,z_glob)/tau} + e^{sim(z,z_prev)/tau}) ).

    Returns:
        (mean loss, gradient w.r.t. z with the shape and dtype of z)
    """
    _check_tau(tau)
    if z.shape != z_glob.shape or z.shape != z_prev.shape:
        raise ShapeError(
            "MOON loss needs equally shaped projections",
            {"z": z.shape, "z_glob": z_glob.shape, "z_prev": z_prev.shape},
        )
    batch = z.shape[0]
    work = z.astype(np.float64)
    sim_glob, grad_glob = _row_cosine(work, z_glob.astype(np.float64))
    sim_prev, grad_prev = _row_cosine(work, z_prev.astype(np.float64))

    logits = np.stack([sim_glob, sim_prev], axis=1) / tau
    shift = logits.max(axis=1, keepdims=True)
    exp = np.exp(logits - shift)
    total = exp.sum(axis=1, keepdims=True)
    probs = exp / total
    losses = (np.log(total[:, 0]) + shift[:, 0]) - logits[:, 0]

    coef_glob = (probs[:, 0] - 1.0) / tau
    coef_prev = probs[:, 1] / tau
    grad = (coef_glob[:, None] * grad_glob + coef_prev[:, None] * grad_prev) / batch
    return float(losses.mean()), grad.astype(z.dtype, copy=False)


def moon_loss(z: np.ndarray, z_glob: np.ndarray, z_prev: np.ndarray, tau: float) -> Tuple[float, np.ndarray]:
    """MOON loss of a single projection vector and its gradient."""
    z = np.asarray(z, dtype=np.float64)
    loss, grad = moon_loss_batch(z[None, :], np.asarray(z_glob, dtype=np.float64)[None, :],
                                 np.asarray(z_prev, dtype=np.float64)[None, :], tau)
    return loss, grad[0]


def global_contrastive_loss_batch(
    z: np.ndarray,
    labels: np.ndarray,
    bank,
    tau: float,
) -> Tuple[float, np.ndarray, int]:
    """
    Class-wise contrastive loss against shared prototypes, averaged over a batch.

    Per row with label i present in the bank:
    -log( e^{sim(z, zs^i)/tau} / sum_k e^{sim(z, zs^k)/tau} ), k over bank classes.
    Rows whose class is absent contribute 0 and are counted as skipped.

    Args:
        z: Projections (batch, dim)
        labels: Class ids (batch,)
        bank: RepBank with the shared prototypes
        tau: Temperature

    Returns:
        (mean loss, gradient w.r.t. z, number of skipped rows)
    """
    _check_tau(tau)
    batch = z.shape[0]
    if bank is None or len(bank) == 0:
        return 0.0, np.zeros_like(z), 0

    classes = bank.classes()
    prototypes = bank.matrix(classes).astype(np.float64)
    if prototypes.shape[1] != z.shape[1]:
        raise ShapeError(
            "Bank vectors and projections differ in dimension",
            {"bank": prototypes.shape[1], "z": z.shape[1]},
        )

    position = {cls: pos for pos, cls in enumerate(classes)}
    targets = np.array([position.get(int(label), -1) for label in labels], dtype=np.int64)
    present = targets >= 0
    skipped = int(batch - present.sum())

    grad = np.zeros(z.shape, dtype=np.float64)
    if not present.any():
        return 0.0, grad.astype(z.dtype, copy=False), skipped

    work = z[present].astype(np.float64)
    rows = np.arange(work.shape[0])
    sims, norm_z, norm_p = _cosine_matrix(work, prototypes)
    logits = sims / tau
    shift = logits.max(axis=1, keepdims=True)
    exp = np.exp(logits - shift)
    total = exp.sum(axis=1, keepdims=True)
    probs = exp / total
    losses = (np.log(total[:, 0]) + shift[:, 0]) - logits[rows, targets[present]]

    # d loss / d logit_k = p_k - 1[k = target]
    weights = probs.copy()
    weights[rows, targets[present]] -= 1.0
    weights /= tau

    unit_p = prototypes / norm_p[:, None]
    active = (np.linalg.norm(work, axis=1) > NORM_FLOOR)[:, None]
    # d sim_k / d z = p_k/(|z||p_k|) - sim_k z/|z|^2
    grad_rows = (weights @ unit_p) / norm_z[:, None]
    grad_rows -= np.where(active, (weights * sims).sum(axis=1, keepdims=True) * work / norm_z[:, None] ** 2, 0.0)

    grad[present] = grad_rows / batch
    return float(losses.sum() / batch), grad.astype(z.dtype, copy=False), skipped


def global_contrastive_loss(
    z: np.ndarray,
    label: int,
    bank,
    tau: float,
) -> Tuple[float, np.ndarray]:
    """Class-wise contrastive loss of a single projection and its gradient."""
    z = np.asarray(z, dtype=np.float64)
    loss, grad, _ = global_contrastive_loss_batch(z[None, :], np.array([label]), bank, tau)
    return loss, grad[0]


def total_loss(
    l_class: float,
    l_moon: Optional[float],
    l_glob: Optional[float],
    ctx: ContrastiveContext,
) -> float:
    """l = l_class + mu_moon * l_moon + mu_glob * l_glob (None terms count as 0)."""
    return l_class + ctx.mu_moon * (l_moon or 0.0) + ctx.mu_glob * (l_glob or 0.0)
