"""
Client-side work of a round: local training and class-wise representations.
"""

from typing import List, Optional, Tuple

import numpy as np

from app.config import TrainConfig
from app.data.batching import batches
from app.data.models import ClientShard, LabeledDataset
from app.errors import NumericalError, TrainingError
from app.federation.models import ClientMetrics, ClientState, RepBank, RepEntry
from app.losses.contrastive import global_contrastive_loss_batch, moon_loss_batch, total_loss
from app.nn.model import backward, cross_entropy_with_grad, forward, project
from app.nn.optim import sgd_step
from app.nn.weights import ModelWeights
from app.utils.logging import get_logger
from app.utils.seeding import derive_seed

logger = get_logger(__name__)


def classwise_reps(
    w: ModelWeights,
    shard: ClientShard,
    ds: LabeledDataset,
    threshold: int = 10,
    batch_size: int = 512,
    round: int = 0,
) -> RepBank:
    """
    Mean projection per class over the shard, for classes with enough samples.

    Args:
        w: Frozen local model
        shard: Device shard
        ds: Dataset the shard indexes into
        threshold: Minimum samples of a class to share its representation
        batch_size: Rows per projection pass
        round: Round stamp of the bank

    Returns:
        RepBank with one entry per eligible class (possibly empty)
    """
    bad = w.non_finite_layers()
    if bad:
        raise NumericalError("Cannot compute representations from non-finite weights", {"layer": bad[0]})

    labels = ds.labels[shard.indices]
    z = project(w, ds.samples[shard.indices], batch_size=batch_size)
    entries = {}
    skipped = []
    for cls, count in shard.counts_by_class().items():
        if count < threshold:
            skipped.append(cls)
            continue
        mean = z[labels == cls].astype(np.float64).mean(axis=0)
        entries[cls] = RepEntry(vector=mean.astype(w.dtype), count=count, sources=(shard.device_id,))
    if skipped:
        logger.debug("Classes below eligibility threshold", device=shard.device_id, classes=skipped, threshold=threshold)
    return RepBank(entries=entries, round=round)


def _mean(values: List[float]) -> Optional[float]:
    return float(np.mean(values)) if values else None


def local_training(
    cs: ClientState,
    w_t: ModelWeights,
    zs_t: Optional[RepBank],
    cfg: TrainConfig,
    t: int,
    train: LabeledDataset,
) -> Tuple[ModelWeights, RepBank, ClientMetrics]:
    """
    Run E local epochs from the global model and build the client bank.

    Per batch the loss is l_class + mu_moon * l_moon(z, z_glob, z_prev)
    + mu_glob * l_glob(z, zs_t). z_glob comes from the frozen global model
    and z_prev from the frozen previous local model (z_glob in the first
    round). Terms with zero weight are not evaluated.

    Args:
        cs: Client state; its velocity is updated when cfg.persist_velocity
        w_t: Global weights of round t
        zs_t: Global bank of round t (None or empty disables l_glob)
        cfg: Experiment configuration
        t: Round index
        train: Training set the shard indexes into

    Returns:
        (local weights, client bank, metrics)

    Raises:
        TrainingError: non-finite loss, with batch index and loss components
    """
    if cs.prev_weights is not None:
        w_t.check_congruent(cs.prev_weights, "global and previous local weights")

    ctx = cfg.context(t)
    use_moon = ctx.mu_moon > 0
    use_glob = ctx.mu_glob > 0 and zs_t is not None and len(zs_t) > 0

    w = w_t.copy()
    velocity = cs.velocity if cfg.persist_velocity else None
    class_losses: List[float] = []
    moon_losses: List[float] = []
    glob_losses: List[float] = []
    skipped_rows = 0
    step = 0

    for epoch in range(cfg.local_epochs):
        epoch_seed = derive_seed(cfg.seed, "batches", cs.device_id, t, epoch)
        for x, y in batches(cs.shard, train, cfg.batch_size, epoch_seed):
            trace = forward(w, x)
            l_class, d_logits = cross_entropy_with_grad(trace.logits, y)
            d_z = None
            l_moon = l_glob = None

            if use_moon:
                z_glob = forward(w_t, x).z
                z_prev = forward(cs.prev_weights, x).z if cs.prev_weights is not None else z_glob
                l_moon, g_moon = moon_loss_batch(trace.z, z_glob, z_prev, ctx.tau)
                d_z = w.dtype.type(ctx.mu_moon) * g_moon
            if use_glob:
                l_glob, g_glob, skipped = global_contrastive_loss_batch(trace.z, y, zs_t, ctx.tau)
                skipped_rows += skipped
                scaled = w.dtype.type(ctx.mu_glob) * g_glob
                d_z = scaled if d_z is None else d_z + scaled

            loss = total_loss(l_class, l_moon, l_glob, ctx)
            if not np.isfinite(loss):
                raise TrainingError(
                    "Non-finite local loss",
                    {"device": cs.device_id, "round": t, "epoch": epoch, "batch": step,
                     "l_class": l_class, "l_moon": l_moon, "l_glob": l_glob},
                )

            grads = backward(trace, w, d_logits, d_z)
            w, velocity = sgd_step(w, grads, velocity, cfg.lr, cfg.momentum, cfg.weight_decay)

            class_losses.append(l_class)
            if l_moon is not None:
                moon_losses.append(l_moon)
            if l_glob is not None:
                glob_losses.append(l_glob)
            step += 1

    if cfg.persist_velocity:
        cs.velocity = velocity

    if cfg.shares_representations:
        bank = classwise_reps(w, cs.shard, train, cfg.eligibility_threshold, cfg.eval_batch_size, round=t + 1)
    else:
        bank = RepBank.empty(round=t + 1)
    metrics = ClientMetrics(
        device_id=cs.device_id,
        l_class=_mean(class_losses),
        l_moon=_mean(moon_losses),
        l_glob=_mean(glob_losses),
        batches=step,
        skipped_rows=skipped_rows,
    )
    logger.debug(
        "Client finished local training",
        device=cs.device_id, round=t, batches=step, l_class=metrics.l_class,
        l_moon=metrics.l_moon, l_glob=metrics.l_glob, bank_classes=len(bank),
    )
    return w, bank, metrics
