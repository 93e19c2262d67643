"""
SGD with classical momentum and weight decay.
"""

from typing import Optional, Tuple

import numpy as np

from app.errors import NumericalError
from app.nn.weights import Gradients, ModelWeights


def sgd_step(
    w: ModelWeights,
    g: Gradients,
    velocity: Optional[Gradients],
    lr: float,
    momentum: float = 0.0,
    weight_decay: float = 0.0,
) -> Tuple[ModelWeights, Gradients]:
    """
    One optimizer step: v <- momentum*v + g + weight_decay*w; w <- w - lr*v.

    Args:
        w: Current weights (left untouched)
        g: Gradients of the loss
        velocity: Momentum buffer, None starts from zero
        lr: Learning rate
        momentum: Momentum coefficient
        weight_decay: L2 coefficient folded into the gradient

    Returns:
        (new weights, new velocity)

    Raises:
        NumericalError: if any gradient entry is NaN/Inf, or the step
            overflows a weight, naming the layer
    """
    w.check_congruent(g, "weights and gradients")
    bad = g.non_finite_layers()
    if bad:
        raise NumericalError("Non-finite gradient", {"layer": bad[0]})
    if velocity is None:
        velocity = w.zeros_like()
    else:
        w.check_congruent(velocity, "weights and velocity")

    dtype = w.dtype.type
    new_weights = {}
    new_velocity = {}
    with np.errstate(over="ignore", invalid="ignore"):
        for name, param in w:
            v = dtype(momentum) * velocity[name] + g[name] + dtype(weight_decay) * param
            new_velocity[name] = v
            new_weights[name] = param - dtype(lr) * v

    updated = ModelWeights(w.arch, new_weights)
    bad = updated.non_finite_layers()
    if bad:
        raise NumericalError("Weights left finite range after step", {"layer": bad[0], "lr": lr})
    return updated, Gradients(w.arch, new_velocity)
