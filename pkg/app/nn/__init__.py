"""Minimal neural network engine: model, gradients, optimizer."""

from app.nn.architecture import ConvSpec, ModelArchitecture, PoolSpec, mlp, small_cnn, resolve_architecture
from app.nn.model import ForwardTrace, backward, cross_entropy, cross_entropy_with_grad, forward, init_model
from app.nn.optim import sgd_step
from app.nn.weights import Gradients, ModelWeights

__all__ = [
    "ConvSpec",
    "ForwardTrace",
    "Gradients",
    "ModelArchitecture",
    "ModelWeights",
    "PoolSpec",
    "backward",
    "cross_entropy",
    "cross_entropy_with_grad",
    "forward",
    "init_model",
    "mlp",
    "small_cnn",
    "resolve_architecture",
    "sgd_step",
]
