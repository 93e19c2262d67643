"""
Model construction, forward pass, cross-entropy and reverse-mode gradients.
"""

from dataclasses import dataclass, field
from typing import Any, List, Optional, Tuple

import numpy as np

from app.errors import ShapeError
from app.nn import layers
from app.nn.architecture import ModelArchitecture
from app.nn.weights import Gradients, ModelWeights


@dataclass
class LayerCache:
    """What one layer kept from the forward pass."""
    kind: str  # conv, pool, relu, flatten, linear
    name: Optional[str]
    data: Any


@dataclass
class ForwardTrace:
    """Cached activations of one forward pass."""
    fingerprint: str
    caches: List[LayerCache] = field(default_factory=list)
    z: Optional[np.ndarray] = None
    logits: Optional[np.ndarray] = None

    @property
    def batch_size(self) -> int:
        return int(self.logits.shape[0])

    def activation_pattern(self) -> bytes:
        """Rectifier masks and pool winners; changes whenever a probe crosses a kink."""
        parts = []
        for cache in self.caches:
            if cache.kind == "relu":
                parts.append(np.packbits(cache.data).tobytes())
            elif cache.kind == "pool":
                parts.append(cache.data[1].astype(np.int8).tobytes())
        return b"".join(parts)


def init_model(arch: ModelArchitecture, seed: int) -> ModelWeights:
    """
    Initialise weights uniformly in +-1/sqrt(fan_in) with zero biases.

    Args:
        arch: Architecture to initialise
        seed: Seed; identical (arch, seed) gives bit-identical weights

    Returns:
        float32 ModelWeights
    """
    shapes = arch.parameter_shapes()
    rng = np.random.default_rng(seed)
    arrays = {}
    for name, shape, fan_in in shapes:
        if name.endswith(".bias"):
            arrays[name] = np.zeros(shape, dtype=np.float32)
        else:
            bound = 1.0 / np.sqrt(fan_in)
            arrays[name] = rng.uniform(-bound, bound, size=shape).astype(np.float32)
    return ModelWeights(arch, arrays)


def forward(w: ModelWeights, batch: np.ndarray) -> ForwardTrace:
    """
    Run the network on a batch.

    Args:
        w: Model weights
        batch: Inputs shaped (batch, *arch.input_shape)

    Returns:
        ForwardTrace with logits = Classifier(Proj(Enc(x))) and z = Proj(Enc(x))
    """
    arch = w.arch
    batch = np.asarray(batch)
    if batch.ndim != len(arch.input_shape) + 1 or tuple(batch.shape[1:]) != tuple(arch.input_shape):
        raise ShapeError(
            "Batch does not match the architecture input",
            {"expected": ("batch",) + tuple(arch.input_shape), "got": tuple(batch.shape)},
        )

    trace = ForwardTrace(fingerprint=arch.fingerprint)
    h = batch.astype(w.dtype, copy=False)

    for index, conv in enumerate(arch.convs):
        name = f"conv{index}"
        h, cache = layers.conv2d_forward(h, w[f"{name}.weight"], w[f"{name}.bias"], conv.stride)
        trace.caches.append(LayerCache("conv", name, cache))
        h, mask = layers.relu_forward(h)
        trace.caches.append(LayerCache("relu", None, mask))
        if arch.pools:
            pool = arch.pools[index]
            h, cache = layers.maxpool_forward(h, pool.size, pool.stride)
            trace.caches.append(LayerCache("pool", None, cache))

    trace.caches.append(LayerCache("flatten", None, h.shape))
    h = h.reshape(h.shape[0], -1)

    for index in range(len(arch.fc_widths)):
        name = f"fc{index}"
        h, cache = layers.linear_forward(h, w[f"{name}.weight"], w[f"{name}.bias"])
        trace.caches.append(LayerCache("linear", name, cache))
        h, mask = layers.relu_forward(h)
        trace.caches.append(LayerCache("relu", None, mask))

    last = len(arch.proj_widths) - 1
    for index in range(len(arch.proj_widths)):
        name = f"proj{index}"
        h, cache = layers.linear_forward(h, w[f"{name}.weight"], w[f"{name}.bias"])
        trace.caches.append(LayerCache("linear", name, cache))
        if index < last:
            h, mask = layers.relu_forward(h)
            trace.caches.append(LayerCache("relu", None, mask))

    trace.z = h
    trace.logits, trace_cache = layers.linear_forward(h, w["classifier.weight"], w["classifier.bias"])
    trace.caches.append(LayerCache("linear", "classifier", trace_cache))
    return trace


def _check_labels(logits: np.ndarray, labels: np.ndarray) -> np.ndarray:
    labels = np.asarray(labels)
    num_classes = logits.shape[1]
    if labels.shape != (logits.shape[0],):
        raise ShapeError("Labels must have one entry per row of logits", {"expected": logits.shape[0], "got": labels.shape})
    if labels.size and (labels.min() < 0 or labels.max() >= num_classes):
        bad = int(labels[(labels < 0) | (labels >= num_classes)][0])
        raise ShapeError("Label out of range", {"label": bad, "num_classes": num_classes})
    return labels.astype(np.int64, copy=False)


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def cross_entropy(logits: np.ndarray, labels: np.ndarray) -> float:
    """Mean of -log softmax(logits)[label] over the batch."""
    labels = _check_labels(logits, labels)
    log_probs = _log_softmax(logits)
    return float(-log_probs[np.arange(len(labels)), labels].mean())


def cross_entropy_with_grad(logits: np.ndarray, labels: np.ndarray) -> Tuple[float, np.ndarray]:
    """Cross-entropy and its gradient with respect to the logits."""
    labels = _check_labels(logits, labels)
    log_probs = _log_softmax(logits)
    rows = np.arange(len(labels))
    loss = float(-log_probs[rows, labels].mean())
    grad = np.exp(log_probs)
    grad[rows, labels] -= 1
    grad /= len(labels)
    return loss, grad.astype(logits.dtype, copy=False)


def backward(
    trace: ForwardTrace,
    w: ModelWeights,
    d_logits: Optional[np.ndarray],
    d_z: Optional[np.ndarray] = None,
) -> Gradients:
    """
    Reverse-mode gradients of a scalar objective.

    Args:
        trace: Trace of the forward pass that produced logits and z
        w: Weights used for that forward pass
        d_logits: Gradient of the objective w.r.t. logits (None means zero)
        d_z: Gradient of the objective w.r.t. the projection z (None means zero)

    Returns:
        Gradients shaped like w
    """
    if trace.fingerprint != w.fingerprint:
        raise ShapeError(
            "Trace and weights belong to different architectures",
            {"trace": trace.fingerprint, "weights": w.fingerprint},
        )
    if d_logits is None:
        d_logits = np.zeros_like(trace.logits)
    if d_logits.shape != trace.logits.shape:
        raise ShapeError("Upstream logits gradient has the wrong shape", {"expected": trace.logits.shape, "got": d_logits.shape})
    if d_z is not None and d_z.shape != trace.z.shape:
        raise ShapeError("Upstream projection gradient has the wrong shape", {"expected": trace.z.shape, "got": d_z.shape})

    dtype = w.dtype
    grads = {}
    upstream = d_logits.astype(dtype, copy=False)

    for cache in reversed(trace.caches):
        if cache.kind == "linear":
            upstream, grads[f"{cache.name}.weight"], grads[f"{cache.name}.bias"] = layers.linear_backward(upstream, cache.data)
            if cache.name == "classifier" and d_z is not None:
                upstream = upstream + d_z.astype(dtype, copy=False)
        elif cache.kind == "relu":
            upstream = layers.relu_backward(upstream, cache.data)
        elif cache.kind == "flatten":
            upstream = upstream.reshape(cache.data)
        elif cache.kind == "pool":
            upstream = layers.maxpool_backward(upstream, cache.data)
        elif cache.kind == "conv":
            upstream, grads[f"{cache.name}.weight"], grads[f"{cache.name}.bias"] = layers.conv2d_backward(upstream, cache.data)
    ordered = {name: grads[name].astype(dtype, copy=False) for name in w.names()}
    return Gradients(w.arch, ordered)


def predict(w: ModelWeights, inputs: np.ndarray, batch_size: int = 512) -> np.ndarray:
    """Argmax class per sample; ties go to the lowest class id."""
    predictions = []
    for start in range(0, len(inputs), batch_size):
        logits = forward(w, inputs[start:start + batch_size]).logits
        predictions.append(logits.argmax(axis=1))
    if not predictions:
        return np.zeros(0, dtype=np.int64)
    return np.concatenate(predictions)


def project(w: ModelWeights, inputs: np.ndarray, batch_size: int = 512) -> np.ndarray:
    """Projections z for many samples, computed in chunks."""
    chunks = [forward(w, inputs[start:start + batch_size]).z for start in range(0, len(inputs), batch_size)]
    if not chunks:
        return np.zeros((0, w.arch.projection_dim), dtype=w.dtype)
    return np.concatenate(chunks)
