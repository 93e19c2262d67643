"""
Network architecture descriptions.

A model is always encoder -> projection head -> classifier. The encoder is
an optional stack of conv/rectifier/max-pool blocks followed by
fully-connected layers with rectifiers; the projection head has a
rectifier between its layers and none after the last one; the classifier
is a single linear layer over the projection.
"""

import hashlib
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

from app.errors import ShapeError

ParamShape = Tuple[int, ...]


@dataclass(frozen=True)
class ConvSpec:
    """Square convolution without padding."""
    out_channels: int
    kernel: int
    stride: int = 1


@dataclass(frozen=True)
class PoolSpec:
    """Square max-pooling window."""
    size: int = 2
    stride: int = 2


@dataclass(frozen=True)
class ModelArchitecture:
    """Shape description of an encoder/projection/classifier network."""
    input_shape: Tuple[int, ...]
    num_classes: int
    convs: Tuple[ConvSpec, ...] = ()
    pools: Tuple[PoolSpec, ...] = ()
    fc_widths: Tuple[int, ...] = ()
    proj_widths: Tuple[int, ...] = (256, 256)
    name: str = field(default="custom", compare=False)

    @property
    def projection_dim(self) -> int:
        return self.proj_widths[-1]

    @property
    def fingerprint(self) -> str:
        """16 hex characters identifying the parameter layout."""
        text = repr((
            self.input_shape,
            self.num_classes,
            [(c.out_channels, c.kernel, c.stride) for c in self.convs],
            [(p.size, p.stride) for p in self.pools],
            self.fc_widths,
            self.proj_widths,
        ))
        return hashlib.sha256(text.encode("ascii")).hexdigest()[:16]

    def validate(self) -> None:
        """
        Check that layer shapes chain from the input to the logits.

        Raises:
            ShapeError: naming the first offending layer index
        """
        self.parameter_shapes()

    def parameter_shapes(self) -> List[Tuple[str, ParamShape, int]]:
        """
        Compute every parameter array in layer order.

        Returns:
            List of (name, shape, fan_in); biases carry the fan-in of their layer
        """
        if self.num_classes < 2:
            raise ShapeError("Architecture needs at least two classes", {"num_classes": self.num_classes})
        if not self.proj_widths or any(w <= 0 for w in self.proj_widths):
            raise ShapeError("Projection head widths must be positive", {"proj_widths": self.proj_widths})
        if self.pools and len(self.pools) != len(self.convs):
            raise ShapeError(
                "Each conv layer needs exactly one pool layer",
                {"convs": len(self.convs), "pools": len(self.pools)},
            )

        shapes: List[Tuple[str, ParamShape, int]] = []
        layer = 0
        feature_shape: Tuple[int, ...] = tuple(self.input_shape)

        if self.convs:
            if len(feature_shape) != 3:
                raise ShapeError(
                    "Conv layers need a channels x height x width input",
                    {"layer": 0, "input_shape": feature_shape},
                )
            channels, height, width = feature_shape
            for index, conv in enumerate(self.convs):
                height = (height - conv.kernel) // conv.stride + 1
                width = (width - conv.kernel) // conv.stride + 1
                if conv.kernel <= 0 or conv.stride <= 0 or height <= 0 or width <= 0:
                    raise ShapeError("Conv layer does not fit its input", {"layer": layer, "conv": index})
                fan_in = channels * conv.kernel * conv.kernel
                shapes.append((f"conv{index}.weight", (conv.out_channels, channels, conv.kernel, conv.kernel), fan_in))
                shapes.append((f"conv{index}.bias", (conv.out_channels,), fan_in))
                channels = conv.out_channels
                layer += 1
                if self.pools:
                    pool = self.pools[index]
                    height = (height - pool.size) // pool.stride + 1
                    width = (width - pool.size) // pool.stride + 1
                    if height <= 0 or width <= 0:
                        raise ShapeError("Pool layer does not fit its input", {"layer": layer, "pool": index})
                    layer += 1
            flat = channels * height * width
        else:
            flat = 1
            for dim in feature_shape:
                flat *= dim
            if flat <= 0:
                raise ShapeError("Input shape must be positive", {"layer": 0, "input_shape": feature_shape})

        width_in = flat
        for prefix, widths in (("fc", self.fc_widths), ("proj", self.proj_widths)):
            for index, width_out in enumerate(widths):
                if width_out <= 0:
                    raise ShapeError("Fully-connected width must be positive", {"layer": layer})
                shapes.append((f"{prefix}{index}.weight", (width_in, width_out), width_in))
                shapes.append((f"{prefix}{index}.bias", (width_out,), width_in))
                width_in = width_out
                layer += 1

        shapes.append(("classifier.weight", (width_in, self.num_classes), width_in))
        shapes.append(("classifier.bias", (self.num_classes,), width_in))
        return shapes

    def num_parameters(self) -> int:
        total = 0
        for _, shape, _ in self.parameter_shapes():
            count = 1
            for dim in shape:
                count *= dim
            total += count
        return total


def small_cnn(num_classes: int = 10, projection_dim: int = 256) -> ModelArchitecture:
    """
    The default CIFAR-10 network: two 5x5 convs (3->6->16) each followed by
    2x2 max-pooling, fully-connected 400->120->84, a two-layer projection head
    and a linear classifier.
    """
    return ModelArchitecture(
        input_shape=(3, 32, 32),
        num_classes=num_classes,
        convs=(ConvSpec(6, 5, 1), ConvSpec(16, 5, 1)),
        pools=(PoolSpec(2, 2), PoolSpec(2, 2)),
        fc_widths=(120, 84),
        proj_widths=(projection_dim, projection_dim),
        name="small_cnn",
    )


def mlp(
    input_shape: Tuple[int, ...],
    num_classes: int,
    hidden: Tuple[int, ...] = (64,),
    projection_dim: int = 256,
) -> ModelArchitecture:
    """Small fully-connected network for flat synthetic inputs."""
    return ModelArchitecture(
        input_shape=tuple(input_shape),
        num_classes=num_classes,
        fc_widths=tuple(hidden),
        proj_widths=(projection_dim, projection_dim),
        name="mlp",
    )


def resolve_architecture(
    preset: str,
    input_shape: Tuple[int, ...],
    num_classes: int,
    projection_dim: int = 256,
    mlp_hidden: Optional[int] = None,
) -> ModelArchitecture:
    """
    Build the architecture named in the config for a dataset.

    Args:
        preset: small_cnn, mlp or auto (small_cnn for images, mlp for flat inputs)
        input_shape: Shape of one sample
        num_classes: Class count of the dataset
        projection_dim: Width of the projection head
        mlp_hidden: Hidden width for the mlp preset

    Returns:
        Validated ModelArchitecture
    """
    if preset == "auto":
        preset = "small_cnn" if len(input_shape) == 3 else "mlp"

    if preset == "small_cnn":
        arch = small_cnn(num_classes, projection_dim)
        if tuple(input_shape) != arch.input_shape:
            raise ShapeError(
                "small_cnn expects 3x32x32 inputs",
                {"expected": arch.input_shape, "got": tuple(input_shape)},
            )
    elif preset == "mlp":
        arch = mlp(tuple(input_shape), num_classes, (mlp_hidden or 64,), projection_dim)
    else:
        raise ShapeError(f"Unknown architecture preset: {preset}")

    arch.validate()
    return arch
