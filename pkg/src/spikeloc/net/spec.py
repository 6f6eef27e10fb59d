"""Layer and network topology descriptions, with canonical JSON serialization."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

from ..neuron import IFConfig
from ..ops import conv_output_size

LAYER_KINDS = ("conv2d", "linear", "pool", "if", "sew", "flatten", "accumulator")
N_OUTPUTS = 4


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    in_channels: int = 0
    out_channels: int = 0
    kernel: int = 1
    stride: int = 1
    padding: int | None = None
    neuron: IFConfig = field(default_factory=IFConfig)
    # IF only: fire once on the first step and repeat that map (trainable coding).
    repeat_first: bool = False

    def __post_init__(self):
        if self.kind not in LAYER_KINDS:
            raise ValueError(f"unknown layer kind {self.kind!r}")
        if self.padding is None and self.kind in ("conv2d", "sew"):
            object.__setattr__(self, "padding", self.kernel // 2)

    @property
    def pad(self) -> int:
        return self.kernel // 2 if self.padding is None else self.padding

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.kind in ("conv2d", "linear", "sew", "accumulator"):
            d.update(in_channels=self.in_channels, out_channels=self.out_channels)
        if self.kind in ("conv2d", "sew"):
            d.update(kernel=self.kernel, stride=self.stride, padding=self.pad)
        if self.kind == "pool":
            d.update(kernel=self.kernel)
        if self.kind in ("if", "sew"):
            d["neuron"] = self.neuron.to_dict()
        if self.kind == "if":
            d["repeat_first"] = self.repeat_first
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "LayerSpec":
        d = dict(d)
        if "neuron" in d:
            d["neuron"] = IFConfig(**d["neuron"])
        return cls(**d)


@dataclass(frozen=True)
class NetworkSpec:
    """Ordered layers, time-steps and input dims ``(C, H, W)``.

    ``input_weights`` (length ``T``) scale the input at each step before the
    first layer; phase coding uses it for its bit-significance weights.
    """

    layers: tuple[LayerSpec, ...]
    timesteps: int
    input_shape: tuple[int, int, int]
    input_weights: tuple[float, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        object.__setattr__(self, "input_shape", tuple(int(v) for v in self.input_shape))
        if self.input_weights is not None:
            object.__setattr__(self, "input_weights", tuple(float(w) for w in self.input_weights))
            if len(self.input_weights) != self.timesteps:
                raise ValueError("input_weights must have one entry per time-step")
        if self.timesteps < 1:
            raise ValueError("timesteps must be >= 1")
        kinds = [l.kind for l in self.layers]
        if kinds.count("accumulator") != 1 or kinds[-1] != "accumulator":
            raise ValueError("a network needs exactly one accumulator, as its last layer")
        if self.layers[-1].out_channels != N_OUTPUTS:
            raise ValueError(f"the accumulator must have {N_OUTPUTS} outputs")
        self.shapes()

    def shapes(self) -> list[tuple[int, ...]]:
        """Per-sample, per-step output shape of every layer; raises on mismatch."""
        shape: tuple[int, ...] = self.input_shape
        out = []
        for i, layer in enumerate(self.layers):
            shape = _infer(layer, shape, i)
            out.append(shape)
        return out

    def with_timesteps(self, T: int, input_weights=None) -> "NetworkSpec":
        return replace(self, timesteps=T, input_weights=input_weights)

    def to_dict(self) -> dict:
        return {
            "layers": [l.to_dict() for l in self.layers],
            "timesteps": self.timesteps,
            "input_shape": list(self.input_shape),
            "input_weights": None if self.input_weights is None else list(self.input_weights),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkSpec":
        return cls(
            layers=tuple(LayerSpec.from_dict(l) for l in d["layers"]),
            timesteps=int(d["timesteps"]),
            input_shape=tuple(d["input_shape"]),
            input_weights=None if d.get("input_weights") is None else tuple(d["input_weights"]),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))


def _infer(layer: LayerSpec, shape: tuple[int, ...], index: int) -> tuple[int, ...]:
    def fail(msg):
        raise ValueError(f"layer {index} ({layer.kind}): {msg}")

    k = layer.kind
    if k in ("conv2d", "sew"):
        if len(shape) != 3:
            fail(f"expects a (C, H, W) input, got {shape}")
        c, h, w = shape
        if c != layer.in_channels:
            fail(f"expects {layer.in_channels} channels, got {c}")
        if k == "sew":
            if layer.out_channels != layer.in_channels or layer.stride != 1:
                fail("SEW blocks must preserve channels and use stride 1")
            return shape
        return (layer.out_channels,
                conv_output_size(h, layer.kernel, layer.stride, layer.pad),
                conv_output_size(w, layer.kernel, layer.stride, layer.pad))
    if k == "pool":
        if len(shape) != 3 or shape[1] % layer.kernel or shape[2] % layer.kernel:
            fail(f"pool size {layer.kernel} does not divide {shape}")
        return (shape[0], shape[1] // layer.kernel, shape[2] // layer.kernel)
    if k == "flatten":
        n = 1
        for v in shape:
            n *= v
        return (n,)
    if k in ("linear", "accumulator"):
        if len(shape) != 1 or shape[0] != layer.in_channels:
            fail(f"expects {layer.in_channels} flat features, got {shape}")
        return (layer.out_channels,)
    return shape  # if


def snn_tiny(in_channels: int = 1, size: int = 32, timesteps: int = 4, *,
             widths: tuple[int, int] = (8, 16), pool: int = 2,
             neuron: IFConfig = IFConfig(), trainable_coding: bool = False,
             input_weights=None) -> NetworkSpec:
    """Desk-scale encoder: conv-IF, SEW block, conv-IF, pool, flatten, accumulator.

    With ``trainable_coding`` the first IF fires once and repeats its map, so
    the first convolution acts as a learned coding scheme.
    """
    c1, c2 = widths
    h = conv_output_size(conv_output_size(size, 3, 2, 1), 3, 2, 1) // pool
    layers = (
        LayerSpec("conv2d", in_channels, c1, kernel=3, stride=2),
        LayerSpec("if", neuron=neuron, repeat_first=trainable_coding),
        LayerSpec("sew", c1, c1, kernel=3, stride=1, neuron=neuron),
        LayerSpec("conv2d", c1, c2, kernel=3, stride=2),
        LayerSpec("if", neuron=neuron),
        LayerSpec("pool", kernel=pool),
        LayerSpec("flatten"),
        LayerSpec("accumulator", c2 * h * h, N_OUTPUTS),
    )
    return NetworkSpec(layers, timesteps, (in_channels, size, size), input_weights)
