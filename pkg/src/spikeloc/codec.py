"""Turn static images and event streams into binary spike tensors.

Static schemes: rate, time-to-first-spike (TTFS), phase, saccades and
trainable coding. Event streams are sliced into ``T`` On/Off frames.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .core import EventStream, Rng, check_image
from .neuron import IFConfig
from .ops import conv2d_forward

SCHEMES = ("rate", "ttfs", "phase", "saccades", "trainable", "event_slice")

PHASE_CYCLE = 8
TTFS_CUTOFF = 0.01


# ---------------------------------------------------------------------------
# Rate
# ---------------------------------------------------------------------------


def encode_rate(img, T: int, rng: Rng) -> np.ndarray:
    """Independent Bernoulli spike per step with probability equal to the pixel value."""
    img = check_image(img)
    _check_T(T)
    return (rng.uniform((T,) + img.shape) < img).astype(np.uint8)


# ---------------------------------------------------------------------------
# TTFS
# ---------------------------------------------------------------------------


def ttfs_time(intensity, tau: float = 1.0, cutoff: float = TTFS_CUTOFF):
    """RC-circuit latency ``tau * ln(I / (I - cutoff))``; ``inf`` where ``I <= cutoff``."""
    i = np.asarray(intensity, dtype=np.float64)
    out = np.full(i.shape, np.inf)
    ok = i > cutoff
    out[ok] = tau * np.log(i[ok] / (i[ok] - cutoff))
    return out


def ttfs_steps(times: np.ndarray, T: int, clip_percentile: float = 99.0) -> np.ndarray:
    """Map continuous latencies to 1-based step indices (0 = never fires).

    The earliest finite latency lands on step 1; latencies at or beyond the
    ``clip_percentile`` of the finite ones clamp to step ``T``; values in
    between map linearly, so the order of latencies is preserved.
    """
    steps = np.zeros(times.shape, dtype=np.int64)
    finite = np.isfinite(times)
    if not finite.any():
        return steps
    ft = times[finite]
    lo = ft.min()
    hi = np.percentile(ft, clip_percentile)
    if hi <= lo or T == 1:
        steps[finite] = 1
        return steps
    frac = np.clip((ft - lo) / (hi - lo), 0.0, 1.0)
    steps[finite] = 1 + np.rint(frac * (T - 1)).astype(np.int64)
    return steps


def encode_ttfs(img, T: int, tau: float = 1.0, cutoff: float = TTFS_CUTOFF) -> np.ndarray:
    """At most one spike per pixel; brighter pixels fire no later than dimmer ones."""
    img = check_image(img)
    _check_T(T)
    steps = ttfs_steps(ttfs_time(img, tau, cutoff), T)
    out = (steps[None] == np.arange(1, T + 1)[:, None, None, None]).astype(np.uint8)
    return out


# ---------------------------------------------------------------------------
# Phase
# ---------------------------------------------------------------------------


def phase_weights(T: int) -> np.ndarray:
    """Bit-significance weight ``2**-(1 + (t-1) % 8)`` for steps ``t = 1..T``."""
    t = np.arange(1, T + 1)
    return 2.0 ** -(1 + (t - 1) % PHASE_CYCLE)


def encode_phase(img, T: int) -> tuple[np.ndarray, np.ndarray]:
    """Emit the 8-bit pixel value MSB first, one bit per step, cycling to fill ``T``."""
    img = check_image(img)
    _check_T(T)
    levels = np.rint(img * 255).astype(np.uint8)
    bits = np.unpackbits(levels[..., None], axis=-1, bitorder="big")  # (C, H, W, 8)
    phase = (np.arange(T) % PHASE_CYCLE)
    spikes = np.moveaxis(bits[..., phase], -1, 0)
    return np.ascontiguousarray(spikes), phase_weights(T)


# ---------------------------------------------------------------------------
# Saccades
# ---------------------------------------------------------------------------


def saccade_offsets(T: int, dx: float = 2.0, dy: float = 2.0) -> np.ndarray:
    """Per-frame ``(dy, dx)`` offsets along a closed triangular path.

    Legs ``(+dx, +dy)``, ``(+dx, -dy)``, ``(-2dx, 0)`` each take ``T // 3``
    frames, the last leg also takes the remainder. Frame ``k`` of a leg sits
    at fraction ``k / n`` along it, so the final frame returns to the origin.
    """
    waypoints = np.array([[0, 0], [dy, dx], [0, 2 * dx], [0, 0]], dtype=np.float64)
    counts = [T // 3, T // 3, T - 2 * (T // 3)]
    offsets = []
    for leg, n in enumerate(counts):
        start, end = waypoints[leg], waypoints[leg + 1]
        for k in range(1, n + 1):
            offsets.append(start + (end - start) * k / n)
    return np.array(offsets).reshape(T, 2)


def translate(img: np.ndarray, offset) -> np.ndarray:
    """Shift a ``(C, H, W)`` image by ``(dy, dx)`` pixels, bilinear, edges clamped."""
    dy, dx = offset
    return np.stack([ndimage.shift(ch, (dy, dx), order=1, mode="nearest") for ch in img])


def saccade_frames(img, T: int, dx: float = 2.0, dy: float = 2.0) -> np.ndarray:
    img = check_image(img)
    return np.stack([translate(img, off) for off in saccade_offsets(T, dx, dy)])


def delta_modulate(frames: np.ndarray, threshold: float, reference=None, signed: bool = False) -> np.ndarray:
    """Spike where a pixel changes by more than ``threshold`` between consecutive frames.

    ``reference`` is the frame preceding ``frames[0]`` (defaults to
    ``frames[0]`` itself, giving a silent first step). Single-channel mode keeps
    increases only; ``signed`` returns ``2C`` channels ordered Off then On.
    """
    if threshold <= 0:
        raise ValueError(f"delta threshold must be positive, got {threshold}")
    prev = np.concatenate([frames[:1] if reference is None else np.asarray(reference)[None], frames[:-1]])
    diff = frames - prev
    on = diff > threshold
    if not signed:
        return on.astype(np.uint8)
    off = -diff > threshold
    return np.concatenate([off, on], axis=1).astype(np.uint8)


def encode_saccades(img, T: int, dx: float = 2.0, dy: float = 2.0, threshold: float = 0.1,
                    signed: bool = False) -> np.ndarray:
    """Translate the image along three saccades and delta-modulate the frame sequence.

    The unshifted image is the reference for the first step, so each of the
    ``T`` output steps reflects one move.
    """
    if T < 2:
        raise ValueError(f"saccades coding needs T >= 2, got {T}")
    img = check_image(img)
    frames = saccade_frames(img, T, dx, dy)
    return delta_modulate(frames, threshold, reference=img, signed=signed)


# ---------------------------------------------------------------------------
# Trainable
# ---------------------------------------------------------------------------


def encode_trainable(img, T: int, weight: np.ndarray, bias: np.ndarray | None,
                     cfg: IFConfig = IFConfig(), stride: int = 2) -> np.ndarray:
    """Apply a learned convolution once, fire one IF step, repeat the map over ``T``.

    With the usual 3x3 kernel, padding 1 and stride 2 the output is
    ``C_out x H/2 x W/2`` (``C_out`` is 32 in the full-size model).
    """
    img = check_image(img)
    _check_T(T)
    weight = np.asarray(weight, dtype=np.float64)
    if weight.ndim != 4 or weight.shape[1] != img.shape[0]:
        raise ValueError(f"weight shape {weight.shape} incompatible with image of {img.shape[0]} channels")
    k = weight.shape[-1]
    out, _ = conv2d_forward(img[None], weight, bias, stride=stride, padding=k // 2)
    spikes = (out[0] >= cfg.threshold).astype(np.uint8)
    return np.repeat(spikes[None], T, axis=0)


# ---------------------------------------------------------------------------
# Events
# ---------------------------------------------------------------------------


def event_windows(t: np.ndarray, T: int) -> np.ndarray:
    """0-based window index of each timestamp when ``[t_first, t_last]`` is cut into ``T`` equal parts."""
    t = np.asarray(t, dtype=np.int64)
    t0, t1 = t.min(), t.max()
    span = t1 - t0
    if span == 0:
        return np.zeros(t.shape, dtype=np.int64)
    return np.minimum(((t - t0) * T) // span, T - 1)


def slice_events(stream: EventStream, T: int) -> np.ndarray:
    """Binary ``(T, 2, H, W)`` event frames; channel = polarity (0 Off, 1 On)."""
    _check_T(T)
    if len(stream) == 0:
        raise ValueError("cannot slice an empty event stream")
    ev = stream.events
    out = np.zeros((T, 2, stream.height, stream.width), dtype=np.uint8)
    w = event_windows(ev["t"], T)
    out[w, ev["p"].astype(np.int64), ev["y"].astype(np.int64), ev["x"].astype(np.int64)] = 1
    return out


# ---------------------------------------------------------------------------
# Scheme objects used by the training / evaluation pipelines
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CodingScheme:
    """A named coding scheme plus its parameters.

    ``encode`` maps one input (image or event stream) to the network input.
    For ``trainable`` the network input is the dense image repeated over ``T``;
    the coding itself is the model's first convolution.
    """

    name: str = "rate"
    timesteps: int = 4
    tau: float = 1.0
    dx: float = 2.0
    dy: float = 2.0
    threshold: float = 0.1
    signed: bool = False

    def __post_init__(self):
        if self.name not in SCHEMES:
            raise ValueError(f"unknown coding scheme {self.name!r}; choose from {SCHEMES}")
        _check_T(self.timesteps)
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        if self.threshold <= 0:
            raise ValueError("delta threshold must be positive")
        if self.name == "saccades" and self.timesteps < 2:
            raise ValueError("saccades coding needs T >= 2")

    @property
    def modality(self) -> str:
        return "event" if self.name == "event_slice" else "static"

    def channels(self, in_channels: int) -> int:
        if self.name == "event_slice":
            return 2
        if self.name == "saccades" and self.signed:
            return 2 * in_channels
        return in_channels

    def input_weights(self):
        return tuple(phase_weights(self.timesteps).tolist()) if self.name == "phase" else None

    def encode(self, x, rng: Rng | None = None) -> np.ndarray:
        T = self.timesteps
        if self.name == "event_slice":
            if not isinstance(x, EventStream):
                raise TypeError("event_slice coding needs an EventStream")
            return slice_events(x, T)
        if isinstance(x, EventStream):
            raise TypeError(f"{self.name} coding needs a static image, got an EventStream")
        if self.name == "rate":
            if rng is None:
                raise ValueError("rate coding needs an Rng")
            return encode_rate(x, T, rng)
        if self.name == "ttfs":
            return encode_ttfs(x, T, self.tau)
        if self.name == "phase":
            return encode_phase(x, T)[0]
        if self.name == "saccades":
            return encode_saccades(x, T, self.dx, self.dy, self.threshold, self.signed)
        img = check_image(x).astype(np.float32)
        return np.repeat(img[None], T, axis=0)

    def to_dict(self) -> dict:
        return {"name": self.name, "timesteps": self.timesteps, "tau": self.tau, "dx": self.dx,
                "dy": self.dy, "threshold": self.threshold, "signed": self.signed}


def _check_T(T: int) -> None:
    if int(T) != T or T < 1:
        raise ValueError(f"T must be a positive integer, got {T}")
