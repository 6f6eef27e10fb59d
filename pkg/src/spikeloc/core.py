"""Shared containers, deterministic RNG streams and the binary file formats.

Array conventions used across the package:

* dense image: ``float`` array of shape ``(C, H, W)`` with values in ``[0, 1]``
* spike tensor: ``uint8`` array of shape ``(T, C, H, W)`` holding only 0/1
* activation tensor: non-negative array of shape ``(T, C, H, W)`` (SEW outputs can reach 2)
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

SPKT_MAGIC = b"SPKT"
EVTS_MAGIC = b"EVTS"
FORMAT_VERSION = 1

_SPKT_HEADER = struct.Struct("<4sBIIII")
_EVTS_HEADER = struct.Struct("<4sBHHI")

EVENT_DTYPE = np.dtype([("t", "<u4"), ("x", "<u2"), ("y", "<u2"), ("p", "u1")])

_U32_MAX = 2**32 - 1


class FormatError(ValueError):
    """Raised when a binary file does not match its declared layout."""


# ---------------------------------------------------------------------------
# RNG
# ---------------------------------------------------------------------------


class Rng:
    """Counter-based random stream (Philox) addressed by ``(seed, path)``.

    ``derive(k)`` returns an independent child stream, so batch element ``k``
    draws the same numbers whatever order or thread processes it.
    """

    def __init__(self, seed: int, path: tuple[int, ...] = ()):
        if seed < 0:
            raise ValueError(f"seed must be non-negative, got {seed}")
        self.seed = int(seed)
        self.path = tuple(int(p) for p in path)
        seq = np.random.SeedSequence(entropy=self.seed, spawn_key=self.path)
        self.gen = np.random.Generator(np.random.Philox(seq))

    def derive(self, *keys: int) -> "Rng":
        return Rng(self.seed, self.path + tuple(keys))

    def uniform(self, size=None):
        """Uniform draw(s) in ``[0, 1)``; advances the stream."""
        return self.gen.random(size)

    def __repr__(self) -> str:
        return f"Rng(seed={self.seed}, path={self.path})"


def as_rng(rng: "Rng | int | None") -> Rng:
    if isinstance(rng, Rng):
        return rng
    return Rng(0 if rng is None else int(rng))


# ---------------------------------------------------------------------------
# Boxes, images, spike tensors, events
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BBox:
    """Normalized box ``(x_min, y_min, x_max, y_max)``, upper-left / bottom-right."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        vals = self.as_tuple()
        if not all(np.isfinite(v) and 0.0 <= v <= 1.0 for v in vals):
            raise ValueError(f"box coordinates must lie in [0, 1]: {vals}")
        if self.x_min > self.x_max or self.y_min > self.y_max:
            raise ValueError(f"inverted box: {vals}")

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x_min, self.y_min, self.x_max, self.y_max)

    def as_array(self) -> np.ndarray:
        return np.array(self.as_tuple(), dtype=np.float64)

    @property
    def area(self) -> float:
        return (self.x_max - self.x_min) * (self.y_max - self.y_min)

    @classmethod
    def from_array(cls, a) -> "BBox":
        a = [float(v) for v in np.asarray(a, dtype=np.float64).ravel()]
        return cls(*a)


def check_image(img) -> np.ndarray:
    """Validate a dense image and return it as a ``(C, H, W)`` float array."""
    img = np.asarray(img, dtype=np.float64)
    if img.ndim == 2:
        img = img[None]
    if img.ndim != 3:
        raise ValueError(f"image must have shape (C, H, W), got {img.shape}")
    if not np.all(np.isfinite(img)) or img.min(initial=0.0) < 0.0 or img.max(initial=0.0) > 1.0:
        raise ValueError("image values must be finite and in [0, 1]")
    return img


def check_spikes(x) -> np.ndarray:
    """Validate a binary ``(T, C, H, W)`` spike tensor, returning it as ``uint8``."""
    x = np.asarray(x)
    if x.ndim != 4:
        raise ValueError(f"spike tensor must have shape (T, C, H, W), got {x.shape}")
    if x.size and not np.isin(x, (0, 1)).all():
        raise ValueError("spike tensor must contain only 0 and 1")
    return x.astype(np.uint8, copy=False)


@dataclass
class EventStream:
    """DVS events ``(t [us], x, y, polarity)``; polarity 0 = Off, 1 = On."""

    width: int
    height: int
    events: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=EVENT_DTYPE))

    def __post_init__(self):
        ev = np.asarray(self.events)
        if ev.dtype != EVENT_DTYPE:
            ev = np.array([tuple(e) for e in ev], dtype=EVENT_DTYPE) if len(ev) else np.zeros(0, EVENT_DTYPE)
        self.events = ev
        if not (0 < self.width <= 0xFFFF and 0 < self.height <= 0xFFFF):
            raise ValueError(f"sensor size out of range: {self.width}x{self.height}")
        if len(ev):
            if np.any(np.diff(ev["t"].astype(np.int64)) < 0):
                raise ValueError("event timestamps must be non-decreasing")
            if ev["x"].max() >= self.width or ev["y"].max() >= self.height:
                raise ValueError("event coordinates outside the sensor")
            if ev["p"].max() > 1:
                raise ValueError("polarity must be 0 or 1")

    def __len__(self) -> int:
        return len(self.events)

    @classmethod
    def from_arrays(cls, width, height, t, x, y, p) -> "EventStream":
        ev = np.zeros(len(t), dtype=EVENT_DTYPE)
        ev["t"], ev["x"], ev["y"], ev["p"] = t, x, y, p
        return cls(width, height, ev)


# ---------------------------------------------------------------------------
# SPKT: bit-packed spike tensors
# ---------------------------------------------------------------------------


def pack_bits(x: np.ndarray) -> bytes:
    """Pack a binary array in C order, MSB-first within each byte."""
    return np.packbits(np.asarray(x, dtype=np.uint8).ravel(), bitorder="big").tobytes()


def unpack_bits(payload: bytes, n: int) -> np.ndarray:
    bits = np.unpackbits(np.frombuffer(payload, dtype=np.uint8), bitorder="big")
    return bits[:n]


def spikes_to_bytes(x) -> bytes:
    x = check_spikes(x)
    T, C, H, W = x.shape
    return _SPKT_HEADER.pack(SPKT_MAGIC, FORMAT_VERSION, T, C, H, W) + pack_bits(x)


def spikes_from_bytes(buf: bytes) -> np.ndarray:
    if len(buf) < _SPKT_HEADER.size:
        raise FormatError("truncated SPKT header")
    magic, version, T, C, H, W = _SPKT_HEADER.unpack_from(buf)
    if magic != SPKT_MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {SPKT_MAGIC!r}")
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported SPKT version {version}")
    n = T * C * H * W
    if n > 8 * _U32_MAX:
        raise FormatError(f"dims {T}x{C}x{H}x{W} overflow the payload size")
    nbytes = (n + 7) // 8
    payload = buf[_SPKT_HEADER.size:]
    if len(payload) != nbytes:
        kind = "truncated" if len(payload) < nbytes else "oversized"
        raise FormatError(f"{kind} SPKT payload: {len(payload)} bytes, expected {nbytes}")
    return unpack_bits(payload, n).reshape(T, C, H, W)


def save_spikes(path, x) -> None:
    Path(path).write_bytes(spikes_to_bytes(x))


def load_spikes(path) -> np.ndarray:
    return spikes_from_bytes(Path(path).read_bytes())


# ---------------------------------------------------------------------------
# EVTS: event streams
# ---------------------------------------------------------------------------


def events_to_bytes(stream: EventStream) -> bytes:
    head = _EVTS_HEADER.pack(EVTS_MAGIC, FORMAT_VERSION, stream.width, stream.height, len(stream))
    return head + stream.events.astype(EVENT_DTYPE, copy=False).tobytes()


def events_from_bytes(buf: bytes) -> EventStream:
    if len(buf) < _EVTS_HEADER.size:
        raise FormatError("truncated EVTS header")
    magic, version, width, height, count = _EVTS_HEADER.unpack_from(buf)
    if magic != EVTS_MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {EVTS_MAGIC!r}")
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported EVTS version {version}")
    payload = buf[_EVTS_HEADER.size:]
    if len(payload) != count * EVENT_DTYPE.itemsize:
        raise FormatError(
            f"EVTS payload holds {len(payload)} bytes, expected {count * EVENT_DTYPE.itemsize}"
        )
    events = np.frombuffer(payload, dtype=EVENT_DTYPE).copy()
    try:
        return EventStream(width, height, events)
    except ValueError as exc:
        raise FormatError(str(exc)) from exc


def save_events(path, stream: EventStream) -> None:
    Path(path).write_bytes(events_to_bytes(stream))


def load_events(path) -> EventStream:
    return events_from_bytes(Path(path).read_bytes())
