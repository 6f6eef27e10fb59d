"""SNNW checkpoint files.

Layout (little-endian)::

    "SNNW" | u8 version | u32 blob length | blob (canonical JSON)
    u32 tensor count | tensors
    "MOMS" | u32 tensor count | tensors          # Adam moments
    tensor := u16 name length | name | u8 rank | u32 dims... | f32 values

The JSON blob holds the network spec, the coding scheme, epoch, seed and
the Adam step counter.
"""

from __future__ import annotations

import io
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..core import FormatError
from .spec import NetworkSpec

MAGIC = b"SNNW"
MOMENTS_MARKER = b"MOMS"
VERSION = 1


@dataclass
class Checkpoint:
    spec: NetworkSpec
    params: dict
    moments: dict = field(default_factory=dict)
    epoch: int = 0
    seed: int = 0
    adam_step: int = 0
    scheme: dict | None = None
    metrics: dict = field(default_factory=dict)

    def network(self):
        from .model import Network

        return Network(self.spec, self.params)

    def meta_json(self) -> str:
        meta = {"network": self.spec.to_dict(), "scheme": self.scheme, "epoch": self.epoch,
                "seed": self.seed, "adam_step": self.adam_step, "metrics": self.metrics}
        return json.dumps(meta, sort_keys=True, separators=(",", ":"))


def _write_tensors(out: io.BytesIO, tensors: dict) -> None:
    out.write(struct.pack("<I", len(tensors)))
    for name in sorted(tensors):
        arr = np.asarray(tensors[name])
        raw_name = name.encode("utf-8")
        out.write(struct.pack("<H", len(raw_name)) + raw_name)
        out.write(struct.pack("<B", arr.ndim))
        out.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        out.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


class _Reader:
    def __init__(self, buf: bytes):
        self.buf, self.pos = buf, 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.buf):
            raise FormatError(f"truncated checkpoint while reading {what}")
        chunk = self.buf[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str, what: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))

    def tensors(self) -> dict:
        (count,) = self.unpack("<I", "tensor count")
        out = {}
        for _ in range(count):
            (n,) = self.unpack("<H", "tensor name length")
            name = self.take(n, "tensor name").decode("utf-8")
            (rank,) = self.unpack("<B", f"rank of {name}")
            dims = self.unpack(f"<{rank}I", f"dims of {name}")
            size = int(np.prod(dims, dtype=np.int64)) if rank else 1
            data = self.take(4 * size, f"values of {name}")
            out[name] = np.frombuffer(data, dtype="<f4").astype(np.float32).reshape(dims)
        return out


def checkpoint_to_bytes(ckpt: Checkpoint) -> bytes:
    out = io.BytesIO()
    blob = ckpt.meta_json().encode("utf-8")
    out.write(MAGIC + struct.pack("<BI", VERSION, len(blob)) + blob)
    _write_tensors(out, ckpt.params)
    out.write(MOMENTS_MARKER)
    _write_tensors(out, ckpt.moments)
    return out.getvalue()


def checkpoint_from_bytes(buf: bytes) -> Checkpoint:
    r = _Reader(buf)
    if r.take(4, "magic") != MAGIC:
        raise FormatError("not an SNNW checkpoint (bad magic)")
    version, n = r.unpack("<BI", "header")
    if version != VERSION:
        raise FormatError(f"unsupported checkpoint version {version}")
    try:
        meta = json.loads(r.take(n, "spec blob").decode("utf-8"))
        spec = NetworkSpec.from_dict(meta["network"])
    except (ValueError, KeyError, TypeError) as exc:
        raise FormatError(f"invalid spec blob: {exc}") from exc
    params = r.tensors()
    if r.take(4, "moments marker") != MOMENTS_MARKER:
        raise FormatError("missing MOMS marker")
    moments = r.tensors()
    if r.pos != len(buf):
        raise FormatError(f"{len(buf) - r.pos} trailing bytes after checkpoint")
    from .model import Network

    try:
        Network(spec, params)  # shape check against the network spec
    except ValueError as exc:
        raise FormatError(f"parameters do not match the network spec: {exc}") from exc
    return Checkpoint(spec, params, moments, int(meta["epoch"]), int(meta["seed"]),
                      int(meta["adam_step"]), meta.get("scheme"), meta.get("metrics") or {})


def save_checkpoint(path, ckpt: Checkpoint) -> None:
    Path(path).write_bytes(checkpoint_to_bytes(ckpt))


def load_checkpoint(path) -> Checkpoint:
    return checkpoint_from_bytes(Path(path).read_bytes())
