"""Procedural single-object localization data, static and event-based.

Each sample holds one filled shape (rectangle, ellipse or triangle) on a
low-amplitude value-noise background. The label is the tight box around the
rendered foreground pixels, normalized by the image size, with exclusive
upper edges: a rectangle covering rows 10..19 and columns 5..14 of a 32x32
image is labelled ``(5/32, 10/32, 15/32, 20/32)``.

Event samples replay the image along the saccade path used by saccades
coding and emit signed On/Off events where the brightness changes.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .codec import delta_modulate, saccade_frames
from .core import BBox, EventStream, Rng, events_from_bytes, events_to_bytes
from .texture import value_noise

SHAPES = ("rectangle", "ellipse", "triangle")
MANIFEST_NAME = "manifest.txt"
MANIFEST_VERSION = 1
# single whitespace byte after maxval, then raw pixels
_PGM_HEADER = re.compile(rb"P5\s+(\d+)\s+(\d+)\s+255\s")


class DataError(Exception):
    """A dataset file is missing, unreadable or does not match its manifest."""


@dataclass(frozen=True)
class GenParams:
    size: int = 32
    shapes: tuple[str, ...] = SHAPES
    texture: float = 0.1
    min_object: int = 8
    max_object: int = 20
    margin: int = 1
    modality: str = "static"
    # event rig
    saccade_frames: int = 9
    saccade_dx: float = 2.0
    saccade_dy: float = 2.0
    event_threshold: float = 0.1
    frame_us: int = 1000
    jitter_us: int = 100

    def __post_init__(self):
        object.__setattr__(self, "shapes", tuple(self.shapes))
        if self.size < 16:
            raise ValueError(f"image size must be >= 16, got {self.size}")
        if not 1 <= self.min_object <= self.max_object:
            raise ValueError("need 1 <= min_object <= max_object")
        if self.max_object + 2 * self.margin > self.size:
            raise ValueError(f"objects up to {self.max_object}px do not fit a {self.size}px image")
        unknown = set(self.shapes) - set(SHAPES)
        if unknown or not self.shapes:
            raise ValueError(f"unknown shapes {sorted(unknown)}")
        if self.modality not in ("static", "event"):
            raise ValueError(f"modality must be 'static' or 'event', got {self.modality!r}")
        if self.texture < 0:
            raise ValueError("texture level must be non-negative")


@dataclass
class Sample:
    id: int
    label: BBox
    split: str = "train"
    image: np.ndarray | None = None
    events: EventStream | None = None
    shape: str = ""

    @property
    def input(self):
        return self.events if self.events is not None else self.image


def _render_mask(kind: str, size: int, r0: int, c0: int, h: int, w: int, rng: Rng) -> np.ndarray:
    yy, xx = np.mgrid[0:size, 0:size] + 0.5  # pixel centres
    if kind == "rectangle":
        mask = np.zeros((size, size), dtype=bool)
        mask[r0:r0 + h, c0:c0 + w] = True
        return mask
    if kind == "ellipse":
        cy, cx = r0 + h / 2, c0 + w / 2
        return ((yy - cy) / (h / 2)) ** 2 + ((xx - cx) / (w / 2)) ** 2 <= 1.0
    # triangle: one vertex on the top edge, the other two on the bottom corners, jittered
    top = (r0, c0 + w * rng.uniform())
    left = (r0 + h, c0)
    right = (r0 + h, c0 + w)
    return _inside_triangle(yy, xx, top, left, right)


def _inside_triangle(yy, xx, a, b, c) -> np.ndarray:
    def edge(p, q):
        return (xx - q[1]) * (p[0] - q[0]) - (p[1] - q[1]) * (yy - q[0])

    d1, d2, d3 = edge(a, b), edge(b, c), edge(c, a)
    neg = (d1 < 0) | (d2 < 0) | (d3 < 0)
    pos = (d1 > 0) | (d2 > 0) | (d3 > 0)
    return ~(neg & pos)


def mask_bbox(mask: np.ndarray) -> BBox:
    """Tight normalized box (exclusive upper edges) around the true pixels of a 2-D mask."""
    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))
    if len(rows) == 0:
        raise ValueError("empty mask")
    h, w = mask.shape
    return BBox(cols[0] / w, rows[0] / h, (cols[-1] + 1) / w, (rows[-1] + 1) / h)


def quantize8(img: np.ndarray) -> np.ndarray:
    return np.rint(np.clip(img, 0.0, 1.0) * 255.0) / 255.0


def gen_static_sample(rng: Rng, params: GenParams = GenParams(), sample_id: int = 0,
                      split: str = "train") -> Sample:
    p = params
    g = rng.gen
    kind = p.shapes[int(g.integers(len(p.shapes)))]
    h = int(g.integers(p.min_object, p.max_object + 1))
    w = int(g.integers(p.min_object, p.max_object + 1))
    r0 = int(g.integers(p.margin, p.size - p.margin - h + 1))
    c0 = int(g.integers(p.margin, p.size - p.margin - w + 1))
    mask = _render_mask(kind, p.size, r0, c0, h, w, rng)
    if not mask.any():  # degenerate slivers cannot happen with min_object >= 1, but stay safe
        mask[r0, c0] = True
    background = g.uniform(0.05, 0.3)
    contrast = g.uniform(0.45, 0.7)
    img = np.full((p.size, p.size), background)
    if p.texture > 0:
        img += p.texture * (value_noise(rng, (p.size, p.size)) - 0.5)
    img[mask] = np.clip(background + contrast + 0.5 * p.texture * (g.random(int(mask.sum())) - 0.5), 0, 1)
    img = quantize8(img)[None]
    return Sample(sample_id, mask_bbox(mask), split, image=img, shape=kind)


def gen_event_sample(sample: Sample, rng: Rng, params: GenParams = GenParams()) -> Sample:
    """Digital twin of a saccade recording: signed delta events with jittered timestamps."""
    p = params
    img = sample.image
    frames = saccade_frames(img, p.saccade_frames, p.saccade_dx, p.saccade_dy)
    signed = delta_modulate(frames, p.event_threshold, reference=img, signed=True)  # (F, 2C, H, W)
    C = img.shape[0]
    k, ch, y, x = np.nonzero(signed)
    polarity = (ch >= C).astype(np.uint8)  # Off channels first, then On
    jitter = rng.gen.integers(-p.jitter_us, p.jitter_us + 1, size=len(k))
    t = np.maximum(k.astype(np.int64) * p.frame_us + p.frame_us // 2 + jitter, 0)
    order = np.argsort(t, kind="stable")
    h, w = img.shape[1:]
    stream = EventStream.from_arrays(w, h, t[order], x[order], y[order], polarity[order])
    return Sample(sample.id, sample.label, sample.split, events=stream, shape=sample.shape)


def generate(n_train: int = 2000, n_val: int = 400, seed: int = 0,
             params: GenParams = GenParams()) -> list[Sample]:
    """Ids ``0..n_train-1`` form the train split, the next ``n_val`` the val split."""
    base = Rng(seed)
    out = []
    for i in range(n_train + n_val):
        split = "train" if i < n_train else "val"
        s = gen_static_sample(base.derive(i, 0), params, i, split)
        if params.modality == "event":
            s = gen_event_sample(s, base.derive(i, 1), params)
        out.append(s)
    return out


def split(samples, name: str) -> list[Sample]:
    return [s for s in samples if s.split == name]


# ---------------------------------------------------------------------------
# Files: 8-bit PGM images, EVTS event streams, text manifest
# ---------------------------------------------------------------------------


def pgm_bytes(img: np.ndarray) -> bytes:
    img = np.asarray(img)
    if img.ndim == 3:
        if img.shape[0] != 1:
            raise ValueError("PGM stores single-channel images only")
        img = img[0]
    h, w = img.shape
    data = np.rint(np.clip(img, 0, 1) * 255).astype(np.uint8)
    return f"P5\n{w} {h}\n255\n".encode() + data.tobytes()


def read_pgm(buf: bytes) -> np.ndarray:
    m = _PGM_HEADER.match(buf)
    if m is None:
        raise ValueError("not an 8-bit binary PGM")
    w, h = int(m.group(1)), int(m.group(2))
    data = buf[m.end():]
    if len(data) != w * h:
        raise ValueError(f"PGM payload has {len(data)} bytes, expected {w * h}")
    return (np.frombuffer(data, dtype=np.uint8).reshape(1, h, w) / 255.0)


@dataclass
class DatasetManifest:
    header: dict
    records: list = field(default_factory=list)  # (id, split, path, sha256, x0, y0, x1, y1)

    def text(self) -> str:
        lines = ["# spikeloc dataset manifest"]
        lines += [f"{k} = {v}" for k, v in self.header.items()]
        lines.append("---")
        for rec in self.records:
            i, sp, path, digest, *box = rec
            lines.append(" ".join([str(i), sp, path, digest] + [repr(float(v)) for v in box]))
        return "\n".join(lines) + "\n"

    def digest(self) -> str:
        return hashlib.sha256(self.text().encode()).hexdigest()

    @classmethod
    def parse(cls, text: str) -> "DatasetManifest":
        header, records = {}, []
        body = False
        for n, line in enumerate(text.splitlines(), start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if line == "---":
                body = True
                continue
            if not body:
                key, sep, value = line.partition("=")
                if not sep:
                    raise DataError(f"manifest line {n}: expected 'key = value'")
                header[key.strip()] = value.strip()
                continue
            fields = line.split()
            if len(fields) != 8:
                raise DataError(f"manifest line {n}: expected 8 fields, got {len(fields)}")
            records.append((int(fields[0]), fields[1], fields[2], fields[3], *map(float, fields[4:])))
        return cls(header, records)


def _sample_file(sample: Sample) -> tuple[str, bytes]:
    if sample.events is not None:
        return f"events/{sample.id:06d}.evts", events_to_bytes(sample.events)
    return f"images/{sample.id:06d}.pgm", pgm_bytes(sample.image)


def build_manifest(samples, params: GenParams, seed: int) -> tuple[DatasetManifest, dict]:
    """Manifest plus ``{relative path: file bytes}`` for ``samples``."""
    header = {"version": MANIFEST_VERSION, "seed": seed, "count": len(samples)}
    for k, v in asdict(params).items():
        header[k] = ",".join(v) if isinstance(v, tuple) else v
    files, records = {}, []
    for s in sorted(samples, key=lambda s: s.id):
        path, blob = _sample_file(s)
        files[path] = blob
        records.append((s.id, s.split, path, hashlib.sha256(blob).hexdigest(), *s.label.as_tuple()))
    return DatasetManifest(header, records), files


def save_dataset(root, samples, params: GenParams = GenParams(), seed: int = 0,
                 force: bool = False) -> Path:
    root = Path(root)
    manifest_path = root / MANIFEST_NAME
    if manifest_path.exists() and not force:
        raise FileExistsError(f"{manifest_path} exists (use force to overwrite)")
    manifest, files = build_manifest(samples, params, seed)
    for rel, blob in files.items():
        dest = root / rel
        dest.parent.mkdir(parents=True, exist_ok=True)
        dest.write_bytes(blob)
    manifest_path.write_text(manifest.text())
    return manifest_path


def params_from_header(header: dict) -> GenParams:
    kwargs = {}
    for name, f in GenParams.__dataclass_fields__.items():
        if name not in header:
            continue
        raw = header[name]
        default = f.default
        if isinstance(default, tuple):
            kwargs[name] = tuple(x for x in raw.split(",") if x)
        elif isinstance(default, bool):
            kwargs[name] = raw == "True"
        else:
            kwargs[name] = type(default)(raw)
    return GenParams(**kwargs)


def load_dataset(manifest_path, split_name: str | None = None) -> list[Sample]:
    """Load samples in id order, verifying each file against its manifest hash."""
    manifest_path = Path(manifest_path)
    if manifest_path.is_dir():
        manifest_path = manifest_path / MANIFEST_NAME
    if not manifest_path.exists():
        raise DataError(f"manifest not found: {manifest_path}")
    manifest = DatasetManifest.parse(manifest_path.read_text())
    root = manifest_path.parent
    out = []
    for i, sp, rel, digest, *box in sorted(manifest.records, key=lambda r: r[0]):
        if split_name is not None and sp != split_name:
            continue
        path = root / rel
        try:
            blob = path.read_bytes()
        except OSError as exc:
            raise DataError(f"sample {i}: cannot read {rel}: {exc}") from exc
        if hashlib.sha256(blob).hexdigest() != digest:
            raise DataError(f"sample {i}: {rel} does not match its manifest hash")
        label = BBox(*box)
        try:
            if rel.endswith(".evts"):
                out.append(Sample(i, label, sp, events=events_from_bytes(blob)))
            else:
                out.append(Sample(i, label, sp, image=read_pgm(blob)))
        except ValueError as exc:
            raise DataError(f"sample {i}: {exc}") from exc
    return out


def read_manifest(manifest_path) -> DatasetManifest:
    manifest_path = Path(manifest_path)
    if manifest_path.is_dir():
        manifest_path = manifest_path / MANIFEST_NAME
    if not manifest_path.exists():
        raise DataError(f"manifest not found: {manifest_path}")
    return DatasetManifest.parse(manifest_path.read_text())
