"""Localization accuracy (IoU, mIoU) and robustness scores (RAD, mRAD)."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .core import BBox

N_SEVERITIES = 5


def _arr(box) -> np.ndarray:
    return box.as_array() if isinstance(box, BBox) else np.asarray(box, dtype=np.float64)


def iou(a, b):
    """Intersection over union of ``(x_min, y_min, x_max, y_max)`` boxes.

    Broadcasts over leading axes. Disjoint boxes, inverted boxes and a zero
    union all score 0.
    """
    a, b = _arr(a), _arr(b)
    w = np.maximum(np.minimum(a[..., 2], b[..., 2]) - np.maximum(a[..., 0], b[..., 0]), 0.0)
    h = np.maximum(np.minimum(a[..., 3], b[..., 3]) - np.maximum(a[..., 1], b[..., 1]), 0.0)
    inter = w * h
    area_a = np.maximum(a[..., 2] - a[..., 0], 0.0) * np.maximum(a[..., 3] - a[..., 1], 0.0)
    area_b = np.maximum(b[..., 2] - b[..., 0], 0.0) * np.maximum(b[..., 3] - b[..., 1], 0.0)
    union = area_a + area_b - inter
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(union > 0, inter / np.where(union > 0, union, 1.0), 0.0)
    return float(out) if out.ndim == 0 else out


def mean_iou(preds, targets) -> float:
    """Mean IoU over paired boxes, in percent."""
    preds = np.asarray([_arr(p) for p in preds]) if not isinstance(preds, np.ndarray) else preds
    targets = np.asarray([_arr(t) for t in targets]) if not isinstance(targets, np.ndarray) else targets
    if len(preds) != len(targets):
        raise ValueError(f"{len(preds)} predictions for {len(targets)} targets")
    if len(preds) == 0:
        raise ValueError("cannot average IoU over an empty set")
    return float(100.0 * np.mean(iou(preds, targets)))


def rad(miou_clean: float, miou_corr: float) -> float:
    """Relative accuracy drop in percent of the clean score."""
    if miou_clean == 0:
        raise ZeroDivisionError("relative accuracy drop is undefined for a clean mIoU of 0")
    return (miou_clean - miou_corr) / miou_clean * 100.0


def mrad(rads) -> float:
    """Mean of the relative accuracy drops over the five severities."""
    rads = [float(r) for r in rads]
    if len(rads) != N_SEVERITIES:
        raise ValueError(f"expected {N_SEVERITIES} severities, got {len(rads)}")
    return sum(rads) / N_SEVERITIES


# Reported reference values, kept for report context only.
REFERENCE_RATE_GAUSSIAN_MRAD = 0.87


@dataclass
class EvalReport:
    miou_clean: float
    corrupted: dict = field(default_factory=dict)  # corruption -> [mIoU for severity 1..5]

    def rad_matrix(self) -> dict:
        return {c: [rad(self.miou_clean, m) for m in ms] for c, ms in self.corrupted.items()}

    def mrad_vector(self) -> dict:
        return {c: mrad(rs) for c, rs in self.rad_matrix().items()}

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["corruption", "severity", "miou_clean", "miou_corrupted", "rad"])
        for c, ms in self.corrupted.items():
            for sev, m in enumerate(ms, start=1):
                w.writerow([c, sev, repr(self.miou_clean), repr(m), repr(rad(self.miou_clean, m))])
        return buf.getvalue()

    def summary(self) -> str:
        doc = {"miou_clean": self.miou_clean, "corrupted": self.corrupted}
        if self.corrupted:
            doc["rad"] = self.rad_matrix()
            doc["mrad"] = self.mrad_vector()
        return json.dumps(doc, indent=2, sort_keys=True)
