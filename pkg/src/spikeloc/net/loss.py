"""Box decoding and the Distance-IoU loss with its analytic gradient."""

from __future__ import annotations

import numpy as np


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def decode(raw) -> np.ndarray:
    """Map accumulator potentials to boxes: logistic, then order (min, max) per axis."""
    a = _sigmoid(np.asarray(raw, dtype=np.float64))
    return np.stack([np.minimum(a[..., 0], a[..., 2]), np.minimum(a[..., 1], a[..., 3]),
                     np.maximum(a[..., 0], a[..., 2]), np.maximum(a[..., 1], a[..., 3])], axis=-1)


def decode_backward(raw, grad_box) -> np.ndarray:
    """Chain a gradient w.r.t. decoded boxes back to the raw potentials."""
    raw = np.asarray(raw, dtype=np.float64)
    a = _sigmoid(raw)
    g = np.zeros_like(a)
    for lo, hi in ((0, 2), (1, 3)):
        ordered = a[..., lo] <= a[..., hi]
        g[..., lo] = np.where(ordered, grad_box[..., lo], grad_box[..., hi])
        g[..., hi] = np.where(ordered, grad_box[..., hi], grad_box[..., lo])
    return g * a * (1.0 - a)


def diou_loss(pred, target, return_grad: bool = False):
    """``1 - IoU + |center_p - center_g|^2 / c^2`` per box pair.

    ``c`` is the diagonal of the smallest box enclosing both. Boxes are
    ``(..., 4)`` arrays of ``(x_min, y_min, x_max, y_max)``; the prediction
    must be ordered. Targets with zero area are rejected. With
    ``return_grad`` also returns ``d loss / d pred``.
    """
    p = np.asarray(pred, dtype=np.float64)
    g = np.asarray(target, dtype=np.float64)
    p, g = np.broadcast_arrays(p, g)
    if np.any((g[..., 2] - g[..., 0]) * (g[..., 3] - g[..., 1]) <= 0):
        raise ValueError("target boxes must have positive area")

    lo_i = np.maximum(p[..., :2], g[..., :2])
    hi_i = np.minimum(p[..., 2:], g[..., 2:])
    side = np.maximum(hi_i - lo_i, 0.0)  # (..., 2) intersection width, height
    inter = side[..., 0] * side[..., 1]
    size_p = p[..., 2:] - p[..., :2]
    size_g = g[..., 2:] - g[..., :2]
    area_p = size_p[..., 0] * size_p[..., 1]
    area_g = size_g[..., 0] * size_g[..., 1]
    union = area_p + area_g - inter
    iou = inter / union

    delta = 0.5 * (p[..., :2] + p[..., 2:]) - 0.5 * (g[..., :2] + g[..., 2:])
    rho2 = (delta ** 2).sum(axis=-1)
    lo_e = np.minimum(p[..., :2], g[..., :2])
    hi_e = np.maximum(p[..., 2:], g[..., 2:])
    ext = hi_e - lo_e
    c2 = (ext ** 2).sum(axis=-1)
    loss = 1.0 - iou + rho2 / c2
    if not return_grad:
        return loss

    d_iou_d_inter = (union + inter) / union ** 2
    d_iou_d_area_p = -inter / union ** 2
    grad = np.zeros_like(p)
    for ax in (0, 1):
        other = 1 - ax
        overlap = side[..., ax] > 0
        # intersection side = min(p_hi, g_hi) - max(p_lo, g_lo)
        d_side_lo = -(overlap & (p[..., ax] > g[..., ax])).astype(np.float64)
        d_side_hi = (overlap & (p[..., ax + 2] < g[..., ax + 2])).astype(np.float64)
        d_inter_lo = d_side_lo * side[..., other]
        d_inter_hi = d_side_hi * side[..., other]
        d_area_lo = -size_p[..., other]
        d_area_hi = size_p[..., other]
        d_iou_lo = d_iou_d_inter * d_inter_lo + d_iou_d_area_p * d_area_lo
        d_iou_hi = d_iou_d_inter * d_inter_hi + d_iou_d_area_p * d_area_hi
        d_rho = delta[..., ax]  # d rho2 / d p_lo == d rho2 / d p_hi
        d_c2_lo = -2.0 * ext[..., ax] * (p[..., ax] <= g[..., ax])
        d_c2_hi = 2.0 * ext[..., ax] * (p[..., ax + 2] >= g[..., ax + 2])
        grad[..., ax] = -d_iou_lo + (d_rho * c2 - rho2 * d_c2_lo) / c2 ** 2
        grad[..., ax + 2] = -d_iou_hi + (d_rho * c2 - rho2 * d_c2_hi) / c2 ** 2
    return loss, grad


def batch_loss(raw, targets):
    """Mean DIoU over the batch and its gradient w.r.t. the raw potentials."""
    raw = np.asarray(raw, dtype=np.float64)
    boxes = decode(raw)
    losses, g_box = diou_loss(boxes, targets, return_grad=True)
    n = losses.shape[0]
    return float(losses.mean()), decode_backward(raw, g_box / n)
