"""im2col convolution and average pooling with hand-written backward passes.

All functions take batched ``(N, C, H, W)`` arrays; callers fold the time
axis into ``N`` because convolutions are stateless across time-steps.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def conv_output_size(size: int, kernel: int, stride: int, padding: int) -> int:
    out = (size + 2 * padding - kernel) // stride + 1
    if out <= 0:
        raise ValueError(f"kernel {kernel} with stride {stride} does not fit input size {size}")
    return out


def im2col(x: np.ndarray, kernel: int, stride: int, padding: int) -> np.ndarray:
    """Return patches of shape ``(N, Ho, Wo, C*k*k)`` (channel-major, then kernel rows)."""
    if padding:
        x = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    win = sliding_window_view(x, (kernel, kernel), axis=(2, 3))[:, :, ::stride, ::stride]
    n, c, ho, wo = win.shape[:4]
    return np.ascontiguousarray(win.transpose(0, 2, 3, 1, 4, 5)).reshape(n, ho, wo, c * kernel * kernel)


def col2im(cols: np.ndarray, x_shape, kernel: int, stride: int, padding: int) -> np.ndarray:
    """Adjoint of :func:`im2col`: scatter-add patch gradients back to the input."""
    n, c, h, w = x_shape
    _, ho, wo, _ = cols.shape
    cols = cols.reshape(n, ho, wo, c, kernel, kernel)
    out = np.zeros((n, c, h + 2 * padding, w + 2 * padding), dtype=cols.dtype)
    for i in range(kernel):
        for j in range(kernel):
            out[:, :, i:i + stride * ho:stride, j:j + stride * wo:stride] += cols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
    if padding:
        out = out[:, :, padding:-padding, padding:-padding]
    return out


def conv2d_forward(x, weight, bias, stride: int = 1, padding: int = 0):
    """2-D cross-correlation. Returns ``(out, cols)``; ``cols`` feeds the backward pass."""
    c_out, c_in, k, _ = weight.shape
    if x.shape[1] != c_in:
        raise ValueError(f"conv expects {c_in} input channels, got {x.shape[1]}")
    cols = im2col(x, k, stride, padding)
    out = cols @ weight.reshape(c_out, -1).T
    if bias is not None:
        out += bias
    return np.ascontiguousarray(out.transpose(0, 3, 1, 2)), cols


def conv2d_backward(grad_out, cols, x_shape, weight, stride: int = 1, padding: int = 0,
                    need_input_grad: bool = True):
    """Return ``(grad_x, grad_weight, grad_bias)`` for :func:`conv2d_forward`."""
    c_out, c_in, k, _ = weight.shape
    g = grad_out.transpose(0, 2, 3, 1).reshape(-1, c_out)
    flat_cols = cols.reshape(-1, cols.shape[-1])
    grad_w = (g.T @ flat_cols).reshape(weight.shape)
    grad_b = g.sum(axis=0)
    grad_x = None
    if need_input_grad:
        dcols = (g @ weight.reshape(c_out, -1)).reshape(cols.shape)
        grad_x = col2im(dcols, x_shape, k, stride, padding)
    return grad_x, grad_w, grad_b


def avg_pool_forward(x: np.ndarray, size: int) -> np.ndarray:
    n, c, h, w = x.shape
    if h % size or w % size:
        raise ValueError(f"pool size {size} must divide spatial dims {h}x{w}")
    return x.reshape(n, c, h // size, size, w // size, size).mean(axis=(3, 5))


def avg_pool_backward(grad_out: np.ndarray, size: int) -> np.ndarray:
    g = grad_out / (size * size)
    return np.repeat(np.repeat(g, size, axis=2), size, axis=3)


def conv_reference(x, weight, bias, stride: int = 1, padding: int = 0):
    """Direct nested-loop convolution; returns ``(out, mac_count)``.

    Slow; used as an independent oracle for the im2col path and for counting
    multiply-accumulates executed.
    """
    n, c_in, h, w = x.shape
    c_out, _, k, _ = weight.shape
    xp = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    ho = conv_output_size(h, k, stride, padding)
    wo = conv_output_size(w, k, stride, padding)
    out = np.zeros((n, c_out, ho, wo))
    macs = 0
    for b in range(n):
        for o in range(c_out):
            for i in range(ho):
                for j in range(wo):
                    acc = 0.0 if bias is None else float(bias[o])
                    for ci in range(c_in):
                        for di in range(k):
                            for dj in range(k):
                                acc += xp[b, ci, i * stride + di, j * stride + dj] * weight[o, ci, di, dj]
                                macs += 1
                    out[b, o, i, j] = acc
    return out, macs
