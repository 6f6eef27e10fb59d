"""Integrate-and-fire dynamics and the arctan surrogate used for BPTT.

The forward recurrence for one layer, per time-step ``t``::

    H_t = V_{t-1} + I_t            # charge
    S_t = Heaviside(H_t - theta)   # fire, with Heaviside(0) = 1
    V_t = H_t * (1 - S_t)          # reset_mode="to_zero"
    V_t = H_t - theta * S_t        # reset_mode="subtract_theta"

With ``infinite_threshold`` the neuron never fires and ``V_T`` is the running
sum of its input, which is how the output accumulator reads out a regression.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

RESET_MODES = ("to_zero", "subtract_theta")


@dataclass(frozen=True)
class IFConfig:
    threshold: float = 1.0
    reset_mode: str = "to_zero"
    infinite_threshold: bool = False
    # Drive step t with the presynaptic output of step t-1 (unit axonal delay).
    delayed_input: bool = False
    # Treat the to_zero reset mask as a constant in the backward pass.
    detach_reset: bool = True

    def __post_init__(self):
        if self.reset_mode not in RESET_MODES:
            raise ValueError(f"reset_mode must be one of {RESET_MODES}, got {self.reset_mode!r}")
        if not self.infinite_threshold and not self.threshold > 0:
            raise ValueError(f"threshold must be positive, got {self.threshold}")

    def to_dict(self) -> dict:
        return {
            "threshold": float(self.threshold),
            "reset_mode": self.reset_mode,
            "infinite_threshold": self.infinite_threshold,
            "delayed_input": self.delayed_input,
            "detach_reset": self.detach_reset,
        }


@dataclass(frozen=True)
class SurrogateConfig:
    alpha: float = 2.0

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")


def surrogate_value(x, alpha: float = 2.0):
    """Smooth step ``arctan(pi/2 * alpha * x) / pi + 1/2``, range (0, 1)."""
    return np.arctan(0.5 * np.pi * alpha * np.asarray(x)) / np.pi + 0.5


def surrogate_grad(x, alpha: float = 2.0):
    """Derivative of :func:`surrogate_value`: ``(alpha/2) / (1 + (pi/2 * alpha * x)**2)``."""
    u = 0.5 * np.pi * alpha * np.asarray(x)
    return 0.5 * alpha / (1.0 + u * u)


def if_step(v, current, cfg: IFConfig = IFConfig()):
    """Advance a layer of IF neurons by one step.

    Returns ``(spikes, new_v)``; ``spikes`` is a 0/1 array shaped like ``v``.
    """
    v = np.asarray(v, dtype=np.float64)
    current = np.asarray(current, dtype=np.float64)
    if v.shape != current.shape:
        raise ValueError(f"state shape {v.shape} does not match input shape {current.shape}")
    h = v + current
    if cfg.infinite_threshold:
        return np.zeros(h.shape, dtype=np.uint8), h
    s = (h >= cfg.threshold).astype(np.uint8)
    if cfg.reset_mode == "to_zero":
        v_new = np.where(s == 1, 0.0, h)
    else:
        v_new = h - cfg.threshold * s
    return s, v_new


def _shift_in_time(x: np.ndarray) -> np.ndarray:
    out = np.zeros_like(x)
    out[1:] = x[:-1]
    return out


def if_forward(currents: np.ndarray, cfg: IFConfig = IFConfig(), *, soft: bool = False,
               alpha: float = 2.0):
    """Run the IF recurrence over the leading time axis of ``currents``.

    Returns ``(spikes, potentials)`` where ``potentials[t]`` is the
    pre-threshold potential ``H_t`` needed by :func:`if_backward`. In ``soft``
    mode the Heaviside is replaced by :func:`surrogate_value`, making the
    whole recurrence differentiable (used to check gradients numerically).
    """
    currents = np.asarray(currents)
    if cfg.delayed_input:
        currents = _shift_in_time(currents)
    T = currents.shape[0]
    dtype = np.result_type(currents.dtype, np.float32)
    potentials = np.empty(currents.shape, dtype=dtype)
    spikes = np.empty(currents.shape, dtype=dtype)
    v = np.zeros(currents.shape[1:], dtype=dtype)
    theta = dtype.type(cfg.threshold)
    for t in range(T):
        h = v + currents[t]
        potentials[t] = h
        if cfg.infinite_threshold:
            spikes[t] = 0
            v = h
            continue
        s = surrogate_value(h - theta, alpha).astype(dtype) if soft else (h >= theta).astype(dtype)
        spikes[t] = s
        v = h * (1 - s) if cfg.reset_mode == "to_zero" else h - theta * s
    return spikes, potentials


def if_backward(grad_spikes: np.ndarray, spikes: np.ndarray, potentials: np.ndarray,
                cfg: IFConfig = IFConfig(), *, alpha: float = 2.0,
                grad_final_v: np.ndarray | None = None) -> np.ndarray:
    """Backpropagate through time for :func:`if_forward`.

    Every Heaviside contributes ``surrogate_grad(H_t - theta)``; the membrane
    recurrence carries gradient from step ``t+1`` back into step ``t``,
    including through the reset term. Returns the gradient w.r.t. the input
    currents (before any ``delayed_input`` shift is undone, i.e. w.r.t. the
    caller's ``currents``).
    """
    T = grad_spikes.shape[0]
    theta = cfg.threshold
    grad_in = np.empty_like(potentials)
    dv = np.zeros_like(potentials[0]) if grad_final_v is None else np.array(grad_final_v, dtype=potentials.dtype)
    for t in range(T - 1, -1, -1):
        h = potentials[t]
        if cfg.infinite_threshold:
            dh = dv
        else:
            s = spikes[t]
            ds = grad_spikes[t].astype(potentials.dtype, copy=True)
            if cfg.reset_mode == "to_zero":
                dh = dv * (1 - s)
                if not cfg.detach_reset:
                    ds -= h * dv
            else:
                dh = dv.copy()
                ds -= theta * dv
            dh = dh + ds * surrogate_grad(h - theta, alpha)
        grad_in[t] = dh
        dv = dh
    if cfg.delayed_input:
        shifted = np.zeros_like(grad_in)
        shifted[:-1] = grad_in[1:]
        grad_in = shifted
    return grad_in
