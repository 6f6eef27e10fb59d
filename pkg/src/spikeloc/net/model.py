"""Convolutional IF encoder with an output accumulator, trained by BPTT.

Activations flow as ``(T, B, ...)`` arrays. Stateless layers (conv, linear,
pool) process all time-steps in one batched call; IF layers run the membrane
recurrence along the time axis. The backward pass replays a :class:`Tape`
recorded during the forward pass.
"""

from __future__ import annotations

import numpy as np

from ..core import Rng
from ..neuron import if_backward, if_forward, surrogate_grad, surrogate_value
from ..ops import avg_pool_backward, avg_pool_forward, conv2d_backward, conv2d_forward
from .spec import LayerSpec, NetworkSpec


class Tape:
    """Forward records consumed, in reverse, by :meth:`Network.backward`."""

    def __init__(self):
        self.records: list = []
        self.batch_shape: tuple | None = None
        self.soft = False

    def clear(self) -> None:
        self.records.clear()
        self.batch_shape = None

    def __len__(self) -> int:
        return len(self.records)


def _fold(x):  # (T, B, ...) -> (T*B, ...)
    return x.reshape((-1,) + x.shape[2:])


def _unfold(x, T):
    return x.reshape((T, -1) + x.shape[1:])


class Conv2d:
    def __init__(self, name, spec: LayerSpec):
        self.name, self.spec = name, spec

    def param_shapes(self):
        s = self.spec
        return {f"{self.name}.weight": (s.out_channels, s.in_channels, s.kernel, s.kernel),
                f"{self.name}.bias": (s.out_channels,)}

    def forward(self, net, x, soft):
        w, b = net.params[f"{self.name}.weight"], net.params[f"{self.name}.bias"]
        T = x.shape[0]
        xf = _fold(x)
        out, cols = conv2d_forward(xf, w, b, self.spec.stride, self.spec.pad)
        return _unfold(out, T), (cols, xf.shape)

    def backward(self, net, rec, g, grads, need_input_grad=True):
        cols, x_shape = rec
        w = net.params[f"{self.name}.weight"]
        T = g.shape[0]
        gx, gw, gb = conv2d_backward(_fold(g), cols, x_shape, w, self.spec.stride, self.spec.pad,
                                     need_input_grad)
        _accumulate(grads, f"{self.name}.weight", gw)
        _accumulate(grads, f"{self.name}.bias", gb)
        return None if gx is None else _unfold(gx, T)


class Linear:
    def __init__(self, name, spec: LayerSpec):
        self.name, self.spec = name, spec

    def param_shapes(self):
        s = self.spec
        return {f"{self.name}.weight": (s.out_channels, s.in_channels), f"{self.name}.bias": (s.out_channels,)}

    def forward(self, net, x, soft):
        w, b = net.params[f"{self.name}.weight"], net.params[f"{self.name}.bias"]
        return x @ w.T + b, x

    def backward(self, net, x, g, grads, need_input_grad=True):
        w = net.params[f"{self.name}.weight"]
        _accumulate(grads, f"{self.name}.weight", _fold(g).T @ _fold(x))
        _accumulate(grads, f"{self.name}.bias", _fold(g).sum(axis=0))
        return g @ w if need_input_grad else None


class IF:
    def __init__(self, name, spec: LayerSpec):
        self.name, self.spec = name, spec

    def param_shapes(self):
        return {}

    def forward(self, net, x, soft):
        cfg = self.spec.neuron
        if self.spec.repeat_first:
            h = x[0]
            s = surrogate_value(h - cfg.threshold, net.alpha).astype(h.dtype) if soft else (h >= cfg.threshold).astype(h.dtype)
            return np.broadcast_to(s, x.shape).copy(), h
        spikes, potentials = if_forward(x, cfg, soft=soft, alpha=net.alpha)
        return spikes, (spikes, potentials)

    def backward(self, net, rec, g, grads, need_input_grad=True):
        cfg = self.spec.neuron
        if self.spec.repeat_first:
            h = rec
            gin = np.zeros(g.shape, dtype=g.dtype)
            gin[0] = g.sum(axis=0) * surrogate_grad(h - cfg.threshold, net.alpha)
            return gin
        spikes, potentials = rec
        return if_backward(g, spikes, potentials, cfg, alpha=net.alpha)


class SEWBlock:
    """``out = IF(conv2(IF(conv1(x)))) + x`` (spike-element-wise ADD)."""

    def __init__(self, name, spec: LayerSpec):
        self.name, self.spec = name, spec
        conv = LayerSpec("conv2d", spec.in_channels, spec.out_channels, spec.kernel, 1, spec.padding)
        neuron = LayerSpec("if", neuron=spec.neuron)
        self.parts = [Conv2d(f"{name}.conv1", conv), IF(f"{name}.if1", neuron),
                      Conv2d(f"{name}.conv2", conv), IF(f"{name}.if2", neuron)]

    def param_shapes(self):
        shapes = {}
        for p in self.parts:
            shapes.update(p.param_shapes())
        return shapes

    def forward(self, net, x, soft):
        recs, h, inner = [], x, []
        for p in self.parts:
            h, r = p.forward(net, h, soft)
            recs.append(r)
            inner.append(h)
        # inner IF outputs are reported for spike statistics
        return h + x, (recs, inner[1], inner[3])

    def backward(self, net, rec, g, grads, need_input_grad=True):
        recs = rec[0]
        h = g
        for p, r in zip(reversed(self.parts), reversed(recs)):
            h = p.backward(net, r, h, grads)
        return h + g


class Pool:
    def __init__(self, name, spec: LayerSpec):
        self.name, self.spec = name, spec

    def param_shapes(self):
        return {}

    def forward(self, net, x, soft):
        T = x.shape[0]
        return _unfold(avg_pool_forward(_fold(x), self.spec.kernel), T), None

    def backward(self, net, rec, g, grads, need_input_grad=True):
        T = g.shape[0]
        return _unfold(avg_pool_backward(_fold(g), self.spec.kernel), T)


class Flatten:
    def __init__(self, name, spec: LayerSpec):
        self.name, self.spec = name, spec

    def param_shapes(self):
        return {}

    def forward(self, net, x, soft):
        return x.reshape(x.shape[:2] + (-1,)), x.shape

    def backward(self, net, shape, g, grads, need_input_grad=True):
        return g.reshape(shape)


class Accumulator:
    """Fully connected IF layer with infinite threshold.

    ``V_T = sum_t (W f_t + b)``; the bias is applied at every step. Linearity
    lets the whole head collapse to one affine map of the summed features.
    """

    def __init__(self, name, spec: LayerSpec):
        self.name, self.spec = name, spec

    def param_shapes(self):
        s = self.spec
        return {f"{self.name}.weight": (s.out_channels, s.in_channels), f"{self.name}.bias": (s.out_channels,)}

    def forward(self, net, x, soft):
        w, b = net.params[f"{self.name}.weight"], net.params[f"{self.name}.bias"]
        T = x.shape[0]
        summed = x.sum(axis=0)
        return summed @ w.T + T * b, (summed, T)

    def backward(self, net, rec, g, grads, need_input_grad=True):
        summed, T = rec
        w = net.params[f"{self.name}.weight"]
        _accumulate(grads, f"{self.name}.weight", g.T @ summed)
        _accumulate(grads, f"{self.name}.bias", T * g.sum(axis=0))
        if not need_input_grad:
            return None
        return np.broadcast_to(g @ w, (T,) + summed.shape).copy()


_LAYER_TYPES = {"conv2d": Conv2d, "linear": Linear, "if": IF, "sew": SEWBlock, "pool": Pool,
                "flatten": Flatten, "accumulator": Accumulator}


def _accumulate(grads, name, value):
    if name in grads:
        grads[name] = grads[name] + value
    else:
        grads[name] = value


def accumulator_forward(features, weight, bias) -> np.ndarray:
    """Stand-alone accumulator: ``features`` is ``(T, F)``; returns the 4 potentials at ``T``."""
    features = np.asarray(features, dtype=np.float64)
    weight = np.asarray(weight, dtype=np.float64)
    if features.ndim != 2 or features.shape[1] != weight.shape[1]:
        raise ValueError(f"features {features.shape} do not match weight {weight.shape}")
    v = np.zeros(weight.shape[0])
    for f in features:
        v = v + (weight @ f + bias)
    return v


def logit(p):
    return np.log(p / (1.0 - p))


class Network:
    """A :class:`NetworkSpec` plus its parameters.

    ``dtype`` defaults to float32, the precision stored in checkpoints, so a
    saved and reloaded network reproduces the same outputs bit for bit.
    """

    def __init__(self, spec: NetworkSpec, params: dict | None = None, *, seed: int = 0,
                 dtype=np.float32, alpha: float = 2.0):
        self.spec = spec
        self.dtype = np.dtype(dtype)
        self.alpha = alpha
        self.layers = []
        for i, ls in enumerate(spec.layers):
            name = f"{ls.kind}{i}"
            self.layers.append(_LAYER_TYPES[ls.kind](name, ls))
        self.param_shapes = {}
        for layer in self.layers:
            self.param_shapes.update(layer.param_shapes())
        if params is None:
            params = self.init_params(seed)
        self.params = {}
        for name, shape in self.param_shapes.items():
            if name not in params:
                raise ValueError(f"missing parameter {name!r}")
            arr = np.asarray(params[name])
            if arr.shape != shape:
                raise ValueError(f"parameter {name!r} has shape {arr.shape}, expected {shape}")
            self.params[name] = arr.astype(self.dtype, copy=True)
        extra = set(params) - set(self.param_shapes)
        if extra:
            raise ValueError(f"unexpected parameters: {sorted(extra)}")

    # -- initialisation ---------------------------------------------------

    def init_params(self, seed: int) -> dict:
        """He-normal weights; the accumulator starts out predicting a centered half-size box."""
        rng = Rng(seed).derive(0xC0DE)
        params = {}
        T = self.spec.timesteps
        for i, (name, shape) in enumerate(self.param_shapes.items()):
            g = rng.derive(i).gen
            if name.endswith(".bias"):
                params[name] = np.zeros(shape)
                continue
            fan_in = int(np.prod(shape[1:]))
            if name.startswith("accumulator"):
                params[name] = g.normal(0.0, 1.0 / (fan_in * T), shape)
            else:
                params[name] = g.normal(0.0, np.sqrt(2.0 / fan_in), shape)
        acc = self.layers[-1].name
        params[f"{acc}.bias"] = logit(np.array([0.25, 0.25, 0.75, 0.75])) / T
        return params

    # -- forward / backward -------------------------------------------------

    def _as_batch(self, x):
        x = np.asarray(x)
        single = x.ndim == 4
        if single:
            x = x[None]
        T = self.spec.timesteps
        if x.ndim != 5 or x.shape[1] != T or tuple(x.shape[2:]) != self.spec.input_shape:
            raise ValueError(
                f"input shape {x.shape[1:] if not single else x.shape[1:]} does not match "
                f"network input (T={T}, {self.spec.input_shape})"
            )
        x = np.ascontiguousarray(x.transpose(1, 0, 2, 3, 4)).astype(self.dtype)
        if self.spec.input_weights is not None:
            w = np.asarray(self.spec.input_weights, dtype=self.dtype)
            x = x * w[:, None, None, None, None]
        return x, single

    def forward(self, x, tape: Tape | None = None, *, soft: bool = False, record: bool = False):
        """Run all ``T`` steps.

        ``x`` is one ``(T, C, H, W)`` input or a ``(B, T, C, H, W)`` batch.
        Returns ``(raw, activations)``: the accumulator potentials (``(4,)`` or
        ``(B, 4)``) and, when ``record`` is set, each layer's ``(T, B, ...)``
        output keyed by layer name (SEW inner IF layers included).
        """
        h, single = self._as_batch(x)
        if tape is not None:
            tape.clear()
            tape.soft = soft
            tape.batch_shape = h.shape
        acts = {"input": h} if record else {}
        for layer in self.layers:
            h, rec = layer.forward(self, h, soft)
            if tape is not None:
                tape.records.append(rec)
            if record:
                acts[layer.name] = h
                if isinstance(layer, SEWBlock):
                    acts[f"{layer.name}.if1"] = rec[1]
                    acts[f"{layer.name}.if2"] = rec[2]
        raw = h[0] if single else h
        return raw, acts

    def backward(self, tape: Tape, grad_raw) -> dict:
        """Reverse-mode BPTT from the gradient of the loss w.r.t. the raw outputs."""
        if len(tape) != len(self.layers):
            raise ValueError(f"tape holds {len(tape)} records for a {len(self.layers)}-layer network")
        g = np.asarray(grad_raw, dtype=self.dtype)
        if g.ndim == 1:
            g = g[None]
        B = tape.batch_shape[1]
        if g.shape != (B, self.layers[-1].spec.out_channels):
            raise ValueError(f"output gradient shape {g.shape} does not match batch of {B}")
        grads: dict = {}
        last = len(self.layers) - 1
        for i in range(last, -1, -1):
            g = self.layers[i].backward(self, tape.records[i], g, grads, need_input_grad=i > 0)
        return {name: grads.get(name, np.zeros(shape, self.dtype)) for name, shape in self.param_shapes.items()}

    def predict(self, x) -> np.ndarray:
        from .loss import decode

        raw, _ = self.forward(x)
        return decode(raw)

    def copy_params(self) -> dict:
        return {k: v.copy() for k, v in self.params.items()}

    def n_params(self) -> int:
        return int(sum(v.size for v in self.params.values()))
