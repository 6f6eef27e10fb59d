"""Shared test fixtures built on the package: toy networks, gradient checks, a brute-force event slicer."""

import numpy as np

from spikeloc.net import LayerSpec, NetworkSpec, Tape, batch_loss
from spikeloc.neuron import IFConfig


def brute_force_slices(stream, T):
    ev = stream.events
    t0, t1 = int(ev["t"].min()), int(ev["t"].max())
    out = np.zeros((T, 2, stream.height, stream.width), dtype=np.uint8)
    for e in ev:
        t = int(e["t"])
        if t1 == t0:
            k = 0
        else:
            k = 0
            # largest window whose start t0 + k*span/T is <= t, computed with exact fractions
            while k + 1 < T and (t - t0) * T >= (k + 1) * (t1 - t0):
                k += 1
        out[k, int(e["p"]), int(e["y"]), int(e["x"])] = 1
    return out


def toy_spec(T=3, neuron=IFConfig(), size=4, c=2):
    return NetworkSpec((
        LayerSpec("conv2d", 1, c, kernel=3, stride=1),
        LayerSpec("if", neuron=neuron),
        LayerSpec("flatten"),
        LayerSpec("accumulator", c * size * size, 4),
    ), T, (1, size, size))


def fd_check(net, x, targets, soft):
    """Max relative error of analytic vs central-difference gradients over every parameter."""
    tape = Tape()
    raw, _ = net.forward(x, tape, soft=soft)
    _, g = batch_loss(raw, targets)
    grads = net.backward(tape, g)

    def loss():
        return batch_loss(net.forward(x, soft=soft)[0], targets)[0]

    eps = 1e-6
    num, den = 0.0, 0.0
    worst = 0.0
    for name, p in net.params.items():
        for idx in np.ndindex(p.shape):
            old = p[idx]
            p[idx] = old + eps
            lp = loss()
            p[idx] = old - eps
            lm = loss()
            p[idx] = old
            fd = (lp - lm) / (2 * eps)
            num += (grads[name][idx] - fd) ** 2
            den += fd ** 2
            worst = max(worst, abs(grads[name][idx] - fd) / max(abs(fd), 1e-3))
    return np.sqrt(num / den), worst
