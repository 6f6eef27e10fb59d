"""Analytic energy model: spike rates, ANN/SNN operation counts, 45nm CMOS energy.

Per weighted layer ``l`` (convolution, linear, accumulator)::

    FLOPs_ANN(l) = k^2 * O^2 * C_in * C_out      (convolution)
                 = C_in * C_out                   (linear)
    FLOPs_SNN(l) = FLOPs_ANN(l) * Rs(l)
    E_ANN = sum FLOPs_ANN * E_MAC,   E_SNN = sum FLOPs_SNN * E_AC

``Rs`` is a spike count summed over all time-steps divided by the neuron
count, so it can exceed 1. Pooling, thresholding and SEW additions cost nothing.
Totals are computed with exact rational arithmetic and rounded once.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

# 45nm CMOS, picojoules per operation.
E_MULT = Fraction("3.7")
E_ADD = Fraction("0.9")
E_MAC = Fraction("4.6")
E_AC = Fraction("0.9")
assert E_MAC == E_MULT + E_ADD

PJ_PER_MJ = 10**9

# Reported ratio for the most frugal static coding; context for reports only.
REFERENCE_TTFS_ENERGY_RATIO = 126.6


@dataclass
class LayerCost:
    name: str
    kind: str
    kernel: int = 1
    out_h: int = 1
    out_w: int = 1
    in_channels: int = 0
    out_channels: int = 0
    input_act: str = ""
    output_act: str | None = None
    block: int = 0


@dataclass
class SpikeStats:
    """Per activation: ``(spike count summed over steps, averaged per sample, neuron count)``."""

    counts: dict = field(default_factory=dict)
    neurons: dict = field(default_factory=dict)
    timesteps: int = 1

    def rate(self, name: str) -> float:
        return spike_rate(self.counts[name], self.neurons[name])


def spike_rate(spike_count: float, neuron_count: int) -> float:
    if neuron_count <= 0:
        raise ValueError("spike rate needs a positive neuron count")
    return spike_count / neuron_count


def flops_ann(kind: str, kernel: int = 1, out_size=1, in_channels: int = 0, out_channels: int = 0) -> int:
    """Operation count of a layer evaluated as an ANN.

    ``out_size`` is the output side ``O`` or an ``(H_out, W_out)`` pair.
    Non-weighted layers (pool, if, flatten, sew add) count 0.
    """
    if kind == "conv2d":
        oh, ow = (out_size, out_size) if np.isscalar(out_size) else out_size
        return kernel * kernel * int(oh) * int(ow) * in_channels * out_channels
    if kind in ("linear", "accumulator"):
        return in_channels * out_channels
    if kind in ("pool", "if", "flatten", "sew"):
        return 0
    raise ValueError(f"unsupported layer kind {kind!r}")


def flops_snn(flops: int, rs: float) -> float:
    if rs < 0:
        raise ValueError(f"spike rate must be non-negative, got {rs}")
    return flops * rs


@dataclass
class EnergyReport:
    rows: list  # dicts: name, kind, block, flops_ann, rs, flops_snn
    e_ann: Fraction  # exact pJ
    e_snn: Fraction
    block_rates: dict = field(default_factory=dict)

    @property
    def e_ann_pj(self) -> float:
        return float(self.e_ann)

    @property
    def e_snn_pj(self) -> float:
        return float(self.e_snn)

    @property
    def e_ann_mj(self) -> float:
        return float(self.e_ann / PJ_PER_MJ)

    @property
    def e_snn_mj(self) -> float:
        return float(self.e_snn / PJ_PER_MJ)

    @property
    def ratio(self) -> float:
        return float(self.e_ann / self.e_snn) if self.e_snn else float("inf")

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["layer", "kind", "block", "flops_ann", "rs", "flops_snn"])
        for r in self.rows:
            w.writerow([r["name"], r["kind"], r["block"], r["flops_ann"], repr(r["rs"]), repr(r["flops_snn"])])
        w.writerow([])
        w.writerow(["E_MAC_pJ", float(E_MAC)])
        w.writerow(["E_AC_pJ", float(E_AC)])
        w.writerow(["E_ANN_pJ", repr(self.e_ann_pj)])
        w.writerow(["E_SNN_pJ", repr(self.e_snn_pj)])
        w.writerow(["E_ANN_mJ", repr(self.e_ann_mj)])
        w.writerow(["E_SNN_mJ", repr(self.e_snn_mj)])
        w.writerow(["ratio", repr(self.ratio)])
        return buf.getvalue()


def energy_totals(layers) -> EnergyReport:
    """Energy report from ``(name, kind, flops_ann, rs)`` tuples or row dicts."""
    rows = []
    for item in layers:
        if isinstance(item, dict):
            row = dict(item)
        else:
            name, kind, f, rs = item
            row = {"name": name, "kind": kind, "flops_ann": int(f), "rs": float(rs)}
        row.setdefault("block", 0)
        row["flops_snn"] = flops_snn(row["flops_ann"], row["rs"])
        rows.append(row)
    if not rows:
        raise ValueError("energy report needs at least one layer")
    e_ann = sum(Fraction(r["flops_ann"]) for r in rows) * E_MAC
    e_snn = sum(Fraction(r["flops_ann"]) * Fraction(r["rs"]) for r in rows) * E_AC
    return EnergyReport(rows, e_ann, e_snn)


# ---------------------------------------------------------------------------
# Network introspection
# ---------------------------------------------------------------------------


def layer_costs(spec) -> list[LayerCost]:
    """Weighted layers of a :class:`~spikeloc.net.NetworkSpec` with the activations feeding them.

    Blocks number the encoder stages: each conv (with its IF) and each SEW
    block is one block; the accumulator head is block 0.
    """
    shapes = spec.shapes()
    costs = []
    prev = "input"
    block = 0
    names = [f"{l.kind}{i}" for i, l in enumerate(spec.layers)]
    for i, (layer, shape) in enumerate(zip(spec.layers, shapes)):
        name = names[i]
        nxt = spec.layers[i + 1].kind if i + 1 < len(spec.layers) else None
        if layer.kind == "conv2d":
            block += 1
            out_if = names[i + 1] if nxt == "if" else None
            costs.append(LayerCost(name, "conv2d", layer.kernel, shape[1], shape[2], layer.in_channels,
                                   layer.out_channels, prev, out_if, block))
        elif layer.kind == "sew":
            block += 1
            for part, src, out in (("conv1", prev, f"{name}.if1"), ("conv2", f"{name}.if1", f"{name}.if2")):
                costs.append(LayerCost(f"{name}.{part}", "conv2d", layer.kernel, shape[1], shape[2],
                                       layer.in_channels, layer.out_channels, src, out, block))
        elif layer.kind in ("linear", "accumulator"):
            out_if = names[i + 1] if nxt == "if" else None
            costs.append(LayerCost(name, layer.kind, 1, 1, 1, layer.in_channels, layer.out_channels,
                                   prev, out_if, block + 1 if layer.kind == "linear" else 0))
            if layer.kind == "linear":
                block += 1
        prev = name
    return costs


def spiking_layers(spec) -> dict:
    """IF activation name -> block index."""
    out = {}
    for c in layer_costs(spec):
        if c.output_act is not None:
            out[c.output_act] = c.block
    return out


def collect_spike_stats(net, inputs, batch_size: int = 64) -> SpikeStats:
    """Average per-sample activity of every recorded activation over an encoded set.

    Counts are sums of activation values over time, so SEW outputs (up to 2)
    and pooled averages contribute their value rather than a 0/1 event.
    """
    inputs = np.asarray(inputs)
    n = len(inputs)
    if n == 0:
        raise ValueError("no inputs")
    totals: dict = {}
    neurons: dict = {}
    for start in range(0, n, batch_size):
        _, acts = net.forward(inputs[start:start + batch_size], record=True)
        for name, a in acts.items():
            a = np.asarray(a, dtype=np.float64)
            # (T, B, ...) -> per-sample total over steps
            totals[name] = totals.get(name, 0.0) + float(a.sum())
            neurons[name] = int(np.prod(a.shape[2:]))
    if net.spec.input_weights is not None:
        # the recorded input is scaled by the phase weights; count raw spikes instead
        raw = inputs.astype(np.float64).sum()
        totals["input"] = float(raw)
    return SpikeStats({k: v / n for k, v in totals.items()}, neurons, net.spec.timesteps)


def energy_report(spec, stats: SpikeStats, attach: str = "input") -> EnergyReport:
    """Combine spike statistics with the topology.

    ``attach="input"`` uses the rate of the activations arriving at a layer
    (energy follows incoming spikes); ``attach="output"`` uses the rate of the
    IF layer the weighted layer drives, falling back to the input rate for the
    never-spiking accumulator.
    """
    if attach not in ("input", "output"):
        raise ValueError("attach must be 'input' or 'output'")
    rows = []
    for c in layer_costs(spec):
        src = c.output_act if attach == "output" and c.output_act is not None else c.input_act
        f = flops_ann(c.kind, c.kernel, (c.out_h, c.out_w), c.in_channels, c.out_channels)
        rows.append({"name": c.name, "kind": c.kind, "block": c.block, "flops_ann": f, "rs": stats.rate(src)})
    report = energy_totals(rows)
    report.block_rates = block_spike_rates(spec, stats)
    return report


def block_spike_rates(spec, stats: SpikeStats) -> dict:
    """Mean spike rate of the IF layers in each encoder block."""
    per_block: dict = {}
    for name, block in spiking_layers(spec).items():
        per_block.setdefault(block, []).append(stats.rate(name))
    return {b: float(np.mean(r)) for b, r in sorted(per_block.items())}


def block_rates_svg(block_rates: dict, title: str = "Spike rate per block", width: int = 480,
                    height: int = 300) -> str:
    """Minimal SVG bar chart, one bar per encoder block."""
    blocks = list(block_rates.items())
    pad_l, pad_b, pad_t = 50, 40, 30
    plot_w, plot_h = width - pad_l - 20, height - pad_b - pad_t
    top = max([r for _, r in blocks] + [1e-12])
    bar_w = plot_w / max(len(blocks), 1)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        f'<text x="{width / 2:.1f}" y="18" text-anchor="middle" font-size="14">{title}</text>',
        f'<line x1="{pad_l}" y1="{pad_t + plot_h}" x2="{pad_l + plot_w}" y2="{pad_t + plot_h}" stroke="black"/>',
        f'<line x1="{pad_l}" y1="{pad_t}" x2="{pad_l}" y2="{pad_t + plot_h}" stroke="black"/>',
        f'<text x="{pad_l - 6}" y="{pad_t + 4}" text-anchor="end" font-size="10">{top:.3g}</text>',
    ]
    for i, (block, r) in enumerate(blocks):
        h = plot_h * r / top
        x = pad_l + i * bar_w + 0.15 * bar_w
        y = pad_t + plot_h - h
        parts.append(f'<rect class="bar" x="{x:.1f}" y="{y:.1f}" width="{0.7 * bar_w:.1f}" height="{h:.1f}" '
                     f'fill="steelblue"><title>block {block}: {r:.4g}</title></rect>')
        parts.append(f'<text x="{x + 0.35 * bar_w:.1f}" y="{pad_t + plot_h + 16}" text-anchor="middle" '
                     f'font-size="11">block {block}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
