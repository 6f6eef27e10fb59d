from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spikeloc import energy
from spikeloc.net import LayerSpec, Network, NetworkSpec, snn_tiny
from spikeloc.ops import conv_reference


def test_energy_table():
    assert (energy.E_MULT, energy.E_ADD, energy.E_MAC, energy.E_AC) == tuple(map(Fraction, ("3.7", "0.9", "4.6", "0.9")))
    assert energy.E_MAC == energy.E_MULT + energy.E_ADD
    assert energy.REFERENCE_TTFS_ENERGY_RATIO == 126.6


def test_spike_rate():
    assert energy.spike_rate(12, 10) == 1.2
    assert energy.spike_rate(0, 10) == 0.0
    assert energy.spike_rate(8 * 5, 5) == 8.0
    with pytest.raises(ValueError):
        energy.spike_rate(3, 0)


def test_flops():
    assert energy.flops_ann("conv2d", 3, 8, 2, 4) == 4608
    assert energy.flops_ann("linear", in_channels=128, out_channels=4) == 512
    assert energy.flops_ann("conv2d", 3, 8, 2, 0) == 0
    assert energy.flops_ann("pool") == 0 and energy.flops_ann("if") == 0
    with pytest.raises(ValueError):
        energy.flops_ann("lstm")
    assert energy.flops_snn(4608, 0.5) == 2304
    assert energy.flops_snn(4608, 0) == 0
    assert energy.flops_snn(4608, 1) == 4608
    with pytest.raises(ValueError):
        energy.flops_snn(10, -0.1)


def test_flops_match_executed_macs():
    for k in range(1, 5):
        for o in range(1, 5):
            for ci in range(1, 5, 2):
                for co in range(1, 5, 3):
                    x = np.ones((1, ci, o + k - 1, o + k - 1))
                    _, macs = conv_reference(x, np.ones((co, ci, k, k)), None)
                    assert energy.flops_ann("conv2d", k, o, ci, co) == macs


def test_hand_example():
    rep = energy.energy_totals([("conv", "conv2d", 4608, 0.5)])
    assert rep.e_ann_pj == 21196.8
    assert rep.e_snn_pj == 2073.6
    assert rep.ratio == pytest.approx(92 / 9)
    assert rep.e_ann_mj == 21196.8 / 10**9
    with pytest.raises(ValueError):
        energy.energy_totals([])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(0, 10**7), min_size=1, max_size=12).filter(any))
def test_rate_one_cancellation(flops):
    rep = energy.energy_totals([(f"l{i}", "conv2d", f, 1.0) for i, f in enumerate(flops)])
    assert rep.ratio == 4.6 / 0.9
    assert rep.e_ann / rep.e_snn == Fraction(46, 9)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0, 5), min_size=3, max_size=3), st.integers(0, 2), st.floats(0, 1))
def test_snn_energy_monotone_in_rates(rates, which, bump):
    layers = [("a", "conv2d", 1000, rates[0]), ("b", "conv2d", 300, rates[1]), ("c", "linear", 40, rates[2])]
    base = energy.energy_totals(layers).e_snn
    layers[which] = layers[which][:3] + (layers[which][3] + bump,)
    assert energy.energy_totals(layers).e_snn >= base


def test_totals_are_sum_of_rows():
    rows = [("a", "conv2d", 4608, 0.3), ("b", "linear", 512, 1.7)]
    rep = energy.energy_totals(rows)
    assert rep.e_ann == sum(Fraction(r[2]) for r in rows) * energy.E_MAC
    assert rep.e_snn == sum(Fraction(r[2]) * Fraction(r[3]) for r in rows) * energy.E_AC


def one_layer_net(T):
    spec = NetworkSpec((LayerSpec("flatten"), LayerSpec("accumulator", 4, 4)), T, (1, 2, 2))
    return Network(spec, seed=0)


def test_collect_stats_zero_and_full():
    net = Network(snn_tiny(size=16, timesteps=3), seed=0)
    stats = energy.collect_spike_stats(net, np.zeros((5, 3, 1, 16, 16)))
    assert all(stats.rate(n) == 0 for n in energy.spiking_layers(net.spec))
    net = one_layer_net(6)
    stats = energy.collect_spike_stats(net, np.ones((3, 6, 1, 2, 2)))
    assert stats.rate("input") == 6.0


def test_collect_stats_deterministic_and_report():
    net = Network(snn_tiny(size=16, timesteps=4), seed=1)
    x = (np.random.default_rng(0).random((6, 4, 1, 16, 16)) < 0.4).astype(np.uint8)
    a = energy.collect_spike_stats(net, x, batch_size=4)
    b = energy.collect_spike_stats(net, x, batch_size=6)
    assert a.counts.keys() == b.counts.keys()
    for k in a.counts:
        assert a.counts[k] == pytest.approx(b.counts[k], rel=1e-12)
    rep = energy.energy_report(net.spec, a)
    names = [r["name"] for r in rep.rows]
    assert names == ["conv2d0", "sew2.conv1", "sew2.conv2", "conv2d3", "accumulator7"]
    for r in rep.rows:
        if r["rs"] <= 1:
            assert r["flops_snn"] <= r["flops_ann"]
    assert rep.rows[0]["rs"] == pytest.approx(x.sum() / 6 / 256)
    out = energy.energy_report(net.spec, a, attach="output")
    assert out.rows[0]["rs"] == pytest.approx(a.rate("if1"))
    assert sorted(rep.block_rates) == [1, 2, 3]
    with pytest.raises(ValueError):
        energy.energy_report(net.spec, a, attach="both")


def test_csv_and_svg():
    rep = energy.energy_totals([("conv", "conv2d", 4608, 0.5)])
    text = rep.to_csv()
    assert "E_MAC_pJ,4.6" in text and "E_AC_pJ,0.9" in text
    svg = energy.block_rates_svg({1: 0.4, 2: 0.2, 3: 0.1})
    assert svg.count('class="bar"') == 3 and svg.startswith("<svg")
