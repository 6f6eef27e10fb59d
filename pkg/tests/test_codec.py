import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import brute_force_slices
from oracles import phase_weight
from spikeloc.codec import (
    CodingScheme, delta_modulate, encode_phase, encode_rate, encode_saccades, encode_trainable, encode_ttfs,
    event_windows, phase_weights, saccade_offsets, slice_events, ttfs_steps, ttfs_time,
)
from spikeloc.core import EventStream, Rng
from spikeloc.neuron import IFConfig

LEVELS = np.arange(256) / 255.0


def test_rate_extremes_and_binarity():
    img = np.array([[[0.0, 1.0, 0.5]]])
    s = encode_rate(img, 50, Rng(0))
    assert s.shape == (50, 1, 1, 3) and s.dtype == np.uint8
    assert s[:, 0, 0, 0].sum() == 0 and s[:, 0, 0, 1].sum() == 50


def test_rate_half_pixel_binomial():
    s = encode_rate(np.full((1, 1, 1), 0.5), 1000, Rng(5))
    assert 450 <= s.sum() <= 550


def test_rate_is_reproducible_per_stream():
    img = np.full((1, 4, 4), 0.3)
    assert np.array_equal(encode_rate(img, 8, Rng(1).derive(2)), encode_rate(img, 8, Rng(1).derive(2)))


def test_ttfs_time_formula():
    assert ttfs_time(0.02) == pytest.approx(math.log(2))
    assert ttfs_time(0.005) == np.inf
    assert ttfs_time(0.01) == np.inf
    t = ttfs_time(LEVELS[LEVELS > 0.01])
    assert np.all(np.diff(t) < 0)


def test_ttfs_dim_pixel_never_fires():
    img = np.array([[[0.005, 0.5, 1.0]]])
    s = encode_ttfs(img, 8)
    assert s[:, 0, 0, 0].sum() == 0
    assert s[0, 0, 0, 2] == 1  # brightest is earliest


def test_ttfs_exhaustive_one_spike_and_order():
    img = LEVELS.reshape(1, 16, 16)
    for T in (1, 4, 8, 32):
        s = encode_ttfs(img, T)
        counts = s.sum(axis=0).ravel()
        assert counts.max() <= 1
        first = np.where(counts == 1, s.argmax(axis=0).ravel(), T)
        fires = LEVELS > 0.01
        assert np.all(counts[fires] == 1) and np.all(counts[~fires] == 0)
        assert np.all(np.diff(first[fires]) <= 0)


def test_ttfs_steps_mapping():
    times = np.array([0.1, 0.2, 0.3, np.inf])
    steps = ttfs_steps(times, 5, clip_percentile=100)
    assert steps.tolist() == [1, 3, 5, 0]


def test_phase_weights_values():
    w = phase_weights(20)
    assert w.tolist() == [phase_weight(t) for t in range(1, 21)]
    assert w[0] == 0.5 and w[7] == 2 ** -8 and w[8] == 0.5


def test_phase_exhaustive_reconstruction():
    img = LEVELS.reshape(1, 16, 16)
    s, w = encode_phase(img, 8)
    recon = np.tensordot(w, s.astype(np.float64), axes=1)
    assert np.array_equal(recon.ravel(), np.arange(256) / 256.0)


def test_phase_pixel_128_and_zero():
    s, _ = encode_phase(np.array([[[128 / 255, 0.0]]]), 16)
    assert s[:, 0, 0, 0].tolist() == [1, 0, 0, 0, 0, 0, 0, 0] * 2
    assert s[:, 0, 0, 1].sum() == 0


def test_saccade_offsets_triangle():
    off = saccade_offsets(6, dx=2, dy=2)
    assert off.tolist() == [[1, 1], [2, 2], [1, 3], [0, 4], [0, 2], [0, 0]]
    assert saccade_offsets(7).shape == (7, 2)
    assert np.allclose(saccade_offsets(10)[-1], 0)


def test_saccades_constant_image_silent():
    assert encode_saccades(np.zeros((1, 8, 8)), 6).sum() == 0
    assert encode_saccades(np.full((1, 8, 8), 0.7), 6).sum() == 0


def test_saccades_high_threshold_silent():
    img = np.random.default_rng(0).random((1, 12, 12))
    assert encode_saccades(img, 9, threshold=1.1).sum() == 0


def test_saccades_requires_two_steps():
    with pytest.raises(ValueError):
        encode_saccades(np.zeros((1, 8, 8)), 1)
    with pytest.raises(ValueError):
        CodingScheme("saccades", 1)


def test_delta_modulation_moving_pixel():
    frames = np.zeros((3, 1, 1, 6))
    for k in range(3):
        frames[k, 0, 0, k + 1] = 1.0
    ref = np.zeros((1, 1, 6))
    ref[0, 0, 0] = 1.0
    on = delta_modulate(frames, 0.1, reference=ref)
    for k in range(3):
        assert on[k, 0, 0].tolist() == [1 if j == k + 1 else 0 for j in range(6)]
    signed = delta_modulate(frames, 0.1, reference=ref, signed=True)
    assert signed.shape == (3, 2, 1, 6)
    assert signed[0, 0, 0, 0] == 1  # Off at the vacated pixel
    assert np.array_equal(signed[:, 1], on[:, 0])


def test_trainable_repeats_and_shape():
    img = np.random.default_rng(1).random((1, 224, 224))
    w = np.random.default_rng(2).normal(size=(32, 1, 3, 3))
    s = encode_trainable(img, 4, w, np.zeros(32))
    assert s.shape == (4, 32, 112, 112)
    assert all(np.array_equal(s[0], s[t]) for t in range(4))
    assert set(np.unique(s)) <= {0, 1}
    assert encode_trainable(np.zeros((1, 8, 8)), 3, w, np.zeros(32)).sum() == 0
    with pytest.raises(ValueError):
        encode_trainable(img, 4, np.zeros((32, 2, 3, 3)), None, IFConfig())


def test_slice_single_and_duplicate_events():
    s = slice_events(EventStream.from_arrays(4, 3, [0], [2], [1], [1]), 5)
    assert s.sum() == 1 and s[0, 1, 1, 2] == 1
    s = slice_events(EventStream.from_arrays(4, 3, [0, 1, 100], [2, 2, 0], [1, 1, 0], [0, 0, 0]), 2)
    assert s[0, 0, 1, 2] == 1 and s.sum() == 2


def test_slice_uniform_windows():
    t = np.arange(8) * 1000
    s = slice_events(EventStream.from_arrays(8, 1, t, np.arange(8), np.zeros(8), np.ones(8)), 4)
    assert s.sum() <= 8
    assert event_windows(t, 4).tolist() == [0, 0, 1, 1, 2, 2, 3, 3]


def test_slice_empty_raises():
    with pytest.raises(ValueError):
        slice_events(EventStream(4, 4), 3)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 10_000), st.integers(0, 5), st.integers(0, 4), st.integers(0, 1)),
                min_size=1, max_size=60), st.integers(1, 12))
def test_slice_matches_brute_force(events, T):
    events = sorted(events)
    stream = EventStream.from_arrays(6, 5, *map(list, zip(*events)))
    s = slice_events(stream, T)
    assert np.array_equal(s, brute_force_slices(stream, T))
    assert s.sum() <= len(events)


def test_scheme_encode_dispatch():
    img = np.random.default_rng(0).random((1, 16, 16))
    rng = Rng(0)
    for name in ("rate", "ttfs", "phase", "saccades"):
        x = CodingScheme(name, 6).encode(img, rng)
        assert x.shape == (6, 1, 16, 16) and set(np.unique(x)) <= {0, 1}
    x = CodingScheme("trainable", 3).encode(img)
    assert x.shape == (3, 1, 16, 16) and np.allclose(x[2], img[0])
    assert CodingScheme("saccades", 4, signed=True).encode(img).shape == (4, 2, 16, 16)
    assert CodingScheme("phase", 8).input_weights()[0] == 0.5
    with pytest.raises(ValueError):
        CodingScheme("morse")
    with pytest.raises(TypeError):
        CodingScheme("event_slice").encode(img)
    with pytest.raises(ValueError):
        CodingScheme("ttfs", tau=0)
