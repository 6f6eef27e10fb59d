import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import evts_bytes, spkt_bytes
from spikeloc.core import (
    BBox, EventStream, FormatError, Rng, check_image, check_spikes, events_from_bytes, events_to_bytes,
    load_events, load_spikes, save_events, save_spikes, spikes_from_bytes, spikes_to_bytes,
)


def test_spkt_msb_first_single_byte():
    x = np.array([1, 0, 1, 1, 0, 0, 0, 1], dtype=np.uint8).reshape(1, 1, 1, 8)
    buf = spikes_to_bytes(x)
    assert buf[-1] == 0b10110001
    assert len(buf) == 4 + 1 + 16 + 1
    assert np.array_equal(spikes_from_bytes(buf), x)


def test_spkt_empty_tensor_is_header_only():
    x = np.zeros((0, 2, 3, 3), dtype=np.uint8)
    buf = spikes_to_bytes(x)
    assert len(buf) == 21
    assert spikes_from_bytes(buf).shape == (0, 2, 3, 3)


def test_spkt_matches_field_by_field_oracle():
    x = (Rng(7).gen.random((4, 2, 8, 8)) < 0.5).astype(np.uint8)
    assert spikes_to_bytes(x) == spkt_bytes(x)
    assert np.array_equal(spikes_from_bytes(spkt_bytes(x)), x)


def test_spkt_file_roundtrip(tmp_path):
    x = (Rng(3).gen.random((3, 1, 5, 7)) < 0.3).astype(np.uint8)
    save_spikes(tmp_path / "a.spkt", x)
    assert np.array_equal(load_spikes(tmp_path / "a.spkt"), x)


@pytest.mark.parametrize("mutate, msg", [
    (lambda b: b"XXXX" + b[4:], "magic"),
    (lambda b: b[:4] + bytes([2]) + b[5:], "version"),
    (lambda b: b[:-1], "truncated"),
    (lambda b: b + b"\0", "oversized"),
    (lambda b: b[:10], "truncated"),
])
def test_spkt_errors(mutate, msg):
    buf = spikes_to_bytes(np.ones((2, 1, 3, 3), dtype=np.uint8))
    with pytest.raises(FormatError, match=msg):
        spikes_from_bytes(mutate(buf))


def test_spkt_dim_overflow():
    import struct
    buf = b"SPKT" + bytes([1]) + struct.pack("<IIII", 2**32 - 1, 2**32 - 1, 2, 2)
    with pytest.raises(FormatError, match="overflow"):
        spikes_from_bytes(buf)


def test_check_spikes_rejects_non_binary():
    with pytest.raises(ValueError):
        check_spikes(np.full((1, 1, 2, 2), 2))
    with pytest.raises(ValueError):
        check_spikes(np.zeros((2, 2)))


def test_evts_layout_matches_oracle(tmp_path):
    events = [(0, 1, 2, 1), (5, 3, 0, 0), (5, 0, 0, 1), (900, 9, 4, 0)]
    s = EventStream.from_arrays(10, 5, *map(list, zip(*events)))
    assert events_to_bytes(s) == evts_bytes(10, 5, events)
    back = events_from_bytes(evts_bytes(10, 5, events))
    assert back.width == 10 and back.height == 5
    assert np.array_equal(back.events, s.events)
    save_events(tmp_path / "e.evts", s)
    assert np.array_equal(load_events(tmp_path / "e.evts").events, s.events)


def test_evts_errors():
    buf = evts_bytes(4, 4, [(0, 1, 1, 1)])
    with pytest.raises(FormatError, match="magic"):
        events_from_bytes(b"EVTZ" + buf[4:])
    with pytest.raises(FormatError):
        events_from_bytes(buf[:-2])
    with pytest.raises(FormatError):
        events_from_bytes(evts_bytes(4, 4, [(5, 1, 1, 1), (2, 1, 1, 1)]))  # time goes backwards
    with pytest.raises(FormatError):
        events_from_bytes(evts_bytes(4, 4, [(0, 4, 1, 1)]))  # x out of bounds


def test_event_stream_invariants():
    with pytest.raises(ValueError):
        EventStream.from_arrays(4, 4, [3, 1], [0, 0], [0, 0], [1, 1])
    with pytest.raises(ValueError):
        EventStream.from_arrays(4, 4, [0], [0], [4], [1])
    assert len(EventStream(4, 4)) == 0


def test_bbox_validation():
    b = BBox(0.1, 0.2, 0.5, 0.6)
    assert b.area == pytest.approx(0.16)
    assert BBox.from_array(b.as_array()) == b
    with pytest.raises(ValueError):
        BBox(0.5, 0.2, 0.1, 0.6)
    with pytest.raises(ValueError):
        BBox(-0.1, 0.0, 0.5, 0.5)


def test_check_image():
    assert check_image(np.zeros((4, 5))).shape == (1, 4, 5)
    with pytest.raises(ValueError):
        check_image(np.full((1, 2, 2), 1.5))
    with pytest.raises(ValueError):
        check_image(np.full((1, 2, 2), np.nan))


def test_rng_determinism_and_independence():
    a, b = Rng(11), Rng(11)
    assert np.array_equal(a.uniform(10_000), b.uniform(10_000))
    assert np.array_equal(Rng(5).derive(1, 2).uniform(4), Rng(5).derive(1).derive(2).uniform(4))
    assert not np.array_equal(Rng(5).derive(1).uniform(4), Rng(5).derive(2).uniform(4))


def test_rng_uniform_mean_and_range():
    u = Rng(3).uniform(100_000)
    assert 0.49 <= u.mean() <= 0.51
    assert u.min() >= 0.0 and u.max() < 1.0


def test_rng_neighbouring_seeds_differ():
    firsts = [Rng(s).uniform() for s in range(1001)]
    assert all(firsts[s] != firsts[s + 1] for s in range(1000))


def test_rng_golden_values():
    # pinned so a numpy upgrade that changes Philox seeding is caught
    assert Rng(0).uniform(2).tolist() == [0.014067035665647709, 0.2577672456246177]
    assert Rng(1).derive(2, 3).uniform(2).tolist() == [0.18110685480680477, 0.35576521519666693]


@settings(max_examples=60, deadline=None)
@given(arrays(np.uint8, st.tuples(*[st.integers(0, 5)] * 4), elements=st.integers(0, 1)))
def test_spkt_roundtrip_property(x):
    assert np.array_equal(spikes_from_bytes(spikes_to_bytes(x)), x)
