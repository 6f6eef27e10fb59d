import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import if_scalar
from spikeloc.neuron import IFConfig, SurrogateConfig, if_backward, if_forward, if_step, surrogate_grad, surrogate_value


def run_steps(inputs, cfg):
    v = np.zeros(np.shape(inputs[0]))
    spikes = []
    for i in inputs:
        s, v = if_step(v, i, cfg)
        spikes.append(s)
    return np.array(spikes), v


def test_constant_drive_spikes_at_3_and_6():
    spikes, v = run_steps([0.4] * 6, IFConfig())
    assert list(spikes) == [0, 0, 1, 0, 0, 1]
    assert v == 0.0


def test_zero_input_stays_silent():
    spikes, v = run_steps([0.0] * 10, IFConfig())
    assert spikes.sum() == 0 and v == 0.0


def test_infinite_threshold_accumulates():
    spikes, v = run_steps([0.3, 0.5, -0.1], IFConfig(infinite_threshold=True))
    assert spikes.sum() == 0
    assert v == pytest.approx(0.7, abs=1e-15)


def test_threshold_is_inclusive():
    s, v = if_step(np.array([0.0]), np.array([1.0]), IFConfig())
    assert s[0] == 1 and v[0] == 0.0


def test_subtract_reset_keeps_residual():
    s, v = if_step(np.array([0.0]), np.array([1.5]), IFConfig(reset_mode="subtract_theta"))
    assert s[0] == 1 and v[0] == pytest.approx(0.5)


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        if_step(np.zeros(3), np.zeros(4))


def test_config_validation():
    with pytest.raises(ValueError):
        IFConfig(threshold=0.0)
    with pytest.raises(ValueError):
        IFConfig(reset_mode="leaky")
    with pytest.raises(ValueError):
        SurrogateConfig(alpha=0)
    IFConfig(threshold=0.0, infinite_threshold=True)


@pytest.mark.parametrize("reset", ["to_zero", "subtract_theta"])
def test_forward_matches_scalar_oracle(reset):
    rng = np.random.default_rng(0)
    cfg = IFConfig(threshold=0.8, reset_mode=reset)
    x = rng.normal(0.3, 0.5, (20, 15))
    spikes, _ = if_forward(x.astype(np.float64), cfg)
    for n in range(15):
        ref, _ = if_scalar(x[:, n], 0.8, reset)
        assert list(spikes[:, n].astype(int)) == ref


def test_forward_potentials_are_pre_reset():
    _, h = if_forward(np.full((3, 1), 0.6), IFConfig())
    assert np.allclose(h[:, 0], [0.6, 1.2, 0.6])


def test_delayed_input_shifts_by_one_step():
    x = np.array([[1.0], [0.0], [0.0]])
    s0, _ = if_forward(x, IFConfig())
    s1, _ = if_forward(x, IFConfig(delayed_input=True))
    assert list(s0[:, 0]) == [1, 0, 0]
    assert list(s1[:, 0]) == [0, 1, 0]


def test_surrogate_values():
    assert surrogate_value(0.0) == 0.5
    assert surrogate_value(1e6) > 0.999
    x = np.linspace(-3, 3, 41)
    assert np.allclose(surrogate_value(-x), 1 - surrogate_value(x), atol=1e-15)
    assert np.all(np.diff(surrogate_value(x)) > 0)
    assert surrogate_grad(0.0) == 1.0
    assert np.array_equal(surrogate_grad(x), surrogate_grad(-x))


@pytest.mark.parametrize("x", [-1.0, -0.1, 0.3, 2.0])
def test_surrogate_grad_finite_difference(x):
    h = 1e-6
    fd = (surrogate_value(x + h) - surrogate_value(x - h)) / (2 * h)
    assert abs(fd - surrogate_grad(x)) / abs(surrogate_grad(x)) < 1e-6


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0, 2, allow_nan=False), min_size=1, max_size=40))
def test_subtract_mode_conserves_charge(inputs):
    spikes, _ = if_forward(np.array(inputs)[:, None], IFConfig(reset_mode="subtract_theta"))
    assert spikes.sum() * 1.0 <= sum(inputs) + 1e-9


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-5, 5, allow_nan=False), min_size=1, max_size=40))
def test_accumulator_identity(inputs):
    x = np.array(inputs)[:, None]
    _, h = if_forward(x, IFConfig(infinite_threshold=True))
    assert h[-1, 0] == pytest.approx(np.cumsum(x)[-1], abs=1e-9)


def _soft_loss(x, g, cfg):
    s, _ = if_forward(x, cfg, soft=True)
    return float((s * g).sum())


@pytest.mark.parametrize("cfg", [
    IFConfig(reset_mode="to_zero", detach_reset=False),
    IFConfig(reset_mode="subtract_theta"),
    IFConfig(reset_mode="subtract_theta", delayed_input=True),
])
def test_backward_matches_soft_finite_differences(cfg):
    rng = np.random.default_rng(4)
    x = rng.normal(0.5, 0.6, (5, 6))
    g = rng.normal(size=x.shape)
    s, h = if_forward(x, cfg, soft=True)
    grad = if_backward(g, s, h, cfg)
    eps = 1e-6
    fd = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        xp, xm = x.copy(), x.copy()
        xp[idx] += eps
        xm[idx] -= eps
        fd[idx] = (_soft_loss(xp, g, cfg) - _soft_loss(xm, g, cfg)) / (2 * eps)
    assert np.max(np.abs(grad - fd)) / np.max(np.abs(fd)) < 1e-6


def _frozen_mask_loss(x, g, masks, theta=1.0):
    """Soft forward whose to_zero reset uses fixed masks, so the reset carries no gradient."""
    v = np.zeros(x.shape[1:])
    total = 0.0
    for t in range(x.shape[0]):
        h = v + x[t]
        total += float((surrogate_value(h - theta) * g[t]).sum())
        v = h * (1 - masks[t])
    return total


def test_detached_reset_matches_frozen_mask_derivative():
    cfg = IFConfig()  # to_zero with the reset detached
    rng = np.random.default_rng(6)
    x = rng.normal(0.5, 0.6, (5, 6))
    g = rng.normal(size=x.shape)
    s, h = if_forward(x, cfg, soft=True)
    grad = if_backward(g, s, h, cfg)
    eps = 1e-6
    fd = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        xp, xm = x.copy(), x.copy()
        xp[idx] += eps
        xm[idx] -= eps
        fd[idx] = (_frozen_mask_loss(xp, g, s) - _frozen_mask_loss(xm, g, s)) / (2 * eps)
    assert np.max(np.abs(grad - fd)) / np.max(np.abs(fd)) < 1e-6
    exact = if_backward(g, s, h, IFConfig(detach_reset=False))
    assert not np.allclose(grad, exact)


def test_backward_zero_upstream_is_zero():
    x = np.random.default_rng(1).normal(size=(4, 3))
    s, h = if_forward(x)
    assert not if_backward(np.zeros_like(x), s, h).any()
