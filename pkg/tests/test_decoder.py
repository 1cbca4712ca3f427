"""Decoder output semantics, binary cross-entropy, and loss combination."""

import numpy as np
import pytest

import hagen.autodiff as ad
from hagen.autodiff import Tensor
from hagen.decoder import DecoderParams, bce_loss, decode, total_loss
from hagen.diffusion import DirectionWeights, transition_matrices
from hagen.exceptions import ConfigError, DataError


def _setup(rng, n=3, h=2, c=2, layers=2, max_step=1):
    a = rng.uniform(0, 1, (n, n)) * (rng.random((n, n)) < 0.7)
    ts = transition_matrices(a, max_step)
    dw = DirectionWeights(n)
    dp = DecoderParams.create(h, c, layers, max_step, rng)
    return ts, dw, dp


def test_zero_parameters_give_half_everywhere():
    rng = np.random.default_rng(0)
    ts, dw, dp = _setup(rng)
    for p in dp.parameters():
        p.data = np.zeros(p.shape)
    out = decode(Tensor(rng.normal(size=(3, 2))), dp, ts, direction=dw)
    assert np.array_equal(out.data, np.full((3, 2), 0.5))


def test_single_layer_hand_oracle():
    # N=2, H=C=1, isolated nodes, gate pinned by raw=0: diffusion reduces to
    # x*theta_fwd + 0.5*x*theta_rev per node, then one more conv and sigmoid
    rng = np.random.default_rng(1)
    ts = transition_matrices(np.zeros((2, 2)), max_step=1)
    dw = DirectionWeights(2)
    dp = DecoderParams.create(1, 1, 1, 1, rng)
    h = np.array([[0.4], [-1.2]])

    def conv(x, theta):
        return x * theta[0, 0, 0, 0] + 0.5 * x * theta[0, 0, 0, 1]

    psi = conv(h, dp.layers[0][0].data) + dp.layers[0][1].data
    logits = conv(psi, dp.out_filter.data) + dp.out_bias.data
    expected = 1.0 / (1.0 + np.exp(-logits))
    out = decode(Tensor(h), dp, ts, direction=dw)
    assert np.max(np.abs(out.data - expected)) < 1e-12


def test_outputs_strictly_inside_unit_interval():
    rng = np.random.default_rng(2)
    for draw in range(100):
        ts, dw, dp = _setup(rng)
        out = decode(Tensor(rng.normal(size=(3, 2))), dp, ts, direction=dw).data
        assert np.all(out > 0.0) and np.all(out < 1.0), f"draw {draw}"


def test_inner_relu_last_linear():
    # with one strongly negative hidden layer a 2-layer decoder still moves
    # its output away from 0.5, because the last hidden layer has no ReLU
    rng = np.random.default_rng(3)
    ts, dw, dp = _setup(rng, layers=2)
    for f, b in dp.layers:
        f.data = np.full(f.shape, -5.0)
        b.data = np.full(b.shape, -1.0)
    dp.out_filter.data = np.full(dp.out_filter.shape, 1.0)
    out = decode(Tensor(np.abs(rng.normal(size=(3, 2)))), dp, ts, direction=dw).data
    assert np.all(out != 0.5)


def test_decoder_gradients():
    rng = np.random.default_rng(4)
    ts, dw, dp = _setup(rng, n=3, h=2, c=2, layers=2)
    h = Tensor(rng.normal(size=(3, 2)))
    y = (rng.random((3, 2)) < 0.5).astype(float)

    def loss():
        return bce_loss(decode(h, dp, ts, direction=dw), y)

    gap = ad.check_gradients(loss, dp.parameters() + [dw.raw])
    assert gap < 1e-4


# -- binary cross-entropy -----------------------------------------------------


def test_bce_half_probability():
    loss = bce_loss(Tensor(np.array([[0.5]])), np.array([[1.0]]))
    assert abs(loss.item() - np.log(2.0)) < 1e-12


def test_bce_clamp_keeps_loss_finite_and_tiny():
    loss = bce_loss(Tensor(np.array([[1.0]])), np.array([[1.0]]))
    assert 0.0 < loss.item() < 1.5e-7  # clamped at 1 - 1e-7


def test_bce_hand_value():
    probs = Tensor(np.array([[0.9, 0.2]]))
    targets = np.array([[1.0, 0.0]])
    expected = -(np.log(0.9) + np.log(0.8))
    loss = bce_loss(probs, targets)
    assert abs(loss.item() - 0.32850) < 1e-5
    assert abs(loss.item() - expected) < 1e-12


def test_bce_batch_averages_sample_sums():
    rng = np.random.default_rng(5)
    probs = rng.uniform(0.1, 0.9, (4, 3, 2))
    targets = (rng.random((4, 3, 2)) < 0.5).astype(float)
    per_sample = [bce_loss(Tensor(probs[b]), targets[b]).item() for b in range(4)]
    batched = bce_loss(Tensor(probs), targets).item()
    assert abs(batched - np.mean(per_sample)) < 1e-12


def test_bce_nonnegative_and_minimized_at_truth():
    rng = np.random.default_rng(6)
    targets = (rng.random((3, 2)) < 0.5).astype(float)
    at_truth = bce_loss(Tensor(targets.copy()), targets).item()
    assert at_truth >= 0.0
    for _ in range(20):
        probs = rng.uniform(0.01, 0.99, (3, 2))
        assert bce_loss(Tensor(probs), targets).item() >= at_truth


def test_bce_validation():
    with pytest.raises(DataError):
        bce_loss(Tensor(np.full((2, 2), 0.5)), np.full((2, 2), 0.3))  # non-binary
    with pytest.raises(DataError):
        bce_loss(Tensor(np.full((2, 2), 0.5)), np.zeros((2, 3)))
    with pytest.raises(ConfigError):
        bce_loss(Tensor(np.full((2, 2), 0.5)), np.zeros((2, 2)), eps=0.7)


# -- loss combination ---------------------------------------------------------


def test_total_loss_arithmetic():
    assert total_loss(1.0, 2.0, 0.01).total == 1.02
    assert total_loss(3.5, 99.0, 0.0).total == 3.5
    assert total_loss(3.5, 0.0, 0.25).total == 3.5


def test_total_loss_exact_identity():
    rng = np.random.default_rng(7)
    for _ in range(20):
        crime = float(rng.uniform(0, 10))
        homo = float(rng.uniform(0, 5))
        weight = float(rng.uniform(0, 1))
        lb = total_loss(crime, homo, weight)
        assert lb.total == crime + weight * homo  # bitwise, not approximate


def test_total_loss_rejects_negative_weight():
    with pytest.raises(ConfigError):
        total_loss(1.0, 1.0, -0.01)
