import numpy as np
import pytest
from oracles import naive_isfft, random_frame

from otfs_lab.channel import TapSet
from otfs_lab.dd_io import NoiseModel, apply_ideal_fractional, apply_rect_integer
from otfs_lab.layout import GridDims
from otfs_lab.tf_oracle import add_cp, full_chain, isfft, otfs_rx_rect, otfs_tx_rect, sfft, td_channel

D16 = GridDims(16, 16)


def test_isfft_delta():
    x = np.zeros((16, 16))
    x[0, 0] = 1
    assert np.allclose(isfft(x), 1 / 16, atol=1e-15)


def test_isfft_matches_definition(rng):
    x = random_frame(rng, 4, 6)
    assert np.max(np.abs(isfft(x) - naive_isfft(x))) < 1e-12


def test_round_trip_and_parseval(rng):
    x = random_frame(rng, 16, 16)
    X = isfft(x)
    assert np.max(np.abs(sfft(X) - x)) < 1e-12
    assert np.sum(np.abs(X) ** 2) == pytest.approx(np.sum(np.abs(x) ** 2), rel=1e-10)


def test_tx_single_cell():
    X = np.zeros((4, 8))
    X[0, 0] = 1
    s = otfs_tx_rect(X)
    assert np.allclose(s[:8], 1 / np.sqrt(8)) and np.all(s[8:] == 0)


def test_tx_rx_pair(rng):
    dims = GridDims(4, 8)
    X = random_frame(rng, 4, 8)
    s = otfs_tx_rect(X)
    assert np.allclose(np.sum(np.abs(s.reshape(4, 8)) ** 2, axis=1), np.sum(np.abs(X) ** 2, axis=1))
    assert np.max(np.abs(otfs_rx_rect(s, dims) - X)) < 1e-12


def test_td_channel_examples(rng):
    dims = GridDims(4, 8)
    s = rng.standard_normal(32) + 1j * rng.standard_normal(32)
    assert np.allclose(td_channel(s, TapSet.identity(), dims), s)
    assert np.allclose(td_channel(s, TapSet.from_taps([1], [3], [0]), dims), np.roll(s, 3))
    q = np.arange(32)
    assert np.allclose(td_channel(s, TapSet.from_taps([1], [0], [1]), dims),
                       s * np.exp(2j * np.pi * q / 32))
    lin = td_channel(s, TapSet.from_taps([1], [3], [0]), dims, cyclic=False)
    assert np.all(lin[:3] == 0) and np.allclose(lin[3:], s[:-3])
    with pytest.raises(ValueError):
        td_channel(s[:10], TapSet.identity(), dims)


def test_add_cp():
    s = np.arange(5)
    assert list(add_cp(s, 2)) == [3, 4, 0, 1, 2, 3, 4]
    assert list(add_cp(s, 0)) == list(s)


def test_identity_chain(rng):
    x = random_frame(rng, 16, 16)
    assert np.max(np.abs(full_chain(x, TapSet.identity(), D16) - x)) < 1e-10


def test_chain_linear(rng):
    taps = TapSet.from_taps([1, 0.5j], [1, 2], [1, -1])
    x1, x2 = random_frame(rng, 16, 16), random_frame(rng, 16, 16)
    lhs = full_chain(2 * x1 - 1j * x2, taps, D16)
    assert np.allclose(lhs, 2 * full_chain(x1, taps, D16) - 1j * full_chain(x2, taps, D16),
                       atol=1e-12)


def test_chain_matches_rect_relation_outside_wrap(rng):
    taps = TapSet.from_taps([0.8, 0.3 - 0.4j, 0.2j], [0, 1, 3], [1, -2, 2])
    x = random_frame(rng, 16, 16)
    y = full_chain(x, taps, D16)
    ref = apply_rect_integer(x, taps, D16)
    assert np.max(np.abs(y[:, 3:] - ref[:, 3:])) < 1e-9


def test_fractional_support_matches(rng):
    taps = TapSet.from_taps([1, 0.7j], [1, 4], [2, -1], [0.3, -0.25])
    x = np.zeros((16, 16))
    x[0, 0] = 1
    y = full_chain(x, taps, D16)
    y_dd = apply_ideal_fractional(x, taps, D16)
    assert set(np.nonzero(np.abs(y).max(axis=0) > 1e-9)[0]) == {1, 4}
    assert set(np.nonzero(np.abs(y_dd).max(axis=0) > 1e-9)[0]) == {1, 4}
    # both leak across every Doppler bin of the occupied delay columns
    assert np.all(np.abs(y[:, [1, 4]]) > 1e-4) and np.all(np.abs(y_dd[:, [1, 4]]) > 1e-4)


def test_noise_requires_rng(rng):
    x = random_frame(rng, 16, 16)
    with pytest.raises(ValueError, match="random generator"):
        full_chain(x, TapSet.identity(), D16, NoiseModel(0.1))
    y = full_chain(x, TapSet.identity(), D16, NoiseModel(0.1), np.random.default_rng(0))
    assert 0.05 < np.var(y - x) < 0.2
