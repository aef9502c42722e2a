import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from otfs_lab.channel import DopplerMode, TapSet
from otfs_lab.dd_io import apply_channel, awgn, path_phase
from otfs_lab.estimator import (
    EstimatedChannel,
    diagnose,
    estimate,
    estimate_fractional,
    estimate_integer,
    threshold_for,
)
from otfs_lab.layout import GridDims, build_layout, place_symbols, split_rx

DIMS = GridDims(16, 32)
INT_LAY = build_layout("siso_integer", DIMS, l_tau=4, k_nu=2)


def _rx(layout, taps, rng, pilot_amp=10.0, sigma2=0.0):
    d = rng.choice([1, -1], layout.data_count()) + 1j * rng.choice([1, -1], layout.data_count())
    x = place_symbols(layout, pilot_amp, d / np.sqrt(2))[0]
    y = apply_channel(x, taps, layout.dims)
    if sigma2:
        y = y + awgn(y.shape, sigma2, rng)
    return y


def test_single_path_exact(rng):
    taps = TapSet.from_taps([0.6 - 0.3j], [3], [2])
    (blk,), _ = split_rx(INT_LAY, _rx(INT_LAY, taps, rng))
    est = estimate_integer(blk, INT_LAY, 10.0, 1e-9)
    assert len(est) == 1
    assert (est.doppler[0], est.delay[0]) == (2, 3)
    assert est.gains[0] == pytest.approx((0.6 - 0.3j) * np.exp(-2j * np.pi * 6 / 512), abs=1e-12)


def test_zero_threshold_keeps_everything(rng):
    (blk,), _ = split_rx(INT_LAY, _rx(INT_LAY, TapSet.identity(), rng))
    est = estimate_integer(blk, INT_LAY, 10.0, 0.0)
    assert len(est) == INT_LAY.est_regions[0].size == 5 * 5


@settings(max_examples=40, deadline=None)
@given(st.floats(0, 5), st.floats(0, 5), st.integers(0, 2**32 - 1))
def test_threshold_monotone(t1, t2, seed):
    lo, hi = sorted((t1, t2))
    blk = awgn((5, 5), 1.0, np.random.default_rng(seed))
    a = estimate_integer(blk, INT_LAY, 1.0, lo)
    b = estimate_integer(blk, INT_LAY, 1.0, hi)
    assert set(zip(b.doppler, b.delay)) <= set(zip(a.doppler, a.delay))


def test_scale_equivariance(rng):
    blk = awgn((5, 5), 1.0, rng)
    c = 0.3 - 2.1j
    a = estimate_integer(blk, INT_LAY, 4.0 + 1j, 0.0)
    b = estimate_integer(blk * c, INT_LAY, (4.0 + 1j) * c, 0.0)
    assert np.max(np.abs(a.gains - b.gains)) < 1e-12


def test_isolated_from_detection_cells(rng):
    taps = TapSet.from_taps([1, 0.5j, -0.4], [0, 2, 4], [0, -2, 1])
    y = _rx(INT_LAY, taps, rng, sigma2=0.01)
    y2 = y.copy()
    y2[INT_LAY.det_mask] += 100 * rng.standard_normal(INT_LAY.det_mask.sum())
    a = estimate(split_rx(INT_LAY, y)[0][0], INT_LAY, 10.0, 0.3)
    b = estimate(split_rx(INT_LAY, y2)[0][0], INT_LAY, 10.0, 0.3)
    assert np.array_equal(a.gains, b.gains) and np.array_equal(a.delay, b.delay)


def test_errors():
    blk = np.zeros((5, 5))
    with pytest.raises(ValueError, match="nonzero"):
        estimate_integer(blk, INT_LAY, 0, 1.0)
    with pytest.raises(ValueError, match="non-negative"):
        estimate_integer(blk, INT_LAY, 1, -1.0)
    frac = build_layout("siso_frac_full", DIMS, l_tau=4)
    with pytest.raises(ValueError, match="estimate_fractional"):
        estimate_integer(np.zeros((16, 5)), frac, 1, 1.0)
    with pytest.raises(ValueError):
        estimate_fractional(blk, INT_LAY, 1, 1.0)


def test_fractional_zero_kappa(rng):
    lay = build_layout("siso_frac_full", DIMS, l_tau=4, k_nu=2)
    taps = TapSet.from_taps([0.9j], [2], [-1], mode="fractional")
    (blk,), _ = split_rx(lay, _rx(lay, taps, rng))
    est = estimate_fractional(blk, lay, 10.0, 1e-9)
    assert len(est) == 1
    assert (est.doppler[0], est.delay[0]) == (15, 2)
    assert est.gains[0] == pytest.approx(0.9j * path_phase(-1, 2, DIMS), abs=1e-12)
    assert list(est.delay_indicator) == [False, False, True, False, False]


def test_fractional_half_kappa_spreads(rng):
    lay = build_layout("siso_frac_full", DIMS, l_tau=4, k_nu=2)
    taps = TapSet.from_taps([1.0], [1], [2], [0.5])
    (blk,), _ = split_rx(lay, _rx(lay, taps, rng))
    est = estimate_fractional(blk, lay, 10.0, 1e-9)
    h = est.effective_gains
    assert np.all(np.abs(h[:, 1]) > 0)
    assert np.all(h[:, [0, 2, 3, 4]] == 0)
    # bins k' and k'+1 tie at kappa = 1/2; k' is (one of) the largest
    assert np.abs(h[2, 1]) >= np.abs(h[:, 1]).max() - 1e-12


def test_reduced_guard_matches_full_without_leakage(rng):
    dims = GridDims(32, 32)
    full = build_layout("siso_frac_full", dims, pilot=(16, 12), l_tau=3, k_nu=2)
    red = build_layout("siso_frac_reduced", dims, pilot=(16, 12), l_tau=3, k_nu=2, k_hat=3)
    taps = TapSet.from_taps([0.7, 0.5j, -0.4], [0, 1, 3], [2, -2, 0], mode="fractional")
    sigma2 = 1.0
    amp = np.sqrt(sigma2) * 10 ** 2.5  # SNR_p = 50 dB
    w = awgn(dims.shape, sigma2, rng)
    y_full = _rx(full, taps, rng, amp) + w
    y_red = _rx(red, taps, rng, amp) + w
    rows = red.est_regions[0].rows
    a = estimate_fractional(split_rx(full, y_full)[0][0][rows], red, amp, 0.0)
    b = estimate_fractional(split_rx(red, y_red)[0][0], red, amp, 0.0)
    assert np.max(np.abs(a.gains - b.gains)) < 1e-6


def test_reduced_guard_leakage_shrinks_with_k_hat(rng):
    dims = GridDims(64, 16)
    taps = TapSet.from_taps([0.8, 0.6j], [0, 2], [1, -1], [0.3, -0.2])
    full = build_layout("siso_frac_full", dims, pilot=(32, 6), l_tau=2, k_nu=1)
    y_full = _rx(full, taps, np.random.default_rng(3), 100.0)
    errs = []
    for k_hat in (1, 4, 10):
        red = build_layout("siso_frac_reduced", dims, pilot=(32, 6), l_tau=2, k_nu=1, k_hat=k_hat)
        y_red = _rx(red, taps, np.random.default_rng(3), 100.0)
        rows = red.est_regions[0].rows
        ref = split_rx(full, y_full)[0][0][rows]
        errs.append(np.max(np.abs(split_rx(red, y_red)[0][0] - ref)) / 100.0)
    assert errs[0] > errs[1] > errs[2]


def test_text_round_trip(rng):
    taps = TapSet.from_taps([1, 0.5j, -0.4], [0, 2, 4], [0, -2, 1])
    est = estimate(split_rx(INT_LAY, _rx(INT_LAY, taps, rng))[0][0], INT_LAY, 10.0, 1e-6)
    text = est.to_text()
    assert text.splitlines()[1].startswith("integer ")
    back = EstimatedChannel.from_text(text)
    assert back.mode is DopplerMode.INTEGER
    assert np.array_equal(back.doppler, est.doppler) and np.array_equal(back.gains, est.gains)
    assert back.threshold == est.threshold and back.l_tau == est.l_tau

    lay = build_layout("siso_frac_full", DIMS, l_tau=4)
    f = estimate_fractional(split_rx(lay, _rx(lay, TapSet.from_taps([1], [1], [1], [0.2]), rng))[0][0],
                            lay, 10.0, 1e-3)
    fb = EstimatedChannel.from_text(f.to_text())
    assert fb.mode is DopplerMode.FRACTIONAL
    assert np.array_equal(fb.effective_gains, f.effective_gains)


def test_diagnostics(rng):
    taps = TapSet.from_taps([1, 0.5j], [0, 2], [0, -2])
    est = EstimatedChannel(DopplerMode.INTEGER, 0.1, np.array([0, 1]), np.array([0, 1]),
                           np.array([1, 1j]), 16, 4)
    d = diagnose(est, taps, INT_LAY)
    assert (d.true_paths, d.misses, d.false_alarms, d.candidates) == (2, 1, 1, 23)
    assert d.miss_rate == 0.5
    assert d.false_alarm_rate == pytest.approx(1 / 23)
    assert threshold_for(0.5) == 1.5


def test_empty_estimate_round_trip():
    lay = build_layout("siso_frac_full", DIMS, l_tau=4)
    est = estimate_fractional(np.zeros((16, 5)), lay, 1.0, 1.0)
    back = EstimatedChannel.from_text(est.to_text())
    assert len(back) == 0 and back.mode is DopplerMode.FRACTIONAL
