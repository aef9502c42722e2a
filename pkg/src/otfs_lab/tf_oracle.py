"""Time-frequency reference chain for cross-checking the delay-Doppler relations.

ISFFT -> rectangular-pulse Heisenberg (per-slot IDFT) -> sampled time-domain
channel -> Wigner (per-slot DFT) -> SFFT. Every stage is unitary.
"""

from __future__ import annotations

import numpy as np

from .channel import TapSet
from .dd_io import NoiseModel, add_awgn
from .layout import GridDims


def isfft(x: np.ndarray) -> np.ndarray:
    """Delay-Doppler ``x[k, l]`` to time-frequency ``X[n, m]``."""
    return np.fft.fft(np.fft.ifft(x, axis=0, norm="ortho"), axis=1, norm="ortho")


def sfft(X: np.ndarray) -> np.ndarray:
    return np.fft.ifft(np.fft.fft(X, axis=0, norm="ortho"), axis=1, norm="ortho")


def otfs_tx_rect(X: np.ndarray) -> np.ndarray:
    """Rectangular-pulse Heisenberg transform: one M-point IDFT per time slot."""
    return np.fft.ifft(X, axis=1, norm="ortho").reshape(-1)


def otfs_rx_rect(s: np.ndarray, dims: GridDims) -> np.ndarray:
    return np.fft.fft(np.asarray(s).reshape(dims.N, dims.M), axis=1, norm="ortho")


def add_cp(s: np.ndarray, cp_len: int) -> np.ndarray:
    return np.concatenate([s[len(s) - cp_len:], s]) if cp_len else np.asarray(s)


def td_channel(s: np.ndarray, taps: TapSet, dims: GridDims, cyclic: bool = True) -> np.ndarray:
    """Apply the sampled multipath channel at rate ``M * delta_f``.

    ``r[q] = sum_i h_i exp(j2pi (k_i + kappa_i)(q - l_i) / NM) s[q - l_i]``.
    With ``cyclic`` a frame-level cyclic prefix covering the largest delay
    is prepended before the channel and stripped afterwards; otherwise the
    signal history before ``q = 0`` is zero.
    """
    s = np.asarray(s, dtype=complex)
    NM = dims.size
    if len(s) != NM:
        raise ValueError(f"signal length {len(s)} != N*M = {NM}")
    cp = taps.max_delay_tap if cyclic else 0
    ext = add_cp(s, cp)
    q = np.arange(NM)
    r = np.zeros(NM, dtype=complex)
    nu_scale = 1.0 / (NM * dims.t_df)
    for h, l, k, kap in zip(taps.gains, taps.delay_taps, taps.doppler_taps, taps.kappas):
        src = q - l  # time index of the delayed sample, origin at the first data sample
        if cyclic:
            delayed = ext[src + cp]
        else:
            delayed = np.where(src >= 0, s[np.clip(src, 0, None)], 0)
        r += h * np.exp(2j * np.pi * (k + kap) * src * nu_scale) * delayed
    return r


def full_chain(x: np.ndarray, taps: TapSet, dims: GridDims, noise: NoiseModel | None = None,
               rng: np.random.Generator | None = None, cyclic: bool = True) -> np.ndarray:
    s = otfs_tx_rect(isfft(np.asarray(x, dtype=complex)))
    r = td_channel(s, taps, dims, cyclic=cyclic)
    y = sfft(otfs_rx_rect(r, dims))
    if noise is not None and noise.sigma2 > 0:
        if rng is None:
            raise ValueError("a random generator is required when noise is enabled")
        y = add_awgn(y, noise, rng)
    return y
