"""Delay-Doppler input-output relations and additive noise.

All relations act on ``(N, M)`` complex frames indexed ``[k, l]`` with
cyclic index arithmetic on both axes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import DopplerMode, TapSet
from .layout import GridDims

_SINGULAR_TOL = 1e-12


@dataclass(frozen=True)
class NoiseModel:
    sigma2: float
    snr_d_db: float = float("inf")
    snr_p_db: float = float("inf")
    pilot_amp: float = 1.0

    @classmethod
    def from_snr(cls, snr_d_db: float, snr_p_db: float) -> "NoiseModel":
        """Unit-energy data: ``sigma2 = 10^(-SNR_d/10)``, ``|x_p| = sigma * 10^(SNR_p/20)``."""
        sigma2 = 10 ** (-snr_d_db / 10)
        return cls(sigma2, snr_d_db, snr_p_db, np.sqrt(sigma2) * 10 ** (snr_p_db / 20))

    @classmethod
    def noiseless(cls, pilot_amp: float = 1.0) -> "NoiseModel":
        return cls(0.0, pilot_amp=pilot_amp)

    @property
    def sigma(self) -> float:
        return float(np.sqrt(self.sigma2))


def path_phase(k, l, dims: GridDims) -> complex:
    """``exp(-j 2 pi (k/NT) (l/M df))``, the delay-Doppler coupling phase."""
    return np.exp(-2j * np.pi * k * l / (dims.size * dims.t_df))


def apply_ideal_integer(x: np.ndarray, taps: TapSet, dims: GridDims) -> np.ndarray:
    if taps.mode is not DopplerMode.INTEGER:
        raise ValueError("fractional-Doppler taps: use apply_ideal_fractional")
    x = np.asarray(x, dtype=complex)
    y = np.zeros_like(x)
    for h, l, k in zip(taps.gains, taps.delay_taps, taps.doppler_taps):
        y += h * path_phase(k, l, dims) * np.roll(x, (k, l), axis=(0, 1))
    return y


def fractional_gain(h: complex, k: int, l: int, kappa: float, q, dims: GridDims):
    """Gain linking ``x[k - k' + q, l - l']`` to ``y[k, l]`` for a fractional path.

    Vectorized over ``q``. Equals the integer-path gain at ``q = 0`` when
    ``kappa = 0`` and vanishes for every other ``q``.
    """
    N = dims.N
    q = np.asarray(q, dtype=float)
    arg = -q - kappa
    # q is an integer, so exp(j2pi(-q-kappa)) == exp(-j2pi kappa) exactly
    num = np.exp(-2j * np.pi * kappa) - 1.0
    den = N * (np.exp(2j * np.pi * arg / N) - 1.0)
    singular = np.abs(arg) < _SINGULAR_TOL
    ratio = np.where(singular, 1.0 + 0j, num / np.where(singular, 1.0, den))
    phase = np.exp(-2j * np.pi * (k + kappa) * l / (dims.size * dims.t_df))
    return ratio * h * phase


def fractional_kernel(taps: TapSet, dims: GridDims) -> np.ndarray:
    """Shift-invariant kernel ``G[s, l']`` with ``y = sum G[s,l'] x[k-s, l-l']``."""
    N = dims.N
    G = np.zeros(dims.shape, dtype=complex)
    q = np.arange(N)
    for h, l, k, kap in zip(taps.gains, taps.delay_taps, taps.doppler_taps, taps.kappas):
        G[(k - q) % N, l % dims.M] += fractional_gain(h, k, l, kap, q, dims)
    return G


def ideal_kernel(taps: TapSet, dims: GridDims) -> np.ndarray:
    if taps.mode is DopplerMode.FRACTIONAL:
        return fractional_kernel(taps, dims)
    G = np.zeros(dims.shape, dtype=complex)
    for h, l, k in zip(taps.gains, taps.delay_taps, taps.doppler_taps):
        G[k % dims.N, l % dims.M] += h * path_phase(k, l, dims)
    return G


def apply_kernel(x: np.ndarray, G: np.ndarray) -> np.ndarray:
    """2-D cyclic convolution of ``x`` with a delay-Doppler kernel."""
    return np.fft.ifft2(np.fft.fft2(G) * np.fft.fft2(x))


def apply_ideal_fractional(x: np.ndarray, taps: TapSet, dims: GridDims) -> np.ndarray:
    return apply_kernel(np.asarray(x, dtype=complex), fractional_kernel(taps, dims))


def rect_phase(k, l, k_path, l_path, dims: GridDims):
    """Per-cell factor of the rectangular-pulse relation (broadcasts).

    ``k_path`` is the signed Doppler tap of the path. Cells with ``l < l_path``
    wrap into the previous time slot and pick up an extra Doppler-dependent
    phase and the ``(N-1)/N`` amplitude factor.
    """
    N, M = dims.N, dims.M
    k = np.asarray(k)
    l = np.asarray(l)
    base = np.exp(2j * np.pi * ((l - l_path) / M) * (k_path / N))
    wrapped = (N - 1) / N * np.exp(-2j * np.pi * ((k - k_path) % N) / N)
    return np.where(l >= l_path, base, base * wrapped)


def apply_rect_integer(x: np.ndarray, taps: TapSet, dims: GridDims) -> np.ndarray:
    """Integer-Doppler relation for rectangular transmit/receive pulses.

    Each path contributes ``h * alpha(k, l) * x[k-k', l-l']`` where ``h`` is
    the raw path gain; the slot-boundary phase is carried by ``alpha``.
    """
    if taps.mode is not DopplerMode.INTEGER:
        raise ValueError("rectangular-pulse relation is defined for integer Doppler only")
    x = np.asarray(x, dtype=complex)
    kk, ll = np.indices(dims.shape)
    y = np.zeros_like(x)
    for h, l, k in zip(taps.gains, taps.delay_taps, taps.doppler_taps):
        y += h * rect_phase(kk, ll, k, l, dims) * np.roll(x, (k, l), axis=(0, 1))
    return y


def apply_channel(x: np.ndarray, taps: TapSet, dims: GridDims, pulse: str = "ideal") -> np.ndarray:
    if pulse == "rect":
        return apply_rect_integer(x, taps, dims)
    if taps.mode is DopplerMode.FRACTIONAL:
        return apply_ideal_fractional(x, taps, dims)
    return apply_ideal_integer(x, taps, dims)


def awgn(shape, sigma2: float, rng: np.random.Generator) -> np.ndarray:
    if sigma2 < 0:
        raise ValueError("noise variance must be non-negative")
    w = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    return np.sqrt(sigma2 / 2) * w


def add_awgn(y: np.ndarray, noise: "NoiseModel | float", rng: np.random.Generator) -> np.ndarray:
    sigma2 = noise.sigma2 if isinstance(noise, NoiseModel) else float(noise)
    y = np.asarray(y, dtype=complex)
    if sigma2 == 0:
        return y.copy()
    return y + awgn(y.shape, sigma2, rng)
