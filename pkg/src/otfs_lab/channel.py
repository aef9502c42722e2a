"""Sparse delay-Doppler channels: power-delay profiles, Jakes Doppler, grid taps."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .layout import GridDims

SPEED_OF_LIGHT = 3e8  # m/s, the usual link-level simulation value


class DopplerMode(str, Enum):
    INTEGER = "integer"
    FRACTIONAL = "fractional"

    @classmethod
    def parse(cls, v: "str | DopplerMode") -> "DopplerMode":
        return v if isinstance(v, DopplerMode) else cls(str(v).lower())


@dataclass(frozen=True, eq=False)
class PowerDelayProfile:
    name: str
    delays: np.ndarray  # seconds
    powers_db: np.ndarray

    def __post_init__(self):
        if len(self.delays) == 0:
            raise ValueError("power-delay profile is empty")
        if len(self.delays) != len(self.powers_db):
            raise ValueError("delays and powers must have equal length")
        if np.any(np.asarray(self.delays) < 0):
            raise ValueError("path delays must be non-negative")

    @property
    def n_paths(self) -> int:
        return len(self.delays)

    @property
    def powers(self) -> np.ndarray:
        p = 10 ** (np.asarray(self.powers_db, dtype=float) / 10)
        return p / p.sum()


# 3GPP TS 36.101 Annex B.2.1, Extended Vehicular A (EVA).
EVA = PowerDelayProfile(
    "eva",
    np.array([0, 30, 150, 310, 370, 710, 1090, 1730, 2510]) * 1e-9,
    np.array([0.0, -1.5, -1.4, -3.6, -0.6, -9.1, -7.0, -12.0, -16.9]),
)

# 3GPP TS 36.101 Annex B.2.1, Extended Pedestrian A (EPA).
EPA = PowerDelayProfile(
    "epa",
    np.array([0, 30, 70, 90, 110, 190, 410]) * 1e-9,
    np.array([0.0, -1.0, -2.0, -3.0, -8.0, -17.2, -20.8]),
)

PROFILES = {"eva": EVA, "epa": EPA}


def load_profile(path: "str | Path") -> PowerDelayProfile:
    """Read a ``delay_ns power_db`` table (one path per line, ``#`` comments)."""
    delays, powers = [], []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.replace(",", " ").split()
        if len(parts) != 2:
            raise ValueError(f"{path}:{lineno}: expected 'delay_ns power_db', got {line!r}")
        delays.append(float(parts[0]) * 1e-9)
        powers.append(float(parts[1]))
    return PowerDelayProfile(Path(path).stem, np.array(delays), np.array(powers))


def uniform_profile(n_paths: int, dims: GridDims) -> PowerDelayProfile:
    """Equal-power paths on delay bins ``0..n_paths-1`` of ``dims``."""
    delays = np.arange(n_paths) / (dims.M * dims.delta_f)
    return PowerDelayProfile(f"uniform:{n_paths}", delays, np.zeros(n_paths))


def resolve_profile(spec: str, dims: GridDims) -> PowerDelayProfile:
    """Profile by name (``eva``, ``epa``, ``uniform:P``) or table file path."""
    key = spec.strip().lower()
    if key in PROFILES:
        return PROFILES[key]
    if key.startswith("uniform:"):
        return uniform_profile(int(key.split(":", 1)[1]), dims)
    return load_profile(spec)


@dataclass(frozen=True)
class PathSpec:
    gain: complex
    delay: float  # s
    doppler: float  # Hz


def max_doppler(speed_kmph: float, carrier_hz: float) -> float:
    return carrier_hz * speed_kmph / (3.6 * SPEED_OF_LIGHT)


def sample_channel(profile: PowerDelayProfile, speed_kmph: float, carrier_hz: float,
                   rng: np.random.Generator, theta=None) -> list[PathSpec]:
    """Draw one realization: Rayleigh gains per tap, one Jakes Doppler per tap.

    ``theta`` forces the angles of arrival (radians) instead of drawing them
    uniformly on ``[-pi, pi]``.
    """
    if speed_kmph < 0 or carrier_hz <= 0:
        raise ValueError("speed must be >= 0 and carrier > 0")
    P = profile.n_paths
    std = np.sqrt(profile.powers / 2)
    gains = std * (rng.standard_normal(P) + 1j * rng.standard_normal(P))
    if theta is None:
        theta = rng.uniform(-np.pi, np.pi, P)
    theta = np.broadcast_to(np.asarray(theta, dtype=float), (P,))
    nu = max_doppler(speed_kmph, carrier_hz) * np.cos(theta)
    return [PathSpec(complex(g), float(d), float(v))
            for g, d, v in zip(gains, profile.delays, nu)]


def round_half_down(x):
    """Nearest integer, ties toward -inf, so ``x - result`` lies in (-1/2, 1/2]."""
    return np.ceil(np.asarray(x, dtype=float) - 0.5).astype(int)


@dataclass(frozen=True, eq=False)
class TapSet:
    """Channel paths quantized to the delay-Doppler grid."""

    gains: np.ndarray
    delay_taps: np.ndarray
    doppler_taps: np.ndarray  # signed
    kappas: np.ndarray
    mode: DopplerMode

    def __len__(self) -> int:
        return len(self.gains)

    @property
    def max_delay_tap(self) -> int:
        return int(self.delay_taps.max()) if len(self) else 0

    @property
    def max_doppler_tap(self) -> int:
        return int(np.abs(self.doppler_taps).max()) if len(self) else 0

    def fits(self, l_tau: int, k_nu: int) -> bool:
        return self.max_delay_tap <= l_tau and self.max_doppler_tap <= k_nu

    @classmethod
    def from_taps(cls, gains, delay_taps, doppler_taps, kappas=None,
                  mode: "DopplerMode | str | None" = None) -> "TapSet":
        gains = np.atleast_1d(np.asarray(gains, dtype=complex))
        delay_taps = np.atleast_1d(np.asarray(delay_taps, dtype=int))
        doppler_taps = np.atleast_1d(np.asarray(doppler_taps, dtype=int))
        if kappas is None:
            kappas = np.zeros(len(gains))
        kappas = np.atleast_1d(np.asarray(kappas, dtype=float))
        if mode is None:
            mode = DopplerMode.FRACTIONAL if np.any(kappas != 0) else DopplerMode.INTEGER
        mode = DopplerMode.parse(mode)
        if np.any(delay_taps < 0):
            raise ValueError("delay taps must be non-negative")
        if np.any(kappas <= -0.5) or np.any(kappas > 0.5):
            raise ValueError("fractional Doppler must lie in (-1/2, 1/2]")
        if mode is DopplerMode.INTEGER:
            if np.any(kappas != 0):
                raise ValueError("integer-mode taps cannot carry fractional Doppler")
            gains, delay_taps, doppler_taps = _merge(gains, delay_taps, doppler_taps)
            kappas = np.zeros(len(gains))
        return cls(gains, delay_taps, doppler_taps, kappas, mode)

    @classmethod
    def identity(cls) -> "TapSet":
        return cls.from_taps([1.0], [0], [0])


def _merge(gains, delays, dopplers):
    keys = {}
    for g, l, k in zip(gains, delays, dopplers):
        keys[(int(k), int(l))] = keys.get((int(k), int(l)), 0) + g
    ks = np.array([k for k, _ in keys], dtype=int)
    ls = np.array([l for _, l in keys], dtype=int)
    return np.array(list(keys.values()), dtype=complex), ls, ks


def tap_quantize(paths: list[PathSpec], dims: GridDims,
                 mode: "DopplerMode | str") -> TapSet:
    """Round delays to the delay grid and split Doppler into tap + fraction."""
    mode = DopplerMode.parse(mode)
    tau = np.array([p.delay for p in paths], dtype=float)
    nu = np.array([p.doppler for p in paths], dtype=float)
    gains = np.array([p.gain for p in paths], dtype=complex)
    l = np.floor(tau * dims.bandwidth + 0.5).astype(int)
    nu_bins = nu * dims.frame_duration
    k = round_half_down(nu_bins)
    kappa = nu_bins - k if mode is DopplerMode.FRACTIONAL else np.zeros(len(k))
    return TapSet.from_taps(gains, l, k, kappa, mode)


def delay_tap_bound(profile: PowerDelayProfile, dims: GridDims) -> int:
    return int(math.floor(float(np.max(profile.delays)) * dims.bandwidth + 0.5))


def doppler_tap_bound(speed_kmph: float, carrier_hz: float, dims: GridDims) -> int:
    """Largest |Doppler tap| reachable at this speed on this grid."""
    # -nu_max rounds half toward -inf, so the symmetric bound rounds half up
    return int(math.floor(max_doppler(speed_kmph, carrier_hz) * dims.frame_duration + 0.5))
