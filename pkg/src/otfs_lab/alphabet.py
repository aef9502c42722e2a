"""Gray-mapped square QAM alphabets with unit average energy."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Per-axis Gray levels, indexed by the integer value of the axis bits.
_AXIS_LEVELS = {
    4: np.array([1.0, -1.0]),
    16: np.array([-3.0, -1.0, 3.0, 1.0]),  # 00->-3, 01->-1, 10->+3, 11->+1
}


@dataclass(frozen=True, eq=False)
class Alphabet:
    """A QAM constellation.

    ``points[i]`` is the symbol carrying the bit pattern whose MSB-first
    integer value is ``i``. The first half of the bits selects the in-phase
    level, the second half the quadrature level.
    """

    order: int
    points: np.ndarray

    @property
    def bit_width(self) -> int:
        return int(np.log2(self.order))

    @property
    def energy(self) -> float:
        return float(np.mean(np.abs(self.points) ** 2))

    def __repr__(self) -> str:
        return f"Alphabet(order={self.order})"


def qam(order: int) -> Alphabet:
    if order not in _AXIS_LEVELS:
        raise ValueError(f"unsupported QAM order {order}; expected one of {sorted(_AXIS_LEVELS)}")
    levels = _AXIS_LEVELS[order]
    half = int(np.log2(order)) // 2
    idx = np.arange(order)
    i_part = levels[idx >> half]
    q_part = levels[idx & ((1 << half) - 1)]
    pts = i_part + 1j * q_part
    pts = pts / np.sqrt(np.mean(np.abs(pts) ** 2))
    pts.setflags(write=False)
    return Alphabet(order=order, points=pts)


def bits_to_indices(bits, bit_width: int) -> np.ndarray:
    bits = np.asarray(bits, dtype=np.int64).ravel()
    if bits.size % bit_width:
        raise ValueError(
            f"bit count {bits.size} is not a multiple of the symbol width {bit_width}"
        )
    weights = 1 << np.arange(bit_width - 1, -1, -1)
    return bits.reshape(-1, bit_width) @ weights


def indices_to_bits(indices, bit_width: int) -> np.ndarray:
    indices = np.asarray(indices, dtype=np.int64).ravel()
    shifts = np.arange(bit_width - 1, -1, -1)
    return ((indices[:, None] >> shifts) & 1).astype(np.uint8).ravel()


def modulate_bits(bits, alphabet: Alphabet) -> np.ndarray:
    """Map a flat bit sequence to constellation symbols."""
    return alphabet.points[bits_to_indices(bits, alphabet.bit_width)]


def nearest_indices(symbols, alphabet: Alphabet) -> np.ndarray:
    symbols = np.asarray(symbols, dtype=complex).ravel()
    dist = np.abs(symbols[:, None] - alphabet.points[None, :]) ** 2
    # argmin returns the first minimum, i.e. ties go to the lowest point index
    return np.argmin(dist, axis=1)


def demodulate(symbols, alphabet: Alphabet) -> np.ndarray:
    """Hard-decision demapping to the bits of the nearest point."""
    return indices_to_bits(nearest_indices(symbols, alphabet), alphabet.bit_width)
