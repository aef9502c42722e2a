"""Pilot, guard and data arrangements on the delay-Doppler grid.

Frames are ``(N, M)`` arrays indexed ``[k, l]``: ``k`` is the Doppler bin
(row) and ``l`` the delay bin (column).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np


class LayoutError(ValueError):
    """A pilot/guard arrangement does not fit the grid."""


class Scheme(str, Enum):
    SISO_INTEGER = "siso_integer"
    SISO_FRAC_FULL = "siso_frac_full"
    SISO_FRAC_REDUCED = "siso_frac_reduced"
    MIMO = "mimo"
    MU_UPLINK = "mu_uplink"
    MU_DOWNLINK = "mu_downlink"

    @classmethod
    def parse(cls, name: "str | Scheme") -> "Scheme":
        if isinstance(name, Scheme):
            return name
        key = str(name).replace("_", "").replace("-", "").lower()
        aliases = {
            "sisointeger": cls.SISO_INTEGER,
            "integer": cls.SISO_INTEGER,
            "sisofracfull": cls.SISO_FRAC_FULL,
            "fracfull": cls.SISO_FRAC_FULL,
            "sisofracreduced": cls.SISO_FRAC_REDUCED,
            "fracreduced": cls.SISO_FRAC_REDUCED,
            "mimo": cls.MIMO,
            "muuplink": cls.MU_UPLINK,
            "multiuseruplink": cls.MU_UPLINK,
            "uplink": cls.MU_UPLINK,
            "mudownlink": cls.MU_DOWNLINK,
            "multiuserdownlink": cls.MU_DOWNLINK,
            "downlink": cls.MU_DOWNLINK,
        }
        try:
            return aliases[key]
        except KeyError:
            raise ValueError(
                f"unknown scheme {name!r}; expected one of {[s.value for s in cls]}"
            ) from None

    @property
    def fractional(self) -> bool:
        return self in (Scheme.SISO_FRAC_FULL, Scheme.SISO_FRAC_REDUCED)


@dataclass(frozen=True)
class GridDims:
    """Delay-Doppler grid size and time-frequency sampling steps."""

    N: int
    M: int
    delta_f: float = 15e3
    T: float | None = None

    def __post_init__(self):
        if self.N < 2 or self.M < 2:
            raise ValueError(f"grid needs N, M >= 2, got N={self.N}, M={self.M}")
        if self.delta_f <= 0:
            raise ValueError("delta_f must be positive")
        if self.T is None:
            object.__setattr__(self, "T", 1.0 / self.delta_f)
        elif self.T <= 0:
            raise ValueError("T must be positive")

    @property
    def size(self) -> int:
        return self.N * self.M

    @property
    def shape(self) -> tuple[int, int]:
        return (self.N, self.M)

    @property
    def frame_duration(self) -> float:
        return self.N * self.T

    @property
    def bandwidth(self) -> float:
        return self.M * self.delta_f

    @property
    def t_df(self) -> float:
        return self.T * self.delta_f


@dataclass(frozen=True, eq=False)
class Region:
    """Rectangular set of grid cells, ``rows x cols`` (rows may wrap)."""

    rows: np.ndarray
    cols: np.ndarray

    @property
    def size(self) -> int:
        return len(self.rows) * len(self.cols)

    def mask(self, dims: GridDims) -> np.ndarray:
        m = np.zeros(dims.shape, dtype=bool)
        m[np.ix_(self.rows, self.cols)] = True
        return m


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class FrameLayout:
    scheme: Scheme
    dims: GridDims
    pilots: tuple[tuple[int, int], ...]
    l_tau: int
    k_nu: int
    k_hat: int
    n_streams: int
    block_mask: np.ndarray
    pilot_mask: np.ndarray
    guard_mask: np.ndarray
    data_mask: np.ndarray
    stream_data_masks: tuple[np.ndarray, ...]
    est_regions: tuple[Region, ...]
    det_mask: np.ndarray
    user_masks: tuple[np.ndarray, ...] = field(default=())
    user_guard: int = 0

    @property
    def n_frames(self) -> int:
        """Number of transmitted frames (one per Tx antenna or user)."""
        return len(self.pilots)

    @property
    def pilot(self) -> tuple[int, int]:
        return self.pilots[0]

    def data_count(self, stream: int = 0) -> int:
        return int(self.stream_data_masks[stream].sum())

    @property
    def overhead_fraction(self) -> float:
        return overhead_count(self) / self.dims.size

    def est_mask(self, stream: int | None = None) -> np.ndarray:
        if stream is not None:
            return self.est_regions[stream].mask(self.dims)
        m = np.zeros(self.dims.shape, dtype=bool)
        for r in self.est_regions:
            m |= r.mask(self.dims)
        return m


def _require(cond: bool, inequality: str, **values):
    if not cond:
        got = ", ".join(f"{k}={v}" for k, v in values.items())
        raise LayoutError(f"layout violates {inequality} ({got})")


def _clip(v: int, lo: int, hi: int) -> int:
    return min(max(v, lo), hi) if lo <= hi else v


def build_layout(
    scheme: "Scheme | str",
    dims: GridDims,
    pilot: tuple[int, int] | None = None,
    l_tau: int = 0,
    k_nu: int = 0,
    k_hat: int = 0,
    n_streams: int = 1,
    user_guard: int | None = None,
) -> FrameLayout:
    """Arrange pilot(s), guard and data cells for ``scheme``.

    ``pilot`` is the (first) pilot position ``(k_p, l_p)``; when omitted it
    defaults to the grid centre clipped into the feasible range. For MIMO
    and uplink the ``n``-th stream's pilot sits ``n * (l_tau + 1)`` delay
    bins to the right of the first one. ``user_guard`` is the number of
    all-zero delay columns between downlink user bands (default ``l_tau``).
    """
    scheme = Scheme.parse(scheme)
    N, M = dims.N, dims.M
    if l_tau < 0 or k_nu < 0 or k_hat < 0:
        raise LayoutError("l_tau, k_nu and k_hat must be non-negative")
    if n_streams < 1:
        raise LayoutError("n_streams must be >= 1")
    if scheme in (Scheme.SISO_INTEGER, Scheme.SISO_FRAC_FULL, Scheme.SISO_FRAC_REDUCED):
        if n_streams != 1:
            raise LayoutError(f"{scheme.value} is single-stream; got n_streams={n_streams}")
    if scheme in (Scheme.SISO_INTEGER, Scheme.SISO_FRAC_FULL) and k_hat:
        raise LayoutError(f"k_hat applies to reduced-guard arrangements, not {scheme.value}")

    multi_pilot = scheme in (Scheme.MIMO, Scheme.MU_UPLINK)
    n_pil = n_streams if multi_pilot else 1
    # guard block extent
    full_rows = scheme is Scheme.SISO_FRAC_FULL
    k_guard = 2 * k_nu + 2 * k_hat
    k_est = k_nu + k_hat
    l_right = n_pil * l_tau + n_pil - 1

    if pilot is None:
        kp = N // 2 if full_rows else _clip(N // 2, k_guard, N - 1 - k_guard)
        lp = _clip(M // 2, l_tau, M - 1 - l_right)
    else:
        kp, lp = int(pilot[0]), int(pilot[1])

    _require(0 <= kp <= N - 1, "0 <= k_p <= N-1", k_p=kp, N=N)
    _require(0 <= lp - l_tau, "0 <= l_p - l_tau", l_p=lp, l_tau=l_tau)
    _require(lp + l_right <= M - 1,
             "l_p + n*l_tau + n - 1 <= M - 1" if n_pil > 1 else "l_p + l_tau <= M - 1",
             l_p=lp, l_tau=l_tau, n=n_pil, M=M)
    if not full_rows:
        _require(0 <= kp - k_guard, "0 <= k_p - 2*k_nu - 2*k_hat",
                 k_p=kp, k_nu=k_nu, k_hat=k_hat)
        _require(kp + k_guard <= N - 1, "k_p + 2*k_nu + 2*k_hat <= N - 1",
                 k_p=kp, k_nu=k_nu, k_hat=k_hat, N=N)
    if multi_pilot:
        _require((n_pil + 1) * l_tau + n_pil <= M, "(n+1)*l_tau + n <= M",
                 n=n_pil, l_tau=l_tau, M=M)

    rows = np.arange(N) if full_rows else np.arange(kp - k_guard, kp + k_guard + 1)
    cols = np.arange(lp - l_tau, lp + l_right + 1)
    block = Region(rows, cols).mask(dims)

    pilots = tuple((kp, lp + i * (l_tau + 1)) for i in range(n_pil))
    pilot_mask = np.zeros(dims.shape, dtype=bool)
    for k, l in pilots:
        pilot_mask[k, l] = True

    est_rows = np.arange(N) if full_rows else np.arange(kp - k_est, kp + k_est + 1)
    est_regions = tuple(
        Region(est_rows, np.arange(l, l + l_tau + 1)) for _, l in pilots
    )

    free = ~block
    user_masks: tuple[np.ndarray, ...] = ()
    user_guard_mask = np.zeros(dims.shape, dtype=bool)
    ug = 0
    if scheme is Scheme.MU_UPLINK:
        stream_masks = tuple(free & _col_band(dims, band) for band in _split_cols(M, n_pil))
    elif scheme is Scheme.MU_DOWNLINK:
        ug = l_tau if user_guard is None else int(user_guard)
        if ug < 0:
            raise LayoutError("user_guard must be non-negative")
        usable = M - (n_streams - 1) * ug
        _require(usable >= n_streams, "M - (n_users-1)*user_guard >= n_users",
                 M=M, n_users=n_streams, user_guard=ug)
        bands, guards = _downlink_bands(M, n_streams, ug)
        user_masks = tuple(free & _col_band(dims, b) for b in bands)
        user_guard_mask = free & _col_band(dims, guards)
        union = np.zeros(dims.shape, dtype=bool)
        for m in user_masks:
            union |= m
        stream_masks = (union,)
    else:
        stream_masks = tuple(free.copy() for _ in range(n_pil))

    data_mask = np.zeros(dims.shape, dtype=bool)
    for m in stream_masks:
        data_mask |= m
    guard_mask = (block & ~pilot_mask) | user_guard_mask

    est_union = np.zeros(dims.shape, dtype=bool)
    for r in est_regions:
        est_union |= r.mask(dims)

    return FrameLayout(
        scheme=scheme,
        dims=dims,
        pilots=pilots,
        l_tau=int(l_tau),
        k_nu=int(k_nu),
        k_hat=int(k_hat),
        n_streams=int(n_streams),
        block_mask=_frozen(block),
        pilot_mask=_frozen(pilot_mask),
        guard_mask=_frozen(guard_mask),
        data_mask=_frozen(data_mask),
        stream_data_masks=tuple(_frozen(m) for m in stream_masks),
        est_regions=est_regions,
        det_mask=_frozen(~est_union),
        user_masks=tuple(_frozen(m) for m in user_masks),
        user_guard=ug,
    )


def _split_cols(M: int, n: int) -> list[np.ndarray]:
    return np.array_split(np.arange(M), n)


def _downlink_bands(M: int, n_users: int, guard: int):
    widths = [len(b) for b in np.array_split(np.arange(M - (n_users - 1) * guard), n_users)]
    bands, guards, start = [], [], 0
    for u, w in enumerate(widths):
        bands.append(np.arange(start, start + w))
        start += w
        if u < n_users - 1:
            guards.extend(range(start, start + guard))
            start += guard
    return bands, np.array(guards, dtype=int)


def _col_band(dims: GridDims, cols) -> np.ndarray:
    m = np.zeros(dims.shape, dtype=bool)
    m[:, np.asarray(cols, dtype=int)] = True
    return m


def overhead_count(layout: FrameLayout) -> int:
    """Number of pilot plus guard cells of the embedded pilot block."""
    return int(layout.block_mask.sum())


def table_overhead(scheme: "Scheme | str", N: int, l_tau: int, k_nu: int,
                   k_hat: int = 0, n_streams: int = 1) -> int:
    """Closed-form pilot+guard count for each arrangement."""
    scheme = Scheme.parse(scheme)
    rows = 4 * (k_nu + k_hat) + 1
    if scheme is Scheme.SISO_INTEGER:
        return (2 * l_tau + 1) * (4 * k_nu + 1)
    if scheme is Scheme.SISO_FRAC_FULL:
        return (2 * l_tau + 1) * N
    if scheme in (Scheme.SISO_FRAC_REDUCED, Scheme.MU_DOWNLINK):
        return (2 * l_tau + 1) * rows
    return ((n_streams + 1) * l_tau + n_streams) * rows


def place_symbols(layout: FrameLayout, pilot_amp: complex,
                  data: "Sequence | np.ndarray") -> list[np.ndarray]:
    """Build one transmit frame per stream.

    For single-frame layouts ``data`` is the symbol vector; otherwise it is a
    sequence with one symbol vector per stream. Data fills the stream's data
    cells in row-major order.
    """
    dims = layout.dims
    if layout.n_frames == 1:
        data = [data]
    if len(data) != layout.n_frames:
        raise ValueError(f"expected {layout.n_frames} data vectors, got {len(data)}")
    frames = []
    for s, (d, (kp, lp)) in enumerate(zip(data, layout.pilots)):
        d = np.asarray(d, dtype=complex).ravel()
        mask = layout.stream_data_masks[s]
        if d.size != mask.sum():
            raise ValueError(
                f"stream {s} has {int(mask.sum())} data cells but got {d.size} symbols"
            )
        x = np.zeros(dims.shape, dtype=complex)
        x[mask] = d
        x[kp, lp] = pilot_amp
        frames.append(x)
    return frames


def extract_data(layout: FrameLayout, frame: np.ndarray, stream: int = 0) -> np.ndarray:
    return np.asarray(frame)[layout.stream_data_masks[stream]]


def split_rx(layout: FrameLayout, rx: np.ndarray):
    """Split a received frame into per-stream estimation blocks and detection cells.

    Returns ``(est_blocks, det_values)``: ``est_blocks[s]`` is the
    ``len(rows) x len(cols)`` block of stream ``s``'s estimation region and
    ``det_values`` the detection-region cells in row-major order.
    """
    rx = np.asarray(rx)
    if rx.shape != layout.dims.shape:
        raise ValueError(f"received frame shape {rx.shape} != layout grid {layout.dims.shape}")
    est = [rx[np.ix_(r.rows, r.cols)] for r in layout.est_regions]
    return est, rx[layout.det_mask]


def summary_table(layouts: Sequence[FrameLayout]) -> str:
    """Plain-text overhead table, one line per layout."""
    head = f"{'scheme':<18} {'N':>5} {'M':>5} {'l_tau':>5} {'k_nu':>4} {'k_hat':>5} " \
           f"{'streams':>7} {'pilot+guard':>11} {'data':>7} {'overhead':>9}"
    lines = [head, "-" * len(head)]
    for lay in layouts:
        lines.append(
            f"{lay.scheme.value:<18} {lay.dims.N:>5} {lay.dims.M:>5} {lay.l_tau:>5} "
            f"{lay.k_nu:>4} {lay.k_hat:>5} {lay.n_streams:>7} {overhead_count(lay):>11} "
            f"{int(lay.data_mask.sum()):>7} {100 * lay.overhead_fraction:>8.2f}%"
        )
    return "\n".join(lines)
