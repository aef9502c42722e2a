"""Symbol detection on the detection region of a received frame.

The received detection cells are written as a sparse linear system
``y = H x_d + w`` over the data cells, then solved with a Gaussian-
approximation message-passing detector (or, for toy sizes, exhaustively).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .alphabet import Alphabet
from .channel import DopplerMode, TapSet
from .dd_io import ideal_kernel, path_phase, rect_phase
from .estimator import EstimatedChannel
from .layout import FrameLayout

SIGMA2_FLOOR = 1e-12
MAX_EXHAUSTIVE_VARS = 12


@dataclass(frozen=True, eq=False)
class SparseSystem:
    """``y[r] = sum_e coef[e] * x[var[e]]`` over edges with ``row[e] == r``."""

    y: np.ndarray
    row: np.ndarray
    var: np.ndarray
    coef: np.ndarray
    n_vars: int
    sigma2: float
    alphabet: Alphabet

    @property
    def n_rows(self) -> int:
        return len(self.y)

    def row_degrees(self) -> np.ndarray:
        return np.bincount(self.row, minlength=self.n_rows)

    def synthesize(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=complex)
        out = np.zeros(self.n_rows, dtype=complex)
        np.add.at(out, self.row, self.coef * x[self.var])
        return out

    def residual(self, x) -> float:
        return float(np.sum(np.abs(self.y - self.synthesize(x)) ** 2))

    def dense(self) -> np.ndarray:
        H = np.zeros((self.n_rows, self.n_vars), dtype=complex)
        np.add.at(H, (self.row, self.var), self.coef)
        return H


def _entries(channel, layout: FrameLayout, pulse: str, truncation: float):
    """Channel as ``(doppler shift, delay, gain)`` triples."""
    dims = layout.dims
    N = dims.N
    if isinstance(channel, TapSet):
        mode = channel.mode
        if pulse == "rect":
            if mode is DopplerMode.FRACTIONAL:
                raise ValueError("rectangular-pulse detection supports integer Doppler only")
            return channel.doppler_taps, channel.delay_taps, channel.gains
        if mode is DopplerMode.INTEGER:
            g = channel.gains * path_phase(channel.doppler_taps, channel.delay_taps, dims)
            return channel.doppler_taps, channel.delay_taps, g
        G = ideal_kernel(channel, dims)
        s, l = np.nonzero(G)
        return _truncate(s, l, G[s, l], truncation)

    if not isinstance(channel, EstimatedChannel):
        raise TypeError(f"unsupported channel type {type(channel).__name__}")
    if channel.mode is DopplerMode.INTEGER:
        g = channel.gains
        if pulse == "rect":
            kp, lp = layout.pilot
            g = g / rect_phase(kp + channel.doppler, lp + channel.delay,
                               channel.doppler, channel.delay, dims)
        return channel.doppler, channel.delay, g
    if pulse == "rect":
        raise ValueError("rectangular-pulse detection supports integer Doppler only")
    return _truncate(channel.doppler % N, channel.delay, channel.gains, truncation)


def _truncate(s, l, g, rel):
    if len(g) == 0 or rel <= 0:
        return s, l, g
    keep = np.abs(g) >= rel * np.abs(g).max()
    return s[keep], l[keep], g[keep]


def build_system(channel: "EstimatedChannel | TapSet", layout: FrameLayout, rx_det,
                 pilot_amp: complex, sigma2: float, alphabet: Alphabet,
                 pulse: str = "ideal", truncation: float = 1e-3) -> SparseSystem:
    """Linear model of the detection cells in terms of the data cells.

    The known pilot contribution is subtracted from the observations and
    guard cells drop out. ``truncation`` drops fractional-Doppler gains below
    that fraction of the largest one.
    """
    if layout.n_frames != 1:
        raise ValueError("joint multi-stream detection is not supported")
    mode = channel.mode
    if mode is DopplerMode.INTEGER and layout.scheme.fractional:
        raise ValueError(f"integer-Doppler channel given for {layout.scheme.value} layout")
    if mode is DopplerMode.FRACTIONAL and not layout.scheme.fractional:
        raise ValueError(f"fractional-Doppler channel given for {layout.scheme.value} layout")
    dims = layout.dims
    N, M = dims.N, dims.M
    shift, delay, gain = (np.asarray(a) for a in _entries(channel, layout, pulse, truncation))

    kd, ld = np.nonzero(layout.det_mask)
    y = np.asarray(rx_det, dtype=complex).copy()
    if y.shape != kd.shape:
        raise ValueError(f"expected {kd.size} detection cells, got {y.size}")
    R = kd.size
    if gain.size == 0:
        return SparseSystem(y, np.zeros(0, int), np.zeros(0, int), np.zeros(0, complex),
                            layout.data_count(), max(sigma2, SIGMA2_FLOOR), alphabet)

    src_k = (kd[:, None] - shift[None, :]) % N
    src_l = (ld[:, None] - delay[None, :]) % M
    if pulse == "rect":
        coef = gain[None, :] * rect_phase(kd[:, None], ld[:, None], shift[None, :],
                                          delay[None, :], dims)
    else:
        coef = np.broadcast_to(gain[None, :], src_k.shape)

    var_map = np.full(dims.shape, -1, dtype=np.int64)
    var_map[layout.data_mask] = np.arange(layout.data_count())
    kp, lp = layout.pilot
    at_pilot = (src_k == kp) & (src_l == lp)
    if at_pilot.any():
        y -= pilot_amp * np.where(at_pilot, coef, 0).sum(axis=1)

    vars_ = var_map[src_k, src_l]
    rows = np.broadcast_to(np.arange(R)[:, None], vars_.shape)
    keep = vars_ >= 0
    row, var, c = rows[keep], vars_[keep], coef[keep]
    # coalesce repeated (row, var) pairs
    key = row * layout.data_count() + var
    uniq, inv = np.unique(key, return_inverse=True)
    if uniq.size != key.size:
        c = np.bincount(inv, c.real, uniq.size) + 1j * np.bincount(inv, c.imag, uniq.size)
        row, var = uniq // layout.data_count(), uniq % layout.data_count()
    return SparseSystem(y, row.astype(np.int64), var.astype(np.int64), np.asarray(c, complex),
                        layout.data_count(), max(float(sigma2), SIGMA2_FLOOR), alphabet)


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    p = np.exp(z)
    return p / p.sum(axis=1, keepdims=True)


def mp_detect(sys: SparseSystem, max_iter: int = 30, damping: float = 0.6, tol: float = 1e-6,
              callback: Callable[[int, np.ndarray], None] | None = None):
    """Message-passing detection with Gaussian interference approximation.

    Returns ``(symbols, iterations)``. Each observation node models all
    variables but one as Gaussian interference; each variable node sends the
    damped product of the other observations' likelihoods.
    """
    pts = sys.alphabet.points
    Q = len(pts)
    V, E = sys.n_vars, sys.row.size
    if E == 0:
        return np.full(V, pts[0]), 0
    sigma2 = max(sys.sigma2, SIGMA2_FLOOR)
    row, var, c = sys.row, sys.var, sys.coef
    c2 = np.abs(c) ** 2
    y_e = sys.y[row]
    cand = c[:, None] * pts[None, :]  # (E, Q)
    cand_re, cand_im = cand.real.copy(), cand.imag.copy()
    cand_e = np.abs(cand) ** 2
    energy = np.abs(pts) ** 2

    order = np.argsort(var, kind="stable")
    sorted_var = var[order]
    starts = np.flatnonzero(np.r_[True, sorted_var[1:] != sorted_var[:-1]])
    present = sorted_var[starts]

    P = np.full((E, Q), 1.0 / Q)
    belief = np.zeros((V, Q))
    it = 0
    for it in range(1, max_iter + 1):
        mean = P @ pts
        var_x = np.maximum(P @ energy - np.abs(mean) ** 2, 0.0)
        cm = c * mean
        row_mu = (np.bincount(row, cm.real, sys.n_rows)
                  + 1j * np.bincount(row, cm.imag, sys.n_rows))
        row_var = np.bincount(row, c2 * var_x, sys.n_rows)
        mu = row_mu[row] - cm
        s2 = np.maximum(row_var[row] - c2 * var_x, 0.0) + sigma2
        r = y_e - mu
        # -|r - c a|^2 / s2, expanded to stay in real arithmetic
        loglik = (2 * (r.real[:, None] * cand_re + r.imag[:, None] * cand_im) - cand_e
                  - (np.abs(r) ** 2)[:, None]) / s2[:, None]

        belief[:] = 0.0
        belief[present] = np.add.reduceat(loglik[order], starts, axis=0)
        P_new = damping * _softmax(belief[var] - loglik) + (1 - damping) * P
        delta = np.abs(P_new - P).max()
        P = P_new
        if callback is not None:
            callback(it, P)
        if delta < tol:
            break
    return pts[np.argmax(belief, axis=1)], it


def map_detect_exhaustive(sys: SparseSystem, chunk: int = 1 << 16) -> np.ndarray:
    """Exact minimizer of ``||y - H x||^2`` over all symbol vectors.

    Ties resolve to the lexicographically lowest index vector.
    """
    V = sys.n_vars
    if V > MAX_EXHAUSTIVE_VARS:
        raise ValueError(f"exhaustive search limited to {MAX_EXHAUSTIVE_VARS} variables, got {V}")
    pts = sys.alphabet.points
    Q = len(pts)
    H = sys.dense()
    best_idx, best_res = None, np.inf
    combos = itertools.product(range(Q), repeat=V)
    while True:
        block = np.array(list(itertools.islice(combos, chunk)), dtype=np.int64).reshape(-1, V)
        if block.size == 0 and V > 0:
            break
        X = pts[block]
        res = np.sum(np.abs(sys.y[None, :] - X @ H.T) ** 2, axis=1)
        i = int(np.argmin(res))
        if res[i] < best_res:
            best_res, best_idx = res[i], block[i]
        if V == 0:
            break
    return pts[best_idx]


def system_from_dense(H, y, sigma2: float, alphabet: Alphabet) -> SparseSystem:
    """Wrap a dense channel matrix (zeros dropped) as a :class:`SparseSystem`."""
    H = np.asarray(H, dtype=complex)
    row, var = np.nonzero(H)
    return SparseSystem(np.asarray(y, dtype=complex), row, var, H[row, var], H.shape[1],
                        max(float(sigma2), SIGMA2_FLOOR), alphabet)
