"""Threshold channel estimation from the embedded-pilot region."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import DopplerMode, TapSet
from .layout import FrameLayout

DEFAULT_THRESHOLD_SIGMAS = 3.0


def threshold_for(sigma: float, multiplier: float = DEFAULT_THRESHOLD_SIGMAS) -> float:
    return multiplier * sigma


@dataclass(frozen=True, eq=False)
class EstimatedChannel:
    """Detected taps as entries ``(doppler, delay, gain)``.

    Integer mode: ``doppler`` is the signed Doppler tap ``k'`` and ``gain``
    the coupled path gain. Fractional mode: ``doppler`` is the Doppler bin
    ``[k - k_p]_N`` of the effective gain seen at delay ``delay``.
    """

    mode: DopplerMode
    threshold: float
    doppler: np.ndarray
    delay: np.ndarray
    gains: np.ndarray
    n_doppler: int
    l_tau: int

    def __len__(self) -> int:
        return len(self.gains)

    @property
    def delay_indicator(self) -> np.ndarray:
        ind = np.zeros(self.l_tau + 1, dtype=bool)
        ind[self.delay] = True
        return ind

    @property
    def effective_gains(self) -> np.ndarray:
        """Dense ``(N, l_tau + 1)`` array of gains indexed by ``[bin mod N, delay]``."""
        h = np.zeros((self.n_doppler, self.l_tau + 1), dtype=complex)
        h[self.doppler % self.n_doppler, self.delay] = self.gains
        return h

    def to_text(self) -> str:
        """One ``mode k l kappa_bin re im`` line per retained gain.

        Integer entries write the signed tap as ``k`` and ``0`` as
        ``kappa_bin``; fractional entries write ``0`` as ``k`` and the
        Doppler bin as ``kappa_bin``.
        """
        lines = [f"# mode {self.mode.value} threshold {float(self.threshold)!r} "
                 f"n_doppler {self.n_doppler} l_tau {self.l_tau}"]
        for k, l, g in zip(self.doppler, self.delay, self.gains):
            re, im = float(g.real), float(g.imag)
            if self.mode is DopplerMode.INTEGER:
                lines.append(f"integer {int(k)} {int(l)} 0 {re!r} {im!r}")
            else:
                lines.append(f"fractional 0 {int(l)} {int(k)} {re!r} {im!r}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "EstimatedChannel":
        header, *rows = [ln for ln in text.splitlines() if ln.strip()]
        hd = header.lstrip("#").split()
        meta = dict(zip(hd[::2], hd[1::2]))
        mode = DopplerMode.parse(meta.get("mode", "integer"))
        ks, ls, gs = [], [], []
        for row in rows:
            m, k, l, kb, re, im = row.split()
            mode = DopplerMode.parse(m)
            ks.append(int(k) if mode is DopplerMode.INTEGER else int(kb))
            ls.append(int(l))
            gs.append(complex(float(re), float(im)))
        return cls(mode, float(meta["threshold"]), np.array(ks, dtype=int),
                   np.array(ls, dtype=int), np.array(gs, dtype=complex),
                   int(meta["n_doppler"]), int(meta["l_tau"]))


def _check_pilot(x_p):
    if x_p == 0:
        raise ValueError("pilot amplitude must be nonzero")
    if not np.isfinite(x_p):
        raise ValueError("pilot amplitude must be finite")


def estimate_integer(region, layout: FrameLayout, x_p: complex, threshold: float,
                     stream: int = 0) -> EstimatedChannel:
    """Keep every pilot-region cell with ``|y| >= threshold`` as a path ``y / x_p``."""
    _check_pilot(x_p)
    if threshold < 0:
        raise ValueError("threshold must be non-negative")
    if layout.scheme.fractional:
        raise ValueError(f"{layout.scheme.value} carries fractional Doppler; use estimate_fractional")
    reg = layout.est_regions[stream]
    kp, lp = layout.pilots[stream]
    region = np.asarray(region)
    hit_r, hit_c = np.nonzero(np.abs(region) >= threshold)
    return EstimatedChannel(
        DopplerMode.INTEGER,
        float(threshold),
        reg.rows[hit_r] - kp,
        reg.cols[hit_c] - lp,
        region[hit_r, hit_c] / x_p,
        layout.dims.N,
        layout.l_tau,
    )


def estimate_fractional(region, layout: FrameLayout, x_p: complex, threshold: float,
                        stream: int = 0) -> EstimatedChannel:
    """Per-delay effective Doppler gains; any hit at a delay marks that delay active.

    On reduced-guard layouts data leakage into the region is simply part of
    what the threshold sees.
    """
    _check_pilot(x_p)
    if threshold < 0:
        raise ValueError("threshold must be non-negative")
    if not layout.scheme.fractional:
        raise ValueError(f"{layout.scheme.value} is an integer-Doppler arrangement")
    reg = layout.est_regions[stream]
    kp, lp = layout.pilots[stream]
    N = layout.dims.N
    region = np.asarray(region)
    hit_r, hit_c = np.nonzero(np.abs(region) >= threshold)
    return EstimatedChannel(
        DopplerMode.FRACTIONAL,
        float(threshold),
        (reg.rows[hit_r] - kp) % N,
        reg.cols[hit_c] - lp,
        region[hit_r, hit_c] / x_p,
        N,
        layout.l_tau,
    )


def estimate(region, layout: FrameLayout, x_p: complex, threshold: float,
             stream: int = 0) -> EstimatedChannel:
    if layout.scheme.fractional:
        return estimate_fractional(region, layout, x_p, threshold, stream)
    return estimate_integer(region, layout, x_p, threshold, stream)


@dataclass(frozen=True)
class Diagnostics:
    true_paths: int
    misses: int
    candidates: int  # est-region hypotheses with no true path
    false_alarms: int

    @property
    def miss_rate(self) -> float:
        return self.misses / self.true_paths if self.true_paths else 0.0

    @property
    def false_alarm_rate(self) -> float:
        return self.false_alarms / self.candidates if self.candidates else 0.0


def diagnose(est: EstimatedChannel, truth: TapSet, layout: FrameLayout) -> Diagnostics:
    """Compare detected taps with the true ones.

    Integer mode scores ``(k', l')`` cells of the estimation region; fractional
    mode scores the per-delay indicator.
    """
    if est.mode is DopplerMode.INTEGER:
        cells = layout.est_regions[0].size
        true = {(int(k), int(l)) for k, l in zip(truth.doppler_taps, truth.delay_taps)}
        found = {(int(k), int(l)) for k, l in zip(est.doppler, est.delay)}
    else:
        cells = layout.l_tau + 1
        true = {int(l) for l in truth.delay_taps}
        found = {int(l) for l in est.delay}
    return Diagnostics(
        true_paths=len(true),
        misses=len(true - found),
        candidates=cells - len(true),
        false_alarms=len(found - true),
    )
