"""Monte-Carlo BER experiments over the full estimate-and-detect link."""

from __future__ import annotations

import csv
import dataclasses
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import alphabet as qam_alphabet
from .channel import (
    DopplerMode,
    TapSet,
    delay_tap_bound,
    doppler_tap_bound,
    resolve_profile,
    sample_channel,
    tap_quantize,
)
from .dd_io import NoiseModel, add_awgn, apply_channel
from .detector import build_system, map_detect_exhaustive, mp_detect
from .estimator import diagnose, estimate
from .layout import FrameLayout, GridDims, Scheme, build_layout, place_symbols, split_rx


class ConfigError(ValueError):
    pass


@dataclass
class SimConfig:
    # defaults: low-latency frame, N=16 Doppler bins x M=128 delay bins
    N: int = 16
    M: int = 128
    delta_f: float = 15e3
    scheme: str = "siso_frac_full"
    l_tau: int | None = None  # None: derived from the profile
    k_nu: int | None = None  # None: derived from speed and carrier
    k_hat: int = 0
    pilot: tuple[int, int] | None = None
    qam: int = 4
    pulse: str = "ideal"
    doppler: str = "fractional"
    profile: str = "eva"
    speed_kmph: float = 120.0
    carrier_hz: float = 4e9
    snr_d: list[float] = field(default_factory=lambda: [10.0, 12.0, 14.0, 16.0])
    snr_p: float = 60.0
    snr_p_offset: float | None = None  # if set, SNR_p = SNR_d + offset
    threshold: float = 3.0  # in units of sigma
    csi: str = "estimated"
    detector: str = "mp"
    max_iter: int = 30
    damping: float = 0.6
    truncation: float = 1e-3
    trials: int = 10
    seed: int = 0
    workers: int = 1

    @property
    def dims(self) -> GridDims:
        return GridDims(self.N, self.M, self.delta_f)

    def pilot_snr(self, snr_d: float) -> float:
        return snr_d + self.snr_p_offset if self.snr_p_offset is not None else self.snr_p

    def replace(self, **changes) -> "SimConfig":
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class MetricsRow:
    snr_d_db: float
    snr_p_db: float
    threshold: float
    scheme: str
    csi: str
    frames: int
    bits: int
    bit_errors: int
    ber: float
    miss_rate: float
    false_alarm_rate: float
    mean_iterations: float
    wall_time: float


CSV_FIELDS = [f.name for f in dataclasses.fields(MetricsRow)]


def _blank_to_none(v: str):
    return None if v.strip().lower() in ("", "none", "auto") else v


def _floats(v: str) -> list[float]:
    return [float(s) for s in v.replace(";", ",").split(",") if s.strip()]


def _pilot(v: str):
    v = _blank_to_none(v)
    if v is None:
        return None
    k, l = (int(s) for s in v.split(","))
    return (k, l)


def _opt(conv):
    return lambda v: None if _blank_to_none(v) is None else conv(v)


_CONVERTERS = {
    "N": int, "M": int, "delta_f": float, "scheme": str, "l_tau": _opt(int),
    "k_nu": _opt(int), "k_hat": int, "pilot": _pilot, "qam": int, "pulse": str,
    "doppler": str, "profile": str, "speed_kmph": float, "carrier_hz": float,
    "snr_d": _floats, "snr_p": float, "snr_p_offset": _opt(float), "threshold": float,
    "csi": str, "detector": str, "max_iter": int, "damping": float,
    "truncation": float, "trials": int, "seed": int, "workers": int,
}


def parse_config(text: str, base: SimConfig | None = None) -> SimConfig:
    """Parse flat ``key = value`` lines (``#`` starts a comment)."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value, got {raw!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in _CONVERTERS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        try:
            values[key] = _CONVERTERS[key](val)
        except ValueError as e:
            raise ConfigError(f"line {lineno}: bad value for {key}: {e}") from None
    return dataclasses.replace(base or SimConfig(), **values)


def load_config(path: "str | Path") -> SimConfig:
    return parse_config(Path(path).read_text())


@dataclass(frozen=True, eq=False)
class _Plan:
    cfg: SimConfig
    layout: FrameLayout
    profile: object  # PowerDelayProfile, or None for the identity channel
    doppler: DopplerMode
    alphabet: qam_alphabet.Alphabet


def prepare(cfg: SimConfig) -> _Plan:
    """Validate ``cfg`` and resolve everything that is shared across trials."""
    try:
        dims = cfg.dims
        scheme = Scheme.parse(cfg.scheme)
        doppler = DopplerMode.parse(cfg.doppler)
    except ValueError as e:
        raise ConfigError(str(e)) from None
    if scheme not in (Scheme.SISO_INTEGER, Scheme.SISO_FRAC_FULL, Scheme.SISO_FRAC_REDUCED):
        raise ConfigError(f"simulation supports SISO schemes only, got {scheme.value}")
    if scheme.fractional != (doppler is DopplerMode.FRACTIONAL):
        raise ConfigError(f"scheme {scheme.value} does not match {doppler.value} Doppler")
    if cfg.pulse not in ("ideal", "rect"):
        raise ConfigError(f"pulse must be 'ideal' or 'rect', got {cfg.pulse!r}")
    if cfg.pulse == "rect" and doppler is DopplerMode.FRACTIONAL:
        raise ConfigError("rectangular pulses are modelled for integer Doppler only")
    if cfg.csi not in ("estimated", "ideal"):
        raise ConfigError(f"csi must be 'estimated' or 'ideal', got {cfg.csi!r}")
    if cfg.detector not in ("mp", "exhaustive"):
        raise ConfigError(f"detector must be 'mp' or 'exhaustive', got {cfg.detector!r}")
    if cfg.trials < 1 or not cfg.snr_d:
        raise ConfigError("need at least one trial and one SNR point")
    if cfg.threshold < 0:
        raise ConfigError("threshold multiplier must be non-negative")
    if not 0 < cfg.damping <= 1:
        raise ConfigError("damping must lie in (0, 1]")
    try:
        alph = qam_alphabet.qam(cfg.qam)
    except ValueError as e:
        raise ConfigError(str(e)) from None

    if cfg.profile.strip().lower() == "identity":
        profile, l_need, k_need = None, 0, 0
    else:
        try:
            profile = resolve_profile(cfg.profile, dims)
        except (OSError, ValueError) as e:
            raise ConfigError(f"cannot load profile {cfg.profile!r}: {e}") from None
        l_need = delay_tap_bound(profile, dims)
        k_need = doppler_tap_bound(cfg.speed_kmph, cfg.carrier_hz, dims)
    l_tau = l_need if cfg.l_tau is None else cfg.l_tau
    k_nu = k_need if cfg.k_nu is None else cfg.k_nu
    if l_tau < l_need:
        raise ConfigError(f"l_tau={l_tau} is below the profile's largest delay tap {l_need}")
    if k_nu < k_need:
        raise ConfigError(f"k_nu={k_nu} is below the largest Doppler tap {k_need}")
    try:
        layout = build_layout(scheme, dims, cfg.pilot, l_tau, k_nu, cfg.k_hat)
    except ValueError as e:
        raise ConfigError(str(e)) from None
    if cfg.detector == "exhaustive" and layout.data_count() > 12:
        raise ConfigError(f"exhaustive detection needs <= 12 data cells, layout has "
                          f"{layout.data_count()}")
    return _Plan(cfg, layout, profile, doppler, alph)


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    """Independent stream per trial; the same trial reuses it at every SNR point."""
    return np.random.default_rng([seed, trial])


def run_trial(plan: _Plan, snr_d: float, trial: int) -> np.ndarray:
    """One frame; returns ``[bit_errors, bits, misses, true_paths, false_alarms, candidates, iters]``."""
    cfg, layout, alph = plan.cfg, plan.layout, plan.alphabet
    dims = layout.dims
    rng = trial_rng(cfg.seed, trial)
    noise = NoiseModel.from_snr(snr_d, cfg.pilot_snr(snr_d))

    bits = rng.integers(0, 2, layout.data_count() * alph.bit_width, dtype=np.uint8)
    x = place_symbols(layout, noise.pilot_amp, qam_alphabet.modulate_bits(bits, alph))[0]
    if plan.profile is None:
        taps = TapSet.identity()
    else:
        paths = sample_channel(plan.profile, cfg.speed_kmph, cfg.carrier_hz, rng)
        taps = tap_quantize(paths, dims, plan.doppler)
    y = add_awgn(apply_channel(x, taps, dims, cfg.pulse), noise, rng)

    est_blocks, det = split_rx(layout, y)
    diag = (0, 0, 0, 0)
    if cfg.csi == "estimated":
        ch = estimate(est_blocks[0], layout, noise.pilot_amp, cfg.threshold * noise.sigma)
        d = diagnose(ch, taps, layout)
        diag = (d.misses, d.true_paths, d.false_alarms, d.candidates)
    else:
        ch = taps
    system = build_system(ch, layout, det, noise.pilot_amp, noise.sigma2, alph,
                          pulse=cfg.pulse, truncation=cfg.truncation)
    if cfg.detector == "mp":
        xs, iters = mp_detect(system, cfg.max_iter, cfg.damping)
    else:
        xs, iters = map_detect_exhaustive(system), 0
    errors = int(np.count_nonzero(qam_alphabet.demodulate(xs, alph) != bits))
    return np.array([errors, bits.size, *diag, iters], dtype=np.int64)


def _trial_job(args):
    plan, snr_d, trial = args
    return run_trial(plan, snr_d, trial)


def run_experiment(cfg: SimConfig, seed: int | None = None,
                   workers: int | None = None) -> list[MetricsRow]:
    """Run ``cfg.trials`` frames at every SNR point; one row per point, in input order."""
    if seed is not None:
        cfg = cfg.replace(seed=seed)
    plan = prepare(cfg)
    workers = cfg.workers if workers is None else workers
    rows = []
    pool = ProcessPoolExecutor(workers) if workers > 1 else None
    try:
        for snr_d in cfg.snr_d:
            t0 = time.perf_counter()
            jobs = [(plan, snr_d, t) for t in range(cfg.trials)]
            results = pool.map(_trial_job, jobs, chunksize=max(1, cfg.trials // (4 * workers))) \
                if pool else map(_trial_job, jobs)
            tot = np.sum(list(results), axis=0)
            errors, bits, misses, true_paths, fas, cands, iters = (int(v) for v in tot)
            rows.append(MetricsRow(
                snr_d_db=float(snr_d),
                snr_p_db=float(cfg.pilot_snr(snr_d)),
                threshold=float(cfg.threshold),
                scheme=plan.layout.scheme.value,
                csi=cfg.csi,
                frames=cfg.trials,
                bits=bits,
                bit_errors=errors,
                ber=errors / bits,
                miss_rate=misses / true_paths if true_paths else 0.0,
                false_alarm_rate=fas / cands if cands else 0.0,
                mean_iterations=iters / cfg.trials,
                wall_time=time.perf_counter() - t0,
            ))
    finally:
        if pool:
            pool.shutdown()
    return rows


def ber(tx_bits, rx_bits) -> float:
    tx = np.asarray(tx_bits).ravel()
    rx = np.asarray(rx_bits).ravel()
    if tx.shape != rx.shape:
        raise ValueError(f"bit sequences differ in length: {tx.size} vs {rx.size}")
    if tx.size == 0:
        raise ValueError("empty bit sequences")
    return float(np.count_nonzero(tx != rx)) / tx.size


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def write_csv(rows: list[MetricsRow], path: "str | Path") -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_FIELDS)
        for r in rows:
            w.writerow([_fmt(getattr(r, f)) for f in CSV_FIELDS])


def read_csv(path: "str | Path") -> list[MetricsRow]:
    types = {f.name: f.type for f in dataclasses.fields(MetricsRow)}
    conv = {"float": float, "int": int, "str": str}
    with open(path, newline="") as fh:
        return [MetricsRow(**{k: conv[types[k]](v) for k, v in rec.items()})
                for rec in csv.DictReader(fh)]


def snr_at_ber(rows: list[MetricsRow], target: float) -> float:
    """SNR where the BER curve crosses ``target`` (linear in log10 BER)."""
    snr = np.array([r.snr_d_db for r in rows])
    b = np.array([r.ber for r in rows])
    for i in range(len(snr) - 1):
        b0, b1 = b[i], b[i + 1]
        if b0 >= target >= b1 and b0 > 0:
            if b1 <= 0:
                return float(snr[i + 1])
            if b0 == b1:
                return float(snr[i])
            t = (np.log10(b0) - np.log10(target)) / (np.log10(b0) - np.log10(b1))
            return float(snr[i] + t * (snr[i + 1] - snr[i]))
    raise ValueError(f"BER curve does not cross {target:g} in the simulated range")
