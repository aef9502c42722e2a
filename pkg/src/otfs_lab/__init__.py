"""Delay-Doppler (OTFS) link simulation with embedded-pilot channel estimation."""

from .alphabet import Alphabet, demodulate, modulate_bits, qam
from .channel import DopplerMode, PathSpec, TapSet, sample_channel, tap_quantize
from .dd_io import (
    NoiseModel,
    add_awgn,
    apply_ideal_fractional,
    apply_ideal_integer,
    apply_rect_integer,
    fractional_gain,
    rect_phase,
)
from .detector import SparseSystem, build_system, map_detect_exhaustive, mp_detect
from .estimator import EstimatedChannel, estimate_fractional, estimate_integer
from .harness import MetricsRow, SimConfig, ber, run_experiment, write_csv
from .layout import (
    FrameLayout,
    GridDims,
    LayoutError,
    Scheme,
    build_layout,
    overhead_count,
    place_symbols,
    split_rx,
)
from .tf_oracle import full_chain, isfft, sfft

__version__ = "0.1.0"
