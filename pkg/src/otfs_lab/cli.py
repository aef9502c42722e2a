"""Command-line entry point: ``otfs-lab run`` and ``otfs-lab layout``."""

from __future__ import annotations

import argparse
import sys

from .harness import ConfigError, load_config, run_experiment, write_csv
from .layout import GridDims, LayoutError, Scheme, build_layout, summary_table, table_overhead


def _run(args) -> int:
    cfg = load_config(args.config)
    if args.trials is not None:
        cfg = cfg.replace(trials=args.trials)
    rows = run_experiment(cfg, seed=args.seed, workers=args.workers)
    write_csv(rows, args.out)
    for r in rows:
        print(f"SNR_d {r.snr_d_db:5.1f} dB  SNR_p {r.snr_p_db:5.1f} dB  "
              f"BER {r.ber:.3e}  ({r.bit_errors}/{r.bits})  "
              f"miss {r.miss_rate:.3f}  FA {r.false_alarm_rate:.2e}")
    return 0


def _layout(args) -> int:
    dims = GridDims(args.N, args.M, args.delta_f)
    names = [s for s in Scheme] if args.scheme == "all" else [Scheme.parse(args.scheme)]
    layouts = []
    for s in names:
        k_hat = 0 if s in (Scheme.SISO_INTEGER, Scheme.SISO_FRAC_FULL) else args.k_hat
        n = 1 if s in (Scheme.SISO_INTEGER, Scheme.SISO_FRAC_FULL, Scheme.SISO_FRAC_REDUCED) \
            else args.streams
        layouts.append(build_layout(s, dims, None, args.l_tau, args.k_nu, k_hat, n))
    print(summary_table(layouts))
    print()
    print("closed-form pilot+guard counts:")
    for lay in layouts:
        print(f"  {lay.scheme.value:<18} "
              f"{table_overhead(lay.scheme, dims.N, lay.l_tau, lay.k_nu, lay.k_hat, lay.n_streams)}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="otfs-lab", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a Monte-Carlo BER experiment")
    r.add_argument("--config", required=True, help="key=value experiment file")
    r.add_argument("--seed", type=int, default=None, help="overrides the config seed")
    r.add_argument("--out", required=True, help="CSV output path")
    r.add_argument("--trials", type=int, default=None, help="overrides the config trial count")
    r.add_argument("--workers", type=int, default=None, help="worker processes")
    r.set_defaults(func=_run)

    lay = sub.add_parser("layout", help="print pilot/guard overhead tables")
    lay.add_argument("--scheme", default="all", help="scheme name or 'all'")
    lay.add_argument("--N", type=int, default=128)
    lay.add_argument("--M", type=int, default=512)
    lay.add_argument("--delta-f", type=float, default=15e3)
    lay.add_argument("--l-tau", type=int, default=20)
    lay.add_argument("--k-nu", type=int, default=4)
    lay.add_argument("--k-hat", type=int, default=0)
    lay.add_argument("--streams", type=int, default=3, help="Tx antennas or users")
    lay.set_defaults(func=_layout)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, LayoutError, ValueError, OSError) as e:
        print(f"otfs-lab: error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
