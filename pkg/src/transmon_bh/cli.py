"""Command-line entry point: simulate, rates, spectrum."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import effmodels
from .errors import TransmonError
from .scenarios import PRESETS, load_config, preset, run_scenario, spectrum_scan
from .units import mhz, to_mhz


def _simulate(args) -> int:
    if bool(args.config) == bool(args.preset):
        raise SystemExit("simulate: give exactly one of --config or --preset")
    cfg = load_config(args.config) if args.config else preset(args.preset)
    if args.solver:
        cfg.solver = args.solver
    result = run_scenario(cfg, args.out)
    meta = result.metadata
    print(f"scenario {cfg.name}: basis dim {meta['basis_dimension']}, wall {meta['wall_time_s']:.2f} s")
    if result.report is not None:
        worst = max(result.report.max_abs_deviation.items(), key=lambda kv: kv[1])
        print(f"max |full - effective| = {worst[1]:.4f} on {worst[0]}")
    for path in result.files:
        print(f"wrote {path}")
    return 0


def _rates(args) -> int:
    J, U = mhz(args.J_mhz), mhz(args.U_mhz)
    print(effmodels.stack_rates(args.N, J, U).to_text(), end="")
    if args.M == 1 or args.boson:
        print(effmodels.stack_boson_rates(args.N, J, U).to_text(), end="")
    elif args.M:
        print(effmodels.two_stack_rates(args.N, args.M, J, U).to_text(), end="")
    return 0


def _spectrum(args) -> int:
    spec = spectrum_scan(args.L, args.N, mhz(args.J_mhz), mhz(args.U_mhz), mhz(args.omega_mhz))
    if args.out:
        spec.to_csv(args.out)
        print(f"wrote {args.out}")
    else:
        bands, counts = np.unique(spec.bands, return_counts=True)
        print(json.dumps({"eigenvalues": len(spec.energies),
                          "bands": {int(a): int(c) for a, c in zip(bands, counts)},
                          "energy_range_MHz": [to_mhz(spec.energies[0]), to_mhz(spec.energies[-1])]}))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="transmon-bh", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a scenario from a YAML file or a preset")
    sim.add_argument("--config", type=Path)
    sim.add_argument("--preset", choices=PRESETS)
    sim.add_argument("--out", type=Path, default=None)
    sim.add_argument("--solver", choices=("auto", "dense", "krylov"), default=None)
    sim.set_defaults(func=_simulate)

    rates = sub.add_parser("rates", help="closed-form effective rates in MHz")
    rates.add_argument("--N", type=int, required=True)
    rates.add_argument("--M", type=int, default=0, help="second stack size")
    rates.add_argument("--boson", action="store_true", help="stack plus a lone boson")
    rates.add_argument("--J-mhz", dest="J_mhz", type=float, default=10.0)
    rates.add_argument("--U-mhz", dest="U_mhz", type=float, default=250.0)
    rates.set_defaults(func=_rates)

    spec = sub.add_parser("spectrum", help="dense chain spectrum with anharmonicity bands")
    spec.add_argument("--L", type=int, required=True)
    spec.add_argument("--N", type=int, required=True)
    spec.add_argument("--J-mhz", dest="J_mhz", type=float, default=10.0)
    spec.add_argument("--U-mhz", dest="U_mhz", type=float, default=250.0)
    spec.add_argument("--omega-mhz", dest="omega_mhz", type=float, default=0.0)
    spec.add_argument("--out", type=Path, default=None)
    spec.set_defaults(func=_spectrum)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except TransmonError as exc:
        print(f"error [{exc.category}]: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
