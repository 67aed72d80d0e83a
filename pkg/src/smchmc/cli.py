"""Command line front end: ``smchmc <subcommand> [options]``.

Exit status is 0 when every enforced check of the subcommand passes, 1 when
one fails and 2 for configuration errors.
"""

from __future__ import annotations

import argparse
import sys
from typing import Optional, Sequence

from .experiments import SUBCOMMANDS, ConfigError, ExperimentConfig, run_experiment
from .samplers import RHO_KINDS

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2

_HELP = {
    "accuracy": "L2 order of the sMC integrator against the exact or reference flow",
    "contraction": "almost-sure flow contraction and coupled uHMC chain contraction",
    "bias": "stationary W2 bias of uHMC versus h",
    "mjp": "duration-randomised uHMC: event law, coupling rate, stationary bias",
    "adjusted": "Metropolis-adjusted HMC with randomised 2-stage proposals",
    "sample": "run uHMC chains and dump the positions",
    "tune": "hyperparameters from the complexity bounds",
}


def _floats(text: str) -> tuple:
    try:
        return tuple(float(p) for p in text.split(",") if p.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _n_range(text: str) -> tuple:
    lo, sep, hi = text.partition("..")
    try:
        if not sep:
            return int(lo), int(lo)
        return int(lo), int(hi)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected lo..hi, got {text!r}") from exc


def _seed(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="smchmc", description="Experiments for uHMC with stratified Monte Carlo integration."
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name, help=_HELP[name])
        p.add_argument("--model", default="iso:1", help="iso:k[,d] | aniso:k1,k2,.. | dw | rough:a")
        p.add_argument("--seed", type=_seed, default=0)
        p.add_argument("--trials", type=int, help="trials / chains / lanes of the main batch")
        grid = p.add_mutually_exclusive_group()
        grid.add_argument("--h-grid", type=_floats, help="comma-separated step sizes")
        grid.add_argument("--n-range", type=_n_range, help="exponents lo..hi of h = 2^-n")
        p.add_argument("--out", help="CSV output path")
        p.add_argument("--quick", action="store_true", help="divide trial counts by 10")
        p.add_argument("--relax", type=float, default=1.0, help="multiplier on tuned step sizes")
        p.add_argument("--T", type=float, help="duration (mjp: bias horizon)")
        p.add_argument("--h", type=float, help="step size")
        p.add_argument("--x0", type=_floats)
        p.add_argument("--y0", type=_floats)
        p.add_argument("--v0", type=_floats)
        p.add_argument("--steps", type=int, help="transitions per chain")
        p.add_argument("--chain-trials", type=int, help="coupled chains (contraction) or seeds (mjp)")
        p.add_argument("--lam", type=float, help="refresh intensity")
        p.add_argument("--t-end", type=float, help="coupling horizon for mjp")
        p.add_argument("--events", type=int, help="jump events for the mjp event statistics")
        p.add_argument("--eps", type=float, default=0.1)
        p.add_argument("--w2-init", type=float)
        p.add_argument("--K", type=float)
        p.add_argument("--L", type=float)
        p.add_argument("--d", type=int)
        p.add_argument("--n-int", type=int, default=4, help="integration steps per adjusted proposal")
        p.add_argument("--rho", choices=RHO_KINDS, default=RHO_KINDS[0])
        p.add_argument("--floor", type=float, default=1e-12, help="distance floor for rate fits")
        p.add_argument("--no-adjusted", action="store_true", help="bias: skip the adjusted column")
    return parser


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    return ExperimentConfig(
        subcommand=args.subcommand, model=args.model, seed=args.seed, trials=args.trials,
        h_grid=args.h_grid, n_range=args.n_range, out=args.out, quick=args.quick,
        relax=args.relax, T=args.T, h=args.h, x0=args.x0, y0=args.y0, v0=args.v0,
        steps=args.steps, chain_trials=args.chain_trials, lam=args.lam, t_end=args.t_end,
        events=args.events, eps=args.eps, w2_init=args.w2_init, K=args.K, L=args.L, d=args.d,
        n_int=args.n_int, rho=args.rho, floor=args.floor, with_adjusted=not args.no_adjusted,
    )


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        table = run_experiment(config_from_args(args))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(table.report())
    if args.out:
        print(f"wrote {args.out}")
    return EXIT_PASS if table.passed else EXIT_FAIL
