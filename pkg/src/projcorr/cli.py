"""Command-line entry point.

Each subcommand runs one experiment driver.  ``--config`` points at a JSON
configuration; every other flag overrides its JSON counterpart.  Exit code 0
on success; on failure a single machine-parsable line

    error: <ExceptionType>: <message>

is printed to stderr and the exit code is 1.
"""

from __future__ import annotations

import argparse
import sys
from typing import List, Optional

from .config import EXPERIMENTS, ExperimentConfig
from .errors import ProjcorrError
from .experiments import run_experiment


def _parse_float_list(text: str) -> List[float]:
    return [float(tok) for tok in text.replace(",", " ").split()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="projcorr",
        description="Measurement-consistency correction experiments for linear inverse problems",
    )
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name in EXPERIMENTS:
        p = sub.add_parser(name.replace("_", "-"), help=f"run the {name} experiment")
        p.set_defaults(experiment=name)
        p.add_argument("--config", help="JSON configuration file")
        p.add_argument("--op", help="operator kind override")
        p.add_argument("--sigma", help="noise level override (single value or comma list)")
        p.add_argument("--lambda-grid", dest="lambda_grid",
                       help="comma-separated regularization weights")
        p.add_argument("--seed", type=int, help="base seed override")
        p.add_argument("--out", help="output directory override")
        p.add_argument("--recon", help="reconstructor kind override")
        p.add_argument("--mode", help="correction mode override (exact|regularized)")
        p.add_argument("--manifest", help="simulation manifest override")
        p.add_argument("--recon-dir", dest="recon_dir",
                       help="directory of stored reconstructions")
    return parser


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    if args.config:
        config = ExperimentConfig.from_json(args.config)
    else:
        config = ExperimentConfig()
    config.experiment = args.experiment
    if args.op:
        config.operator.kind = args.op
    if args.sigma is not None:
        values = _parse_float_list(args.sigma)
        if len(values) == 1:
            config.noise.sigma = values[0]
        config.noise.sigmas = values
    if args.lambda_grid is not None:
        config.correction.lambda_grid = _parse_float_list(args.lambda_grid)
    if args.seed is not None:
        config.base_seed = args.seed
    if args.out:
        config.output_dir = args.out
    if args.recon:
        config.reconstructor.kind = args.recon
    if args.mode:
        config.correction.mode = args.mode
    if args.manifest:
        config.dataset.manifest = args.manifest
    if args.recon_dir:
        config.dataset.reconstruction_dir = args.recon_dir
    return config


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = config_from_args(args)
        summary = run_experiment(config)
    except (ProjcorrError, OSError, ValueError, KeyError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    artifact = summary.get("csv") or summary.get("manifest") or summary.get("output_dir")
    if artifact:
        print(f"wrote {artifact}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
