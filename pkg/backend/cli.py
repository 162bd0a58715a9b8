"""
Command-line entry point.

    python -m backend smoke --out runs/smoke
    python -m backend train-gan --config config/presets/mnist.yaml --seed 1 --out runs/mnist
    python -m backend reconstruct --config config/presets/mnist.yaml --out runs/mnist --jobs 4

Exit codes: 0 ok, 1 usage, 2 data/parse, 3 training divergence or
solver/estimation failure, 4 missing dependency (stage inputs, packages).
"""

import argparse
import json
import sys
import traceback
from pathlib import Path
from typing import List, Optional

from .errors import ArgumentError, GpcsError
from .data.mnist import fetch_mnist
from .logging_utils import log
from .services.experiment import load_experiment_config, rerun_from_manifest, run_experiment

PROJECT_ROOT = Path(__file__).resolve().parent.parent
SMOKE_PRESET = PROJECT_ROOT / "config" / "presets" / "smoke.yaml"

STAGE_COMMANDS = {
    'train-gan': ['train-gan'],
    'train-began': ['train-began'],
    'train-pinv': ['train-pinv'],
    'reconstruct': ['reconstruct'],
    'evaluate': ['evaluate'],
    'certify': ['certify'],
    'smoke': ['smoke', 'reconstruct', 'evaluate', 'certify'],
    'run': None,
}


class _Parser(argparse.ArgumentParser):
    """Usage errors raise instead of exiting with argparse's own status."""

    def error(self, message):
        raise ArgumentError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gpcs", description="Compressed sensing with generative priors")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    for command in STAGE_COMMANDS:
        p = sub.add_parser(command, help=f"Run the {command} stage(s)" if command != 'run'
                           else "Run the default pipeline of the config")
        p.add_argument('--config', help='Experiment config (.yaml, .json or key=value text)')
        p.add_argument('--seed', type=int, help='Master seed (overrides the config)')
        p.add_argument('--out', help='Output directory (overrides the config)')
        p.add_argument('--jobs', type=int, help='Parallel workers for reconstruction')
        p.add_argument('--set', action='append', default=[], metavar='KEY=VALUE',
                       help='Dotted override, e.g. solver.inner_iters=50 (repeatable)')
        if command == 'evaluate':
            p.add_argument('--manifest', help='Re-evaluate the run described by this manifest')

    fetch = sub.add_parser('fetch-mnist', help='Download the MNIST IDX files')
    fetch.add_argument('--out', help='Target directory (default $GPCS_DATA_DIR or ./data/mnist)')
    return parser


def _write_failure(output_dir: Optional[str], error: BaseException) -> None:
    if not output_dir:
        return
    try:
        Path(output_dir).mkdir(parents=True, exist_ok=True)
        failure = {
            "status": "error",
            "message": str(error),
            "error_type": type(error).__name__,
            "traceback": traceback.format_exc(),
        }
        with open(Path(output_dir) / "failure_summary.json", 'w') as f:
            json.dump(failure, f, indent=4)
        log("Failure written to failure_summary.json")
    except OSError as e:
        log(f"Could not write failure_summary.json: {e}")


def _run(args: argparse.Namespace) -> None:
    if args.command == 'fetch-mnist':
        paths = fetch_mnist(args.out)
        log(f"MNIST files ready: {', '.join(str(p) for p in paths.values())}")
        return

    if args.command == 'evaluate' and args.manifest:
        manifest = rerun_from_manifest(args.manifest)
        log(f"Re-evaluated run with seed {manifest.seeds.get('master')}")
        return

    config_path = args.config
    if config_path is None and args.command == 'smoke' and SMOKE_PRESET.exists():
        config_path = SMOKE_PRESET
    cfg = load_experiment_config(config_path, args.set, seed=args.seed, output_dir=args.out, jobs=args.jobs,
                                 stages=STAGE_COMMANDS[args.command])
    args.resolved_out = cfg.output_dir
    log(f"Running {args.command} (seed {cfg.seed}) into {cfg.output_dir}")
    manifest = run_experiment(cfg)
    log(f"Done: {len(manifest.artifacts)} artifacts, {manifest.total_wall_ms / 1000.0:.2f} s")


def _output_dir(args: Optional[argparse.Namespace]) -> Optional[str]:
    if args is None:
        return None
    return getattr(args, 'resolved_out', None) or getattr(args, 'out', None)


def main(argv: Optional[List[str]] = None) -> int:
    args = None
    try:
        args = build_parser().parse_args(argv)
        _run(args)
        return 0
    except GpcsError as e:
        log(f"{type(e).__name__}: {e}")
        _write_failure(_output_dir(args), e)
        return e.exit_code
    except Exception as e:
        log(f"Exception: {e}")
        traceback.print_exc()
        _write_failure(_output_dir(args), e)
        return 1


if __name__ == "__main__":
    sys.exit(main())
