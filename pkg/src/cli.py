"""
Command-line entry point.

    python -m src.cli run-all --config run.cfg
    python -m src.cli metrics --config run.cfg --output-dir out/
    python -m src.cli synth --out data/synth --seed 3 --rows 12 --cols 12

Stage subcommands run the pipeline up to and including that stage. Exit
codes: 0 success, 1 configuration error, 2 data error, 3 internal error.
"""

import argparse
import sys
from typing import Dict, List, Optional

import structlog

from .core.config import load_run_config
from .core.errors import CultureGraphError
from .core.logging_config import configure_logging
from .report.pipeline import STAGES, run_pipeline
from .synth.generator import SynthConfig, generate_city, write_bundle

logger = structlog.get_logger(__name__)


def _add_run_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--config', help='key=value run configuration file')
    parser.add_argument('--input-dir', help='Directory holding the five input files')
    parser.add_argument('--venues', dest='venues_path')
    parser.add_argument('--transitions', dest='transitions_path')
    parser.add_argument('--wards', dest='wards_path')
    parser.add_argument('--expenditure', dest='expenditure_path')
    parser.add_argument('--imd', dest='imd_path')
    parser.add_argument('--output-dir', help='Directory receiving the artifacts')
    parser.add_argument('--centre-lat', type=float)
    parser.add_argument('--centre-lon', type=float)
    parser.add_argument('--seed', type=int)
    parser.add_argument('--fiscal-offset', type=int)
    parser.add_argument('--folds', type=int, help='k for stratified cross-validation')
    parser.add_argument('--classifiers', dest='classifier_kinds',
                        help='Comma-separated classifier kinds')
    parser.add_argument('--thresholds', dest='subset_thresholds',
                        help='Comma-separated |delta rank| thresholds')
    parser.add_argument('--anova-variables', help='Comma-separated panel variables')
    parser.add_argument('--deprivation-basis', choices=['median_rank', 'mean_score'])
    parser.add_argument('--alpha', type=float)
    parser.add_argument('--extended', dest='extended_reports', action='store_true', default=None,
                        help='Also write the supplementary report tables')


def _overrides(args: argparse.Namespace) -> Dict[str, object]:
    keys = ['input_dir', 'venues_path', 'transitions_path', 'wards_path', 'expenditure_path',
            'imd_path', 'output_dir', 'centre_lat', 'centre_lon', 'seed', 'fiscal_offset', 'folds',
            'classifier_kinds', 'subset_thresholds', 'anova_variables', 'deprivation_basis', 'alpha',
            'extended_reports']
    return {key: getattr(args, key) for key in keys}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='culturegraph',
                                     description='Culture-led regeneration analytics')
    parser.add_argument('--log-level', help='DEBUG, INFO, WARNING or ERROR')
    parser.add_argument('--log-json', action='store_true', default=None,
                        help='Log JSON lines instead of console output')
    sub = parser.add_subparsers(dest='command', required=True)

    for stage in STAGES:
        _add_run_options(sub.add_parser(stage, help=f'Run the pipeline through the {stage} stage'))
    _add_run_options(sub.add_parser('run-all', help='Run every stage'))

    synth = sub.add_parser('synth', help='Generate a synthetic city bundle')
    synth.add_argument('--out', required=True, help='Output directory for the bundle')
    synth.add_argument('--seed', type=int, default=0)
    synth.add_argument('--rows', type=int, default=SynthConfig.grid_rows)
    synth.add_argument('--cols', type=int, default=SynthConfig.grid_cols)
    synth.add_argument('--transitions', type=int, default=SynthConfig.transitions_per_year,
                       help='Transitions per year')
    synth.add_argument('--venues-mean', type=float, default=SynthConfig.venues_mean)
    synth.add_argument('--delta', type=float, default=SynthConfig.delta)
    synth.add_argument('--sigma', type=float, default=SynthConfig.sigma)
    synth.add_argument('--treatment-rule', choices=['investment', 'random'],
                       default=SynthConfig.treatment_rule)
    synth.add_argument('--no-boost-inflow', action='store_true')
    synth.add_argument('--no-boost-venue-creation', action='store_true')
    return parser


def _run_synth(args: argparse.Namespace) -> int:
    cfg = SynthConfig(
        grid_rows=args.rows,
        grid_cols=args.cols,
        venues_mean=args.venues_mean,
        transitions_per_year=args.transitions,
        delta=args.delta,
        sigma=args.sigma,
        treatment_rule=args.treatment_rule,
        boost_inflow=not args.no_boost_inflow,
        boost_venue_creation=not args.no_boost_venue_creation,
        seed=args.seed,
    )
    paths = write_bundle(generate_city(cfg), args.out)
    print(f"synthetic city written to {args.out} ({len(paths)} files)")
    return 0


def main(argv: Optional[List[str]] = None) -> int:
    """Parse arguments, run the command and return the exit code."""
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        configure_logging(args.log_level, args.log_json)
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1

    try:
        if args.command == 'synth':
            try:
                return _run_synth(args)
            except ValueError as e:
                print(f"invalid synthetic city: {e}", file=sys.stderr)
                return 1
        run_config = load_run_config(args.config, _overrides(args))
        until = None if args.command == 'run-all' else args.command
        exit_code, manifest = run_pipeline(run_config, until=until)
    except CultureGraphError as e:
        logger.error("command_failed", command=args.command, error=str(e), exit_code=e.exit_code)
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    except Exception as e:
        logger.exception("command_crashed", command=args.command)
        print(f"internal error: {e}", file=sys.stderr)
        return 3

    if exit_code:
        print(f"failed at stage {manifest['failed_stage']}: {manifest['error']}", file=sys.stderr)
    else:
        print(f"{len(manifest['artifacts'])} artifacts written to {run_config.output_dir}")
    return exit_code


if __name__ == '__main__':
    sys.exit(main())
