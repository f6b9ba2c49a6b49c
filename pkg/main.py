import argparse
import logging
import sys

from src.cli.analysis_commands import cmd_analyze
from src.cli.calibration_commands import cmd_calibrate
from src.cli.run_commands import cmd_run
from src.cli.sweep_commands import cmd_sweep
from src.config.run_config import load_config
from src.utils.constants import ExitCode
from src.utils.exceptions import ConfigError, SigmaFlowError, handle_error
from src.utils.logging_config import setup_logging

logger = logging.getLogger(__name__)


def parse_args(argv=None):
    """Parse command line arguments."""
    parser = argparse.ArgumentParser(description='Simulate and analyze gradient flows of symmetric-matrix fields')
    parser.add_argument(
        '--log-dir',
        type=str,
        default=None,
        help='Directory for debug.log and error.log (default: SIGMAFLOW_LOG_DIR)'
    )
    subparsers = parser.add_subparsers(dest='command', required=True)

    run = subparsers.add_parser('run', help='Integrate the flow and write snapshots and series.csv')
    run.add_argument('--config', type=str, required=True, help='Run configuration (JSON or dotted keys)')
    run.add_argument('--out', type=str, default=None, help='Output directory (default: output.directory)')

    analyze = subparsers.add_parser('analyze', help='Monotonicity and regularity reports over stored snapshots')
    analyze.add_argument('--config', type=str, required=True, help='Run configuration used for the trajectory')
    analyze.add_argument('--out', type=str, default=None, help='Report directory (default: the trajectory directory)')
    analyze.add_argument('--trajectory', type=str, default=None,
                         help='Directory holding the snapshots (default: output.directory)')
    analyze.add_argument('--constants', type=str, default=None,
                         help='Calibrated constants file (default: SIGMAFLOW_CONSTANTS_FILE)')

    sweep = subparsers.add_parser('sweep', help='Bad-set and sup e sweeps over analysis.b_sweep')
    sweep.add_argument('--config', type=str, required=True, help='Run configuration')
    sweep.add_argument('--out', type=str, default=None, help='Output directory (default: output.directory)')
    sweep.add_argument('--constants', type=str, default=None,
                       help='Calibrated constants file (default: SIGMAFLOW_CONSTANTS_FILE)')

    calibrate = subparsers.add_parser('calibrate', help='Fit the unnamed constants and write the constants file')
    calibrate.add_argument('--config', type=str, default=None,
                           help='Calibrate on this configuration only (default: the built-in scenario matrix)')
    calibrate.add_argument('--out', type=str, default=None,
                           help='Constants file to write (default: SIGMAFLOW_CONSTANTS_FILE)')
    return parser.parse_args(argv)


def dispatch(args) -> int:
    if args.command == 'calibrate':
        config = load_config(args.config) if args.config else None
        return cmd_calibrate(config, args.out)

    config = load_config(args.config)
    logger.info(f"Loaded configuration from {args.config}")
    if args.command == 'run':
        return cmd_run(config, args.out)
    if args.command == 'analyze':
        return cmd_analyze(config, args.trajectory, args.out, args.constants)
    return cmd_sweep(config, args.out, args.constants)


def main(argv=None) -> int:
    args = parse_args(argv)
    setup_logging(args.log_dir)
    try:
        return dispatch(args)
    except ConfigError as e:
        logger.error(f"Configuration error: {handle_error(e)}")
        return ExitCode.CONFIG_ERROR
    except SigmaFlowError as e:
        logger.error(f"{args.command} failed: {handle_error(e)}", exc_info=True)
        return ExitCode.ERROR
    except Exception as e:
        logger.error(f"Unexpected error in {args.command}: {type(e).__name__}: {e}", exc_info=True)
        print(handle_error(e), file=sys.stderr)
        return ExitCode.ERROR


if __name__ == "__main__":
    sys.exit(main())
