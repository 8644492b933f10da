"""
Command-line entry point: radar-alloc <verb> [options]

Verbs: allocate, allocate-prob, plan-fleet, calibrate, report.
Exit codes: 0 success, 1 allocation or scenario error, 2 anything else.
"""

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import List, Optional

from pythonjsonlogger import jsonlogger

from app.config import Config
from app.exceptions import RadarAllocationError, ScenarioError
from app.models.scenario import FLEET, MONO_DETERMINISTIC, MONO_PROBABILISTIC, parse_scenario
from app.services.fleet_planner import RULE3_VARIANTS
from app.services.orchestrator import ScenarioOrchestrator, calibrate, scenario_scale
from app.services.report_publisher import FORMATS, ReportPublisher

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
HANDLER_NAME = 'radar-alloc'

VERB_MODES = {
    'allocate': MONO_DETERMINISTIC,
    'allocate-prob': MONO_PROBABILISTIC,
    'plan-fleet': FLEET,
}

logger = logging.getLogger(__name__)


def configure_logging(config: Config) -> None:
    """Attach stderr (and optional file) handlers to the root logger"""
    if config.log_format == 'json':
        formatter = jsonlogger.JsonFormatter('%(asctime)s %(name)s %(levelname)s %(message)s')
    else:
        formatter = logging.Formatter(LOG_FORMAT)

    handlers: List[logging.Handler] = [logging.StreamHandler(sys.stderr)]
    if config.log_file:
        handlers.append(logging.FileHandler(config.log_file))

    root = logging.getLogger()
    for handler in [h for h in root.handlers if h.get_name() == HANDLER_NAME]:
        root.removeHandler(handler)
        handler.close()
    for handler in handlers:
        handler.set_name(HANDLER_NAME)
        handler.setFormatter(formatter)
        root.addHandler(handler)
    root.setLevel(config.log_level)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='radar-alloc', description='ESA radar observation-time allocation')
    parser.add_argument('--log-level', default=None, help='overrides RADAR_ALLOC_LOG_LEVEL')
    parser.add_argument('--log-format', choices=['text', 'json'], default=None,
                        help='overrides RADAR_ALLOC_LOG_FORMAT')
    verbs = parser.add_subparsers(dest='verb', required=True)

    for verb, mode in VERB_MODES.items():
        sub = verbs.add_parser(verb, help=f"solve a {mode} scenario")
        _add_run_options(sub, formats=[FORMATS[0]])
        if verb == 'plan-fleet':
            sub.add_argument('--rule3', choices=RULE3_VARIANTS, default=None,
                             help="re-planning rule 3 variant (default: the scenario's planner.rule3)")

    report = verbs.add_parser('report', help='run any scenario and write every report format')
    _add_run_options(report, formats=list(FORMATS))
    report.add_argument('--rule3', choices=RULE3_VARIANTS, default=None)

    cal = verbs.add_parser('calibrate', help='back-solve the scale K of tau = K * d^4')
    cal.add_argument('--scenario', type=Path, default=None, help='scenario with an anchor calibration')
    cal.add_argument('--duration-ms', type=float, default=None)
    cal.add_argument('--probability', type=float, default=None)
    cal.add_argument('--distance-km', type=float, default=None)
    return parser


def _add_run_options(sub: argparse.ArgumentParser, formats: List[str]) -> None:
    sub.add_argument('--scenario', type=Path, required=True, help='JSON scenario file')
    sub.add_argument('--out', type=Path, default=None, help='output directory (overrides RADAR_ALLOC_OUTPUT_DIR)')
    sub.add_argument('--format', dest='formats', action='append', choices=FORMATS, default=None,
                     help=f"report format, may be repeated (default: {' '.join(formats)})")
    sub.set_defaults(default_formats=formats)


def run_scenario_verb(args: argparse.Namespace, config: Config) -> int:
    scenario = parse_scenario(args.scenario)
    expected = VERB_MODES.get(args.verb)
    if expected is not None and scenario.mode != expected:
        raise ScenarioError(f"'{args.verb}' needs a {expected} scenario, {args.scenario} is {scenario.mode}")

    orchestrator = ScenarioOrchestrator(config, publisher=ReportPublisher(config.output_dir))
    formats = args.formats or args.default_formats
    written = orchestrator.run_and_publish(scenario, formats, Path(config.output_dir), rule3=getattr(args, 'rule3', None))
    for path in written:
        print(path)
    return 0


def run_calibrate(args: argparse.Namespace) -> int:
    if args.scenario is not None:
        scenario = parse_scenario(args.scenario)
        scale = scenario_scale(scenario)
        if scale is None:
            raise ScenarioError(f"{args.scenario}: calibration is missing")
    else:
        anchor = [args.duration_ms, args.probability, args.distance_km]
        if any(value is None for value in anchor):
            raise ScenarioError("calibrate needs --scenario or all of --duration-ms, --probability, --distance-km")
        scale = calibrate(*anchor)
    print(f"{scale:.9e}")
    return 0


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = Config.from_env()
        overrides = {'log_level': args.log_level, 'log_format': args.log_format,
                     'output_dir': str(args.out) if getattr(args, 'out', None) else None}
        config = replace(config, **{key: value for key, value in overrides.items() if value})
        configure_logging(config)

        if args.verb == 'calibrate':
            return run_calibrate(args)
        return run_scenario_verb(args, config)
    except RadarAllocationError as e:
        logger.error(f"{args.verb} failed: {e}")
        return 1
    except Exception as e:
        logger.exception(f"Unexpected error in {args.verb}: {e}")
        return 2


if __name__ == '__main__':
    sys.exit(main())
