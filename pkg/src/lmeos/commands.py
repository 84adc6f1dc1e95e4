"""Shared plumbing for the management commands.

Every command exits with the same codes: 0 success, 1 usage error, 2 data
error, 3 internal error.
"""

import json
import logging
import sys

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError

from .config import FORMATS, MODES, RunConfig
from .errors import EXIT_INTERNAL, EXIT_USAGE, LmeosError

logger = logging.getLogger(__name__)

VERBOSITY_LEVELS = {0: logging.WARNING, 1: logging.INFO}


class LmeosCommand(BaseCommand):
    """Base class mapping toolkit errors onto the exit-code contract."""

    requires_system_checks = []

    def create_parser(self, prog_name, subcommand, **kwargs):
        parser = super().create_parser(prog_name, subcommand, **kwargs)
        from_command_line = parser.called_from_command_line

        def error(message):
            if from_command_line:
                parser.print_usage(sys.stderr)
                parser.exit(EXIT_USAGE, f"{parser.prog}: error: {message}\n")
            raise CommandError(f"Error: {message}", returncode=EXIT_USAGE)

        parser.error = error
        return parser

    def execute(self, *args, **options):
        self.configure_logging(options.get("verbosity", 1))
        try:
            return super().execute(*args, **options)
        except CommandError:
            raise
        except LmeosError as e:
            logger.debug("Command failed with %s", e.code, exc_info=True)
            label = f"[{e.code}] " if e.code else ""
            raise CommandError(f"{label}{e}", returncode=e.exit_code) from e
        except Exception as e:
            logger.exception("Unexpected failure in %s", type(self).__module__)
            raise CommandError(f"Internal error: {e}", returncode=EXIT_INTERNAL) from e

    def configure_logging(self, verbosity):
        level = VERBOSITY_LEVELS.get(verbosity, logging.DEBUG)
        for name in settings.LMEOS_APP_LOGGERS:
            logging.getLogger(name).setLevel(level)

    def write_json(self, payload):
        self.stdout.write(json.dumps(payload, indent=2, sort_keys=True))


class PolicyCommand(LmeosCommand):
    """A command that takes the shared run-config flags."""

    def add_policy_arguments(self, parser, single_policy=True):
        parser.add_argument("--config", help="KEY=value run config file")
        if single_policy:
            parser.add_argument("--mode", choices=MODES)
            parser.add_argument("--model", dest="model_path", help="tagger model file")
        parser.add_argument("--silence-ms", type=int, dest="silence_threshold_ms")
        parser.add_argument("--hard-timeout-ms", type=int, dest="hard_timeout_ms")
        parser.add_argument("--lm-threshold", type=float, dest="lm_threshold")
        parser.add_argument("--lookahead-wait-ms", type=int, dest="lookahead_wait_ms")
        parser.add_argument("--seed", type=int)
        parser.add_argument("--format", choices=FORMATS, dest="report_format")

    def load_run_config(self, options, **extra):
        values = {**options, **extra}
        config = RunConfig.load(values.pop("config", None), **values)
        config.check_paths()
        logger.debug("Run config: %s", config)
        return config
