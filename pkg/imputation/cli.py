"""
Shared plumbing for the bbgc management commands.

Option precedence is flags > `--config` key=value file > settings.BBGC.
Exit codes: 0 success, 1 runtime or numerical failure, 2 usage or
configuration error.
"""
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Dict

from decouple import Csv, RepositoryEnv
from django.conf import settings
from django.core.management.base import BaseCommand, CommandError
from rest_framework.renderers import JSONRenderer

from .data_model import parse_schema_flag, read_csv, read_schema
from .exceptions import BBGCError
from .missingness import default_anchors

logger = logging.getLogger(__name__)

USAGE_ERROR = 2
RUNTIME_ERROR = 1

int_list = Csv(cast=int)
float_list = Csv(cast=float)
str_list = Csv(cast=lambda v: v.strip().lower())


def from_settings(name):
    return lambda: settings.BBGC[name]


@dataclass(frozen=True)
class Option:
    """One tunable: its key in --config files, its default and its cast."""

    key: str
    default: Any = None
    cast: Callable = str

    def fallback(self):
        return self.default() if callable(self.default) else self.default


COMMON_OPTIONS = {
    'seed': Option('SEED', from_settings('SEED'), int),
    'threads': Option('THREADS', from_settings('THREADS'), int),
}

INPUT_OPTIONS = {
    'missing_token': Option('MISSING_TOKEN', from_settings('MISSING_TOKEN')),
}

CHAIN_OPTIONS = {
    'm': Option('M', from_settings('M'), int),
    'iters': Option('ITERS', from_settings('ITERS'), int),
    'burnin': Option('BURN_IN', from_settings('BURN_IN'), int),
    'thin': Option('THIN', from_settings('THIN'), int),
    'marginal': Option('MARGINAL', from_settings('MARGINAL')),
}


def add_input_arguments(parser, required=True):
    parser.add_argument('--input', required=required, help='CSV file with a header row')
    group = parser.add_mutually_exclusive_group()
    group.add_argument('--schema', help='Schema file: one name,kind[,levels] line per column')
    group.add_argument('--kinds', help='Inline schema, e.g. c,c,o3,ordinal:2')
    parser.add_argument('--missing-token', dest='missing_token', help='Token marking a missing cell')


def add_chain_arguments(parser):
    parser.add_argument('--m', type=int, help='Number of marginal draws (chains)')
    parser.add_argument('--iters', type=int, help='Gibbs sweeps per chain')
    parser.add_argument('--burnin', type=int, help='Discarded sweeps per chain')
    parser.add_argument('--thin', type=int, help='Keep every thin-th sweep after burn-in')
    parser.add_argument('--marginal', help='bb (Bayesian bootstrap) or ecdf')


def chain_data(effective, seed=None):
    return {
        'm_marginal_draws': effective['m'],
        'iters_per_draw': effective['iters'],
        'burn_in': effective['burnin'],
        'thin': effective['thin'],
        'seed': effective['seed'] if seed is None else seed,
        'marginal': effective['marginal'],
    }


def default_anchor_columns(p):
    """First column of each of three variable blocks; column 0 for narrow data."""
    return default_anchors(p, 3) if p >= 3 else (0,)


def render_json(payload) -> bytes:
    return JSONRenderer().render(payload, renderer_context={'indent': 2})


def write_report(path, payload):
    Path(path).write_bytes(render_json(payload) + b'\n')
    logger.info(f"Reporte escrito en {path}")


class BaseBBGCCommand(BaseCommand):
    """Adds --config/--seed/--threads, option resolution and error mapping.

    Subclasses declare `options_spec` and implement `add_command_arguments`
    and `run(effective, options)`.
    """

    options_spec: Dict[str, Option] = {}

    def create_parser(self, prog_name, subcommand, **kwargs):
        self._parser = super().create_parser(prog_name, subcommand, **kwargs)
        return self._parser

    def add_arguments(self, parser):
        parser.add_argument('--config', help='key=value file (same grammar as .env)')
        parser.add_argument('--seed', type=int, help='Base random seed')
        parser.add_argument('--threads', type=int, help='Worker processes')
        self.add_command_arguments(parser)

    def add_command_arguments(self, parser):
        pass

    # ================================
    # CONFIGURATION
    # ================================

    def resolve(self, options) -> Dict[str, Any]:
        repository = None
        if options.get('config'):
            try:
                repository = RepositoryEnv(options['config'])
            except OSError as exc:
                raise CommandError(f"Cannot read config file: {exc}", returncode=USAGE_ERROR)

        effective = {}
        for dest, option in {**COMMON_OPTIONS, **self.options_spec}.items():
            value = options.get(dest)
            if value is None and repository is not None and option.key in repository.data:
                try:
                    value = option.cast(repository[option.key])
                except ValueError as exc:
                    raise CommandError(f"Bad {option.key} in config file: {exc}", returncode=USAGE_ERROR)
            effective[dest] = option.fallback() if value is None else value
        return effective

    def validated(self, serializer_class, data, **context):
        """Serializer after validation; its errors become a usage error."""
        serializer = serializer_class(data=data, context=context)
        if not serializer.is_valid():
            self.usage_error(f"Invalid configuration: {dict(serializer.errors)}")
        return serializer

    def usage_error(self, message):
        parser = getattr(self, '_parser', None)
        if parser is not None:
            self.stderr.write(parser.format_usage().rstrip())
        raise CommandError(message, returncode=USAGE_ERROR)

    def load_input(self, options, effective, path_option='input'):
        if options.get('schema'):
            schema = read_schema(options['schema'])
        elif options.get('kinds'):
            try:
                schema = parse_schema_flag(options['kinds'])
            except ValueError as exc:
                self.usage_error(str(exc))
        else:
            self.usage_error("A schema is required: pass --schema or --kinds")
        return read_csv(options[path_option], schema, effective['missing_token'])

    # ================================
    # EXECUTION
    # ================================

    def handle(self, *args, **options):
        effective = self.resolve(options)
        logger.debug(f"Effective configuration: {effective}")
        try:
            self.run(effective, options)
        except CommandError:
            raise
        except (BBGCError, ValueError, OSError) as exc:
            logger.error(f"{type(exc).__name__}: {exc}")
            raise CommandError(f"{type(exc).__name__}: {exc}", returncode=RUNTIME_ERROR) from exc

    def run(self, effective, options):
        raise NotImplementedError
