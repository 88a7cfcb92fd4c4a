# blueprints/common.py - Shared command-line plumbing: config, exit statuses, output
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import click
from flask import current_app

from utils.errors import XolapError
from utils.rollup import AggregateKind
from utils.xmltree import serialize

USAGE_ERROR = 1
DATA_ERROR = 2
ORACLE_DIVERGENCE = 3


class UsageError(click.UsageError):
    exit_code = USAGE_ERROR


class DataError(click.ClickException):
    exit_code = DATA_ERROR


class OracleDivergence(click.ClickException):
    exit_code = ORACLE_DIVERGENCE


class XolapCommand(click.Command):
    """Command whose argument errors exit with the usage status."""

    def make_context(self, info_name, args, parent=None, **extra):
        try:
            return super().make_context(info_name, args, parent=parent, **extra)
        except click.UsageError as exc:
            exc.exit_code = USAGE_ERROR
            raise


_REQUIRED = {
    'match': ('document_path', 'pattern_path'),
    'embed': ('document_path', 'pattern_path'),
    'rollup': ('document_path', 'fact', 'hierarchy', 'measure', 'value', 'agg'),
    'classify': ('document_path', 'schema_path'),
    'validate': ('pattern_path',),
}

_FLAGS = {
    'document_path': '--document',
    'pattern_path': '--pattern',
    'schema_path': '--schema',
    'fact': '--fact',
    'hierarchy': '--hierarchy',
    'measure': '--measure',
    'value': '--value',
    'agg': '--agg',
}


@dataclass(frozen=True)
class CliConfig:
    command: str
    document_path: Optional[Path] = None
    pattern_path: Optional[Path] = None
    schema_path: Optional[Path] = None
    fact: Optional[str] = None
    hierarchy: Optional[str] = None
    measure: Optional[str] = None
    value: Optional[str] = None
    agg: Optional[str] = None
    dimension: Optional[str] = None
    output_format: str = 'xml'
    oracle_check: bool = False

    def __post_init__(self):
        if self.command not in _REQUIRED:
            raise UsageError(f'unknown command {self.command!r}')
        missing = [_FLAGS[name] for name in _REQUIRED[self.command]
                   if getattr(self, name) in (None, '')]
        if missing:
            raise UsageError(f'{self.command} requires {", ".join(missing)}')
        if self.agg is not None and self.agg not in {k.value for k in AggregateKind}:
            raise UsageError(f'unknown aggregate {self.agg!r}')
        if self.output_format not in ('xml', 'json'):
            raise UsageError(f'unknown output format {self.output_format!r}')


_HANDLERS = {}


def handles(*commands):
    """Register the function running the given commands."""
    def register(func):
        for command in commands:
            _HANDLERS[command] = func
        return func
    return register


def run(cfg):
    """Run one command; errors surface as click exceptions carrying the exit status."""
    return _HANDLERS[cfg.command](cfg)


@contextmanager
def data_errors(path):
    """Turn engine and I/O failures into exit status 2, naming the file."""
    try:
        yield
    except OSError as exc:
        raise DataError(f'{path}: {exc.strerror or exc}') from exc
    except XolapError as exc:
        raise DataError(f'{path}: {exc}') from exc


def read(path, loader):
    with data_errors(path):
        return loader(path)


def emit_xml(tree):
    click.echo(serialize(tree))


def emit_json(payload, err=False):
    click.echo(current_app.json.dumps(payload), err=err)


# Options shared by several commands

document_option = click.option('-d', '--document', 'document_path',
                               type=click.Path(dir_okay=False, path_type=Path),
                               help='XML document to query.')
pattern_option = click.option('-p', '--pattern', 'pattern_path',
                              type=click.Path(dir_okay=False, path_type=Path),
                              help='Pattern tree file (JSON).')
format_option = click.option('--format', 'output_format', type=click.Choice(['xml', 'json']),
                             default='xml', show_default=True, help='Output format.')
oracle_option = click.option('--oracle-check', is_flag=True,
                             help='Cross-check the result against the brute-force oracle.')
