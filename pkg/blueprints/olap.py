# blueprints/olap.py - rollup and classify commands
from decimal import Decimal
from pathlib import Path

import click
from flask import Blueprint, current_app

from utils.errors import RollupQueryError
from utils.mdmodel import bind_schema, classify_hierarchy, load_schema
from utils.rollup import AggregateKind, RollupQuery, avg_close, rollup, rollup_oracle
from utils.xmltree import load_document

from .common import (CliConfig, OracleDivergence, UsageError, XolapCommand, data_errors,
                     document_option, emit_json, emit_xml, format_option, handles,
                     oracle_option, read, run)

olap_bp = Blueprint('olap', __name__, cli_group=None)


def check_rollup(cfg, tree, query, result):
    """Compare a rollup value with the closure oracle."""
    config = current_app.config
    with data_errors(cfg.document_path):
        expected = rollup_oracle(tree, query, limit=config['ORACLE_LIMIT'])
    if query.agg is AggregateKind.AVG:
        agrees = avg_close(result.value, expected, Decimal(config['AVG_TOLERANCE']))
    else:
        agrees = result.value == expected
    if not agrees:
        current_app.logger.error('%s: rollup gave %s, oracle %s',
                                 cfg.document_path, result.value, expected)
        raise OracleDivergence(f'{cfg.document_path}: rollup diverges from the oracle')


@handles('rollup')
def run_rollup(cfg):
    try:
        query = RollupQuery(cfg.fact, cfg.hierarchy, cfg.measure, cfg.value, cfg.agg)
    except RollupQueryError as exc:
        raise UsageError(str(exc)) from exc
    tree = read(cfg.document_path, load_document)
    with data_errors(cfg.document_path):
        result = rollup(tree, query)
    if cfg.oracle_check:
        check_rollup(cfg, tree, query, result)

    summary = {'value': result.value, 'matched_facts': result.matched_facts,
               'matched_level': result.matched_level}
    if cfg.output_format == 'json':
        emit_json(summary)
    else:
        emit_xml(result.witness)
        emit_json(summary, err=True)


@handles('classify')
def run_classify(cfg):
    tree = read(cfg.document_path, load_document)
    config = read(cfg.schema_path, load_schema)
    dimensions = [cfg.dimension] if cfg.dimension else list(config.dimension_roots)
    with data_errors(cfg.document_path):
        view = bind_schema(tree, config)
        report = {dim: classify_hierarchy(view, dim).to_dict() for dim in dimensions}
    emit_json(report)


@olap_bp.cli.command('rollup', cls=XolapCommand)
@document_option
@click.option('--fact', help='Label of the fact elements.')
@click.option('--hierarchy', help='Label of the hierarchy root under each fact.')
@click.option('--measure', help='Label of the measure under each fact.')
@click.option('--value', help='Hierarchy member to aggregate up to.')
@click.option('--agg', type=click.Choice([k.value for k in AggregateKind]),
              help='Aggregate function.')
@format_option
@oracle_option
def rollup_command(document_path, fact, hierarchy, measure, value, agg, output_format,
                   oracle_check):
    """Roll a measure up to one hierarchy member; print the witness tree."""
    run(CliConfig('rollup', document_path=document_path, fact=fact, hierarchy=hierarchy,
                  measure=measure, value=value, agg=agg, output_format=output_format,
                  oracle_check=oracle_check))


@olap_bp.cli.command('classify', cls=XolapCommand)
@document_option
@click.option('-s', '--schema', 'schema_path', type=click.Path(dir_okay=False, path_type=Path),
              help='Schema config file (JSON).')
@click.option('--dimension', help='Classify only this dimension.')
def classify_command(document_path, schema_path, dimension):
    """Classify dimension hierarchies as strict/covering/complex."""
    run(CliConfig('classify', document_path=document_path, schema_path=schema_path,
                  dimension=dimension))
