# blueprints/query.py - match, embed and validate commands
from flask import Blueprint, current_app

from utils.errors import PatternValidationError
from utils.matcher import bindings_to_json, build_witness, embed, match, match_oracle
from utils.pattern import load_pattern
from utils.xmltree import load_document

from .common import (CliConfig, DataError, OracleDivergence, XolapCommand, data_errors,
                     document_option, emit_json, emit_xml, format_option, handles,
                     oracle_option, pattern_option, read, run)

query_bp = Blueprint('query', __name__, cli_group=None)


def check_bindings(cfg, pt, tree, bindings):
    """Compare engine bindings with the brute-force oracle."""
    config = current_app.config
    with data_errors(cfg.document_path):
        expected = match_oracle(pt, tree, use_formula=cfg.command == 'match',
                                pattern_limit=config['MATCH_ORACLE_PATTERN_LIMIT'],
                                tree_limit=config['MATCH_ORACLE_TREE_LIMIT'])
    if set(expected) != set(bindings):
        current_app.logger.error('%s: engine found %d bindings, oracle %d',
                                 cfg.document_path, len(bindings), len(expected))
        raise OracleDivergence(f'{cfg.document_path}: {cfg.command} diverges from the oracle')


@handles('match', 'embed')
def run_query(cfg):
    tree = read(cfg.document_path, load_document)
    pt = read(cfg.pattern_path, load_pattern)
    engine = match if cfg.command == 'match' else embed
    bindings = engine(pt, tree)
    current_app.logger.info('%s: %d bindings', cfg.document_path, len(bindings))
    if cfg.oracle_check:
        check_bindings(cfg, pt, tree, bindings)
    if cfg.output_format == 'json':
        emit_json(bindings_to_json(pt, bindings, tree))
    else:
        with data_errors(cfg.document_path):
            emit_xml(build_witness(pt, bindings, tree))


@handles('validate')
def run_validate(cfg):
    try:
        read(cfg.pattern_path, load_pattern)
    except DataError as exc:
        cause = exc.__cause__
        if not isinstance(cause, PatternValidationError):
            raise
        emit_json({'valid': False, 'violations': [
            {'code': v.code, 'message': v.message, 'var': v.var} for v in cause.report]})
        raise
    emit_json({'valid': True, 'violations': []})


@query_bp.cli.command('match', cls=XolapCommand)
@document_option
@pattern_option
@format_option
@oracle_option
def match_command(document_path, pattern_path, output_format, oracle_check):
    """Match a pattern tree (structure and formula); print the witness tree."""
    run(CliConfig('match', document_path=document_path, pattern_path=pattern_path,
                  output_format=output_format, oracle_check=oracle_check))


@query_bp.cli.command('embed', cls=XolapCommand)
@document_option
@pattern_option
@format_option
@oracle_option
def embed_command(document_path, pattern_path, output_format, oracle_check):
    """Embed a pattern tree (structure only); print the witness tree."""
    run(CliConfig('embed', document_path=document_path, pattern_path=pattern_path,
                  output_format=output_format, oracle_check=oracle_check))


@query_bp.cli.command('validate', cls=XolapCommand)
@pattern_option
def validate_command(pattern_path):
    """Validate a pattern file and print the violation report."""
    run(CliConfig('validate', pattern_path=pattern_path))
