"""
Tests for the xolap commands: output formats and exit statuses
"""
import json

import pytest

from blueprints.common import DATA_ERROR, ORACLE_DIVERGENCE, USAGE_ERROR
from utils.pattern import render_pattern
from utils.rollup import RollupQuery, make_rollup_pattern


@pytest.fixture
def paths(fixtures_dir):
    return {name: str(fixtures_dir / name) for name in (
        'books.xml', 'sales.xml', 'simple_sales.xml', 'book_query.pattern.json',
        'sales.schema.json', 'book_query.witness.xml', 'rollup_software.witness.xml')}


def rollup_args(paths, agg='sum', value='Software', *extra):
    return ['rollup', '-d', paths['sales.xml'], '--fact', 'book', '--hierarchy', 'categories',
            '--measure', 'price', '--value', value, '--agg', agg, *extra]


def test_rollup_prints_witness_and_summary(runner, paths, fixtures_dir):
    result = runner.invoke(args=rollup_args(paths))
    assert result.exit_code == 0, result.output
    golden = (fixtures_dir / 'rollup_software.witness.xml').read_bytes()
    assert result.stdout_bytes == golden
    summary = json.loads(result.stderr.strip().splitlines()[-1])
    assert summary == {'matched_facts': 2, 'matched_level': 'C1', 'value': '55'}


@pytest.mark.parametrize('agg, expected', [('sum', '55'), ('count', '2'), ('avg', '27.5')])
def test_rollup_json(runner, paths, agg, expected):
    result = runner.invoke(args=rollup_args(paths, agg, 'Software', '--format', 'json'))
    assert result.exit_code == 0
    assert json.loads(result.stdout)['value'] == expected


def test_rollup_with_oracle_check(runner, paths):
    for agg in ('sum', 'count', 'avg', 'min', 'max'):
        result = runner.invoke(args=rollup_args(paths, agg, 'Software', '--oracle-check'))
        assert result.exit_code == 0, result.output


def test_rollup_requires_measure(runner, paths):
    args = rollup_args(paths)
    index = args.index('--measure')
    del args[index:index + 2]
    result = runner.invoke(args=args)
    assert result.exit_code == USAGE_ERROR
    assert '--measure' in result.stderr


def test_rollup_rejects_unknown_aggregate(runner, paths):
    result = runner.invoke(args=rollup_args(paths, 'median'))
    assert result.exit_code == USAGE_ERROR


def test_avg_over_nothing_is_a_data_error(runner, paths):
    result = runner.invoke(args=rollup_args(paths, 'avg', 'Nonexistent'))
    assert result.exit_code == DATA_ERROR
    assert 'zero facts' in result.stderr


def test_missing_document_is_a_data_error(runner, paths, tmp_path):
    result = runner.invoke(args=['match', '-d', str(tmp_path / 'nope.xml'),
                                 '-p', paths['book_query.pattern.json']])
    assert result.exit_code == DATA_ERROR
    assert 'nope.xml' in result.stderr


def test_malformed_document_is_a_data_error(runner, paths, tmp_path):
    broken = tmp_path / 'broken.xml'
    broken.write_text('<doc><book></doc>')
    result = runner.invoke(args=['match', '-d', str(broken),
                                 '-p', paths['book_query.pattern.json']])
    assert result.exit_code == DATA_ERROR
    assert 'line 1' in result.stderr


def test_match_prints_golden_witness(runner, paths, fixtures_dir):
    result = runner.invoke(args=['match', '-d', paths['books.xml'],
                                 '-p', paths['book_query.pattern.json']])
    assert result.exit_code == 0, result.output
    assert result.stdout_bytes == (fixtures_dir / 'book_query.witness.xml').read_bytes()


def test_match_json_and_oracle_check(runner, paths):
    result = runner.invoke(args=['match', '-d', paths['books.xml'], '-p',
                                 paths['book_query.pattern.json'], '--format', 'json',
                                 '--oracle-check'])
    assert result.exit_code == 0, result.output
    rows = json.loads(result.stdout)
    assert [row['$1'] for row in rows] == ['/doc/book[1]']


def test_embed_finds_both_books(runner, paths):
    result = runner.invoke(args=['embed', '-d', paths['books.xml'], '-p',
                                 paths['book_query.pattern.json'], '--format', 'json'])
    assert result.exit_code == 0
    assert [row['$1'] for row in json.loads(result.stdout)] == ['/doc/book[1]', '/doc/book[2]']


def test_oracle_limit_is_a_data_error(app, paths):
    app.config['MATCH_ORACLE_TREE_LIMIT'] = 5
    result = app.test_cli_runner().invoke(args=[
        'match', '-d', paths['books.xml'], '-p', paths['book_query.pattern.json'],
        '--oracle-check'])
    assert result.exit_code == DATA_ERROR


def test_oracle_divergence_exit_status(runner, paths, monkeypatch):
    monkeypatch.setattr('blueprints.query.match_oracle', lambda *args, **kwargs: [])
    result = runner.invoke(args=['match', '-d', paths['books.xml'], '-p',
                                 paths['book_query.pattern.json'], '--oracle-check'])
    assert result.exit_code == ORACLE_DIVERGENCE


def test_rollup_pattern_through_match(runner, paths, tmp_path):
    pattern = tmp_path / 'rollup.pattern.json'
    pattern.write_text(render_pattern(make_rollup_pattern(
        RollupQuery('book', 'categories', 'price', 'Software'))))
    result = runner.invoke(args=['match', '-d', paths['sales.xml'], '-p', str(pattern),
                                 '--format', 'json', '--oracle-check'])
    assert result.exit_code == 0, result.output
    facts = {row['$1'] for row in json.loads(result.stdout)}
    assert facts == {'/sales/book[1]', '/sales/book[3]'}


def test_validate(runner, paths, tmp_path):
    result = runner.invoke(args=['validate', '-p', paths['book_query.pattern.json']])
    assert result.exit_code == 0
    assert json.loads(result.stdout) == {'valid': True, 'violations': []}

    bad = tmp_path / 'bad.pattern.json'
    bad.write_text(json.dumps({'nodes': [{'var': 0, 'label': 'a', 'output': True}],
                               'formula': {'op': 'eq', 'var': 9, 'const': 'x'}}))
    result = runner.invoke(args=['validate', '-p', str(bad)])
    assert result.exit_code == DATA_ERROR
    report = json.loads(result.stdout)
    assert report['valid'] is False
    assert [v['code'] for v in report['violations']] == ['formula-dangling-var']


def test_classify(runner, paths):
    result = runner.invoke(args=['classify', '-d', paths['sales.xml'],
                                 '-s', paths['sales.schema.json']])
    assert result.exit_code == 0, result.output
    assert json.loads(result.stdout) == {
        'categories': {'strict': False, 'covering': False, 'complex': True}}

    result = runner.invoke(args=['classify', '-d', paths['simple_sales.xml'],
                                 '-s', paths['sales.schema.json'], '--dimension', 'categories'])
    assert json.loads(result.stdout)['categories']['complex'] is False


def test_classify_unknown_dimension(runner, paths):
    result = runner.invoke(args=['classify', '-d', paths['sales.xml'],
                                 '-s', paths['sales.schema.json'], '--dimension', 'time'])
    assert result.exit_code == DATA_ERROR


def test_unknown_option_is_a_usage_error(runner, paths):
    result = runner.invoke(args=['match', '--colour', 'red'])
    assert result.exit_code == USAGE_ERROR


def test_output_is_deterministic(runner, paths):
    first = runner.invoke(args=rollup_args(paths))
    second = runner.invoke(args=rollup_args(paths))
    assert first.stdout_bytes == second.stdout_bytes
