"""
Tests for embedding, matching and witness trees, checked against the brute-force oracle
"""
import pytest
from hypothesis import HealthCheck, given, settings

from strategies import LABELS, data_trees, patterns
from utils.errors import OracleLimitError, WitnessConsistencyError
from utils.matcher import (Binding, binding_problems, bindings_to_json, build_witness, embed,
                           match, match_oracle, trace_witness)
from utils.pattern import (Comparator, Edge, EdgeAnnotation, EdgeKind, PatternNode, PatternTree,
                           Predicate, load_pattern)
from utils.xmltree import element_label, parse_document, serialize


@pytest.fixture
def book_pattern(fixtures_dir):
    return load_pattern(fixtures_dir / 'book_query.pattern.json')


def book_query(author_card='+', excluded='Jill'):
    """doc/book with title, editor and a descendant author, authors other than `excluded`."""
    nodes = [
        PatternNode(0, 'doc', output=True),
        PatternNode(1, 'book', output=True, parent=0, edge=Edge()),
        PatternNode(2, 'title', output=True, parent=1, edge=Edge()),
        PatternNode(3, 'author', output=True, parent=1,
                    edge=Edge(EdgeKind.AD, EdgeAnnotation.of(author_card))),
        PatternNode(4, 'editor', output=True, parent=1, edge=Edge()),
    ]
    return PatternTree.from_nodes(nodes, Predicate(3, Comparator.NE, excluded))


def test_book_query_matches_one_book(books, book_pattern):
    bindings = match(book_pattern, books)
    assert len(bindings) == 1
    (binding,) = bindings
    book1 = books.with_label('book')[0]
    assert binding[1] == book1
    assert binding[3] == books.with_label('author')[:2]
    assert [books.value_of(n) for n in binding.nodes(3)] == ['Jim', 'Tom']


def test_excluding_an_absent_author_matches_both_books(books):
    assert len(match(book_query(excluded='Gill'), books)) == 2


def test_exactly_one_author_binds_each_author(books):
    bindings = match(book_query(author_card='-'), books)
    assert [books.value_of(b[3]) for b in bindings] == ['Jim', 'Tom']

    second = parse_document('<doc><book><title>T</title><author>Ann</author>'
                            '<author>Gill</author><editor>E</editor></book></doc>')
    bindings = match(book_query(author_card='-', excluded='Gill'), second)
    assert [second.value_of(b[3]) for b in bindings] == ['Ann']


def test_second_author_carries_the_book_past_the_exclusion():
    tree = parse_document('<doc><book><title>T</title><author>Jill</author>'
                          '<author>Gill</author><editor>E</editor></book></doc>')
    bindings = match(book_query(author_card='-', excluded='Jill'), tree)
    assert len(bindings) == 1
    assert tree.value_of(bindings[0][3]) == 'Gill'


def test_embed_ignores_the_formula(books, book_pattern):
    bindings = embed(book_pattern, books)
    assert [b[1] for b in bindings] == list(books.with_label('book'))
    assert [len(b.nodes(3)) for b in bindings] == [2, 1]


def test_wildcard_root_binds_every_node(books):
    pt = PatternTree.from_nodes([PatternNode(0, None, output=True)])
    assert [b[0] for b in embed(pt, books)] == list(books.preorder())


def test_unknown_label_has_no_bindings(books):
    pt = PatternTree.from_nodes([PatternNode(0, 'doc', output=True),
                                 PatternNode(1, 'zzz', output=True, parent=0, edge=Edge())])
    assert embed(pt, books) == []
    assert match_oracle(pt, books, use_formula=False) == []


def test_optional_edge_is_maximal():
    tree = parse_document('<a><b/><b><c/></b></a>')
    pt = PatternTree.from_nodes([
        PatternNode(0, 'a', output=True),
        PatternNode(1, 'b', output=True, parent=0, edge=Edge()),
        PatternNode(2, 'c', output=True, parent=1, edge=Edge(annotation=EdgeAnnotation.of('?'))),
    ])
    bindings = embed(pt, tree)
    assert [(b[1], b[2]) for b in bindings] == [(1, None), (2, 3)]
    assert bindings == match_oracle(pt, tree, use_formula=False)


def test_zero_to_many_groups_or_leaves_unbound():
    tree = parse_document('<a><b><c/><c/></b><b/></a>')
    pt = PatternTree.from_nodes([
        PatternNode(0, 'a', output=True),
        PatternNode(1, 'b', output=True, parent=0, edge=Edge()),
        PatternNode(2, 'c', output=True, parent=1, edge=Edge(annotation=EdgeAnnotation.of('*'))),
    ])
    bindings = embed(pt, tree)
    assert [(b[1], b[2]) for b in bindings] == [(1, (2, 3)), (4, None)]


def test_computed_nodes_stay_unbound(books):
    pt = PatternTree.from_nodes([
        PatternNode(0, 'book', output=True),
        PatternNode(1, 'total', output=True, computed=True, parent=0, edge=Edge()),
    ])
    bindings = embed(pt, books)
    assert len(bindings) == 2
    assert all(b[1] is None for b in bindings)
    assert all(binding_problems(pt, b, books) == [] for b in bindings)


def test_book_witness_matches_golden_file(books, book_pattern, fixtures_dir):
    witness = build_witness(book_pattern, match(book_pattern, books), books)
    golden = (fixtures_dir / 'book_query.witness.xml').read_bytes()
    assert serialize(witness) == golden.strip()


def test_empty_result_gives_a_lone_root(books, book_pattern):
    witness = build_witness(book_pattern, [], books)
    assert serialize(witness) == b'<doc/>'
    wildcard = PatternTree.from_nodes([PatternNode(0, None, output=True)])
    assert serialize(build_witness(wildcard, [], books)) == b'<witness/>'


def test_witness_lifts_non_output_nodes(books):
    pt = PatternTree.from_nodes([
        PatternNode(0, 'doc'),
        PatternNode(1, 'book', parent=0, edge=Edge()),
        PatternNode(2, 'title', output=True, parent=1, edge=Edge()),
    ])
    witness = build_witness(pt, match(pt, books), books)
    assert serialize(witness) == (b'<doc><title>Querying XML</title>'
                                  b'<title>A dummy for a computer</title></doc>')


def test_witness_copies_output_leaves_whole(books):
    pt = PatternTree.from_nodes([
        PatternNode(0, 'doc'),
        PatternNode(1, 'book', output=True, parent=0, edge=Edge()),
        PatternNode(2, 'year', parent=1, edge=Edge()),
    ], Predicate(2, Comparator.LT, '2005'))
    witness = build_witness(pt, match(pt, books), books)
    assert serialize(witness) == (b'<doc><book><title>A dummy for a computer</title>'
                                  b'<author>Jill</author><editor>Wiley</editor>'
                                  b'<year>2004</year></book></doc>')


def test_ordered_edges_follow_pattern_order():
    tree = parse_document('<a><c>1</c><b>2</b></a>')
    ordered = EdgeAnnotation.of('-', ordered=True)
    pt = PatternTree.from_nodes([
        PatternNode(0, 'a', output=True),
        PatternNode(1, 'b', output=True, parent=0, edge=Edge(annotation=ordered)),
        PatternNode(2, 'c', output=True, parent=0, edge=Edge(annotation=ordered)),
    ])
    witness = build_witness(pt, match(pt, tree), tree)
    assert serialize(witness) == b'<a><b>2</b><c>1</c></a>'


def test_attributes_away_from_their_parent_become_elements():
    tree = parse_document('<doc><b x="1"/><c x="2"/></doc>')
    pt = PatternTree.from_nodes([
        PatternNode(0, 'doc'),
        PatternNode(1, '@x', output=True, parent=0, edge=Edge(EdgeKind.AD)),
    ])
    witness = build_witness(pt, match(pt, tree), tree)
    assert serialize(witness) == b'<doc><x>1</x><x>2</x></doc>'


def test_attributes_under_their_parent_copy_stay_attributes():
    tree = parse_document('<doc><b x="1"><c>3</c></b></doc>')
    pt = PatternTree.from_nodes([
        PatternNode(0, 'doc'),
        PatternNode(1, 'b', output=True, parent=0, edge=Edge()),
        PatternNode(2, 'c', output=True, parent=1, edge=Edge()),
        PatternNode(3, '@x', output=True, parent=1, edge=Edge()),
    ])
    witness = build_witness(pt, match(pt, tree), tree)
    assert serialize(witness) == b'<doc><b x="1"><c>3</c></b></doc>'


def test_inconsistent_binding_is_refused(books, book_pattern):
    (binding,) = match(book_pattern, books)
    broken = Binding({**binding, 2: books.with_label('editor')[0]})
    assert binding_problems(book_pattern, broken, books)
    with pytest.raises(WitnessConsistencyError):
        build_witness(book_pattern, [broken], books)


def test_bindings_to_json(books, book_pattern):
    rows = bindings_to_json(book_pattern, match(book_pattern, books), books)
    assert rows == [{
        '$0': '/doc',
        '$1': '/doc/book[1]',
        '$2': '/doc/book[1]/title[1]',
        '$3': ['/doc/book[1]/author[1]', '/doc/book[1]/author[2]'],
        '$4': '/doc/book[1]/editor[1]',
    }]


def test_oracle_refuses_large_inputs(books, book_pattern):
    with pytest.raises(OracleLimitError):
        match_oracle(book_pattern, books, tree_limit=5)
    with pytest.raises(OracleLimitError):
        match_oracle(book_pattern, books, pattern_limit=3)


def test_oracle_agrees_on_the_book_query(books, book_pattern):
    assert match_oracle(book_pattern, books) == match(book_pattern, books)
    assert match_oracle(book_pattern, books, use_formula=False) == embed(book_pattern, books)


@settings(max_examples=1000, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(patterns(), data_trees())
def test_match_agrees_with_oracle(pt, tree):
    bindings = match(pt, tree)
    assert bindings == match_oracle(pt, tree)
    assert set(bindings) <= set(embed(pt, tree))


@settings(max_examples=300, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(patterns(), data_trees())
def test_embed_agrees_with_oracle(pt, tree):
    assert embed(pt, tree) == match_oracle(pt, tree, use_formula=False)


@settings(max_examples=500, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(patterns(labels=LABELS + ('@x',)), data_trees(attributes=True))
def test_bindings_are_sound_and_witnesses_preserve_data(pt, tree):
    bindings = match(pt, tree)
    for binding in bindings:
        assert binding_problems(pt, binding, tree) == []
    witness = build_witness(pt, bindings, tree)
    assert serialize(witness)
    pairs = {(element_label(tree.label_of(n)), tree.value_of(n)) for n in tree.preorder()}
    for node_id in witness.preorder()[1:]:
        assert (element_label(witness.label_of(node_id)), witness.value_of(node_id)) in pairs
    if not bindings:
        assert len(witness) == 1


def _output_ancestor(pt, var):
    parent = pt.nodes[var].parent
    while parent != pt.root and not pt.nodes[parent].output:
        parent = pt.nodes[parent].parent
    return parent


@settings(max_examples=500, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(patterns(labels=LABELS + ('@x',)), data_trees(attributes=True))
def test_witness_edges_follow_pattern_edges(pt, tree):
    witness, origins = trace_witness(pt, match(pt, tree), tree)
    assert set(origins) == set(witness.preorder())
    for node_id in witness.preorder()[1:]:
        var, data_node = origins[node_id]
        parent_var, parent_data = origins[witness.parent_of(node_id)]
        if var == parent_var:
            # inside a whole-subtree copy
            assert tree.parent_of(data_node) == parent_data
            continue
        assert parent_var == _output_ancestor(pt, var)
        if parent_data is None:
            continue
        node = pt.nodes[var]
        if node.parent == parent_var and node.edge.kind is EdgeKind.PC:
            assert tree.parent_of(data_node) == parent_data
        else:
            assert data_node != parent_data and tree.is_ancestor(parent_data, data_node)


@settings(max_examples=200, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(patterns(), data_trees())
def test_match_is_deterministic(pt, tree):
    assert match(pt, tree) == match(pt, tree)
