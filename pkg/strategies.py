# strategies.py - Hypothesis generators for data trees, patterns and sales documents
from hypothesis import strategies as st

from utils.pattern import (And, Comparator, Accessor, Edge, EdgeAnnotation, EdgeKind, Not, Or,
                           PatternNode, PatternTree, Predicate, TRUE)
from utils.xmltree import TreeBuilder

LABELS = ('a', 'b', 'c', 'd')
VALUES = (None, '1', '2', '10', 'x', 'xy')
ATTRIBUTE_VALUES = ('1', 'x', 'long text')


@st.composite
def data_trees(draw, max_nodes=40, max_depth=4, labels=LABELS, attributes=False):
    """Random ordered trees; attribute leaves, when asked for, precede element children."""
    builder = TreeBuilder()

    def add(label, parent):
        node = builder.add(label, draw(st.sampled_from(VALUES)), parent)
        if attributes:
            for name in draw(st.lists(st.sampled_from(('x', 'y', 'name')), unique=True, max_size=2)):
                builder.add('@' + name, draw(st.sampled_from(ATTRIBUTE_VALUES)), node)
        return node

    root = add(draw(st.sampled_from(labels)), None)
    frontier = [(root, 0)]
    target = draw(st.integers(1, max_nodes))
    count = 1
    while frontier and count < target:
        index = draw(st.integers(0, len(frontier) - 1))
        parent, depth = frontier[index]
        if depth >= max_depth:
            frontier.pop(index)
            continue
        child = add(draw(st.sampled_from(labels)), parent)
        frontier.append((child, depth + 1))
        count += 1
    return builder.build()


def predicates(variables):
    return st.builds(
        Predicate,
        var=st.sampled_from(variables),
        op=st.sampled_from(list(Comparator)),
        const=st.sampled_from(('1', '2', '10', 'x', 'a', 'b')),
        accessor=st.sampled_from((Accessor.VALUE, Accessor.LABEL)),
    )


def formulas(variables):
    return st.one_of(st.just(TRUE), st.recursive(
        predicates(variables),
        lambda inner: st.one_of(
            st.lists(inner, min_size=1, max_size=3).map(lambda args: And(tuple(args))),
            st.lists(inner, min_size=1, max_size=3).map(lambda args: Or(tuple(args))),
            inner.map(Not),
        ),
        max_leaves=4,
    ))


@st.composite
def patterns(draw, max_nodes=8, labels=LABELS, cardinalities='-+*?', max_ad_edges=2):
    """Valid pattern trees.

    Few ad edges, few wildcards and at most three children per node keep the
    number of bindings small enough for exhaustive enumeration.
    """
    size = draw(st.integers(1, max_nodes))
    label_or_wildcard = st.one_of(st.sampled_from(labels), st.sampled_from(labels),
                                  st.sampled_from(labels), st.none())
    nodes = [PatternNode(0, draw(label_or_wildcard), output=True)]
    computed = set()
    children = {0: 0}
    ad_edges = 0
    wildcards = 0
    for var in range(1, size):
        open_parents = [v for v in range(var) if v not in computed and children[v] < 3]
        if not open_parents:
            break
        parent = draw(st.sampled_from(open_parents))
        children[parent] += 1
        children[var] = 0
        label = draw(label_or_wildcard)
        if label is None:
            if wildcards >= 2:
                label = draw(st.sampled_from(labels))
            else:
                wildcards += 1
        kind = EdgeKind.PC
        if ad_edges < max_ad_edges and draw(st.integers(0, 3)) == 0:
            kind = EdgeKind.AD
            ad_edges += 1
        card = draw(st.sampled_from('---' + cardinalities))
        ordered = draw(st.booleans())
        is_computed = draw(st.integers(0, 9)) == 0
        if is_computed:
            computed.add(var)
        nodes.append(PatternNode(var, label, output=draw(st.booleans()),
                                 computed=is_computed, parent=parent,
                                 edge=Edge(kind, EdgeAnnotation.of(card, ordered))))
    matching = [node.var for node in nodes if not node.computed]
    return PatternTree.from_nodes(nodes, draw(formulas(matching)))


LEVELS = ('C3', 'C2', 'C1')
MEMBERS = {
    'C3': ('SQL', 'PHP 5', 'Manag. S.I', 'Java'),
    'C2': ('Databases', 'Inform. systems', 'Web'),
    'C1': ('Software', 'Management'),
}
# Functional member -> more general member mapping for strict, covering documents
STRICT_PARENT = {
    'SQL': 'Databases', 'PHP 5': 'Web', 'Java': 'Web', 'Manag. S.I': 'Inform. systems',
    'Databases': 'Software', 'Web': 'Software', 'Inform. systems': 'Management',
}
ALL_MEMBERS = tuple(m for level in LEVELS for m in MEMBERS[level])

prices = st.one_of(st.integers(0, 100).map(str),
                   st.tuples(st.integers(0, 99), st.sampled_from(('25', '5', '99'))).map(
                       lambda p: f'{p[0]}.{p[1]}'))


def _add_chain(builder, container, chain):
    parent = container
    for level, member in chain:
        parent = builder.add(level, parent=parent)
        builder.add('@name', member, parent)


@st.composite
def chains(draw, reach_top=False):
    levels = draw(st.lists(st.sampled_from(LEVELS), min_size=1, max_size=3, unique=True))
    levels = sorted(levels, key=LEVELS.index)
    if reach_top and levels[-1] != 'C1':
        levels.append('C1')
    return tuple((level, draw(st.sampled_from(MEMBERS[level]))) for level in levels)


@st.composite
def sales_documents(draw, max_facts=15, reach_top=False, strict=False):
    """Book sales with category chains: complex by default, strict and covering on demand."""
    builder = TreeBuilder()
    root = builder.add('sales')
    for i in range(draw(st.integers(0, max_facts))):
        book = builder.add('book', parent=root)
        builder.add('title', f'Book {i}', book)
        categories = builder.add('categories', parent=book)
        if strict:
            member = draw(st.sampled_from(MEMBERS['C3']))
            parent = STRICT_PARENT[member]
            _add_chain(builder, categories, (('C3', member), ('C2', parent),
                                             ('C1', STRICT_PARENT[parent])))
        else:
            for chain in draw(st.lists(chains(reach_top), min_size=1, max_size=3)):
                _add_chain(builder, categories, chain)
        builder.add('price', draw(prices), book)
    return builder.build()
