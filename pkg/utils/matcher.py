# utils/matcher.py - Embedding/matching pattern trees into data trees, witness trees
import logging
from collections.abc import Mapping
from dataclasses import dataclass, field

from .errors import OracleLimitError, WitnessConsistencyError
from .pattern import EdgeKind, bound_nodes, eval_formula, var_name
from .xmltree import TreeBuilder, element_label

logger = logging.getLogger(__name__)

ORACLE_PATTERN_LIMIT = 8
ORACLE_TREE_LIMIT = 40


class Binding(Mapping):
    """Assignment of pattern variables to data nodes.

    A value is a NodeId, a tuple of NodeIds for variables matched under a
    "+"/"*" edge (or nested below one), or None when unbound.
    """

    __slots__ = ('_assignments',)

    def __init__(self, assignments):
        self._assignments = dict(sorted(assignments.items()))

    def __getitem__(self, var):
        return self._assignments[var]

    def __iter__(self):
        return iter(self._assignments)

    def __len__(self):
        return len(self._assignments)

    def __hash__(self):
        return hash(tuple(self._assignments.items()))

    def __repr__(self):
        inner = ', '.join(f'{var_name(v)}: {n!r}' for v, n in self._assignments.items())
        return f'Binding({{{inner}}})'

    def nodes(self, var):
        return bound_nodes(self, var)

    def sort_key(self, tree):
        return tuple(tuple(tree.position(n) for n in self.nodes(var)) for var in self._assignments)


def _grouped_vars(pt):
    """Variables at or below a "+"/"*" edge; they bind tuples."""
    grouped = set()
    for var in pt.subtree_vars(pt.root):
        node = pt.nodes[var]
        if node.parent in grouped or (node.edge is not None and node.edge.cardinality.grouped):
            grouped.add(var)
    return grouped


def _finish(partials, tree):
    unique = dict.fromkeys(Binding(p) for p in partials)
    return sorted(unique, key=lambda b: b.sort_key(tree))


class _Embedder:
    """Top-down backtracking over label-filtered candidates.

    Structural tests use the tree's preorder intervals; partial embeddings
    are memoized per (pattern var, data node).
    """

    def __init__(self, pt, tree):
        self.pt = pt
        self.tree = tree
        self._memo = {}

    def label_ok(self, var, node_id):
        label = self.pt.nodes[var].label
        return label is None or self.tree.label_of(node_id) == label

    def candidates(self, var, parent_node):
        node = self.pt.nodes[var]
        if node.edge.kind is EdgeKind.PC:
            related = self.tree.children_of(parent_node)
        else:
            related = self.tree.descendants(parent_node)
        return [c for c in related if self.label_ok(var, c)]

    def embeddings(self, var, node_id):
        """Partial bindings of var's pattern subtree with var bound to node_id."""
        key = (var, node_id)
        if key not in self._memo:
            partials = [{var: node_id}]
            for child in self.pt.children_of(var):
                options = self.child_options(child, node_id)
                partials = [{**p, **o} for p in partials for o in options]
                if not partials:
                    break
            self._memo[key] = partials
        return self._memo[key]

    def child_options(self, var, parent_node):
        node = self.pt.nodes[var]
        if node.computed:
            return [{var: None}]
        subtree = self.pt.subtree_vars(var)
        found = []
        for candidate in self.candidates(var, parent_node):
            found.extend(self.embeddings(var, candidate))
        cardinality = node.edge.cardinality
        if not found:
            return [dict.fromkeys(subtree)] if cardinality.optional else []
        if cardinality.grouped:
            return [self.group(found, subtree)]
        return found

    def group(self, partials, subtree):
        grouped = {}
        for var in subtree:
            members = set()
            for partial in partials:
                members.update(bound_nodes(partial, var))
            grouped[var] = tuple(sorted(members, key=self.tree.position)) or None
        return grouped

    def run(self):
        root = self.pt.root
        partials = []
        for node_id in self.tree.preorder():
            if self.label_ok(root, node_id):
                partials.extend(self.embeddings(root, node_id))
        return _finish(partials, self.tree)


def embed(pt, tree):
    """All structural embeddings of pt into tree, ignoring the formula."""
    bindings = _Embedder(pt, tree).run()
    logger.debug('%d embeddings found', len(bindings))
    return bindings


def match(pt, tree):
    """Embeddings whose binding satisfies the pattern formula."""
    bindings = [b for b in embed(pt, tree) if eval_formula(pt.formula, b, tree)]
    logger.debug('%d matchings found', len(bindings))
    return bindings


# Brute-force oracle

def _is_child(tree, parent, node):
    return tree.parent_of(node) == parent


def _is_proper_descendant(tree, ancestor, node):
    current = tree.parent_of(node)
    while current is not None:
        if current == ancestor:
            return True
        current = tree.parent_of(current)
    return False


class _Oracle:
    """Exhaustive tuple enumeration; "+"/"*" enumerate like "-"/"?" and are
    collapsed afterwards. Relations are checked by walking parent links."""

    def __init__(self, pt, tree):
        self.pt = pt
        self.tree = tree
        self.order = [v for v in pt.subtree_vars(pt.root) if not pt.nodes[v].computed]
        self._embeds = {}
        self._unbound = {}

    def fits(self, var, parent_node, node_id):
        node = self.pt.nodes[var]
        if node.label is not None and self.tree.label_of(node_id) != node.label:
            return False
        if node.edge.kind is EdgeKind.PC:
            return _is_child(self.tree, parent_node, node_id)
        return _is_proper_descendant(self.tree, parent_node, node_id)

    def embeds_at(self, var, node_id):
        key = (var, node_id)
        if key not in self._embeds:
            scope = [v for v in self.pt.subtree_vars(var) if not self.pt.nodes[v].computed]
            self._embeds[key] = next(self.assign(scope, {var: node_id}, 1), None) is not None
        return self._embeds[key]

    def may_be_unbound(self, var, parent_node):
        # "?" and "*" leave a variable unbound only when nothing can be bound.
        if not self.pt.nodes[var].edge.cardinality.optional:
            return False
        key = (var, parent_node)
        if key not in self._unbound:
            self._unbound[key] = not any(self.fits(var, parent_node, c) and self.embeds_at(var, c)
                                         for c in self.tree.preorder())
        return self._unbound[key]

    def assign(self, scope, partial, index):
        if index == len(scope):
            yield dict(partial)
            return
        var = scope[index]
        parent_node = partial[self.pt.nodes[var].parent]
        domain = list(self.tree.preorder()) + [None]
        for node_id in domain:
            if node_id is None:
                if parent_node is not None and not self.may_be_unbound(var, parent_node):
                    continue
            elif parent_node is None or not self.fits(var, parent_node, node_id):
                continue
            partial[var] = node_id
            yield from self.assign(scope, partial, index + 1)
            del partial[var]

    def tuples(self):
        root = self.pt.root
        label = self.pt.nodes[root].label
        for node_id in self.tree.preorder():
            if label is None or self.tree.label_of(node_id) == label:
                yield from self.assign(self.order, {root: node_id}, 1)

    def collapse(self, tuples):
        grouped = _grouped_vars(self.pt)
        free = [v for v in self.order if v not in grouped]
        merged = {}
        for assignment in tuples:
            key = tuple(assignment[v] for v in free)
            members = merged.setdefault(key, {v: set() for v in grouped})
            for var in grouped:
                if assignment.get(var) is not None:
                    members[var].add(assignment[var])
        for key, members in merged.items():
            result = dict.fromkeys(self.pt.nodes)
            result.update(zip(free, key))
            for var, nodes in members.items():
                result[var] = tuple(sorted(nodes, key=self.tree.position)) or None
            yield result


def match_oracle(pt, tree, *, use_formula=True, pattern_limit=ORACLE_PATTERN_LIMIT,
                 tree_limit=ORACLE_TREE_LIMIT):
    """Brute-force reference for match (or embed, with use_formula=False)."""
    if len(pt.matching_vars) > pattern_limit:
        raise OracleLimitError(f'pattern has {len(pt.matching_vars)} matching nodes, '
                               f'oracle limit is {pattern_limit}')
    if len(tree) > tree_limit:
        raise OracleLimitError(f'tree has {len(tree)} nodes, oracle limit is {tree_limit}')
    oracle = _Oracle(pt, tree)
    candidates = oracle.collapse(oracle.tuples())
    if use_formula:
        candidates = (c for c in candidates if eval_formula(pt.formula, c, tree))
    return _finish(candidates, tree)


def binding_problems(pt, binding, tree):
    """Binding invariant violations, as messages; empty when the binding is sound."""
    problems = []
    if set(binding) != set(pt.nodes):
        return [f'binding variables {sorted(binding)} differ from pattern variables {sorted(pt.nodes)}']
    grouped = _grouped_vars(pt)
    for var, node in pt.nodes.items():
        value = binding[var]
        name = var_name(var)
        if node.computed:
            if value is not None:
                problems.append(f'computed {name} is bound')
            continue
        if value is not None and isinstance(value, tuple) != (var in grouped):
            problems.append(f'{name} has the wrong arity')
            continue
        members = bound_nodes(binding, var)
        missing = [n for n in members if n not in tree]
        if missing:
            problems.append(f'{name} is bound to unknown nodes {missing}')
            continue
        if node.label is not None and any(tree.label_of(n) != node.label for n in members):
            problems.append(f'{name} is bound to a node not labeled {node.label!r}')
        if node.parent is None:
            if not members:
                problems.append(f'root {name} is unbound')
            continue
        parents = bound_nodes(binding, node.parent)
        if not parents:
            if members:
                problems.append(f'{name} is bound under an unbound parent')
            continue
        if not members and node.edge.annotation.mandatory:
            problems.append(f'mandatory {name} is unbound')
        related = tree.children_of if node.edge.kind is EdgeKind.PC else tree.descendants
        for member in members:
            if not any(member in related(p) for p in parents):
                problems.append(f'{name} does not respect its {node.edge.kind.value} edge')
                break
    return problems


@dataclass
class _Fragment:
    var: int
    node: int
    full: bool = False
    children: list = field(default_factory=list)


def _related(tree, kind, parent, node):
    if kind is EdgeKind.PC:
        return tree.parent_of(node) == parent
    return tree.is_ancestor(parent, node)


def _arrange(pt, tree, fragments):
    """Document order, except fragments under ordered edges take pattern-sibling order."""
    fragments = sorted(fragments, key=lambda f: tree.position(f.node))
    slots = [i for i, f in enumerate(fragments) if pt.nodes[f.var].edge.annotation.ordered]
    reordered = sorted((fragments[i] for i in slots), key=lambda f: (f.var, tree.position(f.node)))
    for slot, fragment in zip(slots, reordered):
        fragments[slot] = fragment
    return fragments


def _fragments_below(pt, binding, tree, var, node_id):
    result = []
    for child in pt.children_of(var):
        child_node = pt.nodes[child]
        if child_node.computed:
            continue
        for member in bound_nodes(binding, child):
            if _related(tree, child_node.edge.kind, node_id, member):
                result.extend(_fragments(pt, binding, tree, child, member))
    return result


def _fragments(pt, binding, tree, var, node_id):
    if not pt.nodes[var].output:
        return _fragments_below(pt, binding, tree, var, node_id)
    if not pt.has_output_below(var):
        return [_Fragment(var, node_id, full=True)]
    below = _fragments_below(pt, binding, tree, var, node_id)
    return [_Fragment(var, node_id, children=_arrange(pt, tree, below))]


def _emit_children(builder, tree, fragments, parent, parent_source, origins):
    """Attributes first, so a[b, @x] style trees are never produced.

    An attribute fragment stays an attribute only directly under the copy of
    its own data parent and only once per label; elsewhere it becomes an element.
    """
    attributes, elements = [], []
    taken = set()
    for fragment in fragments:
        node = tree.node(fragment.node)
        if (node.is_attribute and parent_source is not None
                and tree.parent_of(fragment.node) == parent_source and node.label not in taken):
            taken.add(node.label)
            attributes.append(fragment)
        else:
            elements.append(fragment)
    for fragment in attributes:
        _emit(builder, tree, fragment, parent, origins, as_attribute=True)
    for fragment in elements:
        _emit(builder, tree, fragment, parent, origins)


def _emit(builder, tree, fragment, parent, origins, as_attribute=False):
    node_id = fragment.node
    node = tree.node(node_id)
    label = node.label if as_attribute else element_label(node.label)
    copy = builder.add(label, node.value, parent)
    origins[copy] = (fragment.var, node_id)
    if fragment.full:
        children = [_Fragment(fragment.var, c, full=True) for c in node.children]
    else:
        children = fragment.children
    _emit_children(builder, tree, children, copy, node_id, origins)


def trace_witness(pt, bindings, tree):
    """Build the witness and map each of its nodes to (var, data node).

    The synthetic root maps to (root var, None); nodes inside a full copy carry
    the var of the copied output node.
    """
    root = pt.nodes[pt.root]
    builder = TreeBuilder()
    witness_root = builder.add(element_label(root.label) if root.label else 'witness')
    origins = {witness_root: (pt.root, None)}
    fragments = []
    for binding in bindings:
        problems = binding_problems(pt, binding, tree)
        if problems:
            raise WitnessConsistencyError(f'binding {binding!r}: {problems[0]}')
        root_node = binding[pt.root]
        if root.output and not pt.has_output_below(pt.root):
            fragments.append(_Fragment(pt.root, root_node, full=True))
        else:
            fragments.extend(_arrange(pt, tree, _fragments_below(pt, binding, tree, pt.root, root_node)))
    _emit_children(builder, tree, fragments, witness_root, None, origins)
    return builder.build(), origins


def build_witness(pt, bindings, tree):
    """Merge the output nodes of every binding under one synthetic root."""
    return trace_witness(pt, bindings, tree)[0]


def bindings_to_json(pt, bindings, tree):
    """JSON-ready bindings: {"$1": "/doc/book[1]", ...}; groups as lists, unbound as null."""
    rows = []
    for binding in bindings:
        row = {}
        for var in pt.matching_vars:
            value = binding[var]
            if value is None:
                row[var_name(var)] = None
            elif isinstance(value, tuple):
                row[var_name(var)] = [tree.path_of(n) for n in value]
            else:
                row[var_name(var)] = tree.path_of(value)
        rows.append(row)
    return rows
