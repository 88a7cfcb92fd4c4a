# utils/pattern.py - Pattern trees (TPQs): nodes, annotated edges, formulas, JSON format
import json
import logging
import operator
from dataclasses import dataclass
from decimal import Decimal, InvalidOperation
from enum import Enum
from types import MappingProxyType
from typing import Mapping, Optional

from werkzeug.utils import cached_property

from .errors import PatternParseError, PatternValidationError

logger = logging.getLogger(__name__)


class EdgeKind(str, Enum):
    PC = 'pc'
    AD = 'ad'


class Cardinality(str, Enum):
    EXACTLY_ONE = '-'
    ONE_TO_MANY = '+'
    ZERO_TO_MANY = '*'
    ZERO_OR_ONE = '?'

    @property
    def grouped(self):
        return self in (Cardinality.ONE_TO_MANY, Cardinality.ZERO_TO_MANY)

    @property
    def optional(self):
        return self in (Cardinality.ZERO_TO_MANY, Cardinality.ZERO_OR_ONE)


@dataclass(frozen=True)
class EdgeAnnotation:
    cardinality: Cardinality = Cardinality.EXACTLY_ONE
    mandatory: bool = True
    ordered: bool = False

    @classmethod
    def of(cls, cardinality='-', ordered=False, mandatory=None):
        cardinality = Cardinality(cardinality)
        if mandatory is None:
            mandatory = not cardinality.optional
        return cls(cardinality, mandatory, ordered)


@dataclass(frozen=True)
class Edge:
    kind: EdgeKind = EdgeKind.PC
    annotation: EdgeAnnotation = EdgeAnnotation()

    @property
    def cardinality(self):
        return self.annotation.cardinality


@dataclass(frozen=True)
class PatternNode:
    var: int
    label: Optional[str] = None
    output: bool = False
    computed: bool = False
    parent: Optional[int] = None
    edge: Optional[Edge] = None


def var_name(var):
    return f'${var}'


# Formula AST

class Accessor(str, Enum):
    VALUE = 'value'
    LABEL = 'label'
    KEY = 'key'


class Comparator(str, Enum):
    EQ = 'eq'
    NE = 'ne'
    LT = 'lt'
    LE = 'le'
    GT = 'gt'
    GE = 'ge'
    CONTAINS = 'contains'


def _as_number(text):
    try:
        number = Decimal(text)
    except (InvalidOperation, ValueError):
        return None
    return number if number.is_finite() else None


_ORDERINGS = {
    Comparator.LT: operator.lt,
    Comparator.LE: operator.le,
    Comparator.GT: operator.gt,
    Comparator.GE: operator.ge,
}


def compare(op, left, right):
    """Apply a comparator; orderings are numeric when both sides parse as numbers."""
    if op is Comparator.EQ:
        return left == right
    if op is Comparator.NE:
        return left != right
    if op is Comparator.CONTAINS:
        return right in left
    left_number, right_number = _as_number(left), _as_number(right)
    if left_number is not None and right_number is not None:
        return _ORDERINGS[op](left_number, right_number)
    return _ORDERINGS[op](left, right)


def bound_nodes(binding, var):
    """Nodes bound to var as a tuple: () when unbound, several when grouped."""
    value = binding.get(var)
    if value is None:
        return ()
    if isinstance(value, tuple):
        return value
    return (value,)


@dataclass(frozen=True)
class Const:
    value: bool

    def variables(self):
        return ()

    def evaluate(self, binding, tree):
        return self.value

    def to_json(self):
        return self.value


TRUE = Const(True)
FALSE = Const(False)


@dataclass(frozen=True)
class Predicate:
    var: int
    op: Comparator
    const: str
    accessor: Accessor = Accessor.VALUE

    def variables(self):
        return (self.var,)

    def subject(self, tree, node_id):
        if self.accessor is Accessor.LABEL:
            return tree.label_of(node_id)
        if self.accessor is Accessor.KEY:
            return tree.key_of(node_id) or ''
        return tree.value_of(node_id) or ''

    def evaluate(self, binding, tree):
        # Existential over grouped bindings; an unbound variable fails.
        return any(compare(self.op, self.subject(tree, n), self.const)
                   for n in bound_nodes(binding, self.var))

    def to_json(self):
        return {'op': self.op.value, 'var': self.var, 'accessor': self.accessor.value,
                'const': self.const}


@dataclass(frozen=True)
class And:
    args: tuple = ()

    def variables(self):
        return tuple(v for arg in self.args for v in arg.variables())

    def evaluate(self, binding, tree):
        return all(arg.evaluate(binding, tree) for arg in self.args)

    def to_json(self):
        return {'op': 'and', 'args': [arg.to_json() for arg in self.args]}


@dataclass(frozen=True)
class Or:
    args: tuple = ()

    def variables(self):
        return tuple(v for arg in self.args for v in arg.variables())

    def evaluate(self, binding, tree):
        return any(arg.evaluate(binding, tree) for arg in self.args)

    def to_json(self):
        return {'op': 'or', 'args': [arg.to_json() for arg in self.args]}


@dataclass(frozen=True)
class Not:
    arg: object

    def variables(self):
        return self.arg.variables()

    def evaluate(self, binding, tree):
        return not self.arg.evaluate(binding, tree)

    def to_json(self):
        return {'op': 'not', 'args': [self.arg.to_json()]}


def eval_formula(formula, binding, tree):
    """Evaluate a formula against a binding (var -> node id, tuple of ids, or None)."""
    return formula.evaluate(binding, tree)


@dataclass(frozen=True, eq=False)
class PatternTree:
    nodes: Mapping[int, PatternNode]
    root: int
    formula: object = TRUE

    def __post_init__(self):
        object.__setattr__(self, 'nodes', MappingProxyType(dict(sorted(self.nodes.items()))))

    @classmethod
    def from_nodes(cls, nodes, formula=TRUE):
        nodes = {node.var: node for node in nodes}
        parentless = [var for var, node in nodes.items() if node.parent is None]
        root = parentless[0] if parentless else min(nodes, default=0)
        return cls(nodes=nodes, root=root, formula=formula)

    @cached_property
    def _children(self):
        children = {var: [] for var in self.nodes}
        for var, node in self.nodes.items():
            if node.parent in children:
                children[node.parent].append(var)
        return {var: tuple(sorted(kids)) for var, kids in children.items()}

    def node(self, var):
        return self.nodes[var]

    def children_of(self, var):
        return self._children[var]

    def subtree_vars(self, var):
        result = [var]
        for child in self.children_of(var):
            result.extend(self.subtree_vars(child))
        return result

    @property
    def matching_vars(self):
        return tuple(var for var, node in self.nodes.items() if not node.computed)

    @property
    def output_vars(self):
        return tuple(var for var, node in self.nodes.items() if node.output)

    def has_output_below(self, var):
        return any(self.nodes[v].output for v in self.subtree_vars(var)[1:])


@dataclass(frozen=True)
class Violation:
    code: str
    message: str
    var: Optional[int] = None


def validate_pattern(pt):
    """Return one Violation per broken pattern invariant; empty when valid."""
    report = []
    nodes = pt.nodes

    parentless = [var for var, node in nodes.items() if node.parent is None]
    if len(parentless) != 1:
        report.append(Violation('root-count', f'pattern must have exactly one root, found {len(parentless)}'))
    elif pt.root != parentless[0]:
        report.append(Violation('root-count', f'declared root {var_name(pt.root)} has a parent', pt.root))

    for var, node in nodes.items():
        if node.parent is not None and node.parent not in nodes:
            report.append(Violation('dangling-parent',
                                    f'{var_name(var)} refers to unknown parent {var_name(node.parent)}', var))

    reachable = set()
    if pt.root in nodes:
        pending = [pt.root]
        while pending:
            var = pending.pop()
            if var in reachable:
                continue
            reachable.add(var)
            pending.extend(pt.children_of(var))
    cyclic = False
    for var, node in nodes.items():
        if var in reachable or (node.parent is not None and node.parent not in nodes):
            continue
        seen = {var}
        current = node.parent
        while current is not None and current in nodes and current not in reachable:
            if current in seen:
                cyclic = True
                break
            seen.add(current)
            current = nodes[current].parent
        report.append(Violation('unreachable', f'{var_name(var)} is not reachable from the root', var))
    if cyclic:
        report.append(Violation('cycle', 'pattern parent links form a cycle'))

    for var, node in nodes.items():
        if node.parent is None and node.edge is not None:
            report.append(Violation('root-edge', f'root {var_name(var)} cannot have an edge', var))
        if node.parent is not None and node.edge is None:
            report.append(Violation('missing-edge', f'{var_name(var)} has no edge to its parent', var))
        if node.computed and node.parent is None:
            report.append(Violation('root-computed', f'root {var_name(var)} cannot be computed', var))
        if node.computed and pt.children_of(var):
            report.append(Violation('computed-not-leaf', f'computed node {var_name(var)} must be a leaf', var))
        if node.edge is not None:
            annotation = node.edge.annotation
            if annotation.mandatory == annotation.cardinality.optional:
                report.append(Violation(
                    'annotation-disagreement',
                    f'{var_name(var)}: cardinality "{annotation.cardinality.value}" '
                    f'cannot be {"mandatory" if annotation.mandatory else "optional"}', var))

    if not any(node.output for node in nodes.values()):
        report.append(Violation('no-output', 'pattern has no output node'))

    for var in dict.fromkeys(pt.formula.variables()):
        if var not in nodes:
            report.append(Violation('formula-dangling-var', f'formula refers to undeclared {var_name(var)}', var))
        elif nodes[var].computed:
            report.append(Violation('formula-computed-var', f'formula refers to computed {var_name(var)}', var))
    return report


# JSON format

_NODE_KEYS = {'var', 'label', 'output', 'computed', 'parent', 'edge'}
_EDGE_KEYS = {'kind', 'card', 'ordered', 'mandatory'}
_PREDICATE_KEYS = {'op', 'var', 'accessor', 'const'}


def _require(condition, where, message):
    if not condition:
        raise PatternParseError(where, message)


def _int_field(raw, key, where, nullable=False):
    value = raw.get(key)
    if value is None and nullable:
        return None
    _require(isinstance(value, int) and not isinstance(value, bool) and value >= 0,
             f'{where}.{key}', 'expected a non-negative integer')
    return value


def _bool_field(raw, key, where, default=False):
    value = raw.get(key, default)
    _require(isinstance(value, bool), f'{where}.{key}', 'expected a boolean')
    return value


def _parse_edge(raw, where):
    if raw is None:
        return None
    _require(isinstance(raw, dict), where, 'expected an object or null')
    unknown = set(raw) - _EDGE_KEYS
    _require(not unknown, where, f'unknown keys {sorted(unknown)}')
    kind = raw.get('kind', 'pc')
    _require(kind in {k.value for k in EdgeKind}, f'{where}.kind', f'unknown edge kind {kind!r}')
    card = raw.get('card', '-')
    _require(card in {c.value for c in Cardinality}, f'{where}.card', f'unknown cardinality {card!r}')
    mandatory = raw.get('mandatory')
    _require(mandatory is None or isinstance(mandatory, bool), f'{where}.mandatory', 'expected a boolean')
    ordered = _bool_field(raw, 'ordered', where)
    return Edge(EdgeKind(kind), EdgeAnnotation.of(card, ordered, mandatory))


def _parse_formula(raw, where):
    if isinstance(raw, bool):
        return Const(raw)
    _require(isinstance(raw, dict), where, 'expected true, false or an object')
    op = raw.get('op')
    if op in ('and', 'or', 'not'):
        args = raw.get('args')
        _require(isinstance(args, list), f'{where}.args', 'expected a list')
        parsed = tuple(_parse_formula(arg, f'{where}.args[{i}]') for i, arg in enumerate(args))
        if op == 'not':
            _require(len(parsed) == 1, f'{where}.args', '"not" takes exactly one argument')
            return Not(parsed[0])
        return And(parsed) if op == 'and' else Or(parsed)
    _require(op in {c.value for c in Comparator}, f'{where}.op', f'unknown operator {op!r}')
    unknown = set(raw) - _PREDICATE_KEYS
    _require(not unknown, where, f'unknown keys {sorted(unknown)}')
    var = _int_field(raw, 'var', where)
    accessor = raw.get('accessor', 'value')
    _require(accessor in {a.value for a in Accessor}, f'{where}.accessor', f'unknown accessor {accessor!r}')
    const = raw.get('const')
    _require(isinstance(const, str), f'{where}.const', 'expected a string')
    return Predicate(var, Comparator(op), const, Accessor(accessor))


def parse_pattern(text):
    """Parse the pattern JSON format into a validated PatternTree."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise PatternParseError('$', f'invalid JSON ({exc.msg}, line {exc.lineno})') from None
    _require(isinstance(raw, dict), '$', 'expected an object')
    unknown = set(raw) - {'nodes', 'formula'}
    _require(not unknown, '$', f'unknown keys {sorted(unknown)}')
    raw_nodes = raw.get('nodes')
    _require(isinstance(raw_nodes, list) and raw_nodes, 'nodes', 'expected a non-empty list')

    nodes = []
    seen = set()
    for i, raw_node in enumerate(raw_nodes):
        where = f'nodes[{i}]'
        _require(isinstance(raw_node, dict), where, 'expected an object')
        unknown = set(raw_node) - _NODE_KEYS
        _require(not unknown, where, f'unknown keys {sorted(unknown)}')
        var = _int_field(raw_node, 'var', where)
        _require(var not in seen, f'{where}.var', f'duplicate variable {var_name(var)}')
        seen.add(var)
        label = raw_node.get('label')
        _require(label is None or (isinstance(label, str) and label), f'{where}.label',
                 'expected a non-empty string or null')
        parent = _int_field(raw_node, 'parent', where, nullable=True)
        edge = _parse_edge(raw_node.get('edge'), f'{where}.edge')
        if parent is not None and edge is None:
            edge = Edge()
        nodes.append(PatternNode(var=var, label=label,
                                 output=_bool_field(raw_node, 'output', where),
                                 computed=_bool_field(raw_node, 'computed', where),
                                 parent=parent, edge=edge))

    pt = PatternTree.from_nodes(nodes, _parse_formula(raw.get('formula', True), 'formula'))
    report = validate_pattern(pt)
    if report:
        raise PatternValidationError(report)
    logger.debug('parsed pattern with %d nodes', len(pt.nodes))
    return pt


def load_pattern(path):
    with open(path, encoding='utf-8') as f:
        return parse_pattern(f.read())


def render_pattern(pt):
    """Canonical JSON text for a pattern; parse_pattern reads it back unchanged."""
    nodes = []
    for var, node in pt.nodes.items():
        edge = None
        if node.edge is not None:
            edge = {'kind': node.edge.kind.value,
                    'card': node.edge.cardinality.value,
                    'ordered': node.edge.annotation.ordered}
        nodes.append({'var': var, 'label': node.label, 'output': node.output,
                      'computed': node.computed, 'parent': node.parent, 'edge': edge})
    return json.dumps({'nodes': nodes, 'formula': pt.formula.to_json()}, indent=2,
                      ensure_ascii=False)
