# utils/rollup.py - Pattern-tree based rollup over complex hierarchies
import logging
from dataclasses import dataclass
from decimal import Decimal
from enum import Enum
from typing import Optional

from .errors import (EmptyAggregateError, NumericDomainError, OracleLimitError,
                     RollupDataError, RollupQueryError)
from .mdmodel import parse_measure
from .pattern import (Accessor, Comparator, Edge, EdgeAnnotation, EdgeKind, Or,
                      PatternNode, PatternTree, Predicate)
from .xmltree import ATTRIBUTE_PREFIX, DataTree, TreeBuilder

logger = logging.getLogger(__name__)

ORACLE_LIMIT = 500
AGGREGATE_LABEL = 'Aggregate'
COUNT_LABEL = 'Count'


class AggregateKind(str, Enum):
    SUM = 'sum'
    COUNT = 'count'
    AVG = 'avg'
    MIN = 'min'
    MAX = 'max'


@dataclass(frozen=True)
class RollupQuery:
    fact_label: str
    hierarchy_root_label: str
    measure_label: str
    target_value: str
    agg: AggregateKind = AggregateKind.SUM

    def __post_init__(self):
        for name in ('fact_label', 'hierarchy_root_label', 'measure_label', 'target_value'):
            if not getattr(self, name):
                raise RollupQueryError(f'{name} must not be empty')
        try:
            object.__setattr__(self, 'agg', AggregateKind(self.agg))
        except ValueError:
            raise RollupQueryError(f'unknown aggregate {self.agg!r}') from None


@dataclass(frozen=True)
class AggregateState:
    """Running ($3, $4) pair: accumulator and number of aggregated facts."""

    acc: Decimal = Decimal(0)
    count: int = 0


@dataclass(frozen=True)
class RollupResult:
    witness: DataTree
    value: Decimal
    matched_facts: int
    matched_level: Optional[str] = None


def make_rollup_pattern(query):
    """The eight-node rollup pattern.

    $0 document root, $1 fact, $2 hierarchy root, $5 most detailed member,
    $6 any member below it, $7 measure; $3 (aggregate) and $4 (count) are
    computed and never matched.
    """
    pc = Edge(EdgeKind.PC)
    nodes = [
        PatternNode(0, None, output=True),
        PatternNode(1, query.fact_label, parent=0, edge=pc),
        PatternNode(2, query.hierarchy_root_label, output=True, parent=1, edge=pc),
        PatternNode(3, AGGREGATE_LABEL, output=True, computed=True, parent=1, edge=pc),
        PatternNode(4, COUNT_LABEL, computed=True, parent=1, edge=pc),
        PatternNode(5, None, output=True, parent=2, edge=pc),
        PatternNode(6, None, parent=5, edge=Edge(EdgeKind.AD, EdgeAnnotation.of('?'))),
        PatternNode(7, query.measure_label, parent=1, edge=pc),
    ]
    formula = Or((Predicate(5, Comparator.EQ, query.target_value, Accessor.KEY),
                  Predicate(6, Comparator.EQ, query.target_value, Accessor.KEY)))
    return PatternTree.from_nodes(nodes, formula)


def aggregate_step(state, measure, agg):
    """AGGREGATE($3, $4, $7) for one fact."""
    measure = Decimal(measure) if not isinstance(measure, Decimal) else measure
    if not measure.is_finite():
        raise NumericDomainError(f'measure {measure} is not finite')
    agg = AggregateKind(agg)
    if agg in (AggregateKind.SUM, AggregateKind.AVG):
        acc = state.acc + measure
    elif agg is AggregateKind.COUNT:
        acc = state.acc
    elif state.count == 0:
        acc = measure
    elif agg is AggregateKind.MIN:
        acc = min(state.acc, measure)
    else:
        acc = max(state.acc, measure)
    return AggregateState(acc=acc, count=state.count + 1)


def finalize(state, agg):
    agg = AggregateKind(agg)
    if agg is AggregateKind.SUM:
        return state.acc
    if agg is AggregateKind.COUNT:
        return Decimal(state.count)
    if state.count == 0:
        raise EmptyAggregateError(f'{agg.value} over zero facts is undefined')
    if agg is AggregateKind.AVG:
        return state.acc / state.count
    return state.acc


def _fact_measure(tree, fact, query):
    found = [c for c in tree.children_of(fact) if tree.label_of(c) == query.measure_label]
    if not found:
        raise RollupDataError(tree.path_of(fact), f'missing measure {query.measure_label!r}')
    number = parse_measure(tree.value_of(found[0]))
    if number is None:
        raise RollupDataError(tree.path_of(fact), f'measure {query.measure_label!r} is not a '
                                                  f'number: {tree.value_of(found[0])!r}')
    return number


def _members(tree, node_ids):
    return [n for n in node_ids if not tree.label_of(n).startswith(ATTRIBUTE_PREFIX)]


def _find_target(tree, fact, query):
    """Label of the first member equal to the target, scanning each $5 then its $6s."""
    for container in tree.children_of(fact):
        if tree.label_of(container) != query.hierarchy_root_label:
            continue
        for detailed in _members(tree, tree.children_of(container)):
            if tree.key_of(detailed) == query.target_value:
                return tree.label_of(detailed)
            for member in _members(tree, tree.descendants(detailed)):
                if tree.key_of(member) == query.target_value:
                    return tree.label_of(member)
    return None


def _witness(tree, query, value, count, level):
    builder = TreeBuilder()
    root = builder.add(tree.label_of(tree.root))
    hierarchy = builder.add(query.hierarchy_root_label, parent=root)
    if level is not None:
        builder.add(level, query.target_value, hierarchy)
    aggregate = builder.add(AGGREGATE_LABEL, str(value), root)
    builder.add(ATTRIBUTE_PREFIX + COUNT_LABEL, str(count), aggregate)
    return builder.build()


def rollup(tree, query):
    """Aggregate the measure of every fact whose hierarchy reaches the target member.

    Each fact is aggregated at most once: the scan stops at its first hit.
    """
    state = AggregateState()
    matched_level = None
    for fact in tree.with_label(query.fact_label):
        measure = _fact_measure(tree, fact, query)
        level = _find_target(tree, fact, query)
        if level is None:
            continue
        state = aggregate_step(state, measure, query.agg)
        if matched_level is None:
            matched_level = level

    value = finalize(state, query.agg)
    logger.info('rollup %s(%s) to %r: %s over %d facts', query.agg.value, query.measure_label,
                query.target_value, value, state.count)
    return RollupResult(witness=_witness(tree, query, value, state.count, matched_level),
                        value=value, matched_facts=state.count, matched_level=matched_level)


def rollup_all(tree, query, values):
    """One rollup per target value, keyed by value."""
    results = {}
    for value in values:
        results[value] = rollup(tree, RollupQuery(query.fact_label, query.hierarchy_root_label,
                                                  query.measure_label, value, query.agg))
    return results


def rollup_oracle(tree, query, limit=ORACLE_LIMIT):
    """Closure-based reference: a fact counts iff the target is anywhere in its hierarchy."""
    if len(tree) > limit:
        raise OracleLimitError(f'tree has {len(tree)} nodes, oracle limit is {limit}')
    measures = []
    for fact in tree.with_label(query.fact_label):
        measure = _fact_measure(tree, fact, query)
        closure = set()
        for container in tree.children_of(fact):
            if tree.label_of(container) == query.hierarchy_root_label:
                closure.update(tree.key_of(n) for n in _members(tree, tree.descendants(container)))
        if query.target_value in closure:
            measures.append(measure)

    if query.agg is AggregateKind.COUNT:
        return Decimal(len(measures))
    if query.agg is AggregateKind.SUM:
        return sum(measures, Decimal(0))
    if not measures:
        raise EmptyAggregateError(f'{query.agg.value} over zero facts is undefined')
    if query.agg is AggregateKind.AVG:
        return sum(measures, Decimal(0)) / len(measures)
    return min(measures) if query.agg is AggregateKind.MIN else max(measures)


def avg_close(left, right, tolerance=Decimal('1e-9')):
    """Relative-tolerance equality for averages."""
    left, right = Decimal(left), Decimal(right)
    scale = max(abs(left), abs(right), Decimal(1))
    return abs(left - right) <= Decimal(tolerance) * scale
