# utils/mdmodel.py - Multidimensional reading of a data tree and hierarchy classification
import json
import logging
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from types import MappingProxyType
from typing import Mapping, Optional

from .errors import SchemaBindingError, SchemaConfigError, UnknownDimensionError
from .xmltree import ATTRIBUTE_PREFIX, KEY_ATTRIBUTE

logger = logging.getLogger(__name__)


def parse_measure(text):
    """Decimal value of a measure, or None when the text is not a finite number."""
    if text is None:
        return None
    try:
        number = Decimal(text.strip())
    except InvalidOperation:
        return None
    return number if number.is_finite() else None


@dataclass(frozen=True)
class SchemaConfig:
    fact_label: str
    dimension_roots: tuple
    measure_labels: tuple
    level_labels: Optional[Mapping[str, tuple]] = None

    def __post_init__(self):
        object.__setattr__(self, 'dimension_roots', tuple(self.dimension_roots))
        object.__setattr__(self, 'measure_labels', tuple(self.measure_labels))
        if self.level_labels is not None:
            levels = {dim: tuple(labels) for dim, labels in self.level_labels.items()}
            object.__setattr__(self, 'level_labels', MappingProxyType(levels))
        if not self.fact_label:
            raise SchemaConfigError('fact label must not be empty')
        if not self.measure_labels:
            raise SchemaConfigError('at least one measure label is required')
        labels = [self.fact_label, *self.dimension_roots, *self.measure_labels]
        for dim, level_list in (self.level_labels or {}).items():
            if dim not in self.dimension_roots:
                raise SchemaConfigError(f'levels declared for undeclared dimension {dim!r}')
            labels.extend(level_list)
        if not all(isinstance(label, str) and label for label in labels):
            raise SchemaConfigError('labels must be non-empty strings')
        duplicates = sorted({label for label in labels if labels.count(label) > 1})
        if duplicates:
            raise SchemaConfigError(f'labels must be distinct, repeated: {duplicates}')

    @classmethod
    def from_mapping(cls, raw):
        if not isinstance(raw, dict):
            raise SchemaConfigError('schema config must be a JSON object')
        unknown = set(raw) - {'fact', 'dimensions', 'measures', 'levels'}
        if unknown:
            raise SchemaConfigError(f'unknown schema config keys {sorted(unknown)}')
        try:
            return cls(fact_label=raw['fact'],
                       dimension_roots=raw.get('dimensions', ()),
                       measure_labels=raw['measures'],
                       level_labels=raw.get('levels'))
        except KeyError as exc:
            raise SchemaConfigError(f'missing schema config key {exc.args[0]!r}') from None

    def levels_of(self, dimension):
        if self.level_labels is None:
            return None
        return self.level_labels.get(dimension)


def load_schema(path):
    with open(path, encoding='utf-8') as f:
        try:
            raw = json.load(f)
        except json.JSONDecodeError as exc:
            raise SchemaConfigError(f'invalid JSON ({exc.msg}, line {exc.lineno})') from None
    return SchemaConfig.from_mapping(raw)


@dataclass(frozen=True)
class LevelInstance:
    id: str
    level_label: str
    dimension: str
    parent_refs: frozenset = frozenset()
    # Member attributes other than the key, as (label, value) pairs; not interpreted.
    payload: tuple = ()


@dataclass(frozen=True)
class FactInstance:
    node: int
    path: str
    measures: Mapping[str, Decimal]
    # dimension root label -> chains, each a tuple of (level label, member key)
    # from the most detailed element inward
    dimension_paths: Mapping[str, tuple]


@dataclass(frozen=True)
class HierarchyClass:
    strict: bool
    covering: bool
    complex: bool = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, 'complex', not self.strict and not self.covering)

    def to_dict(self):
        return {'strict': self.strict, 'covering': self.covering, 'complex': self.complex}


@dataclass(frozen=True)
class WarehouseView:
    config: SchemaConfig
    facts: tuple
    levels: Mapping[str, frozenset]

    def dimension_levels(self, dimension):
        return [instance for instances in self.levels.values()
                for instance in instances if instance.dimension == dimension]

    def measure_total(self, measure):
        return sum((fact.measures[measure] for fact in self.facts), Decimal(0))

    def top_level_values(self, dimension):
        """Members of the most general level (declared), or chain terminals otherwise."""
        if dimension not in self.config.dimension_roots:
            raise UnknownDimensionError(f'unknown dimension {dimension!r}')
        declared = self.config.levels_of(dimension)
        values = set()
        for fact in self.facts:
            for chain in fact.dimension_paths.get(dimension, ()):
                if declared:
                    values.update(key for label, key in chain if label == declared[-1])
                elif chain:
                    values.add(chain[-1][1])
        return sorted(values)


def _is_level(tree, node_id, declared):
    label = tree.label_of(node_id)
    if label.startswith(ATTRIBUTE_PREFIX):
        return False
    return declared is None or label in declared


def _chains(tree, node_id, declared):
    """Root-to-leaf chains of level elements starting at node_id."""
    head = (tree.label_of(node_id), tree.key_of(node_id) or '')
    inner = [c for c in tree.children_of(node_id) if _is_level(tree, c, declared)]
    if not inner:
        return [(head,)]
    return [(head,) + rest for c in inner for rest in _chains(tree, c, declared)]


def bind_schema(tree, config):
    """Read facts, measures and hierarchy members out of a data tree."""
    facts = []
    parents = {}
    payloads = {}
    for fact_node in tree.with_label(config.fact_label):
        path = tree.path_of(fact_node)
        children = tree.children_of(fact_node)

        measures = {}
        for measure in config.measure_labels:
            found = [c for c in children if tree.label_of(c) == measure]
            if not found:
                raise SchemaBindingError(path, f'missing measure {measure!r}')
            number = parse_measure(tree.value_of(found[0]))
            if number is None:
                raise SchemaBindingError(path, f'measure {measure!r} is not a number: '
                                               f'{tree.value_of(found[0])!r}')
            measures[measure] = number

        dimension_paths = {}
        for dimension in config.dimension_roots:
            declared = config.levels_of(dimension)
            chains = []
            for container in (c for c in children if tree.label_of(c) == dimension):
                for member in tree.children_of(container):
                    if _is_level(tree, member, declared):
                        chains.extend(_chains(tree, member, declared))
                for level_node in tree.descendants(container):
                    if not _is_level(tree, level_node, declared):
                        continue
                    key = (dimension, tree.label_of(level_node), tree.key_of(level_node) or '')
                    refs = parents.setdefault(key, set())
                    refs.update(tree.key_of(c) or '' for c in tree.children_of(level_node)
                                if _is_level(tree, c, declared))
                    payload = tuple(
                        (tree.label_of(c), tree.value_of(c)) for c in tree.children_of(level_node)
                        if not _is_level(tree, c, declared) and tree.label_of(c) != KEY_ATTRIBUTE)
                    known = payloads.setdefault(key, payload)
                    extra = tuple(pair for pair in payload if pair not in known)
                    if extra:
                        logger.warning('member %r of level <%s> repeats with a different payload; '
                                       'merging', key[2], key[1])
                        payloads[key] = known + extra
            dimension_paths[dimension] = tuple(chains)

        facts.append(FactInstance(node=fact_node, path=path,
                                  measures=MappingProxyType(measures),
                                  dimension_paths=MappingProxyType(dimension_paths)))

    if not facts:
        logger.warning('no <%s> facts found in the document', config.fact_label)

    levels = {}
    for (dimension, level_label, member), refs in sorted(parents.items()):
        instance = LevelInstance(id=member, level_label=level_label, dimension=dimension,
                                 parent_refs=frozenset(refs),
                                 payload=payloads[(dimension, level_label, member)])
        levels.setdefault(level_label, set()).add(instance)
    return WarehouseView(config=config, facts=tuple(facts),
                         levels=MappingProxyType({k: frozenset(v) for k, v in levels.items()}))


def classify_hierarchy(view, dimension):
    """Strictness and coverage of one dimension hierarchy."""
    if dimension not in view.config.dimension_roots:
        raise UnknownDimensionError(f'unknown dimension {dimension!r}')

    strict = all(len(instance.parent_refs) <= 1 for instance in view.dimension_levels(dimension))
    if strict:
        # A fact reaching one level through several chains is many-to-many too.
        for fact in view.facts:
            chains = set(fact.dimension_paths.get(dimension, ()))
            per_level = {}
            for chain in chains:
                for label in {label for label, _ in chain}:
                    per_level[label] = per_level.get(label, 0) + 1
            if any(count > 1 for count in per_level.values()):
                strict = False
                break

    declared = view.config.levels_of(dimension)
    covering = True
    if declared:
        rank = {label: i for i, label in enumerate(declared)}
        for fact in view.facts:
            for chain in fact.dimension_paths.get(dimension, ()):
                for (upper, _), (lower, _) in zip(chain, chain[1:]):
                    step = rank[lower] - rank[upper]
                    if step < 1:
                        logger.warning('%s: level %s nested in %s against the declared order',
                                       fact.path, lower, upper)
                    elif step > 1:
                        covering = False
    else:
        depths = {}
        for fact in view.facts:
            for chain in fact.dimension_paths.get(dimension, ()):
                depths.setdefault(chain[-1][0], set()).add(len(chain))
        covering = all(len(d) == 1 for d in depths.values())

    return HierarchyClass(strict=strict, covering=covering)
