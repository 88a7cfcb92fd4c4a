# utils/xmltree.py - Ordered XML data trees: parsing, serialization, navigation
import logging
from dataclasses import dataclass
from types import MappingProxyType
from typing import BinaryIO, Mapping, NewType, Optional, Union

from lxml import etree
from werkzeug.utils import cached_property

from .errors import (TreeStructureError, UnknownNodeError,
                     UnsupportedConstructError, XmlParseError)

logger = logging.getLogger(__name__)

NodeId = NewType('NodeId', int)

ATTRIBUTE_PREFIX = '@'
# Attribute leaf holding a hierarchy member's identifier, e.g. <C1 name="Software"/>
KEY_ATTRIBUTE = '@name'


def element_label(label):
    """Label of an attribute leaf written as an element: "@x" -> "x"."""
    if label.startswith(ATTRIBUTE_PREFIX):
        return label[len(ATTRIBUTE_PREFIX):]
    return label


def _is_xml_name(name):
    # Namespaces are unsupported, so "{uri}x" and prefixed names are not names here.
    if not name or name.startswith('{') or ':' in name:
        return False
    try:
        etree.QName(name)
    except ValueError:
        return False
    return True


@dataclass(frozen=True)
class DataNode:
    id: NodeId
    label: str
    value: Optional[str] = None
    children: tuple = ()

    def __post_init__(self):
        if not _is_xml_name(element_label(self.label)):
            raise TreeStructureError(f'node {self.id} has an invalid label {self.label!r}')

    @property
    def is_attribute(self):
        return self.label.startswith(ATTRIBUTE_PREFIX)


@dataclass(frozen=True, eq=False)
class DataTree:
    """An ordered labeled tree (r, N, E).

    Immutable once built; the structural indexes below are computed lazily
    and cached on the instance.
    """

    root: NodeId
    nodes: Mapping[NodeId, DataNode]

    def __post_init__(self):
        nodes = dict(self.nodes)
        object.__setattr__(self, 'nodes', MappingProxyType(nodes))
        if self.root not in nodes:
            raise TreeStructureError(f'root {self.root} is not a node of the tree')

        parents = {}
        for node_id, node in nodes.items():
            if node.id != node_id:
                raise TreeStructureError(f'node {node.id} stored under id {node_id}')
            if node.is_attribute and node.children:
                raise TreeStructureError(f'attribute {node.label} cannot have children')
            seen_attributes = set()
            has_elements = False
            for child in node.children:
                if child not in nodes:
                    raise TreeStructureError(f'node {node_id} references unknown child {child}')
                if child in parents:
                    raise TreeStructureError(f'node {child} has more than one parent')
                parents[child] = node_id
                label = nodes[child].label
                if not label.startswith(ATTRIBUTE_PREFIX):
                    has_elements = True
                else:
                    if has_elements:
                        raise TreeStructureError(
                            f'attribute {label} of node {node_id} follows an element child')
                    if label in seen_attributes:
                        raise TreeStructureError(f'node {node_id} repeats attribute {label}')
                    seen_attributes.add(label)
        if self.root in parents:
            raise TreeStructureError('the root cannot have a parent')
        if len(parents) != len(nodes) - 1:
            raise TreeStructureError('every non-root node must have exactly one parent')
        object.__setattr__(self, '_parents', parents)
        # Catches cycles detached from the root.
        if len(self._preorder) != len(nodes):
            raise TreeStructureError('some nodes are not reachable from the root')

    def __len__(self):
        return len(self.nodes)

    def __contains__(self, node_id):
        return node_id in self.nodes

    def node(self, node_id):
        try:
            return self.nodes[node_id]
        except KeyError:
            raise UnknownNodeError(f'unknown node id {node_id!r}') from None

    def label_of(self, node_id):
        return self.node(node_id).label

    def value_of(self, node_id):
        return self.node(node_id).value

    def children_of(self, node_id):
        return self.node(node_id).children

    def parent_of(self, node_id):
        self.node(node_id)
        return self._parents.get(node_id)

    def key_of(self, node_id):
        """Member key: the @name attribute value if present, else the node value."""
        for child in self.node(node_id).children:
            if self.nodes[child].label == KEY_ATTRIBUTE:
                return self.nodes[child].value or ''
        return self.nodes[node_id].value

    @cached_property
    def _preorder(self):
        order = []
        stack = [self.root]
        while stack:
            node_id = stack.pop()
            order.append(node_id)
            if len(order) > len(self.nodes):
                break
            stack.extend(reversed(self.nodes[node_id].children))
        return tuple(order)

    @cached_property
    def _spans(self):
        # node -> (preorder index, end of its subtree in preorder, exclusive)
        spans = {}
        size = {}
        for node_id in reversed(self._preorder):
            size[node_id] = 1 + sum(size[c] for c in self.nodes[node_id].children)
        for index, node_id in enumerate(self._preorder):
            spans[node_id] = (index, index + size[node_id])
        return spans

    @cached_property
    def _by_label(self):
        index = {}
        for node_id in self._preorder:
            index.setdefault(self.nodes[node_id].label, []).append(node_id)
        return {label: tuple(ids) for label, ids in index.items()}

    def preorder(self):
        return self._preorder

    def position(self, node_id):
        """Document-order rank of a node."""
        self.node(node_id)
        return self._spans[node_id][0]

    def with_label(self, label):
        return self._by_label.get(label, ())

    def is_ancestor(self, ancestor, descendant):
        """Proper ancestorship, from preorder intervals."""
        start, end = self._spans[self.node(ancestor).id]
        position = self._spans[self.node(descendant).id][0]
        return start < position < end

    def descendants(self, node_id):
        start, end = self._spans[self.node(node_id).id]
        return self._preorder[start + 1:end]

    def path_of(self, node_id):
        """Absolute child-index path such as /doc/book[1]/title[1]."""
        steps = []
        current = self.node(node_id).id
        while current != self.root:
            parent = self._parents[current]
            label = self.nodes[current].label
            if label.startswith(ATTRIBUTE_PREFIX):
                steps.append(label)
            else:
                same = [c for c in self.nodes[parent].children if self.nodes[c].label == label]
                steps.append(f'{label}[{same.index(current) + 1}]')
            current = parent
        steps.append(self.nodes[self.root].label)
        return '/' + '/'.join(reversed(steps))

    def subtree(self, node_id):
        """The subtree rooted at node_id, keeping this tree's node ids."""
        members = (self.node(node_id).id,) + self.descendants(node_id)
        return DataTree(root=node_id, nodes={n: self.nodes[n] for n in members})

    def projection(self, node_id=None):
        """(label, value, children) view, ignoring node identities."""
        node = self.node(self.root if node_id is None else node_id)
        return (node.label, node.value, tuple(self.projection(c) for c in node.children))


class TreeBuilder:
    """Builds a DataTree node by node; ids follow insertion order."""

    def __init__(self):
        self._nodes = []

    def add(self, label, value=None, parent=None):
        if parent is None and self._nodes:
            raise TreeStructureError('the tree already has a root')
        if parent is not None and not 0 <= parent < len(self._nodes):
            raise UnknownNodeError(f'unknown parent id {parent!r}')
        node_id = NodeId(len(self._nodes))
        self._nodes.append([label, value, []])
        if parent is not None:
            self._nodes[parent][2].append(node_id)
        return node_id

    def copy(self, tree, node_id, parent=None):
        """Copy node_id and its whole subtree from another tree."""
        node = tree.node(node_id)
        new_id = self.add(node.label, node.value, parent)
        for child in node.children:
            self.copy(tree, child, new_id)
        return new_id

    def build(self):
        if not self._nodes:
            raise TreeStructureError('cannot build an empty tree')
        nodes = {
            NodeId(i): DataNode(NodeId(i), label, value, tuple(children))
            for i, (label, value, children) in enumerate(self._nodes)
        }
        return DataTree(root=NodeId(0), nodes=nodes)


def _check_name(name, element):
    if name.startswith('{') or ':' in name:
        raise UnsupportedConstructError('namespace', element.sourceline)


def _reject_unsupported(root):
    docinfo = root.getroottree().docinfo
    if docinfo.doctype or docinfo.internalDTD is not None:
        raise UnsupportedConstructError('DTD')
    encoding = docinfo.encoding
    if encoding and encoding.upper().replace('-', '') != 'UTF8':
        raise UnsupportedConstructError(f'encoding {encoding}')
    outside = list(root.itersiblings(preceding=True)) + list(root.itersiblings())
    for node in outside + list(root.iter()):
        if isinstance(node, etree._ProcessingInstruction):
            raise UnsupportedConstructError('processing instruction', node.sourceline)
        if isinstance(node, etree._Entity):
            raise UnsupportedConstructError('entity reference', node.sourceline)
        if isinstance(node, etree._Element) and node.nsmap:
            raise UnsupportedConstructError('namespace', node.sourceline)


def _text_value(element):
    parts = [element.text or '']
    parts.extend(child.tail or '' for child in element)
    text = ''.join(parts).strip()
    return text or None


def parse_document(source: Union[bytes, str, BinaryIO]) -> DataTree:
    """Parse an XML document into a DataTree.

    Attributes become leaf children labeled "@name", placed before the
    element children; comments are dropped; CDATA is read as text.
    """
    if isinstance(source, str):
        data = source.encode('utf-8')
    elif isinstance(source, bytes):
        data = source
    else:
        data = source.read()

    parser = etree.XMLParser(remove_comments=True, resolve_entities=False,
                             load_dtd=False, no_network=True, strip_cdata=True)
    try:
        root = etree.fromstring(data, parser)
    except etree.XMLSyntaxError as exc:
        line, column = exc.position
        raise XmlParseError(exc.msg, line, column) from exc
    _reject_unsupported(root)

    builder = TreeBuilder()
    stack = [(root, None)]
    while stack:
        element, parent = stack.pop()
        _check_name(element.tag, element)
        node_id = builder.add(element.tag, _text_value(element), parent)
        for name, value in element.attrib.items():
            _check_name(name, element)
            builder.add(ATTRIBUTE_PREFIX + name, value, node_id)
        stack.extend((child, node_id) for child in reversed(element))

    tree = builder.build()
    logger.debug('parsed document <%s> with %d nodes', tree.label_of(tree.root), len(tree))
    return tree


def load_document(path):
    with open(path, 'rb') as f:
        return parse_document(f)


def serialize(tree: DataTree) -> bytes:
    """Emit a tree as UTF-8 XML; "@" leaves become attributes of their parent."""
    def build(node_id, parent_element):
        node = tree.nodes[node_id]
        if parent_element is None:
            element = etree.Element(node.label)
        else:
            element = etree.SubElement(parent_element, node.label)
        if node.value is not None:
            element.text = node.value
        for child in node.children:
            child_node = tree.nodes[child]
            if child_node.is_attribute:
                element.set(child_node.label[len(ATTRIBUTE_PREFIX):], child_node.value or '')
            else:
                build(child, element)
        return element

    root = build(tree.root, None)
    return etree.tostring(root, encoding='UTF-8', xml_declaration=False)


def is_subtree(candidate: DataTree, tree: DataTree) -> bool:
    """True iff candidate's nodes belong to tree and each of its edges is a tree edge."""
    for node_id, node in candidate.nodes.items():
        if node_id not in tree.nodes or tree.nodes[node_id].label != node.label:
            return False
        for child in node.children:
            if child not in tree.nodes or tree.parent_of(child) != node_id:
                return False
    return True


def descendants(tree: DataTree, node_id: NodeId):
    """Proper descendants of node_id in document order."""
    return list(tree.descendants(node_id))
