"""The three knowledge-representation formats and their plain-text rendering.

Formats: flat (subject, relation, object) triples, a nested containment
hierarchy, and per-entity attribute bullet facts. Rendered text layouts are
bit-exact contracts covered by golden-file tests.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Tuple, Union

from .kg import KnowledgeGraph
from .textnorm import predicate_label, predicate_words


@dataclass(frozen=True)
class Triple:
    subject: str
    relation: str
    object: str


@dataclass(frozen=True)
class BulletFact:
    entity: str
    attribute: str  # raw predicate; rendered with spaces
    value: str


@dataclass
class HierNode:
    label: str
    children: List["HierChild"] = field(default_factory=list)
    is_reference: bool = False  # cycle stop: node already shown higher up


@dataclass
class HierChild:
    predicate: str
    edge_label: str
    node: HierNode


def to_triples(graph: KnowledgeGraph) -> List[Triple]:
    """One display-name triple per relation, in canonical relation order."""
    return [Triple(graph.display_name(r.subject), r.predicate, graph.display_name(r.object))
            for r in graph.relations]


def to_hierarchy(graph: KnowledgeGraph, root: str,
                 containment_predicates: Optional[Tuple[str, ...]] = None) -> HierNode:
    """Nested view rooted at ``root``.

    Containment relations nest their object as a deeper level; all other
    relations attach as labeled leaf children. A containment cycle stops at
    the repeated entity, which becomes a reference leaf.
    """
    containment = set(containment_predicates if containment_predicates is not None
                      else graph.containment_predicates)

    def build(entity_id: str, seen: frozenset) -> HierNode:
        node = HierNode(label=graph.display_name(entity_id))
        nested, leaves = [], []
        for rel in graph.outgoing(entity_id):
            label = predicate_label(rel.predicate)
            if rel.predicate in containment:
                if rel.object in seen:
                    ref = HierNode(label=graph.display_name(rel.object), is_reference=True)
                    nested.append(HierChild(rel.predicate, label, ref))
                else:
                    nested.append(HierChild(
                        rel.predicate, label, build(rel.object, seen | {rel.object})))
            else:
                leaves.append(HierChild(
                    rel.predicate, label, HierNode(label=graph.display_name(rel.object))))
        key = lambda c: (c.predicate, c.node.label)
        node.children = sorted(nested, key=key) + sorted(leaves, key=key)
        return node

    return build(root, frozenset({graph.entity(root).id}))


def to_bullets(graph: KnowledgeGraph, entity: str) -> List[BulletFact]:
    """One attribute-value fact per outgoing relation of ``entity``."""
    ent = graph.entity(entity)
    facts = [BulletFact(ent.name, r.predicate, graph.display_name(r.object))
             for r in graph.outgoing(entity)]
    facts.sort(key=lambda f: (f.attribute, f.value))
    return facts


View = Union[List[Triple], HierNode, List[BulletFact]]


def render(view: View) -> str:
    """Deterministic plain-text rendering of any of the three views.

    Triples: one ``(s, r, o)`` per line. Bullets: one
    ``- entity: attribute value`` per line. Hierarchy: two-space indentation
    per nesting level, edge labels title-cased.
    """
    if isinstance(view, HierNode):
        lines: List[str] = []

        def emit(node: HierNode, depth: int, edge: Optional[str]) -> None:
            pad = "  " * depth
            text = node.label + (" (see above)" if node.is_reference else "")
            lines.append(f"{pad}{edge}: {text}" if edge else f"{pad}{text}")
            for child in node.children:
                emit(child.node, depth + 1, child.edge_label)

        emit(view, 0, None)
        return "\n".join(lines)
    if not view:
        return ""
    first = view[0]
    if isinstance(first, Triple):
        return "\n".join(f"({t.subject}, {t.relation}, {t.object})" for t in view)
    if isinstance(first, BulletFact):
        return "\n".join(f"- {f.entity}: {predicate_words(f.attribute)} {f.value}"
                         for f in view)
    raise TypeError(f"cannot render view of {type(first).__name__}")
