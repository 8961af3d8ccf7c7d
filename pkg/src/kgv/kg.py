"""Typed directed knowledge graph: construction, traversal, statistics, I/O.

The graph is built through :class:`GraphBuilder` and frozen into an immutable
:class:`KnowledgeGraph`. Relations are directed, predicate-typed, and unique
per (subject, predicate, object); multiple predicates between the same pair
of entities are allowed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

import networkx as nx

from .errors import (
    DuplicateEntity,
    DuplicateRelation,
    GraphFrozen,
    InvalidEntity,
    PredicateKindConflict,
    ReferentialIntegrityError,
    SchemaError,
    UnknownEntity,
)
from .textnorm import canonical_id, normalize_mention

CATEGORIES = ("FAC", "GPE", "ORG", "LOC", "OTHER")
RELATION_KINDS = ("spatial", "structural", "attribute")

DEFAULT_CONTAINMENT = ("located_in", "capital_of")
DEFAULT_FUNCTIONAL = ("located_in", "capital_of")


@dataclass(frozen=True)
class Entity:
    id: str
    name: str
    aliases: Tuple[str, ...] = ()
    category: str = "OTHER"

    def surface_forms(self) -> Tuple[str, ...]:
        return (self.name,) + self.aliases


@dataclass(frozen=True)
class Relation:
    subject: str
    predicate: str
    object: str
    kind: str


# A path is an ordered chain of relations, consecutive relations linking
# object -> subject. The empty tuple is the reflexive path.
Path = Tuple[Relation, ...]


@dataclass(frozen=True)
class GraphStats:
    node_count: int
    edge_count: int
    avg_degree: float
    max_pairwise_path_length: int
    avg_clustering: float


def _validate_entity(entity: Entity) -> None:
    if not entity.name or not entity.name.strip():
        raise InvalidEntity("entity name must be non-empty")
    if entity.category not in CATEGORIES:
        raise InvalidEntity(f"unknown category {entity.category!r}")
    if entity.id != canonical_id(entity.name):
        raise InvalidEntity(
            f"id {entity.id!r} does not match canonical form of name "
            f"{entity.name!r} ({canonical_id(entity.name)!r})"
        )
    seen = set()
    for alias in entity.aliases:
        if not alias or not alias.strip():
            raise InvalidEntity(f"entity {entity.id}: blank alias")
        if alias in seen:
            raise InvalidEntity(f"entity {entity.id}: duplicate alias {alias!r}")
        seen.add(alias)


class GraphBuilder:
    """Single-owner accumulator; ``build()`` freezes it permanently."""

    def __init__(self, containment_predicates: Iterable[str] = DEFAULT_CONTAINMENT,
                 functional_predicates: Iterable[str] = DEFAULT_FUNCTIONAL):
        self._entities: Dict[str, Entity] = {}
        self._relations: List[Relation] = []
        self._triples = set()
        self._predicate_kinds: Dict[str, str] = {}
        self._containment = tuple(containment_predicates)
        self._functional = tuple(functional_predicates)
        self._frozen = False

    def _check_open(self) -> None:
        if self._frozen:
            raise GraphFrozen("builder already produced a graph")

    def add_entity(self, entity: Entity) -> "GraphBuilder":
        self._check_open()
        _validate_entity(entity)
        if entity.id in self._entities:
            raise DuplicateEntity(entity.id)
        self._entities[entity.id] = entity
        return self

    def add_relation(self, subject: str, predicate: str, object: str, kind: str) -> "GraphBuilder":
        self._check_open()
        for endpoint in (subject, object):
            if endpoint not in self._entities:
                raise UnknownEntity(endpoint)
        if kind not in RELATION_KINDS:
            raise SchemaError(f"unknown relation kind {kind!r}")
        prior = self._predicate_kinds.get(predicate)
        if prior is not None and prior != kind:
            raise PredicateKindConflict(
                f"predicate {predicate!r} already declared {prior!r}, got {kind!r}")
        if (subject, predicate, object) in self._triples:
            raise DuplicateRelation(f"({subject}, {predicate}, {object})")
        self._predicate_kinds[predicate] = kind
        self._triples.add((subject, predicate, object))
        self._relations.append(Relation(subject, predicate, object, kind))
        return self

    def build(self) -> "KnowledgeGraph":
        self._check_open()
        self._frozen = True
        return KnowledgeGraph(
            entities=dict(self._entities),
            relations=tuple(sorted(
                self._relations, key=lambda r: (r.subject, r.predicate, r.object))),
            predicate_kinds=dict(self._predicate_kinds),
            containment_predicates=self._containment,
            functional_predicates=self._functional,
        )


@dataclass(frozen=True)
class KnowledgeGraph:
    entities: Dict[str, Entity]
    relations: Tuple[Relation, ...]
    predicate_kinds: Dict[str, str]
    containment_predicates: Tuple[str, ...] = DEFAULT_CONTAINMENT
    functional_predicates: Tuple[str, ...] = DEFAULT_FUNCTIONAL
    _surface_index: Dict[str, str] = field(default_factory=dict, repr=False, compare=False)
    _out: Dict[str, Tuple[Relation, ...]] = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        for rel in self.relations:
            for endpoint in (rel.subject, rel.object):
                if endpoint not in self.entities:
                    raise ReferentialIntegrityError(
                        f"relation ({rel.subject}, {rel.predicate}, {rel.object}) "
                        f"references unknown entity {endpoint!r}")
        surface: Dict[str, str] = {}
        for eid in sorted(self.entities):
            ent = self.entities[eid]
            for form in ent.surface_forms():
                surface.setdefault(normalize_mention(form), eid)
            surface.setdefault(eid, eid)
        out: Dict[str, List[Relation]] = {eid: [] for eid in self.entities}
        for rel in self.relations:
            out[rel.subject].append(rel)
        object.__setattr__(self, "_surface_index", surface)
        object.__setattr__(self, "_out", {k: tuple(v) for k, v in out.items()})

    def entity(self, entity_id: str) -> Entity:
        try:
            return self.entities[entity_id]
        except KeyError:
            raise UnknownEntity(entity_id) from None

    def display_name(self, entity_id: str) -> str:
        return self.entity(entity_id).name

    def resolve_surface(self, normalized: str) -> Optional[str]:
        """Entity id whose name/alias/id normalizes to ``normalized``, if any."""
        return self._surface_index.get(normalized)

    def surface_index(self) -> Dict[str, str]:
        return dict(self._surface_index)

    def outgoing(self, entity_id: str) -> Tuple[Relation, ...]:
        if entity_id not in self.entities:
            raise UnknownEntity(entity_id)
        return self._out[entity_id]

    def has_triple(self, subject: str, predicate: str, object: str) -> bool:
        return any(r.predicate == predicate and r.object == object
                   for r in self.outgoing(subject))

    def objects_of(self, subject: str, predicate: str) -> Tuple[str, ...]:
        return tuple(r.object for r in self.outgoing(subject) if r.predicate == predicate)


def find_paths(graph: KnowledgeGraph, source: str, target: str, max_hops: int,
               predicate_filter: Optional[FrozenSet[str]] = None) -> List[Path]:
    """All simple directed paths source -> target with at most ``max_hops`` edges.

    When source == target the single reflexive (empty) path is returned.
    Results are ordered shortest first, then lexicographically by their
    (predicate, object) edge sequence.
    """
    graph.entity(source)
    graph.entity(target)
    if max_hops < 0:
        raise ValueError("max_hops must be >= 0")
    results: List[Path] = []

    def walk(node: str, visited: FrozenSet[str], trail: Tuple[Relation, ...]) -> None:
        if node == target and (trail or source == target):
            results.append(trail)
            # target may still be an interior node of a longer simple path
            # only when it equals the source; simple paths cannot revisit it.
            return
        if len(trail) == max_hops:
            return
        for rel in graph.outgoing(node):
            if predicate_filter is not None and rel.predicate not in predicate_filter:
                continue
            if rel.object in visited:
                continue
            walk(rel.object, visited | {rel.object}, trail + (rel,))

    if source == target:
        results.append(())
    else:
        walk(source, frozenset({source}), ())
    results.sort(key=lambda p: (len(p), tuple((r.predicate, r.object) for r in p)))
    return results


def graph_stats(graph: KnowledgeGraph) -> GraphStats:
    """Node/edge counts plus degree, diameter, and clustering summaries.

    Degree and clustering use the undirected sense: avg_degree is
    2·|relations|/|entities|, clustering is the mean local clustering
    coefficient of the undirected simple projection, and
    max_pairwise_path_length is the longest shortest path over connected
    undirected pairs.
    """
    n = len(graph.entities)
    m = len(graph.relations)
    if n == 0:
        return GraphStats(0, 0, 0.0, 0, 0.0)
    g = nx.Graph()
    g.add_nodes_from(graph.entities)
    g.add_edges_from((r.subject, r.object) for r in graph.relations if r.subject != r.object)
    longest = 0
    for _, lengths in nx.all_pairs_shortest_path_length(g):
        longest = max(longest, max(lengths.values()))
    return GraphStats(
        node_count=n,
        edge_count=m,
        avg_degree=2.0 * m / n,
        max_pairwise_path_length=longest,
        avg_clustering=nx.average_clustering(g) if g.number_of_edges() else 0.0,
    )


_ENTITY_FIELDS = {"id", "name", "aliases", "category"}
_RELATION_FIELDS = {"subject", "predicate", "object", "kind"}


def _require_type(value, typ, where):
    if not isinstance(value, typ):
        raise SchemaError(f"expected {typ.__name__}, got {type(value).__name__}",
                          location=where)
    return value


def _parse_document(document) -> dict:
    if isinstance(document, (str, bytes)):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"invalid JSON: {exc.msg}",
                              location=f"line {exc.lineno}") from exc
    return _require_type(document, dict, "top-level")


def _validated_sections(doc: dict):
    unknown = set(doc) - {"entities", "relations"}
    if unknown:
        raise SchemaError(f"unknown top-level fields {sorted(unknown)}", location="top-level")
    for key in ("entities", "relations"):
        if key not in doc:
            raise SchemaError(f"missing required field {key!r}", location="top-level")
    entities = _require_type(doc["entities"], list, "entities")
    relations = _require_type(doc["relations"], list, "relations")

    ent_dicts = []
    for i, raw in enumerate(entities):
        where = f"entities[{i}]"
        _require_type(raw, dict, where)
        unknown = set(raw) - _ENTITY_FIELDS
        if unknown:
            raise SchemaError(f"unknown fields {sorted(unknown)}", location=where)
        for req in ("id", "name", "category"):
            if req not in raw:
                raise SchemaError(f"missing field {req!r}", location=where)
            _require_type(raw[req], str, f"{where}.{req}")
        aliases = raw.get("aliases", [])
        _require_type(aliases, list, f"{where}.aliases")
        for j, alias in enumerate(aliases):
            _require_type(alias, str, f"{where}.aliases[{j}]")
        if raw["category"] not in CATEGORIES:
            raise SchemaError(f"unknown category {raw['category']!r}",
                              location=f"{where}.category")
        ent_dicts.append({"id": raw["id"], "name": raw["name"],
                          "aliases": list(aliases), "category": raw["category"]})

    rel_dicts = []
    for i, raw in enumerate(relations):
        where = f"relations[{i}]"
        _require_type(raw, dict, where)
        unknown = set(raw) - _RELATION_FIELDS
        if unknown:
            raise SchemaError(f"unknown fields {sorted(unknown)}", location=where)
        for req in _RELATION_FIELDS:
            if req not in raw:
                raise SchemaError(f"missing field {req!r}", location=where)
            _require_type(raw[req], str, f"{where}.{req}")
        if raw["kind"] not in RELATION_KINDS:
            raise SchemaError(f"unknown kind {raw['kind']!r}", location=f"{where}.kind")
        rel_dicts.append(dict(raw))
    return ent_dicts, rel_dicts


def _canonical_dump(ent_dicts, rel_dicts) -> str:
    doc = {
        "entities": sorted(ent_dicts, key=lambda e: e["id"]),
        "relations": sorted(rel_dicts, key=lambda r: (r["subject"], r["predicate"], r["object"])),
    }
    return json.dumps(doc, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def canonicalize(document) -> str:
    """Canonical serialized form of a KG document (sorted, defaulted, stable)."""
    ent_dicts, rel_dicts = _validated_sections(_parse_document(document))
    return _canonical_dump(ent_dicts, rel_dicts)


def load_graph(document) -> KnowledgeGraph:
    """Parse and validate a KG document into a frozen KnowledgeGraph."""
    ent_dicts, rel_dicts = _validated_sections(_parse_document(document))
    builder = GraphBuilder()
    ids = set()
    for i, ent in enumerate(ent_dicts):
        try:
            builder.add_entity(Entity(ent["id"], ent["name"],
                                      tuple(ent["aliases"]), ent["category"]))
        except (InvalidEntity, DuplicateEntity) as exc:
            raise SchemaError(str(exc), location=f"entities[{i}]") from exc
        ids.add(ent["id"])
    for i, rel in enumerate(rel_dicts):
        for endpoint in (rel["subject"], rel["object"]):
            if endpoint not in ids:
                raise ReferentialIntegrityError(
                    f"relations[{i}]: unknown entity {endpoint!r}")
        try:
            builder.add_relation(rel["subject"], rel["predicate"], rel["object"], rel["kind"])
        except (PredicateKindConflict, DuplicateRelation) as exc:
            raise SchemaError(str(exc), location=f"relations[{i}]") from exc
    return builder.build()


def save_graph(graph: KnowledgeGraph) -> str:
    """Serialize a graph to its canonical document text."""
    ent_dicts = [{"id": e.id, "name": e.name, "aliases": list(e.aliases),
                  "category": e.category} for e in graph.entities.values()]
    rel_dicts = [{"subject": r.subject, "predicate": r.predicate,
                  "object": r.object, "kind": r.kind} for r in graph.relations]
    return _canonical_dump(ent_dicts, rel_dicts)
