import itertools
import json
import random

import pytest

from kgv.errors import (
    DuplicateEntity,
    DuplicateRelation,
    GraphFrozen,
    InvalidEntity,
    PredicateKindConflict,
    ReferentialIntegrityError,
    SchemaError,
    UnknownEntity,
)
from kgv.kg import (
    Entity,
    GraphBuilder,
    canonicalize,
    find_paths,
    graph_stats,
    load_graph,
    save_graph,
)


def small_graph():
    b = GraphBuilder()
    b.add_entity(Entity("lalbagh_fort", "Lalbagh Fort", ("the Lalbagh fort",), "FAC"))
    b.add_entity(Entity("dhaka", "Dhaka", (), "GPE"))
    b.add_entity(Entity("bangladesh", "Bangladesh", (), "GPE"))
    b.add_entity(Entity("mosque", "mosque", (), "OTHER"))
    b.add_relation("lalbagh_fort", "located_in", "dhaka", "spatial")
    b.add_relation("dhaka", "capital_of", "bangladesh", "spatial")
    b.add_relation("lalbagh_fort", "religious_structure", "mosque", "structural")
    return b.build()


class TestBuilder:
    def test_add_entity_and_alias_lookup(self):
        b = GraphBuilder()
        b.add_entity(Entity("lalbagh_fort", "Lalbagh Fort", ("the Lalbagh fort",), "FAC"))
        g = b.build()
        assert len(g.entities) == 1
        assert g.resolve_surface("lalbagh fort") == "lalbagh_fort"

    def test_duplicate_entity_rejected(self):
        b = GraphBuilder()
        b.add_entity(Entity("dhaka", "Dhaka", (), "GPE"))
        with pytest.raises(DuplicateEntity):
            b.add_entity(Entity("dhaka", "Dhaka", (), "GPE"))

    def test_name_resolves_to_itself(self):
        b = GraphBuilder()
        b.add_entity(Entity("dhaka", "Dhaka", (), "GPE"))
        assert b.build().resolve_surface("dhaka") == "dhaka"

    def test_empty_name_rejected(self):
        with pytest.raises(InvalidEntity):
            GraphBuilder().add_entity(Entity("x", " ", (), "GPE"))

    def test_id_must_match_name(self):
        with pytest.raises(InvalidEntity):
            GraphBuilder().add_entity(Entity("wrong", "Dhaka", (), "GPE"))

    def test_duplicate_alias_rejected(self):
        with pytest.raises(InvalidEntity):
            GraphBuilder().add_entity(Entity("dhaka", "Dhaka", ("D", "D"), "GPE"))

    def test_relation_endpoints_must_exist(self):
        b = GraphBuilder()
        b.add_entity(Entity("dhaka", "Dhaka", (), "GPE"))
        with pytest.raises(UnknownEntity):
            b.add_relation("dhaka", "located_in", "unknown_city", "spatial")

    def test_duplicate_relation_rejected(self):
        b = GraphBuilder()
        b.add_entity(Entity("dhaka", "Dhaka", (), "GPE"))
        b.add_entity(Entity("bangladesh", "Bangladesh", (), "GPE"))
        b.add_relation("dhaka", "capital_of", "bangladesh", "spatial")
        with pytest.raises(DuplicateRelation):
            b.add_relation("dhaka", "capital_of", "bangladesh", "spatial")

    def test_predicate_kind_conflict(self):
        b = GraphBuilder()
        b.add_entity(Entity("dhaka", "Dhaka", (), "GPE"))
        b.add_entity(Entity("bangladesh", "Bangladesh", (), "GPE"))
        b.add_relation("dhaka", "capital_of", "bangladesh", "spatial")
        with pytest.raises(PredicateKindConflict):
            b.add_relation("bangladesh", "capital_of", "dhaka", "structural")

    def test_builder_freezes_after_build(self):
        b = GraphBuilder()
        b.add_entity(Entity("dhaka", "Dhaka", (), "GPE"))
        b.build()
        with pytest.raises(GraphFrozen):
            b.add_entity(Entity("bangladesh", "Bangladesh", (), "GPE"))


class TestFindPaths:
    def test_two_hop_containment_path(self, seed_graph):
        paths = find_paths(seed_graph, "lalbagh_fort", "bangladesh", 3,
                           frozenset({"located_in", "capital_of"}))
        assert len(paths) == 1
        assert [r.predicate for r in paths[0]] == ["located_in", "capital_of"]

    def test_reflexive_path(self, seed_graph):
        assert find_paths(seed_graph, "dhaka", "dhaka", 3) == [()]

    def test_no_outgoing_edges(self, seed_graph):
        assert find_paths(seed_graph, "mosque", "bangladesh", 3) == []

    def test_unknown_endpoint(self, seed_graph):
        with pytest.raises(UnknownEntity):
            find_paths(seed_graph, "lalbagh_fort", "nowhere", 3)

    def test_truncation_property(self, seed_graph):
        for src in seed_graph.entities:
            for dst in seed_graph.entities:
                for k in range(3):
                    shorter = find_paths(seed_graph, src, dst, k)
                    longer = find_paths(seed_graph, src, dst, k + 1)
                    assert shorter == [p for p in longer if len(p) <= k]

    def test_paths_chain_and_exist(self, seed_graph):
        for src in seed_graph.entities:
            for dst in seed_graph.entities:
                for path in find_paths(seed_graph, src, dst, 4):
                    for a, b in zip(path, path[1:]):
                        assert a.object == b.subject
                    for rel in path:
                        assert rel in seed_graph.relations


def brute_force_paths(relations, src, dst, max_hops):
    """Independent oracle: enumerate all relation tuples up to max_hops."""
    found = set()
    if src == dst:
        found.add(())
    for length in range(1, max_hops + 1):
        for combo in itertools.product(relations, repeat=length):
            if combo[0].subject != src or combo[-1].object != dst:
                continue
            if any(a.object != b.subject for a, b in zip(combo, combo[1:])):
                continue
            nodes = [combo[0].subject] + [r.object for r in combo]
            if len(set(nodes)) != len(nodes):
                continue
            found.add(combo)
    return found


def random_graph(rng, max_nodes=8, max_edges=14):
    b = GraphBuilder()
    n = rng.randint(2, max_nodes)
    for i in range(n):
        b.add_entity(Entity(f"n{i}", f"n{i}", (), rng.choice(["GPE", "FAC", "OTHER"])))
    kinds = {"located_in": "spatial", "capital_of": "spatial",
             "p0": "attribute", "p1": "structural"}
    tried = set()
    for _ in range(rng.randint(0, max_edges)):
        s, o = rng.randrange(n), rng.randrange(n)
        p = rng.choice(list(kinds))
        if s == o or (s, p, o) in tried:
            continue
        tried.add((s, p, o))
        b.add_relation(f"n{s}", p, f"n{o}", kinds[p])
    return b.build()


def test_find_paths_matches_brute_force_on_random_graphs():
    rng = random.Random(13)
    for _ in range(60):
        g = random_graph(rng)
        src = rng.choice(sorted(g.entities))
        dst = rng.choice(sorted(g.entities))
        expected = brute_force_paths(g.relations, src, dst, 3)
        assert set(find_paths(g, src, dst, 3)) == expected


class TestStats:
    def test_seed_graph_stats(self, seed_graph):
        s = graph_stats(seed_graph)
        assert (s.node_count, s.edge_count) == (5, 4)
        assert s.avg_degree == pytest.approx(1.6, abs=0)
        assert s.max_pairwise_path_length == 3
        assert s.avg_clustering == 0.0

    def test_empty_graph(self):
        s = graph_stats(GraphBuilder().build())
        assert (s.node_count, s.edge_count, s.avg_degree,
                s.max_pairwise_path_length, s.avg_clustering) == (0, 0, 0.0, 0, 0.0)

    def test_triangle_clustering(self):
        b = GraphBuilder()
        for name in "abc":
            b.add_entity(Entity(name, name, (), "OTHER"))
        b.add_relation("a", "p0", "b", "attribute")
        b.add_relation("b", "p0", "c", "attribute")
        b.add_relation("a", "p0", "c", "attribute")
        assert graph_stats(b.build()).avg_clustering == 1.0

    def test_degree_identity(self):
        rng = random.Random(5)
        for _ in range(25):
            g = random_graph(rng)
            s = graph_stats(g)
            if s.node_count:
                assert abs(s.avg_degree - 2 * s.edge_count / s.node_count) < 1e-12


class TestDocumentIO:
    def test_load_seed_fixture(self, seed_document):
        g = load_graph(seed_document)
        assert len(g.entities) == 5
        assert len(g.relations) == 4

    def test_round_trip_identity(self, seed_document):
        assert save_graph(load_graph(seed_document)) == canonicalize(seed_document)

    def test_round_trip_after_shuffle(self, seed_document):
        doc = json.loads(seed_document)
        doc["entities"].reverse()
        doc["relations"].reverse()
        text = json.dumps(doc)
        assert save_graph(load_graph(text)) == canonicalize(text)
        assert canonicalize(text) == canonicalize(seed_document)

    def test_missing_entity_reference(self):
        doc = {"entities": [{"id": "dhaka", "name": "Dhaka", "category": "GPE"}],
               "relations": [{"subject": "dhaka", "predicate": "located_in",
                              "object": "ghost", "kind": "spatial"}]}
        with pytest.raises(ReferentialIntegrityError):
            load_graph(json.dumps(doc))

    def test_unknown_field_rejected(self):
        doc = {"entities": [{"id": "dhaka", "name": "Dhaka", "category": "GPE",
                             "bogus": 1}], "relations": []}
        with pytest.raises(SchemaError) as err:
            load_graph(json.dumps(doc))
        assert "entities[0]" in str(err.value)

    def test_malformed_json_is_line_anchored(self):
        with pytest.raises(SchemaError) as err:
            load_graph('{\n  "entities": [,]\n}')
        assert "line 2" in str(err.value)

    def test_unknown_category_rejected(self):
        doc = {"entities": [{"id": "dhaka", "name": "Dhaka", "category": "CITY"}],
               "relations": []}
        with pytest.raises(SchemaError) as err:
            load_graph(json.dumps(doc))
        assert "category" in str(err.value)
