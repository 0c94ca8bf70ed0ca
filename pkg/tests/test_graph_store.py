from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kgreason.graph_store import (
    IngestionError,
    Triple,
    UnknownEntityError,
    dump_tsv,
    load_kg,
    neighbors,
    resolve_entity,
)

from .oracles import random_kg


def names(kg, triples):
    return {kg.format_triple(t) for t in triples}


def test_empty_stream():
    kg = load_kg([])
    assert kg.num_entities == 0 and len(kg.triples) == 0


def test_toy_counts(toy3):
    assert (toy3.num_entities, toy3.num_relations, len(toy3.triples)) == (4, 3, 3)
    assert toy3.entity_names == ("alice", "bob", "acme", "paris")
    assert toy3.relation_names == ("friend_of", "works_at", "located_in")


def test_duplicate_lines_collapse():
    kg = load_kg(["a\tr\tb", "a\tr\tb"])
    assert kg.triples == (Triple(0, 0, 1),)


def test_same_string_as_entity_and_relation():
    kg = load_kg(["knows\tknows\tbob"])
    assert kg.entity_ids["knows"] == 0 and kg.relation_ids["knows"] == 0


@pytest.mark.parametrize("line", ["a\tb", "a\tb\tc\td", "a\t\tc"])
def test_malformed_line_reports_line_number(line):
    with pytest.raises(IngestionError) as info:
        load_kg(["x\tr\ty", line])
    assert info.value.line == 2


def test_alias_to_unknown_entity():
    with pytest.raises(IngestionError):
        load_kg(["a\tr\tb"], ["alpha\tzed"])


def test_canonical_names_are_aliases(toy3):
    for i, name in enumerate(toy3.entity_names):
        assert i in toy3.aliases[name]


@pytest.mark.parametrize("entity,direction,expected", [
    ("alice", "outgoing", {"alice friend_of bob"}),
    ("paris", "outgoing", set()),
    ("bob", "both", {"alice friend_of bob", "bob works_at acme"}),
    ("paris", "incoming", {"acme located_in paris"}),
])
def test_neighbors_examples(toy3, entity, direction, expected):
    assert names(toy3, neighbors(toy3, toy3.entity(entity), None, direction)) == expected


def test_neighbors_relation_filter(toy3):
    bob = toy3.entity("bob")
    assert names(toy3, neighbors(toy3, bob, toy3.relation_ids["works_at"], "both")) == {"bob works_at acme"}


def test_neighbors_invalid_id(toy3):
    with pytest.raises(UnknownEntityError):
        neighbors(toy3, 99)


def test_resolve_examples(toy3):
    assert resolve_entity(toy3, "alice") == [toy3.entity("alice")]
    assert resolve_entity(toy3, "ACME") == [toy3.entity("acme")]
    assert resolve_entity(toy3, "acme corporation") == [toy3.entity("acme")]
    assert resolve_entity(toy3, "zorp") == []
    assert resolve_entity(toy3, "") == []


def test_resolve_ranking_tiers():
    kg = load_kg(["Bob\tr\tbob", "bob smith\tr\tx"])
    # exact beats case-insensitive, which beats token overlap
    assert resolve_entity(kg, "bob") == [kg.entity("bob"), kg.entity("Bob"), kg.entity("bob smith")]
    # overlap score: "smith jones" covers 1/2 of the surface for bob smith
    assert resolve_entity(kg, "smith jones") == [kg.entity("bob smith")]


def test_round_trip(toy_kg):
    triples, aliases = dump_tsv(toy_kg)
    assert load_kg(triples, aliases) == toy_kg


@settings(max_examples=200, deadline=None)
@given(st.integers(min_value=0, max_value=2**32 - 1))
def test_round_trip_random(seed):
    rng = random.Random(seed)
    kg = random_kg(rng)
    triples, aliases = dump_tsv(kg)
    again = load_kg(triples, aliases)
    assert again == kg
    assert again.index.by_subject == kg.index.by_subject
    assert again.index.by_object == kg.index.by_object


def test_index_consistency_1000_graphs():
    rng = random.Random(7)
    for _ in range(1000):
        kg = random_kg(rng)
        assert set(kg.triples) == {t for ts in kg.index.by_subject.values() for t in ts}
        assert set(kg.triples) == {t for ts in kg.index.by_relation.values() for t in ts}
        assert set(kg.triples) == {t for ts in kg.index.by_object.values() for t in ts}
        for e in range(kg.num_entities):
            for r in [None, *range(kg.num_relations)]:
                for direction in ("outgoing", "incoming", "both"):
                    expected = {
                        t for t in kg.triples
                        if (r is None or t.relation == r) and (
                            (direction != "incoming" and t.subject == e)
                            or (direction != "outgoing" and t.object == e))
                    }
                    assert neighbors(kg, e, r, direction) == expected


@settings(max_examples=100, deadline=None)
@given(st.text(alphabet="ab c", max_size=8))
def test_resolve_is_deterministic_total_order(surface):
    kg = load_kg(["a\tr\tb", "a b\tr\tc", "A\tr\tb c"], ["b a\ta"])
    first = resolve_entity(kg, surface)
    assert first == resolve_entity(kg, surface)
    assert len(first) == len(set(first))
