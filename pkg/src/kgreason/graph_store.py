"""Immutable in-memory triple store with alias-based entity resolution."""

from __future__ import annotations

import re
from collections.abc import Iterable
from dataclasses import dataclass, field
from typing import Literal, NamedTuple

Direction = Literal["outgoing", "incoming", "both"]

_TOKEN_RE = re.compile(r"\w+")


def tokens(text: str) -> list[str]:
    """Lowercase word tokens; underscores stay inside a token (``friend_of``)."""
    return _TOKEN_RE.findall(text.lower())


class IngestionError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class UnknownEntityError(LookupError):
    pass


class Triple(NamedTuple):
    subject: int
    relation: int
    object: int


class TripleIndex:
    """Subject / relation / object adjacency over a fixed triple collection."""

    __slots__ = ("triples", "by_subject", "by_relation", "by_object", "_members")

    def __init__(self, triples: Iterable[Triple]):
        ordered = tuple(dict.fromkeys(triples))
        by_subject: dict[int, list[Triple]] = {}
        by_relation: dict[int, list[Triple]] = {}
        by_object: dict[int, list[Triple]] = {}
        for t in ordered:
            by_subject.setdefault(t.subject, []).append(t)
            by_relation.setdefault(t.relation, []).append(t)
            by_object.setdefault(t.object, []).append(t)
        self.triples = ordered
        self.by_subject = {k: tuple(v) for k, v in by_subject.items()}
        self.by_relation = {k: tuple(v) for k, v in by_relation.items()}
        self.by_object = {k: tuple(v) for k, v in by_object.items()}
        self._members = frozenset(ordered)

    def __contains__(self, triple: object) -> bool:
        return triple in self._members

    def __len__(self) -> int:
        return len(self.triples)

    def incident(self, entity: int, relation: int | None = None,
                 direction: Direction = "both") -> set[Triple]:
        found: set[Triple] = set()
        if direction in ("outgoing", "both"):
            found.update(self.by_subject.get(entity, ()))
        if direction in ("incoming", "both"):
            found.update(self.by_object.get(entity, ()))
        if direction not in ("outgoing", "incoming", "both"):
            raise ValueError(f"unknown direction {direction!r}")
        if relation is not None:
            found = {t for t in found if t.relation == relation}
        return found

    def entities(self) -> set[int]:
        return set(self.by_subject) | set(self.by_object)


@dataclass(frozen=True, eq=False)
class KnowledgeGraph:
    entity_names: tuple[str, ...]
    relation_names: tuple[str, ...]
    index: TripleIndex
    aliases: dict[str, frozenset[int]]
    entity_ids: dict[str, int] = field(init=False, repr=False)
    relation_ids: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "entity_ids", {n: i for i, n in enumerate(self.entity_names)})
        object.__setattr__(self, "relation_ids", {n: i for i, n in enumerate(self.relation_names)})

    @property
    def kg(self) -> KnowledgeGraph:
        return self

    @property
    def triples(self) -> tuple[Triple, ...]:
        return self.index.triples

    @property
    def num_entities(self) -> int:
        return len(self.entity_names)

    @property
    def num_relations(self) -> int:
        return len(self.relation_names)

    def node_domain(self) -> range:
        return range(len(self.entity_names))

    def name(self, entity: int) -> str:
        return self.entity_names[entity]

    def relation_name(self, relation: int) -> str:
        return self.relation_names[relation]

    def entity(self, name: str) -> int:
        try:
            return self.entity_ids[name]
        except KeyError:
            raise UnknownEntityError(name) from None

    def relation_frequency(self, relation: int) -> int:
        return len(self.index.by_relation.get(relation, ()))

    def format_triple(self, t: Triple) -> str:
        return f"{self.entity_names[t.subject]} {self.relation_names[t.relation]} {self.entity_names[t.object]}"

    def snapshot(self) -> tuple:
        """Structural value used for equality checks in tests and round trips."""
        return (
            self.entity_names,
            self.relation_names,
            self.index.triples,
            tuple(sorted((a, tuple(sorted(ids))) for a, ids in self.aliases.items())),
        )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, KnowledgeGraph):
            return NotImplemented
        return self.snapshot() == other.snapshot()

    def __hash__(self) -> int:
        return hash(self.snapshot())


def _split(line: str, lineno: int, kind: str, fields: int) -> list[str] | None:
    line = line.rstrip("\n").rstrip("\r")
    if not line.strip():
        return None
    parts = line.split("\t")
    if len(parts) != fields or any(not p for p in parts):
        raise IngestionError(f"malformed {kind} line: expected {fields} tab-separated fields, got {len(parts)}", lineno)
    return parts


def load_kg(triple_source: Iterable[str], alias_source: Iterable[str] | None = None) -> KnowledgeGraph:
    """Build a graph from TSV lines. Ids follow first appearance; blank lines are skipped."""
    entity_ids: dict[str, int] = {}
    relation_ids: dict[str, int] = {}
    triples: list[Triple] = []
    for lineno, line in enumerate(triple_source, start=1):
        parts = _split(line, lineno, "triple", 3)
        if parts is None:
            continue
        s, r, o = parts
        sid = entity_ids.setdefault(s, len(entity_ids))
        rid = relation_ids.setdefault(r, len(relation_ids))
        oid = entity_ids.setdefault(o, len(entity_ids))
        triples.append(Triple(sid, rid, oid))

    aliases: dict[str, set[int]] = {name: {i} for name, i in entity_ids.items()}
    if alias_source is not None:
        for lineno, line in enumerate(alias_source, start=1):
            parts = _split(line, lineno, "alias", 2)
            if parts is None:
                continue
            alias, canonical = parts
            if canonical not in entity_ids:
                raise IngestionError(f"alias {alias!r} references unknown entity {canonical!r}", lineno)
            aliases.setdefault(alias, set()).add(entity_ids[canonical])

    return KnowledgeGraph(
        entity_names=tuple(entity_ids),
        relation_names=tuple(relation_ids),
        index=TripleIndex(triples),
        aliases={a: frozenset(ids) for a, ids in aliases.items()},
    )


def load_kg_files(triple_path, alias_path=None) -> KnowledgeGraph:
    with open(triple_path, encoding="utf-8") as tf:
        if alias_path is None:
            return load_kg(tf)
        with open(alias_path, encoding="utf-8") as af:
            return load_kg(tf, af)


def dump_tsv(kg: KnowledgeGraph) -> tuple[list[str], list[str]]:
    """Serialize to (triple lines, alias lines). Reloading yields an equal graph.

    Triples are written in load order, the only order that reproduces
    first-appearance ids; alias lines are sorted.
    """
    triple_lines = [
        f"{kg.entity_names[t.subject]}\t{kg.relation_names[t.relation]}\t{kg.entity_names[t.object]}\n"
        for t in kg.triples
    ]
    alias_lines = sorted(
        f"{alias}\t{kg.entity_names[i]}\n"
        for alias, ids in kg.aliases.items()
        for i in ids
        if alias != kg.entity_names[i]
    )
    return triple_lines, alias_lines


def neighbors(kg: KnowledgeGraph, entity: int, relation: int | None = None,
              direction: Direction = "outgoing") -> set[Triple]:
    if not 0 <= entity < kg.num_entities:
        raise UnknownEntityError(f"no entity with id {entity}")
    if relation is not None and not 0 <= relation < kg.num_relations:
        raise UnknownEntityError(f"no relation with id {relation}")
    return kg.index.incident(entity, relation, direction)


def resolve_entity(kg: KnowledgeGraph, surface: str) -> list[int]:
    """Rank entities for a surface string.

    Exact alias matches come first, then case-insensitive matches, then
    entities whose aliases share tokens with the surface (by the fraction of
    surface tokens covered). Ties go to the lower id.
    """
    exact = kg.aliases.get(surface)
    folded = " ".join(surface.lower().split())
    surface_tokens = set(tokens(surface))
    best: dict[int, tuple[int, float]] = {}

    def offer(entity: int, key: tuple[int, float]) -> None:
        if entity not in best or key < best[entity]:
            best[entity] = key

    if exact:
        for e in exact:
            offer(e, (0, 0.0))
    for alias, ids in kg.aliases.items():
        if " ".join(alias.lower().split()) == folded and folded:
            for e in ids:
                offer(e, (1, 0.0))
            continue
        if not surface_tokens:
            continue
        shared = surface_tokens.intersection(tokens(alias))
        if shared:
            score = len(shared) / len(surface_tokens)
            for e in ids:
                offer(e, (2, -score))
    return sorted(best, key=lambda e: (best[e], e))
