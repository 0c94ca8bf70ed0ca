"""Backtracking pattern matcher over a triple index.

Matching uses homomorphism semantics (two pattern edges may bind the same
triple) and set semantics for results. Rows are sorted by the canonical
names of their entities before LIMIT applies, so output is deterministic.
"""

from __future__ import annotations

from collections.abc import Iterable
from dataclasses import dataclass
from typing import Protocol

from ..graph_store import KnowledgeGraph, TripleIndex, resolve_entity
from .ast import CypherQuery
from .lexer import CypherError


class CypherExecutionError(CypherError):
    pass


class GraphView(Protocol):
    """Anything the executor can match against: a KnowledgeGraph or a Subgraph."""

    @property
    def kg(self) -> KnowledgeGraph: ...

    @property
    def index(self) -> TripleIndex: ...

    def node_domain(self) -> Iterable[int]: ...


@dataclass(frozen=True)
class BindingTable:
    columns: tuple[str, ...]
    rows: tuple[tuple[int, ...], ...] = ()

    def __len__(self) -> int:
        return len(self.rows)

    def column(self, label: str) -> list[int]:
        i = self.columns.index(label)
        return [row[i] for row in self.rows]

    def named_rows(self, kg: KnowledgeGraph) -> list[tuple[str, ...]]:
        return [tuple(kg.entity_names[e] for e in row) for row in self.rows]

    def to_tsv(self, kg: KnowledgeGraph) -> str:
        lines = ["\t".join(self.columns)]
        lines += ["\t".join(r) for r in self.named_rows(kg)]
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class _Edge:
    subject: str
    relation: int
    object: str


def _normalize(query: CypherQuery, kg: KnowledgeGraph):
    """Return (variables, edges, anchors) or None when a relation is unknown."""
    variables: list[str] = []
    edges: list[_Edge] = []
    anchors: dict[str, list[str]] = {}
    anon = 0

    def name_of(node) -> str:
        nonlocal anon
        if node.var is None:
            anon += 1
            var = f"#{anon}"
        else:
            var = node.var
        if var not in variables:
            variables.append(var)
        if node.anchor is not None:
            anchors.setdefault(var, []).append(node.anchor)
        return var

    unknown = False
    for path in query.patterns:
        names = [name_of(n) for n in path.nodes]
        for i, edge in enumerate(path.edges):
            rel = kg.relation_ids.get(edge.relation)
            if rel is None:
                unknown = True
                continue
            left, right = names[i], names[i + 1]
            if edge.direction == "out":
                edges.append(_Edge(left, rel, right))
            else:
                edges.append(_Edge(right, rel, left))
    return variables, edges, anchors, unknown


def resolve_anchor(kg: KnowledgeGraph, anchor: str) -> int:
    hits = resolve_entity(kg, anchor)
    if not hits:
        raise CypherExecutionError(f"cannot resolve anchor {anchor!r}")
    return hits[0]


def _sorted_rows(rows: set[tuple[int, ...]], kg: KnowledgeGraph, limit: int | None):
    names = kg.entity_names
    ordered = sorted(rows, key=lambda r: (tuple(names[e] for e in r), r))
    if limit is not None:
        ordered = ordered[:limit]
    return tuple(ordered)


def execute(graph: GraphView, query: CypherQuery) -> BindingTable:
    kg = graph.kg
    index = graph.index
    columns = tuple(item.label for item in query.returns)
    variables, edges, anchors, unknown = _normalize(query, kg)

    allowed: dict[str, set[int]] = {}
    for var, names in anchors.items():
        ids = {resolve_anchor(kg, a) for a in names}
        allowed[var] = ids if len(ids) == 1 else set()
    if unknown:
        return BindingTable(columns)
    domain = set(graph.node_domain())
    for cond in query.filters:
        ids = set(kg.aliases.get(cond.value, ()))
        allowed[cond.var] = allowed[cond.var] & ids if cond.var in allowed else ids
    for var in list(allowed):
        allowed[var] &= domain
        if not allowed[var]:
            return BindingTable(columns)

    incident: dict[str, list[_Edge]] = {v: [] for v in variables}
    for e in edges:
        incident[e.subject].append(e)
        if e.object != e.subject:
            incident[e.object].append(e)

    def estimate(var: str) -> int:
        if var in allowed:
            return len(allowed[var])
        sizes = [len(index.by_relation.get(e.relation, ())) for e in incident[var]]
        return min(sizes) if sizes else len(domain)

    order: list[str] = []
    remaining = list(variables)
    while remaining:
        connected = [v for v in remaining if any(
            (e.subject in order or e.object in order) for e in incident[v])]
        pool = connected or remaining
        # anchored/filtered variables first, then the smallest candidate estimate
        nxt = min(pool, key=lambda v: (v not in allowed, estimate(v), variables.index(v)))
        order.append(nxt)
        remaining.remove(nxt)

    def candidates(var: str, assignment: dict[str, int]) -> set[int]:
        cands: set[int] | None = None
        for e in incident[var]:
            if e.subject == var and e.object in assignment:
                found = {t.subject for t in index.by_object.get(assignment[e.object], ()) if t.relation == e.relation}
            elif e.object == var and e.subject in assignment:
                found = {t.object for t in index.by_subject.get(assignment[e.subject], ()) if t.relation == e.relation}
            else:
                continue
            cands = found if cands is None else cands & found
            if not cands:
                return set()
        if cands is None:
            if incident[var]:
                e = incident[var][0]
                rel_triples = index.by_relation.get(e.relation, ())
                cands = {t.subject if e.subject == var else t.object for t in rel_triples}
            else:
                cands = set(domain)
        if var in allowed:
            cands &= allowed[var]
        for e in incident[var]:
            if e.subject == var and e.object == var:
                cands = {c for c in cands if (c, e.relation, c) in index}
        return cands

    positions = [variables.index(item.var) for item in query.returns]
    results: set[tuple[int, ...]] = set()
    assignment: dict[str, int] = {}

    def search(depth: int) -> None:
        if depth == len(order):
            results.add(tuple(assignment[variables[p]] for p in positions))
            return
        var = order[depth]
        for value in sorted(candidates(var, assignment)):
            assignment[var] = value
            search(depth + 1)
            del assignment[var]

    search(0)
    return BindingTable(columns, _sorted_rows(results, kg, query.limit))
