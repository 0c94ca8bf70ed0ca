"""Question-specific subgraphs: bounded expansion from schema anchors,
pruned by a lexical relevance score."""

from __future__ import annotations

from dataclasses import dataclass

from .graph_store import KnowledgeGraph, Triple, TripleIndex, resolve_entity, tokens
from .schema_gen import QuerySchema


class SubgraphError(ValueError):
    pass


@dataclass(frozen=True)
class Provenance:
    hop: int
    score: float


@dataclass(frozen=True, eq=False)
class Subgraph:
    parent: KnowledgeGraph
    index: TripleIndex
    seeds: frozenset[int]
    provenance: dict[Triple, Provenance]
    hop_budget: int
    threshold: float

    @property
    def kg(self) -> KnowledgeGraph:
        return self.parent

    @property
    def triples(self) -> tuple[Triple, ...]:
        return self.index.triples

    def node_domain(self) -> set[int]:
        return self.index.entities() | self.seeds

    def __contains__(self, triple: object) -> bool:
        return triple in self.index

    def __len__(self) -> int:
        return len(self.index)


def relevance_score(triple: Triple, question: str, schema: QuerySchema, kg: KnowledgeGraph) -> float:
    """max(1 if the relation is a schema relation, share of the triple's name
    tokens that also occur in the question)."""
    if kg.relation_names[triple.relation] in schema.relations():
        return 1.0
    triple_tokens = set(tokens(kg.format_triple(triple)))
    if not triple_tokens:
        return 0.0
    shared = triple_tokens & set(tokens(question))
    return len(shared) / len(triple_tokens)


def default_hop_budget(schema: QuerySchema) -> int:
    return len(schema.steps) + 1


def schema_seeds(kg: KnowledgeGraph, schema: QuerySchema) -> set[int]:
    anchors = schema.anchors()
    if not anchors:
        raise SubgraphError("schema has no anchored slot to expand from")
    seeds = set()
    for anchor in anchors.values():
        hits = resolve_entity(kg, anchor)
        if hits:
            seeds.add(hits[0])
    if not seeds:
        raise SubgraphError(f"no schema anchor resolves: {sorted(anchors.values())}")
    return seeds


def generate_subgraph(kg: KnowledgeGraph, question: str, schema: QuerySchema,
                      hop_budget: int | None = None, threshold: float = 0.0) -> Subgraph:
    """Breadth-first expansion from the anchors, both edge directions.

    A triple found at hop h is kept when its relevance reaches ``threshold``;
    expansion continues only through kept triples, so entities reached solely
    through pruned triples drop out with them.
    """
    if hop_budget is None:
        hop_budget = default_hop_budget(schema)
    if hop_budget < 1:
        raise ValueError("hop_budget must be positive")
    seeds = schema_seeds(kg, schema)
    provenance: dict[Triple, Provenance] = {}
    seen: set[Triple] = set()
    reached = set(seeds)
    frontier = sorted(seeds)
    for hop in range(1, hop_budget + 1):
        next_frontier: set[int] = set()
        for entity in frontier:
            for t in sorted(kg.index.incident(entity)):
                if t in seen:
                    continue
                seen.add(t)
                score = relevance_score(t, question, schema, kg)
                if score < threshold:
                    continue
                provenance[t] = Provenance(hop, score)
                for other in (t.subject, t.object):
                    if other not in reached:
                        reached.add(other)
                        next_frontier.add(other)
        frontier = sorted(next_frontier)
        if not frontier:
            break
    ordered = sorted(provenance)
    return Subgraph(kg, TripleIndex(ordered), frozenset(seeds), {t: provenance[t] for t in ordered},
                    hop_budget, threshold)
