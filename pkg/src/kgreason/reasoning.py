"""Question answering over a knowledge graph guided by a query schema.

The pipeline compiles the schema to a graph query and executes it (direct
reasoning). It checks the answers against the question subgraph, and when
that fails it walks the schema step by step over the subgraph and runs a
hypothesize-and-verify repair loop. Surviving reasoning paths are combined
by confidence-weighted voting.

Confidences are exact fractions so that ties are ties.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Any, Literal

from .cypher import BindingTable, CypherExecutionError, execute, render
from .graph_store import KnowledgeGraph, Triple, resolve_entity, tokens
from .llm_provider import CompletionRequest, Provider, ProviderError, Tag
from .schema_gen import (
    DEFAULT_SAMPLE_SIZE,
    DEFAULT_SCHEMA_TEMPLATE,
    QuerySchema,
    SchemaError,
    SchemaGenerationError,
    SchemaTriple,
    build_schema,
    compile_schema,
    fill_template,
    generate_schema,
    parse_schema_text,
    sample_triples,
    validate_schema,
)
from .subgraph_gen import Subgraph, SubgraphError, generate_subgraph

logger = logging.getLogger(__name__)

Origin = Literal["direct", "stepwise", "collaborative"]
Variant = Literal["full", "no_schema", "no_retrieval", "io_prompt"]
VARIANTS: tuple[str, ...] = ("full", "no_schema", "no_retrieval", "io_prompt")

ANSWER_TEMPLATE = """\
Select the answer to the question from the candidates below.
Evidence from the knowledge graph:
{evidence}
Candidates: {candidates}
Question: {question}
Reply with one candidate name."""

HYPOTHESIS_TEMPLATE = """\
A query schema failed to answer the question over the knowledge graph.
Failed schema:
{schema}
Problems: {diagnostics}
Relations available: {relations}
Facts near the question entities:
{triples}
Propose a revised schema in the same format, ending with ANSWER <slot>.
Question: {question}
Schema:"""

SCHEMA_ONLY_TEMPLATE = """\
Answer the question by following this reasoning schema, without graph lookups.
Schema:
{schema}
Question: {question}
Reply with entity names, one per line."""

IO_TEMPLATE = """\
Answer from your own knowledge.
Question: {question}
Reply with entity names, one per line."""


@dataclass(frozen=True)
class ReasonerConfig:
    variant: Variant = "full"
    hop_budget: int | None = None
    relevance_threshold: float = 0.0
    max_iterations: int = 3
    sample_size: int = DEFAULT_SAMPLE_SIZE
    top_weight: Fraction = Fraction(1)
    other_weight: Fraction = Fraction(1, 2)
    schema_template: str = DEFAULT_SCHEMA_TEMPLATE
    answer_template: str = ANSWER_TEMPLATE
    hypothesis_template: str = HYPOTHESIS_TEMPLATE
    schema_only_template: str = SCHEMA_ONLY_TEMPLATE
    io_template: str = IO_TEMPLATE

    def __post_init__(self) -> None:
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be positive")
        if self.hop_budget is not None and self.hop_budget < 1:
            raise ValueError("hop_budget must be positive")


@dataclass(frozen=True)
class ReasoningStep:
    schema_step: SchemaTriple
    bindings: BindingTable
    evidence: frozenset[Triple]
    step_confidence: Fraction


@dataclass(frozen=True)
class ReasoningPath:
    steps: tuple[ReasoningStep, ...]
    answer_candidates: tuple[int, ...]
    origin: Origin
    schema: QuerySchema | None = field(default=None, compare=False)
    failed_step: int | None = None
    verified: bool = field(default=False, compare=False)

    @property
    def confidence(self) -> Fraction:
        conf = Fraction(1)
        for step in self.steps:
            conf *= step.step_confidence
        return conf


@dataclass(frozen=True)
class Answer:
    entities: tuple[int, ...] = ()
    support: tuple[ReasoningPath, ...] = ()
    scores: tuple[Fraction, ...] = ()

    @property
    def status(self) -> Literal["answered", "abstained"]:
        return "answered" if self.entities else "abstained"

    @property
    def answered(self) -> bool:
        return bool(self.entities)

    def names(self, kg: KnowledgeGraph) -> list[str]:
        return [kg.entity_names[e] for e in self.entities]


ABSTAINED = Answer()


class Trace:
    """Stage-by-stage record of one pipeline run, serializable to JSON."""

    def __init__(self, question: str, variant: str):
        self.question = question
        self.variant = variant
        self.stages: list[dict[str, Any]] = []
        self.failure_stage: str | None = None

    def add(self, stage: str, **data: Any) -> None:
        self.stages.append({"stage": stage, **data})

    def fail(self, stage: str, reason: str) -> None:
        self.failure_stage = stage
        self.add(stage, failed=True, reason=reason)

    def to_dict(self, answer: Answer | None = None, kg: KnowledgeGraph | None = None) -> dict[str, Any]:
        doc: dict[str, Any] = {"question": self.question, "variant": self.variant, "stages": self.stages}
        if answer is not None and kg is not None:
            doc["answer"] = {
                "status": answer.status,
                "entities": answer.names(kg),
                "scores": [float(s) for s in answer.scores],
                "support": [path_to_dict(p, kg) for p in answer.support],
            }
        doc["failure_stage"] = self.failure_stage
        return doc


def table_to_dict(table: BindingTable, kg: KnowledgeGraph) -> dict[str, Any]:
    return {"columns": list(table.columns), "rows": [list(r) for r in table.named_rows(kg)]}


def path_to_dict(path: ReasoningPath, kg: KnowledgeGraph) -> dict[str, Any]:
    return {
        "origin": path.origin,
        "schema": path.schema.text() if path.schema is not None else None,
        "confidence": float(path.confidence),
        "candidates": [kg.entity_names[e] for e in path.answer_candidates],
        "failed_step": path.failed_step,
        "steps": [
            {
                "step": f"({s.schema_step.subject.name}) {s.schema_step.relation} ({s.schema_step.object.name})",
                "bindings": table_to_dict(s.bindings, kg),
                "evidence": sorted(kg.format_triple(t) for t in s.evidence),
                "confidence": float(s.step_confidence),
            }
            for s in path.steps
        ],
    }


# -- helpers -------------------------------------------------------------------

def ordered_steps(schema: QuerySchema) -> list[SchemaTriple]:
    """Schema steps re-sequenced so each one touches an already-bound slot when
    possible, starting from the anchors; otherwise text order is kept."""
    bound = set(schema.anchors())
    remaining = list(schema.steps)
    ordered: list[SchemaTriple] = []
    while remaining:
        nxt = next((s for s in remaining if bound & set(s.slots)), remaining[0])
        remaining.remove(nxt)
        ordered.append(nxt)
        bound.update(nxt.slots)
    return ordered


def _resolve_anchors(kg: KnowledgeGraph, schema: QuerySchema) -> dict[str, int] | None:
    bound = {}
    for slot, anchor in schema.anchors().items():
        hits = resolve_entity(kg, anchor)
        if not hits:
            return None
        bound[slot] = hits[0]
    return bound


def _by_name(kg: KnowledgeGraph, entities) -> list[int]:
    return sorted(set(entities), key=lambda e: (kg.entity_names[e], e))


def _step_record(kg: KnowledgeGraph, step: SchemaTriple, rows: list[dict[str, int]],
                 bound: set[str]) -> ReasoningStep:
    s, o = step.slots
    rel = kg.relation_ids[step.relation]
    pairs = {(r[s], r[o]) for r in rows}
    new = [x for x in step.slots if x not in bound]
    distinct = {tuple(r[x] for x in new) for r in rows}
    conf = Fraction(1, len(distinct)) if new else Fraction(1)
    table = BindingTable((s, o), tuple(sorted(pairs, key=lambda p: (kg.entity_names[p[0]], kg.entity_names[p[1]], p))))
    evidence = frozenset(Triple(a, rel, b) for a, b in pairs)
    return ReasoningStep(step, table, evidence, conf)


def _rank_candidates(kg: KnowledgeGraph, rows: list[dict[str, int]], answer_slot: str) -> tuple[int, ...]:
    counts: dict[int, int] = {}
    for r in rows:
        counts[r[answer_slot]] = counts.get(r[answer_slot], 0) + 1
    return tuple(sorted(counts, key=lambda e: (-counts[e], kg.entity_names[e], e)))


def _clamp_reply(kg: KnowledgeGraph, text: str) -> list[int]:
    picked: list[int] = []
    for line in text.splitlines():
        line = line.strip().strip(".").strip()
        if not line:
            continue
        hits = resolve_entity(kg, line)
        if hits and hits[0] not in picked:
            picked.append(hits[0])
    return picked


def _ask(provider: Provider | None, prompt: str, tag: Tag) -> str | None:
    if provider is None:
        return None
    try:
        return provider.complete(CompletionRequest(prompt, tag)).text
    except ProviderError as exc:
        logger.info("provider call (%s) failed: %s", tag.value, exc)
        return None


# -- reasoning operations ----------------------------------------------------------

def direct_reason(question: str, schema: QuerySchema, kg: KnowledgeGraph, provider: Provider | None,
                  config: ReasonerConfig = ReasonerConfig(), trace: Trace | None = None) -> Answer:
    """Compile, execute on the full graph, and let the provider pick among the results.

    A provider reply that is not one of the executed candidates is ignored.
    """
    slots = schema.slot_names()
    query = compile_schema(schema, return_slots=slots)
    try:
        table = execute(kg, query)
    except CypherExecutionError as exc:
        if trace is not None:
            trace.add("direct", query=render(compile_schema(schema)), error=str(exc), candidates=[])
        return ABSTAINED
    rows = [dict(zip(slots, row)) for row in table.rows]
    if not rows:
        if trace is not None:
            trace.add("direct", query=render(compile_schema(schema)), candidates=[])
        return ABSTAINED

    bound = set(schema.anchors())
    steps = []
    for step in ordered_steps(schema):
        steps.append(_step_record(kg, step, rows, bound))
        bound.update(step.slots)
    candidates = _by_name(kg, (r[schema.answer_slot] for r in rows))

    evidence = sorted({t for s in steps for t in s.evidence})
    prompt = fill_template(
        config.answer_template,
        question=question,
        evidence="\n".join(kg.format_triple(t) for t in evidence),
        candidates=", ".join(kg.entity_names[c] for c in candidates),
    )
    reply = _ask(provider, prompt, Tag.ANSWER)
    chosen = next((e for e in _clamp_reply(kg, reply or "") if e in candidates), None)
    if chosen is not None:
        candidates.remove(chosen)
        candidates.insert(0, chosen)
    path = ReasoningPath(tuple(steps), tuple(candidates), "direct", schema)
    if trace is not None:
        trace.add("direct", query=render(compile_schema(schema)), bindings=table_to_dict(table, kg),
                  provider_reply=reply, candidates=[kg.entity_names[c] for c in candidates])
    return Answer(tuple(candidates), (path,), tuple(path.confidence for _ in candidates))


def stepwise_reason(schema: QuerySchema, subgraph: Subgraph, origin: Origin = "stepwise") -> ReasoningPath:
    """Follow the schema one step at a time over the subgraph.

    Partial bindings that cannot be extended by a later step are dropped.
    A step's confidence is one over the number of distinct values its new
    slots take among the surviving bindings.
    """
    kg = subgraph.kg
    index = subgraph.index
    anchors = _resolve_anchors(kg, schema)
    if anchors is None:
        return ReasoningPath((), (), origin, schema, failed_step=0)
    rows: list[dict[str, int]] = [anchors]
    bound = set(anchors)
    steps: list[ReasoningStep] = []
    for i, step in enumerate(ordered_steps(schema)):
        rel = kg.relation_ids.get(step.relation)
        if rel is None:
            return ReasoningPath(tuple(steps), (), origin, schema, failed_step=i)
        s, o = step.slots
        extended: dict[tuple, dict[str, int]] = {}
        for row in rows:
            if s in row:
                found = (t for t in index.by_subject.get(row[s], ()) if t.relation == rel)
            elif o in row:
                found = (t for t in index.by_object.get(row[o], ()) if t.relation == rel)
            else:
                found = iter(index.by_relation.get(rel, ()))
            for t in found:
                if row.get(s, t.subject) != t.subject or row.get(o, t.object) != t.object:
                    continue
                new_row = {**row, s: t.subject, o: t.object}
                extended.setdefault(tuple(sorted(new_row.items())), new_row)
        if not extended:
            return ReasoningPath(tuple(steps), (), origin, schema, failed_step=i)
        # earlier steps' records keep their own counts; refinement only shrinks rows
        rows = list(extended.values())
        steps.append(_step_record(kg, step, rows, bound))
        bound.update(step.slots)
    return ReasoningPath(tuple(steps), _rank_candidates(kg, rows, schema.answer_slot), origin, schema)


def validate_answer(candidate: Answer, schema: QuerySchema, subgraph: Subgraph | None) -> bool:
    """True iff every answered entity is an answer-slot binding of the schema on the subgraph."""
    if not candidate.answered or subgraph is None:
        return False
    try:
        table = execute(subgraph, compile_schema(schema))
    except CypherExecutionError:
        return False
    allowed = set(table.column(schema.answer_slot))
    return all(e in allowed for e in candidate.entities)


def _path_answer(path: ReasoningPath) -> Answer:
    return Answer(path.answer_candidates, (path,)) if path.answer_candidates else ABSTAINED


def _relation_parts(name: str) -> set[str]:
    return {p for t in tokens(name) for p in t.split("_") if p}


def mutate_schema(schema: QuerySchema, kg: KnowledgeGraph) -> QuerySchema | None:
    """Deterministic repair used when the provider offers no usable hypothesis.

    First choice: replace the first unknown relation by the known relation
    sharing the most name parts with it (more frequent relation, then lower
    id, on ties). Otherwise drop the step whose relation is rarest in the
    graph, as long as the rest is still a valid schema. Returns None when
    neither applies.
    """
    for i, step in enumerate(schema.steps):
        if step.relation in kg.relation_ids:
            continue
        parts = _relation_parts(step.relation)
        scored = [
            (len(parts & _relation_parts(name)), kg.relation_frequency(rid), -rid, name)
            for rid, name in enumerate(kg.relation_names)
        ]
        best = max(scored, default=None)
        if best is not None and best[0] > 0:
            steps = list(schema.steps)
            steps[i] = SchemaTriple(step.subject, best[3], step.object)
            return replace(schema, steps=tuple(steps), notes=(f"replaced {step.relation} with {best[3]}",))

    options = []
    for i, step in enumerate(schema.steps):
        rest = [s for j, s in enumerate(schema.steps) if j != i]
        answer = schema.answer_slot
        if rest and answer not in {x for s in rest for x in s.slots}:
            answer = step.object.name if step.subject.name == answer else step.subject.name
        try:
            candidate = build_schema(rest, answer, schema.source,
                                     notes=(f"dropped step {step.relation}",))
        except SchemaError:
            continue
        rid = kg.relation_ids.get(step.relation)
        freq = kg.relation_frequency(rid) if rid is not None else 0
        options.append((freq, -i, candidate))
    if not options:
        return None
    return min(options, key=lambda o: (o[0], o[1]))[2]


def _diagnostics(schema: QuerySchema, kg: KnowledgeGraph) -> str:
    issues = [str(i) for i in validate_schema(schema, kg)]
    return "; ".join(issues) if issues else "query returned no verifiable answer"


def collaborative_reason(question: str, schema: QuerySchema, kg: KnowledgeGraph, provider: Provider | None,
                         config: ReasonerConfig = ReasonerConfig(), trace: Trace | None = None
                         ) -> list[ReasoningPath]:
    """Hypothesize a revised schema, verify it on a fresh subgraph, repeat.

    Stops at the first iteration whose answer validates. Never raises;
    returns every path produced, in iteration order.
    """
    paths: list[ReasoningPath] = []
    current = schema
    triples = sample_triples(question, kg, config.sample_size)
    for iteration in range(1, config.max_iterations + 1):
        prompt = fill_template(
            config.hypothesis_template,
            question=question,
            schema=current.text(),
            diagnostics=_diagnostics(current, kg),
            relations=", ".join(kg.relation_names),
            triples="\n".join(kg.format_triple(t) for t in triples),
        )
        reply = _ask(provider, prompt, Tag.HYPOTHESIS)
        revised = None
        how = "provider"
        if reply is not None:
            try:
                revised = parse_schema_text(reply, "provider")
            except SchemaError as exc:
                how = f"mutation (unparseable hypothesis: {exc})"
        else:
            how = "mutation (no hypothesis)"
        if revised is None:
            revised = mutate_schema(current, kg) or current
        current = revised

        try:
            subgraph = generate_subgraph(kg, question, current, config.hop_budget, config.relevance_threshold)
        except SubgraphError as exc:
            path = ReasoningPath((), (), "collaborative", current, failed_step=0)
            paths.append(path)
            if trace is not None:
                trace.add("collaborative", iteration=iteration, source=how, schema=current.text(),
                          error=str(exc), valid=False)
            continue
        path = stepwise_reason(current, subgraph, origin="collaborative")
        valid = validate_answer(_path_answer(path), current, subgraph)
        path = replace(path, verified=valid)
        paths.append(path)
        if trace is not None:
            trace.add("collaborative", iteration=iteration, source=how, schema=current.text(),
                      query=render(compile_schema(current)), subgraph_size=len(subgraph),
                      path=path_to_dict(path, kg), valid=valid)
        if valid:
            break
    return paths


def score_paths(paths: list[ReasoningPath], multiplicity: list[int] | None = None,
                top_weight: Fraction = Fraction(1), other_weight: Fraction = Fraction(1, 2)
                ) -> dict[int, Fraction]:
    scores: dict[int, Fraction] = {}
    for k, path in enumerate(paths):
        m = multiplicity[k] if multiplicity is not None else 1
        conf = path.confidence
        for rank, entity in enumerate(path.answer_candidates):
            weight = top_weight if rank == 0 else other_weight
            scores[entity] = scores.get(entity, Fraction(0)) + m * conf * weight
    return scores


def integrate_paths(paths: list[ReasoningPath], kg: KnowledgeGraph,
                    top_weight: Fraction = Fraction(1), other_weight: Fraction = Fraction(1, 2)) -> Answer:
    """Confidence-weighted vote over paths; ties go to the smaller canonical name."""
    scores = score_paths(paths, None, top_weight, other_weight)
    ranked = sorted((e for e, s in scores.items() if s > 0),
                    key=lambda e: (-scores[e], kg.entity_names[e], e))
    if not ranked:
        return ABSTAINED
    support = tuple(p for p in paths if p.answer_candidates)
    return Answer(tuple(ranked), support, tuple(scores[e] for e in ranked))


# -- pipeline ------------------------------------------------------------------

def _answer_without_retrieval(question: str, kg: KnowledgeGraph, provider: Provider | None,
                              config: ReasonerConfig, trace: Trace) -> Answer:
    if config.variant == "io_prompt":
        prompt = fill_template(config.io_template, question=question)
    else:
        try:
            schema_text = generate_schema(question, provider, kg, sample_size=config.sample_size,
                                          template=config.schema_template).text()
        except SchemaGenerationError as exc:
            schema_text = "(none)"
            trace.add("schema", error=str(exc))
        else:
            trace.add("schema", schema=schema_text)
        prompt = fill_template(config.schema_only_template, question=question, schema=schema_text)
    reply = _ask(provider, prompt, Tag.ANSWER)
    entities = _clamp_reply(kg, reply or "")
    trace.add("answer", provider_reply=reply, resolved=[kg.entity_names[e] for e in entities])
    if not entities:
        trace.fail("answer", "provider reply names no graph entity")
        return ABSTAINED
    path = ReasoningPath((), tuple(entities), "direct")
    return Answer(tuple(entities), (path,), tuple(Fraction(1) for _ in entities))


def answer_question(question: str, kg: KnowledgeGraph, provider: Provider | None,
                    config: ReasonerConfig = ReasonerConfig()) -> tuple[Answer, Trace]:
    trace = Trace(question, config.variant)
    if config.variant in ("no_retrieval", "io_prompt"):
        return _answer_without_retrieval(question, kg, provider, config, trace), trace

    schema_provider = None if config.variant == "no_schema" else provider
    try:
        schema = generate_schema(question, schema_provider, kg, sample_size=config.sample_size,
                                 template=config.schema_template)
    except SchemaGenerationError as exc:
        trace.fail("schema", str(exc))
        return ABSTAINED, trace
    trace.add("schema", schema=schema.text(), source=schema.source, notes=list(schema.notes),
              issues=[str(i) for i in validate_schema(schema, kg)])

    try:
        subgraph = generate_subgraph(kg, question, schema, config.hop_budget, config.relevance_threshold)
    except SubgraphError as exc:
        subgraph = None
        trace.add("subgraph", error=str(exc))
    else:
        trace.add("subgraph", seeds=sorted(kg.entity_names[s] for s in subgraph.seeds),
                  hop_budget=subgraph.hop_budget, threshold=subgraph.threshold,
                  triples=[kg.format_triple(t) for t in subgraph.triples])

    direct = direct_reason(question, schema, kg, provider, config, trace)
    valid = validate_answer(direct, schema, subgraph)
    trace.add("validate", target="direct", valid=valid)
    if valid:
        return direct, trace

    valid_paths: list[ReasoningPath] = []
    if subgraph is not None:
        path = stepwise_reason(schema, subgraph)
        ok = validate_answer(_path_answer(path), schema, subgraph)
        trace.add("stepwise", path=path_to_dict(path, kg), valid=ok)
        if ok:
            valid_paths.append(replace(path, verified=True))
    if not valid_paths:
        hypothesis_provider = None if config.variant == "no_schema" else provider
        paths = collaborative_reason(question, schema, kg, hypothesis_provider, config, trace)
        valid_paths.extend(p for p in paths if p.verified)
    answer = integrate_paths(valid_paths, kg, config.top_weight, config.other_weight)
    trace.add("integrate", paths=len(valid_paths), entities=answer.names(kg),
              scores=[float(s) for s in answer.scores])
    if not answer.answered:
        trace.failure_stage = "integrate"
    return answer, trace
