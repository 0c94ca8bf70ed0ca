"""Query schemas: the slot/relation chain a question's answer must satisfy.

Text form, one step per statement::

    (e1=alice) friend_of (e2). (e2) works_at (e3). ANSWER e3
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from typing import Literal

from .cypher.ast import CypherQuery, EdgePattern, NodePattern, PathPattern, ReturnItem
from .cypher.lexer import KEYWORDS
from .graph_store import KnowledgeGraph, Triple, resolve_entity, tokens
from .llm_provider import CompletionRequest, Provider, ProviderError, Tag

DEFAULT_SAMPLE_SIZE = 20

DEFAULT_SCHEMA_TEMPLATE = """\
You are an expert on knowledge graphs. Here are some facts from the graph, one per line:
{triples}

Break the question below into a chain of relation steps over the graph.
Write each step as (slot) relation (slot). and bind entities mentioned in
the question with (slot=entity name). Finish with a line ANSWER <slot>.
Example: (e1=alice) friend_of (e2). (e2) works_at (e3). ANSWER e3

Question: {question}
Schema:"""

SchemaSource = Literal["provider", "fallback"]

_IDENT = r"[A-Za-z_][A-Za-z0-9_]*"
_SLOT = rf"\(\s*({_IDENT})\s*(?:=\s*([^()\"]*?))?\s*\)"
_STEP_RE = re.compile(rf"{_SLOT}\s+({_IDENT})\s+{_SLOT}\s*\.")
_ANSWER_RE = re.compile(rf"ANSWER\s+({_IDENT})\s*\.?\s*")
_WS_RE = re.compile(r"\s*")


class SchemaError(ValueError):
    pass


class SchemaParseError(SchemaError):
    def __init__(self, message: str, offset: int | None = None):
        self.offset = offset
        super().__init__(message if offset is None else f"{message} at offset {offset}")


class SchemaGenerationError(SchemaError):
    pass


@dataclass(frozen=True)
class Slot:
    name: str
    anchor: str | None = None


@dataclass(frozen=True)
class SchemaTriple:
    subject: Slot
    relation: str
    object: Slot

    def __post_init__(self) -> None:
        if self.subject.name == self.object.name:
            raise SchemaError(f"step {self.relation!r} links slot {self.subject.name!r} to itself")

    @property
    def slots(self) -> tuple[str, str]:
        return self.subject.name, self.object.name


@dataclass(frozen=True)
class SchemaIssue:
    kind: Literal["unknown-relation", "unresolvable-anchor"]
    detail: str

    def __str__(self) -> str:
        return f"{self.kind} {self.detail}"


@dataclass(frozen=True)
class QuerySchema:
    steps: tuple[SchemaTriple, ...]
    answer_slot: str
    source: SchemaSource = "provider"
    notes: tuple[str, ...] = field(default=(), compare=False)

    def slot_names(self) -> list[str]:
        seen: dict[str, None] = {}
        for step in self.steps:
            seen.setdefault(step.subject.name)
            seen.setdefault(step.object.name)
        return list(seen)

    def anchors(self) -> dict[str, str]:
        found: dict[str, str] = {}
        for step in self.steps:
            for slot in (step.subject, step.object):
                if slot.anchor is not None:
                    found.setdefault(slot.name, slot.anchor)
        return found

    def relations(self) -> set[str]:
        return {s.relation for s in self.steps}

    def text(self) -> str:
        return render_schema_text(self)


def _check_structure(steps: list[SchemaTriple], answer: str) -> None:
    if not steps:
        raise SchemaParseError("schema has zero steps")
    adjacency: dict[str, set[str]] = {}
    degree: dict[str, int] = {}
    for step in steps:
        s, o = step.slots
        adjacency.setdefault(s, set()).add(o)
        adjacency.setdefault(o, set()).add(s)
        degree[s] = degree.get(s, 0) + 1
        degree[o] = degree.get(o, 0) + 1
    if answer not in adjacency:
        raise SchemaParseError(f"answer slot {answer!r} appears in no step")
    start = steps[0].subject.name
    seen, stack = {start}, [start]
    while stack:
        for nxt in adjacency[stack.pop()]:
            if nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    if len(seen) != len(adjacency):
        raise SchemaParseError("slot graph is disconnected")
    branching = sorted(s for s, d in degree.items() if d > 2)
    if branching:
        raise SchemaParseError(f"slot {branching[0]!r} appears in more than two steps; only chains are supported")


def build_schema(steps: list[SchemaTriple], answer: str, source: SchemaSource = "provider",
                 notes: tuple[str, ...] = ()) -> QuerySchema:
    """Validate structure and spread each slot's anchor to all of its occurrences."""
    _check_structure(steps, answer)
    anchors: dict[str, str] = {}
    for step in steps:
        for slot in (step.subject, step.object):
            if slot.anchor is None:
                continue
            if anchors.setdefault(slot.name, slot.anchor) != slot.anchor:
                raise SchemaParseError(f"slot {slot.name!r} bound to two different entities")
    if not anchors:
        raise SchemaParseError("no slot is anchored to an entity")

    def fix(slot: Slot) -> Slot:
        return Slot(slot.name, anchors.get(slot.name))

    steps = [SchemaTriple(fix(s.subject), s.relation, fix(s.object)) for s in steps]
    return QuerySchema(tuple(steps), answer, source, notes)


def parse_schema_text(text: str, source: SchemaSource = "provider") -> QuerySchema:
    steps: list[SchemaTriple] = []
    answer: str | None = None
    pos = _WS_RE.match(text, 0).end()
    while pos < len(text):
        if answer is not None:
            raise SchemaParseError("text after ANSWER line", pos)
        m = _STEP_RE.match(text, pos)
        if m:
            s_name, s_anchor, rel, o_name, o_anchor = m.groups()
            if (s_anchor is not None and not s_anchor.strip()) or (o_anchor is not None and not o_anchor.strip()):
                raise SchemaParseError("empty entity binding", m.start())
            for ident in (s_name, rel, o_name):
                if ident.upper() in KEYWORDS:
                    raise SchemaParseError(f"reserved word {ident!r} cannot name a slot or relation", m.start())
            try:
                steps.append(SchemaTriple(
                    Slot(s_name, s_anchor.strip() if s_anchor else None),
                    rel,
                    Slot(o_name, o_anchor.strip() if o_anchor else None),
                ))
            except SchemaError as exc:
                raise SchemaParseError(str(exc), m.start()) from None
            pos = m.end()
        else:
            m = _ANSWER_RE.match(text, pos)
            if not m:
                raise SchemaParseError("expected a step '(slot) relation (slot).' or 'ANSWER <slot>'", pos)
            answer = m.group(1)
            pos = m.end()
        pos = _WS_RE.match(text, pos).end()
    if not steps:
        raise SchemaParseError("schema has zero steps")
    if answer is None:
        raise SchemaParseError("missing ANSWER line")
    return build_schema(steps, answer, source)


def render_schema_text(schema: QuerySchema) -> str:
    shown: set[str] = set()

    def slot_text(slot: Slot) -> str:
        if slot.anchor is not None and slot.name not in shown:
            shown.add(slot.name)
            return f"({slot.name}={slot.anchor})"
        shown.add(slot.name)
        return f"({slot.name})"

    lines = [f"{slot_text(s.subject)} {s.relation} {slot_text(s.object)}." for s in schema.steps]
    lines.append(f"ANSWER {schema.answer_slot}")
    return "\n".join(lines)


# -- question analysis ---------------------------------------------------------

@dataclass(frozen=True)
class Mention:
    entity: int
    start: int
    length: int
    tier: int


def find_mentions(question: str, kg: KnowledgeGraph, max_n: int = 3) -> list[Mention]:
    """Entities with an alias equal to a question n-gram (n <= max_n), up to case.

    Longer n-grams win and hide the shorter n-grams they overlap. Results are
    ordered longest first, then exact-case matches, then question position.
    """
    by_form: dict[str, set[int]] = {}
    for alias, ids in kg.aliases.items():
        by_form.setdefault(" ".join(tokens(alias)), set()).update(ids)
    words = tokens(question)
    found: list[Mention] = []
    taken: set[int] = set()
    for n in range(min(max_n, len(words)), 0, -1):
        for start in range(len(words) - n + 1):
            span = set(range(start, start + n))
            gram = " ".join(words[start:start + n])
            if span & taken or gram not in by_form:
                continue
            exact = kg.aliases.get(gram, frozenset())
            top = min(by_form[gram], key=lambda e: (e not in exact, e))
            found.append(Mention(top, start, n, 0 if top in exact else 1))
            taken |= span
    found.sort(key=lambda m: (-m.length, m.tier, m.start, m.entity))
    return found


def fallback_schema(question: str, kg: KnowledgeGraph) -> QuerySchema:
    """Lexical schema: best entity mention as anchor, then every relation
    whose tokens all occur in the question, chained in question order."""
    mentions = find_mentions(question, kg)
    if not mentions:
        raise SchemaGenerationError(f"no entity in question resolves: {question!r}")
    anchor = kg.entity_names[mentions[0].entity]
    words = tokens(question)
    positions: list[tuple[int, int, str]] = []
    for rid, rel in enumerate(kg.relation_names):
        rel_tokens = tokens(rel)
        if rel_tokens and all(t in words for t in rel_tokens):
            positions.append((words.index(rel_tokens[0]), rid, rel))
    if not positions:
        raise SchemaGenerationError(f"no relation named in question: {question!r}")
    positions.sort()
    steps = []
    for k, (_, _, rel) in enumerate(positions, start=1):
        subject = Slot(f"e{k}", anchor if k == 1 else None)
        steps.append(SchemaTriple(subject, rel, Slot(f"e{k + 1}")))
    return build_schema(steps, f"e{len(steps) + 1}", "fallback")


def sample_triples(question: str, kg: KnowledgeGraph, k: int = DEFAULT_SAMPLE_SIZE) -> list[Triple]:
    """Up to k triples incident to entities mentioned in the question."""
    picked: dict[Triple, None] = {}
    for mention in find_mentions(question, kg):
        for t in sorted(kg.index.incident(mention.entity)):
            picked.setdefault(t)
    return list(picked)[:k]


def fill_template(template: str, **values: str) -> str:
    for key, value in values.items():
        template = template.replace("{" + key + "}", value)
    return template


def generate_schema(question: str, provider: Provider | None, kg: KnowledgeGraph, *,
                    sample_size: int = DEFAULT_SAMPLE_SIZE,
                    template: str = DEFAULT_SCHEMA_TEMPLATE) -> QuerySchema:
    """Ask the provider for a schema; fall back to the lexical schema on any failure.

    ``provider=None`` skips the provider entirely.
    """
    if not question.strip():
        raise SchemaGenerationError("empty question")
    reason = "provider disabled"
    if provider is not None:
        triples = sample_triples(question, kg, sample_size)
        prompt = fill_template(template, question=question,
                               triples="\n".join(kg.format_triple(t) for t in triples))
        try:
            text = provider.complete(CompletionRequest(prompt, Tag.SCHEMA)).text
            return parse_schema_text(text, "provider")
        except ProviderError as exc:
            reason = f"provider error: {exc}"
        except SchemaError as exc:
            reason = f"unparseable provider schema: {exc}"
    try:
        schema = fallback_schema(question, kg)
    except SchemaGenerationError as exc:
        raise SchemaGenerationError(f"{reason}; fallback failed: {exc}") from None
    return replace(schema, notes=(reason,))


def validate_schema(schema: QuerySchema, kg: KnowledgeGraph) -> list[SchemaIssue]:
    issues: list[SchemaIssue] = []
    for step in schema.steps:
        if step.relation not in kg.relation_ids and SchemaIssue("unknown-relation", step.relation) not in issues:
            issues.append(SchemaIssue("unknown-relation", step.relation))
    for anchor in schema.anchors().values():
        if not resolve_entity(kg, anchor):
            issues.append(SchemaIssue("unresolvable-anchor", anchor))
    return issues


# -- compilation ---------------------------------------------------------------

def compile_schema(schema: QuerySchema, return_slots: list[str] | None = None) -> CypherQuery:
    """One MATCH path per run of consecutive steps that continue from the
    previous step's end slot. Each slot's anchor is attached where the slot
    first appears."""
    anchors = schema.anchors()
    placed: set[str] = set()

    def node(name: str) -> NodePattern:
        anchor = anchors.get(name) if name not in placed else None
        placed.add(name)
        return NodePattern(name, anchor)

    paths: list[PathPattern] = []
    nodes: list[NodePattern] = []
    edges: list[EdgePattern] = []
    tail: str | None = None
    steps = schema.steps
    for i, step in enumerate(steps):
        s, o = step.slots
        if tail not in (s, o):
            if nodes:
                paths.append(PathPattern(tuple(nodes), tuple(edges)))
            nxt = steps[i + 1].slots if i + 1 < len(steps) else ()
            # start from the end the next step does not continue from
            tail = o if (s in nxt and o not in nxt) else s
            nodes, edges = [node(tail)], []
        if tail == s:
            edges.append(EdgePattern(step.relation, "out"))
            tail = o
        else:
            edges.append(EdgePattern(step.relation, "in"))
            tail = s
        nodes.append(node(tail))
    paths.append(PathPattern(tuple(nodes), tuple(edges)))
    returns = tuple(ReturnItem(v) for v in (return_slots or [schema.answer_slot]))
    return CypherQuery(tuple(paths), returns)
