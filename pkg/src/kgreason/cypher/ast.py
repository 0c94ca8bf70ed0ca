"""Query AST and its canonical text rendering."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

EdgeDirection = Literal["out", "in"]


@dataclass(frozen=True)
class NodePattern:
    var: str | None = None
    anchor: str | None = None


@dataclass(frozen=True)
class EdgePattern:
    relation: str
    direction: EdgeDirection = "out"
    var: str | None = None


@dataclass(frozen=True)
class PathPattern:
    nodes: tuple[NodePattern, ...]
    edges: tuple[EdgePattern, ...] = ()

    def __post_init__(self) -> None:
        if not self.nodes or len(self.edges) != len(self.nodes) - 1:
            raise ValueError("a path needs n nodes and n-1 edges, n >= 1")

    def hops(self):
        """Yield (left node, edge, right node) in text order."""
        for i, edge in enumerate(self.edges):
            yield self.nodes[i], edge, self.nodes[i + 1]


@dataclass(frozen=True)
class Condition:
    var: str
    value: str


@dataclass(frozen=True)
class ReturnItem:
    var: str
    name_property: bool = False

    @property
    def label(self) -> str:
        return f"{self.var}.name" if self.name_property else self.var


@dataclass(frozen=True)
class CypherQuery:
    patterns: tuple[PathPattern, ...]
    returns: tuple[ReturnItem, ...]
    filters: tuple[Condition, ...] = ()
    limit: int | None = None

    def node_vars(self) -> list[str]:
        seen: dict[str, None] = {}
        for p in self.patterns:
            for node in p.nodes:
                if node.var is not None:
                    seen.setdefault(node.var)
        return list(seen)


def quote(value: str) -> str:
    if '"' not in value:
        return f'"{value}"'
    if "'" not in value:
        return f"'{value}'"
    raise ValueError(f"string contains both quote characters: {value!r}")


def _render_node(node: NodePattern) -> str:
    inner = node.var or ""
    if node.anchor is not None:
        inner = f"{inner} {{name:{quote(node.anchor)}}}" if inner else f"{{name:{quote(node.anchor)}}}"
    return f"({inner})"


def _render_edge(edge: EdgePattern) -> str:
    body = f"[{edge.var or ''}:{edge.relation}]"
    return f"-{body}->" if edge.direction == "out" else f"<-{body}-"


def render_path(path: PathPattern) -> str:
    parts = [_render_node(path.nodes[0])]
    for _, edge, right in path.hops():
        parts.append(_render_edge(edge))
        parts.append(_render_node(right))
    return "".join(parts)


def render(query: CypherQuery) -> str:
    text = "MATCH " + ", ".join(render_path(p) for p in query.patterns)
    if query.filters:
        text += " WHERE " + " AND ".join(f"{c.var}.name = {quote(c.value)}" for c in query.filters)
    text += " RETURN " + ", ".join(item.label for item in query.returns)
    if query.limit is not None:
        text += f" LIMIT {query.limit}"
    return text
