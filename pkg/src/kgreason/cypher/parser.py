"""Recursive-descent parser for the MATCH/WHERE/RETURN/LIMIT subset."""

from __future__ import annotations

from collections.abc import Sequence

from .ast import Condition, CypherQuery, EdgePattern, NodePattern, PathPattern, ReturnItem
from .lexer import CypherError, Token, tokenize


class CypherParseError(CypherError):
    def __init__(self, message: str, offset: int | None, expected: Sequence[str] = ()):
        self.expected = frozenset(expected)
        if expected:
            message = f"{message}; expected one of {', '.join(sorted(self.expected))}"
        super().__init__(message, offset)


class CypherSemanticError(CypherError):
    def __init__(self, message: str, variable: str | None = None, offset: int | None = None):
        self.variable = variable
        super().__init__(message, offset)


def _describe(tok: Token | None) -> str:
    return "end of input" if tok is None else repr(tok.text)


class _Parser:
    def __init__(self, tokens: Sequence[Token]):
        self.tokens = list(tokens)
        self.pos = 0
        last = self.tokens[-1] if self.tokens else None
        self.end_offset = last.offset + len(last.text) if last else 0

    def peek(self, ahead: int = 0) -> Token | None:
        i = self.pos + ahead
        return self.tokens[i] if i < len(self.tokens) else None

    def offset(self) -> int:
        tok = self.peek()
        return tok.offset if tok else self.end_offset

    def fail(self, expected: Sequence[str]) -> CypherParseError:
        return CypherParseError(f"unexpected {_describe(self.peek())}", self.offset(), expected)

    def at_punct(self, ch: str) -> bool:
        tok = self.peek()
        return tok is not None and tok.kind == "punctuation" and tok.text == ch

    def at_keyword(self, kw: str) -> bool:
        tok = self.peek()
        return tok is not None and tok.kind == "keyword" and tok.value == kw

    def punct(self, ch: str) -> Token:
        if not self.at_punct(ch):
            raise self.fail([repr(ch)])
        return self.advance()

    def keyword(self, kw: str) -> Token:
        if not self.at_keyword(kw):
            raise self.fail([kw])
        return self.advance()

    def ident(self, what: str = "identifier") -> Token:
        tok = self.peek()
        if tok is None or tok.kind != "identifier":
            raise self.fail([what])
        return self.advance()

    def name_property(self) -> None:
        tok = self.peek()
        if tok is None or tok.kind != "identifier" or tok.text != "name":
            raise self.fail(["'name'"])
        self.advance()

    def string(self) -> str:
        tok = self.peek()
        if tok is None or tok.kind != "string":
            raise self.fail(["string literal"])
        self.advance()
        return tok.value

    def advance(self) -> Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    # grammar ---------------------------------------------------------------

    def query(self) -> tuple[CypherQuery, dict[str, int]]:
        offsets: dict[str, int] = {}
        self.keyword("MATCH")
        paths = [self.path()]
        while self.at_punct(","):
            self.advance()
            paths.append(self.path())
        filters: list[Condition] = []
        if self.at_keyword("WHERE"):
            self.advance()
            filters.append(self.condition(offsets))
            while self.at_keyword("AND"):
                self.advance()
                filters.append(self.condition(offsets))
        if not self.at_keyword("RETURN"):
            raise self.fail(["WHERE", "RETURN", "','", "'-'", "'<'"] if not filters else ["AND", "RETURN"])
        self.advance()
        items = [self.item(offsets)]
        while self.at_punct(","):
            self.advance()
            items.append(self.item(offsets))
        limit = None
        if self.at_keyword("LIMIT"):
            self.advance()
            tok = self.peek()
            if tok is None or tok.kind != "integer":
                raise self.fail(["integer"])
            self.advance()
            limit = int(tok.text)
            if limit <= 0:
                raise CypherParseError("LIMIT must be positive", tok.offset)
        if self.peek() is not None:
            raise self.fail(["','", "LIMIT", "end of input"] if limit is None else ["end of input"])
        return CypherQuery(tuple(paths), tuple(items), tuple(filters), limit), offsets

    def path(self) -> PathPattern:
        nodes = [self.node()]
        edges: list[EdgePattern] = []
        while self.at_punct("-") or self.at_punct("<"):
            edges.append(self.edge())
            nodes.append(self.node())
        return PathPattern(tuple(nodes), tuple(edges))

    def node(self) -> NodePattern:
        self.punct("(")
        var = None
        tok = self.peek()
        if tok is not None and tok.kind == "identifier":
            var = self.advance().text
        anchor = None
        if self.at_punct("{"):
            self.advance()
            self.name_property()
            self.punct(":")
            anchor = self.string()
            self.punct("}")
        if not self.at_punct(")"):
            raise self.fail(["')'", "'{'"] if anchor is None else ["')'"])
        self.advance()
        return NodePattern(var, anchor)

    def edge(self) -> EdgePattern:
        incoming = self.at_punct("<")
        if incoming:
            self.advance()
        self.punct("-")
        self.punct("[")
        var = None
        tok = self.peek()
        if tok is not None and tok.kind == "identifier":
            var = self.advance().text
        self.punct(":")
        relation = self.ident("relation name").text
        self.punct("]")
        self.punct("-")
        if not incoming:
            self.punct(">")
        return EdgePattern(relation, "in" if incoming else "out", var)

    def condition(self, offsets: dict[str, int]) -> Condition:
        tok = self.ident("variable")
        offsets.setdefault(tok.text, tok.offset)
        self.punct(".")
        self.name_property()
        self.punct("=")
        return Condition(tok.text, self.string())

    def item(self, offsets: dict[str, int]) -> ReturnItem:
        tok = self.ident("variable")
        offsets.setdefault(tok.text, tok.offset)
        prop = False
        if self.at_punct("."):
            self.advance()
            self.name_property()
            prop = True
        return ReturnItem(tok.text, prop)


def check_semantics(query: CypherQuery, offsets: dict[str, int] | None = None) -> None:
    offsets = offsets or {}
    node_vars = set(query.node_vars())
    edge_vars: set[str] = set()
    for p in query.patterns:
        for e in p.edges:
            if e.var is None:
                continue
            if e.var in edge_vars:
                raise CypherSemanticError(f"edge variable {e.var!r} bound twice", e.var)
            edge_vars.add(e.var)
    clash = node_vars & edge_vars
    if clash:
        var = sorted(clash)[0]
        raise CypherSemanticError(f"variable {var!r} used as both node and edge", var)
    used = [c.var for c in query.filters] + [r.var for r in query.returns]
    for var in used:
        if var in edge_vars:
            raise CypherSemanticError(f"edge variable {var!r} cannot be filtered or returned", var, offsets.get(var))
        if var not in node_vars:
            raise CypherSemanticError(f"unbound variable {var!r}", var, offsets.get(var))


def parse(tokens: Sequence[Token]) -> CypherQuery:
    query, offsets = _Parser(tokens).query()
    check_semantics(query, offsets)
    return query


def parse_query(text: str) -> CypherQuery:
    return parse(tokenize(text))
