"""A small deterministic subset of Cypher: tokenize, parse, render, execute."""

from .ast import Condition, CypherQuery, EdgePattern, NodePattern, PathPattern, ReturnItem, render
from .executor import BindingTable, CypherExecutionError, GraphView, execute, resolve_anchor
from .lexer import CypherError, CypherLexError, Token, tokenize
from .parser import CypherParseError, CypherSemanticError, parse, parse_query

__all__ = [
    "BindingTable",
    "Condition",
    "CypherError",
    "CypherExecutionError",
    "CypherLexError",
    "CypherParseError",
    "CypherQuery",
    "CypherSemanticError",
    "EdgePattern",
    "GraphView",
    "NodePattern",
    "PathPattern",
    "ReturnItem",
    "Token",
    "execute",
    "parse",
    "parse_query",
    "render",
    "resolve_anchor",
    "tokenize",
]
