"""Schema-guided multi-hop question answering over a knowledge graph."""

from .graph_store import KnowledgeGraph, Triple, load_kg, load_kg_files, neighbors, resolve_entity
from .llm_provider import CompletionRequest, CompletionResponse, HttpProvider, ScriptedProvider, Tag
from .reasoning import Answer, ReasonerConfig, ReasoningPath, answer_question
from .schema_gen import QuerySchema, generate_schema, parse_schema_text
from .subgraph_gen import Subgraph, generate_subgraph

__all__ = [
    "Answer",
    "CompletionRequest",
    "CompletionResponse",
    "HttpProvider",
    "KnowledgeGraph",
    "QuerySchema",
    "ReasonerConfig",
    "ReasoningPath",
    "ScriptedProvider",
    "Subgraph",
    "Tag",
    "Triple",
    "answer_question",
    "generate_schema",
    "generate_subgraph",
    "load_kg",
    "load_kg_files",
    "neighbors",
    "parse_schema_text",
    "resolve_entity",
]
