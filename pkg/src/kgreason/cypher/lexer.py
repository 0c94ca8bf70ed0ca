from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

TokenKind = Literal["keyword", "identifier", "string", "integer", "punctuation"]

KEYWORDS = frozenset({"MATCH", "WHERE", "RETURN", "LIMIT", "AND"})
PUNCTUATION = frozenset("()[]{}:,.-<>=")
_WHITESPACE = frozenset(" \t\r\n")
_IDENT_START = frozenset("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ_")
_DIGITS = frozenset("0123456789")
_IDENT_CHARS = _IDENT_START | _DIGITS


class CypherError(ValueError):
    """Base class for every structured query error."""

    def __init__(self, message: str, offset: int | None = None):
        self.offset = offset
        where = f" at offset {offset}" if offset is not None else ""
        super().__init__(f"{message}{where}")


class CypherLexError(CypherError):
    pass


@dataclass(frozen=True)
class Token:
    kind: TokenKind
    text: str
    offset: int

    @property
    def value(self) -> str:
        if self.kind == "string":
            return self.text[1:-1]
        if self.kind == "keyword":
            return self.text.upper()
        return self.text


def tokenize(text: str) -> list[Token]:
    out: list[Token] = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch in _WHITESPACE:
            i += 1
        elif ch in PUNCTUATION:
            out.append(Token("punctuation", ch, i))
            i += 1
        elif ch == '"' or ch == "'":
            end = text.find(ch, i + 1)
            if end < 0:
                raise CypherLexError("unterminated string literal", i)
            out.append(Token("string", text[i:end + 1], i))
            i = end + 1
        elif ch in _IDENT_START:
            j = i + 1
            while j < n and text[j] in _IDENT_CHARS:
                j += 1
            word = text[i:j]
            out.append(Token("keyword" if word.upper() in KEYWORDS else "identifier", word, i))
            i = j
        elif ch in _DIGITS:
            j = i + 1
            while j < n and text[j] in _DIGITS:
                j += 1
            if j < n and text[j] in _IDENT_START:
                raise CypherLexError(f"malformed number {text[i:j + 1]!r}", i)
            out.append(Token("integer", text[i:j], i))
            i = j
        else:
            raise CypherLexError(f"unexpected character {ch!r}", i)
    return out
