"""Tokenizer for the SQLite SELECT dialect.

Produces a flat token stream; comments and whitespace are dropped. Quoted
identifiers keep their unquoted text and are flagged so later stages can
tell them apart from keywords.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

__all__ = ["TokenKind", "Token", "SQLSyntaxError", "tokenize", "KEYWORDS"]


class SQLSyntaxError(ValueError):
    """Raised for input the tokenizer or extractor cannot parse."""


class TokenKind(Enum):
    WORD = "word"      # bare identifier or keyword
    QUOTED = "quoted"  # quoted identifier ("x", `x`, [x])
    STRING = "string"  # 'literal'
    NUMBER = "number"
    OP = "op"
    PARAM = "param"


@dataclass(frozen=True)
class Token:
    kind: TokenKind
    text: str  # unquoted text for QUOTED/STRING; raw text otherwise
    pos: int

    @property
    def upper(self) -> str:
        return self.text.upper() if self.kind is TokenKind.WORD else ""

    def is_word(self, *words: str) -> bool:
        return self.kind is TokenKind.WORD and self.text.upper() in words

    @property
    def is_identifier_like(self) -> bool:
        return self.kind in (TokenKind.WORD, TokenKind.QUOTED)


# Words that can never be bare column references in the clauses we scan.
KEYWORDS = frozenset(
    """
    SELECT FROM WHERE GROUP BY HAVING ORDER LIMIT OFFSET
    JOIN INNER LEFT RIGHT FULL OUTER CROSS NATURAL ON USING AS
    AND OR NOT IN EXISTS BETWEEN LIKE GLOB REGEXP MATCH IS NULL
    DISTINCT ALL UNION INTERSECT EXCEPT
    CASE WHEN THEN ELSE END CAST WITH RECURSIVE
    ASC DESC COLLATE ESCAPE ISNULL NOTNULL NULLS FIRST LAST
    CURRENT_DATE CURRENT_TIME CURRENT_TIMESTAMP TRUE FALSE VALUES
    OVER PARTITION FILTER ROWS RANGE PRECEDING FOLLOWING UNBOUNDED
    """.split()
)

_MULTI_OPS = ("<>", "<=", ">=", "==", "!=", "||", "<<", ">>", "->>", "->")
_SINGLE_OPS = set("+-*/%(),.;<>=&|~")
_WORD_START = set("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ_")
_WORD_BODY = _WORD_START | set("0123456789$")
_DIGITS = set("0123456789")


def tokenize(sql: str) -> list[Token]:
    """Tokenize one SQL statement; raises :class:`SQLSyntaxError` on bad lexemes."""
    tokens: list[Token] = []
    i, n = 0, len(sql)
    while i < n:
        ch = sql[i]
        if ch.isspace():
            i += 1
            continue
        if ch == "-" and sql.startswith("--", i):
            eol = sql.find("\n", i)
            i = n if eol < 0 else eol + 1
            continue
        if ch == "/" and sql.startswith("/*", i):
            end = sql.find("*/", i + 2)
            if end < 0:
                raise SQLSyntaxError(f"unterminated block comment at offset {i}")
            i = end + 2
            continue
        if ch == "'":
            text, i = _scan_quoted(sql, i, "'", "unterminated string literal")
            tokens.append(Token(TokenKind.STRING, text, i))
            continue
        if ch == '"' or ch == "`":
            text, i = _scan_quoted(sql, i, ch, "unterminated quoted identifier")
            tokens.append(Token(TokenKind.QUOTED, text, i))
            continue
        if ch == "[":
            end = sql.find("]", i + 1)
            if end < 0:
                raise SQLSyntaxError(f"unterminated [identifier] at offset {i}")
            tokens.append(Token(TokenKind.QUOTED, sql[i + 1 : end], i))
            i = end + 1
            continue
        if ch in _DIGITS or (ch == "." and i + 1 < n and sql[i + 1] in _DIGITS):
            start = i
            i = _scan_number(sql, i)
            tokens.append(Token(TokenKind.NUMBER, sql[start:i], start))
            continue
        if ch in _WORD_START:
            start = i
            while i < n and sql[i] in _WORD_BODY:
                i += 1
            tokens.append(Token(TokenKind.WORD, sql[start:i], start))
            continue
        if ch in "?:@$":
            start = i
            i += 1
            while i < n and sql[i] in _WORD_BODY:
                i += 1
            tokens.append(Token(TokenKind.PARAM, sql[start:i], start))
            continue
        matched = False
        for op in _MULTI_OPS:
            if sql.startswith(op, i):
                tokens.append(Token(TokenKind.OP, op, i))
                i += len(op)
                matched = True
                break
        if matched:
            continue
        if ch in _SINGLE_OPS:
            tokens.append(Token(TokenKind.OP, ch, i))
            i += 1
            continue
        raise SQLSyntaxError(f"unexpected character {ch!r} at offset {i}")
    return tokens


def _scan_quoted(sql: str, start: int, quote: str, err: str) -> tuple[str, int]:
    """Scan a quoted region starting at `start`; doubled quotes escape."""
    i = start + 1
    parts: list[str] = []
    n = len(sql)
    while i < n:
        ch = sql[i]
        if ch == quote:
            if i + 1 < n and sql[i + 1] == quote:
                parts.append(quote)
                i += 2
                continue
            return "".join(parts), i + 1
        parts.append(ch)
        i += 1
    raise SQLSyntaxError(f"{err} at offset {start}")


def _scan_number(sql: str, i: int) -> int:
    n = len(sql)
    if sql.startswith(("0x", "0X"), i):
        i += 2
        while i < n and sql[i] in "0123456789abcdefABCDEF":
            i += 1
        return i
    while i < n and sql[i] in _DIGITS:
        i += 1
    if i < n and sql[i] == ".":
        i += 1
        while i < n and sql[i] in _DIGITS:
            i += 1
    if i < n and sql[i] in "eE":
        j = i + 1
        if j < n and sql[j] in "+-":
            j += 1
        if j < n and sql[j] in _DIGITS:
            i = j
            while i < n and sql[i] in _DIGITS:
                i += 1
    return i
