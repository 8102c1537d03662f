"""Extract referenced tables and columns from a SELECT statement.

The extractor parses a statement into nested select scopes (CTE bodies,
derived tables, and expression subqueries each open a scope), then resolves
every column reference against the scope's FROM sources and the database
catalog. Aliases resolve to real table names; unqualified columns are
attributed via the catalog; CTE and derived-table columns are traced
through their projection to the underlying base tables.

Conventions:

* columns count wherever they appear (SELECT list, ON, WHERE, GROUP BY,
  HAVING, ORDER BY), with set semantics;
* ``SELECT *`` contributes a table-level reference (empty column set)
  unless ``expand_star`` is enabled;
* CTE names are never reported as tables, only their base tables are;
* an unqualified column found in several in-scope tables is attributed to
  the first FROM-order match and flagged ambiguous.
"""

from __future__ import annotations

import sqlite3
from dataclasses import dataclass, field
from pathlib import Path

from .model import SchemaSet, normalize_identifier
from .sqltokens import KEYWORDS, SQLSyntaxError, Token, TokenKind, tokenize

__all__ = [
    "Catalog",
    "catalog_from_database",
    "SchemaExtractionError",
    "ExtractionIssue",
    "Extraction",
    "extract_schema",
    "extract_schema_report",
]


class SchemaExtractionError(ValueError):
    """The statement could not be parsed for schema extraction."""


@dataclass(frozen=True)
class Catalog:
    """Tables and their ordered columns for one database, canonical-cased."""

    tables: dict[str, tuple[str, ...]]

    @staticmethod
    def build(raw: dict[str, list[str] | tuple[str, ...]]) -> "Catalog":
        tables: dict[str, tuple[str, ...]] = {}
        for name, columns in raw.items():
            table = normalize_identifier(name)
            if table in tables:
                raise ValueError(f"duplicate table {table!r} in catalog")
            cols: list[str] = []
            for col in columns:
                canonical = normalize_identifier(col)
                if canonical in cols:
                    raise ValueError(f"duplicate column {canonical!r} in table {table!r}")
                cols.append(canonical)
            tables[table] = tuple(cols)
        return Catalog(tables)

    def has_table(self, name: str) -> bool:
        return name in self.tables

    def columns_of(self, table: str) -> tuple[str, ...]:
        return self.tables.get(table, ())

    def has_column(self, table: str, column: str) -> bool:
        return column in self.tables.get(table, ())


def catalog_from_database(db_path: str | Path) -> Catalog:
    """Introspect a SQLite file: user tables only, views and internals excluded."""
    path = Path(db_path)
    if not path.is_file():
        raise FileNotFoundError(f"database file not found: {path}")
    uri = f"file:{path.as_posix()}?mode=ro"
    try:
        conn = sqlite3.connect(uri, uri=True)
    except sqlite3.Error as exc:
        raise OSError(f"cannot open database {path}: {exc}") from exc
    try:
        rows = conn.execute(
            "SELECT name FROM sqlite_master WHERE type = 'table' "
            "AND name NOT LIKE 'sqlite_%' ORDER BY name"
        ).fetchall()
        raw: dict[str, list[str]] = {}
        for (table,) in rows:
            info = conn.execute(f'PRAGMA table_info("{table}")').fetchall()
            raw[table] = [row[1] for row in info]
    except sqlite3.DatabaseError as exc:
        raise OSError(f"cannot read database {path}: {exc}") from exc
    finally:
        conn.close()
    return Catalog.build(raw)


@dataclass(frozen=True)
class ExtractionIssue:
    kind: str  # "unresolved_column" | "ambiguous_column" | "unknown_table"
    name: str
    context: str = ""

    def to_json(self) -> dict[str, str]:
        return {"kind": self.kind, "name": self.name, "context": self.context}


@dataclass
class Extraction:
    schema: SchemaSet
    issues: list[ExtractionIssue]

    @property
    def unresolved(self) -> list[ExtractionIssue]:
        return [i for i in self.issues if i.kind == "unresolved_column"]

    @property
    def ambiguous(self) -> list[ExtractionIssue]:
        return [i for i in self.issues if i.kind == "ambiguous_column"]


# ----------------------------------------------------------------------------
# Parse tree

_ABSENT = object()


@dataclass
class _Source:
    kind: str  # "table" | "derived"
    key: str | None  # alias, or table name when unaliased; None = unnamed derived
    table: str | None = None  # raw (canonical) name for table sources
    scope: "_Scope | None" = None  # derived select, filled during resolution for CTEs


@dataclass
class _SelectItem:
    output_name: str | None = None
    refs: list[tuple[str | None, str]] = field(default_factory=list)
    star_qual: object = _ABSENT  # _ABSENT, None (bare *), or qualifier string


@dataclass
class _Scope:
    parent: "_Scope | None" = None
    correlated: bool = False  # expression subqueries may see outer sources
    ctes: dict[str, "_Scope"] = field(default_factory=dict)
    cte_columns: list[str] | None = None  # declared names when used as a CTE body
    sources: list[_Source] = field(default_factory=list)
    items: list[_SelectItem] = field(default_factory=list)
    refs: list[tuple[str | None, str]] = field(default_factory=list)
    stars: list[str | None] = field(default_factory=list)
    using_columns: list[str] = field(default_factory=list)
    children: list["_Scope"] = field(default_factory=list)
    compound_next: "_Scope | None" = None

    def arms(self) -> list["_Scope"]:
        out, arm = [], self
        while arm is not None:
            out.append(arm)
            arm = arm.compound_next
        return out

    def explicit_aliases(self) -> set[str]:
        return {
            item.output_name
            for arm in self.arms()
            for item in arm.items
            if item.output_name is not None
        }


# Clause keywords that terminate expression runs at paren depth 0.
_CLAUSE_STOPS = frozenset(
    {"FROM", "WHERE", "GROUP", "HAVING", "ORDER", "LIMIT", "OFFSET",
     "UNION", "INTERSECT", "EXCEPT"}
)
_JOIN_WORDS = frozenset(
    {"JOIN", "INNER", "LEFT", "RIGHT", "FULL", "OUTER", "CROSS", "NATURAL"}
)
_ALIAS_BLOCKERS = _CLAUSE_STOPS | _JOIN_WORDS | {"ON", "USING", "AS"}


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.toks = tokens
        self.i = 0

    # -- token helpers -------------------------------------------------
    def peek(self, ahead: int = 0) -> Token | None:
        j = self.i + ahead
        return self.toks[j] if j < len(self.toks) else None

    def next(self) -> Token:
        tok = self.peek()
        if tok is None:
            raise SQLSyntaxError("unexpected end of statement")
        self.i += 1
        return tok

    def at_word(self, *words: str) -> bool:
        tok = self.peek()
        return tok is not None and tok.is_word(*words)

    def at_op(self, op: str) -> bool:
        tok = self.peek()
        return tok is not None and tok.kind is TokenKind.OP and tok.text == op

    def accept_word(self, *words: str) -> bool:
        if self.at_word(*words):
            self.i += 1
            return True
        return False

    def accept_op(self, op: str) -> bool:
        if self.at_op(op):
            self.i += 1
            return True
        return False

    def expect_op(self, op: str, what: str) -> None:
        if not self.accept_op(op):
            tok = self.peek()
            found = tok.text if tok else "end of statement"
            raise SQLSyntaxError(f"expected {op!r} {what}, found {found!r}")

    def _ident_text(self, tok: Token) -> str:
        return tok.text.lower() if tok.kind is TokenKind.QUOTED else tok.text.lower()

    # -- statement -----------------------------------------------------
    def parse_statement(self) -> _Scope:
        scope = self.parse_select(parent=None, correlated=False)
        self.accept_op(";")
        if self.peek() is not None:
            tok = self.peek()
            raise SQLSyntaxError(
                f"trailing input after statement at offset {tok.pos}: {tok.text!r}"
            )
        return scope

    def parse_select(self, parent: _Scope | None, correlated: bool) -> _Scope:
        scope = _Scope(parent=parent, correlated=correlated)
        if self.accept_word("WITH"):
            self.accept_word("RECURSIVE")
            while True:
                name_tok = self.next()
                if not name_tok.is_identifier_like:
                    raise SQLSyntaxError(f"expected CTE name, found {name_tok.text!r}")
                cte_name = self._ident_text(name_tok)
                declared: list[str] | None = None
                if self.accept_op("("):
                    declared = []
                    while True:
                        col = self.next()
                        if not col.is_identifier_like:
                            raise SQLSyntaxError("expected column name in CTE column list")
                        declared.append(self._ident_text(col))
                        if self.accept_op(","):
                            continue
                        self.expect_op(")", "after CTE column list")
                        break
                if not self.accept_word("AS"):
                    raise SQLSyntaxError(f"expected AS after CTE name {cte_name!r}")
                self.accept_word("NOT")  # AS [NOT] MATERIALIZED
                self.accept_word("MATERIALIZED")
                self.expect_op("(", "to open CTE body")
                body = self.parse_select(parent=scope, correlated=False)
                self.expect_op(")", "to close CTE body")
                body.cte_columns = declared
                scope.ctes[cte_name] = body
                if not self.accept_op(","):
                    break

        if self.at_word("VALUES"):
            self._parse_values(scope)
        elif self.accept_word("SELECT"):
            self.accept_word("DISTINCT") or self.accept_word("ALL")
            self._parse_select_list(scope)
            if self.accept_word("FROM"):
                self._parse_from(scope)
            if self.accept_word("WHERE"):
                self._collect_expr(scope, scope.refs)
            if self.accept_word("GROUP"):
                if not self.accept_word("BY"):
                    raise SQLSyntaxError("expected BY after GROUP")
                self._collect_expr_list(scope, skip_aliases=scope.explicit_aliases())
            if self.accept_word("HAVING"):
                self._collect_expr(scope, scope.refs, skip_aliases=scope.explicit_aliases())
        else:
            tok = self.peek()
            found = tok.text if tok else "end of statement"
            raise SQLSyntaxError(f"expected SELECT, found {found!r}")

        # ORDER BY / LIMIT attach to the compound as a whole; collect per arm.
        if self.accept_word("ORDER"):
            if not self.accept_word("BY"):
                raise SQLSyntaxError("expected BY after ORDER")
            self._collect_expr_list(scope, skip_aliases=scope.explicit_aliases())
        if self.accept_word("LIMIT"):
            self._collect_expr(scope, scope.refs)
            if self.accept_word("OFFSET"):
                self._collect_expr(scope, scope.refs)
            if self.accept_op(","):  # LIMIT x, y form
                self._collect_expr(scope, scope.refs)

        if self.at_word("UNION", "INTERSECT", "EXCEPT"):
            self.next()
            self.accept_word("ALL")
            scope.compound_next = self.parse_select(parent=parent, correlated=correlated)
        return scope

    def _parse_values(self, scope: _Scope) -> None:
        self.next()  # VALUES
        while True:
            self.expect_op("(", "to open VALUES row")
            depth = 1
            while depth:
                tok = self.next()
                if tok.kind is TokenKind.OP and tok.text == "(":
                    depth += 1
                elif tok.kind is TokenKind.OP and tok.text == ")":
                    depth -= 1
            if not self.accept_op(","):
                break

    # -- select list -----------------------------------------------------
    def _parse_select_list(self, scope: _Scope) -> None:
        while True:
            item = _SelectItem()
            if self.accept_op("*"):
                item.star_qual = None
                scope.stars.append(None)
            elif (
                self.peek() is not None
                and self.peek().is_identifier_like
                and self.peek().upper not in KEYWORDS
                and self.peek(1) is not None
                and self.peek(1).kind is TokenKind.OP
                and self.peek(1).text == "."
                and self.peek(2) is not None
                and self.peek(2).kind is TokenKind.OP
                and self.peek(2).text == "*"
            ):
                qual = self._ident_text(self.next())
                self.next()  # .
                self.next()  # *
                item.star_qual = qual
                scope.stars.append(qual)
            else:
                self._collect_expr(scope, scope.refs, item=item)
            scope.items.append(item)
            if not self.accept_op(","):
                break

    # -- FROM clause -----------------------------------------------------
    def _parse_from(self, scope: _Scope) -> None:
        self._parse_source_unit(scope)
        while True:
            if self.accept_op(","):
                self._parse_source_unit(scope)
                continue
            if self.at_word(*_JOIN_WORDS):
                while self.at_word(*_JOIN_WORDS):
                    if self.next().upper == "JOIN":
                        break
                self._parse_source_unit(scope)
                if self.accept_word("ON"):
                    self._collect_expr(scope, scope.refs)
                elif self.accept_word("USING"):
                    self.expect_op("(", "after USING")
                    while True:
                        col = self.next()
                        if not col.is_identifier_like:
                            raise SQLSyntaxError("expected column name in USING")
                        scope.using_columns.append(self._ident_text(col))
                        if self.accept_op(","):
                            continue
                        self.expect_op(")", "after USING column list")
                        break
                continue
            break

    def _parse_source_unit(self, scope: _Scope) -> None:
        if self.accept_op("("):
            nxt = self.peek()
            if nxt is not None and nxt.is_word("SELECT", "WITH", "VALUES"):
                sub = self.parse_select(parent=scope, correlated=False)
                self.expect_op(")", "to close subquery")
                alias = self._parse_alias_opt()
                scope.sources.append(_Source(kind="derived", key=alias, scope=sub))
            else:
                # parenthesized join: flatten its sources into this scope
                self._parse_from(scope)
                self.expect_op(")", "to close join group")
                self._parse_alias_opt()
            return
        tok = self.next()
        if not tok.is_identifier_like or (tok.kind is TokenKind.WORD and tok.upper in KEYWORDS):
            raise SQLSyntaxError(f"expected table name, found {tok.text!r}")
        name = self._ident_text(tok)
        if self.at_op(".") and self.peek(1) is not None and self.peek(1).is_identifier_like:
            self.next()
            name = self._ident_text(self.next())  # drop schema/database prefix
        alias = self._parse_alias_opt()
        scope.sources.append(_Source(kind="table", key=alias or name, table=name))

    def _parse_alias_opt(self) -> str | None:
        if self.accept_word("AS"):
            tok = self.next()
            if not tok.is_identifier_like:
                raise SQLSyntaxError(f"expected alias after AS, found {tok.text!r}")
            return self._ident_text(tok)
        tok = self.peek()
        if (
            tok is not None
            and tok.is_identifier_like
            and (tok.kind is TokenKind.QUOTED or tok.upper not in KEYWORDS)
        ):
            self.i += 1
            return self._ident_text(tok)
        return None

    # -- expressions -----------------------------------------------------
    def _collect_expr_list(self, scope: _Scope, skip_aliases: set[str] | None = None) -> None:
        while True:
            self._collect_expr(scope, scope.refs, skip_aliases=skip_aliases)
            if not self.accept_op(","):
                break

    def _collect_expr(
        self,
        scope: _Scope,
        sink: list[tuple[str | None, str]],
        *,
        skip_aliases: set[str] | None = None,
        item: _SelectItem | None = None,
    ) -> None:
        """Consume one expression, recording column references.

        Stops at a top-level comma, closing paren, or clause keyword. When
        ``item`` is given, tracks the item's output name (explicit AS alias,
        implicit trailing alias, or the column name of a plain reference).
        """
        depth = 0
        prev_operand = False  # previous top-level token ended an operand
        token_count = 0
        sole_ref: str | None = None

        while True:
            tok = self.peek()
            if tok is None:
                break
            if tok.kind is TokenKind.OP:
                if tok.text == "(":
                    self.next()
                    nxt = self.peek()
                    if nxt is not None and nxt.is_word("SELECT", "WITH", "VALUES"):
                        child = self.parse_select(parent=scope, correlated=True)
                        scope.children.append(child)
                        self.expect_op(")", "to close subquery")
                    else:
                        depth += 1
                    prev_operand = False
                    token_count += 1
                    continue
                if tok.text == ")":
                    if depth == 0:
                        break
                    depth -= 1
                    self.next()
                    prev_operand = True
                    token_count += 1
                    continue
                if tok.text in (",", ";") and depth == 0:
                    break
                self.next()
                prev_operand = tok.text == "*" and depth > 0
                token_count += 1
                continue

            if tok.kind is TokenKind.WORD and depth == 0 and (
                tok.upper in _CLAUSE_STOPS
                or tok.upper in _JOIN_WORDS
                or tok.upper in ("ON", "USING")
            ):
                break

            if tok.kind is TokenKind.WORD and tok.upper == "AS" and depth == 0:
                if item is None:
                    break  # only CAST(expr AS type) puts a bare AS here
                self.next()
                alias_tok = self.next()
                if not alias_tok.is_identifier_like:
                    raise SQLSyntaxError(f"expected alias after AS, found {alias_tok.text!r}")
                item.output_name = self._ident_text(alias_tok)
                prev_operand = False
                continue

            if tok.kind is TokenKind.WORD and tok.upper == "CAST":
                nxt = self.peek(1)
                if nxt is not None and nxt.kind is TokenKind.OP and nxt.text == "(":
                    self._collect_cast(scope, sink, skip_aliases)
                    prev_operand = True
                    token_count += 1
                    continue

            if tok.kind is TokenKind.WORD and tok.upper == "COLLATE":
                self.next()
                if self.peek() is not None and self.peek().is_identifier_like:
                    self.next()
                prev_operand = True
                continue

            if tok.is_identifier_like:
                nxt = self.peek(1)
                if nxt is not None and nxt.kind is TokenKind.OP and nxt.text == "(":
                    # function name (or IN/EXISTS before a paren): never a column
                    self.next()
                    prev_operand = False
                    token_count += 1
                    continue
                if tok.kind is TokenKind.WORD and tok.upper in KEYWORDS:
                    self.next()
                    prev_operand = tok.upper in ("NULL", "TRUE", "FALSE", "END",
                                                 "CURRENT_DATE", "CURRENT_TIME",
                                                 "CURRENT_TIMESTAMP")
                    token_count += 1
                    continue
                # identifier chain: a | a.b | a.b.c | a.* | a.b.*
                if prev_operand and depth == 0 and item is not None:
                    self.next()
                    item.output_name = self._ident_text(tok)
                    prev_operand = False
                    continue
                qual, name, is_star = self._consume_ident_chain()
                if is_star:
                    scope.stars.append(qual)
                else:
                    if qual is None and skip_aliases and name in skip_aliases:
                        pass
                    else:
                        sink.append((qual, name))
                        if item is not None:
                            item.refs.append((qual, name))
                            if token_count == 0:
                                sole_ref = name
                prev_operand = True
                token_count += 1
                continue

            # STRING / NUMBER / PARAM
            self.next()
            prev_operand = True
            token_count += 1

        if item is not None and item.output_name is None and sole_ref is not None:
            # plain `col` or `t.col` item: output name is the column name
            if len(item.refs) == 1 and token_count == 1:
                item.output_name = sole_ref

    def _consume_ident_chain(self) -> tuple[str | None, str, bool]:
        """Consume `a`, `a.b`, `a.b.c`, `a.*`, or `a.b.*` (returns qual, name, star)."""
        parts = [self._ident_text(self.next())]
        while (
            self.at_op(".")
            and self.peek(1) is not None
            and (
                self.peek(1).is_identifier_like
                or (self.peek(1).kind is TokenKind.OP and self.peek(1).text == "*")
            )
        ):
            self.next()
            nxt = self.next()
            if nxt.kind is TokenKind.OP:  # star
                qual = parts[-1]
                return qual, "*", True
            parts.append(self._ident_text(nxt))
            if len(parts) == 3:
                break
        if len(parts) == 1:
            return None, parts[0], False
        return parts[-2], parts[-1], False

    def _collect_cast(
        self,
        scope: _Scope,
        sink: list[tuple[str | None, str]],
        skip_aliases: set[str] | None,
    ) -> None:
        """CAST(expr AS type): collect refs from expr, skip the type name."""
        self.next()  # CAST
        self.expect_op("(", "after CAST")
        self._collect_expr(scope, sink, skip_aliases=skip_aliases)
        if not self.accept_word("AS"):
            raise SQLSyntaxError("expected AS inside CAST")
        depth = 0
        while True:
            tok = self.peek()
            if tok is None:
                raise SQLSyntaxError("unterminated CAST")
            if tok.kind is TokenKind.OP and tok.text == "(":
                depth += 1
            elif tok.kind is TokenKind.OP and tok.text == ")":
                if depth == 0:
                    self.next()
                    return
                depth -= 1
            self.next()


# ----------------------------------------------------------------------------
# Resolution

class _Resolver:
    def __init__(self, catalog: Catalog, expand_star: bool):
        self.catalog = catalog
        self.expand_star = expand_star
        self.out: dict[str, set[str]] = {}
        self.issues: list[ExtractionIssue] = []
        self._sources: dict[int, list[tuple[_Source, str]]] = {}
        self._projecting: set[tuple[int, str]] = set()
        self._visited: set[int] = set()

    # -- entry ----------------------------------------------------------
    def run(self, root: _Scope) -> Extraction:
        self.visit(root)
        schema = SchemaSet({t: frozenset(c) for t, c in self.out.items()})
        return Extraction(schema=schema, issues=self.issues)

    def visit(self, scope: _Scope) -> None:
        for arm in scope.arms():
            self._visit_arm(arm)

    def _visit_arm(self, arm: _Scope) -> None:
        if id(arm) in self._visited:
            return
        self._visited.add(id(arm))
        for cte in arm.ctes.values():
            self.visit(cte)
        self._resolve_sources(arm)
        for source in self._sources[id(arm)]:
            src, kind = source
            if kind == "derived":
                self.visit(src.scope)
        for qual, name in arm.refs:
            self._resolve_colref(arm, qual, name)
        for qual in arm.stars:
            self._resolve_star(arm, qual)
        for name in arm.using_columns:
            self._resolve_using(arm, name)
        for child in arm.children:
            self.visit(child)

    # -- sources ----------------------------------------------------------
    def _resolve_sources(self, arm: _Scope) -> None:
        if id(arm) in self._sources:
            return
        resolved: list[tuple[_Source, str]] = []
        for src in arm.sources:
            if src.kind == "derived":
                resolved.append((src, "derived"))
                continue
            cte = self._find_cte(arm, src.table)
            if cte is not None:
                derived = _Source(kind="derived", key=src.key, scope=cte)
                resolved.append((derived, "derived"))
            elif self.catalog.has_table(src.table):
                self.out.setdefault(src.table, set())
                resolved.append((src, "table"))
            else:
                self.issues.append(
                    ExtractionIssue("unknown_table", src.table, "not in catalog")
                )
                resolved.append((src, "unknown"))
        self._sources[id(arm)] = resolved

    def _find_cte(self, scope: _Scope, name: str) -> _Scope | None:
        node: _Scope | None = scope
        while node is not None:
            if name in node.ctes:
                return node.ctes[name]
            node = node.parent
        return None

    def _sources_of(self, arm: _Scope) -> list[tuple[_Source, str]]:
        self._resolve_sources(arm)
        return self._sources[id(arm)]

    # -- column references -------------------------------------------------
    def _attribute(self, src: _Source, kind: str, column: str, context: str) -> bool:
        if kind == "table":
            if self.catalog.has_column(src.table, column):
                self.out.setdefault(src.table, set()).add(column)
                return True
            self.issues.append(
                ExtractionIssue(
                    "unresolved_column", f"{src.table}.{column}",
                    f"{context}: column not in table"
                )
            )
            return True  # the qualifier resolved; the column is simply wrong
        if kind == "derived":
            pairs = self._project(src.scope, column)
            if pairs is None:
                self.issues.append(
                    ExtractionIssue(
                        "unresolved_column", column,
                        f"{context}: not produced by subquery {src.key or '<anonymous>'}"
                    )
                )
                return True
            for table, col in pairs:
                self.out.setdefault(table, set()).add(col)
            return True
        return False  # unknown table: swallow, already reported

    def _source_has_column(self, src: _Source, kind: str, column: str) -> bool:
        if kind == "table":
            return self.catalog.has_column(src.table, column)
        if kind == "derived":
            return self._project(src.scope, column) is not None
        return False

    def _resolve_colref(self, arm: _Scope, qual: str | None, name: str) -> None:
        if qual is not None:
            scope: _Scope | None = arm
            while scope is not None:
                for src, kind in self._sources_of(scope):
                    if src.key == qual:
                        self._attribute(src, kind, name, f"{qual}.{name}")
                        return
                scope = scope.parent if scope.correlated else None
            self.issues.append(
                ExtractionIssue(
                    "unresolved_column", f"{qual}.{name}", "unknown table or alias"
                )
            )
            return

        scope = arm
        while scope is not None:
            matches = [
                (src, kind)
                for src, kind in self._sources_of(scope)
                if self._source_has_column(src, kind, name)
            ]
            if matches:
                if len(matches) > 1:
                    self.issues.append(
                        ExtractionIssue(
                            "ambiguous_column", name,
                            "present in "
                            + ", ".join(s.key or "<anonymous>" for s, _ in matches),
                        )
                    )
                self._attribute(*matches[0], column=name, context=name)
                return
            scope = scope.parent if scope.correlated else None
        self.issues.append(
            ExtractionIssue("unresolved_column", name, "not found in any in-scope table")
        )

    def _resolve_star(self, arm: _Scope, qual: str | None) -> None:
        if qual is None:
            for src, kind in self._sources_of(arm):
                self._expand_source_star(src, kind)
            return
        scope: _Scope | None = arm
        while scope is not None:
            for src, kind in self._sources_of(scope):
                if src.key == qual:
                    self._expand_source_star(src, kind)
                    return
            scope = scope.parent if scope.correlated else None
        self.issues.append(
            ExtractionIssue("unresolved_column", f"{qual}.*", "unknown table or alias")
        )

    def _expand_source_star(self, src: _Source, kind: str) -> None:
        if kind == "table":
            cols = self.out.setdefault(src.table, set())
            if self.expand_star:
                cols.update(self.catalog.columns_of(src.table))
        # derived sources: their projection refs were already collected

    def _resolve_using(self, arm: _Scope, name: str) -> None:
        hit = False
        for src, kind in self._sources_of(arm):
            if self._source_has_column(src, kind, name):
                self._attribute(src, kind, name, f"USING({name})")
                hit = True
        if not hit:
            self.issues.append(
                ExtractionIssue("unresolved_column", name, "USING column not found")
            )

    # -- projection through derived tables / CTEs ---------------------------
    def _project(self, scope: _Scope, column: str) -> frozenset[tuple[str, str]] | None:
        """Base (table, column) pairs behind output column `column` of a subselect."""
        guard = (id(scope), column)
        if guard in self._projecting:
            return frozenset()
        self._projecting.add(guard)
        try:
            arm = scope  # first arm names the compound's output columns
            if scope.cte_columns is not None:
                if column not in scope.cte_columns:
                    return None
                index = scope.cte_columns.index(column)
                if index >= len(arm.items):
                    return None
                return self._project_item(arm, arm.items[index])
            for item in arm.items:
                if item.output_name == column:
                    return self._project_item(arm, item)
            # fall through to star items
            for item in arm.items:
                if item.star_qual is _ABSENT:
                    continue
                pairs = self._project_star_member(arm, item.star_qual, column)
                if pairs is not None:
                    return pairs
            return None
        finally:
            self._projecting.discard(guard)

    def _project_item(self, arm: _Scope, item: _SelectItem) -> frozenset[tuple[str, str]]:
        pairs: set[tuple[str, str]] = set()
        for qual, name in item.refs:
            pairs |= self._resolve_ref_pairs(arm, qual, name)
        return frozenset(pairs)

    def _project_star_member(
        self, arm: _Scope, qual: object, column: str
    ) -> frozenset[tuple[str, str]] | None:
        for src, kind in self._sources_of(arm):
            if qual is not None and src.key != qual:
                continue
            if kind == "table" and self.catalog.has_column(src.table, column):
                return frozenset({(src.table, column)})
            if kind == "derived":
                pairs = self._project(src.scope, column)
                if pairs is not None:
                    return pairs
        return None

    def _resolve_ref_pairs(
        self, arm: _Scope, qual: str | None, name: str
    ) -> set[tuple[str, str]]:
        """Like _resolve_colref but returns pairs instead of writing issues."""
        if qual is not None:
            scope: _Scope | None = arm
            while scope is not None:
                for src, kind in self._sources_of(scope):
                    if src.key == qual:
                        return self._pairs_for(src, kind, name)
                scope = scope.parent if scope.correlated else None
            return set()
        scope = arm
        while scope is not None:
            for src, kind in self._sources_of(scope):
                if self._source_has_column(src, kind, name):
                    return self._pairs_for(src, kind, name)
            scope = scope.parent if scope.correlated else None
        return set()

    def _pairs_for(self, src: _Source, kind: str, name: str) -> set[tuple[str, str]]:
        if kind == "table" and self.catalog.has_column(src.table, name):
            return {(src.table, name)}
        if kind == "derived":
            pairs = self._project(src.scope, name)
            return set(pairs) if pairs else set()
        return set()


# ----------------------------------------------------------------------------
# Public API

def extract_schema_report(
    sql: str, catalog: Catalog, *, expand_star: bool = False
) -> Extraction:
    """Extract the referenced schema plus per-column resolution issues.

    Raises :class:`SchemaExtractionError` when the statement cannot be
    parsed; resolution problems (unknown columns, ambiguity) are returned
    as issues, never raised.
    """
    if not sql or not sql.strip():
        raise SchemaExtractionError("empty SQL statement")
    try:
        tokens = tokenize(sql)
        scope = _Parser(tokens).parse_statement()
    except SQLSyntaxError as exc:
        raise SchemaExtractionError(str(exc)) from exc
    return _Resolver(catalog, expand_star).run(scope)


def extract_schema(sql: str, catalog: Catalog, *, expand_star: bool = False) -> SchemaSet:
    """Referenced tables and columns of a SELECT statement, as a SchemaSet."""
    return extract_schema_report(sql, catalog, expand_star=expand_star).schema
