"""Tokenizer and recursive-descent parser for the SQLite SELECT dialect.

Covers the query shapes that occur in BIRD/Spider-style workloads: WITH,
compound selects, joins, subqueries, window functions, CASE, CAST, IN /
BETWEEN / LIKE / IS. It is a structural parser for constraint checking, not
a validating one: it does not resolve names or types (the database engine
does that during the syntax stage).
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Iterator, Optional, Union


class ParseError(Exception):
    def __init__(self, position: int, message: str):
        super().__init__(f"{message} (at position {position})")
        self.position = position
        self.message = message


# ---------------------------------------------------------------------------
# Tokenizer
# ---------------------------------------------------------------------------

WORD = "word"
NUMBER = "number"
STRING = "string"
IDENT = "ident"  # quoted identifier: "x", `x`, [x]
OP = "op"
PUNCT = "punct"
PARAM = "param"
EOF = "eof"

_MULTI_OPS = (">=", "<=", "<>", "!=", "==", "||")
_SINGLE_OPS = "=<>+-*/%~&|"
_PUNCT = "(),.;"


@dataclass(frozen=True)
class Token:
    type: str
    text: str
    pos: int

    @property
    def upper(self) -> str:
        return self.text.upper()

    @property
    def end(self) -> int:
        return self.pos + len(self.text)


def tokenize(sql: str) -> list[Token]:
    tokens: list[Token] = []
    i, n = 0, len(sql)
    while i < n:
        ch = sql[i]
        if ch.isspace():
            i += 1
            continue
        if sql.startswith("--", i):
            j = sql.find("\n", i)
            i = n if j < 0 else j + 1
            continue
        if sql.startswith("/*", i):
            j = sql.find("*/", i + 2)
            if j < 0:
                raise ParseError(i, "unterminated block comment")
            i = j + 2
            continue
        if ch == "'":
            j = i + 1
            while True:
                j = sql.find("'", j)
                if j < 0:
                    raise ParseError(i, "unterminated string literal")
                if j + 1 < n and sql[j + 1] == "'":  # doubled quote escape
                    j += 2
                    continue
                break
            tokens.append(Token(STRING, sql[i : j + 1], i))
            i = j + 1
            continue
        if ch == '"' or ch == "`":
            j = sql.find(ch, i + 1)
            if j < 0:
                raise ParseError(i, "unterminated quoted identifier")
            tokens.append(Token(IDENT, sql[i : j + 1], i))
            i = j + 1
            continue
        if ch == "[":
            j = sql.find("]", i + 1)
            if j < 0:
                raise ParseError(i, "unterminated bracketed identifier")
            tokens.append(Token(IDENT, sql[i : j + 1], i))
            i = j + 1
            continue
        if ch.isdigit() or (ch == "." and i + 1 < n and sql[i + 1].isdigit()):
            j = i
            if sql.startswith(("0x", "0X"), i):
                j = i + 2
                while j < n and sql[j] in "0123456789abcdefABCDEF":
                    j += 1
            else:
                while j < n and (sql[j].isdigit() or sql[j] == "."):
                    j += 1
                if j < n and sql[j] in "eE":
                    k = j + 1
                    if k < n and sql[k] in "+-":
                        k += 1
                    if k < n and sql[k].isdigit():
                        j = k
                        while j < n and sql[j].isdigit():
                            j += 1
            tokens.append(Token(NUMBER, sql[i:j], i))
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (sql[j].isalnum() or sql[j] == "_"):
                j += 1
            tokens.append(Token(WORD, sql[i:j], i))
            i = j
            continue
        if ch == "?" or (ch == ":" and i + 1 < n and (sql[i + 1].isalpha() or sql[i + 1] == "_")):
            j = i + 1
            while j < n and (sql[j].isalnum() or sql[j] == "_"):
                j += 1
            tokens.append(Token(PARAM, sql[i:j], i))
            i = j
            continue
        matched = False
        for op in _MULTI_OPS:
            if sql.startswith(op, i):
                tokens.append(Token(OP, op, i))
                i += len(op)
                matched = True
                break
        if matched:
            continue
        if ch in _SINGLE_OPS:
            tokens.append(Token(OP, ch, i))
            i += 1
            continue
        if ch in _PUNCT:
            tokens.append(Token(PUNCT, ch, i))
            i += 1
            continue
        raise ParseError(i, f"unexpected character {ch!r}")
    tokens.append(Token(EOF, "", n))
    return tokens


def first_keyword(sql: str) -> str:
    """First word of the statement, uppercased; '' when there is none."""
    try:
        toks = tokenize(sql)
    except ParseError:
        return ""
    return toks[0].upper if toks[0].type == WORD else ""


# ---------------------------------------------------------------------------
# AST nodes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Literal:
    value: object  # None | bool | int | float | str
    raw: str = ""
    is_string: bool = False


@dataclass(frozen=True)
class ColumnRef:
    name: str
    table: Optional[str] = None


@dataclass(frozen=True)
class Star:
    table: Optional[str] = None


@dataclass(frozen=True)
class Parameter:
    name: str


@dataclass(frozen=True)
class BinaryOp:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class UnaryOp:
    op: str
    operand: object


@dataclass(frozen=True)
class OrderingTerm:
    expr: object
    direction: Optional[str] = None  # 'ASC' | 'DESC' | None (engine default: ASC)


@dataclass(frozen=True)
class WindowSpec:
    partition_by: tuple = ()
    order_by: tuple[OrderingTerm, ...] = ()
    name: Optional[str] = None  # named window reference


@dataclass(frozen=True)
class FuncCall:
    name: str  # uppercased
    args: tuple = ()
    distinct: bool = False
    star: bool = False
    window: Optional[WindowSpec] = None
    filter_where: Optional[object] = None


@dataclass(frozen=True)
class When:
    condition: object
    result: object


@dataclass(frozen=True)
class CaseExpr:
    operand: Optional[object]
    whens: tuple[When, ...]
    else_result: Optional[object] = None


@dataclass(frozen=True)
class CastExpr:
    expr: object
    type_name: str


@dataclass(frozen=True)
class ExprList:
    items: tuple = ()


@dataclass(frozen=True)
class Subquery:
    query: "Query"


@dataclass(frozen=True)
class ExistsExpr:
    query: "Query"
    negated: bool = False


@dataclass(frozen=True)
class InExpr:
    expr: object
    items: object  # ExprList or Subquery
    negated: bool = False


@dataclass(frozen=True)
class BetweenExpr:
    expr: object
    low: object
    high: object
    negated: bool = False


@dataclass(frozen=True)
class SelectItem:
    expr: object
    alias: Optional[str] = None


@dataclass(frozen=True)
class TableSource:
    name: str
    alias: Optional[str] = None


@dataclass(frozen=True)
class SubquerySource:
    query: "Query"
    alias: Optional[str] = None


@dataclass(frozen=True)
class Join:
    kind: str  # 'JOIN', 'LEFT JOIN', ',', ...
    source: object
    on: Optional[object] = None
    using: tuple[str, ...] = ()


@dataclass(frozen=True)
class Select:
    items: tuple[SelectItem, ...]
    distinct: bool = False
    from_source: Optional[object] = None
    joins: tuple[Join, ...] = ()
    where: Optional[object] = None
    group_by: tuple = ()
    having: Optional[object] = None


@dataclass(frozen=True)
class Limit:
    count: object
    offset: Optional[object] = None
    count_span: Optional[tuple[int, int]] = None  # raw-text span of a plain integer count

    def count_value(self) -> Optional[int]:
        if isinstance(self.count, Literal) and isinstance(self.count.value, int):
            return self.count.value
        return None


@dataclass(frozen=True)
class Cte:
    name: str
    query: "Query"
    columns: tuple[str, ...] = ()


@dataclass(frozen=True)
class Query:
    cores: tuple[Select, ...]
    compound_ops: tuple[str, ...] = ()
    order_by: tuple[OrderingTerm, ...] = ()
    limit: Optional[Limit] = None
    ctes: tuple[Cte, ...] = ()


@dataclass(frozen=True)
class SqlAst:
    """Parsed single SELECT/WITH statement plus its original text."""

    kind: str  # 'select' | 'with_select'
    query: Query
    raw_text: str

    @property
    def top(self) -> Select:
        return self.query.cores[0]


def walk(node) -> Iterator[object]:
    """Yield every AST dataclass node reachable from ``node``, depth-first."""
    stack = [node]
    while stack:
        cur = stack.pop()
        if cur is None:
            continue
        if isinstance(cur, (list, tuple)):
            stack.extend(cur)
            continue
        if not dataclasses.is_dataclass(cur):
            continue
        yield cur
        for f in dataclasses.fields(cur):
            stack.append(getattr(cur, f.name))


def iter_queries(ast: SqlAst) -> Iterator[Query]:
    for node in walk(ast.query):
        if isinstance(node, Query):
            yield node


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

# Words that terminate an expression / cannot be a bare alias.
_RESERVED = {
    "SELECT", "FROM", "WHERE", "GROUP", "HAVING", "ORDER", "LIMIT", "OFFSET",
    "UNION", "INTERSECT", "EXCEPT", "ON", "USING", "JOIN", "LEFT", "RIGHT",
    "FULL", "INNER", "OUTER", "CROSS", "NATURAL", "AS", "AND", "OR", "NOT",
    "IN", "IS", "LIKE", "GLOB", "REGEXP", "MATCH", "BETWEEN", "ESCAPE",
    "WHEN", "THEN", "ELSE", "END", "CASE", "ASC", "DESC", "COLLATE", "OVER",
    "FILTER", "NULLS", "BY", "DISTINCT", "ALL", "EXISTS", "WITH", "WINDOW",
}

_JOIN_INTRO = {"JOIN", "LEFT", "RIGHT", "FULL", "INNER", "OUTER", "CROSS", "NATURAL"}

_COMPARISON_OPS = {"=", "==", "!=", "<>", "<", ">", "<=", ">="}


def _unquote_ident(text: str) -> str:
    if text and text[0] in "\"`[":
        return text[1:-1]
    return text


def _string_value(text: str) -> str:
    return text[1:-1].replace("''", "'")


class _Parser:
    def __init__(self, sql: str):
        self.sql = sql
        self.toks = tokenize(sql)
        self.i = 0

    # -- token helpers ------------------------------------------------------

    def peek(self, offset: int = 0) -> Token:
        j = min(self.i + offset, len(self.toks) - 1)
        return self.toks[j]

    def advance(self) -> Token:
        tok = self.toks[self.i]
        if tok.type != EOF:
            self.i += 1
        return tok

    def at_word(self, *words: str) -> bool:
        tok = self.peek()
        return tok.type == WORD and tok.upper in words

    def accept_word(self, *words: str) -> Optional[Token]:
        if self.at_word(*words):
            return self.advance()
        return None

    def expect_word(self, word: str) -> Token:
        tok = self.peek()
        if tok.type != WORD or tok.upper != word:
            raise ParseError(tok.pos, f"expected {word}")
        return self.advance()

    def at_punct(self, ch: str) -> bool:
        tok = self.peek()
        return tok.type == PUNCT and tok.text == ch

    def accept_punct(self, ch: str) -> bool:
        if self.at_punct(ch):
            self.advance()
            return True
        return False

    def expect_punct(self, ch: str) -> Token:
        tok = self.peek()
        if tok.type != PUNCT or tok.text != ch:
            raise ParseError(tok.pos, f"expected '{ch}'")
        return self.advance()

    def _name(self) -> str:
        tok = self.peek()
        if tok.type == WORD:
            return self.advance().text
        if tok.type == IDENT:
            return _unquote_ident(self.advance().text)
        raise ParseError(tok.pos, "expected a name")

    # -- statement ----------------------------------------------------------

    def parse_statement(self) -> Query:
        tok = self.peek()
        if not self.at_word("SELECT", "WITH"):
            raise ParseError(tok.pos, "only a single SELECT or WITH ... SELECT statement is supported")
        query = self.parse_query()
        self.accept_punct(";")
        tail = self.peek()
        if tail.type != EOF:
            raise ParseError(tail.pos, "multiple SQL statements are not allowed")
        return query

    def parse_query(self) -> Query:
        ctes: list[Cte] = []
        if self.accept_word("WITH"):
            self.accept_word("RECURSIVE")
            while True:
                name = self._name()
                cols: list[str] = []
                if self.accept_punct("("):
                    while True:
                        cols.append(self._name())
                        if not self.accept_punct(","):
                            break
                    self.expect_punct(")")
                self.expect_word("AS")
                self.expect_punct("(")
                body = self.parse_query()
                self.expect_punct(")")
                ctes.append(Cte(name=name, query=body, columns=tuple(cols)))
                if not self.accept_punct(","):
                    break

        cores = [self.parse_select_core()]
        ops: list[str] = []
        while self.at_word("UNION", "INTERSECT", "EXCEPT"):
            op = self.advance().upper
            if op == "UNION" and self.accept_word("ALL"):
                op = "UNION ALL"
            cores.append(self.parse_select_core())
            ops.append(op)

        order_by: tuple[OrderingTerm, ...] = ()
        if self.at_word("ORDER"):
            order_by = self.parse_order_by()
        limit = self.parse_limit() if self.at_word("LIMIT") else None
        return Query(
            cores=tuple(cores),
            compound_ops=tuple(ops),
            order_by=order_by,
            limit=limit,
            ctes=tuple(ctes),
        )

    def parse_select_core(self) -> Select:
        self.expect_word("SELECT")
        distinct = False
        if self.accept_word("DISTINCT"):
            distinct = True
        else:
            self.accept_word("ALL")

        items = [self.parse_select_item()]
        while self.accept_punct(","):
            items.append(self.parse_select_item())

        from_source = None
        joins: list[Join] = []
        if self.accept_word("FROM"):
            from_source = self.parse_table_source()
            while True:
                if self.accept_punct(","):
                    joins.append(Join(kind=",", source=self.parse_table_source()))
                    continue
                if self.peek().type == WORD and self.peek().upper in _JOIN_INTRO:
                    joins.append(self.parse_join())
                    continue
                break

        where = None
        if self.accept_word("WHERE"):
            where = self.parse_expr()
        group_by: tuple = ()
        if self.accept_word("GROUP"):
            self.expect_word("BY")
            exprs = [self.parse_expr()]
            while self.accept_punct(","):
                exprs.append(self.parse_expr())
            group_by = tuple(exprs)
        having = None
        if self.accept_word("HAVING"):
            having = self.parse_expr()
        return Select(
            items=tuple(items),
            distinct=distinct,
            from_source=from_source,
            joins=tuple(joins),
            where=where,
            group_by=group_by,
            having=having,
        )

    def parse_select_item(self) -> SelectItem:
        tok = self.peek()
        if tok.type == OP and tok.text == "*":
            self.advance()
            return SelectItem(expr=Star())
        # table.* needs two-token lookahead before falling into expressions
        if (
            tok.type in (WORD, IDENT)
            and self.peek(1).type == PUNCT
            and self.peek(1).text == "."
            and self.peek(2).type == OP
            and self.peek(2).text == "*"
        ):
            name = self._name()
            self.advance()  # '.'
            self.advance()  # '*'
            return SelectItem(expr=Star(table=name))
        expr = self.parse_expr()
        alias = self.parse_alias()
        return SelectItem(expr=expr, alias=alias)

    def parse_alias(self) -> Optional[str]:
        if self.accept_word("AS"):
            tok = self.peek()
            if tok.type == STRING:
                self.advance()
                return _string_value(tok.text)
            return self._name()
        tok = self.peek()
        if tok.type == IDENT:
            return _unquote_ident(self.advance().text)
        if tok.type == WORD and tok.upper not in _RESERVED:
            return self.advance().text
        return None

    def parse_table_source(self):
        if self.accept_punct("("):
            if self.at_word("SELECT", "WITH"):
                query = self.parse_query()
                self.expect_punct(")")
                return SubquerySource(query=query, alias=self.parse_alias())
            # parenthesized join group: parse the inner source chain
            inner = self.parse_table_source()
            joins = []
            while True:
                if self.accept_punct(","):
                    joins.append(Join(kind=",", source=self.parse_table_source()))
                    continue
                if self.peek().type == WORD and self.peek().upper in _JOIN_INTRO:
                    joins.append(self.parse_join())
                    continue
                break
            self.expect_punct(")")
            if joins:
                # represent the group as a nested anonymous select source
                group = Select(items=(SelectItem(expr=Star()),), from_source=inner, joins=tuple(joins))
                return SubquerySource(query=Query(cores=(group,)), alias=self.parse_alias())
            return inner
        name = self._name()
        while self.accept_punct("."):  # db.table
            name = self._name()
        return TableSource(name=name, alias=self.parse_alias())

    def parse_join(self) -> Join:
        words = []
        while self.peek().type == WORD and self.peek().upper in _JOIN_INTRO:
            words.append(self.advance().upper)
            if words[-1] == "JOIN":
                break
        if words[-1] != "JOIN":
            raise ParseError(self.peek().pos, "expected JOIN")
        source = self.parse_table_source()
        on = None
        using: tuple[str, ...] = ()
        if self.accept_word("ON"):
            on = self.parse_expr()
        elif self.accept_word("USING"):
            self.expect_punct("(")
            cols = [self._name()]
            while self.accept_punct(","):
                cols.append(self._name())
            self.expect_punct(")")
            using = tuple(cols)
        return Join(kind=" ".join(words), source=source, on=on, using=using)

    def parse_order_by(self) -> tuple[OrderingTerm, ...]:
        self.expect_word("ORDER")
        self.expect_word("BY")
        terms = [self.parse_ordering_term()]
        while self.accept_punct(","):
            terms.append(self.parse_ordering_term())
        return tuple(terms)

    def parse_ordering_term(self) -> OrderingTerm:
        expr = self.parse_expr()
        direction = None
        if self.accept_word("ASC"):
            direction = "ASC"
        elif self.accept_word("DESC"):
            direction = "DESC"
        if self.accept_word("NULLS"):
            if not (self.accept_word("FIRST") or self.accept_word("LAST")):
                raise ParseError(self.peek().pos, "expected FIRST or LAST")
        return OrderingTerm(expr=expr, direction=direction)

    def parse_limit(self) -> Limit:
        self.expect_word("LIMIT")
        start = self.i
        e1 = self.parse_expr()
        span1 = self._literal_span(start)
        if self.accept_punct(","):
            # SQLite/MySQL short form: LIMIT offset, count
            start2 = self.i
            e2 = self.parse_expr()
            return Limit(count=e2, offset=e1, count_span=self._literal_span(start2))
        if self.accept_word("OFFSET"):
            off = self.parse_expr()
            return Limit(count=e1, offset=off, count_span=span1)
        return Limit(count=e1, count_span=span1)

    def _literal_span(self, start_index: int) -> Optional[tuple[int, int]]:
        # span only when the expression was a single NUMBER token
        if self.i - start_index == 1 and self.toks[start_index].type == NUMBER:
            tok = self.toks[start_index]
            return (tok.pos, tok.end)
        return None

    # -- expressions ---------------------------------------------------------

    def parse_expr(self):
        return self.parse_or()

    def parse_or(self):
        left = self.parse_and()
        while self.accept_word("OR"):
            left = BinaryOp("OR", left, self.parse_and())
        return left

    def parse_and(self):
        left = self.parse_not()
        while self.accept_word("AND"):
            left = BinaryOp("AND", left, self.parse_not())
        return left

    def parse_not(self):
        if self.at_word("NOT") and not (self.peek(1).type == WORD and self.peek(1).upper == "EXISTS"):
            self.advance()
            return UnaryOp("NOT", self.parse_not())
        return self.parse_comparison()

    def parse_comparison(self):
        left = self.parse_additive()
        while True:
            tok = self.peek()
            if tok.type == OP and tok.text in _COMPARISON_OPS:
                self.advance()
                op = {"==": "=", "<>": "!="}.get(tok.text, tok.text)
                left = BinaryOp(op, left, self.parse_additive())
                continue
            if tok.type == WORD:
                negated = False
                save = self.i
                if tok.upper == "NOT":
                    nxt = self.peek(1)
                    if nxt.type == WORD and nxt.upper in ("IN", "LIKE", "BETWEEN", "GLOB", "REGEXP", "MATCH"):
                        self.advance()
                        negated = True
                        tok = self.peek()
                    else:
                        break
                if tok.upper == "IS":
                    self.advance()
                    op = "IS NOT" if self.accept_word("NOT") else "IS"
                    left = BinaryOp(op, left, self.parse_additive())
                    continue
                if tok.upper == "IN":
                    self.advance()
                    self.expect_punct("(")
                    if self.at_word("SELECT", "WITH"):
                        items: object = Subquery(self.parse_query())
                    elif self.at_punct(")"):
                        items = ExprList(())
                    else:
                        exprs = [self.parse_expr()]
                        while self.accept_punct(","):
                            exprs.append(self.parse_expr())
                        items = ExprList(tuple(exprs))
                    self.expect_punct(")")
                    left = InExpr(expr=left, items=items, negated=negated)
                    continue
                if tok.upper == "BETWEEN":
                    self.advance()
                    low = self.parse_additive()
                    self.expect_word("AND")
                    high = self.parse_additive()
                    left = BetweenExpr(expr=left, low=low, high=high, negated=negated)
                    continue
                if tok.upper in ("LIKE", "GLOB", "REGEXP", "MATCH"):
                    self.advance()
                    right = self.parse_additive()
                    if self.accept_word("ESCAPE"):
                        self.parse_additive()
                    op = ("NOT " if negated else "") + tok.upper
                    left = BinaryOp(op, left, right)
                    continue
                self.i = save
                break
            break
        return left

    def parse_additive(self):
        left = self.parse_multiplicative()
        while True:
            tok = self.peek()
            if tok.type == OP and tok.text in ("+", "-", "||", "&", "|"):
                self.advance()
                left = BinaryOp(tok.text, left, self.parse_multiplicative())
                continue
            return left

    def parse_multiplicative(self):
        left = self.parse_unary()
        while True:
            tok = self.peek()
            if tok.type == OP and tok.text in ("*", "/", "%"):
                self.advance()
                left = BinaryOp(tok.text, left, self.parse_unary())
                continue
            return left

    def parse_unary(self):
        tok = self.peek()
        if tok.type == OP and tok.text in ("-", "+", "~"):
            self.advance()
            return UnaryOp(tok.text, self.parse_unary())
        return self.parse_primary()

    def parse_primary(self):
        tok = self.peek()
        if tok.type == NUMBER:
            self.advance()
            text = tok.text
            if text.lower().startswith("0x"):
                value: object = int(text, 16)
            elif any(c in text for c in ".eE"):
                value = float(text)
            else:
                value = int(text)
            return Literal(value=value, raw=text)
        if tok.type == STRING:
            self.advance()
            return Literal(value=_string_value(tok.text), raw=tok.text, is_string=True)
        if tok.type == PARAM:
            self.advance()
            return Parameter(tok.text)
        if tok.type == PUNCT and tok.text == "(":
            self.advance()
            if self.at_word("SELECT", "WITH"):
                query = self.parse_query()
                self.expect_punct(")")
                return Subquery(query)
            exprs = [self.parse_expr()]
            while self.accept_punct(","):
                exprs.append(self.parse_expr())
            self.expect_punct(")")
            if len(exprs) == 1:
                return exprs[0]
            return ExprList(tuple(exprs))
        if tok.type in (WORD, IDENT):
            return self.parse_word_expr()
        raise ParseError(tok.pos, f"unexpected token {tok.text!r}")

    def parse_word_expr(self):
        tok = self.peek()
        upper = tok.upper if tok.type == WORD else ""
        if upper == "NULL":
            self.advance()
            return Literal(value=None, raw="NULL")
        if upper in ("TRUE", "FALSE"):
            self.advance()
            return Literal(value=(upper == "TRUE"), raw=tok.text)
        if upper == "CAST":
            self.advance()
            self.expect_punct("(")
            expr = self.parse_expr()
            self.expect_word("AS")
            type_words = [self._name()]
            while self.peek().type == WORD and not self.at_punct(")"):
                type_words.append(self.advance().text)
            if self.accept_punct("("):
                while not self.accept_punct(")"):
                    self.advance()
            self.expect_punct(")")
            return CastExpr(expr=expr, type_name=" ".join(type_words))
        if upper == "CASE":
            return self.parse_case()
        if upper == "EXISTS" or (upper == "NOT" and self.peek(1).type == WORD and self.peek(1).upper == "EXISTS"):
            negated = upper == "NOT"
            if negated:
                self.advance()
            self.expect_word("EXISTS")
            self.expect_punct("(")
            query = self.parse_query()
            self.expect_punct(")")
            return ExistsExpr(query=query, negated=negated)
        # function call?
        if self.peek(1).type == PUNCT and self.peek(1).text == "(":
            return self.parse_func_call()
        # column reference, possibly dotted
        name = self._name()
        table = None
        while self.accept_punct("."):
            nxt = self.peek()
            if nxt.type == OP and nxt.text == "*":
                self.advance()
                return Star(table=name)
            table = name if table is None else table  # keep first qualifier
            name = self._name()
        return ColumnRef(name=name, table=table)

    def parse_case(self) -> CaseExpr:
        self.expect_word("CASE")
        operand = None
        if not self.at_word("WHEN"):
            operand = self.parse_expr()
        whens = []
        while self.accept_word("WHEN"):
            cond = self.parse_expr()
            self.expect_word("THEN")
            whens.append(When(condition=cond, result=self.parse_expr()))
        if not whens:
            raise ParseError(self.peek().pos, "CASE requires at least one WHEN")
        else_result = None
        if self.accept_word("ELSE"):
            else_result = self.parse_expr()
        self.expect_word("END")
        return CaseExpr(operand=operand, whens=tuple(whens), else_result=else_result)

    def parse_func_call(self) -> FuncCall:
        name = self._name().upper()
        self.expect_punct("(")
        distinct = False
        star = False
        args: list = []
        if self.at_punct(")"):
            pass
        elif self.peek().type == OP and self.peek().text == "*":
            self.advance()
            star = True
        else:
            if self.accept_word("DISTINCT"):
                distinct = True
            args.append(self.parse_expr())
            while self.accept_punct(","):
                args.append(self.parse_expr())
        self.expect_punct(")")

        filter_where = None
        if self.at_word("FILTER"):
            self.advance()
            self.expect_punct("(")
            self.expect_word("WHERE")
            filter_where = self.parse_expr()
            self.expect_punct(")")

        window = None
        if self.accept_word("OVER"):
            window = self.parse_window()
        return FuncCall(
            name=name,
            args=tuple(args),
            distinct=distinct,
            star=star,
            window=window,
            filter_where=filter_where,
        )

    def parse_window(self) -> WindowSpec:
        if not self.at_punct("("):
            return WindowSpec(name=self._name())
        self.expect_punct("(")
        partition: tuple = ()
        order: tuple[OrderingTerm, ...] = ()
        if self.accept_word("PARTITION"):
            self.expect_word("BY")
            exprs = [self.parse_expr()]
            while self.accept_punct(","):
                exprs.append(self.parse_expr())
            partition = tuple(exprs)
        if self.at_word("ORDER"):
            order = self.parse_order_by()
        # frame clauses (ROWS/RANGE/GROUPS ...) carry no checkable structure
        depth = 1
        while depth > 0:
            tok = self.advance()
            if tok.type == EOF:
                raise ParseError(tok.pos, "unterminated window specification")
            if tok.type == PUNCT and tok.text == "(":
                depth += 1
            elif tok.type == PUNCT and tok.text == ")":
                depth -= 1
        return WindowSpec(partition_by=partition, order_by=order)


def parse_sql(sql: str) -> SqlAst:
    """Parse a single SELECT/WITH statement; raise ParseError otherwise."""
    if not sql or not sql.strip():
        raise ParseError(0, "empty statement")
    parser = _Parser(sql)
    query = parser.parse_statement()
    kind = "with_select" if query.ctes else "select"
    return SqlAst(kind=kind, query=query, raw_text=sql)
