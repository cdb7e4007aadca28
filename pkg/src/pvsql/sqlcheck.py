"""Constraint-satisfaction checks over parsed SQL.

Each check looks for the SQL construct that discharges one extracted
constraint (DISTINCT for uniqueness, ORDER BY + LIMIT for top-k, ...).
Checks are pure AST functions: they never touch the database. Constructs are
searched through the whole tree, subqueries and CTEs included; presence
anywhere satisfies.

The inverse direction, ``derive_constraints_from_sql``, reads the constraint
set a query already satisfies off its own AST. It is used as the oracle
constraint list when re-running repairs against gold queries.
"""

from __future__ import annotations

from typing import Iterable, Optional

from .core import Constraint, ConstraintKind, SchemaDescription, Violation, ViolationSource, sort_constraints
from .sqlast import (
    BinaryOp,
    ColumnRef,
    FuncCall,
    Literal,
    Query,
    Select,
    SqlAst,
    parse_sql,
    walk,
)

__all__ = [
    "parse_sql",
    "check_constraint",
    "check_all",
    "derive_constraints_from_sql",
]

_RANK_FUNCS = {"RANK", "DENSE_RANK", "ROW_NUMBER"}
_DATE_NAME_HINTS = ("date", "time", "year")
_QUOTE_CHARS = str.maketrans("", "", "'\"`")


def _normalize_sql_text(text: str) -> str:
    return text.lower().translate(_QUOTE_CHARS)


def _has_distinct(ast: SqlAst) -> bool:
    for node in walk(ast.query):
        if isinstance(node, Select) and node.distinct:
            return True
        if isinstance(node, FuncCall) and node.distinct:
            return True
    return False


def _has_group_by(ast: SqlAst) -> bool:
    return any(isinstance(n, Select) and n.group_by for n in walk(ast.query))


def _func_names(ast: SqlAst) -> set[str]:
    return {n.name for n in walk(ast.query) if isinstance(n, FuncCall)}


def _has_rank_window(ast: SqlAst) -> bool:
    return any(
        isinstance(n, FuncCall) and n.name in _RANK_FUNCS and n.window is not None
        for n in walk(ast.query)
    )


def _ordered_limit_values(ast: SqlAst) -> list[int]:
    """LIMIT counts of every query level that also carries an ORDER BY."""
    values = []
    for node in walk(ast.query):
        if isinstance(node, Query) and node.order_by and node.limit is not None:
            n = node.limit.count_value()
            if n is not None:
                values.append(n)
    return values


def _division_in_select(ast: SqlAst) -> bool:
    for node in walk(ast.query):
        if isinstance(node, Select):
            for item in node.items:
                if any(isinstance(e, BinaryOp) and e.op == "/" for e in walk(item.expr)):
                    return True
    return False


def _multiplication_by_100(ast: SqlAst) -> bool:
    for node in walk(ast.query):
        if isinstance(node, BinaryOp) and node.op == "*":
            for side in (node.left, node.right):
                if isinstance(side, Literal) and side.value in (100, 100.0):
                    return True
    return False


def _is_date_like(column: ColumnRef, schema: Optional[SchemaDescription]) -> bool:
    name = column.name.lower()
    if any(h in name for h in _DATE_NAME_HINTS):
        return True
    if schema is not None:
        declared = schema.column_type(column.name)
        if declared and any(h in declared.lower() for h in ("date", "time")):
            return True
    return False


def _temporal_order_present(ast: SqlAst, direction: Optional[str], schema: Optional[SchemaDescription]) -> bool:
    for node in walk(ast.query):
        if not isinstance(node, Query):
            continue
        for term in node.order_by:
            effective = (term.direction or "ASC").lower()
            if direction is not None and effective != direction:
                continue
            columns = [e for e in walk(term.expr)] if term.expr is not None else []
            if any(isinstance(e, ColumnRef) and _is_date_like(e, schema) for e in columns):
                return True
    return False


def _compare_op_present(ast: SqlAst, op: str) -> bool:
    for node in walk(ast.query):
        if not isinstance(node, Select):
            continue
        for clause in (node.where, node.having):
            if clause is None:
                continue
            if any(isinstance(e, BinaryOp) and e.op == op for e in walk(clause)):
                return True
    return False


def check_constraint(
    ast: SqlAst, c: Constraint, schema: Optional[SchemaDescription] = None
) -> Optional[Violation]:
    """Return None when the SQL satisfies ``c``, else a descriptive Violation."""
    kind = c.kind
    satisfied: bool
    message: str

    if kind is ConstraintKind.DISTINCT:
        satisfied = _has_distinct(ast) or _has_group_by(ast)
        message = "Question asks for unique values but SQL lacks DISTINCT or GROUP BY"
    elif kind is ConstraintKind.TOP_K:
        satisfied = isinstance(c.param, int) and c.param in _ordered_limit_values(ast)
        message = f"'{c.trigger or f'top {c.param}'}' requires ORDER BY ... LIMIT {c.param}"
    elif kind is ConstraintKind.RANKING:
        satisfied = _has_rank_window(ast)
        message = "Question asks for a rank/position but SQL lacks RANK(), DENSE_RANK() or ROW_NUMBER() with OVER"
    elif kind is ConstraintKind.COUNT:
        satisfied = "COUNT" in _func_names(ast)
        message = "Question asks for a count but SQL lacks COUNT(*) or COUNT(column)"
    elif kind is ConstraintKind.PERCENT:
        satisfied = _division_in_select(ast) or _multiplication_by_100(ast)
        message = "Question asks for a percentage/ratio but SQL lacks division or multiplication by 100 in SELECT"
    elif kind is ConstraintKind.SUM:
        satisfied = "SUM" in _func_names(ast)
        message = "Question asks for a total but SQL lacks SUM(...)"
    elif kind is ConstraintKind.AVERAGE:
        satisfied = "AVG" in _func_names(ast)
        message = "Question asks for an average but SQL lacks AVG(...)"
    elif kind is ConstraintKind.EXTREME:
        names = _func_names(ast)
        satisfied = "MAX" in names or "MIN" in names or 1 in _ordered_limit_values(ast)
        message = "Question asks for an extreme value but SQL lacks MAX()/MIN() or ORDER BY ... LIMIT 1"
    elif kind is ConstraintKind.TEMPORAL:
        direction = c.param if c.param in ("asc", "desc") else None
        satisfied = _temporal_order_present(ast, direction, schema)
        word = "DESC" if direction == "desc" else "ASC"
        message = f"Question asks for '{c.trigger}' but SQL lacks ORDER BY on a date/time column ({word})"
    elif kind is ConstraintKind.COMPARE:
        satisfied = isinstance(c.param, str) and _compare_op_present(ast, c.param)
        message = f"Question requires a {c.param} comparison but SQL has none in WHERE or HAVING"
    elif kind is ConstraintKind.LITERAL:
        needle = _normalize_sql_text(str(c.param))
        satisfied = bool(needle) and needle in _normalize_sql_text(ast.raw_text)
        message = f"'{c.param}' must appear in SQL"
    else:  # pragma: no cover - enum is closed
        raise ValueError(f"unknown constraint kind: {kind}")

    if satisfied:
        return None
    return Violation(source=ViolationSource.CONSTRAINT, message=message, constraint=c)


def check_all(
    ast: SqlAst, constraints: Iterable[Constraint], schema: Optional[SchemaDescription] = None
) -> list[Violation]:
    """Check every constraint in canonical kind order; empty list means all pass."""
    violations = []
    for c in sort_constraints(constraints):
        v = check_constraint(ast, c, schema)
        if v is not None:
            violations.append(v)
    return violations


def _predicate_literals(ast: SqlAst) -> list[Literal]:
    literals = []
    for node in walk(ast.query):
        if not isinstance(node, Select):
            continue
        for clause in (node.where, node.having):
            if clause is None:
                continue
            literals.extend(e for e in walk(clause) if isinstance(e, Literal))
    return literals


def derive_constraints_from_sql(ast: SqlAst) -> set[Constraint]:
    """Read off the constraint set a query satisfies by construction.

    Inverse of the checks above, so the result always passes ``check_all``
    against the same AST.
    """
    derived: set[Constraint] = set()
    names = _func_names(ast)

    if _has_distinct(ast):
        derived.add(Constraint(ConstraintKind.DISTINCT))
    for n in _ordered_limit_values(ast):
        derived.add(Constraint(ConstraintKind.TOP_K, param=n))
        if n == 1:
            derived.add(Constraint(ConstraintKind.EXTREME))
    if _has_rank_window(ast):
        derived.add(Constraint(ConstraintKind.RANKING))
    if "COUNT" in names:
        derived.add(Constraint(ConstraintKind.COUNT))
    if _division_in_select(ast):
        derived.add(Constraint(ConstraintKind.PERCENT))
    if "SUM" in names:
        derived.add(Constraint(ConstraintKind.SUM))
    if "AVG" in names:
        derived.add(Constraint(ConstraintKind.AVERAGE))
    if "MAX" in names or "MIN" in names:
        derived.add(Constraint(ConstraintKind.EXTREME))

    for lit in _predicate_literals(ast):
        if lit.value is None or isinstance(lit.value, bool):
            continue
        text = lit.value if lit.is_string else lit.raw
        if isinstance(text, str) and text.strip():
            derived.add(Constraint(ConstraintKind.LITERAL, param=text))
    return derived
