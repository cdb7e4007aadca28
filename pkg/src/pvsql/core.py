"""Shared domain types for the probe-and-verify text-to-SQL pipeline.

Everything here is an immutable value object with a canonical JSON encoding
(``to_dict`` / ``*_from_dict``), so records can be traced to JSONL and read
back without loss.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Optional, Union

Scalar = Union[None, int, float, str]


class Difficulty(str, Enum):
    SIMPLE = "simple"
    MODERATE = "moderate"
    CHALLENGING = "challenging"
    UNKNOWN = "unknown"  # Spider tasks carry no difficulty label


class ConstraintKind(str, Enum):
    """The verifiable constraint categories, in canonical check order."""

    DISTINCT = "distinct"
    TOP_K = "top_k"
    RANKING = "ranking"
    COUNT = "count"
    PERCENT = "percent"
    SUM = "sum"
    AVERAGE = "average"
    EXTREME = "extreme"
    TEMPORAL = "temporal"
    COMPARE = "compare"
    LITERAL = "literal_presence"


# Fixed ordering used whenever a set of constraints is checked or printed.
KIND_ORDER: dict[ConstraintKind, int] = {k: i for i, k in enumerate(ConstraintKind)}


class ViolationSource(str, Enum):
    SYNTAX = "syntax"
    EXECUTION = "execution"
    CONSTRAINT = "constraint"


class ErrorKind(str, Enum):
    DATABASE_MISINTERPRETATION = "database_misinterpretation"
    QUESTION_MISINTERPRETATION = "question_misinterpretation"
    SYNTHESIS_FAILURE = "synthesis_failure"


@dataclass(frozen=True)
class Task:
    """One benchmark item: a question to answer against a named database."""

    task_id: str
    db_id: str
    question: str
    evidence: str = ""
    gold_sql: Optional[str] = None
    difficulty: Difficulty = Difficulty.UNKNOWN

    def to_dict(self) -> dict[str, Any]:
        return {
            "task_id": self.task_id,
            "db_id": self.db_id,
            "question": self.question,
            "evidence": self.evidence,
            "gold_sql": self.gold_sql,
            "difficulty": self.difficulty.value,
        }


def task_from_dict(d: dict[str, Any]) -> Task:
    return Task(
        task_id=d["task_id"],
        db_id=d["db_id"],
        question=d["question"],
        evidence=d.get("evidence") or "",
        gold_sql=d.get("gold_sql"),
        difficulty=Difficulty(d.get("difficulty", "unknown")),
    )


@dataclass(frozen=True)
class ColumnInfo:
    column_name: str
    declared_type: str = ""
    is_primary_key: bool = False


@dataclass(frozen=True)
class TableInfo:
    table_name: str
    columns: tuple[ColumnInfo, ...] = ()


@dataclass(frozen=True)
class ForeignKey:
    from_table: str
    from_column: str
    to_table: str
    to_column: str


@dataclass(frozen=True)
class SchemaDescription:
    """Table/column layout of one database, as read from its catalog."""

    tables: tuple[TableInfo, ...] = ()
    foreign_keys: tuple[ForeignKey, ...] = ()

    def column_type(self, column_name: str) -> Optional[str]:
        """Declared type of the first column matching ``column_name`` (case-insensitive)."""
        want = column_name.lower()
        for t in self.tables:
            for c in t.columns:
                if c.column_name.lower() == want:
                    return c.declared_type
        return None

    def to_dict(self) -> dict[str, Any]:
        return {
            "tables": [
                {
                    "table_name": t.table_name,
                    "columns": [
                        {
                            "column_name": c.column_name,
                            "declared_type": c.declared_type,
                            "is_primary_key": c.is_primary_key,
                        }
                        for c in t.columns
                    ],
                }
                for t in self.tables
            ],
            "foreign_keys": [
                {
                    "from_table": f.from_table,
                    "from_column": f.from_column,
                    "to_table": f.to_table,
                    "to_column": f.to_column,
                }
                for f in self.foreign_keys
            ],
        }


def schema_from_dict(d: dict[str, Any]) -> SchemaDescription:
    return SchemaDescription(
        tables=tuple(
            TableInfo(
                table_name=t["table_name"],
                columns=tuple(
                    ColumnInfo(
                        column_name=c["column_name"],
                        declared_type=c.get("declared_type", ""),
                        is_primary_key=bool(c.get("is_primary_key", False)),
                    )
                    for c in t.get("columns", [])
                ),
            )
            for t in d.get("tables", [])
        ),
        foreign_keys=tuple(
            ForeignKey(f["from_table"], f["from_column"], f["to_table"], f["to_column"])
            for f in d.get("foreign_keys", [])
        ),
    )


@dataclass(frozen=True)
class Constraint:
    """A verifiable predicate extracted from the question text.

    ``param`` depends on the kind: row count for top-k, comparison operator
    for compare, sort direction for extreme/temporal, the required literal
    for literal-presence, otherwise None. ``trigger`` is the question
    substring that fired the rule.
    """

    kind: ConstraintKind
    param: Scalar = None
    trigger: str = ""

    def key(self) -> tuple[str, Scalar]:
        """Deduplication identity: kind plus parameter, trigger excluded."""
        return (self.kind.value, self.param)

    def describe(self) -> str:
        """Human-readable requirement, used in prompts and violation messages."""
        k = self.kind
        if k is ConstraintKind.DISTINCT:
            want = "needs DISTINCT or GROUP BY (unique values)"
        elif k is ConstraintKind.TOP_K:
            want = f"needs ORDER BY ... LIMIT {self.param}"
        elif k is ConstraintKind.RANKING:
            want = "needs a window rank function (RANK/DENSE_RANK/ROW_NUMBER)"
        elif k is ConstraintKind.COUNT:
            want = "needs COUNT(...)"
        elif k is ConstraintKind.PERCENT:
            want = "needs a percentage calculation (division or *100)"
        elif k is ConstraintKind.SUM:
            want = "needs SUM(...)"
        elif k is ConstraintKind.AVERAGE:
            want = "needs AVG(...)"
        elif k is ConstraintKind.EXTREME:
            want = "needs MAX()/MIN() or ORDER BY ... LIMIT 1"
        elif k is ConstraintKind.TEMPORAL:
            direction = "DESC" if self.param == "desc" else "ASC"
            want = f"needs ORDER BY on a date/time column ({direction})"
        elif k is ConstraintKind.COMPARE:
            want = f"needs a {self.param} comparison in WHERE/HAVING"
        else:
            want = f"value '{self.param}' must appear in the SQL"
        if self.trigger:
            return f"{want} [from: '{self.trigger}']"
        return want

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind.value, "param": self.param, "trigger": self.trigger}


def constraint_from_dict(d: dict[str, Any]) -> Constraint:
    return Constraint(kind=ConstraintKind(d["kind"]), param=d.get("param"), trigger=d.get("trigger", ""))


def sort_constraints(constraints) -> list[Constraint]:
    """Fixed, deterministic ordering: declaration order of kinds, then param."""
    return sorted(constraints, key=lambda c: (KIND_ORDER[c.kind], str(c.param), c.trigger))


@dataclass(frozen=True)
class Violation:
    """One failed check from the syntax / execution / constraint stages."""

    source: ViolationSource
    message: str
    constraint: Optional[Constraint] = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "source": self.source.value,
            "constraint": self.constraint.to_dict() if self.constraint else None,
            "message": self.message,
        }


def violation_from_dict(d: dict[str, Any]) -> Violation:
    c = d.get("constraint")
    return Violation(
        source=ViolationSource(d["source"]),
        message=d["message"],
        constraint=constraint_from_dict(c) if c else None,
    )


Row = tuple[Scalar, ...]


@dataclass(frozen=True)
class ProbeRecord:
    """One exploratory query and what came back from the database.

    Exactly one of ``rows`` / ``error`` is set; together they form the probe
    result. The column/value maps are what the model said it learned when it
    issued the probe.
    """

    probe_sql: str
    rows: Optional[tuple[Row, ...]] = None
    error: Optional[str] = None
    relevant_columns: dict[str, tuple[str, ...]] = field(default_factory=dict)
    value_mappings: dict[str, str] = field(default_factory=dict)

    @property
    def failed(self) -> bool:
        return self.error is not None

    def to_dict(self) -> dict[str, Any]:
        result: dict[str, Any]
        if self.error is not None:
            result = {"error": self.error}
        else:
            result = {"rows": [list(r) for r in (self.rows or ())]}
        return {
            "probe_sql": self.probe_sql,
            "result": result,
            "relevant_columns": {t: list(cols) for t, cols in self.relevant_columns.items()},
            "value_mappings": dict(self.value_mappings),
        }


def probe_record_from_dict(d: dict[str, Any]) -> ProbeRecord:
    result = d.get("result", {})
    rows = None
    if "rows" in result:
        rows = tuple(tuple(r) for r in result["rows"])
    return ProbeRecord(
        probe_sql=d["probe_sql"],
        rows=rows,
        error=result.get("error"),
        relevant_columns={t: tuple(c) for t, c in d.get("relevant_columns", {}).items()},
        value_mappings=dict(d.get("value_mappings", {})),
    )


@dataclass(frozen=True)
class GroundingContext:
    """Accumulated probe knowledge injected into generation prompts.

    The merged maps are always the left-to-right merge of the per-probe maps,
    with later probes overriding earlier ones.
    """

    probes: tuple[ProbeRecord, ...] = ()
    insights: str = ""

    @property
    def merged_value_mappings(self) -> dict[str, str]:
        merged: dict[str, str] = {}
        for p in self.probes:
            merged.update(p.value_mappings)
        return merged

    @property
    def merged_relevant_columns(self) -> dict[str, tuple[str, ...]]:
        merged: dict[str, tuple[str, ...]] = {}
        for p in self.probes:
            merged.update(p.relevant_columns)
        return merged

    def with_probe(self, probe: ProbeRecord) -> "GroundingContext":
        return GroundingContext(probes=self.probes + (probe,), insights=self.insights)

    @property
    def probe_count(self) -> int:
        return len(self.probes)

    def to_dict(self) -> dict[str, Any]:
        return {
            "probes": [p.to_dict() for p in self.probes],
            "merged_value_mappings": self.merged_value_mappings,
            "merged_relevant_columns": {t: list(c) for t, c in self.merged_relevant_columns.items()},
            "insights": self.insights,
        }


def grounding_from_dict(d: dict[str, Any]) -> GroundingContext:
    return GroundingContext(
        probes=tuple(probe_record_from_dict(p) for p in d.get("probes", [])),
        insights=d.get("insights", ""),
    )


@dataclass(frozen=True)
class Draft:
    """One generated SQL candidate and the violations its verification found."""

    sql: str
    violations: tuple[Violation, ...] = ()

    def to_dict(self) -> dict[str, Any]:
        return {"sql": self.sql, "violations": [v.to_dict() for v in self.violations]}


def draft_from_dict(d: dict[str, Any]) -> Draft:
    return Draft(sql=d["sql"], violations=tuple(violation_from_dict(v) for v in d.get("violations", [])))


@dataclass(frozen=True)
class RunRecord:
    """Full trace of one pipeline run on one task."""

    task_id: str
    grounding: GroundingContext = GroundingContext()
    constraints: tuple[Constraint, ...] = ()
    drafts: tuple[Draft, ...] = ()
    final_sql: str = ""
    probe_count: int = 0
    repair_count: int = 0
    tokens_in: int = 0
    tokens_out: int = 0
    wall_seconds: float = 0.0
    failed: bool = False
    error: Optional[str] = None

    @property
    def final_violations(self) -> tuple[Violation, ...]:
        return self.drafts[-1].violations if self.drafts else ()

    def to_dict(self) -> dict[str, Any]:
        return {
            "task_id": self.task_id,
            "grounding": self.grounding.to_dict(),
            "constraints": [c.to_dict() for c in sort_constraints(self.constraints)],
            "drafts": [d.to_dict() for d in self.drafts],
            "final_sql": self.final_sql,
            "probe_count": self.probe_count,
            "repair_count": self.repair_count,
            "tokens_in": self.tokens_in,
            "tokens_out": self.tokens_out,
            "wall_seconds": self.wall_seconds,
            "failed": self.failed,
            "error": self.error,
        }


def run_record_from_dict(d: dict[str, Any]) -> RunRecord:
    return RunRecord(
        task_id=d["task_id"],
        grounding=grounding_from_dict(d.get("grounding", {})),
        constraints=tuple(constraint_from_dict(c) for c in d.get("constraints", [])),
        drafts=tuple(draft_from_dict(x) for x in d.get("drafts", [])),
        final_sql=d.get("final_sql", ""),
        probe_count=d.get("probe_count", 0),
        repair_count=d.get("repair_count", 0),
        tokens_in=d.get("tokens_in", 0),
        tokens_out=d.get("tokens_out", 0),
        wall_seconds=d.get("wall_seconds", 0.0),
        failed=d.get("failed", False),
        error=d.get("error"),
    )


@dataclass(frozen=True)
class ErrorClass:
    """Judge verdict for one failed task."""

    kind: ErrorKind
    reasoning: str = ""
    specific_issue: str = ""

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind.value, "reasoning": self.reasoning, "specific_issue": self.specific_issue}


def error_class_from_dict(d: dict[str, Any]) -> ErrorClass:
    return ErrorClass(
        kind=ErrorKind(d["kind"]),
        reasoning=d.get("reasoning", ""),
        specific_issue=d.get("specific_issue", ""),
    )
