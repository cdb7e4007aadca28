"""Probe-and-verify agentic text-to-SQL pipeline."""

from .core import (
    Constraint,
    ConstraintKind,
    Difficulty,
    Draft,
    ErrorClass,
    ErrorKind,
    GroundingContext,
    ProbeRecord,
    RunRecord,
    SchemaDescription,
    Task,
    Violation,
    ViolationSource,
)
from .extractor import NoNumber, extract_constraints, extract_topk_n
from .sqlast import ParseError, SqlAst
from .sqlcheck import check_all, check_constraint, derive_constraints_from_sql, parse_sql

__version__ = "0.1.0"

__all__ = [
    "Constraint",
    "ConstraintKind",
    "Difficulty",
    "Draft",
    "ErrorClass",
    "ErrorKind",
    "GroundingContext",
    "NoNumber",
    "ParseError",
    "ProbeRecord",
    "RunRecord",
    "SchemaDescription",
    "SqlAst",
    "Task",
    "Violation",
    "ViolationSource",
    "check_all",
    "check_constraint",
    "derive_constraints_from_sql",
    "extract_constraints",
    "extract_topk_n",
    "parse_sql",
]
