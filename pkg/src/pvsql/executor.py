"""Sandboxed, read-only SQLite execution.

Three entry points mirror the verification stages: ``syntax_check`` compiles
a statement without running it (EXPLAIN), ``execute`` runs it under a wall
clock timeout, and ``execute_probe`` runs an exploratory SELECT with a hard
row cap. Connections are opened read-only and non-SELECT statements are
rejected before they reach the engine.
"""

from __future__ import annotations

import os
import sqlite3
import time
from dataclasses import dataclass, field
from typing import Optional, Union
from urllib.parse import quote

from .core import (
    ColumnInfo,
    ForeignKey,
    ProbeRecord,
    SchemaDescription,
    TableInfo,
    Violation,
    ViolationSource,
)
from . import sqlast

DEFAULT_TIMEOUT_SECONDS = 30.0
DEFAULT_PROBE_ROW_CAP = 10

_PROGRESS_OPCODE_INTERVAL = 2000


class DbUnavailable(Exception):
    """Database file missing or unopenable."""


class NotASelect(Exception):
    """Probe statement rejected: probes must be SELECT queries."""


@dataclass
class ExecResult:
    columns: tuple[str, ...]
    rows: tuple[tuple, ...]
    truncated: bool = False
    elapsed_seconds: float = 0.0


class DatabaseHandle:
    """One read-only connection to a benchmark database.

    Confine each handle to a single worker; open separate handles for
    concurrent access to the same file. ``stats`` counts engine interactions
    so tests can assert, e.g., that a failed syntax check triggered zero
    executions.
    """

    def __init__(
        self,
        db_id: str,
        path: str,
        timeout_seconds: float = DEFAULT_TIMEOUT_SECONDS,
        probe_row_cap: int = DEFAULT_PROBE_ROW_CAP,
    ):
        if timeout_seconds <= 0:
            raise ValueError("timeout_seconds must be positive")
        if probe_row_cap < 1:
            raise ValueError("probe_row_cap must be at least 1")
        self.db_id = db_id
        self.path = str(path)
        self.read_only = True
        self.timeout_seconds = timeout_seconds
        self.probe_row_cap = probe_row_cap
        self.stats = {"executions": 0, "syntax_checks": 0}
        self._conn: Optional[sqlite3.Connection] = None

    @property
    def conn(self) -> sqlite3.Connection:
        if self._conn is None:
            if not os.path.exists(self.path):
                raise DbUnavailable(f"database file not found: {self.path}")
            try:
                self._conn = sqlite3.connect(
                    f"file:{quote(self.path)}?mode=ro", uri=True, check_same_thread=False
                )
            except sqlite3.Error as e:
                raise DbUnavailable(f"cannot open {self.path}: {e}") from e
            self._conn.text_factory = lambda b: b.decode("utf-8", errors="replace")
        return self._conn

    def close(self) -> None:
        if self._conn is not None:
            self._conn.close()
            self._conn = None

    def __enter__(self) -> "DatabaseHandle":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def open_database(
    db_root: str,
    db_id: str,
    timeout_seconds: float = DEFAULT_TIMEOUT_SECONDS,
    probe_row_cap: int = DEFAULT_PROBE_ROW_CAP,
) -> DatabaseHandle:
    """Open ``<db_root>/<db_id>/<db_id>.sqlite`` (BIRD/Spider layout)."""
    path = os.path.join(db_root, db_id, f"{db_id}.sqlite")
    return DatabaseHandle(db_id=db_id, path=path, timeout_seconds=timeout_seconds, probe_row_cap=probe_row_cap)


def _normalize_cell(value):
    if isinstance(value, bytes):
        return value.hex()
    return value


def syntax_check(db: DatabaseHandle, sql: str) -> Optional[Violation]:
    """Compile the statement against the live schema without running it.

    Unknown tables/columns surface here: name resolution happens at compile
    time. Returns None on success, a syntax Violation otherwise.
    """
    db.stats["syntax_checks"] += 1
    try:
        cur = db.conn.execute(f"EXPLAIN {sql.rstrip().rstrip(';')}")
        cur.close()
    except DbUnavailable:
        raise
    except (sqlite3.Error, sqlite3.Warning) as e:
        return Violation(source=ViolationSource.SYNTAX, message=str(e))
    return None


def execute(
    db: DatabaseHandle, sql: str, row_cap: Optional[int] = None
) -> Union[ExecResult, Violation]:
    """Run a SELECT read-only with the configured timeout.

    Returns an execution Violation on runtime errors; timeouts yield the
    message "timeout after <t>s". Write statements are rejected without
    touching the engine.
    """
    kw = sqlast.first_keyword(sql)
    if kw not in ("SELECT", "WITH"):
        return Violation(
            source=ViolationSource.EXECUTION,
            message=f"only SELECT statements are permitted (got {kw or 'unparseable input'})",
        )

    conn = db.conn
    timed_out = {"fired": False}
    deadline = time.perf_counter() + db.timeout_seconds

    def _guard():
        if time.perf_counter() > deadline:
            timed_out["fired"] = True
            return 1
        return 0

    db.stats["executions"] += 1
    started = time.perf_counter()
    conn.set_progress_handler(_guard, _PROGRESS_OPCODE_INTERVAL)
    try:
        cur = conn.execute(sql)
        if row_cap is None:
            fetched = cur.fetchall()
            truncated = False
        else:
            fetched = cur.fetchmany(row_cap + 1)
            truncated = len(fetched) > row_cap
            fetched = fetched[:row_cap]
        columns = tuple(d[0] for d in cur.description) if cur.description else ()
        cur.close()
    except (sqlite3.Error, sqlite3.Warning) as e:
        elapsed = time.perf_counter() - started
        if timed_out["fired"]:
            message = f"timeout after {db.timeout_seconds:g}s"
        else:
            message = str(e)
        return Violation(source=ViolationSource.EXECUTION, message=message)
    finally:
        conn.set_progress_handler(None, 0)

    elapsed = time.perf_counter() - started
    rows = tuple(tuple(_normalize_cell(v) for v in row) for row in fetched)
    return ExecResult(columns=columns, rows=rows, truncated=truncated, elapsed_seconds=elapsed)


def _cap_probe_limit(sql: str, cap: int) -> str:
    """Append or shrink the top-level LIMIT so a probe returns at most ``cap`` rows."""
    try:
        ast = sqlast.parse_sql(sql)
    except sqlast.ParseError:
        return sql  # let the engine report whatever is wrong with it
    limit = ast.query.limit
    if limit is None:
        return sql.rstrip().rstrip(";") + f" LIMIT {cap}"
    n = limit.count_value()
    if n is not None and n > cap and limit.count_span is not None:
        start, end = limit.count_span
        return sql[:start] + str(cap) + sql[end:]
    return sql


def execute_probe(db: DatabaseHandle, probe_sql: str) -> ProbeRecord:
    """Run one exploratory probe, capping its result rows.

    Execution failures do not raise: the engine's error message becomes the
    probe result so the probing loop can continue with that context.
    """
    if sqlast.first_keyword(probe_sql) != "SELECT":
        raise NotASelect(f"probe must be a SELECT statement: {probe_sql[:80]!r}")
    capped = _cap_probe_limit(probe_sql, db.probe_row_cap)
    result = execute(db, capped, row_cap=db.probe_row_cap)
    if isinstance(result, Violation):
        return ProbeRecord(probe_sql=probe_sql, error=result.message)
    return ProbeRecord(probe_sql=probe_sql, rows=result.rows)


def read_schema(db: DatabaseHandle) -> SchemaDescription:
    """Introspect tables, columns and foreign keys from the catalog."""
    conn = db.conn
    tables = []
    fks = []
    names = [
        r[0]
        for r in conn.execute(
            "SELECT name FROM sqlite_master WHERE type='table' AND name NOT LIKE 'sqlite_%' ORDER BY name"
        )
    ]
    for name in names:
        cols = tuple(
            ColumnInfo(column_name=r[1], declared_type=r[2] or "", is_primary_key=bool(r[5]))
            for r in conn.execute(f"PRAGMA table_info('{name}')")
        )
        tables.append(TableInfo(table_name=name, columns=cols))
        for r in conn.execute(f"PRAGMA foreign_key_list('{name}')"):
            fks.append(
                ForeignKey(from_table=name, from_column=r[3], to_table=r[2], to_column=r[4] or "")
            )
    return SchemaDescription(tables=tuple(tables), foreign_keys=tuple(fks))


def schema_text(db: DatabaseHandle) -> str:
    """CREATE TABLE statements as stored in the catalog, for prompt context."""
    rows = db.conn.execute(
        "SELECT sql FROM sqlite_master WHERE sql IS NOT NULL AND name NOT LIKE 'sqlite_%' ORDER BY name"
    ).fetchall()
    return "\n\n".join(r[0] for r in rows)
