"""Dataset loading, metrics, and component evaluations.

Execution accuracy compares result multisets (duplicates significant,
column order significant, floats rounded to 1e-6); row order matters only
when the gold query itself orders its output. The efficiency score follows
the square-root time-ratio form: incorrect tasks contribute zero, correct
ones sqrt(t_gold / t_pred).
"""

from __future__ import annotations

import json
import logging
import math
import re
import statistics
import time
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .agent import AgentConfig, _Usage, repair_loop, run_task
from .core import (
    Difficulty,
    ErrorKind,
    RunRecord,
    Task,
    Violation,
    ViolationSource,
)
from .executor import DatabaseHandle, execute, open_database, read_schema, schema_text
from .extractor import extract_constraints
from .llm import ChatRequest, LlmClient, PromptKind, Unparseable, first_json_object, render_probe_history, render_prompt
from .sqlast import ParseError, parse_sql
from .sqlcheck import check_all, derive_constraints_from_sql

logger = logging.getLogger(__name__)

FLOAT_DECIMALS = 6


class FormatError(Exception):
    def __init__(self, index: int, message: str):
        super().__init__(f"record {index}: {message}")
        self.index = index


class GoldExecutionError(Exception):
    pass


# ---------------------------------------------------------------------------
# Dataset ingestion
# ---------------------------------------------------------------------------


def load_tasks(path: str, format: str) -> list[Task]:
    """Load a benchmark task file in bird / spider / minidev layout."""
    if format not in ("bird", "spider", "minidev"):
        raise ValueError(f"unknown format {format!r}")
    with open(path, "r", encoding="utf-8") as f:
        raw = json.load(f)
    if not isinstance(raw, list):
        raise FormatError(0, "top-level JSON must be a list of task records")
    tasks = []
    for i, rec in enumerate(raw):
        if not isinstance(rec, dict):
            raise FormatError(i, "task record must be an object")
        try:
            question = rec["question"]
            db_id = rec["db_id"]
        except KeyError as e:
            raise FormatError(i, f"missing field {e}") from e
        if not isinstance(question, str) or not question.strip():
            raise FormatError(i, "question must be a non-empty string")
        if format == "spider":
            gold = rec.get("query")
            evidence = ""
            difficulty = Difficulty.UNKNOWN
        else:
            gold = rec.get("SQL") or rec.get("gold_sql")
            evidence = rec.get("evidence") or ""
            difficulty = Difficulty(rec.get("difficulty", "unknown")) if rec.get("difficulty") else Difficulty.UNKNOWN
        task_id = str(rec.get("question_id", rec.get("task_id", i)))
        tasks.append(
            Task(
                task_id=task_id,
                db_id=db_id,
                question=question,
                evidence=evidence,
                gold_sql=gold,
                difficulty=difficulty,
            )
        )
    return tasks


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------


def _normalize_cell(value):
    if isinstance(value, float):
        return round(value, FLOAT_DECIMALS)
    return value


def _normalize_rows(rows) -> list[tuple]:
    return [tuple(_normalize_cell(v) for v in row) for row in rows]


def _gold_is_ordered(gold_sql: str) -> bool:
    try:
        return bool(parse_sql(gold_sql).query.order_by)
    except ParseError:
        return bool(re.search(r"(?i)\border\s+by\b", gold_sql))


def execution_accuracy(pred_sql: str, gold_sql: str, db: DatabaseHandle) -> bool:
    """True iff predicted and gold SQL return the same result set."""
    gold_result = execute(db, gold_sql)
    if isinstance(gold_result, Violation):
        raise GoldExecutionError(gold_result.message)
    if not pred_sql or not pred_sql.strip():
        return False
    pred_result = execute(db, pred_sql)
    if isinstance(pred_result, Violation):
        return False
    gold_rows = _normalize_rows(gold_result.rows)
    pred_rows = _normalize_rows(pred_result.rows)
    if _gold_is_ordered(gold_sql):
        return gold_rows == pred_rows
    return Counter(gold_rows) == Counter(pred_rows)


def valid_efficiency_score(records: Sequence[tuple[bool, float, float]]) -> float:
    """Mean of correct * sqrt(t_gold / t_pred), as a percentage."""
    if not records:
        return 0.0
    total = 0.0
    for correct, t_gold, t_pred in records:
        if not correct:
            continue
        if t_gold <= 0 or t_pred <= 0:
            raise ValueError("timings must be positive for correct records")
        total += math.sqrt(t_gold / t_pred)
    return 100.0 * total / len(records)


def weighted_token_cost(tokens_in: float, tokens_out: float) -> float:
    """Cost-weighted token count: input tokens are ~8x cheaper than output."""
    return tokens_in / 8 + tokens_out


def eval_extraction_on_gold(tasks: Sequence[Task], db_root: Optional[str] = None) -> float:
    """Percentage of tasks whose gold SQL satisfies every extracted constraint.

    Pure rules + AST work; no model calls and no query execution. Tasks
    whose gold is absent or unparseable are excluded with a warning.
    """
    schemas = {}
    total = 0
    passed = 0
    for task in tasks:
        if not task.gold_sql:
            continue
        try:
            ast = parse_sql(task.gold_sql)
        except ParseError as e:
            logger.warning("task %s: gold SQL unparseable, excluded (%s)", task.task_id, e)
            continue
        schema = None
        if db_root is not None:
            if task.db_id not in schemas:
                try:
                    with open_database(db_root, task.db_id) as db:
                        schemas[task.db_id] = read_schema(db)
                except Exception:
                    schemas[task.db_id] = None
            schema = schemas[task.db_id]
        constraints = extract_constraints(task.question, task.evidence)
        total += 1
        if not check_all(ast, constraints, schema):
            passed += 1
    return 100.0 * passed / total if total else 0.0


def _violation_key(v: Violation):
    if v.source is ViolationSource.CONSTRAINT and v.constraint is not None:
        return ("constraint",) + v.constraint.key()
    return (v.source.value,)


def eval_repair_rates(records: Sequence[RunRecord]) -> tuple[float, float]:
    """Pooled repair success and regression rates over all consecutive drafts.

    Success: violations present in draft i and gone in draft i+1, over all
    violations in draft i. Regression: constraints satisfied in draft i and
    violated in draft i+1, over all satisfied in draft i. Records without
    repairs contribute nothing to either denominator.
    """
    resolved = attempted = 0
    regressed = satisfied_total = 0
    for record in records:
        constraint_keys = {c.key() for c in record.constraints}
        for before, after in zip(record.drafts, record.drafts[1:]):
            v_before = {_violation_key(v) for v in before.violations}
            v_after = {_violation_key(v) for v in after.violations}
            attempted += len(v_before)
            resolved += len(v_before - v_after)
            c_before = {v.constraint.key() for v in before.violations if v.constraint}
            c_after = {v.constraint.key() for v in after.violations if v.constraint}
            satisfied = constraint_keys - c_before
            satisfied_total += len(satisfied)
            regressed += len(satisfied & c_after)
    success = 100.0 * resolved / attempted if attempted else 0.0
    regression = 100.0 * regressed / satisfied_total if satisfied_total else 0.0
    return success, regression


@dataclass(frozen=True)
class ComponentReport:
    extraction_pass_rate: float
    repair_success_rate: float
    repair_regression_rate: float

    def to_dict(self) -> dict:
        return {
            "extraction_pass_rate": self.extraction_pass_rate,
            "repair_success_rate": self.repair_success_rate,
            "repair_regression_rate": self.repair_regression_rate,
        }


# ---------------------------------------------------------------------------
# Benchmark runs and reports
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TaskEval:
    task_id: str
    correct: bool
    t_gold: float = 0.0
    t_pred: float = 0.0
    note: str = ""

    def to_dict(self) -> dict:
        return {
            "task_id": self.task_id,
            "correct": self.correct,
            "t_gold": self.t_gold,
            "t_pred": self.t_pred,
            "note": self.note,
        }


@dataclass(frozen=True)
class MetricReport:
    n_tasks: int
    ex: float
    ves: float
    per_difficulty: dict[str, dict[str, float]] = field(default_factory=dict)
    mean_tokens_in: float = 0.0
    mean_tokens_out: float = 0.0
    mean_wall_seconds: float = 0.0
    mean_probes: float = 0.0
    mean_repairs: float = 0.0
    weighted_token_cost: float = 0.0
    ves_label: str = "VES (sqrt time-ratio)"

    def to_dict(self) -> dict:
        return {
            "n_tasks": self.n_tasks,
            "ex": self.ex,
            "ves": self.ves,
            "per_difficulty": self.per_difficulty,
            "mean_tokens_in": self.mean_tokens_in,
            "mean_tokens_out": self.mean_tokens_out,
            "mean_wall_seconds": self.mean_wall_seconds,
            "mean_probes": self.mean_probes,
            "mean_repairs": self.mean_repairs,
            "weighted_token_cost": self.weighted_token_cost,
            "ves_label": self.ves_label,
        }


def report_text(report: MetricReport) -> str:
    """Aligned text summary: overall row plus one row per difficulty."""
    header = f"{'split':<14}{'n':>6}{'EX':>8}{'VES':>8}{'In':>8}{'Out':>8}{'Time':>8}{'Cost':>9}"
    lines = [header, "-" * len(header)]
    lines.append(
        f"{'all':<14}{report.n_tasks:>6}{report.ex:>8.2f}{report.ves:>8.2f}"
        f"{report.mean_tokens_in:>8.0f}{report.mean_tokens_out:>8.0f}"
        f"{report.mean_wall_seconds:>8.2f}{report.weighted_token_cost:>9.1f}"
    )
    for difficulty, stats in report.per_difficulty.items():
        lines.append(
            f"{difficulty:<14}{int(stats['n']):>6}{stats['ex']:>8.2f}{stats['ves']:>8.2f}"
            + " " * 33
        )
    return "\n".join(lines)


def _timed_median(db: DatabaseHandle, sql: str) -> float:
    """Median wall time of 3 runs after one warm-up; raises on execution error."""
    warm = execute(db, sql)
    if isinstance(warm, Violation):
        raise GoldExecutionError(warm.message)
    times = []
    for _ in range(3):
        result = execute(db, sql)
        if isinstance(result, Violation):
            raise GoldExecutionError(result.message)
        times.append(max(result.elapsed_seconds, 1e-9))
    return statistics.median(times)


def evaluate_records(
    tasks: Sequence[Task],
    records: Sequence[RunRecord],
    db_root: str,
    timeout_seconds: float = 30.0,
) -> tuple[MetricReport, list[TaskEval]]:
    """Score finished run records against their tasks' gold SQL."""
    by_id = {t.task_id: t for t in tasks}
    evals: list[TaskEval] = []
    ves_inputs: list[tuple[bool, float, float]] = []
    per_diff: dict[str, list[tuple[bool, float, float]]] = {}

    for record in records:
        task = by_id.get(record.task_id)
        if task is None or not task.gold_sql:
            logger.warning("record %s has no matching gold task; skipped", record.task_id)
            continue
        with open_database(db_root, task.db_id, timeout_seconds=timeout_seconds) as db:
            try:
                correct = (not record.failed) and execution_accuracy(record.final_sql, task.gold_sql, db)
            except GoldExecutionError as e:
                logger.warning("task %s: gold SQL failed to execute (%s); excluded", task.task_id, e)
                evals.append(TaskEval(task_id=record.task_id, correct=False, note="gold-error"))
                continue
            t_gold = t_pred = 0.0
            if correct:
                try:
                    t_gold = _timed_median(db, task.gold_sql)
                    t_pred = _timed_median(db, record.final_sql)
                except GoldExecutionError:
                    correct = False
        evals.append(TaskEval(task_id=record.task_id, correct=correct, t_gold=t_gold, t_pred=t_pred))
        entry = (correct, t_gold, t_pred)
        ves_inputs.append(entry)
        per_diff.setdefault(task.difficulty.value, []).append(entry)

    scored = [e for e in evals if e.note != "gold-error"]
    n = len(scored)
    ex = 100.0 * sum(e.correct for e in scored) / n if n else 0.0
    ves = valid_efficiency_score(ves_inputs)

    included_ids = {e.task_id for e in scored}
    counted = [r for r in records if r.task_id in included_ids]
    mean = lambda xs: (sum(xs) / len(xs)) if xs else 0.0  # noqa: E731
    mean_in = mean([r.tokens_in for r in counted])
    mean_out = mean([r.tokens_out for r in counted])

    report = MetricReport(
        n_tasks=n,
        ex=round(ex, 2),
        ves=round(ves, 2),
        per_difficulty={
            d: {
                "ex": round(100.0 * sum(c for c, _, _ in entries) / len(entries), 2),
                "ves": round(valid_efficiency_score(entries), 2),
                "n": len(entries),
            }
            for d, entries in sorted(per_diff.items())
        },
        mean_tokens_in=round(mean_in, 2),
        mean_tokens_out=round(mean_out, 2),
        mean_wall_seconds=round(mean([r.wall_seconds for r in counted]), 3),
        mean_probes=round(mean([r.probe_count for r in counted]), 2),
        mean_repairs=round(mean([r.repair_count for r in counted]), 2),
        weighted_token_cost=round(weighted_token_cost(mean_in, mean_out), 3),
    )
    return report, evals


def run_benchmark(
    tasks: Sequence[Task],
    db_root: str,
    client: LlmClient,
    config: Optional[AgentConfig] = None,
    workers: int = 1,
    timeout_seconds: float = 30.0,
    probe_row_cap: int = 10,
    trace_path: Optional[str] = None,
) -> list[RunRecord]:
    """Run the pipeline over a task list with a bounded worker pool."""
    config = config or AgentConfig()

    def _one(task: Task) -> RunRecord:
        with open_database(
            db_root, task.db_id, timeout_seconds=timeout_seconds, probe_row_cap=probe_row_cap
        ) as db:
            return run_task(task, db, client, config)

    if workers <= 1:
        records = [_one(t) for t in tasks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_one, tasks))

    if trace_path:
        with open(trace_path, "w", encoding="utf-8") as f:
            for record in records:
                f.write(json.dumps(record.to_dict()) + "\n")
    return records


# ---------------------------------------------------------------------------
# Oracle-constraint headroom rerun
# ---------------------------------------------------------------------------


def headroom_rerun(
    failures: Sequence[tuple[Task, RunRecord]],
    db_root: str,
    client: LlmClient,
    config: Optional[AgentConfig] = None,
    timeout_seconds: float = 30.0,
) -> float:
    """Re-run repairs on failed tasks with constraints derived from gold SQL.

    Everything else (grounding, verifier, budgets) stays fixed; returns the
    percentage of failures the oracle constraint list converts to correct.
    Tasks without usable gold SQL are skipped.
    """
    config = config or AgentConfig()
    corrected = 0
    n = 0
    for task, record in failures:
        if not task.gold_sql:
            continue
        try:
            gold_ast = parse_sql(task.gold_sql)
        except ParseError:
            continue
        initial = record.drafts[0].sql if record.drafts else record.final_sql
        if not initial:
            continue
        oracle = tuple(derive_constraints_from_sql(gold_ast))
        n += 1
        with open_database(db_root, task.db_id, timeout_seconds=timeout_seconds) as db:
            schema_str = schema_text(db)
            schema_desc = read_schema(db)
            drafts, _, _ = repair_loop(
                task,
                schema_str,
                record.grounding,
                oracle,
                initial,
                db,
                client,
                config.max_repairs,
                config,
                _Usage(),
                schema_desc,
            )
            try:
                if execution_accuracy(drafts[-1].sql, task.gold_sql, db):
                    corrected += 1
            except GoldExecutionError:
                n -= 1
    return 100.0 * corrected / n if n else 0.0


# ---------------------------------------------------------------------------
# LLM-judge analyses
# ---------------------------------------------------------------------------

_ERROR_TYPE_MAP = {
    "DATABASE_MISINTERPRETATION": ErrorKind.DATABASE_MISINTERPRETATION,
    "QUESTION_MISINTERPRETATION": ErrorKind.QUESTION_MISINTERPRETATION,
    "SQL_SYNTHESIS_FAILURE": ErrorKind.SYNTHESIS_FAILURE,
    "SYNTHESIS_FAILURE": ErrorKind.SYNTHESIS_FAILURE,
}


def _final_exec_error(record: RunRecord) -> str:
    for v in record.final_violations:
        if v.source is ViolationSource.EXECUTION:
            return v.message
    return "(none)"


def judge_errors(
    failures: Sequence[tuple[Task, RunRecord]],
    client: LlmClient,
    db_root: Optional[str] = None,
    config: Optional[AgentConfig] = None,
) -> dict:
    """Classify failures into the three error classes with an LLM judge."""
    config = config or AgentConfig()
    counts: Counter = Counter()
    unclassified = 0
    schemas: dict[str, str] = {}
    for task, record in failures:
        schema = "(unavailable)"
        if db_root is not None:
            if task.db_id not in schemas:
                try:
                    with open_database(db_root, task.db_id) as db:
                        schemas[task.db_id] = schema_text(db)
                except Exception:
                    schemas[task.db_id] = "(unavailable)"
            schema = schemas[task.db_id]
        prompt = render_prompt(
            PromptKind.ERROR_JUDGE,
            {
                "question": task.question,
                "evidence": task.evidence or "(none)",
                "schema": schema,
                "gold_sql": task.gold_sql or "(unavailable)",
                "predicted_sql": record.final_sql or "(empty)",
                "exec_error": _final_exec_error(record),
            },
        )
        response = client.complete(
            ChatRequest(kind=PromptKind.ERROR_JUDGE, text=prompt, temperature=config.temperature)
        )
        try:
            verdict = first_json_object(response.text)
            kind = _ERROR_TYPE_MAP[str(verdict.get("error_type", "")).strip().upper()]
        except (Unparseable, KeyError):
            unclassified += 1
            continue
        counts[kind] += 1

    classified = sum(counts.values())
    distribution = {
        k.value: (100.0 * counts[k] / classified if classified else 0.0) for k in ErrorKind
    }
    return {
        "distribution": distribution,
        "n_classified": classified,
        "unclassified": unclassified,
        "n_total": classified + unclassified,
    }


def judge_probe_quality(
    cases: Sequence[tuple[Task, RunRecord]],
    client: LlmClient,
    db_root: Optional[str] = None,
    config: Optional[AgentConfig] = None,
) -> dict:
    """Rate probes for relevance / new insight / redundancy via an LLM judge."""
    config = config or AgentConfig()
    totals = Counter()
    n_probes = 0
    schemas: dict[str, str] = {}
    for task, record in cases:
        probes = record.grounding.probes
        if not probes:
            continue
        schema = "(unavailable)"
        if db_root is not None:
            if task.db_id not in schemas:
                try:
                    with open_database(db_root, task.db_id) as db:
                        schemas[task.db_id] = schema_text(db)
                except Exception:
                    schemas[task.db_id] = "(unavailable)"
            schema = schemas[task.db_id]
        prompt = render_prompt(
            PromptKind.PROBE_JUDGE,
            {
                "question": task.question,
                "evidence": task.evidence or "(none)",
                "schema": schema,
                "probes": render_probe_history(probes),
            },
        )
        response = client.complete(
            ChatRequest(kind=PromptKind.PROBE_JUDGE, text=prompt, temperature=config.temperature)
        )
        try:
            verdicts = first_json_object(response.text).get("evaluations") or []
        except Unparseable:
            continue
        for v in verdicts:
            if not isinstance(v, dict):
                continue
            n_probes += 1
            for aspect in ("relevant", "new_insight", "redundant"):
                if v.get(aspect) is True:
                    totals[aspect] += 1
    rate = lambda a: (100.0 * totals[a] / n_probes if n_probes else 0.0)  # noqa: E731
    return {
        "relevant": rate("relevant"),
        "new_insight": rate("new_insight"),
        "redundant": rate("redundant"),
        "n_probes": n_probes,
    }
