"""Pipeline orchestration: probe loop, generation, verify-and-repair.

One ``run_task`` call is strictly sequential and budget-bounded: at most K
probe iterations, then constraint extraction, one generation (with a single
retry), and at most M repair rounds. In rule mode that is never more than
K + 2 + 2M backend calls, whatever the model does.
"""

from __future__ import annotations

import dataclasses
import logging
import time
from dataclasses import dataclass
from typing import Optional, Sequence

from .core import (
    Constraint,
    Draft,
    GroundingContext,
    ProbeRecord,
    RunRecord,
    SchemaDescription,
    Task,
    Violation,
    ViolationSource,
    sort_constraints,
)
from .executor import DatabaseHandle, NotASelect, execute, execute_probe, read_schema, schema_text, syntax_check
from .extractor import extract_constraints, literal_constraints_from_mappings
from .llm import (
    BackendError,
    ChatRequest,
    EmptyAnswer,
    LlmClient,
    PromptKind,
    Unparseable,
    first_json_object,
    parse_probe_decision,
    parse_sql_answer,
    render_constraints,
    render_grounding,
    render_probe_history,
    render_prompt,
    render_violations,
)
from .sqlast import ParseError, parse_sql

logger = logging.getLogger(__name__)

MODES = ("rule", "llm_verify", "no_probe", "no_repair")


@dataclass(frozen=True)
class AgentConfig:
    max_probes: int = 5  # K
    max_repairs: int = 5  # M
    mode: str = "rule"
    temperature: float = 0.0
    max_output_tokens: int = 1024

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        if self.max_probes < 0 or self.max_repairs < 0:
            raise ValueError("probe/repair budgets must be non-negative")


class _Usage:
    """Per-run token accumulator."""

    def __init__(self):
        self.tokens_in = 0
        self.tokens_out = 0

    def add(self, response) -> None:
        self.tokens_in += response.tokens_in
        self.tokens_out += response.tokens_out


def _request(config: AgentConfig, kind: PromptKind, text: str) -> ChatRequest:
    return ChatRequest(
        kind=kind, text=text, temperature=config.temperature, max_output_tokens=config.max_output_tokens
    )


def run_probe_loop(
    task: Task,
    schema: str,
    db: DatabaseHandle,
    client: LlmClient,
    max_probes: int,
    config: Optional[AgentConfig] = None,
    usage: Optional[_Usage] = None,
) -> GroundingContext:
    """Iterate the probe decision loop at most ``max_probes`` times.

    Stops when the model answers "done" or unparseably (treated as done).
    Failed probes keep their error text in the history and the loop goes on.
    """
    config = config or AgentConfig()
    usage = usage if usage is not None else _Usage()
    grounding = GroundingContext()
    for _ in range(max_probes):
        prompt = render_prompt(
            PromptKind.PROBE,
            {
                "question": task.question,
                "evidence": task.evidence or "(none)",
                "schema": schema,
                "prior_probe_results": render_probe_history(grounding.probes),
            },
        )
        response = client.complete(_request(config, PromptKind.PROBE, prompt))
        usage.add(response)
        try:
            decision = parse_probe_decision(response.text)
        except Unparseable:
            logger.info("probe decision unparseable; proceeding to generation")
            break
        if decision.action == "done":
            break
        try:
            record = execute_probe(db, decision.probe_sql or "")
        except NotASelect as e:
            record = ProbeRecord(probe_sql=decision.probe_sql or "", error=str(e))
        record = dataclasses.replace(
            record,
            relevant_columns=decision.relevant_columns,
            value_mappings=decision.value_mappings,
        )
        grounding = grounding.with_probe(record)
        logger.info(
            "probe %d issued: %s -> %s",
            grounding.probe_count,
            record.probe_sql,
            "error" if record.failed else f"{len(record.rows or ())} rows",
        )
    return grounding


def generate_sql(
    task: Task,
    schema: str,
    grounding: GroundingContext,
    constraints: Sequence[Constraint],
    client: LlmClient,
    config: Optional[AgentConfig] = None,
    usage: Optional[_Usage] = None,
    constraints_text: Optional[str] = None,
) -> Optional[str]:
    """Render the generation prompt and parse one SQL statement.

    Retries once on an empty/prose-only answer; returns None when both
    attempts fail.
    """
    config = config or AgentConfig()
    usage = usage if usage is not None else _Usage()
    prompt = render_prompt(
        PromptKind.GENERATE,
        {
            "question": task.question,
            "evidence": task.evidence or "(none)",
            "schema": schema,
            "probe_results": render_grounding(
                grounding.probes, grounding.merged_value_mappings, grounding.insights
            ),
            "constraints": constraints_text
            if constraints_text is not None
            else render_constraints(constraints),
        },
    )
    for _ in range(2):
        response = client.complete(_request(config, PromptKind.GENERATE, prompt))
        usage.add(response)
        try:
            return parse_sql_answer(response.text)
        except EmptyAnswer:
            continue
    return None


def verify_sql(
    sql: str,
    constraints: Sequence[Constraint],
    db: DatabaseHandle,
    schema: Optional[SchemaDescription] = None,
) -> list[Violation]:
    """Three-stage verification: syntax, execution, constraints.

    A syntax failure short-circuits: nothing is executed and the single
    syntax violation is returned. An execution failure still runs the
    constraint stage (pure AST work) so repairs see the full picture.
    """
    from .sqlcheck import check_all  # local import keeps module load order simple

    try:
        ast = parse_sql(sql)
    except ParseError as e:
        return [Violation(source=ViolationSource.SYNTAX, message=str(e))]
    violation = syntax_check(db, sql)
    if violation is not None:
        return [violation]
    violations: list[Violation] = []
    result = execute(db, sql, row_cap=db.probe_row_cap)
    if isinstance(result, Violation):
        violations.append(result)
    violations.extend(check_all(ast, constraints, schema))
    return violations


def _llm_extract_constraints_text(
    task: Task, client: LlmClient, config: AgentConfig, usage: _Usage
) -> str:
    prompt = render_prompt(
        PromptKind.LLM_EXTRACT,
        {"question": task.question, "evidence": task.evidence or "(none)"},
    )
    response = client.complete(_request(config, PromptKind.LLM_EXTRACT, prompt))
    usage.add(response)
    try:
        obj = first_json_object(response.text)
    except Unparseable:
        return "(none)"
    lines = []
    for c in obj.get("constraints") or []:
        if isinstance(c, dict):
            kind = c.get("type", "constraint")
            desc = c.get("description", "")
            hint = c.get("sql_hint", "")
            line = f"- {kind}: {desc}"
            if hint:
                line += f" (use {hint})"
            lines.append(line)
    return "\n".join(lines) if lines else "(none)"


def _llm_verify_violations(
    sql: str,
    task: Task,
    schema: str,
    constraints_text: str,
    client: LlmClient,
    config: AgentConfig,
    usage: _Usage,
) -> list[Violation]:
    prompt = render_prompt(
        PromptKind.LLM_VERIFY,
        {
            "question": task.question,
            "evidence": task.evidence or "(none)",
            "constraints": constraints_text,
            "schema": schema,
            "sql": sql,
        },
    )
    response = client.complete(_request(config, PromptKind.LLM_VERIFY, prompt))
    usage.add(response)
    try:
        obj = first_json_object(response.text)
    except Unparseable:
        return []
    if obj.get("is_valid") is True:
        return []
    violations = []
    for issue in obj.get("issues") or []:
        if not isinstance(issue, dict) or issue.get("severity") == "warning":
            continue
        category = issue.get("category", "semantic")
        description = issue.get("description", "verification issue")
        violations.append(
            Violation(source=ViolationSource.CONSTRAINT, message=f"[{category}] {description}")
        )
    if not violations and obj.get("is_valid") is False:
        violations.append(
            Violation(source=ViolationSource.CONSTRAINT, message="verifier judged the SQL invalid")
        )
    return violations


def repair_loop(
    task: Task,
    schema: str,
    grounding: GroundingContext,
    constraints: Sequence[Constraint],
    initial_sql: str,
    db: DatabaseHandle,
    client: LlmClient,
    max_repairs: int,
    config: Optional[AgentConfig] = None,
    usage: Optional[_Usage] = None,
    schema_desc: Optional[SchemaDescription] = None,
    constraints_text: Optional[str] = None,
) -> tuple[list[Draft], int, Optional[str]]:
    """Verify, then regenerate from violation feedback until clean or out of budget.

    Returns (drafts, repair_count, error). On a mid-loop backend failure the
    best draft so far (fewest violations, earliest on tie) is re-appended as
    the final one.
    """
    config = config or AgentConfig()
    usage = usage if usage is not None else _Usage()
    llm_mode = config.mode == "llm_verify"

    def _verify(sql: str) -> list[Violation]:
        if llm_mode:
            violations = _verify_stages_1_2(sql, db)
            if violations and violations[0].source is ViolationSource.SYNTAX:
                return violations
            violations.extend(
                _llm_verify_violations(sql, task, schema, constraints_text or "(none)", client, config, usage)
            )
            return violations
        return verify_sql(sql, constraints, db, schema_desc)

    drafts = [Draft(sql=initial_sql, violations=tuple(_verify(initial_sql)))]
    repairs = 0
    error: Optional[str] = None
    while drafts[-1].violations and repairs < max_repairs:
        prompt = render_prompt(
            PromptKind.REPAIR,
            {
                "question": task.question,
                "evidence": task.evidence or "(none)",
                "schema": schema,
                "original_sql": drafts[-1].sql,
                "violation_messages": render_violations(drafts[-1].violations),
            },
        )
        new_sql: Optional[str] = None
        try:
            for _ in range(2):
                response = client.complete(_request(config, PromptKind.REPAIR, prompt))
                usage.add(response)
                try:
                    new_sql = parse_sql_answer(response.text)
                    break
                except EmptyAnswer:
                    continue
        except BackendError as e:
            error = f"backend failure during repair: {e}"
        if new_sql is None:
            # min is stable: the earliest draft wins ties on violation count
            best = min(drafts, key=lambda d: len(d.violations))
            if best is not drafts[-1]:
                drafts.append(best)
            if error is None:
                error = "repair rounds produced no SQL"
            break
        drafts.append(Draft(sql=new_sql, violations=tuple(_verify(new_sql))))
        repairs += 1
        logger.info("repair round %d: %d violations remain", repairs, len(drafts[-1].violations))
    return drafts, repairs, error


def _verify_stages_1_2(sql: str, db: DatabaseHandle) -> list[Violation]:
    try:
        parse_sql(sql)
    except ParseError as e:
        return [Violation(source=ViolationSource.SYNTAX, message=str(e))]
    violation = syntax_check(db, sql)
    if violation is not None:
        return [violation]
    result = execute(db, sql, row_cap=db.probe_row_cap)
    return [result] if isinstance(result, Violation) else []


def run_task(
    task: Task, db: DatabaseHandle, client: LlmClient, config: Optional[AgentConfig] = None
) -> RunRecord:
    """Full pipeline on one task: probe, extract, generate, verify-and-repair."""
    config = config or AgentConfig()
    usage = _Usage()
    started = time.perf_counter()

    def _finish(**kwargs) -> RunRecord:
        return RunRecord(
            task_id=task.task_id,
            tokens_in=usage.tokens_in,
            tokens_out=usage.tokens_out,
            wall_seconds=time.perf_counter() - started,
            **kwargs,
        )

    try:
        schema_str = schema_text(db)
        schema_desc = read_schema(db)

        k = 0 if config.mode == "no_probe" else config.max_probes
        m = 0 if config.mode == "no_repair" else config.max_repairs

        grounding = run_probe_loop(task, schema_str, db, client, k, config, usage)

        constraints: tuple[Constraint, ...] = ()
        constraints_text: Optional[str] = None
        if config.mode == "llm_verify":
            constraints_text = _llm_extract_constraints_text(task, client, config, usage)
        else:
            extracted = extract_constraints(task.question, task.evidence)
            extracted |= literal_constraints_from_mappings(grounding.merged_value_mappings)
            constraints = tuple(sort_constraints(extracted))

        initial_sql = generate_sql(
            task, schema_str, grounding, constraints, client, config, usage, constraints_text
        )
        if initial_sql is None:
            return _finish(
                grounding=grounding,
                constraints=constraints,
                failed=True,
                error="generation produced no SQL after retry",
            )

        drafts, repairs, error = repair_loop(
            task,
            schema_str,
            grounding,
            constraints,
            initial_sql,
            db,
            client,
            m,
            config,
            usage,
            schema_desc,
            constraints_text,
        )
        return _finish(
            grounding=grounding,
            constraints=constraints,
            drafts=tuple(drafts),
            final_sql=drafts[-1].sql,
            probe_count=grounding.probe_count,
            repair_count=repairs,
            error=error,
        )
    except Exception as e:  # unrecoverable: surface as a failed record, never raise
        logger.exception("task %s failed", task.task_id)
        return _finish(failed=True, error=f"{type(e).__name__}: {e}")
