"""Chat-completion backends, prompt templates, and model-output parsing.

Two backends share one interface: an HTTP client for any OpenAI-style
chat-completions endpoint, and a scripted mock that replays canned responses
in order for deterministic offline tests. Prompt templates are fixed
strings; rendering substitutes only the known ``{placeholder}`` names so the
JSON examples inside the templates survive untouched.
"""

from __future__ import annotations

import json
import os
import re
import threading
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import httpx

from .core import Constraint, ProbeRecord, Violation, sort_constraints

API_KEY_ENV = "PVSQL_API_KEY"
_CELL_RENDER_LIMIT = 200  # characters per cell when probe rows go into prompts
_ROWS_RENDER_LIMIT = 5


class PromptKind(str, Enum):
    PROBE = "probe"
    GENERATE = "generate"
    REPAIR = "repair"
    ERROR_JUDGE = "error_judge"
    PROBE_JUDGE = "probe_judge"
    LLM_EXTRACT = "llm_extract"
    LLM_VERIFY = "llm_verify"


class MissingPlaceholder(KeyError):
    pass


class Unparseable(Exception):
    pass


class EmptyAnswer(Exception):
    pass


class BackendError(Exception):
    pass


class TransientBackendError(BackendError):
    pass


class AuthError(BackendError):
    pass


class MockScriptError(AssertionError):
    """The scripted mock was asked for a prompt kind it did not expect."""


@dataclass(frozen=True)
class ChatRequest:
    kind: PromptKind
    text: str
    temperature: float = 0.0
    max_output_tokens: int = 1024


@dataclass(frozen=True)
class ChatResponse:
    text: str
    tokens_in: int = 0
    tokens_out: int = 0
    latency_seconds: float = 0.0
    estimated: bool = False


@dataclass(frozen=True)
class ProbeDecision:
    action: str  # 'probe' | 'done'
    probe_sql: Optional[str] = None
    relevant_columns: dict[str, tuple[str, ...]] = field(default_factory=dict)
    value_mappings: dict[str, str] = field(default_factory=dict)


# ---------------------------------------------------------------------------
# Prompt templates
# ---------------------------------------------------------------------------

PROBE_TEMPLATE = """## Background
You are helping to solve a text-to-SQL problem. Before writing the final SQL query, you can run exploratory "probe" queries on the database to understand its content. Probes help discover addition knowledge that are not apparent from the schema alone.

## Task
Analyze the question and schema, then decide whether to request a probe query or proceed to SQL generation.

## Context
Question: {question}
Evidence (hints provided with the question): {evidence}
Database Schema: {schema}
Prior Probes (queries you already ran and their results): {prior_probe_results}

## Instructions
- If you need more information, generate a probe query (e.g., SELECT DISTINCT column FROM table LIMIT 5).
- If you have enough information, set action to "done".
- Record any value mappings you discover (e.g., "California" maps to "CA" in the database).

## Output Format (JSON)
{
  "action": "probe" | "done",
  "probe_sql": "SELECT ...",
  "relevant_columns": {"table": ["col1", "col2"]},
  "value_mappings": {"term_in_question": "exact_db_value"}
}"""

GENERATE_TEMPLATE = """## Task
Write a SQL query to answer the question based on the provided context.

## Context
Question: {question}
Evidence (hints provided with the question): {evidence}
Database Schema: {schema}

Probe Observations (results from exploratory queries run on the database, showing actual values and formats):
{probe_results}

Extracted Constraints (requirements derived from the question, e.g., needs DISTINCT, needs LIMIT, needs COUNT):
{constraints}

## Rules
- Write a single SQL statement only.
- Return only what is asked (no extra columns).
- Follow evidence/hints strictly when provided.
- Use exact database values discovered from probes (e.g., use "CA" not "California" if probes showed state codes).

## Output
SQL query only."""

REPAIR_TEMPLATE = """## Background
A SQL query was generated but failed verification. The verifier checks for constraint violations (e.g., missing DISTINCT when the question asks for unique values, missing LIMIT for top-k queries) and execution errors (e.g., invalid column names, syntax errors).

## Task
Fix the SQL query to resolve the detected violations.

## Context
Question: {question}
Evidence (hints provided with the question): {evidence}
Database Schema: {schema}

Original SQL (the query that failed verification):
{original_sql}

## Violations Detected (errors found by the verifier):
{violation_messages}

## Instructions
- Carefully address each violation listed above.
- Output the corrected SQL only (no explanation)."""

ERROR_JUDGE_TEMPLATE = """## Background
You are analyzing why a text-to-SQL model failed to generate the correct query. By comparing the predicted SQL with the ground truth, you will classify the root cause of the error to help understand model weaknesses.

## Task
Analyze the failure and classify it into one error category.

## Context
Question: {question}
Evidence (hints provided with the question): {evidence}
Database Schema: {schema}
Ground Truth SQL (the correct answer): {gold_sql}
Predicted SQL (what the model generated): {predicted_sql}
Execution Error (if the predicted SQL failed to run): {exec_error}

## Error Types
Classify into exactly one category:

1. DATABASE_MISINTERPRETATION:
Failed to understand database content, schema, or relationships.
Examples: wrong table/column, misunderstood foreign keys or data formats.

2. QUESTION_MISINTERPRETATION:
Misinterpreted the question.
Examples: wrong filter conditions, misunderstood aggregation requirements.

3. SQL_SYNTHESIS_FAILURE:
Understood context correctly but failed to generate correct SQL.
Examples: wrong JOIN syntax, missing clauses, syntax errors.

## Output Format (JSON)
{
  "error_type": "...",
  "reasoning": "...",
  "specific_issue": "..."
}"""

PROBE_JUDGE_TEMPLATE = """## Background
You are evaluating the quality of probe queries for text-to-SQL grounding. Probes are exploratory SQL queries that help understand database content before generating the final query.

## Task
For each probe query, assess three aspects:

1. RELEVANCE: Is this probe relevant to answering the question? (yes/no)
2. NEW_INSIGHT: Does this probe provide information not available from schema alone? (yes/no)
  - Schema-only info: table/column names, data types, foreign keys
  - New insights: actual data values, data formats, value distributions, NULL patterns
3. REDUNDANT: Does this probe duplicate information from previous probes? (yes/no)

## Context
Question: {question}
Evidence: {evidence}
Schema: {schema}
Probes to evaluate: {probes}

## Output Format (JSON)
{
  "evaluations": [
    {"probe_index": 0, "relevant": true/false,
     "new_insight": true/false, "redundant": true/false,
     "reasoning": "..."},
    ...
  ]
}"""

LLM_EXTRACT_TEMPLATE = """## Task
You are a SQL requirements analyst. Extract semantic constraints from the natural language question and evidence.

## Context
Question: {question}
Evidence: {evidence}

## Instructions
Focus on identifying:
- DISTINCT requirements (unique, different, distinct values)
- Aggregation needs (count, sum, avg, max, min)
- Ordering/ranking requirements (top N, highest, lowest, oldest, newest)
- Percentage/ratio calculations
- Comparison operators (greater than, less than, equal to)
- Grouping requirements
- NULL handling needs
- Any specific value filtering mentioned

## Output Format (JSON)
{
  "constraints": [
    {
      "type": "distinct|limit|aggregation|...",
      "description": "human-readable description",
      "sql_hint": "what SQL construct should be used"
    }
  ],
  "output_requirements": {
    "expected_columns": ["col1", "col2"],
    "expected_type": "single_value|list|count|..."
  }
}"""

LLM_VERIFY_TEMPLATE = """## Task
You are a SQL verification expert. Verify if the generated SQL query correctly satisfies all requirements from the original question.

## Context
Question: {question}
Evidence: {evidence}
Extracted Constraints: {constraints}
Schema: {schema}
Generated SQL: {sql}

## Verification Checklist
Verify ALL aspects:
1. Structural validity: Is it a single valid SELECT/WITH statement?
2. Semantic correctness: Does the SQL return what the question asks?
3. Filter correctness: Are all filters/conditions applied?
4. Aggregation correctness: Is aggregation correct (COUNT vs COUNT(DISTINCT))?
5. Ordering correctness: Is ordering/limit correct for "top N" queries?
6. JOIN correctness: Are JOINs correct and complete?
7. Output format: Is the output format correct?

## Instructions
Be thorough but avoid false positives. Only flag issues that are clearly problems.

## Output Format (JSON)
{
  "is_valid": true/false,
  "issues": [
    {
      "severity": "error|warning",
      "category": "syntax|semantic|missing_constraint|...",
      "description": "detailed description of the issue",
      "suggestion": "how to fix it"
    }
  ]
}"""

TEMPLATES: dict[PromptKind, str] = {
    PromptKind.PROBE: PROBE_TEMPLATE,
    PromptKind.GENERATE: GENERATE_TEMPLATE,
    PromptKind.REPAIR: REPAIR_TEMPLATE,
    PromptKind.ERROR_JUDGE: ERROR_JUDGE_TEMPLATE,
    PromptKind.PROBE_JUDGE: PROBE_JUDGE_TEMPLATE,
    PromptKind.LLM_EXTRACT: LLM_EXTRACT_TEMPLATE,
    PromptKind.LLM_VERIFY: LLM_VERIFY_TEMPLATE,
}

_PLACEHOLDER_RE = re.compile(r"\{([a-z_]+)\}")


def render_prompt(kind: PromptKind, context: dict) -> str:
    """Fill a template's placeholders from ``context``.

    Only ``{lower_snake}`` tokens are placeholders; the braces of the JSON
    output examples never match. Raises MissingPlaceholder when the bundle
    lacks a name the template needs.
    """
    template = TEMPLATES[kind]

    def _sub(m: re.Match) -> str:
        name = m.group(1)
        if name not in context:
            raise MissingPlaceholder(name)
        return str(context[name])

    return _PLACEHOLDER_RE.sub(_sub, template)


# ---------------------------------------------------------------------------
# Context rendering helpers
# ---------------------------------------------------------------------------


def _clip(cell) -> object:
    if isinstance(cell, str) and len(cell) > _CELL_RENDER_LIMIT:
        return cell[:_CELL_RENDER_LIMIT] + "..."
    return cell


def format_rows(rows: Sequence, max_rows: int = _ROWS_RENDER_LIMIT) -> str:
    shown = [tuple(_clip(c) for c in row) for row in rows[:max_rows]]
    body = ", ".join(repr(t) for t in shown)
    if len(rows) > max_rows:
        return f"[{body}, ...]"
    return f"[{body}]"


def render_probe_history(probes: Sequence[ProbeRecord]) -> str:
    if not probes:
        return "(none)"
    blocks = []
    for i, p in enumerate(probes, start=1):
        result = p.error if p.failed else format_rows(p.rows or ())
        lines = [f"[{i}] SQL: {p.probe_sql}", f"    Result: {result}"]
        if p.value_mappings:
            pairs = ", ".join(f'"{k}" -> "{v}"' for k, v in p.value_mappings.items())
            lines.append(f"    Learned mappings: {pairs}")
        blocks.append("\n".join(lines))
    return "\n".join(blocks)


def render_grounding(probes: Sequence[ProbeRecord], value_mappings: dict[str, str], insights: str = "") -> str:
    if not probes and not value_mappings and not insights:
        return "(none)"
    parts = [render_probe_history(probes)]
    if value_mappings:
        pairs = "\n".join(f'- "{k}" maps to "{v}"' for k, v in value_mappings.items())
        parts.append(f"Confirmed value mappings:\n{pairs}")
    if insights:
        parts.append(f"Observations:\n{insights}")
    return "\n\n".join(parts)


def render_constraints(constraints) -> str:
    ordered = sort_constraints(constraints)
    if not ordered:
        return "(none)"
    return "\n".join(f"- {c.describe()}" for c in ordered)


def render_violations(violations: Sequence[Violation]) -> str:
    if not violations:
        return "(none)"
    return "\n".join(f"- [{v.source.value}] {v.message}" for v in violations)


# ---------------------------------------------------------------------------
# Backends
# ---------------------------------------------------------------------------


class MockBackend:
    """Replays scripted responses in order, checking each expected prompt kind.

    Internally serialized; a scripted run must therefore drive one task at a
    time or the script order becomes meaningless.
    """

    def __init__(self, script: Sequence[dict]):
        self._script = list(script)
        self._index = 0
        self._lock = threading.Lock()
        self.calls = 0

    @classmethod
    def from_file(cls, path: str) -> "MockBackend":
        with open(path, "r", encoding="utf-8") as f:
            return cls(json.load(f))

    def send(self, request: ChatRequest) -> ChatResponse:
        with self._lock:
            self.calls += 1
            if self._index >= len(self._script):
                raise BackendError(f"mock script exhausted after {len(self._script)} responses")
            entry = self._script[self._index]
            self._index += 1
        expected = entry.get("expect_kind")
        if expected is not None and expected != request.kind.value:
            raise MockScriptError(
                f"mock script expected a {expected!r} prompt but received {request.kind.value!r}"
            )
        return ChatResponse(
            text=entry["response_text"],
            tokens_in=int(entry.get("tokens_in", 0)),
            tokens_out=int(entry.get("tokens_out", 0)),
        )


class HttpBackend:
    """OpenAI-style chat-completions client over plain HTTP."""

    def __init__(
        self,
        endpoint: str,
        model: str,
        api_key: Optional[str] = None,
        extra_params: Optional[dict] = None,
        http_timeout: float = 120.0,
    ):
        self.endpoint = endpoint
        self.model = model
        self.api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV, "")
        self.extra_params = dict(extra_params or {})
        self.http_timeout = http_timeout

    def send(self, request: ChatRequest) -> ChatResponse:
        payload = {
            "model": self.model,
            "messages": [{"role": "user", "content": request.text}],
            "temperature": request.temperature,
            "max_tokens": request.max_output_tokens,
        }
        payload.update(self.extra_params)
        headers = {}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        try:
            response = httpx.post(self.endpoint, json=payload, headers=headers, timeout=self.http_timeout)
        except httpx.HTTPError as e:
            raise TransientBackendError(f"transport failure: {e}") from e
        if response.status_code in (401, 403):
            raise AuthError(f"authentication rejected ({response.status_code})")
        if response.status_code >= 500 or response.status_code == 429:
            raise TransientBackendError(f"backend returned {response.status_code}")
        if response.status_code >= 400:
            raise BackendError(f"backend returned {response.status_code}: {response.text[:500]}")
        data = response.json()
        choices = data.get("choices") or []
        if not choices:
            raise BackendError("backend response carried no choices")
        text = str((choices[0].get("message") or {}).get("content") or "")
        usage = data.get("usage") or {}
        tokens_in = usage.get("prompt_tokens")
        tokens_out = usage.get("completion_tokens")
        estimated = tokens_in is None or tokens_out is None
        if estimated:
            tokens_in = len(request.text) // 4
            tokens_out = len(text) // 4
        return ChatResponse(
            text=text, tokens_in=int(tokens_in), tokens_out=int(tokens_out), estimated=estimated
        )


class LlmClient:
    """Retry wrapper over a backend; safe for concurrent use."""

    def __init__(self, backend, max_retries: int = 3, backoff_seconds: float = 0.5):
        self.backend = backend
        self.max_retries = max_retries
        self.backoff_seconds = backoff_seconds

    def complete(self, request: ChatRequest) -> ChatResponse:
        last: Optional[Exception] = None
        for attempt in range(self.max_retries + 1):
            started = time.perf_counter()
            try:
                response = self.backend.send(request)
            except TransientBackendError as e:
                last = e
                if attempt < self.max_retries:
                    time.sleep(self.backoff_seconds * (2**attempt))
                continue
            latency = time.perf_counter() - started
            return ChatResponse(
                text=response.text,
                tokens_in=response.tokens_in,
                tokens_out=response.tokens_out,
                latency_seconds=latency,
                estimated=response.estimated,
            )
        raise BackendError(f"backend failed after {self.max_retries + 1} attempts: {last}")


# ---------------------------------------------------------------------------
# Model-output parsing
# ---------------------------------------------------------------------------


def first_json_object(text: str) -> dict:
    """First parseable JSON object in the text, tolerating fences and prose."""
    decoder = json.JSONDecoder()
    for i, ch in enumerate(text):
        if ch != "{":
            continue
        try:
            obj, _ = decoder.raw_decode(text[i:])
        except ValueError:
            continue
        if isinstance(obj, dict):
            return obj
    raise Unparseable("no JSON object found in model output")


def parse_probe_decision(text: str) -> ProbeDecision:
    obj = first_json_object(text)
    action = obj.get("action")
    if action not in ("probe", "done"):
        raise Unparseable(f"probe decision has no valid action: {action!r}")
    probe_sql = obj.get("probe_sql")
    if action == "probe" and not (isinstance(probe_sql, str) and probe_sql.strip()):
        raise Unparseable("action is 'probe' but probe_sql is missing")
    relevant = {}
    for table, cols in (obj.get("relevant_columns") or {}).items():
        if isinstance(cols, list):
            relevant[str(table)] = tuple(str(c) for c in cols)
    mappings = {str(k): str(v) for k, v in (obj.get("value_mappings") or {}).items()}
    return ProbeDecision(
        action=action,
        probe_sql=probe_sql.strip() if isinstance(probe_sql, str) else None,
        relevant_columns=relevant,
        value_mappings=mappings,
    )


_FENCE_RE = re.compile(r"```(?:sql)?\s*(.*?)```", re.DOTALL | re.IGNORECASE)
_SQL_LINE_RE = re.compile(r"^[ \t]*(select|with)\b", re.IGNORECASE | re.MULTILINE)


def _first_statement(sql: str) -> str:
    """Cut at the first semicolon that is not inside a quoted literal."""
    quote = None
    for i, ch in enumerate(sql):
        if quote:
            if ch == quote:
                quote = None
        elif ch in ("'", '"', "`"):
            quote = ch
        elif ch == ";":
            return sql[:i]
    return sql


def parse_sql_answer(text: str) -> str:
    """Extract the single SQL statement from a model answer.

    Strips code fences and leading prose; with several statements, the first
    one wins. Raises EmptyAnswer when no SQL can be found.
    """
    if not text or not text.strip():
        raise EmptyAnswer("model answer is empty")
    candidate = text.strip()
    fence = _FENCE_RE.search(candidate)
    if fence:
        candidate = fence.group(1).strip()
    if not re.match(r"(?i)(select|with)\b", candidate):
        m = _SQL_LINE_RE.search(candidate)
        if m is None:
            m = re.search(r"\bselect\b", candidate, re.IGNORECASE)
        if m is None:
            raise EmptyAnswer("no SQL statement found in model answer")
        candidate = candidate[m.start() :]
    statement = _first_statement(candidate).strip()
    if not statement:
        raise EmptyAnswer("model answer reduced to nothing")
    return statement
