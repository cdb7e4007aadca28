"""Command-line interface: extract / verify / probe / run / bench / eval-constraints / headroom.

Exit codes: 0 success, 1 task-level failure, 2 usage or configuration error.
Every subcommand accepts --json to switch human output to machine JSON.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from dataclasses import dataclass

from . import agent, bench, executor, sqlcheck
from .core import Task, run_record_from_dict, sort_constraints, task_from_dict
from .extractor import extract_constraints
from .llm import HttpBackend, LlmClient, MockBackend
from .sqlast import ParseError

logger = logging.getLogger("pvsql")


class ConfigError(Exception):
    pass


@dataclass
class Settings:
    db_root: str = "."
    timeout_seconds: float = 30.0
    probe_row_cap: int = 10
    max_probes: int = 5
    max_repairs: int = 5
    mode: str = "rule"
    temperature: float = 0.0
    max_output_tokens: int = 1024
    backend_kind: str = "mock"
    endpoint: str = ""
    model: str = ""
    script_path: str = ""
    workers: int = 1


_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(Settings)}


def load_settings(path: str | None) -> Settings:
    """Read a flat key = value config file (# comments, optional quotes)."""
    settings = Settings()
    if path is None:
        return settings
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#") or stripped.startswith("["):
                continue
            if "=" not in stripped:
                raise ConfigError(f"{path}:{lineno}: expected key = value")
            key, _, value = stripped.partition("=")
            key = key.strip()
            value = value.strip().strip("'\"")
            if key not in _FIELD_TYPES:
                raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
            current = getattr(settings, key)
            try:
                if isinstance(current, bool):
                    parsed = value.lower() in ("1", "true", "yes")
                elif isinstance(current, int):
                    parsed = int(value)
                elif isinstance(current, float):
                    parsed = float(value)
                else:
                    parsed = value
            except ValueError as e:
                raise ConfigError(f"{path}:{lineno}: bad value for {key}: {e}") from e
            setattr(settings, key, parsed)
    return settings


def _apply_overrides(settings: Settings, args: argparse.Namespace) -> Settings:
    for name in ("db_root", "mode", "workers", "max_probes", "max_repairs", "timeout_seconds"):
        value = getattr(args, name, None)
        if value is not None:
            setattr(settings, name, value)
    return settings


def make_client(settings: Settings) -> LlmClient:
    if settings.backend_kind == "mock":
        if not settings.script_path:
            raise ConfigError("mock backend requires script_path")
        return LlmClient(MockBackend.from_file(settings.script_path))
    if settings.backend_kind == "http":
        if not settings.endpoint or not settings.model:
            raise ConfigError("http backend requires endpoint and model")
        return LlmClient(HttpBackend(endpoint=settings.endpoint, model=settings.model))
    raise ConfigError(f"unknown backend_kind {settings.backend_kind!r}")


def _agent_config(settings: Settings) -> agent.AgentConfig:
    return agent.AgentConfig(
        max_probes=settings.max_probes,
        max_repairs=settings.max_repairs,
        mode=settings.mode,
        temperature=settings.temperature,
        max_output_tokens=settings.max_output_tokens,
    )


def _load_task(spec: str) -> Task:
    if os.path.exists(spec):
        with open(spec, "r", encoding="utf-8") as f:
            data = json.load(f)
    else:
        data = json.loads(spec)
    data.setdefault("task_id", "task")
    if "SQL" in data and "gold_sql" not in data:
        data["gold_sql"] = data["SQL"]
    return task_from_dict(data)


def _emit(payload, as_json: bool, human: str | None = None) -> None:
    if as_json:
        print(json.dumps(payload))
    elif human is not None:
        print(human)
    else:
        print(json.dumps(payload, indent=2))


# ---------------------------------------------------------------------------
# Subcommand handlers
# ---------------------------------------------------------------------------


def _cmd_extract(args) -> int:
    constraints = sort_constraints(extract_constraints(args.question, args.evidence or ""))
    payload = [c.to_dict() for c in constraints]
    _emit(payload, args.json)
    return 0


def _cmd_verify(args) -> int:
    constraints = sort_constraints(extract_constraints(args.question, args.evidence or ""))
    try:
        ast = sqlcheck.parse_sql(args.sql)
    except ParseError as e:
        payload = [{"source": "syntax", "constraint": None, "message": str(e)}]
        _emit(payload, args.json)
        return 1
    violations = sqlcheck.check_all(ast, constraints)
    _emit([v.to_dict() for v in violations], args.json)
    return 0


def _cmd_probe(args, settings: Settings) -> int:
    task = _load_task(args.task)
    client = make_client(settings)
    config = _agent_config(settings)
    with executor.open_database(
        settings.db_root, task.db_id, settings.timeout_seconds, settings.probe_row_cap
    ) as db:
        grounding = agent.run_probe_loop(
            task, executor.schema_text(db), db, client, config.max_probes, config
        )
    _emit(grounding.to_dict(), args.json)
    return 0


def _cmd_run(args, settings: Settings) -> int:
    task = _load_task(args.task)
    client = make_client(settings)
    config = _agent_config(settings)
    with executor.open_database(
        settings.db_root, task.db_id, settings.timeout_seconds, settings.probe_row_cap
    ) as db:
        record = agent.run_task(task, db, client, config)
    _emit(record.to_dict(), args.json)
    return 1 if record.failed else 0


def _cmd_bench(args, settings: Settings) -> int:
    tasks = bench.load_tasks(args.tasks, args.format)
    client = make_client(settings)
    config = _agent_config(settings)
    workers = settings.workers
    if settings.backend_kind == "mock" and workers != 1:
        logger.info("mock backend replays a fixed script; forcing workers=1")
        workers = 1
    records = bench.run_benchmark(
        tasks,
        settings.db_root,
        client,
        config,
        workers=workers,
        timeout_seconds=settings.timeout_seconds,
        probe_row_cap=settings.probe_row_cap,
        trace_path=args.trace,
    )
    report, evals = bench.evaluate_records(tasks, records, settings.db_root, settings.timeout_seconds)
    success, regression = bench.eval_repair_rates(records)
    payload = {
        "metrics": report.to_dict(),
        "repair_success_rate": success,
        "repair_regression_rate": regression,
        "tasks": [e.to_dict() for e in evals],
    }
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            json.dump(payload, f, indent=2)
    _emit(payload if args.json else report.to_dict(), args.json, human=bench.report_text(report))
    return 1 if any(r.failed for r in records) else 0


def _cmd_eval_constraints(args, settings: Settings) -> int:
    tasks = bench.load_tasks(args.tasks, args.format)
    rate = bench.eval_extraction_on_gold(tasks, settings.db_root)
    _emit({"gold_pass_rate": rate, "n_tasks": len(tasks)}, args.json, human=f"gold SQL pass rate: {rate:.2f}%")
    return 0


def _cmd_headroom(args, settings: Settings) -> int:
    tasks = bench.load_tasks(args.tasks, args.format)
    by_id = {t.task_id: t for t in tasks}
    records = []
    with open(args.trace, "r", encoding="utf-8") as f:
        for line in f:
            if line.strip():
                records.append(run_record_from_dict(json.loads(line)))
    client = make_client(settings)
    config = _agent_config(settings)

    failures = []
    for record in records:
        task = by_id.get(record.task_id)
        if task is None or not task.gold_sql:
            continue
        with executor.open_database(settings.db_root, task.db_id, settings.timeout_seconds) as db:
            try:
                correct = (not record.failed) and bench.execution_accuracy(
                    record.final_sql, task.gold_sql, db
                )
            except bench.GoldExecutionError:
                continue
        if not correct:
            failures.append((task, record))

    rate = bench.headroom_rerun(failures, settings.db_root, client, config, settings.timeout_seconds)
    _emit(
        {"corrected_rate": rate, "n_failures": len(failures)},
        args.json,
        human=f"oracle constraints corrected {rate:.2f}% of {len(failures)} failures",
    )
    return 0


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pvsql", description=__doc__)
    parser.add_argument("--verbose", action="store_true", help="debug logging (includes raw prompts)")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, with_config=True):
        p.add_argument("--json", action="store_true", help="machine-readable output")
        if with_config:
            p.add_argument("--config", help="flat key = value config file")
            p.add_argument("--db-root", dest="db_root", help="directory of <db_id>/<db_id>.sqlite")
            p.add_argument("--mode", choices=agent.MODES, help="pipeline mode")
            p.add_argument("--max-probes", dest="max_probes", type=int, help="probe budget K")
            p.add_argument("--max-repairs", dest="max_repairs", type=int, help="repair budget M")
            p.add_argument("--timeout-seconds", dest="timeout_seconds", type=float)

    p = sub.add_parser("extract", help="extract constraints from a question")
    p.add_argument("--question", required=True)
    p.add_argument("--evidence", default="")
    common(p, with_config=False)

    p = sub.add_parser("verify", help="check a SQL string against question constraints")
    p.add_argument("--sql", required=True)
    p.add_argument("--question", required=True)
    p.add_argument("--evidence", default="")
    common(p, with_config=False)

    p = sub.add_parser("probe", help="run the probing loop alone")
    p.add_argument("--task", required=True, help="task JSON (file path or inline)")
    common(p)

    p = sub.add_parser("run", help="run the full pipeline on one task")
    p.add_argument("--task", required=True, help="task JSON (file path or inline)")
    common(p)

    p = sub.add_parser("bench", help="run and score a benchmark task file")
    p.add_argument("--tasks", required=True)
    p.add_argument("--format", choices=("bird", "spider", "minidev"), default="bird")
    p.add_argument("--out", help="write the full report JSON here")
    p.add_argument("--trace", help="write one RunRecord JSON per line here")
    p.add_argument("--workers", type=int)
    common(p)

    p = sub.add_parser("eval-constraints", help="gold-SQL pass rate of extraction")
    p.add_argument("--tasks", required=True)
    p.add_argument("--format", choices=("bird", "spider", "minidev"), default="bird")
    common(p)

    p = sub.add_parser("headroom", help="rerun repairs on failures with gold-derived constraints")
    p.add_argument("--trace", required=True, help="RunRecord JSONL from a bench run")
    p.add_argument("--tasks", required=True)
    p.add_argument("--format", choices=("bird", "spider", "minidev"), default="bird")
    common(p)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )

    try:
        if args.command == "extract":
            return _cmd_extract(args)
        if args.command == "verify":
            return _cmd_verify(args)
        settings = _apply_overrides(load_settings(args.config), args)
        if args.command == "probe":
            return _cmd_probe(args, settings)
        if args.command == "run":
            return _cmd_run(args, settings)
        if args.command == "bench":
            if getattr(args, "workers", None) is not None:
                settings.workers = args.workers
            return _cmd_bench(args, settings)
        if args.command == "eval-constraints":
            return _cmd_eval_constraints(args, settings)
        if args.command == "headroom":
            return _cmd_headroom(args, settings)
        parser.error(f"unknown command {args.command!r}")
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except (bench.FormatError, FileNotFoundError, json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    return 2


if __name__ == "__main__":
    sys.exit(main())
