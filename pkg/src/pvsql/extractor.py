"""Rule-based extraction of verifiable constraints from question text.

Pure pattern matching: case-insensitive, word-boundary phrase rules over the
question plus any evidence text. Precision is deliberately favored over
recall; an over-eager rule forces spurious repairs, a missed one merely
leaves a constraint unchecked.

Overlapping matches resolve by longest span: "no more than" beats the inner
"more than", "at least" swallows "least", a number-adjacent superlative
("highest 5") becomes a top-k requirement instead of an extremum.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional

from .core import Constraint, ConstraintKind


class NoNumber(Exception):
    """A top-k trigger fired with no parseable adjacent number."""


@dataclass(frozen=True)
class Rule:
    kind: ConstraintKind
    phrases: tuple[str, ...]
    param_spec: Optional[str] = None  # 'count' | 'direction' | 'operator' | None


RULE_TABLE: tuple[Rule, ...] = (
    Rule(ConstraintKind.DISTINCT, ("unique", "distinct", "different", "no duplicate", "deduplicate")),
    Rule(ConstraintKind.TOP_K, ("top N", "first N", "bottom N", "highest N", "lowest N", "best N", "worst N"), "count"),
    Rule(ConstraintKind.RANKING, ("rank", "ranking", "position", "placed", "standing")),
    Rule(ConstraintKind.COUNT, ("how many", "count", "number of", "total number", "quantity of")),
    Rule(ConstraintKind.PERCENT, ("percentage", "percent", "%", "ratio", "rate", "proportion", "fraction of")),
    Rule(ConstraintKind.SUM, ("total", "sum", "overall", "combined", "aggregate")),
    Rule(ConstraintKind.AVERAGE, ("average", "mean", "avg", "on average", "typical")),
    Rule(
        ConstraintKind.EXTREME,
        ("maximum", "minimum", "max", "min", "largest", "smallest", "most", "least", "highest", "lowest"),
        "direction",
    ),
    Rule(
        ConstraintKind.TEMPORAL,
        ("latest", "earliest", "most recent", "newest", "oldest", "last", "first"),
        "direction",
    ),
    Rule(
        ConstraintKind.COMPARE,
        ("more than", "less than", "greater than", "fewer than", "at least", "at most",
         "no more than", "no less than", "exceeds"),
        "operator",
    ),
)

_TOPK_WORDS = ("top", "first", "bottom", "highest", "lowest", "best", "worst")

# Superlatives that imply an extremum when no count is attached ("top students").
# "first" is excluded: without a number it is either temporal ("first date") or
# ordinary noun phrase ("first name"), never a MAX/MIN requirement.
_BARE_TOPK_DIRECTION = {"top": "max", "best": "max", "worst": "min", "bottom": "min"}

_EXTREME_DIRECTION = {
    "maximum": "max", "max": "max", "largest": "max", "most": "max", "highest": "max",
    "minimum": "min", "min": "min", "smallest": "min", "least": "min", "lowest": "min",
}

_TEMPORAL_DIRECTION = {
    "latest": "desc", "most recent": "desc", "newest": "desc", "last": "desc",
    "earliest": "asc", "oldest": "asc", "first": "asc",
}

_COMPARE_OPERATOR = {
    "more than": ">", "greater than": ">", "exceeds": ">",
    "at least": ">=", "no less than": ">=",
    "less than": "<", "fewer than": "<",
    "at most": "<=", "no more than": "<=",
}

_NUMBER_WORDS = {
    "one": 1, "two": 2, "three": 3, "four": 4, "five": 5,
    "six": 6, "seven": 7, "eight": 8, "nine": 9, "ten": 10,
}
_NUMBER_ALT = r"\d+|" + "|".join(_NUMBER_WORDS)

_YEAR_RE = re.compile(r"\b(19\d{2}|20\d{2})\b")

# Month names double as time-context markers; "may" is omitted because the
# modal verb reading dominates in questions.
_TIME_CONTEXT_RE = re.compile(
    r"\b(year|years|month|months|date|dates|day|days|time|times"
    r"|january|february|march|april|june|july|august|september|october|november|december)\b"
    r"|\b(19\d{2}|20\d{2})\b",
    re.IGNORECASE,
)

_SENTENCE_RE = re.compile(r"[^.!?;]+")


def _phrase_regex(phrase: str) -> re.Pattern:
    if phrase == "%":
        return re.compile(r"%")
    words = [re.escape(w) for w in phrase.split()]
    if phrase == "no duplicate":
        words[-1] += "s?"
    return re.compile(r"\b" + r"\s+".join(words) + r"\b", re.IGNORECASE)


_TOPK_RE = {
    w: re.compile(rf"\b{w}\s+({_NUMBER_ALT})\b", re.IGNORECASE) for w in _TOPK_WORDS
}

_SIMPLE_RULES: list[tuple[ConstraintKind, str, re.Pattern]] = []
for _rule in RULE_TABLE:
    if _rule.kind in (ConstraintKind.TOP_K, ConstraintKind.EXTREME, ConstraintKind.TEMPORAL, ConstraintKind.COMPARE):
        continue
    for _p in _rule.phrases:
        _SIMPLE_RULES.append((_rule.kind, _p, _phrase_regex(_p)))

_EXTREME_RES = {w: _phrase_regex(w) for w in _EXTREME_DIRECTION}
_BARE_TOPK_RES = {w: _phrase_regex(w) for w in _BARE_TOPK_DIRECTION}
_TEMPORAL_RES = {p: _phrase_regex(p) for p in _TEMPORAL_DIRECTION}
# "first name" / "last name" are column references, not temporal cues
for _w in ("first", "last"):
    _TEMPORAL_RES[_w] = re.compile(rf"\b{_w}\b(?!\s+names?\b)", re.IGNORECASE)
_COMPARE_RES = {p: _phrase_regex(p) for p in _COMPARE_OPERATOR}


def _parse_number(text: str) -> int:
    if text.isdigit():
        return int(text)
    return _NUMBER_WORDS[text.lower()]


def _is_year(n: int, source: str) -> bool:
    return len(source) == 4 and 1900 <= n <= 2099


def extract_topk_n(question: str, trigger_span: tuple[int, int]) -> int:
    """Parse the requested row count at a top-k trigger span.

    Accepts digits or the spelled numbers one through ten, inside or right
    after the span. A bare "first" means a single row. Raises NoNumber when
    no count is recoverable.
    """
    start, end = trigger_span
    segment = question[start:end]
    m = re.search(rf"\b({_NUMBER_ALT})\b", segment, re.IGNORECASE)
    if m is None:
        m = re.match(rf"\s*({_NUMBER_ALT})\b", question[end:], re.IGNORECASE)
    if m is not None:
        return _parse_number(m.group(1))
    first_word = re.match(r"\W*(\w+)", segment)
    if first_word and first_word.group(1).lower() == "first":
        return 1
    raise NoNumber(f"no count near top-k trigger {segment!r}")


@dataclass(frozen=True)
class _Match:
    start: int
    end: int
    kind: ConstraintKind
    param: object
    text: str

    def contains(self, other: "_Match") -> bool:
        return (
            self.start <= other.start
            and other.end <= self.end
            and (self.end - self.start) > (other.end - other.start)
        )


def _sentence_spans(text: str) -> list[tuple[int, int]]:
    return [(m.start(), m.end()) for m in _SENTENCE_RE.finditer(text)]


def _matches_for_text(text: str, include_years: bool) -> list[_Match]:
    matches: list[_Match] = []

    for word, pattern in _TOPK_RE.items():
        for m in pattern.finditer(text):
            n = _parse_number(m.group(1))
            if _is_year(n, m.group(1)):
                continue  # "top 2023" reads as a year, not a row count
            matches.append(_Match(m.start(), m.end(), ConstraintKind.TOP_K, n, m.group(0)))

    for kind, _phrase, pattern in _SIMPLE_RULES:
        for m in pattern.finditer(text):
            matches.append(_Match(m.start(), m.end(), kind, None, m.group(0)))

    for word, pattern in _EXTREME_RES.items():
        for m in pattern.finditer(text):
            matches.append(_Match(m.start(), m.end(), ConstraintKind.EXTREME, _EXTREME_DIRECTION[word], m.group(0)))
    for word, pattern in _BARE_TOPK_RES.items():
        for m in pattern.finditer(text):
            matches.append(_Match(m.start(), m.end(), ConstraintKind.EXTREME, _BARE_TOPK_DIRECTION[word], m.group(0)))

    for phrase, pattern in _TEMPORAL_RES.items():
        for m in pattern.finditer(text):
            matches.append(_Match(m.start(), m.end(), ConstraintKind.TEMPORAL, _TEMPORAL_DIRECTION[phrase], m.group(0)))

    for phrase, pattern in _COMPARE_RES.items():
        for m in pattern.finditer(text):
            matches.append(_Match(m.start(), m.end(), ConstraintKind.COMPARE, _COMPARE_OPERATOR[phrase], m.group(0)))

    if include_years:
        for m in _YEAR_RE.finditer(text):
            matches.append(_Match(m.start(), m.end(), ConstraintKind.LITERAL, m.group(0), m.group(0)))

    # longest span wins over anything strictly inside it
    kept = [m for m in matches if not any(o.contains(m) for o in matches)]

    # temporal rules additionally require time context in the same sentence
    sentences = _sentence_spans(text)
    gated = []
    for m in kept:
        if m.kind is ConstraintKind.TEMPORAL:
            in_context = False
            for s_start, s_end in sentences:
                if s_start <= m.start < s_end:
                    in_context = _TIME_CONTEXT_RE.search(text, s_start, s_end) is not None
                    break
            if not in_context:
                continue
        gated.append(m)
    return gated


def extract_constraints(question: str, evidence: str = "") -> set[Constraint]:
    """Extract the deduplicated constraint set for a question.

    Deterministic; an unmatchable question yields the empty set. Duplicate
    (kind, param) hits keep all distinct trigger texts, joined with '; '.
    """
    matches: list[_Match] = []
    matches.extend(_matches_for_text(question, include_years=True))
    if evidence:
        matches.extend(_matches_for_text(evidence, include_years=False))

    merged: dict[tuple, list[str]] = {}
    for m in matches:
        key = (m.kind, m.param)
        triggers = merged.setdefault(key, [])
        if m.text not in triggers:
            triggers.append(m.text)

    return {
        Constraint(kind=kind, param=param, trigger="; ".join(triggers))
        for (kind, param), triggers in merged.items()
    }


def literal_constraints_from_mappings(value_mappings: dict[str, str]) -> set[Constraint]:
    """Literal-presence constraints for database values discovered by probing."""
    out = set()
    for term, value in value_mappings.items():
        if isinstance(value, str) and value.strip():
            out.add(Constraint(kind=ConstraintKind.LITERAL, param=value, trigger=term))
    return out
