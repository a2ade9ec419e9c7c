"""Semantic objects: a raw value bound to a domain concept, a lexical type and a context."""
from __future__ import annotations

import datetime as dt
import re
from dataclasses import dataclass
from decimal import Decimal, InvalidOperation
from typing import Union

from .context import Context, Kind, Modifier, context_equal
from .descriptor import MessagePart
from .ontology import KnowledgeBase, full_context

__all__ = [
    "Context",
    "Kind",
    "Modifier",
    "SemanticObject",
    "build_semantic_object",
    "context_equal",
    "parse_date",
    "format_date",
]

RawValue = Union[Decimal, int, str]

_FIELD_RE = {"DD": r"(?P<day>\d{2})", "MM": r"(?P<month>\d{2})", "YYYY": r"(?P<year>\d{4})"}


def _pattern_regex(pattern: str) -> re.Pattern[str]:
    fields = pattern.split("/")
    if sorted(fields) != ["DD", "MM", "YYYY"]:
        raise ValueError(f"unsupported date pattern {pattern!r}")
    return re.compile("/".join(_FIELD_RE[f] for f in fields) + r"\Z")


def parse_date(text: str, pattern: str) -> dt.date:
    """Read ``text`` laid out as ``pattern`` (e.g. ``DD/MM/YYYY``) into a calendar date."""
    m = _pattern_regex(pattern).match(text)
    if not m:
        raise ValueError(f"{text!r} does not match date format {pattern}")
    try:
        return dt.date(int(m["year"]), int(m["month"]), int(m["day"]))
    except ValueError as exc:
        raise ValueError(f"{text!r} is not a valid calendar date: {exc}") from None


def format_date(day: dt.date, pattern: str) -> str:
    _pattern_regex(pattern)
    return (
        pattern.replace("YYYY", f"{day.year:04d}")
        .replace("MM", f"{day.month:02d}")
        .replace("DD", f"{day.day:02d}")
    )


def parse_raw(raw: str, lexical_type: str, context: Context) -> RawValue:
    if lexical_type == "double":
        try:
            value = Decimal(raw.strip())
        except InvalidOperation:
            raise ValueError(f"{raw!r} is not a double") from None
        if not value.is_finite():
            raise ValueError(f"{raw!r} is not a finite number")
        return value
    if lexical_type == "int":
        try:
            return int(raw.strip())
        except ValueError:
            raise ValueError(f"{raw!r} is not an int") from None
    if lexical_type == "date-string":
        pattern = context.get("DateFormat")
        if pattern is None:
            raise ValueError("date-string value needs a DateFormat modifier in its context")
        parse_date(raw, pattern)
        return raw
    if lexical_type == "string":
        return raw
    raise ValueError(f"unknown lexical type {lexical_type!r}")


@dataclass(frozen=True)
class SemanticObject:
    concept: str
    value: RawValue
    lexical_type: str
    context: Context

    def __post_init__(self) -> None:
        if self.concept != self.context.concept:
            raise ValueError(f"{self.concept} object carries a {self.context.concept} context")
        if self.concept == "Price" and self.lexical_type != "double":
            raise ValueError("Price values must be doubles")
        if self.concept == "Date":
            if self.lexical_type != "date-string":
                raise ValueError("Date values must be date-strings")
            parse_raw(str(self.value), self.lexical_type, self.context)

    def __str__(self) -> str:
        return f"S({self.concept}, {self.value}, {self.lexical_type}, {self.context})"


def build_semantic_object(kb: KnowledgeBase, part: MessagePart, raw: str) -> SemanticObject:
    context = full_context(kb, part.annotation)
    value = parse_raw(raw, part.lexical_type, context)
    return SemanticObject(context.concept, value, part.lexical_type, context)
