"""Modifiers and contexts: the value layer shared by ontology, objects and mediation."""
from __future__ import annotations

from dataclasses import dataclass
from decimal import Decimal
from enum import Enum
from typing import Iterable, Iterator, Union

from .errors import ConceptMismatch

ModifierValue = Union[str, bool, int, Decimal]


class Kind(str, Enum):
    STATIC = "static"
    DYNAMIC = "dynamic"


@dataclass(frozen=True)
class Modifier:
    name: str
    value: ModifierValue
    kind: Kind = Kind.STATIC

    def __str__(self) -> str:
        return f"{self.name}={format_value(self.value)}"


def format_value(value: ModifierValue) -> str:
    if isinstance(value, Decimal):
        return format(value.normalize(), "f") if value == value.to_integral() else str(value)
    return str(value)


@dataclass(frozen=True)
class Context:
    """Modifiers attached to one domain concept, kept sorted by modifier name."""

    concept: str
    modifiers: tuple[Modifier, ...] = ()

    def __post_init__(self) -> None:
        ordered = tuple(sorted(self.modifiers, key=lambda m: m.name))
        names = [m.name for m in ordered]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate modifier names in context: {names}")
        object.__setattr__(self, "modifiers", ordered)

    @classmethod
    def of(cls, concept: str, modifiers: Iterable[Modifier]) -> Context:
        return cls(concept, tuple(modifiers))

    def __getitem__(self, name: str) -> ModifierValue:
        for m in self.modifiers:
            if m.name == name:
                return m.value
        raise KeyError(name)

    def get(self, name: str, default=None):
        try:
            return self[name]
        except KeyError:
            return default

    def __contains__(self, name: object) -> bool:
        return any(m.name == name for m in self.modifiers)

    def __iter__(self) -> Iterator[Modifier]:
        return iter(self.modifiers)

    def names(self) -> tuple[str, ...]:
        return tuple(m.name for m in self.modifiers)

    def statics(self) -> Context:
        return Context(self.concept, tuple(m for m in self.modifiers if m.kind is Kind.STATIC))

    def items(self) -> frozenset[tuple[str, ModifierValue]]:
        return frozenset((m.name, m.value) for m in self.modifiers)

    def differing(self, other: Context) -> list[str]:
        """Modifier names whose values differ (or are missing on one side), sorted."""
        check_same_concept(self, other)
        names = sorted(set(self.names()) | set(other.names()))
        return [n for n in names if self.get(n, _MISSING) != other.get(n, _MISSING)]

    def __str__(self) -> str:
        return "{" + ", ".join(str(m) for m in self.modifiers) + "}"


_MISSING = object()


def check_same_concept(a: Context, b: Context) -> None:
    if a.concept != b.concept:
        raise ConceptMismatch(f"cannot compare a {a.concept} context with a {b.concept} context")


def context_equal(a: Context, b: Context) -> bool:
    check_same_concept(a, b)
    return a.items() == b.items()
