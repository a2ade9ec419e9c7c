"""Context-annotated service descriptors.

A descriptor is a small XML document standing in for an annotated WSDL file.
Only the part-level ``context`` attribute carries semantics::

    <service name="FlightBooking" functionality="FlightBooking">
      <operation name="reserve">
        <input>
          <part name="DepartureDate" type="date-string" context="ctxt1:Date ctxt2:France"/>
        </input>
        <output>
          <part name="Prix_de_ReservationReturn" type="double"
                context="ctxt1:Price ctxt2:France ctxt2:VATincluded ctxt2:ScaleFactorOne"/>
        </output>
      </operation>
    </service>
"""
from __future__ import annotations

import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from xml.sax.saxutils import escape

from .errors import AnnotationError, NotFound, ParseError

CONCEPT_PREFIX = "ctxt1"
MODIFIER_PREFIX = "ctxt2"
LEXICAL_TYPES = ("double", "string", "int", "date-string")

_LOCAL_RE = re.compile(r"[A-Za-z][A-Za-z0-9_]*\Z")


class Direction(str, Enum):
    INPUT = "input"
    OUTPUT = "output"


@dataclass(frozen=True)
class QualifiedTerm:
    prefix: str
    local: str

    def __post_init__(self) -> None:
        if self.prefix not in (CONCEPT_PREFIX, MODIFIER_PREFIX):
            raise AnnotationError(f"unknown prefix {self.prefix!r}")
        if not _LOCAL_RE.match(self.local):
            raise AnnotationError(f"invalid local name {self.local!r}")

    @classmethod
    def parse(cls, token: str) -> QualifiedTerm:
        prefix, sep, local = token.partition(":")
        if not sep:
            raise AnnotationError(f"term {token!r} has no prefix")
        return cls(prefix, local)

    def __str__(self) -> str:
        return f"{self.prefix}:{self.local}"


@dataclass(frozen=True)
class ContextAnnotation:
    concept: QualifiedTerm
    static_terms: tuple[QualifiedTerm, ...] = ()

    def __post_init__(self) -> None:
        if self.concept.prefix != CONCEPT_PREFIX:
            raise AnnotationError(f"concept term must use {CONCEPT_PREFIX}, got {self.concept}")
        seen = set()
        for term in self.static_terms:
            if term.prefix != MODIFIER_PREFIX:
                raise AnnotationError(f"modifier term must use {MODIFIER_PREFIX}, got {term}")
            if term.local in seen:
                raise AnnotationError(f"duplicate modifier term {term}")
            seen.add(term.local)

    @classmethod
    def parse(cls, text: str) -> ContextAnnotation:
        """Parse ``ctxt1:Concept ctxt2:Term ...`` (single-space separated)."""
        if not text:
            raise AnnotationError("empty context annotation")
        terms = []
        for token in text.split(" "):
            if not token:
                raise AnnotationError(f"terms must be separated by exactly one space: {text!r}")
            terms.append(QualifiedTerm.parse(token))
        concepts = [t for t in terms if t.prefix == CONCEPT_PREFIX]
        if len(concepts) != 1:
            raise AnnotationError(f"expected exactly one {CONCEPT_PREFIX} term in {text!r}")
        if terms[0].prefix != CONCEPT_PREFIX:
            raise AnnotationError(f"{CONCEPT_PREFIX} term must come first in {text!r}")
        return cls(terms[0], tuple(terms[1:]))

    @property
    def concept_name(self) -> str:
        return self.concept.local

    @property
    def term_names(self) -> tuple[str, ...]:
        return tuple(t.local for t in self.static_terms)

    def with_terms(self, terms: tuple[QualifiedTerm, ...]) -> ContextAnnotation:
        return replace(self, static_terms=tuple(terms))

    def __str__(self) -> str:
        return " ".join(str(t) for t in (self.concept, *self.static_terms))


@dataclass(frozen=True)
class MessagePart:
    name: str
    lexical_type: str
    annotation: ContextAnnotation
    direction: Direction

    @property
    def concept_name(self) -> str:
        return self.annotation.concept_name


@dataclass(frozen=True)
class Operation:
    name: str
    inputs: tuple[MessagePart, ...] = ()
    outputs: tuple[MessagePart, ...] = ()

    @property
    def parts(self) -> tuple[MessagePart, ...]:
        return self.inputs + self.outputs

    def part(self, name: str, direction: Direction | None = None) -> MessagePart:
        for p in self.parts:
            if p.name == name and (direction is None or p.direction == direction):
                return p
        raise NotFound(f"operation {self.name!r} has no part {name!r}")


@dataclass(frozen=True)
class AnnotatedDescriptor:
    service_name: str
    functionality: str
    operations: tuple[Operation, ...] = field(default=())

    def operation(self, name: str) -> Operation:
        for op in self.operations:
            if op.name == name:
                return op
        raise NotFound(f"service {self.service_name!r} has no operation {name!r}")

    def iter_parts(self):
        for op in self.operations:
            for p in op.parts:
                yield op, p

    def concepts(self) -> list[str]:
        """Concept names used by the parts, in first-appearance order."""
        out: list[str] = []
        for _, p in self.iter_parts():
            if p.concept_name not in out:
                out.append(p.concept_name)
        return out


def _require(elem: ET.Element, attr: str) -> str:
    value = elem.get(attr)
    if value is None or value == "":
        raise ParseError(f"<{elem.tag}> is missing attribute {attr!r}")
    return value


def _parse_part(elem: ET.Element, direction: Direction, op_name: str) -> MessagePart:
    if elem.tag != "part":
        raise ParseError(f"unexpected <{elem.tag}> inside <{direction.value}>")
    if len(elem):
        raise ParseError("<part> must not contain nested elements")
    name = _require(elem, "name")
    lexical_type = _require(elem, "type")
    if lexical_type not in LEXICAL_TYPES:
        raise ParseError(f"part {name!r}: unknown type {lexical_type!r}")
    context = elem.get("context")
    if context is None:
        raise AnnotationError(f"part {name!r} of operation {op_name!r} has no context annotation")
    try:
        annotation = ContextAnnotation.parse(context)
    except AnnotationError as exc:
        raise AnnotationError(f"part {name!r} of operation {op_name!r}: {exc}") from None
    return MessagePart(name, lexical_type, annotation, direction)


def _parse_operation(elem: ET.Element) -> Operation:
    name = _require(elem, "name")
    groups: dict[Direction, list[MessagePart]] = {Direction.INPUT: [], Direction.OUTPUT: []}
    for child in elem:
        try:
            direction = Direction(child.tag)
        except ValueError:
            raise ParseError(f"unexpected <{child.tag}> inside operation {name!r}") from None
        parts = groups[direction]
        for part_elem in child:
            part = _parse_part(part_elem, direction, name)
            if any(p.name == part.name for p in parts):
                raise ParseError(f"duplicate {direction.value} part {part.name!r} in operation {name!r}")
            parts.append(part)
    return Operation(name, tuple(groups[Direction.INPUT]), tuple(groups[Direction.OUTPUT]))


def parse_descriptor(text: str) -> AnnotatedDescriptor:
    try:
        root = ET.fromstring(text)
    except ET.ParseError as exc:
        raise ParseError(f"malformed descriptor: {exc}") from None
    if root.tag != "service":
        raise ParseError(f"root element must be <service>, got <{root.tag}>")
    operations = []
    for child in root:
        if child.tag != "operation":
            raise ParseError(f"unexpected <{child.tag}> inside <service>")
        op = _parse_operation(child)
        if any(o.name == op.name for o in operations):
            raise ParseError(f"duplicate operation {op.name!r}")
        operations.append(op)
    if not operations:
        raise ParseError("a descriptor needs at least one operation")
    return AnnotatedDescriptor(_require(root, "name"), _require(root, "functionality"), tuple(operations))


def load_descriptor(path: str | Path) -> AnnotatedDescriptor:
    return parse_descriptor(Path(path).read_text(encoding="utf-8"))


def _attr(value: str) -> str:
    return '"' + escape(value, {'"': "&quot;"}) + '"'


def serialize_descriptor(d: AnnotatedDescriptor) -> str:
    lines = [f"<service name={_attr(d.service_name)} functionality={_attr(d.functionality)}>"]
    for op in d.operations:
        lines.append(f"  <operation name={_attr(op.name)}>")
        for direction, parts in ((Direction.INPUT, op.inputs), (Direction.OUTPUT, op.outputs)):
            lines.append(f"    <{direction.value}>")
            for p in parts:
                lines.append(
                    f"      <part name={_attr(p.name)} type={_attr(p.lexical_type)}"
                    f" context={_attr(str(p.annotation))}/>"
                )
            lines.append(f"    </{direction.value}>")
        lines.append("  </operation>")
    lines.append("</service>")
    return "\n".join(lines) + "\n"


def context_of_part(d: AnnotatedDescriptor, op_name: str, part_name: str) -> ContextAnnotation:
    return d.operation(op_name).part(part_name).annotation
