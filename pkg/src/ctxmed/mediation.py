"""Contextual conversion of semantic objects using the knowledge base's conversion functions."""
from __future__ import annotations

from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from typing import Optional

from .context import Context, ModifierValue, check_same_concept, context_equal, format_value
from .errors import CtxMedError
from .ontology import KnowledgeBase
from .semantic_object import SemanticObject, format_date, parse_date

CENT = Decimal("0.01")


@dataclass(frozen=True)
class ConversionStep:
    modifier: str
    from_value: Optional[ModifierValue]
    to_value: Optional[ModifierValue]

    @property
    def changed(self) -> bool:
        return self.from_value != self.to_value

    def line(self) -> str:
        return f"conversion {self.modifier} : de {_show(self.from_value)} à {_show(self.to_value)}"


def _show(value: Optional[ModifierValue]) -> str:
    return "-" if value is None else format_value(value)


@dataclass(frozen=True)
class ConversionReport:
    """Per-modifier log of one conversion.

    When the contexts differ every modifier of the concept is logged in
    canonical (name) order, unchanged ones included, the way the mediation
    listing shows ``ScaleFactor : de 1 à 1``. Identical contexts log nothing.
    """

    steps: tuple[ConversionStep, ...]
    input: SemanticObject
    output: SemanticObject

    def changed(self) -> list[str]:
        return [s.modifier for s in self.steps if s.changed]

    def lines(self) -> list[str]:
        return [s.line() for s in self.steps]


def needs_mediation(a: Context, b: Context) -> bool:
    return not context_equal(a, b)


def round_money(value: Decimal, places: int = 2) -> Decimal:
    return value.quantize(Decimal(1).scaleb(-places), rounding=ROUND_HALF_UP)


def _vat_factor(ctx: Context) -> Decimal:
    return 1 + Decimal(ctx["VATRate"]) / 100


def convert_price(
    kb: KnowledgeBase, v: Decimal, src: Context, tgt: Context, places: Optional[int] = 2
) -> Decimal:
    """Descale, strip source VAT, change currency, apply target VAT, rescale.

    ``places=None`` skips the final half-up rounding.
    """
    amount = Decimal(v) * src["ScaleFactor"]
    if src["VATIncluded"]:
        amount = amount / _vat_factor(src)
    amount = amount * kb.rate(src["Currency"], tgt["Currency"])
    if tgt["VATIncluded"]:
        amount = amount * _vat_factor(tgt)
    amount = amount / tgt["ScaleFactor"]
    return amount if places is None else round_money(amount, places)


def convert_date(v: str, src_format: str, tgt_format: str) -> str:
    return format_date(parse_date(v, src_format), tgt_format)


def convert(
    kb: KnowledgeBase, src: SemanticObject, target: Context, places: Optional[int] = 2
) -> tuple[SemanticObject, ConversionReport]:
    check_same_concept(src.context, target)
    if context_equal(src.context, target):
        out = SemanticObject(src.concept, src.value, src.lexical_type, target)
        return out, ConversionReport((), src, out)

    names = sorted(set(src.context.names()) | set(target.names()))
    steps = tuple(ConversionStep(n, src.context.get(n), target.get(n)) for n in names)

    if src.concept == "Price":
        value = convert_price(kb, src.value, src.context, target, places)
    elif src.concept == "Date":
        value = convert_date(src.value, src.context["DateFormat"], target["DateFormat"])
    else:
        raise CtxMedError(f"no conversion function for concept {src.concept!r}")
    out = SemanticObject(src.concept, value, src.lexical_type, target)
    return out, ConversionReport(steps, src, out)


def render_value(obj: SemanticObject) -> str:
    if isinstance(obj.value, Decimal):
        return f"{obj.value:f}"
    return str(obj.value)
