"""Domain concepts, per-concept modifier schemas, inference rules and conversion tables.

The knowledge base is loaded from a TOML document::

    [concepts]
    Price = "monetary amount"

    [modifiers.Price.Country]
    kind = "static"
    terms = ["France", "UK"]                       # term == value

    [modifiers.Price.VATIncluded]
    kind = "static"
    terms = { VATincluded = true, VATnotincluded = false }

    [modifiers.Price.ScaleFactor]
    kind = "static"
    terms = "scale_factors"                        # borrow a top-level table

    [modifiers.Price.VATRate]
    kind = "dynamic"
    table = "rates.vat"                            # one rule per country, generated

    [[rules]]
    concept = "Price"
    when = { Country = "France" }
    then = { Currency = "EUR" }

    [rates.currency]
    GBP-EUR = "1.09755"

    [rates.vat]
    France = 19.6
"""
from __future__ import annotations

from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from pathlib import Path
from typing import Any, Mapping

import tomli

from .context import Context, Kind, Modifier, ModifierValue
from .descriptor import ContextAnnotation
from .errors import (
    AnnotationError,
    ConsistencyError,
    IncompleteContext,
    MissingRate,
    ParseError,
    UnknownConcept,
    UnknownTerm,
)

DATE_PATTERNS = ("DD/MM/YYYY", "MM/DD/YYYY", "YYYY/MM/DD")
RECIPROCITY_TOLERANCE = Decimal("1e-9")


@dataclass(frozen=True)
class Concept:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class ModifierSchema:
    concept: str
    modifier_name: str
    kind: Kind
    # annotation term -> modifier value; empty for numeric/open domains
    terms: Mapping[str, ModifierValue] = field(default_factory=dict)


@dataclass(frozen=True)
class InferenceRule:
    concept: str
    premises: frozenset[tuple[str, ModifierValue]]
    conclusion: tuple[str, ModifierValue]

    def fires(self, statics: Mapping[str, ModifierValue]) -> bool:
        return all(name in statics and statics[name] == value for name, value in self.premises)


@dataclass(frozen=True)
class KnowledgeBase:
    domain: tuple[Concept, ...]
    schemas: tuple[ModifierSchema, ...]
    rules: tuple[InferenceRule, ...]
    currency_rates: Mapping[tuple[str, str], Decimal]
    vat_rates: Mapping[str, Decimal]
    scale_factors: Mapping[str, int]
    date_formats: Mapping[str, str]

    def concept(self, name: str) -> Concept:
        for c in self.domain:
            if c.name == name:
                return c
        raise UnknownConcept(f"concept {name!r} is not in the domain ontology")

    def schemas_for(self, concept: str) -> list[ModifierSchema]:
        return [s for s in self.schemas if s.concept == concept]

    def schema(self, concept: str, modifier_name: str) -> ModifierSchema:
        for s in self.schemas_for(concept):
            if s.modifier_name == modifier_name:
                return s
        raise KeyError((concept, modifier_name))

    def rate(self, src: str, tgt: str) -> Decimal:
        if src == tgt:
            return Decimal(1)
        try:
            return self.currency_rates[(src, tgt)]
        except KeyError:
            raise MissingRate(f"no exchange rate from {src} to {tgt}") from None

    def currencies(self) -> list[str]:
        return sorted({c for pair in self.currency_rates for c in pair})


def _decimal(value: Any, what: str) -> Decimal:
    if isinstance(value, bool):
        raise ParseError(f"{what}: expected a number, got {value!r}")
    try:
        return Decimal(str(value))
    except InvalidOperation:
        raise ParseError(f"{what}: not a decimal number: {value!r}") from None


def _scalar(value: Any) -> ModifierValue:
    if isinstance(value, float):
        return Decimal(str(value))
    if isinstance(value, (str, bool, int)):
        return value
    raise ParseError(f"unsupported modifier value {value!r}")


def _load_currency_rates(table: Mapping[str, Any]) -> dict[tuple[str, str], Decimal]:
    given: dict[tuple[str, str], Decimal] = {}
    for key, value in table.items():
        src, sep, tgt = key.partition("-")
        if not sep or not src or not tgt:
            raise ParseError(f"currency rate key must look like FROM-TO, got {key!r}")
        rate = _decimal(value, f"rates.currency.{key}")
        if rate <= 0:
            raise ConsistencyError(f"exchange rate {key} must be positive, got {rate}")
        if src == tgt and rate != 1:
            raise ConsistencyError(f"identity rate {key} must be 1")
        given[(src, tgt)] = rate
    rates = dict(given)
    for (src, tgt), rate in given.items():
        reverse = given.get((tgt, src))
        if reverse is None:
            rates[(tgt, src)] = Decimal(1) / rate
        elif abs(rate * reverse - 1) > RECIPROCITY_TOLERANCE:
            raise ConsistencyError(f"rates {src}-{tgt} and {tgt}-{src} are not reciprocal")
    for cur in {c for pair in rates for c in pair}:
        rates[(cur, cur)] = Decimal(1)
    return rates


def _terms_for(entry: Any, doc: Mapping[str, Any], where: str) -> dict[str, ModifierValue]:
    if entry is None:
        return {}
    if isinstance(entry, str):
        if entry not in doc or not isinstance(doc[entry], dict):
            raise ParseError(f"{where}: terms refer to missing table {entry!r}")
        entry = doc[entry]
    if isinstance(entry, list):
        return {str(t): str(t) for t in entry}
    if isinstance(entry, dict):
        return {str(k): _scalar(v) for k, v in entry.items()}
    raise ParseError(f"{where}: terms must be a list, table or table name")


def _lookup_table(doc: Mapping[str, Any], dotted: str, where: str) -> Mapping[str, Any]:
    node: Any = doc
    for key in dotted.split("."):
        if not isinstance(node, dict) or key not in node:
            raise ParseError(f"{where}: missing table {dotted!r}")
        node = node[key]
    return node


def parse_knowledge_base(doc: Mapping[str, Any]) -> KnowledgeBase:
    """Build a knowledge base from an already-decoded TOML mapping."""
    concepts_node = doc.get("concepts")
    if isinstance(concepts_node, dict):
        names = list(concepts_node)
    elif isinstance(concepts_node, list):
        names = [str(n) for n in concepts_node]
    else:
        raise ParseError("knowledge base needs a [concepts] table")
    if len(set(names)) != len(names):
        raise ConsistencyError("duplicate concept names")
    domain = tuple(Concept(n) for n in names)

    rates = doc.get("rates", {})
    currency_rates = _load_currency_rates(rates.get("currency", {}))
    vat_rates = {}
    for country, pct in rates.get("vat", {}).items():
        vat = _decimal(pct, f"rates.vat.{country}")
        if vat < 0:
            raise ConsistencyError(f"VAT rate for {country} is negative")
        vat_rates[country] = vat

    scale_factors = {}
    for term, factor in doc.get("scale_factors", {}).items():
        if isinstance(factor, bool) or not isinstance(factor, int) or factor <= 0:
            raise ConsistencyError(f"scale factor {term} must be a positive integer")
        scale_factors[term] = factor

    date_formats = {}
    for term, pattern in doc.get("date_formats", {}).items():
        if pattern not in DATE_PATTERNS:
            raise ConsistencyError(f"date format {term}={pattern!r} is not one of {DATE_PATTERNS}")
        date_formats[term] = pattern

    schemas: list[ModifierSchema] = []
    rules: list[InferenceRule] = []
    for concept, mods in doc.get("modifiers", {}).items():
        if concept not in names:
            raise UnknownConcept(f"modifiers declared for unknown concept {concept!r}")
        for mod_name, entry in mods.items():
            where = f"modifiers.{concept}.{mod_name}"
            try:
                kind = Kind(entry.get("kind"))
            except ValueError:
                raise ParseError(f"{where}: kind must be 'static' or 'dynamic'") from None
            schemas.append(ModifierSchema(concept, mod_name, kind, _terms_for(entry.get("terms"), doc, where)))
            table = entry.get("table")
            if table is not None:
                if kind is not Kind.DYNAMIC:
                    raise ConsistencyError(f"{where}: only dynamic modifiers can be derived from a table")
                key = entry.get("key", "Country")
                for k, v in _lookup_table(doc, table, where).items():
                    value = _decimal(v, f"{table}.{k}") if table == "rates.vat" else _scalar(v)
                    rules.append(InferenceRule(concept, frozenset({(key, k)}), (mod_name, value)))

    for i, entry in enumerate(doc.get("rules", [])):
        where = f"rules[{i}]"
        try:
            concept, when, then = entry["concept"], entry["when"], entry["then"]
        except (KeyError, TypeError):
            raise ParseError(f"{where}: needs concept, when and then") from None
        if not isinstance(then, dict) or len(then) != 1 or not isinstance(when, dict):
            raise ParseError(f"{where}: 'then' must hold exactly one modifier")
        (name, value), = then.items()
        value = _scalar(value)
        if isinstance(value, str) and value in date_formats:
            value = date_formats[value]
        premises = frozenset((k, _scalar(v)) for k, v in when.items())
        rules.append(InferenceRule(concept, premises, (name, value)))

    kb = KnowledgeBase(
        domain=domain,
        schemas=tuple(schemas),
        rules=tuple(rules),
        currency_rates=currency_rates,
        vat_rates=vat_rates,
        scale_factors=scale_factors,
        date_formats=date_formats,
    )
    _check(kb)
    return kb


def _check(kb: KnowledgeBase) -> None:
    seen = set()
    for s in kb.schemas:
        key = (s.concept, s.modifier_name)
        if key in seen:
            raise ConsistencyError(f"duplicate modifier schema {key}")
        seen.add(key)
    for c in kb.domain:
        owner: dict[str, str] = {}
        for s in kb.schemas_for(c.name):
            if s.kind is not Kind.STATIC:
                continue
            for term in s.terms:
                if term in owner:
                    raise ConsistencyError(
                        f"term {term!r} is ambiguous for {c.name}: {owner[term]} and {s.modifier_name}"
                    )
                owner[term] = s.modifier_name

    conclusions: dict[tuple[str, frozenset, str], ModifierValue] = {}
    for r in kb.rules:
        kb.concept(r.concept)
        name, value = r.conclusion
        try:
            target = kb.schema(r.concept, name)
        except KeyError:
            raise ConsistencyError(f"rule concludes undeclared modifier {r.concept}.{name}") from None
        if target.kind is not Kind.DYNAMIC:
            raise ConsistencyError(f"rule conclusion {r.concept}.{name} must be a dynamic modifier")
        for p_name, _ in r.premises:
            try:
                premise = kb.schema(r.concept, p_name)
            except KeyError:
                raise ConsistencyError(f"rule premise {r.concept}.{p_name} is undeclared") from None
            if premise.kind is not Kind.STATIC:
                raise ConsistencyError(f"rule premise {r.concept}.{p_name} must be static")
        key = (r.concept, r.premises, name)
        if key in conclusions and conclusions[key] != value:
            raise ConsistencyError(
                f"conflicting rules for {r.concept}.{name} under {sorted(r.premises)}: "
                f"{conclusions[key]!r} vs {value!r}"
            )
        conclusions[key] = value

    for s in kb.schemas:
        if s.kind is Kind.DYNAMIC and not any(
            r.concept == s.concept and r.conclusion[0] == s.modifier_name for r in kb.rules
        ):
            raise ConsistencyError(f"dynamic modifier {s.concept}.{s.modifier_name} has no inference rule")


def load_knowledge_base(text: str) -> KnowledgeBase:
    try:
        doc = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ParseError(f"malformed knowledge base: {exc}") from None
    return parse_knowledge_base(doc)


def load_knowledge_base_file(path: str | Path) -> KnowledgeBase:
    return load_knowledge_base(Path(path).read_text(encoding="utf-8"))


def resolve_concept(kb: KnowledgeBase, ann: ContextAnnotation) -> Concept:
    return kb.concept(ann.concept_name)


def resolve_static_modifiers(kb: KnowledgeBase, ann: ContextAnnotation) -> list[Modifier]:
    concept = resolve_concept(kb, ann).name
    statics = [s for s in kb.schemas_for(concept) if s.kind is Kind.STATIC]
    out: list[Modifier] = []
    for term in ann.term_names:
        for s in statics:
            if term in s.terms:
                if any(m.name == s.modifier_name for m in out):
                    raise AnnotationError(f"{concept} annotation sets {s.modifier_name} twice")
                out.append(Modifier(s.modifier_name, s.terms[term], Kind.STATIC))
                break
        else:
            raise UnknownTerm(f"term {term!r} matches no {concept} modifier value")
    return out


def infer_dynamic_modifiers(kb: KnowledgeBase, concept: Concept, statics: list[Modifier]) -> list[Modifier]:
    known = {m.name: m.value for m in statics}
    out = []
    for s in kb.schemas_for(concept.name):
        if s.kind is not Kind.DYNAMIC:
            continue
        values = {
            r.conclusion[1]
            for r in kb.rules
            if r.concept == concept.name and r.conclusion[0] == s.modifier_name and r.fires(known)
        }
        if not values:
            raise IncompleteContext(
                f"no rule infers {concept.name}.{s.modifier_name} from "
                + ", ".join(str(m) for m in statics)
            )
        if len(values) > 1:
            raise ConsistencyError(f"rules disagree on {concept.name}.{s.modifier_name}: {sorted(map(str, values))}")
        out.append(Modifier(s.modifier_name, values.pop(), Kind.DYNAMIC))
    return out


def full_context(kb: KnowledgeBase, ann: ContextAnnotation) -> Context:
    """Statics from the annotation plus every inferred dynamic modifier."""
    concept = resolve_concept(kb, ann)
    statics = resolve_static_modifiers(kb, ann)
    return Context.of(concept.name, statics + infer_dynamic_modifiers(kb, concept, statics))


def static_context(kb: KnowledgeBase, ann: ContextAnnotation) -> Context:
    concept = resolve_concept(kb, ann)
    return Context.of(concept.name, resolve_static_modifiers(kb, ann))
