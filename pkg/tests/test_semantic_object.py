from decimal import Decimal

import pytest

from ctxmed.context import Context, Modifier
from ctxmed.descriptor import ContextAnnotation, Direction, MessagePart
from ctxmed.errors import ConceptMismatch
from ctxmed.ontology import full_context
from ctxmed.semantic_object import build_semantic_object, context_equal


def part(context, type_="double"):
    return MessagePart("p", type_, ContextAnnotation.parse(context), Direction.OUTPUT)


UK_PRICE = part("ctxt1:Price ctxt2:UK ctxt2:VATnotincluded ctxt2:ScaleFactorOne")
FR_PRICE = part("ctxt1:Price ctxt2:France ctxt2:VATincluded ctxt2:ScaleFactorOne")
JP_PRICE = part("ctxt1:Price ctxt2:Japan ctxt2:VATnotincluded ctxt2:ScaleFactorThousand")
US_PRICE = part("ctxt1:Price ctxt2:USA ctxt2:VATnotincluded ctxt2:ScaleFactorOne")
FR_DATE = part("ctxt1:Date ctxt2:France", "date-string")


def test_uk_price_object(kb):
    s = build_semantic_object(kb, UK_PRICE, "1200")
    assert s.concept == "Price"
    assert s.value == Decimal("1200")
    assert s.lexical_type == "double"
    assert {(m.name, m.value) for m in s.context} == {
        ("Country", "UK"),
        ("VATIncluded", False),
        ("ScaleFactor", 1),
        ("Currency", "GBP"),
        ("VATRate", Decimal("17.5")),
    }


def test_france_date_object(kb):
    s = build_semantic_object(kb, FR_DATE, "25/12/2012")
    assert s.value == "25/12/2012"
    assert s.context["DateFormat"] == "DD/MM/YYYY"
    assert s.context["Country"] == "France"


@pytest.mark.parametrize("raw", ["2012/12/25", "31/02/2012", "25-12-2012", "5/12/2012"])
def test_bad_date(kb, raw):
    with pytest.raises(ValueError):
        build_semantic_object(kb, FR_DATE, raw)


@pytest.mark.parametrize("raw", ["abc", "nan", "inf", ""])
def test_bad_double(kb, raw):
    with pytest.raises(ValueError):
        build_semantic_object(kb, UK_PRICE, raw)


def test_price_must_be_double(kb):
    with pytest.raises(ValueError):
        build_semantic_object(kb, part("ctxt1:Price ctxt2:UK ctxt2:VATnotincluded ctxt2:ScaleFactorOne", "string"), "1")


def test_context_equal(kb):
    fr = full_context(kb, FR_PRICE.annotation)
    assert context_equal(fr, full_context(kb, FR_PRICE.annotation))
    assert not context_equal(fr, full_context(kb, JP_PRICE.annotation))


def test_uk_and_usa_differ(kb):
    uk, us = full_context(kb, UK_PRICE.annotation), full_context(kb, US_PRICE.annotation)
    assert not context_equal(uk, us)
    assert uk.differing(us) == ["Country", "Currency", "VATRate"]


def test_context_equal_across_concepts(kb):
    with pytest.raises(ConceptMismatch):
        context_equal(full_context(kb, FR_PRICE.annotation), full_context(kb, FR_DATE.annotation))


def test_equivalence_relation(kb):
    ctxs = [full_context(kb, p.annotation) for p in (UK_PRICE, FR_PRICE, JP_PRICE, US_PRICE, FR_PRICE)]
    for a in ctxs:
        assert context_equal(a, a)
        for b in ctxs:
            assert context_equal(a, b) == context_equal(b, a)
            for c in ctxs:
                if context_equal(a, b) and context_equal(b, c):
                    assert context_equal(a, c)


def test_all_converted_modifiers_present(kb):
    for p in (UK_PRICE, FR_PRICE, JP_PRICE, US_PRICE):
        assert set(full_context(kb, p.annotation).names()) == {
            "Country", "Currency", "ScaleFactor", "VATIncluded", "VATRate"
        }
    assert set(full_context(kb, FR_DATE.annotation).names()) == {"Country", "DateFormat"}


def test_context_rejects_duplicate_names():
    with pytest.raises(ValueError):
        Context("Price", (Modifier("Country", "UK"), Modifier("Country", "France")))
