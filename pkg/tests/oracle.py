"""Independent price oracle: exact rational arithmetic through a EUR pivot.

It deliberately ignores the knowledge base's direct cross rates and
rounding code and uses the fixture's EUR rates only.
"""
from fractions import Fraction
from decimal import Decimal, ROUND_HALF_UP

EUR_PER_UNIT = {"EUR": Fraction(1), "GBP": Fraction("1.09755"), "JPY": Fraction("0.0095"), "USD": Fraction("0.8")}

# Country -> (currency, VAT %)
COUNTRY = {
    "France": ("EUR", Fraction("19.6")),
    "Japan": ("JPY", Fraction("9.3")),
    "UK": ("GBP", Fraction("17.5")),
    "USA": ("USD", Fraction(0)),
}


def net_eur(value, country, vat_included, scale):
    currency, vat = COUNTRY[country]
    amount = Fraction(str(value)) * scale
    if vat_included:
        amount /= 1 + vat / 100
    return amount * EUR_PER_UNIT[currency]


def from_net_eur(net, country, vat_included, scale):
    currency, vat = COUNTRY[country]
    amount = net / EUR_PER_UNIT[currency]
    if vat_included:
        amount *= 1 + vat / 100
    return amount / scale


def price(value, src, tgt):
    """``src``/``tgt`` are (country, vat_included, scale) triples; returns an exact Fraction."""
    return from_net_eur(net_eur(value, *src), *tgt)


def round2(x: Fraction) -> Decimal:
    return (Decimal(x.numerator) / Decimal(x.denominator)).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP)
