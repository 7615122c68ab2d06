"""Parsing and formatting of exact rationals and reals for text I/O."""

from __future__ import annotations

import re
from fractions import Fraction

import mpmath

_RATIONAL_RE = re.compile(r"^[+-]?(\d+(/\d+)?|\d*\.\d+([eE][+-]?\d+)?|\d+\.?([eE][+-]?\d+)?)$")


class ParseError(ValueError):
    """Malformed text input. ``where`` carries a human-readable location."""

    def __init__(self, message: str, where: str | None = None):
        self.where = where
        super().__init__(f"{where}: {message}" if where else message)


def parse_rational(text: str, where: str | None = None) -> Fraction:
    """Parse ``p/q`` or a decimal literal into an exact Fraction."""
    s = text.strip()
    if not _RATIONAL_RE.match(s):
        raise ParseError(f"malformed rational {text!r}", where)
    try:
        value = Fraction(s)
    except (ValueError, ZeroDivisionError) as exc:
        raise ParseError(f"malformed rational {text!r} ({exc})", where) from None
    return value


def as_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        return parse_rational(x)
    if isinstance(x, float):
        # floats are taken at their exact binary value
        return Fraction(x)
    raise TypeError(f"cannot convert {type(x).__name__} to an exact rational")


def fmt_rational(x: Fraction | int) -> str:
    x = Fraction(x)
    if x.denominator == 1:
        return str(x.numerator)
    return f"{x.numerator}/{x.denominator}"


def fmt_real(x) -> str:
    """Reals are written with 17 significant digits."""
    return f"{float(x):.17g}"


def fmt_value(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (Fraction, int)):
        return fmt_rational(x)
    if isinstance(x, (float, mpmath.mpf)):
        return fmt_real(x)
    return str(x)
