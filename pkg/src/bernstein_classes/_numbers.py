"""Exact/float number plumbing shared by the modules.

Values are either exact (``int`` or ``Fraction``) or IEEE doubles.  Exact
values survive JSON round trips as ``"p/q"`` strings.
"""
from __future__ import annotations

import csv
import math
from fractions import Fraction
from numbers import Rational
from typing import Iterable, Union

Number = Union[int, float, Fraction]


def is_exact(x) -> bool:
    return isinstance(x, Rational) and not isinstance(x, bool)


def parse_number(x) -> Number:
    """Inverse of :func:`dump_number`; also accepts plain JSON numbers."""
    if isinstance(x, bool):
        raise TypeError("booleans are not numbers here")
    if isinstance(x, (int, float, Fraction)):
        return x
    if isinstance(x, str):
        s = x.strip()
        if "/" in s:
            return Fraction(s)
        try:
            return int(s)
        except ValueError:
            return float(s)
    raise TypeError(f"cannot parse number from {x!r}")


def dump_number(x: Number):
    if isinstance(x, Fraction):
        return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"
    if isinstance(x, int):
        return x
    return float(x)


def exact_log(x: Number) -> float:
    """Natural log that does not underflow for tiny exact values."""
    if x == 0:
        return -math.inf
    if isinstance(x, Fraction):
        return math.log(x.numerator) - math.log(x.denominator)
    return math.log(x)


def exact_sum(values: Iterable[Number]) -> Number:
    """Exact sum when every term is rational, compensated float sum otherwise."""
    vals = list(values)
    if all(is_exact(v) for v in vals):
        total = Fraction(0)
        for v in vals:
            total += v
        return total.numerator if total.denominator == 1 else total
    return math.fsum(float(v) for v in vals)


def normalize(x: Number) -> Number:
    if isinstance(x, Fraction) and x.denominator == 1:
        return x.numerator
    return x


def csv_rows(text: str) -> list[list[str]]:
    """Nonempty CSV rows, skipping '#' comment lines."""
    lines = [ln for ln in text.splitlines() if not ln.lstrip().startswith("#")]
    return [r for r in csv.reader(lines) if r]
