"""Vector-valued absolutely convergent Fourier series on the circle.

An element stores finitely many explicit coefficients plus an optional
closed-form tail for frequencies beyond a cutoff.  The best approximation
error by trigonometric polynomials of degree <= i in the l1-of-coefficients
norm is the exact tail sum over |n| > i, so every E_i here is a finite
computation.  Rational inputs stay rational.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from ._numbers import Number, csv_rows, dump_number, exact_sum, is_exact, normalize, parse_number


class UncertifiedTail(ValueError):
    """Infinite support without a closed-form tail sum."""


class Norm(Enum):
    L1 = "L1"
    L2 = "L2"
    LINF = "Linf"

    @property
    def dual(self) -> "Norm":
        return {Norm.L1: Norm.LINF, Norm.LINF: Norm.L1, Norm.L2: Norm.L2}[self]


def vector_norm(v: Sequence[Number], norm: Norm) -> Number:
    """Norm of a coefficient vector; exact for L1/Linf or one-dimensional data."""
    if len(v) == 1:
        return abs(v[0])
    if norm is Norm.L1:
        return exact_sum(abs(x) for x in v)
    if norm is Norm.LINF:
        return max(abs(x) for x in v)
    return math.sqrt(math.fsum(float(x) ** 2 for x in v))


def _scale_vector(v: Sequence[Number], s: Number) -> tuple:
    return tuple(normalize(s * x) if is_exact(s) and is_exact(x) else float(s) * float(x) for x in v)


# ---------------------------------------------------------------------------
# tails


class CoefficientTail:
    """Coefficients magnitude(n) * direction for cutoff < |n| (both signs if two_sided)."""

    kind = "abstract"

    def __init__(self, cutoff: int, direction: Sequence[Number], two_sided: bool = False):
        if cutoff < 0:
            raise ValueError("cutoff must be nonnegative")
        self.cutoff = int(cutoff)
        self.direction = tuple(direction)
        self.two_sided = two_sided

    @property
    def sides(self) -> int:
        return 2 if self.two_sided else 1

    def magnitude(self, n: int) -> Number:
        raise NotImplementedError

    def one_sided_mass(self, i: int) -> Number:
        """sum of magnitude(n) over n > i, for i >= cutoff."""
        raise NotImplementedError

    def coefficient(self, n: int) -> tuple:
        if abs(n) <= self.cutoff or (n < 0 and not self.two_sided):
            return tuple(0 for _ in self.direction)
        return _scale_vector(self.direction, self.magnitude(abs(n)))

    def mass_beyond(self, i: int, norm: Norm) -> Number:
        """sum over |n| > i of the coefficient norms."""
        m = self.one_sided_mass(max(i, self.cutoff))
        scale = vector_norm(self.direction, norm) * self.sides
        if is_exact(m) and is_exact(scale):
            return normalize(Fraction(m) * scale)
        return float(m) * float(scale)

    def with_direction(self, direction: Sequence[Number]) -> "CoefficientTail":
        clone = object.__new__(type(self))
        clone.__dict__.update(self.__dict__)
        clone.direction = tuple(direction)
        return clone

    def params(self) -> dict:
        return {}

    def to_dict(self) -> dict:
        return {"kind": self.kind, "cutoff": self.cutoff,
                "direction": [dump_number(x) for x in self.direction],
                "two_sided": self.two_sided, "params": self.params()}


class GeometricCoefficientTail(CoefficientTail):
    """magnitude(n) = first * ratio^(n - cutoff - 1)."""

    kind = "geometric"

    def __init__(self, cutoff: int, first: Number, ratio: Number, direction=(1,),
                 two_sided: bool = False):
        if not (0 <= ratio < 1) or first < 0:
            raise ValueError("need first >= 0 and 0 <= ratio < 1")
        super().__init__(cutoff, direction, two_sided)
        self.first, self.ratio = first, ratio

    def magnitude(self, n):
        k = n - self.cutoff - 1
        if is_exact(self.first) and is_exact(self.ratio):
            return normalize(Fraction(self.first) * Fraction(self.ratio) ** k)
        return float(self.first) * float(self.ratio) ** k

    def one_sided_mass(self, i):
        k = i - self.cutoff
        if is_exact(self.first) and is_exact(self.ratio):
            q = Fraction(self.ratio)
            return normalize(Fraction(self.first) * q**k / (1 - q))
        return float(self.first) * float(self.ratio) ** k / (1 - float(self.ratio))

    def params(self):
        return {"first": dump_number(self.first), "ratio": dump_number(self.ratio)}


class RateCoefficientTail(CoefficientTail):
    """magnitude(n) = rate(n); the rate must carry a closed tail sum."""

    kind = "rate"

    def __init__(self, cutoff: int, rate, direction=(1,), two_sided: bool = False):
        if not rate.has_closed_tail:
            raise UncertifiedTail(f"{rate.kind} rate has no closed tail sum")
        super().__init__(cutoff, direction, two_sided)
        self.rate = rate

    def magnitude(self, n):
        v = self.rate.exact(n)
        return normalize(v) if v is not None else self.rate(n)

    def one_sided_mass(self, i):
        exact_tail = getattr(self.rate, "exact_tail", None)
        v = exact_tail(i + 1) if exact_tail else None
        return normalize(v) if v is not None else self.rate.closed_tail(i + 1)

    def params(self):
        return {"rate": self.rate.to_dict()}


class TelescopingTail(CoefficientTail):
    """magnitude(n) = c_{n-1} - c_n for an error sequence c (c_0 := c_1).

    The tail sum over n > i is c_i, because c_n -> 0.
    """

    kind = "telescoping"

    def __init__(self, cutoff: int, sequence, direction=(1,)):
        super().__init__(cutoff, direction, False)
        self.sequence = sequence

    def _c(self, n: int) -> Number:
        return self.sequence.value(max(n, 1))

    def magnitude(self, n):
        a, b = self._c(n - 1), self._c(n)
        return normalize(a - b) if is_exact(a) and is_exact(b) else float(a) - float(b)

    def one_sided_mass(self, i):
        return self._c(i)

    def params(self):
        return {"sequence": self.sequence.to_dict()}


class MaskedTail(CoefficientTail):
    """A base tail restricted to a union of frequency bands lo <= |n| < hi."""

    kind = "masked"

    def __init__(self, base: CoefficientTail, bands: Sequence[tuple[int, float]]):
        super().__init__(base.cutoff, base.direction, base.two_sided)
        self.base = base
        self.bands = tuple((int(lo), hi) for lo, hi in bands)

    def _owned(self, n: int) -> bool:
        return any(lo <= n < hi for lo, hi in self.bands)

    def magnitude(self, n):
        return self.base.magnitude(n) if self._owned(n) else 0

    def one_sided_mass(self, i):
        parts = []
        for lo, hi in self.bands:
            lo_eff = max(lo, i + 1, self.cutoff + 1)
            if hi != math.inf and lo_eff >= hi:
                continue
            upper = self.base.one_sided_mass(lo_eff - 1)
            lower = 0 if hi == math.inf else self.base.one_sided_mass(int(hi) - 1)
            parts.append(upper - lower)
        return exact_sum(parts) if parts else 0

    def params(self):
        return {"base": self.base.to_dict(),
                "bands": [[lo, None if hi == math.inf else int(hi)] for lo, hi in self.bands]}


def tail_from_dict(d: dict) -> CoefficientTail:
    kind, p = d["kind"], d.get("params", {})
    direction = [parse_number(x) for x in d.get("direction", [1])]
    cutoff, two = int(d["cutoff"]), bool(d.get("two_sided", False))
    if kind == "geometric":
        return GeometricCoefficientTail(cutoff, parse_number(p["first"]), parse_number(p["ratio"]),
                                        direction, two)
    if kind == "rate":
        from .rates import rate_from_dict
        return RateCoefficientTail(cutoff, rate_from_dict(p["rate"]), direction, two)
    if kind == "telescoping":
        from .error_sequences import ErrorSeq
        return TelescopingTail(cutoff, ErrorSeq.from_dict(p["sequence"]), direction)
    if kind == "masked":
        bands = [(lo, math.inf if hi is None else hi) for lo, hi in p["bands"]]
        return MaskedTail(tail_from_dict(p["base"]), bands).with_direction(direction)
    raise ValueError(f"unknown tail kind {kind!r}")


# ---------------------------------------------------------------------------
# elements


@dataclass(frozen=True)
class WienerElement:
    """Coefficients n -> vector in R^d, measured in ``target_norm``."""

    coefficients: Mapping[int, tuple]
    dimension: int = 1
    target_norm: Norm = Norm.L1
    tail: CoefficientTail | None = None

    def __post_init__(self):
        clean = {}
        for n, v in self.coefficients.items():
            v = tuple(v) if isinstance(v, (tuple, list)) else (v,)
            if len(v) != self.dimension:
                raise ValueError(f"coefficient at {n} has dimension {len(v)}, expected {self.dimension}")
            if any(not math.isfinite(float(x)) for x in v):
                raise ValueError("coefficients must be finite")
            if self.tail is not None and abs(int(n)) > self.tail.cutoff:
                raise ValueError("explicit coefficients must lie within the tail cutoff")
            if any(x != 0 for x in v):
                clean[int(n)] = v
        object.__setattr__(self, "coefficients", dict(sorted(clean.items())))
        if self.tail is not None and len(self.tail.direction) != self.dimension:
            raise ValueError("tail direction has the wrong dimension")

    @property
    def finite_support(self) -> bool:
        return self.tail is None

    def coefficient(self, n: int) -> tuple:
        if n in self.coefficients:
            return self.coefficients[n]
        if self.tail is not None:
            return self.tail.coefficient(n)
        return tuple(0 for _ in range(self.dimension))

    def support(self) -> list[int]:
        return list(self.coefficients)

    def degree(self) -> int:
        if self.tail is not None:
            raise UncertifiedTail("infinite support has no degree")
        return max((abs(n) for n in self.coefficients), default=0)

    def truncate(self, i: int) -> "WienerElement":
        """The degree <= i part, which is a best l1 approximant."""
        coeffs = {n: v for n, v in self.coefficients.items() if abs(n) <= i}
        if self.tail is not None:
            for n in range(self.tail.cutoff + 1, i + 1):
                coeffs[n] = self.tail.coefficient(n)
                if self.tail.two_sided:
                    coeffs[-n] = self.tail.coefficient(-n)
        return WienerElement(coeffs, self.dimension, self.target_norm)

    def __add__(self, other: "WienerElement") -> "WienerElement":
        if self.dimension != other.dimension or self.target_norm != other.target_norm:
            raise ValueError("dimension or norm mismatch")
        if self.tail is not None and other.tail is not None:
            raise UncertifiedTail("sum of two infinite tails is not supported")
        tail = self.tail or other.tail
        coeffs = dict(self.coefficients)
        for n, v in other.coefficients.items():
            w = coeffs.get(n, tuple(0 for _ in v))
            coeffs[n] = tuple(normalize(a + b) if is_exact(a) and is_exact(b) else float(a) + float(b)
                              for a, b in zip(w, v))
        if tail is not None:
            for n in [n for n in coeffs if abs(n) > tail.cutoff]:
                raise UncertifiedTail(f"explicit coefficient at {n} overlaps the tail")
        return WienerElement(coeffs, self.dimension, self.target_norm, tail)

    def scaled(self, s: Number) -> "WienerElement":
        coeffs = {n: _scale_vector(v, s) for n, v in self.coefficients.items()}
        tail = None if self.tail is None else self.tail.with_direction(_scale_vector(self.tail.direction, s))
        return WienerElement(coeffs, self.dimension, self.target_norm, tail)

    def __sub__(self, other: "WienerElement") -> "WienerElement":
        return self + other.scaled(-1)

    # serialization --------------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "dimension": self.dimension,
            "norm": self.target_norm.value,
            "coefficients": [[n, [dump_number(x) for x in v]] for n, v in self.coefficients.items()],
            "tail": None if self.tail is None else self.tail.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "WienerElement":
        coeffs = {int(n): tuple(parse_number(x) for x in v) for n, v in d["coefficients"]}
        tail = None if d.get("tail") is None else tail_from_dict(d["tail"])
        return cls(coeffs, int(d["dimension"]), Norm(d.get("norm", "L1")), tail)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "WienerElement":
        return cls.from_dict(json.loads(text))

    def to_csv(self) -> str:
        if self.tail is not None:
            raise UncertifiedTail("CSV holds finitely supported elements only; use JSON")
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["frequency"] + [f"v_{j + 1}" for j in range(self.dimension)])
        for n, v in self.coefficients.items():
            w.writerow([n] + [dump_number(x) for x in v])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, target_norm: Norm = Norm.L1) -> "WienerElement":
        rows = csv_rows(text)
        header, body = rows[0], rows[1:]
        d = len(header) - 1
        coeffs: dict[int, tuple] = {}
        for r in body:
            n = int(r[0])
            if n in coeffs:
                raise ValueError(f"duplicate frequency {n}")
            coeffs[n] = tuple(parse_number(x) for x in r[1:])
        return cls(coeffs, d, target_norm)


def delta(n: int = 0, value: Sequence[Number] = (1,), target_norm: Norm = Norm.L1) -> WienerElement:
    return WienerElement({n: tuple(value)}, len(value), target_norm)


def geometric_element(ratio: Number = Fraction(1, 2), two_sided: bool = True) -> WienerElement:
    """Scalar element with coefficient ratio^|n|."""
    return WienerElement({0: (1,)}, 1, Norm.L1,
                         GeometricCoefficientTail(0, ratio, ratio, (1,), two_sided))


# ---------------------------------------------------------------------------
# operations


def _explicit_norms(f: WienerElement) -> list[tuple[int, Number]]:
    return [(abs(n), vector_norm(v, f.target_norm)) for n, v in f.coefficients.items()]


def wiener_norm(f: WienerElement) -> Number:
    """sum over all n of |f_n|, exact where the data allow."""
    parts = [m for _, m in _explicit_norms(f)]
    if f.tail is not None:
        parts.append(f.tail.mass_beyond(f.tail.cutoff, f.target_norm))
    return normalize(exact_sum(parts)) if parts else 0


def wiener_En(f: WienerElement, i: int) -> Number:
    """E_i(f) = sum over |n| > i of |f_n|."""
    if i < 0:
        raise ValueError("degree must be nonnegative")
    parts = [m for k, m in _explicit_norms(f) if k > i]
    if f.tail is not None:
        parts.append(f.tail.mass_beyond(i, f.target_norm))
    return normalize(exact_sum(parts)) if parts else 0


def wiener_En_profile(f: WienerElement, n_max: int, start: int = 1) -> list[Number]:
    """[E_start(f), ..., E_n_max(f)] with one pass over the explicit support."""
    by_degree: dict[int, list] = {}
    for k, m in _explicit_norms(f):
        by_degree.setdefault(k, []).append(m)
    keys = sorted(by_degree)
    exact = all(is_exact(m) for ms in by_degree.values() for m in ms)
    acc: Number = Fraction(0) if exact else 0.0
    suffix: dict[int, Number] = {}
    for k in reversed(keys):
        acc = acc + (exact_sum(by_degree[k]) if exact else math.fsum(float(m) for m in by_degree[k]))
        suffix[k] = acc
    out = []
    pos = 0
    for i in range(start, n_max + 1):
        while pos < len(keys) and keys[pos] <= i:
            pos += 1
        explicit = suffix[keys[pos]] if pos < len(keys) else 0
        if f.tail is not None:
            t = f.tail.mass_beyond(i, f.target_norm)
            total = explicit + t if is_exact(explicit) and is_exact(t) else float(explicit) + float(t)
        else:
            total = explicit
        out.append(normalize(total) if is_exact(total) else total)
    return out


@dataclass(frozen=True)
class Evaluation:
    value: tuple[complex, ...]
    real: tuple[float, ...]
    remainder_bound: Number
    cutoff: int


def evaluate(f: WienerElement, t: float, cutoff: int) -> Evaluation:
    """Partial sum of f_n e^{int} over |n| <= cutoff with the tail norm as error bound.

    Coefficients are real vectors on the complex exponential basis, so a
    pair f_{-n} = f_n contributes 2 f_n cos(nt).
    """
    if cutoff < 0:
        raise ValueError("cutoff must be nonnegative")
    total = np.zeros(f.dimension, dtype=complex)
    terms = dict(f.coefficients)
    if f.tail is not None:
        for n in range(f.tail.cutoff + 1, cutoff + 1):
            terms[n] = f.tail.coefficient(n)
            if f.tail.two_sided:
                terms[-n] = f.tail.coefficient(-n)
    for n in sorted(terms, key=lambda k: (abs(k), k)):
        if abs(n) <= cutoff:
            total += np.array([float(x) for x in terms[n]]) * complex(math.cos(n * t), math.sin(n * t))
    value = tuple(complex(z) for z in total)
    return Evaluation(value, tuple(z.real for z in value), wiener_En(f, cutoff), cutoff)


def apply_functional(f: WienerElement, functional: Sequence[Number]) -> WienerElement:
    """Pair every coefficient with a linear functional on R^d; E_i shrinks by at most its dual norm."""
    if len(functional) != f.dimension:
        raise ValueError(f"functional has dimension {len(functional)}, element has {f.dimension}")

    def pair(v):
        if all(is_exact(x) for x in v) and all(is_exact(b) for b in functional):
            return (normalize(exact_sum(Fraction(a) * Fraction(b) for a, b in zip(v, functional))),)
        return (math.fsum(float(a) * float(b) for a, b in zip(v, functional)),)

    coeffs = {n: pair(v) for n, v in f.coefficients.items()}
    tail = None if f.tail is None else f.tail.with_direction(pair(f.tail.direction))
    out = WienerElement(coeffs, 1, Norm.L1, tail)
    bound = vector_norm(tuple(functional), f.target_norm.dual)
    checks = sorted({abs(n) for n in f.coefficients} | {0})
    if f.tail is not None:
        checks.append(f.tail.cutoff + 1)
    for i in checks:
        lhs, rhs = float(wiener_En(out, i)), float(bound) * float(wiener_En(f, i))
        assert lhs <= rhs * (1 + 1e-12) + 1e-300, "functional failed to contract E_i"
    return out


def lift(a: WienerElement, direction: Sequence[Number], target_norm: Norm = Norm.L1) -> WienerElement:
    """a (scalar) times a fixed vector b; for unit b every E_i is preserved."""
    if a.dimension != 1:
        raise ValueError("lift takes a scalar element")
    coeffs = {n: _scale_vector(direction, v[0]) for n, v in a.coefficients.items()}
    tail = None
    if a.tail is not None:
        tail = a.tail.with_direction(_scale_vector(direction, a.tail.direction[0]))
    return WienerElement(coeffs, len(direction), target_norm, tail)
