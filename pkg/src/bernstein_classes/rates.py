"""Scale functions, weight functions and gauges.

A *scale function* is a positive nonincreasing sequence tending to 0; a
*weight function* is a positive summable sequence.  Both are represented by
:class:`RateFn`.  Decisions about limits and series (does this sum diverge,
are these two scales equivalent) are only made from asymptotic certificates
(:class:`PowerLog`, closed tail sums); everything else is reported as
inconclusive at the horizon.
"""
from __future__ import annotations

import ast
import math
import os
from dataclasses import dataclass, replace
from enum import Enum
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np
from scipy import integrate

from ._numbers import Number, dump_number, is_exact, normalize, parse_number

DEFAULT_HORIZON = 10**6
TOL = 1e-12          # zero test for certificate exponents
XI_TOLERANCE = 1e-14  # rounding slack in ln(m phi(n m))


def default_horizon() -> int:
    env = os.environ.get("BERNSTEIN_HORIZON")
    if env:
        value = int(env)
        if value < 1:
            raise ValueError("BERNSTEIN_HORIZON must be >= 1")
        return value
    return DEFAULT_HORIZON


class HorizonExhausted(RuntimeError):
    """A construction needed indices beyond the configured horizon."""

    def __init__(self, message: str, achieved=None):
        super().__init__(message)
        self.achieved = achieved


class Role(Enum):
    SCALE = "scale"
    WEIGHT = "weight"


def _lex_sign(values: Sequence[float]) -> int:
    for v in values:
        if v > TOL:
            return 1
        if v < -TOL:
            return -1
    return 0


@dataclass(frozen=True)
class PowerLog:
    """Two-sided asymptotic class ``const * exp(-rate n) * n^-a * (ln n)^-b``.

    ``const`` is the limit of value / model when known.  ``rate`` extends the
    polynomial-logarithmic scale by geometric decay (rate > 0) or growth.
    """

    a: float
    b: float = 0.0
    rate: float = 0.0
    const: float | None = None

    def key(self) -> tuple[float, float, float]:
        return (self.rate, self.a, self.b)

    def __mul__(self, other: "PowerLog") -> "PowerLog":
        const = None if self.const is None or other.const is None else self.const * other.const
        return PowerLog(self.a + other.a, self.b + other.b, self.rate + other.rate, const)

    def __truediv__(self, other: "PowerLog") -> "PowerLog":
        const = None if self.const is None or other.const is None else self.const / other.const
        return PowerLog(self.a - other.a, self.b - other.b, self.rate - other.rate, const)

    def power(self, p: float) -> "PowerLog":
        const = None if self.const is None else self.const**p
        return PowerLog(self.a * p, self.b * p, self.rate * p, const)

    def scaled(self, factor: float) -> "PowerLog":
        return replace(self, const=None if self.const is None else self.const * factor)

    def compare(self, other: "PowerLog") -> int:
        """+1 if self decays strictly faster than other, -1 if slower, 0 if comparable."""
        return _lex_sign([x - y for x, y in zip(self.key(), other.key())])

    def tends_to_zero(self) -> bool:
        return _lex_sign(self.key()) > 0

    def bounded(self) -> bool:
        return _lex_sign(self.key()) >= 0

    def summable(self) -> bool:
        if abs(self.rate) > TOL:
            return self.rate > 0
        if abs(self.a - 1) > TOL:
            return self.a > 1
        return self.b > 1 + TOL

    def tail(self) -> "PowerLog":
        """Class of the tail sum; only defined for summable classes."""
        if not self.summable():
            raise ValueError("tail sum of a non-summable class")
        c = self.const
        if self.rate > TOL:
            return PowerLog(self.a, self.b, self.rate,
                            None if c is None else c / (1 - math.exp(-self.rate)))
        if self.a > 1 + TOL:
            return PowerLog(self.a - 1, self.b, 0.0, None if c is None else c / (self.a - 1))
        return PowerLog(0.0, self.b - 1, 0.0, None if c is None else c / (self.b - 1))

    def to_dict(self) -> dict:
        return {"a": self.a, "b": self.b, "rate": self.rate, "const": self.const}

    @classmethod
    def from_dict(cls, d: dict) -> "PowerLog":
        return cls(float(d["a"]), float(d.get("b", 0.0)), float(d.get("rate", 0.0)),
                   None if d.get("const") is None else float(d["const"]))


def _dominant(certs: Sequence[PowerLog | None], slowest: bool) -> PowerLog | None:
    """Class of the pointwise max (slowest=True) or min of the given classes."""
    if not certs or any(c is None for c in certs):
        return None
    best = certs[0]
    for c in certs[1:]:
        cmp = c.compare(best)
        if (slowest and cmp < 0) or (not slowest and cmp > 0):
            best = c
    tied = [c for c in certs if c.compare(best) == 0]
    if any(c.const is None for c in tied):
        return replace(best, const=None)
    pick = max if slowest else min
    return replace(best, const=pick(c.const for c in tied))


def _as_array(n) -> tuple[np.ndarray, bool]:
    scalar = np.ndim(n) == 0
    return np.atleast_1d(np.asarray(n, dtype=float)), scalar


class RateFn:
    """A positive sequence on n >= 1 with a role and optional certificates.

    Subclasses implement ``_values`` and ``_logs`` on float arrays.  The
    public ``__call__`` and ``log`` accept scalars or arrays.
    """

    kind = "abstract"

    def __init__(self, role: Role, asymptotic: PowerLog | None = None, approximate: bool = False):
        self.role = role
        self.asymptotic = asymptotic
        self.approximate = approximate

    # evaluation -----------------------------------------------------------
    def __call__(self, n):
        arr, scalar = _as_array(n)
        out = self._values(arr)
        return float(out[0]) if scalar else out

    def log(self, n):
        arr, scalar = _as_array(n)
        out = self._logs(arr)
        return float(out[0]) if scalar else out

    def _values(self, n: np.ndarray) -> np.ndarray:
        return np.exp(self._logs(n))

    def _logs(self, n: np.ndarray) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(self._values(n))

    def log_at(self, log_n: float) -> float:
        """ln of the continuous extension at argument e^log_n (huge arguments allowed)."""
        if log_n < 700:
            return self.log(math.exp(log_n))
        raise NotImplementedError(f"{self.kind} has no log-argument evaluator")

    def log_theta_at(self, log_n: float) -> float:
        """ln(x * phi(x)) at x = e^log_n; families override to avoid cancellation."""
        return log_n + self.log_at(log_n)

    def exact(self, n: int) -> Fraction | None:
        """Exact rational value, when the family admits one."""
        return None

    # certificates ---------------------------------------------------------
    @property
    def has_closed_tail(self) -> bool:
        return False

    def closed_tail(self, n):
        """Exact formula for sum_{i>=n} value(i)."""
        raise NotImplementedError

    def closed_tail_log(self, n):
        with np.errstate(divide="ignore"):
            return np.log(self.closed_tail(n))

    def tail_integral(self, x: float) -> float | None:
        """Integral of the continuous extension over [x, inf), if available."""
        return None

    # serialization --------------------------------------------------------
    def params(self) -> dict:
        return {}

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "role": self.role.value,
            "params": self.params(),
            "certificate": {
                "powerlog": None if self.asymptotic is None else self.asymptotic.to_dict(),
                "closed_tail": self.has_closed_tail,
                "approximate": self.approximate,
            },
        }

    def with_role(self, role: Role) -> "RateFn":
        clone = object.__new__(type(self))
        clone.__dict__.update(self.__dict__)
        clone.role = role
        validate(clone)
        return clone

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.params()!r}, role={self.role.value})"


# ---------------------------------------------------------------------------
# built-in families


class PowerLogRate(RateFn):
    """c * q^n * (n+shift)^-a * (log_shift + ln(n+shift))^-b."""

    def __init__(self, role: Role = Role.SCALE, *, c: Number = 1, q: Number = 1,
                 a: float = 0.0, b: float = 0.0, shift: Number = 0, log_shift: float = 0.0):
        if not (c > 0):
            raise ValueError("leading constant must be positive")
        if not (0 < q <= 1):
            raise ValueError("geometric base must lie in (0, 1]")
        if 1 + shift <= 0:
            raise ValueError("n + shift must be positive for n >= 1")
        if b != 0 and log_shift + math.log(1 + shift) <= 0:
            raise ValueError("logarithmic factor must be positive for n >= 1")
        self.c, self.q, self.a, self.b = normalize(c), normalize(q), a, b
        self.shift, self.log_shift = normalize(shift), log_shift
        self._lnc = math.log(c)
        self._lnq = math.log(q)
        cert = PowerLog(float(a), float(b), -self._lnq, float(c))
        super().__init__(role, cert)
        validate(self)

    @property
    def kind(self) -> str:
        if self.b == 0 and self.q == 1:
            return "power"
        if self.a == 0 and self.b == 0:
            return "exponential"
        return "power-log"

    def _values(self, n):
        x = n + float(self.shift)
        v = np.full(n.shape, float(self.c))
        if self.q != 1:
            v = v * np.power(float(self.q), n)
        if self.a:
            v = v * np.power(x, -float(self.a))
        if self.b:
            v = v * np.power(self.log_shift + np.log(x), -float(self.b))
        return v

    def _logs(self, n):
        x = n + float(self.shift)
        out = np.full(n.shape, self._lnc)
        if self.q != 1:
            out = out + n * self._lnq
        if self.a:
            out = out - self.a * np.log(x)
        if self.b:
            out = out - self.b * np.log(self.log_shift + np.log(x))
        return out

    def log_at(self, log_n: float) -> float:
        if log_n < 700:
            x = math.exp(log_n)
            lx = math.log(x + float(self.shift))
        else:
            x = math.inf
            lx = log_n  # shift is below double resolution here
        out = self._lnc
        if self.q != 1:
            out += self._lnq * x
        out -= self.a * lx
        if self.b:
            out -= self.b * math.log(self.log_shift + lx)
        return out

    def log_theta_at(self, log_n: float) -> float:
        if self.q != 1:
            return super().log_theta_at(log_n)
        # with y = x + shift: ln x - a ln y = (1 - a) ln y - ln(1 + shift/x),
        # and the power part vanishes exactly when a = 1
        lx, corr = log_n, 0.0
        if self.shift and log_n < 700:
            x = math.exp(log_n)
            lx, corr = math.log(x + float(self.shift)), math.log1p(float(self.shift) / x)
        out = self._lnc + (1 - self.a) * lx - corr
        if self.b:
            out -= self.b * math.log(self.log_shift + lx)
        return out

    def exact(self, n: int) -> Fraction | None:
        if self.b != 0 or not (is_exact(self.c) and is_exact(self.q) and is_exact(self.shift)):
            return None
        if float(self.a) != int(self.a):
            return None
        a = int(self.a)
        return Fraction(self.c) * Fraction(self.q) ** int(n) / Fraction(int(n) + self.shift) ** a

    @property
    def has_closed_tail(self) -> bool:
        return self.a == 0 and self.b == 0 and self.q < 1

    def closed_tail(self, n):
        if not self.has_closed_tail:
            raise NotImplementedError
        arr, scalar = _as_array(n)
        out = float(self.c) * np.power(float(self.q), arr) / (1 - float(self.q))
        return float(out[0]) if scalar else out

    def closed_tail_log(self, n):
        arr, scalar = _as_array(n)
        out = self._lnc + arr * self._lnq - math.log(1 - float(self.q))
        return float(out[0]) if scalar else out

    def exact_tail(self, n: int) -> Fraction | None:
        if not self.has_closed_tail or not (is_exact(self.c) and is_exact(self.q)):
            return None
        q = Fraction(self.q)
        return Fraction(self.c) * q ** int(n) / (1 - q)

    def tail_integral(self, x: float) -> float | None:
        c = float(self.c)
        y = x + float(self.shift)
        if self.q != 1:
            if self.a == 0 and self.b == 0:
                return c * math.exp(self._lnq * x) / -self._lnq
            return None
        if self.b == 0 and self.a > 1:
            return c * y ** (1 - self.a) / (self.a - 1)
        if self.a == 1 and self.b > 1:
            return c * (self.log_shift + math.log(y)) ** (1 - self.b) / (self.b - 1)
        if self.asymptotic.summable():
            value, _ = integrate.quad(lambda t: float(self(t)), x, np.inf, limit=200)
            return value
        return None

    def params(self) -> dict:
        return {"c": dump_number(self.c), "q": dump_number(self.q), "a": self.a, "b": self.b,
                "shift": dump_number(self.shift), "log_shift": self.log_shift}


def power(a: float, c: Number = 1, role: Role = Role.SCALE, shift: Number = 0) -> PowerLogRate:
    """c * (n+shift)^-a."""
    return PowerLogRate(role, c=c, a=a, shift=shift)


def power_log(a: float, b: float, c: Number = 1, role: Role = Role.SCALE,
              shift: Number = 0, log_shift: float = 0.0) -> PowerLogRate:
    return PowerLogRate(role, c=c, a=a, b=b, shift=shift, log_shift=log_shift)


def exponential(q: Number, c: Number = 1, role: Role = Role.SCALE) -> PowerLogRate:
    """c * q^n with 0 < q < 1."""
    return PowerLogRate(role, c=c, q=q)


class TabulatedRate(RateFn):
    """Explicit values for n = 1..len, optionally continued by another rate."""

    kind = "tabulated"

    def __init__(self, values: Sequence[Number], role: Role = Role.SCALE,
                 tail: RateFn | None = None):
        if len(values) == 0:
            raise ValueError("empty table")
        self.table = tuple(values)
        self._arr = np.array([float(v) for v in values])
        self.tail = tail
        super().__init__(role, None if tail is None else tail.asymptotic)
        validate(self)

    def _values(self, n):
        idx = n.astype(np.int64)
        out = np.empty(n.shape)
        inside = idx <= len(self.table)
        out[inside] = self._arr[idx[inside] - 1]
        if not inside.all():
            if self.tail is None:
                raise HorizonExhausted(f"tabulated rate has only {len(self.table)} values")
            out[~inside] = self.tail(n[~inside])
        return out

    def exact(self, n: int) -> Fraction | None:
        if n <= len(self.table):
            v = self.table[n - 1]
            return Fraction(v) if is_exact(v) else None
        return None if self.tail is None else self.tail.exact(n)

    def params(self) -> dict:
        return {"values": [dump_number(v) for v in self.table],
                "tail": None if self.tail is None else self.tail.to_dict()}


class StepRate(RateFn):
    """Piecewise constant: values[j] on [breaks[j], breaks[j+1]); tail after the last break."""

    kind = "step"

    def __init__(self, breaks: Sequence[int], values: Sequence[Number], role: Role = Role.SCALE,
                 tail: RateFn | None = None):
        if len(breaks) != len(values) + 1 or breaks[0] != 1:
            raise ValueError("need breaks = [1, b_1, ..., b_m] with one value per block")
        if any(b2 <= b1 for b1, b2 in zip(breaks, breaks[1:])):
            raise ValueError("breakpoints must be strictly increasing")
        self.breaks = tuple(int(b) for b in breaks)
        self.step_values = tuple(values)
        self.tail = tail
        super().__init__(role, None if tail is None else tail.asymptotic)
        validate(self)

    def _values(self, n):
        edges = np.array(self.breaks, dtype=float)
        vals = np.array([float(v) for v in self.step_values])
        idx = np.searchsorted(edges, n, side="right") - 1
        out = np.empty(n.shape)
        inside = idx < len(vals)
        out[inside] = vals[idx[inside]]
        if not inside.all():
            if self.tail is None:
                raise HorizonExhausted(f"step rate defined only below n={self.breaks[-1]}")
            out[~inside] = self.tail(n[~inside])
        return out

    def params(self) -> dict:
        return {"breaks": list(self.breaks), "values": [dump_number(v) for v in self.step_values],
                "tail": None if self.tail is None else self.tail.to_dict()}


# ---------------------------------------------------------------------------
# derived rates


class ScaledRate(RateFn):
    kind = "scaled"

    def __init__(self, inner: RateFn, factor: Number, role: Role | None = None):
        if not factor > 0:
            raise ValueError("scale factor must be positive")
        self.inner, self.factor = inner, factor
        cert = None if inner.asymptotic is None else inner.asymptotic.scaled(float(factor))
        super().__init__(role or inner.role, cert, inner.approximate)
        validate(self)

    def _values(self, n):
        return float(self.factor) * self.inner(n)

    def _logs(self, n):
        return math.log(self.factor) + self.inner.log(n)

    def log_at(self, log_n):
        return math.log(self.factor) + self.inner.log_at(log_n)

    def log_theta_at(self, log_n):
        return math.log(self.factor) + self.inner.log_theta_at(log_n)

    def exact(self, n):
        v = self.inner.exact(n)
        return None if v is None or not is_exact(self.factor) else v * Fraction(self.factor)

    @property
    def has_closed_tail(self):
        return self.inner.has_closed_tail

    def closed_tail(self, n):
        return float(self.factor) * self.inner.closed_tail(n)

    def closed_tail_log(self, n):
        return math.log(self.factor) + self.inner.closed_tail_log(n)

    def tail_integral(self, x):
        t = self.inner.tail_integral(x)
        return None if t is None else float(self.factor) * t

    def params(self):
        return {"factor": dump_number(self.factor), "inner": self.inner.to_dict()}


class _Pointwise(RateFn):
    """Pointwise combination of several rates."""

    reducer: Callable = None

    def __init__(self, parts: Sequence[RateFn], role: Role, cert: PowerLog | None):
        self.parts = tuple(parts)
        super().__init__(role, cert, any(p.approximate for p in parts))
        validate(self)

    def params(self):
        return {"parts": [p.to_dict() for p in self.parts]}


class JoinRate(_Pointwise):
    kind = "join"

    def __init__(self, parts, role=Role.SCALE):
        super().__init__(parts, role, _dominant([p.asymptotic for p in parts], slowest=True))

    def _values(self, n):
        return np.max([p(n) for p in self.parts], axis=0)

    def _logs(self, n):
        return np.max([p.log(n) for p in self.parts], axis=0)

    def log_at(self, log_n):
        return max(p.log_at(log_n) for p in self.parts)

    def exact(self, n):
        vals = [p.exact(n) for p in self.parts]
        return None if any(v is None for v in vals) else max(vals)


class MeetRate(_Pointwise):
    kind = "meet"

    def __init__(self, parts, role=Role.SCALE):
        super().__init__(parts, role, _dominant([p.asymptotic for p in parts], slowest=False))

    def _values(self, n):
        return np.min([p(n) for p in self.parts], axis=0)

    def _logs(self, n):
        return np.min([p.log(n) for p in self.parts], axis=0)

    def log_at(self, log_n):
        return min(p.log_at(log_n) for p in self.parts)

    def exact(self, n):
        vals = [p.exact(n) for p in self.parts]
        return None if any(v is None for v in vals) else min(vals)


class ProductRate(_Pointwise):
    kind = "product"

    def __init__(self, parts, role=Role.SCALE):
        certs = [p.asymptotic for p in parts]
        cert = None
        if all(c is not None for c in certs):
            cert = certs[0]
            for c in certs[1:]:
                cert = cert * c
        super().__init__(parts, role, cert)

    def _values(self, n):
        return np.prod([p(n) for p in self.parts], axis=0)

    def _logs(self, n):
        return np.sum([p.log(n) for p in self.parts], axis=0)

    def log_at(self, log_n):
        return sum(p.log_at(log_n) for p in self.parts)

    def exact(self, n):
        vals = [p.exact(n) for p in self.parts]
        if any(v is None for v in vals):
            return None
        out = Fraction(1)
        for v in vals:
            out *= v
        return out


class FamilyLowerRate(_Pointwise):
    """n -> min over the first min(n, len) members at n."""

    kind = "family-lower"

    def __init__(self, parts, role=Role.SCALE):
        super().__init__(parts, role, _dominant([p.asymptotic for p in parts], slowest=False))

    def _values(self, n):
        stack = np.array([p(n) for p in self.parts])
        member = np.arange(1, len(self.parts) + 1)[:, None]
        stack = np.where(member <= n[None, :], stack, np.inf)
        return stack.min(axis=0)


class FamilyUpperRate(_Pointwise):
    """n -> max_i 2^-i * phi_i(n) / phi_i(1)."""

    kind = "family-upper"

    def __init__(self, parts, role=Role.SCALE):
        self.factors = tuple(2.0**-(i + 1) / p(1) for i, p in enumerate(parts))
        certs = [None if p.asymptotic is None else p.asymptotic.scaled(f)
                 for p, f in zip(parts, self.factors)]
        super().__init__(parts, role, _dominant(certs, slowest=True))

    def _values(self, n):
        return np.max([f * p(n) for f, p in zip(self.factors, self.parts)], axis=0)


class SigmaRate(RateFn):
    """n -> sum_{i >= n} kappa(i).

    Uses the weight's closed tail sum when it has one; otherwise exact
    partial sums up to the horizon plus an integral estimate of the rest.
    """

    kind = "sigma"

    def __init__(self, kappa: RateFn, horizon: int | None = None):
        if kappa.asymptotic is not None and not kappa.asymptotic.summable():
            raise ValueError("weight certificate does not imply summability")
        self.kappa = kappa
        self.horizon = horizon or default_horizon()
        self._suffix = None
        self._tail_rest = 0.0
        self.tail_error = 0.0
        cert = None if kappa.asymptotic is None else kappa.asymptotic.tail()
        closed = kappa.has_closed_tail
        approximate = not closed and kappa.tail_integral(float(self.horizon)) is None
        super().__init__(Role.SCALE, cert, approximate or kappa.approximate)

    def _prepare(self):
        if self._suffix is not None:
            return
        H = self.horizon
        vals = self.kappa(np.arange(1, H + 1, dtype=float))
        # summing from the small end keeps the error near one ulp per term
        self._suffix = np.concatenate([np.cumsum(vals[::-1])[::-1], [0.0]])
        upper = self.kappa.tail_integral(float(H))
        lower = self.kappa.tail_integral(float(H + 1))
        if upper is not None and lower is not None:
            self._tail_rest = 0.5 * (upper + lower)
            self.tail_error = 0.5 * (upper - lower)

    @property
    def has_closed_tail(self):
        # sum_{i>=n} Sigma(i) is not needed anywhere; Sigma itself is the closed form
        return False

    def _values(self, n):
        if self.kappa.has_closed_tail:
            return np.asarray(self.kappa.closed_tail(n), dtype=float)
        self._prepare()
        idx = n.astype(np.int64)
        out = np.empty(n.shape)
        inside = idx <= self.horizon
        out[inside] = self._suffix[idx[inside] - 1] + self._tail_rest
        if not inside.all():
            far = n[~inside]
            ints = [self.kappa.tail_integral(float(x)) for x in far]
            if any(t is None for t in ints):
                raise HorizonExhausted("Sigma beyond the horizon needs an integral tail")
            out[~inside] = np.array(ints) + 0.5 * self.kappa(far)
        return out

    def _logs(self, n):
        if self.kappa.has_closed_tail:
            return np.asarray(self.kappa.closed_tail_log(n), dtype=float)
        return np.log(self._values(n))

    def exact(self, n):
        if isinstance(self.kappa, PowerLogRate):
            return self.kappa.exact_tail(n)
        return None

    def params(self):
        return {"kappa": self.kappa.to_dict(), "horizon": self.horizon}


class DifferenceRate(RateFn):
    """n -> phi(n) - phi(n+1), whose tail sum is phi itself."""

    kind = "difference"

    def __init__(self, phi: RateFn, strict_device: bool):
        self.phi = phi
        self.strict_device = strict_device
        self.base = phi if not strict_device else ProductRate([phi, _one_plus_dyadic()])
        super().__init__(Role.WEIGHT, _difference_class(phi) if not strict_device else None,
                         phi.approximate)
        validate(self)

    def _values(self, n):
        if not self.strict_device:
            return self.base(n) - self.base(n + 1)
        return np.exp(self._logs(n))

    def _logs(self, n):
        if not self.strict_device:
            with np.errstate(divide="ignore"):
                return np.log(self.base(n) - self.base(n + 1))
        # phi(n)(1+2^-n) - phi(n+1)(1+2^-n-1)
        #   = (phi(n) - phi(n+1))(1 + 2^-n-1) + phi(n) 2^-n-1, with no cancellation
        drop = self.phi(n) - self.phi(n + 1)
        with np.errstate(divide="ignore"):
            first = np.log(drop) + np.log1p(np.power(0.5, n + 1))
        return np.logaddexp(first, self.phi.log(n) - (n + 1) * math.log(2))

    def exact(self, n):
        a, b = self.base.exact(n), self.base.exact(n + 1)
        return None if a is None or b is None else a - b

    @property
    def has_closed_tail(self):
        return True

    def closed_tail(self, n):
        return self.base(n)

    def closed_tail_log(self, n):
        return self.base.log(n)

    def params(self):
        return {"phi": self.phi.to_dict(), "strict_device": self.strict_device}


class _OnePlusDyadic(RateFn):
    """1 + 2^-n: multiplying by it makes a nonincreasing sequence strictly decreasing."""

    kind = "one-plus-dyadic"

    def __init__(self):
        super().__init__(Role.SCALE, PowerLog(0.0, 0.0, 0.0, 1.0))

    def _values(self, n):
        return 1.0 + np.power(0.5, n)

    def log_at(self, log_n):
        return math.log1p(2.0 ** -math.exp(min(log_n, 700)))

    def exact(self, n):
        return 1 + Fraction(1, 2**int(n))


def _one_plus_dyadic():
    return _OnePlusDyadic()


def _difference_class(phi: RateFn) -> PowerLog | None:
    """Class of phi(n) - phi(n+1) for the smooth built-in families."""
    if not isinstance(phi, PowerLogRate):
        return None
    c = phi.asymptotic
    if c.rate > TOL:
        return replace(c, const=c.const * (1 - math.exp(-c.rate)))
    if c.a > TOL:
        return PowerLog(c.a + 1, c.b, 0.0, c.const * c.a)
    if c.b > TOL:
        return PowerLog(1.0, c.b + 1, 0.0, c.const * c.b)
    return None


class QuadraticWeight(RateFn):
    """n -> phi(n) / n^2, so that sum kappa/phi = sum 1/n^2 for any phi."""

    kind = "quadratic-weight"

    def __init__(self, phi: RateFn):
        self.phi = phi
        cert = None if phi.asymptotic is None else phi.asymptotic * PowerLog(2.0, 0.0, 0.0, 1.0)
        super().__init__(Role.WEIGHT, cert, phi.approximate)
        validate(self)

    def _values(self, n):
        return self.phi(n) / (n * n)

    def _logs(self, n):
        return self.phi.log(n) - 2 * np.log(n)

    def params(self):
        return {"phi": self.phi.to_dict()}


# ---------------------------------------------------------------------------
# validation and serialization


def _sample_points(horizon: int) -> np.ndarray:
    pts = np.unique(np.concatenate([
        np.arange(1, min(horizon, 64) + 1),
        np.round(np.geomspace(1, horizon, 200)),
    ]))
    return pts[pts <= horizon]


def validate(rate: RateFn, horizon: int | None = None) -> None:
    """Spot-check the role invariants on sampled indices; raise ValueError on failure."""
    H = horizon or min(default_horizon(), 10**6)
    if isinstance(rate, (TabulatedRate, StepRate)) and rate.tail is None:
        H = min(H, len(rate.table) if isinstance(rate, TabulatedRate) else rate.breaks[-1] - 1)
    pts = _sample_points(H)
    vals = rate(pts)
    if not np.all(np.isfinite(vals)) or np.any(vals < 0):
        raise ValueError(f"{rate.kind}: values must be finite and positive")
    logs = rate.log(pts)
    if np.any(np.isneginf(logs)) and rate.asymptotic is None:
        raise ValueError(f"{rate.kind}: values must be positive")
    cert = rate.asymptotic
    if rate.role is Role.SCALE:
        nxt = pts[pts + 1 <= H]
        if np.any(rate.log(nxt + 1) > rate.log(nxt) + 1e-12) or np.any(np.diff(logs) > 1e-12):
            raise ValueError(f"{rate.kind}: a scale function must be nonincreasing")
        if cert is not None and not cert.tends_to_zero():
            raise ValueError(f"{rate.kind}: certificate does not tend to zero")
        if cert is None and H > 1 and not logs[-1] < logs[0]:
            raise ValueError(f"{rate.kind}: a scale function must decrease somewhere")
    else:
        if cert is not None and not cert.summable():
            raise ValueError(f"{rate.kind}: weight certificate is not summable")


def rate_to_dict(rate: RateFn) -> dict:
    return rate.to_dict()


def rate_from_dict(d: dict) -> RateFn:
    kind = d["kind"]
    role = Role(d.get("role", "scale"))
    p = d.get("params", {})

    def sub(x):
        return None if x is None else rate_from_dict(x)

    if kind in ("power", "power-log", "exponential"):
        return PowerLogRate(role, c=parse_number(p.get("c", 1)), q=parse_number(p.get("q", 1)),
                            a=float(p.get("a", 0)), b=float(p.get("b", 0)),
                            shift=parse_number(p.get("shift", 0)),
                            log_shift=float(p.get("log_shift", 0)))
    if kind == "tabulated":
        return TabulatedRate([parse_number(v) for v in p["values"]], role, sub(p.get("tail")))
    if kind == "step":
        return StepRate(p["breaks"], [parse_number(v) for v in p["values"]], role,
                        sub(p.get("tail")))
    if kind == "scaled":
        return ScaledRate(sub(p["inner"]), parse_number(p["factor"]), role)
    if kind in ("join", "meet", "product", "family-lower", "family-upper"):
        cls = {"join": JoinRate, "meet": MeetRate, "product": ProductRate,
               "family-lower": FamilyLowerRate, "family-upper": FamilyUpperRate}[kind]
        return cls([rate_from_dict(x) for x in p["parts"]], role)
    if kind == "sigma":
        return SigmaRate(sub(p["kappa"]), int(p["horizon"]))
    if kind == "difference":
        return DifferenceRate(sub(p["phi"]), bool(p["strict_device"]))
    if kind == "quadratic-weight":
        return QuadraticWeight(sub(p["phi"]))
    if kind == "one-plus-dyadic":
        return _OnePlusDyadic()
    raise ValueError(f"unknown rate kind {kind!r}")


# ---------------------------------------------------------------------------
# mini-grammar: products of constants, n, (n+p), (s+ln(n+p)), q^n, exp(r n)


class _Factors:
    def __init__(self, c=Fraction(1), q_log=0.0, q_exact=Fraction(1), npow=0.0, lpow=0.0,
                 shift=None, log_shift=None):
        self.c, self.q_log, self.q_exact = c, q_log, q_exact
        self.npow, self.lpow, self.shift, self.log_shift = npow, lpow, shift, log_shift

    def merge(self, other: "_Factors", sign: int) -> "_Factors":
        def pick(x, y, what):
            if x is not None and y is not None and x != y:
                raise ValueError(f"inconsistent {what} inside one expression")
            return x if x is not None else y

        c = self.c * other.c if sign > 0 else self.c / other.c
        q_exact = None if self.q_exact is None or other.q_exact is None else (
            self.q_exact * other.q_exact if sign > 0 else self.q_exact / other.q_exact)
        return _Factors(c, self.q_log + sign * other.q_log, q_exact,
                        self.npow + sign * other.npow, self.lpow + sign * other.lpow,
                        pick(self.shift, other.shift, "n-shift"),
                        pick(self.log_shift, other.log_shift, "log shift"))

    def raised(self, e) -> "_Factors":
        if self.c == 1:
            ce = Fraction(1)
            qe = None if self.q_exact is None or self.q_exact != 1 else Fraction(1)
        elif isinstance(e, Fraction) and e.denominator == 1:
            ce = self.c ** int(e)
            qe = None if self.q_exact is None else self.q_exact ** int(e)
        else:
            ce = float(self.c) ** float(e)
            qe = None
        if isinstance(e, Fraction) and e.denominator == 1 and self.q_exact is not None:
            qe = self.q_exact ** int(e)
        return _Factors(ce, self.q_log * float(e), qe, self.npow * float(e),
                        self.lpow * float(e), self.shift, self.log_shift)


def _const(node) -> Number:
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
        v = node.value
        return Fraction(v) if isinstance(v, int) else v
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        v = _const(node.operand)
        return -v if isinstance(node.op, ast.USub) else v
    if isinstance(node, ast.BinOp) and isinstance(node.op, (ast.Add, ast.Sub, ast.Mult, ast.Div)):
        x, y = _const(node.left), _const(node.right)
        return {ast.Add: x + y, ast.Sub: x - y, ast.Mult: x * y,
                ast.Div: (Fraction(x) / Fraction(y)) if is_exact(x) and is_exact(y) else x / y
                }[type(node.op)]
    if isinstance(node, ast.Name) and node.id == "e":
        return math.e
    raise ValueError("expected a numeric constant")


def _linear(node) -> tuple[Number, Number]:
    """Parse c0 + c1*n."""
    try:
        return _const(node), Fraction(0)
    except ValueError:
        pass
    if isinstance(node, ast.Name) and node.id == "n":
        return Fraction(0), Fraction(1)
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, ast.USub):
        a, b = _linear(node.operand)
        return -a, -b
    if isinstance(node, ast.BinOp) and isinstance(node.op, (ast.Add, ast.Sub)):
        a0, a1 = _linear(node.left)
        b0, b1 = _linear(node.right)
        s = 1 if isinstance(node.op, ast.Add) else -1
        return a0 + s * b0, a1 + s * b1
    if isinstance(node, ast.BinOp) and isinstance(node.op, ast.Mult):
        for k, other in ((node.left, node.right), (node.right, node.left)):
            try:
                c = _const(k)
            except ValueError:
                continue
            a0, a1 = _linear(other)
            return c * a0, c * a1
    raise ValueError("expected an expression linear in n")


def _shifted_n(node) -> Number | None:
    try:
        c0, c1 = _linear(node)
    except ValueError:
        return None
    return c0 if c1 == 1 else None


def _factors(node) -> _Factors:
    try:
        return _Factors(c=_const(node))
    except ValueError:
        pass
    if isinstance(node, ast.BinOp) and isinstance(node.op, (ast.Mult, ast.Div)):
        return _factors(node.left).merge(_factors(node.right), 1 if isinstance(node.op, ast.Mult) else -1)
    if isinstance(node, ast.BinOp) and isinstance(node.op, ast.Pow):
        try:
            base = _const(node.left)
        except ValueError:
            base = None
        if base is not None:
            c0, c1 = _linear(node.right)
            if base <= 0:
                raise ValueError("geometric base must be positive")
            q_exact = None
            if is_exact(base) and is_exact(c1) and Fraction(c1).denominator == 1:
                q_exact = Fraction(base) ** int(c1)
            const = Fraction(base) ** int(c0) if is_exact(base) and is_exact(c0) and Fraction(c0).denominator == 1 else float(base) ** float(c0)
            return _Factors(c=const, q_log=float(c1) * math.log(base), q_exact=q_exact)
        return _factors(node.left).raised(_const(node.right))
    if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and len(node.args) == 1:
        name, arg = node.func.id, node.args[0]
        if name == "exp":
            c0, c1 = _linear(arg)
            return _Factors(c=math.exp(c0) if c0 else Fraction(1), q_log=float(c1), q_exact=None)
        if name in ("ln", "log"):
            p = _shifted_n(arg)
            if p is None:
                raise ValueError("ln(...) must contain n or n+p")
            return _Factors(lpow=1.0, shift=p, log_shift=0.0)
        if name == "sqrt":
            return _factors(arg).raised(0.5)
    if isinstance(node, ast.BinOp) and isinstance(node.op, (ast.Add, ast.Sub)):
        p = _shifted_n(node)
        if p is not None:
            return _Factors(npow=1.0, shift=p)
        # s + ln(n+p)
        for const_side, other, sign in ((node.left, node.right, 1), (node.right, node.left, 1)):
            try:
                s = _const(const_side)
            except ValueError:
                continue
            if isinstance(node.op, ast.Sub) and const_side is node.right:
                s = -s
            f = _factors(other)
            if f.lpow == 1 and f.npow == 0 and f.q_log == 0 and f.c == 1:
                return _Factors(lpow=1.0, shift=f.shift, log_shift=float(s))
        raise ValueError("sums are only allowed as n+p or s+ln(n+p)")
    if isinstance(node, ast.Name) and node.id == "n":
        return _Factors(npow=1.0, shift=Fraction(0))
    raise ValueError(f"unsupported expression near {ast.dump(node)[:40]}")


def parse_rate(expr: str, role: Role = Role.SCALE) -> PowerLogRate:
    """Parse the command-line grammar, e.g. ``1/n``, ``(1+ln n)/n``, ``n^-0.5``, ``2^-n``."""
    import re

    text = expr.replace("^", "**")
    text = re.sub(r"\b(ln|log)\s+n\b", r"\1(n)", text)
    try:
        tree = ast.parse(text, mode="eval").body
    except SyntaxError as exc:
        raise ValueError(f"cannot parse rate expression {expr!r}") from exc
    f = _factors(tree)
    if f.q_log > TOL:
        raise ValueError("geometric growth is not a rate")
    q: Number = f.q_exact if f.q_exact is not None and f.q_exact <= 1 else math.exp(f.q_log)
    if abs(f.q_log) <= TOL:
        q = 1
    return PowerLogRate(role, c=f.c, q=q, a=0.0 - f.npow, b=0.0 - f.lpow, shift=f.shift or 0,
                        log_shift=f.log_shift or 0.0)


# ---------------------------------------------------------------------------
# operations


class Convergence(Enum):
    CONVERGES = "Converges"
    DIVERGES = "Diverges"
    INCONCLUSIVE = "InconclusiveAtHorizon"


@dataclass(frozen=True)
class ConvergenceVerdict:
    status: Convergence
    partial_sum: float
    horizon: int
    certificate_used: bool

    def to_dict(self) -> dict:
        return {"status": self.status.value, "partial_sum": self.partial_sum,
                "horizon": self.horizon, "certificate_used": self.certificate_used}


class Relation(Enum):
    EQUIVALENT = "Equivalent"
    STRICTLY_SMALLER = "StrictlySmaller"
    STRICTLY_LARGER = "StrictlyLarger"
    INCOMPARABLE = "Incomparable"
    INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True)
class Comparison:
    relation: Relation
    certified: bool
    ratio_min: float
    ratio_max: float
    horizon: int


def _require(rate: RateFn, role: Role, what: str) -> None:
    if rate.role is not role:
        raise ValueError(f"{what} must have role {role.value}")


def sigma(kappa: RateFn, horizon: int | None = None) -> SigmaRate:
    """Tail-sum map from weights to scales."""
    _require(kappa, Role.WEIGHT, "sigma input")
    return SigmaRate(kappa, horizon)


def _records_both_ways(lr: np.ndarray) -> bool:
    """The log-ratio sets new highs and new lows (by a factor 2) in its second half.

    A bounded oscillation stops setting records, so it is not reported.
    """
    half = len(lr) // 2
    if half < 2:
        return False
    early, late = lr[:half], lr[half:]
    return late.max() > early.max() + math.log(2) and late.min() < early.min() - math.log(2)


def equivalent(phi1: RateFn, phi2: RateFn, horizon: int | None = None) -> Comparison:
    """Compare two scale functions up to multiplicative constants.

    StrictlySmaller means phi1 <= c*phi2 but not conversely.
    """
    H = horizon or default_horizon()
    pts = _sample_points(H)
    try:
        lr = phi1.log(pts) - phi2.log(pts)
    except HorizonExhausted:
        return Comparison(Relation.INCONCLUSIVE, False, math.nan, math.nan, H)
    rmin, rmax = float(np.exp(lr.min())), float(np.exp(lr.max()))
    c1, c2 = phi1.asymptotic, phi2.asymptotic
    if c1 is not None and c2 is not None:
        cmp = c1.compare(c2)
        rel = {0: Relation.EQUIVALENT, 1: Relation.STRICTLY_SMALLER, -1: Relation.STRICTLY_LARGER}[cmp]
        return Comparison(rel, True, rmin, rmax, H)
    if isinstance(phi1, TabulatedRate) or isinstance(phi2, TabulatedRate):
        return Comparison(Relation.INCONCLUSIVE, False, rmin, rmax, H)
    late = lr[pts >= math.sqrt(H)]
    spread = float(late.max() - late.min())
    steps = np.diff(late)
    if spread < 1e-9:
        rel = Relation.EQUIVALENT
    elif np.all(steps <= 1e-12) and spread > math.log(4):
        rel = Relation.STRICTLY_SMALLER
    elif np.all(steps >= -1e-12) and spread > math.log(4):
        rel = Relation.STRICTLY_LARGER
    elif _records_both_ways(late):
        rel = Relation.INCOMPARABLE
    else:
        rel = Relation.INCONCLUSIVE
    return Comparison(rel, False, rmin, rmax, H)


def lattice_join(phi1: RateFn, phi2: RateFn) -> RateFn:
    _require(phi1, Role.SCALE, "join argument")
    _require(phi2, Role.SCALE, "join argument")
    return JoinRate([phi1, phi2])


def lattice_meet(phi1: RateFn, phi2: RateFn) -> RateFn:
    _require(phi1, Role.SCALE, "meet argument")
    _require(phi2, Role.SCALE, "meet argument")
    return MeetRate([phi1, phi2])


def family_lower_bound(phis: Sequence[RateFn]) -> RateFn:
    if not phis:
        raise ValueError("empty family")
    for p in phis:
        _require(p, Role.SCALE, "family member")
    return FamilyLowerRate(list(phis))


def family_upper_bound(phis: Sequence[RateFn]) -> RateFn:
    """Sup of the members rescaled so that member i is at most 2^-i.

    Members are nonincreasing, so sup phi_i = phi_i(1) and the rescaling is exact.
    """
    if not phis:
        raise ValueError("empty family")
    for p in phis:
        _require(p, Role.SCALE, "family member")
    return FamilyUpperRate(list(phis))


def rate_product(phi1: RateFn, phi2: RateFn) -> RateFn:
    _require(phi1, Role.SCALE, "product factor")
    _require(phi2, Role.SCALE, "product factor")
    return ProductRate([phi1, phi2])


def quadratic_weight(phi: RateFn) -> QuadraticWeight:
    """The weight phi(n)/n^2, for which phi always satisfies the summability test."""
    _require(phi, Role.SCALE, "quadratic_weight input")
    return QuadraticWeight(phi)


def phi_kappa_member(kappa: RateFn, phi: RateFn, horizon: int | None = None) -> ConvergenceVerdict:
    """Decide whether sum kappa(n)/phi(n) converges."""
    H = horizon or default_horizon()
    n = np.arange(1, H + 1, dtype=float)
    partial = float(np.sum(np.exp(kappa.log(n) - phi.log(n))))
    if isinstance(kappa, QuadraticWeight) and kappa.phi.to_dict() == phi.to_dict():
        return ConvergenceVerdict(Convergence.CONVERGES, partial, H, True)
    if kappa.asymptotic is not None and phi.asymptotic is not None:
        ratio = kappa.asymptotic / phi.asymptotic
        status = Convergence.CONVERGES if ratio.summable() else Convergence.DIVERGES
        return ConvergenceVerdict(status, partial, H, True)
    return ConvergenceVerdict(Convergence.INCONCLUSIVE, partial, H, False)


def weight_from_scale(phi: RateFn, horizon: int | None = None) -> DifferenceRate:
    """kappa(n) = phi(n) - phi(n+1) for a strictly decreasing representative of phi.

    When phi is flat somewhere on the sampled range it is first replaced by
    phi(n) * (1 + 2^-n), which is equivalent to phi and strictly decreasing.
    """
    _require(phi, Role.SCALE, "weight_from_scale input")
    H = horizon or default_horizon()
    if isinstance(phi, PowerLogRate):
        strict = phi.asymptotic.tends_to_zero()
    else:
        pts = _sample_points(H)
        pts = pts[pts + 1 <= H]
        dense = np.arange(1, min(H, 4096) + 1, dtype=float)
        check = np.unique(np.concatenate([pts, dense]))
        strict = bool(np.all(phi(check + 1) < phi(check)))
    return DifferenceRate(phi, strict_device=not strict)


# ---------------------------------------------------------------------------
# stretch function


@dataclass(frozen=True)
class XiStretch:
    """Stretch values xi(n) for n in [n_min, n_max] and the sandwich products."""

    n_min: int
    n_max: int
    xi: tuple[int, ...]
    products: tuple[float, ...]
    threshold: int | None
    tolerance: float

    def __call__(self, n: int) -> int:
        return self.xi[n - self.n_min]

    @property
    def holds(self) -> bool:
        return self.threshold is not None

    def nondecreasing(self) -> bool:
        return all(b >= a for a, b in zip(self.xi, self.xi[1:]))


def _int_exp(u: float) -> int:
    """An integer close to e^u, for u far beyond float range."""
    if u < 700:
        return max(1, int(math.exp(u)))
    q, frac = divmod(u / math.log(2), 1.0)
    mant = int(2.0**frac * 2**52)
    return mant << (int(q) - 52)


def xi_stretch(phi: RateFn, n_max: int = 10**4, n_min: int = 1,
               tolerance: float = XI_TOLERANCE) -> XiStretch:
    """xi(n) = min{m : m * phi(n m) >= 1} for phi normalized to phi(1) = 1.

    For each n the threshold in log m is bracketed and bisected in floating
    point, then refined on the integers; for astronomically large m the
    integer refinement stops at relative resolution 2^-50.
    """
    _require(phi, Role.SCALE, "xi_stretch input")
    cert = phi.asymptotic
    if cert is not None and (cert * PowerLog(-1.0)).bounded():
        raise ValueError("n*phi(n) does not tend to infinity")
    ln1 = phi.log(1)

    def g(log_n: float, log_m: float) -> float:
        # ln(m phi(n m)) = ln theta(n m) - ln n
        return phi.log_theta_at(log_n + log_m) - log_n - ln1

    xis, prods = [], []
    for n in range(n_min, n_max + 1):
        ln_n = math.log(n)

        def ok(m: int) -> bool:
            return g(ln_n, math.log(m)) >= -tolerance

        if ok(1):
            m = 1
        else:
            hi_u = 1.0
            while g(ln_n, hi_u) < -tolerance:
                hi_u *= 2
                if hi_u > 1e9:
                    raise ValueError(f"theta(n m)/n never reaches 1 for n={n}")
            lo_u = 0.0
            for _ in range(200):
                mid = 0.5 * (lo_u + hi_u)
                if g(ln_n, mid) >= -tolerance:
                    hi_u = mid
                else:
                    lo_u = mid
                if hi_u - lo_u <= 1e-15 * max(1.0, hi_u):
                    break
            hi = _int_exp(hi_u) + 1
            while not ok(hi):
                hi += max(1, hi >> 40)
            lo = max(1, _int_exp(lo_u) - 1)
            while lo > 1 and ok(lo):
                lo = max(1, lo - max(1, lo >> 40))
            if ok(lo):
                hi = lo
            while hi - lo > max(1, hi >> 50):
                mid = (lo + hi) // 2
                if ok(mid):
                    hi = mid
                else:
                    lo = mid
            m = hi
        xis.append(m)
        prods.append(math.exp(g(ln_n, math.log(m))))
    good = [1 - tolerance <= p <= 2 + tolerance for p in prods]
    threshold = None
    if good and good[-1]:
        i = len(good) - 1
        while i > 0 and good[i - 1]:
            i -= 1
        threshold = n_min + i
    return XiStretch(n_min, n_max, tuple(xis), tuple(prods), threshold, tolerance)


# ---------------------------------------------------------------------------
# separating profile


@dataclass(frozen=True)
class ProfileBlock:
    index: int
    start: int
    end: int
    alpha: float
    log_prefactor: float
    block_sum: float
    running_sum: float
    h_end: float
    hphi_end: float


class SeparatingProfile:
    """Piecewise h with h*phi decreasing to 0 and sum kappa/(h phi) divergent.

    ``phi`` is sigma(kappa); internally it is normalized so phi(1) = 1, which
    leaves kappa/phi unchanged.  Block k covers [start, end] with
    h(n) = exp(-log_prefactor) * phi_hat(n)^(-alpha).
    """

    def __init__(self, kappa: RateFn, phi: RateFn, blocks: list[ProfileBlock], horizon: int,
                 checks: dict):
        self.kappa, self.phi = kappa, phi
        self.blocks = blocks
        self.horizon = horizon
        self.checks = checks
        self.log_phi1 = phi.log(1)
        self._ends = np.array([b.end for b in blocks], dtype=float)

    @property
    def extent(self) -> int:
        return self.blocks[-1].end

    def log_h(self, n):
        arr, scalar = _as_array(n)
        if np.any(arr > self.extent) or np.any(arr < 1):
            raise HorizonExhausted(f"profile realized only up to n={self.extent}",
                                   achieved=len(self.blocks))
        idx = np.searchsorted(self._ends, arr, side="left")
        alpha = np.array([b.alpha for b in self.blocks])[idx]
        logp = np.array([b.log_prefactor for b in self.blocks])[idx]
        out = -logp - alpha * (self.phi.log(arr) - self.log_phi1)
        return float(out[0]) if scalar else out

    def h(self, n):
        return np.exp(self.log_h(n))

    def log_hphi(self, n):
        """ln(h(n) * phi(n)) with the unnormalized phi."""
        return self.log_h(n) + self.phi.log(n)


def separating_profile(kappa: RateFn, blocks: int = 3, horizon: int | None = None,
                       halvings: int = 30) -> SeparatingProfile:
    """Realize the inductive choice of (N_k, alpha_k) for K blocks.

    Candidates for alpha_k are alpha_{k-1} / 2^j.  For each candidate that
    keeps h*phi decreasing across the boundary, the block end is the least
    index at which the block sum exceeds 1, h*phi <= 1/k and h >= k+1 (h >= K
    on the last block).  Each condition is monotone in the end index, so
    doubling then bisection finds it.  The candidate with the smallest block
    end is kept.
    """
    _require(kappa, Role.WEIGHT, "separating_profile input")
    H = horizon or default_horizon()
    phi = sigma(kappa, H)
    n = np.arange(1, H + 2, dtype=float)
    lphi = phi.log(n) - phi.log(1)      # ln phi_hat, phi_hat(1) = 1
    r0 = np.exp(kappa.log(n) - phi.log(n))  # kappa/phi, normalization free

    def at(arr, m):
        return arr[m - 1]

    def smallest(pred, lo):
        # least m in [lo, H] with pred(m), pred monotone; None if none
        if pred(lo):
            return lo
        step, good = 1, None
        while True:
            cand = lo + step
            if cand >= H:
                if not pred(H):
                    return None
                good = H
                break
            if pred(cand):
                good = cand
                break
            lo, step = cand, step * 2
        left = lo + 1
        while left < good:
            mid = (left + good) // 2
            if pred(mid):
                good = mid
            else:
                left = mid + 1
        return good

    out: list[ProfileBlock] = []
    n_prev, alpha_prev, logp, running = 0, 1.0, 0.0, 0.0
    for k in range(1, blocks + 1):
        start = n_prev + 1
        P = math.exp(logp)
        # ending with h >= k+1 makes h >= k+1 automatic on the next block
        target = k + 1 if k < blocks else k
        best = None
        for j in range(1, halvings + 1):
            alpha = alpha_prev / 2**j
            if k >= 2:
                lhs = (1 - alpha_prev - alpha) * at(lphi, n_prev + 1)
                if not lhs < (1 - alpha_prev) * at(lphi, n_prev):
                    continue
            partial = P * np.cumsum(r0[start - 1:H] * np.exp(alpha * lphi[start - 1:H]))
            if not partial[-1] > 1:
                continue
            n_sum = start + int(np.argmax(partial > 1))

            def ends_ok(m, alpha=alpha):
                iii = (1 - alpha) * at(lphi, m) - logp <= -math.log(k)
                iv = -logp - alpha * at(lphi, m) >= math.log(target)
                return iii and iv

            end = smallest(ends_ok, n_sum)
            if end is not None and (best is None or end < best[1]):
                best = (alpha, end, float(partial[end - start]))
        if best is None:
            raise HorizonExhausted(f"block {k} not realizable within horizon {H}", achieved=out)
        alpha, end, block_sum = best
        running += block_sum
        h_end = math.exp(-logp - alpha * at(lphi, end))
        hphi_end = math.exp(-logp + (1 - alpha) * at(lphi, end))
        out.append(ProfileBlock(k, start, end, alpha, float(logp), block_sum, running,
                                h_end, hphi_end))
        logp += alpha * at(lphi, end + 1)
        n_prev, alpha_prev = end, alpha

    prof = SeparatingProfile(kappa, phi, out, H, {})
    idx = np.arange(1, prof.extent + 1, dtype=float)
    lh = prof.log_h(idx)
    lhp = lh + lphi[: prof.extent]
    prof.checks.update({
        "h_nondecreasing": bool(np.all(np.diff(lh) >= -1e-12)),
        "hphi_decreasing": bool(np.all(np.diff(lhp) <= 1e-12)),
        "block_sums_exceed_one": all(b.block_sum > 1 for b in out),
        "hphi_end_at_most_1_over_k": all(b.hphi_end <= 1 / b.index + 1e-12 for b in out),
        "h_end_at_least_k": all(b.h_end >= b.index - 1e-12 for b in out),
    })
    return prof


# ---------------------------------------------------------------------------
# gauges


@dataclass(frozen=True)
class Gauge:
    """Nondecreasing psi on [0, inf) with psi(0) = 0, times t^extra_power.

    Families (u = ln(1/t)):
      power:      t^alpha
      log:        |ln t|^-k for t < 1/e, 1 beyond (the monotone form of min(|ln t|^-k, 1))
      double-log: 1/(u^s (ln u)^(s+eps)) for t <= e^-2, constant beyond
    """

    kind: str
    params: tuple = ()
    extra_power: float = 0.0

    def _p(self) -> dict:
        return dict(self.params)

    def log_u(self, u):
        """ln psi(e^-u), vectorized; -inf stands for psi(0)."""
        u = np.asarray(u, dtype=float)
        p = self._p()
        if self.kind == "power":
            out = -p["alpha"] * u
        elif self.kind == "log":
            with np.errstate(divide="ignore", invalid="ignore"):
                out = np.where(u > 1, -p["k"] * np.log(np.maximum(u, 1)), 0.0)
        elif self.kind == "double-log":
            s, eps = p["s"], p["eps"]
            uu = np.maximum(u, 2.0)
            with np.errstate(divide="ignore", invalid="ignore"):
                out = -s * np.log(uu) - (s + eps) * np.log(np.log(uu))
        else:
            raise ValueError(f"unknown gauge {self.kind}")
        if self.extra_power:
            out = out - self.extra_power * u
        return np.where(np.isposinf(u), -np.inf, out)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        with np.errstate(divide="ignore"):
            u = -np.log(t)
        out = np.exp(self.log_u(u))
        out = np.where(t <= 0, 0.0, out)
        return float(out) if out.ndim == 0 else out

    def u_class(self) -> PowerLog:
        """Asymptotic class of psi(e^-u) as u -> infinity."""
        p = self._p()
        if self.kind == "power":
            base = PowerLog(0.0, 0.0, p["alpha"], 1.0)
        elif self.kind == "log":
            base = PowerLog(p["k"], 0.0, 0.0, 1.0)
        else:
            base = PowerLog(p["s"], p["s"] + p["eps"], 0.0, 1.0)
        return base * PowerLog(0.0, 0.0, self.extra_power, 1.0)

    def times_power(self, k: float) -> "Gauge":
        return replace(self, extra_power=self.extra_power + k)

    def psi_k(self, k: float) -> "Gauge":
        """t^k psi(t)."""
        return self.times_power(k)

    def psi_kd(self, k: float, d: float) -> "Gauge":
        """t^(k-d) psi(t)."""
        return self.times_power(k - d)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "params": dict(self.params), "extra_power": self.extra_power}

    @classmethod
    def from_dict(cls, d: dict) -> "Gauge":
        return cls(d["kind"], tuple(sorted(d["params"].items())), float(d.get("extra_power", 0)))


def power_gauge(alpha: float) -> Gauge:
    if alpha <= 0:
        raise ValueError("power gauge needs alpha > 0")
    return Gauge("power", (("alpha", float(alpha)),))


def log_gauge(k: float = 1.0) -> Gauge:
    if k <= 0:
        raise ValueError("log gauge needs k > 0")
    return Gauge("log", (("k", float(k)),))


def double_log_gauge(s: float = 1.0, eps: float = 1.0) -> Gauge:
    if s < 1 or eps <= 0:
        raise ValueError("double-log gauge needs s >= 1 and eps > 0")
    return Gauge("double-log", (("eps", float(eps)), ("s", float(s))))


def gauge_integrability(psi: Gauge, s: float = 1.0, octaves: int = 40) -> ConvergenceVerdict:
    """Decide whether the integral over (0, 1) of psi(t)^(1/s) / t converges.

    After t = e^-u this is the integral of psi(e^-u)^(1/s) over u > 0; the
    reported partial value integrates u up to 2^octaves.
    """
    if s < 1:
        raise ValueError("s must be >= 1")

    def f(u):
        return float(np.exp(psi.log_u(u) / s))

    total = integrate.quad(f, 0.0, 1.0)[0]
    for j in range(octaves):
        total += integrate.quad(f, 2.0**j, 2.0 ** (j + 1), limit=200)[0]
    cls = psi.u_class().power(1.0 / s)
    status = Convergence.CONVERGES if cls.summable() else Convergence.DIVERGES
    return ConvergenceVerdict(status, total, 2**octaves, True)
