"""Best-approximation error sequences and the explicit constructions built on them.

An :class:`ErrorSeq` is a finite prefix E_1..E_L plus an optional tail rule
for n > L.  Tail rules know their own asymptotic class (of 1/|ln E_n|), which
is what the class verdicts use for exact decisions.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Sequence

import numpy as np

from ._numbers import Number, csv_rows, dump_number, exact_log, is_exact, normalize, parse_number
from .rates import (
    HorizonExhausted,
    PowerLog,
    RateFn,
    Role,
    SeparatingProfile,
    TabulatedRate,
    default_horizon,
    rate_from_dict,
    separating_profile,
)
from .wiener import Norm, TelescopingTail, WienerElement, wiener_En, wiener_En_profile


class Provenance(Enum):
    CONSTRUCTED = "constructed"
    COMPUTED = "computed"
    TABULATED = "tabulated"


@dataclass(frozen=True)
class WitnessRecord:
    """Indices n_k with the margin each one achieves for ``inequality``."""

    indices: tuple[int, ...]
    margins: tuple[float, ...]
    inequality: str

    def __post_init__(self):
        if any(b <= a for a, b in zip(self.indices, self.indices[1:])):
            raise ValueError("witness indices must be strictly increasing")
        if len(self.indices) != len(self.margins):
            raise ValueError("one margin per index")

    def to_dict(self) -> dict:
        return {"indices": list(self.indices), "margins": list(self.margins),
                "inequality": self.inequality}


# ---------------------------------------------------------------------------
# tail rules


class TailRule:
    """Closed form for E_n beyond the prefix."""

    kind = "abstract"

    def value(self, n: int) -> Number:
        raise NotImplementedError

    def log_values(self, n: np.ndarray) -> np.ndarray:
        return np.array([exact_log(self.value(int(k))) for k in n])

    def log_rate_class(self) -> PowerLog | None:
        """Asymptotic class of 1/|ln E_n|, or None when not power-log."""
        return None

    @property
    def eventually_zero(self) -> bool:
        return False

    def params(self) -> dict:
        return {}

    def to_dict(self) -> dict:
        return {"kind": self.kind, "params": self.params()}


class ZeroTail(TailRule):
    kind = "zero"

    def value(self, n):
        return 0

    def log_values(self, n):
        return np.full(np.shape(n), -np.inf)

    @property
    def eventually_zero(self):
        return True


class GeometricTail(TailRule):
    """E_n = first * ratio^(n - start) for n >= start."""

    kind = "geometric"

    def __init__(self, start: int, first: Number, ratio: Number):
        if not (0 < ratio < 1) or first <= 0:
            raise ValueError("need first > 0 and 0 < ratio < 1")
        self.start, self.first, self.ratio = int(start), first, ratio

    def value(self, n):
        if is_exact(self.first) and is_exact(self.ratio):
            return normalize(Fraction(self.first) * Fraction(self.ratio) ** (n - self.start))
        return float(self.first) * float(self.ratio) ** (n - self.start)

    def log_values(self, n):
        return exact_log(self.first) + (np.asarray(n, dtype=float) - self.start) * exact_log(self.ratio)

    def log_rate_class(self):
        return PowerLog(1.0, 0.0, 0.0, 1.0 / -exact_log(self.ratio))

    def params(self):
        return {"start": self.start, "first": dump_number(self.first), "ratio": dump_number(self.ratio)}


class RateTail(TailRule):
    """E_n = rate(n) for a scale function ``rate``."""

    kind = "rate"

    def __init__(self, rate: RateFn):
        if rate.role is not Role.SCALE:
            raise ValueError("an error tail must be a scale function")
        self.rate = rate

    def value(self, n):
        v = self.rate.exact(n)
        return normalize(v) if v is not None else self.rate(n)

    def log_values(self, n):
        return self.rate.log(np.asarray(n, dtype=float))

    def log_rate_class(self):
        c = self.rate.asymptotic
        if c is None:
            return None
        if c.rate > 0:
            return PowerLog(1.0, 0.0, 0.0, 1.0 / c.rate)
        if c.a > 0:
            return PowerLog(0.0, 1.0, 0.0, 1.0 / c.a)
        return None

    def params(self):
        return {"rate": self.rate.to_dict()}


class LogRateTail(TailRule):
    """E_n = exp(-1/psi(n)) for a scale function psi."""

    kind = "log-rate"

    def __init__(self, psi: RateFn):
        if psi.role is not Role.SCALE:
            raise ValueError("psi must be a scale function")
        self.psi = psi

    def value(self, n):
        return math.exp(-1.0 / self.psi(n))

    def log_values(self, n):
        return -np.exp(-self.psi.log(np.asarray(n, dtype=float)))

    def log_rate_class(self):
        return self.psi.asymptotic

    def params(self):
        return {"psi": self.psi.to_dict()}


def _knot_index(n: np.ndarray, base: int) -> np.ndarray:
    n = np.asarray(n, dtype=np.int64)
    i = np.floor(np.log(n) / math.log(base)).astype(np.int64)
    i = np.where(base ** (i + 1) <= n, i + 1, i)
    i = np.where(base**i > n, i - 1, i)
    return i


class StepTail(TailRule):
    """E_n = exp(-1/psi(base^i)) for base^i <= n < base^(i+1)."""

    kind = "step"

    def __init__(self, psi: RateFn, base: int = 4):
        if base < 2:
            raise ValueError("knot base must be >= 2")
        self.psi, self.base = psi, int(base)

    def knots(self, n_max: int) -> list[int]:
        out, k = [], 1
        while k <= n_max:
            out.append(k)
            k *= self.base
        return out

    def knot_of(self, n: int) -> int:
        k = 1
        while k * self.base <= n:
            k *= self.base
        return k

    def value(self, n):
        return math.exp(-1.0 / self.psi(self.knot_of(n)))

    def log_values(self, n):
        knots = np.power(float(self.base), _knot_index(n, self.base))
        return -np.exp(-self.psi.log(knots))

    def log_rate_class(self):
        # along geometric knots a power-log psi changes by a bounded factor
        c = self.psi.asymptotic
        return c if c is not None and abs(c.rate) <= 1e-12 else None

    def params(self):
        return {"psi": self.psi.to_dict(), "base": self.base}


class ProfileTail(TailRule):
    """E_n = exp(-1/(h(n) phi(n))) from a separating profile."""

    kind = "profile"

    def __init__(self, profile: SeparatingProfile):
        self.profile = profile

    def value(self, n):
        return math.exp(self.log_values(np.array([n]))[0])

    def log_values(self, n):
        return -np.exp(-self.profile.log_hphi(np.asarray(n, dtype=float)))

    def params(self):
        return {"kappa": self.profile.kappa.to_dict(), "blocks": len(self.profile.blocks),
                "horizon": self.profile.horizon}


class WienerTail(TailRule):
    """E_n of a Wiener element, as exact tail sums."""

    kind = "wiener"

    def __init__(self, element: WienerElement):
        self.element = element

    def value(self, n):
        return wiener_En(self.element, n)

    def log_rate_class(self):
        t = self.element.tail
        if isinstance(t, TelescopingTail) and t.sequence.tail is not None:
            return t.sequence.tail.log_rate_class()
        if t is not None and t.kind == "geometric":
            return PowerLog(1.0, 0.0, 0.0, 1.0 / -exact_log(t.ratio))
        return None

    @property
    def eventually_zero(self):
        return self.element.tail is None

    def params(self):
        return {"element": self.element.to_dict()}


def tail_rule_from_dict(d: dict) -> TailRule:
    kind, p = d["kind"], d.get("params", {})
    if kind == "zero":
        return ZeroTail()
    if kind == "geometric":
        return GeometricTail(int(p["start"]), parse_number(p["first"]), parse_number(p["ratio"]))
    if kind == "rate":
        return RateTail(rate_from_dict(p["rate"]))
    if kind == "log-rate":
        return LogRateTail(rate_from_dict(p["psi"]))
    if kind == "step":
        return StepTail(rate_from_dict(p["psi"]), int(p["base"]))
    if kind == "profile":
        prof = separating_profile(rate_from_dict(p["kappa"]), int(p["blocks"]), int(p["horizon"]))
        return ProfileTail(prof)
    if kind == "wiener":
        return WienerTail(WienerElement.from_dict(p["element"]))
    raise ValueError(f"unknown tail rule {kind!r}")


# ---------------------------------------------------------------------------
# sequences


@dataclass(frozen=True)
class ErrorSeq:
    """E_1..E_L explicitly, then ``tail`` for n > L."""

    prefix: tuple[Number, ...] = ()
    tail: TailRule | None = None
    provenance: Provenance = Provenance.CONSTRUCTED
    notes: str = ""
    witness: WitnessRecord | None = None

    def __post_init__(self):
        object.__setattr__(self, "prefix", tuple(normalize(v) if is_exact(v) else float(v)
                                                  for v in self.prefix))
        if any(v < 0 for v in self.prefix):
            raise ValueError("error values must be nonnegative")
        if any(not math.isfinite(float(v)) for v in self.prefix):
            raise ValueError("error values must be finite")
        if any(b > a for a, b in zip(self.prefix, self.prefix[1:])):
            raise ValueError("error sequence must be nonincreasing")
        if self.tail is not None:
            self._check_tail()
        elif not self.prefix:
            raise ValueError("empty sequence without a tail rule")

    def _check_tail(self):
        L = len(self.prefix)
        pts = np.unique(np.round(np.geomspace(L + 1, L + 1 + 10**5, 60)).astype(np.int64))
        pts = pts[pts <= self.max_index]
        if len(pts) == 0:
            return
        logs = self.tail.log_values(pts)
        with np.errstate(invalid="ignore"):  # -inf - -inf on vanishing tails
            rising = np.any(np.diff(logs) > 1e-12)
        if rising:
            raise ValueError("tail rule is not nonincreasing")
        if L and exact_log(self.prefix[-1]) < logs[0] - 1e-12:
            raise ValueError("tail rule increases past the prefix")

    @property
    def max_index(self) -> float:
        if self.tail is None:
            return len(self.prefix)
        if isinstance(self.tail, ProfileTail):
            return self.tail.profile.extent
        return math.inf

    def value(self, n: int) -> Number:
        if n < 1:
            raise ValueError("error sequences start at n = 1")
        if n <= len(self.prefix):
            return self.prefix[n - 1]
        if n > self.max_index:
            raise HorizonExhausted(f"sequence known only up to n={self.max_index}")
        return self.tail.value(n)

    def values(self, n_max: int) -> list[Number]:
        return [self.value(n) for n in range(1, n_max + 1)]

    def log_values(self, n_max: int, start: int = 1) -> np.ndarray:
        """ln E_n for n = start..n_max (-inf for zeros), without underflow."""
        if n_max > self.max_index:
            raise HorizonExhausted(f"sequence known only up to n={self.max_index}")
        L = len(self.prefix)
        head = [exact_log(self.prefix[n - 1]) for n in range(start, min(L, n_max) + 1)]
        lo = max(start, L + 1)
        rest = self.tail.log_values(np.arange(lo, n_max + 1)) if n_max >= lo else np.array([])
        return np.concatenate([np.array(head, dtype=float), np.asarray(rest, dtype=float)])

    def extent(self, horizon: int | None = None) -> int:
        H = horizon or default_horizon()
        return int(min(H, self.max_index))

    # serialization --------------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "prefix": [dump_number(v) for v in self.prefix],
            "tail_rule": None if self.tail is None else self.tail.to_dict(),
            "provenance": self.provenance.value,
            "notes": self.notes,
            "witness": None if self.witness is None else self.witness.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ErrorSeq":
        w = d.get("witness")
        witness = None if w is None else WitnessRecord(tuple(w["indices"]), tuple(w["margins"]),
                                                       w["inequality"])
        tail = None if d.get("tail_rule") is None else tail_rule_from_dict(d["tail_rule"])
        return cls(tuple(parse_number(v) for v in d.get("prefix", [])), tail,
                   Provenance(d.get("provenance", "constructed")), d.get("notes", ""), witness)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "ErrorSeq":
        return cls.from_dict(json.loads(text))

    def to_csv(self, n_max: int | None = None) -> str:
        n_max = n_max or len(self.prefix)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "E_n"])
        for n in range(1, n_max + 1):
            w.writerow([n, dump_number(self.value(n))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "ErrorSeq":
        rows = csv_rows(text)
        body = rows[1:] if rows and not rows[0][0].strip().lstrip("-").isdigit() else rows
        idx = [int(r[0]) for r in body]
        if idx != list(range(1, len(idx) + 1)):
            raise ValueError("CSV rows must list n = 1, 2, ... consecutively")
        return cls(tuple(parse_number(r[1]) for r in body), None, Provenance.TABULATED)


def from_rate(rate: RateFn, prefix: Sequence[Number] = ()) -> ErrorSeq:
    """E_n = rate(n) (after an optional explicit prefix)."""
    return ErrorSeq(tuple(prefix), RateTail(rate))


def from_log_rate(psi: RateFn) -> ErrorSeq:
    """E_n = exp(-1/psi(n))."""
    return ErrorSeq((), LogRateTail(psi))


# ---------------------------------------------------------------------------
# constructions


def phi_from_errors(E: ErrorSeq, n_max: int | None = None) -> RateFn:
    """The scale function attached to an error sequence.

    phi(1) = 1; for n >= 2: 1 if E_n >= 1/e, 1/|ln E_n| if 0 < E_n < 1/e,
    and min(phi(n-1), 1/n) if E_n = 0.
    """
    N = n_max or E.extent(min(default_horizon(), 10**5))
    logs = E.log_values(N)
    out: list[float] = [1.0]
    for n in range(2, N + 1):
        le = logs[n - 1]
        if le == -np.inf:
            out.append(min(out[-1], 1.0 / n))
        elif le >= -1.0:
            out.append(1.0)
        else:
            out.append(-1.0 / le)
    tail = None
    if isinstance(E.tail, LogRateTail) and E.tail.psi(N + 1) < 1:
        tail = E.tail.psi
    return TabulatedRate(out, Role.SCALE, tail)


def realize_bernstein(c: ErrorSeq) -> WienerElement:
    """A scalar Wiener element whose E_n equals c_n for every n >= 1.

    The coefficient at frequency n is c_{n-1} - c_n with c_0 := c_1.
    """
    L = len(c.prefix)
    if c.tail is None and (L == 0 or c.prefix[-1] != 0):
        raise ValueError("no evidence that the target tends to zero; add a tail rule")
    if isinstance(c.tail, ProfileTail):
        raise ValueError("a profile tail is only known on finitely many blocks")

    def cval(n):
        return c.value(max(n, 1))

    coeffs = {}
    for n in range(1, L + 1):
        a, b = cval(n - 1), cval(n)
        d = normalize(a - b) if is_exact(a) and is_exact(b) else float(a) - float(b)
        if d:
            coeffs[n] = (d,)
    tail = None
    if c.tail is not None and not isinstance(c.tail, ZeroTail):
        tail = TelescopingTail(L, c, (1,))
    return WienerElement(coeffs, 1, Norm.L1, tail)


def errors_from_wiener(f: WienerElement, n_max: int) -> ErrorSeq:
    """Exact E_1..E_n_max of a Wiener element, continued by its tail sums."""
    prefix = wiener_En_profile(f, n_max)
    tail = WienerTail(f) if f.tail is not None else ZeroTail()
    return ErrorSeq(tuple(prefix), tail, Provenance.COMPUTED)


def geometric_knots(n_max: int, base: int = 4) -> list[int]:
    out, k = [], 1
    while k <= n_max:
        out.append(k)
        k *= base
    return out


def separation_witness(phi: RateFn, phi_prime: RateFn, base: int = 4,
                       horizon: int | None = None) -> ErrorSeq:
    """E_n = exp(-1/phi'(n_i)) on [n_i, n_{i+1}) with n_i = base^i.

    At every knot (E_{n_i})^{phi'(n_i)} = 1/e, while (E_{n_i})^{phi(n_i)}
    = exp(-phi(n_i)/phi'(n_i)) tends to 1 when phi'/phi diverges.
    """
    H = horizon or default_horizon()
    knots = np.array(geometric_knots(H, base), dtype=float)
    ratio_log = phi_prime.log(knots) - phi.log(knots)
    c, cp = phi.asymptotic, phi_prime.asymptotic
    if c is not None and cp is not None:
        diverges = c.compare(cp) > 0
    else:
        diverges = bool(np.all(np.diff(ratio_log) > 0) and ratio_log[-1] - ratio_log[0] > math.log(2))
    if not diverges:
        raise ValueError("phi'/phi does not diverge along the knots")
    tail = StepTail(phi_prime, base)
    margins = np.exp(phi_prime(knots) * tail.log_values(knots))
    witness = WitnessRecord(tuple(int(k) for k in knots), tuple(float(m) for m in margins),
                            "E^phi' at each knot")
    return ErrorSeq((), tail, Provenance.CONSTRUCTED,
                    notes=f"separation witness, knots base {base}", witness=witness)


def separation_margins(E: ErrorSeq, phi: RateFn, n_max: int) -> WitnessRecord:
    """(E_{n_i})^{phi(n_i)} along the knots of a step witness."""
    if not isinstance(E.tail, StepTail):
        raise ValueError("not a separation witness")
    knots = E.tail.knots(n_max)
    logs = E.tail.log_values(np.array(knots))
    vals = np.exp(phi(np.array(knots, dtype=float)) * logs)
    return WitnessRecord(tuple(knots), tuple(float(v) for v in vals), "E^phi at the knots")


def beurling_witness(kappa: RateFn, blocks: int = 3, horizon: int | None = None) -> ErrorSeq:
    """E_n = exp(-1/(h(n) Sigma(kappa)(n))) with h from the separating profile."""
    profile = separating_profile(kappa, blocks, horizon)
    return ErrorSeq((), ProfileTail(profile), Provenance.CONSTRUCTED,
                    notes=f"Beurling witness with {blocks} blocks up to n={profile.extent}")
