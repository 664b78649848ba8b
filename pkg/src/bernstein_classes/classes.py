"""Finite-horizon membership verdicts for the two Bernstein classes.

Second class for a scale function phi: liminf (E_n)^phi(n) < 1.
First class for a weight kappa: sum kappa(n) ln E_n = -inf.

A scan over n <= N can only collect evidence.  Exact answers come from tail
rules whose asymptotic class is known, compared with certified rates.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction

import numpy as np

from ._numbers import exact_log, is_exact
from .error_sequences import (
    ErrorSeq,
    ProfileTail,
    StepTail,
    WitnessRecord,
)
from .rates import (
    RateFn,
    Role,
    default_horizon,
    sigma,
)
from .wiener import MaskedTail, WienerElement, wiener_En

DEFAULT_RHO = 0.5
DEFAULT_WITNESSES = 3


class Status(Enum):
    IN_WITNESSED = "InWitnessed"
    DIVERGENCE_CERTIFIED = "DivergenceCertified"
    CONSISTENT_WITH_NON_MEMBERSHIP = "ConsistentWithNonMembership"
    INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True)
class ClassSpec:
    kind: str  # "second" or "first"
    rate: RateFn

    def __post_init__(self):
        want = {"second": Role.SCALE, "first": Role.WEIGHT}.get(self.kind)
        if want is None:
            raise ValueError("class kind must be 'first' or 'second'")
        if self.rate.role is not want:
            raise ValueError(f"a {self.kind} class needs a {want.value} function")

    def verdict(self, E: ErrorSeq, **config) -> "MembershipVerdict":
        if self.kind == "second":
            return second_class_verdict(E, self.rate, **config)
        return first_class_verdict(E, self.rate, **config)


@dataclass(frozen=True)
class MembershipVerdict:
    status: Status
    horizon: int
    exact_member: bool | None = None
    witness: WitnessRecord | None = None
    margin: float | None = None
    partial_sum: float | None = None
    exact_liminf: float | None = None
    reason: str = ""

    @property
    def is_member(self) -> bool | None:
        return self.exact_member

    def to_dict(self) -> dict:
        return {
            "status": self.status.value,
            "horizon": self.horizon,
            "exact_member": self.exact_member,
            "witness": None if self.witness is None else self.witness.to_dict(),
            "margin": self.margin,
            "partial_sum": self.partial_sum,
            "exact_liminf": self.exact_liminf,
            "reason": self.reason,
        }


def _scan_range(E: ErrorSeq, horizon: int | None) -> int:
    return E.extent(horizon or default_horizon())


def _same_rate(a: RateFn, b: RateFn) -> bool:
    return a.to_dict() == b.to_dict()


def _second_exact(E: ErrorSeq, phi: RateFn) -> tuple[bool | None, float | None, str]:
    tail = E.tail
    if tail is None:
        if E.prefix and E.prefix[-1] == 0:
            return True, 0.0, "eventually zero"
        return None, None, "tabulated data only"
    if tail.eventually_zero:
        return True, 0.0, "eventually zero"
    if isinstance(tail, ProfileTail):
        prof_phi = tail.profile.phi
        if _same_rate(prof_phi, phi) or (
                phi.asymptotic is not None and prof_phi.asymptotic is not None
                and phi.asymptotic.compare(prof_phi.asymptotic) == 0):
            return False, 1.0, "E^Sigma = exp(-1/h) with h unbounded"
        return None, None, "profile tail against an unrelated scale"
    psi = tail.log_rate_class()
    cert = phi.asymptotic
    if psi is None or cert is None:
        return None, None, "no asymptotic class available"
    cmp = cert.compare(psi)
    if cmp > 0:
        return False, 1.0, "phi/psi_E -> 0, so E^phi -> 1"
    if cmp < 0:
        return True, 0.0, "phi/psi_E -> inf"
    liminf = None
    if cert.const is not None and psi.const is not None and not isinstance(tail, StepTail):
        liminf = math.exp(-cert.const / psi.const)
    if isinstance(tail, StepTail) and _same_rate(tail.psi, phi):
        liminf = math.exp(-1.0)
    return True, liminf, "phi comparable to psi_E"


def second_class_verdict(E: ErrorSeq, phi: RateFn, rho: float = DEFAULT_RHO,
                         witnesses: int = DEFAULT_WITNESSES,
                         horizon: int | None = None) -> MembershipVerdict:
    """Scan (E_n)^phi(n) <= rho for n <= N and add the closed-form liminf when available."""
    if not 0 < rho < 1:
        raise ValueError("rho must lie in (0, 1)")
    if phi.role is not Role.SCALE:
        raise ValueError("second class needs a scale function")
    N = _scan_range(E, horizon)
    n = np.arange(1, N + 1, dtype=float)
    with np.errstate(invalid="ignore"):
        expo = phi(n) * E.log_values(N)
    hits = np.flatnonzero(expo <= math.log(rho))
    exact, liminf, reason = _second_exact(E, phi)
    chosen = hits[-witnesses:]
    witness = WitnessRecord(tuple(int(i) + 1 for i in chosen),
                            tuple(float(math.exp(expo[i])) for i in chosen),
                            f"E_n^phi(n) <= {rho}") if len(chosen) else None
    if len(hits) >= witnesses:
        status = Status.IN_WITNESSED
    elif N == 0:
        status = Status.INCONCLUSIVE
    else:
        status = Status.CONSISTENT_WITH_NON_MEMBERSHIP
    return MembershipVerdict(status, N, exact, witness, rho, None, liminf, reason)


def _first_exact(E: ErrorSeq, kappa: RateFn) -> tuple[bool | None, str]:
    tail = E.tail
    if tail is None:
        if E.prefix and E.prefix[-1] == 0:
            return True, "eventually zero"
        return None, "tabulated data only"
    if tail.eventually_zero:
        return True, "eventually zero"
    if isinstance(tail, ProfileTail):
        if _same_rate(tail.profile.kappa, kappa) and all(b.block_sum > 1 for b in tail.profile.blocks):
            return True, "each realized block adds more than 1 to -sum kappa ln E"
        return None, "profile tail against an unrelated weight"
    psi = tail.log_rate_class()
    cert = kappa.asymptotic
    if psi is None or cert is None:
        return None, "no asymptotic class available"
    # -kappa ln E = kappa / psi_E
    if (cert / psi).summable():
        return False, "sum kappa/psi_E converges"
    return True, "sum kappa/psi_E diverges"


def first_class_verdict(E: ErrorSeq, kappa: RateFn,
                        horizon: int | None = None) -> MembershipVerdict:
    """Partial sum S_N = sum_{n<=N} kappa(n) ln E_n plus a closed-form decision when available."""
    if kappa.role is not Role.WEIGHT:
        raise ValueError("first class needs a weight function")
    N = _scan_range(E, horizon)
    n = np.arange(1, N + 1, dtype=float)
    logs = E.log_values(N)
    if np.any(np.isneginf(logs)):
        first_zero = int(np.argmax(np.isneginf(logs))) + 1
        return MembershipVerdict(Status.DIVERGENCE_CERTIFIED, N, True, None, None, -math.inf,
                                 None, f"E vanishes from n={first_zero}")
    with np.errstate(divide="ignore"):
        partial = -math.fsum(np.exp(kappa.log(n) + np.log(-logs)))
    exact, reason = _first_exact(E, kappa)
    if exact is True:
        status = Status.DIVERGENCE_CERTIFIED
    elif exact is False:
        status = Status.CONSISTENT_WITH_NON_MEMBERSHIP
    else:
        status = Status.INCONCLUSIVE
    return MembershipVerdict(status, N, exact, None, None, partial, None, reason)


@dataclass(frozen=True)
class EmbeddingReport:
    second: MembershipVerdict
    first: MembershipVerdict
    violation: bool
    strict_witness: bool

    def to_dict(self) -> dict:
        return {"second": self.second.to_dict(), "first": self.first.to_dict(),
                "violation": self.violation, "strict_witness": self.strict_witness}


def check_sigma_embedding(kappa: RateFn, E: ErrorSeq, rho: float = DEFAULT_RHO,
                          horizon: int | None = None) -> EmbeddingReport:
    """Second-class membership for Sigma(kappa) must imply first-class membership for kappa."""
    phi = E.tail.profile.phi if isinstance(E.tail, ProfileTail) else sigma(kappa, horizon)
    v2 = second_class_verdict(E, phi, rho=rho, horizon=horizon)
    v1 = first_class_verdict(E, kappa, horizon=horizon)
    violation = v2.exact_member is True and v1.exact_member is False
    strict = v1.exact_member is True and v2.exact_member is False
    return EmbeddingReport(v2, v1, violation, strict)


# ---------------------------------------------------------------------------
# constructive split


@dataclass(frozen=True)
class SplitResult:
    f1: WienerElement
    f2: WienerElement
    boundaries: tuple[int, ...]
    witnesses1: WitnessRecord
    witnesses2: WitnessRecord
    identity_ok: bool
    horizon_exhausted: bool = False


def _log_E(f: WienerElement, i: int) -> float:
    return exact_log(wiener_En(f, i))


def _restrict(f: WienerElement, bands: list[tuple[int, float]]) -> WienerElement:
    def owned(n):
        return any(lo <= abs(n) < hi for lo, hi in bands)

    coeffs = {n: v for n, v in f.coefficients.items() if owned(n)}
    tail = None
    if f.tail is not None:
        tail = MaskedTail(f.tail, bands)
    return WienerElement(coeffs, f.dimension, f.target_norm, tail)


def markushevich_split(f: WienerElement, phi: RateFn, rho: float = DEFAULT_RHO,
                       boundaries: int = 24, horizon: int | None = None) -> SplitResult:
    """Split f = f1 + f2 along alternating frequency bands [N_j, N_{j+1}).

    N_0 = 0, N_1 = 1 and N_{j+1} is the least N > N_j with
    E_{N-1}(f) <= rho^(1/phi(N_j)).  The part owning the band that ends at
    N_j then has E_{N_j}(part) <= rho^(1/phi(N_j)), a second-class witness
    with margin rho at every boundary.
    """
    if not 0 < rho < 1:
        raise ValueError("rho must lie in (0, 1)")
    H = horizon or default_horizon()
    if f.tail is None:
        zero = WienerElement({}, f.dimension, f.target_norm)
        empty = WitnessRecord((), (), "finite support")
        return SplitResult(f, zero, (0,), empty, empty, True)
    log_rho = math.log(rho)
    Ns = [0, 1]
    exhausted = False
    while len(Ns) < boundaries + 1:
        Nj = Ns[-1]
        target = log_rho / phi(Nj)

        def ok(N):
            return _log_E(f, N - 1) <= target

        lo, step = Nj + 1, 1
        if ok(lo):
            Ns.append(lo)
            continue
        hi = None
        while lo + step <= H:
            if ok(lo + step):
                hi = lo + step
                break
            lo, step = lo + step, step * 2
        if hi is None:
            exhausted = True
            break
        left = lo + 1
        while left < hi:
            mid = (left + hi) // 2
            if ok(mid):
                hi = mid
            else:
                left = mid + 1
        Ns.append(hi)
    bands = [(Ns[j], Ns[j + 1]) for j in range(len(Ns) - 1)]
    last = (Ns[-1], math.inf)
    own1 = [b for j, b in enumerate(bands) if j % 2 == 0]
    own2 = [b for j, b in enumerate(bands) if j % 2 == 1]
    (own1 if len(bands) % 2 == 0 else own2).append(last)
    f1, f2 = _restrict(f, own1), _restrict(f, own2)

    def witnesses(part, idx):
        ind, marg = [], []
        for j in idx:
            N = Ns[j]
            if N == 0:
                continue
            le = _log_E(part, N)
            if le <= log_rho / phi(N) + 1e-12 * abs(log_rho / phi(N)):
                ind.append(N)
                marg.append(math.exp(phi(N) * le) if le > -math.inf else 0.0)
        return WitnessRecord(tuple(ind), tuple(marg), f"E_N(part)^phi(N) <= {rho}")

    w1 = witnesses(f1, range(1, len(Ns), 2))
    w2 = witnesses(f2, range(2, len(Ns), 2))
    identity = _identity_holds(f, f1, f2, Ns[-1] + 5)
    return SplitResult(f1, f2, tuple(Ns), w1, w2, identity, exhausted)


def _identity_holds(f: WienerElement, f1: WienerElement, f2: WienerElement, upto: int) -> bool:
    for n in range(-upto, upto + 1):
        a, b, c = f.coefficient(n), f1.coefficient(n), f2.coefficient(n)
        for x, y, z in zip(a, b, c):
            if is_exact(x) and is_exact(y) and is_exact(z):
                if Fraction(x) != Fraction(y) + Fraction(z):
                    return False
            elif abs(float(x) - float(y) - float(z)) > 1e-15 * max(1.0, abs(float(x))):
                return False
        if any(y != 0 and z != 0 for y, z in zip(b, c)):
            return False
    # tail masses beyond the checked range must add up as well
    for i in (upto, 2 * upto):
        a, b, c = wiener_En(f, i), wiener_En(f1, i), wiener_En(f2, i)
        if is_exact(a) and is_exact(b) and is_exact(c):
            if Fraction(a) != Fraction(b) + Fraction(c):
                return False
        elif abs(float(a) - float(b) - float(c)) > 1e-12 * max(1e-300, float(a)):
            return False
    return True
