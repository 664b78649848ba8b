"""Covers, box counts and gauge sums for graphs and level sets of sampled functions.

Every quantity here is one-sided: greedy covers give upper bounds on covering
numbers and box sums give upper estimates of Hausdorff premeasures.  Graph
points use the max metric max(|s - s'|, |f(s) - f(s')|).
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Sequence

import numpy as np

from .error_sequences import ErrorSeq, GeometricTail, RateTail, ZeroTail
from .minimax import Approximation, Circle, MarkovProfile, SampledFn
from ._numbers import exact_log
from .rates import Gauge, PowerLog, RateFn


class ScaleOutOfResolution(ValueError):
    pass


class DegenerateLevel(ValueError):
    """f is flat at the requested level over a whole grid cell."""


class UnverifiedClaim(ValueError):
    pass


MAX_CELLS = 10**7
PROBES = 5
PROBE_CHUNK = 2**14


# ---------------------------------------------------------------------------
# point clouds and covers


@dataclass(frozen=True)
class PointCloud:
    points: np.ndarray  # shape (N, D)
    metric: str = "max"  # "max" for graph points, "line" for scalar points

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.shape[0] == 0 or not np.all(np.isfinite(pts)):
            raise ValueError("a point cloud must be finite and nonempty")
        if self.metric == "line" and pts.shape[1] != 1:
            raise ValueError("metric 'line' needs scalar points")
        if self.metric not in ("max", "line"):
            raise ValueError(f"unknown metric {self.metric!r}")
        object.__setattr__(self, "points", pts)

    @classmethod
    def graph(cls, f: SampledFn) -> "PointCloud":
        return cls(np.column_stack([f.grid, f.values]), "max")

    @classmethod
    def line(cls, x: Sequence[float]) -> "PointCloud":
        return cls(np.asarray(x, dtype=float), "line")

    def distances_to(self, i: int) -> np.ndarray:
        return np.max(np.abs(self.points - self.points[i]), axis=1)


@dataclass(frozen=True)
class CoverReport:
    scale: float
    greedy: int
    packing: int
    exact: bool = False
    psi_sum: float | None = None
    diameters: tuple[float, ...] = ()

    def __post_init__(self):
        if self.packing > self.greedy:
            raise AssertionError("packing count exceeds cover count")


def _sweep_count(intervals: Sequence[tuple[float, float]], eps: float) -> int:
    """Minimum number of closed intervals of length 2 eps covering a union of closed intervals."""
    ivs = sorted((float(a), float(b)) for a, b in intervals)
    width = 2 * eps
    count, reach = 0, -math.inf
    for a, b in ivs:
        if b <= reach:
            continue
        start = a if a > reach else reach
        need = math.ceil((b - start) / width * (1 - 1e-12))
        if a > reach:
            need = max(1, need)
        count += need
        reach = start + need * width
    return count


def covering_number(cloud: PointCloud | Sequence[tuple[float, float]], eps: float) -> CoverReport:
    """Cover bracket at radius eps with closed balls.

    Scalar clouds and unions of intervals get the exact count from a left to
    right sweep.  Other clouds get a farthest-point traversal: centers more
    than eps apart form the greedy cover, centers more than 2 eps apart a
    packing whose size is a lower bound.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    if not isinstance(cloud, PointCloud):
        n = _sweep_count(cloud, eps)
        return CoverReport(eps, n, n, True)
    if cloud.points.shape[1] == 1:
        x = cloud.points[:, 0]
        n = _sweep_count([(v, v) for v in x], eps)
        return CoverReport(eps, n, n, True)
    radii = farthest_point_radii(cloud, eps)
    return CoverReport(eps, 1 + int(np.sum(radii > eps)), 1 + int(np.sum(radii > 2 * eps)))


def farthest_point_radii(cloud: PointCloud, eps: float) -> np.ndarray:
    """Insertion radii of a farthest-point traversal, stopped once they fall to eps."""
    d = cloud.distances_to(0)
    radii = []
    while True:
        i = int(np.argmax(d))
        r = float(d[i])
        if r <= eps:
            break
        radii.append(r)
        d = np.minimum(d, cloud.distances_to(i))
    return np.asarray(radii)


def cover_series(cloud: PointCloud, scales: Sequence[float]) -> list[CoverReport]:
    """Reports for several radii from one traversal, so counts are monotone in eps."""
    if cloud.points.shape[1] == 1:
        return [covering_number(cloud, e) for e in scales]
    radii = farthest_point_radii(cloud, min(scales))
    return [CoverReport(e, 1 + int(np.sum(radii > e)), 1 + int(np.sum(radii > 2 * e)))
            for e in scales]


def reports_to_csv(reports: Sequence[CoverReport], bounds: Sequence[float] | None = None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["scale", "count", "packing", "sum", "bound"])
    for j, r in enumerate(reports):
        w.writerow([repr(r.scale), r.greedy, r.packing,
                    "" if r.psi_sum is None else repr(r.psi_sum),
                    "" if bounds is None else repr(bounds[j])])
    return buf.getvalue()


def psi_sum(diameters: Sequence[float], psi: Gauge) -> float:
    return float(np.sum(psi(np.asarray(diameters, dtype=float))))


# ---------------------------------------------------------------------------
# box dimension


@dataclass(frozen=True)
class BoxDimension:
    exponents: tuple[int, ...]
    counts: tuple[int, ...]
    slope: float
    intercept: float
    residual: float

    def to_dict(self) -> dict:
        return {"exponents": list(self.exponents), "counts": list(self.counts),
                "slope": self.slope, "intercept": self.intercept, "residual": self.residual}


def graph_box_count(f: SampledFn, eps: float) -> int:
    """Boxes of side eps (max metric) meeting the piecewise linear graph of f.

    Each grid cell counts toward the column of its left sample; where the
    graph touches a box edge exactly, the box beyond the edge may be counted too.
    """
    x = f.grid - f.grid[0]
    y = f.scalar
    col = np.floor(x / eps).astype(np.int64)
    ncol = int(col[-1]) + 1
    # the cell between consecutive samples spans the range of its endpoints
    cmin = np.full(ncol, np.inf)
    cmax = np.full(ncol, -np.inf)
    np.minimum.at(cmin, col[:-1], np.minimum(y[:-1], y[1:]))
    np.maximum.at(cmax, col[:-1], np.maximum(y[:-1], y[1:]))
    cmin[col[-1]] = min(cmin[col[-1]], y[-1])
    cmax[col[-1]] = max(cmax[col[-1]], y[-1])
    ok = np.isfinite(cmin)
    return int(np.sum(np.floor(cmax[ok] / eps) - np.floor(cmin[ok] / eps) + 1))


def box_dimension_profile(f: SampledFn, exponents: Sequence[int]) -> BoxDimension:
    """Least-squares slope of ln N(2^-j) against j ln 2 for the given exponents j."""
    exps = sorted(int(j) for j in exponents)
    if len(exps) < 4 or exps[-1] - exps[0] < 3:
        raise ValueError("need at least 4 scales spanning 3 octaves")
    spacing = float(np.max(np.diff(f.grid)))
    if 2.0 ** -exps[-1] < spacing:
        raise ScaleOutOfResolution(
            f"scale 2^-{exps[-1]} is below the grid spacing {spacing:.3g}")
    counts = [graph_box_count(f, 2.0**-j) for j in exps]
    xs = np.array(exps, dtype=float) * math.log(2)
    ys = np.log(np.array(counts, dtype=float))
    (slope, intercept), res, *_ = np.polyfit(xs, ys, 1, full=True)
    residual = float(math.sqrt(res[0] / len(xs))) if len(res) else 0.0
    return BoxDimension(tuple(exps), tuple(counts), float(slope), float(intercept), residual)


# ---------------------------------------------------------------------------
# the tube cover of a graph


@dataclass(frozen=True)
class TubeCover:
    gamma: float
    markov: float
    deviation: float
    lipschitz: float
    cells: int
    diameters: tuple[float, ...]
    psi_sum: float
    bound: float
    cover_constant: float
    degenerate: bool = False

    @property
    def holds(self) -> bool:
        return self.psi_sum <= self.bound

    def to_dict(self) -> dict:
        return {"gamma": self.gamma, "markov": self.markov, "deviation": self.deviation,
                "lipschitz": self.lipschitz, "cells": self.cells,
                "max_diameter": max(self.diameters, default=0.0), "psi_sum": self.psi_sum,
                "bound": self.bound, "cover_constant": self.cover_constant,
                "degenerate": self.degenerate, "holds": self.holds}


def witnessed_lipschitz(grid: np.ndarray, values: np.ndarray, circle: bool = False,
                        period: float = 2 * math.pi) -> float:
    values = values if values.ndim == 2 else values[:, None]
    dx = np.diff(grid)
    dy = np.max(np.abs(np.diff(values, axis=0)), axis=1)
    lip = float(np.max(dy / dx)) if len(dx) else 0.0
    if circle:
        wrap = period - grid[-1] + grid[0]
        lip = max(lip, float(np.max(np.abs(values[0] - values[-1]))) / wrap)
    return lip


def thm215_cover(f: SampledFn, approximant: Approximation | Callable, markov: float,
                 gamma: float, psi: Gauge, k: float = 1.0) -> TubeCover:
    """Cover the graph of f by tubes of half-width gamma around the approximant g.

    The domain is covered by closed balls of radius gamma; over ball j the
    tube is {(m, b): |b - g(m)| <= gamma}.  With Lip(g) <= markov each tube
    has diameter at most 2 (markov + 1) gamma, the +1 accounting for the
    tube width.  The closed-form bound is C (2M')^k psi(2M' gamma) with
    M' = markov + 1 and C = L/2 + gamma, where L is the length of the domain
    (so the number of balls is at most C / gamma).
    """
    if k < 1:
        raise ValueError("a one-dimensional domain needs k >= 1")
    circle = isinstance(f.domain, Circle)
    length = f.domain.period if circle else f.domain.b - f.domain.a
    g = np.asarray(approximant(f.grid), dtype=float)
    g = g if g.ndim == 2 else g[:, None]
    deviation = float(np.max(np.abs(f.values - g)))
    # samples carry rounding of order eps * |f|
    slack = 8 * np.finfo(float).eps * max(1.0, float(np.max(np.abs(f.values))))
    if gamma < deviation - slack:
        raise UnverifiedClaim(f"gamma={gamma} is below the sampled deviation {deviation}")
    lip = witnessed_lipschitz(f.grid, g, circle, length)
    if markov < lip * (1 - 1e-9):
        raise UnverifiedClaim(f"markov={markov} is below the witnessed Lipschitz bound {lip}")
    if gamma == 0:
        return TubeCover(0.0, markov, deviation, lip, 0, (), 0.0, 0.0, length / 2, True)
    if gamma > 1:
        raise ValueError("gamma must not exceed 1")
    m_prime = markov + 1
    psik = psi.psi_k(k)
    count = max(1, math.ceil(length / (2 * gamma) * (1 - 1e-12)))
    if count > MAX_CELLS:
        raise ValueError(f"gamma={gamma} needs {count} balls (limit {MAX_CELLS})")
    step = length / count
    start = 0.0 if circle else f.domain.a
    # assign each sample to its ball; the balls tile the domain
    offset = f.grid - start
    cell = np.minimum((offset / step).astype(np.int64), count - 1)
    if np.any(np.abs(offset - (cell + 0.5) * step) > gamma * (1 + 1e-12)):
        raise AssertionError("a sample lies outside its ball")
    d = g.shape[1]
    gmin = np.full((count, d), np.inf)
    gmax = np.full((count, d), -np.inf)
    np.minimum.at(gmin, cell, g)
    np.maximum.at(gmax, cell, g)
    # probe g on every ball as well, so balls without samples are measured too
    for lo in range(0, count, PROBE_CHUNK):
        hi = min(count, lo + PROBE_CHUNK)
        pts = start + step * (np.arange(lo, hi)[:, None] + np.linspace(0, 1, PROBES)[None, :])
        vals = np.asarray(approximant(pts.ravel()), dtype=float).reshape(hi - lo, PROBES, d)
        gmin[lo:hi] = np.minimum(gmin[lo:hi], vals.min(axis=1))
        gmax[lo:hi] = np.maximum(gmax[lo:hi], vals.max(axis=1))
    value_diam = np.max(gmax - gmin, axis=1) + 2 * gamma
    diameters = np.maximum(step, value_diam)
    worst = float(np.max(diameters))
    if worst > 2 * m_prime * gamma * (1 + 1e-9):
        raise AssertionError(f"a tube has diameter {worst} above 2 M' gamma")
    total = psi_sum(diameters, psik)
    C = length / 2 + gamma
    bound = C * (2 * m_prime) ** k * float(psi(2 * m_prime * gamma))
    return TubeCover(gamma, markov, deviation, lip, count, tuple(diameters.tolist()), total, bound, C)


def example_L(L: float, rho: float, k: float = 1.0) -> float:
    """(L / |ln rho|)^k for the logarithmic gauge min(|ln t|^-k, 1)."""
    if not 0 < rho < 1:
        raise ValueError("rho must lie in (0, 1)")
    return (L / abs(math.log(rho))) ** k


def gauge_condition(phi: RateFn, markov: Sequence[float], psi: Gauge, k: float, rho: float) -> np.ndarray:
    """M_n^k psi(M_n rho^(1/phi(n))) for n = 1..len(markov), in log space."""
    M = np.asarray(markov, dtype=float)
    n = np.arange(1, len(M) + 1, dtype=float)
    log_arg = np.log(M) + np.log(rho) / phi(n)
    return np.exp(k * np.log(M) + psi.log_u(-log_arg))


# ---------------------------------------------------------------------------
# growth conditions on Markov constants


class Verdict(Enum):
    HOLDS = "Holds"
    FAILS = "Fails"
    ZERO = "Zero"
    POSITIVE = "Positive"
    EMPIRICAL = "Empirical"


@dataclass(frozen=True)
class ConditionResult:
    name: str
    values: tuple[float, ...]
    verdict: Verdict
    certified: bool
    limit: float | None = None

    def to_dict(self) -> dict:
        return {"name": self.name, "verdict": self.verdict.value, "certified": self.certified,
                "limit": self.limit, "last": self.values[-1] if self.values else None,
                "max": max(self.values) if self.values else None}


def _growth_log_class(M: PowerLog) -> PowerLog | None:
    """Class of ln M_n for a growth class M (negative exponents)."""
    if M.rate < -1e-12:
        return PowerLog(-1.0, 0.0, 0.0, -M.rate)
    if M.a < -1e-12:
        return PowerLog(0.0, -1.0, 0.0, -M.a)
    return None


def condition_checks(phi: RateFn, markov: MarkovProfile, s: float) -> list[ConditionResult]:
    """The sequences phi M, phi ln M and M / n^s with verdicts.

    Verdicts are certified when both phi and the Markov profile carry an
    asymptotic class; otherwise the sequences are reported as Empirical.
    """
    M = np.asarray(markov.values, dtype=float)
    n = np.arange(1, len(M) + 1, dtype=float)
    ph = phi(n)
    seqs = {
        "phi*M": ph * M,
        "phi*lnM": ph * np.log(M),
        "M/n^s": M / n**s,
    }
    cert, pcls = markov.certificate, phi.asymptotic
    out = []
    for name, vals in seqs.items():
        verdict, certified, limit = Verdict.EMPIRICAL, False, None
        cls = None
        if cert is not None:
            if name == "phi*M" and pcls is not None:
                cls = pcls * cert
            elif name == "phi*lnM" and pcls is not None:
                lc = _growth_log_class(cert)
                if lc is not None:
                    cls = pcls * lc
                elif cert.bounded():
                    cls = pcls
            elif name == "M/n^s":
                cls = cert / PowerLog(-s, 0.0, 0.0, 1.0)
        if cls is not None:
            certified = True
            if name == "phi*lnM":
                verdict = Verdict.HOLDS if cls.tends_to_zero() else Verdict.FAILS
                limit = 0.0 if cls.tends_to_zero() else None
            else:
                verdict = Verdict.HOLDS if cls.bounded() else Verdict.FAILS
                if cls.tends_to_zero():
                    limit = 0.0
                elif cls.bounded():
                    limit = cls.const
            if name == "M/n^s" and verdict is Verdict.HOLDS:
                limit = float(np.max(vals))
        out.append(ConditionResult(name, tuple(float(v) for v in vals), verdict, certified, limit))
    return out


# ---------------------------------------------------------------------------
# the liminf check for first-class elements


@dataclass(frozen=True)
class LiminfReport:
    values: tuple[float, ...]
    running_min: tuple[float, ...]
    verdict: Verdict
    certified: bool
    limit: float | None

    def to_dict(self) -> dict:
        return {"verdict": self.verdict.value, "certified": self.certified, "limit": self.limit,
                "running_min": float(self.running_min[-1]) if self.running_min else None}


def _error_class(E: ErrorSeq) -> PowerLog | None:
    t = E.tail
    if isinstance(t, GeometricTail):
        ratio = exact_log(t.ratio)
        const = math.exp(exact_log(t.first) - t.start * ratio)
        return PowerLog(0.0, 0.0, -ratio, const)
    if isinstance(t, RateTail):
        return t.rate.asymptotic
    return None


def _gauge_of_class(psi: Gauge, x: PowerLog) -> PowerLog | None:
    """Class of psi(x_n) for x_n -> 0 of class x."""
    p = dict(psi.params)
    if psi.kind == "power":
        return x.power(p["alpha"] + psi.extra_power)
    if psi.kind == "log" and psi.extra_power == 0:
        if x.rate > 1e-12:
            return PowerLog(p["k"], 0.0, 0.0, x.rate ** -p["k"])
        if x.a > 1e-12:
            return PowerLog(0.0, p["k"], 0.0, x.a ** -p["k"])
    return None


def lemma51_check(E: ErrorSeq, psi: Gauge, s: float = 1.0, b: Callable | None = None,
                  b_class: PowerLog | None = None, n_max: int = 10**4) -> LiminfReport:
    """n^s psi(b_n E_n) and its running minimum; default b_n = 4 n^s.

    A custom b must come with ``b_class`` (its growth class) for a certified
    verdict; the series of ln(b_n)/n^2 converges for every power-log class.
    """
    n_max = min(n_max, E.max_index)
    n = np.arange(1, n_max + 1, dtype=float)
    if b is None:
        log_b = math.log(4) + s * np.log(n)
        b_class = PowerLog(-s, 0.0, 0.0, 4.0)
    else:
        log_b = np.log(np.asarray(b(n), dtype=float))
    log_E = E.log_values(n_max)
    with np.errstate(invalid="ignore"):
        log_vals = s * np.log(n) + psi.log_u(-(log_b + log_E))
    vals = np.exp(log_vals)
    run = np.minimum.accumulate(vals)
    if isinstance(E.tail, ZeroTail) or (E.tail is None and E.prefix and E.prefix[-1] == 0):
        return LiminfReport(tuple(vals), tuple(run), Verdict.ZERO, True, 0.0)
    ecls = _error_class(E)
    if ecls is not None and b_class is not None and b_class.rate == 0:
        inner = _gauge_of_class(psi, ecls * b_class)
        if inner is not None:
            total = inner * PowerLog(-s, 0.0, 0.0, 1.0)
            if total.tends_to_zero():
                return LiminfReport(tuple(vals), tuple(run), Verdict.ZERO, True, 0.0)
            limit = total.const if total.bounded() else math.inf
            return LiminfReport(tuple(vals), tuple(run), Verdict.POSITIVE, True, limit)
    return LiminfReport(tuple(vals), tuple(run), Verdict.EMPIRICAL, False, float(run[-1]))


# ---------------------------------------------------------------------------
# level sets and the coarea envelope


@dataclass(frozen=True)
class LevelSetEstimate:
    level: float
    components: tuple[tuple[float, float], ...]
    pieces: int
    psi_sum: float
    delta: float


def _crossings(f: SampledFn, c: float) -> list[tuple[float, float]]:
    y = f.scalar - c
    x = f.grid
    flat = (y[:-1] == 0) & (y[1:] == 0)
    if np.any(flat):
        raise DegenerateLevel(f"f equals {c} on a grid cell")
    cells = np.flatnonzero(y[:-1] * y[1:] < 0)
    pieces = [(float(x[i]), float(x[i + 1])) for i in cells]
    pieces += [(float(v), float(v)) for v in x[y == 0]]
    pieces.sort()
    merged: list[tuple[float, float]] = []
    for a, b in pieces:
        if merged and a <= merged[-1][1]:
            merged[-1] = (merged[-1][0], max(merged[-1][1], b))
        else:
            merged.append((a, b))
    return merged


def level_set_measure(f: SampledFn, c: float, psi: Gauge, k: float = 1.0, d: int = 1,
                      delta: float | None = None) -> LevelSetEstimate:
    """psi_{k,d}-sum over a delta-cover of the grid cells where f crosses c."""
    if d != 1 or f.dimension != 1:
        raise ValueError("level sets are implemented for scalar functions")
    delta = float(np.max(np.diff(f.grid))) if delta is None else delta
    gauge = psi.psi_kd(k, d)
    comps = _crossings(f, c)
    total, pieces = 0.0, 0
    for a, b in comps:
        count = max(1, math.ceil((b - a) / delta * (1 - 1e-12)))
        total += count * float(gauge((b - a) / count))
        pieces += count
    return LevelSetEstimate(c, tuple(comps), pieces, total, delta)


@dataclass(frozen=True)
class CoareaReport:
    lhs: float
    rhs: float
    ratio: float
    lipschitz: float
    levels: int
    degenerate_levels: tuple[float, ...]
    constant: float = 1.0

    def to_dict(self) -> dict:
        return {"lhs": self.lhs, "rhs": self.rhs, "ratio": self.ratio,
                "lipschitz": self.lipschitz, "levels": self.levels,
                "degenerate_levels": list(self.degenerate_levels), "constant": self.constant}


def coarea_check(f: SampledFn, psi: Gauge, sigma: Gauge | None = None, levels: int = 256,
                 constant: float = 1.0) -> CoareaReport:
    """Compare the integral over c of the level-set psi-sums with const * Lip * sigma-sum of the domain.

    The level integral is a midpoint sum over ``levels`` equal slices of the
    range; the domain is covered by its grid cells; sigma defaults to t psi(t).
    Degenerate (flat) levels are listed and left out of the integral.
    """
    sigma = psi.times_power(1.0) if sigma is None else sigma
    y = f.scalar
    lo, hi = float(np.min(y)), float(np.max(y))
    h = np.diff(f.grid)
    delta = float(np.max(h))
    lip = witnessed_lipschitz(f.grid, y)
    lhs, degenerate = 0.0, []
    if hi > lo:
        dc = (hi - lo) / levels
        for j in range(levels):
            c = lo + (j + 0.5) * dc
            try:
                lhs += level_set_measure(f, c, psi, 1.0, 1, delta).psi_sum * dc
            except DegenerateLevel:
                degenerate.append(c)
    rhs = constant * lip * float(np.sum(sigma(h)))
    ratio = lhs / rhs if rhs > 0 else (0.0 if lhs == 0 else math.inf)
    return CoareaReport(lhs, rhs, ratio, lip, levels, tuple(degenerate), constant)
