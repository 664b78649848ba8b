"""Uniform-norm approximation on sampled data.

Best approximation on a grid by algebraic polynomials (Chebyshev basis on an
interval) or trigonometric polynomials (on the circle), error profiles E_n,
Markov constants and Bernstein's lacunary nowhere-differentiable function.
All sup norms are over the stored grid.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from fractions import Fraction
from enum import Enum
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import chebyshev as C
from scipy.optimize import linprog

from ._numbers import csv_rows
from .error_sequences import ErrorSeq, Provenance
from .rates import PowerLog

TWO_PI = 2 * math.pi


class Basis(Enum):
    CHEBYSHEV = "chebyshev"
    TRIG = "trig"


@dataclass(frozen=True)
class Interval:
    a: float = -1.0
    b: float = 1.0

    def __post_init__(self):
        if not self.a < self.b:
            raise ValueError("interval needs a < b")

    def contains(self, x: np.ndarray) -> bool:
        return bool(np.all((x >= self.a) & (x <= self.b)))

    def to_unit(self, x):
        return (2 * np.asarray(x, dtype=float) - (self.a + self.b)) / (self.b - self.a)


@dataclass(frozen=True)
class Circle:
    period: float = TWO_PI

    def contains(self, x: np.ndarray) -> bool:
        return bool(np.all((x >= 0) & (x < self.period)))


class IllConditioned(RuntimeWarning):
    pass


@dataclass(frozen=True)
class SampledFn:
    domain: Interval | Circle
    grid: np.ndarray
    values: np.ndarray  # shape (G, d)
    name: str = ""

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if grid.ndim != 1 or len(grid) < 2:
            raise ValueError("need at least two grid points")
        if np.any(np.diff(grid) <= 0):
            raise ValueError("grid must be strictly increasing")
        if not self.domain.contains(grid):
            raise ValueError("grid leaves the domain")
        if values.shape[0] != len(grid) or not np.all(np.isfinite(values)):
            raise ValueError("values must be finite, one row per grid point")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)

    @property
    def dimension(self) -> int:
        return self.values.shape[1]

    @property
    def scalar(self) -> np.ndarray:
        if self.dimension != 1:
            raise ValueError("function is vector valued")
        return self.values[:, 0]

    @classmethod
    def from_function(cls, fn: Callable, domain: Interval | Circle, size: int,
                      spacing: str = "uniform", name: str = "") -> "SampledFn":
        if isinstance(domain, Circle):
            grid = np.arange(size) * (domain.period / size)
        elif spacing == "chebyshev":
            t = np.cos(np.pi * np.arange(size - 1, -1, -1) / (size - 1))
            grid = domain.a + (t + 1) * (domain.b - domain.a) / 2
            grid[0], grid[-1] = domain.a, domain.b
        else:
            grid = np.linspace(domain.a, domain.b, size)
        return cls(domain, grid, np.asarray(fn(grid), dtype=float), name)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x"] + [f"v_{j + 1}" for j in range(self.dimension)])
        for x, row in zip(self.grid, self.values):
            w.writerow([repr(float(x))] + [repr(float(v)) for v in row])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, domain: Interval | Circle | None = None, name: str = "") -> "SampledFn":
        rows = csv_rows(text)
        body = rows[1:] if rows and not _is_float(rows[0][0]) else rows
        data = np.array([[float(v) for v in r] for r in body])
        grid, values = data[:, 0], data[:, 1:]
        if domain is None:
            domain = Interval(float(grid[0]), float(grid[-1]))
        return cls(domain, grid, values, name)


def _is_float(s: str) -> bool:
    try:
        float(s)
        return True
    except ValueError:
        return False


# ---------------------------------------------------------------------------
# generators


def chebyshev_T(m: int, size: int = 2001) -> SampledFn:
    return SampledFn.from_function(lambda x: np.cos(m * np.arccos(np.clip(x, -1, 1))),
                                   Interval(), size, name=f"T_{m}")


def absolute_value(size: int = 4001) -> SampledFn:
    return SampledFn.from_function(np.abs, Interval(), size, name="abs")


def bernstein_F(n: int) -> int:
    """F(0) = 1, F(n+1) = 2^F(n)."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    if n > 5:
        raise ValueError("F(6) has about 10^19728 digits")
    F = 1
    for _ in range(n):
        F = 1 << F
    return F


MAX_TERMS = 4  # the fifth term is below 2^-65536


def bernstein_nondiff(x, term_budget: int = MAX_TERMS):
    """Partial sum of cos(F(n) arccos x) / F(n) over n = 1..min(term_budget, 4)."""
    if term_budget < 1:
        raise ValueError("term_budget must be >= 1")
    arr = np.asarray(x, dtype=float)
    if np.any(np.abs(arr) > 1):
        raise ValueError("x must lie in [-1, 1]")
    theta = np.arccos(arr)
    total = np.zeros_like(theta)
    for n in range(1, min(term_budget, MAX_TERMS) + 1):
        F = bernstein_F(n)
        term = np.cos(F * theta)
        # F(n) is even, so both endpoints give cos = 1 exactly
        term = np.where(np.abs(arr) == 1, 1.0, term)
        total = total + term / F
    return float(total) if total.ndim == 0 else total


def bernstein_nondiff_remainder_log2(term_budget: int) -> int:
    """e with sum_{n > budget} 1/F(n) <= 2^e, namely e = 1 - F(budget)."""
    budget = min(term_budget, MAX_TERMS)
    return 1 - bernstein_F(budget)


def bernstein_nondiff_sampled(size: int = 2**18) -> SampledFn:
    return SampledFn.from_function(bernstein_nondiff, Interval(), size, name="bernstein-nondiff")


def bernstein_nondiff_circle(size: int = 2**16, offset: float = 0.5) -> SampledFn:
    """t -> f(cos t) on the circle, a lacunary cosine series; offset avoids aliasing nodes."""
    grid = (np.arange(size) + offset) * (TWO_PI / size)
    theta_vals = sum(np.cos(bernstein_F(n) * grid) / bernstein_F(n) for n in range(1, MAX_TERMS + 1))
    return SampledFn(Circle(), grid, theta_vals, "bernstein-nondiff-circle")


@dataclass(frozen=True)
class LacunaryTruncation:
    """Terms of t -> f(cos t) with F(n) <= degree, a trigonometric polynomial.

    ``deviation`` is the sum of dropped terms up to the fourth, rounded up;
    the rest of the series is below 2^-65535, far under double precision.
    """

    degree: int
    terms: tuple[int, ...]

    @classmethod
    def of_degree(cls, degree: int) -> "LacunaryTruncation":
        return cls(degree, tuple(n for n in range(1, MAX_TERMS + 1) if bernstein_F(n) <= degree))

    @property
    def deviation(self) -> float:
        dropped = [n for n in range(1, MAX_TERMS + 1) if n not in self.terms]
        if not dropped:
            return 0.0
        return math.nextafter(float(sum(Fraction(1, bernstein_F(n)) for n in dropped)), math.inf)

    @property
    def coefficient_sum(self) -> float:
        return float(sum(1.0 / bernstein_F(n) for n in self.terms))

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return sum((np.cos(bernstein_F(n) * t) / bernstein_F(n) for n in self.terms),
                   np.zeros_like(t))


# ---------------------------------------------------------------------------
# design matrices


def basis_size(basis: Basis, n: int) -> int:
    return n + 1 if basis is Basis.CHEBYSHEV else 2 * n + 1


def design(basis: Basis, x: np.ndarray, n: int, domain: Interval | Circle) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if basis is Basis.CHEBYSHEV:
        if not isinstance(domain, Interval):
            raise ValueError("the Chebyshev basis lives on an interval")
        return C.chebvander(domain.to_unit(x), n)
    cols = [np.ones_like(x)]
    for k in range(1, n + 1):
        cols += [np.cos(k * x), np.sin(k * x)]
    return np.column_stack(cols)


def design_derivative(basis: Basis, x: np.ndarray, n: int, domain: Interval | Circle) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if basis is Basis.CHEBYSHEV:
        t = domain.to_unit(x)
        out = np.zeros((len(x), n + 1))
        for k in range(1, n + 1):
            e = np.zeros(k + 1)
            e[k] = 1
            out[:, k] = C.chebval(t, C.chebder(e)) * 2 / (domain.b - domain.a)
        return out
    cols = [np.zeros_like(x)]
    for k in range(1, n + 1):
        cols += [-k * np.sin(k * x), k * np.cos(k * x)]
    return np.column_stack(cols)


# ---------------------------------------------------------------------------
# best approximation


@dataclass(frozen=True)
class Approximation:
    basis: Basis
    degree: int
    domain: Interval | Circle
    coefficients: np.ndarray  # shape (m, d)
    error: float
    errors: tuple[float, ...]
    method: str
    tag: str | None
    alternation: tuple[int, ...]
    warnings: tuple[str, ...] = ()

    def __call__(self, x) -> np.ndarray:
        return design(self.basis, x, self.degree, self.domain) @ self.coefficients


def _sign_runs(r: np.ndarray, circle: bool) -> list[int]:
    """Index of max |r| within each maximal run of constant sign."""
    s = np.sign(r)
    nz = np.flatnonzero(s)
    if len(nz) == 0:
        return []
    picks = []
    start = nz[0]
    cur = s[start]
    best = start
    for i in nz[1:]:
        if s[i] != cur:
            picks.append(best)
            cur, best = s[i], i
        elif abs(r[i]) > abs(r[best]):
            best = i
    picks.append(best)
    if circle and len(picks) > 1 and s[picks[0]] == s[picks[-1]]:
        a, b = picks[0], picks[-1]
        keep = a if abs(r[a]) >= abs(r[b]) else b
        picks = [keep] + picks[1:-1] if keep == a else picks[1:]
        picks.sort()
    return picks


def _choose_reference(r: np.ndarray, picks: list[int], size: int, circle: bool) -> list[int] | None:
    if len(picks) < size:
        return None
    if len(picks) == size:
        return picks
    vals = np.abs(r[picks])
    top = int(np.argmax(vals))
    L = len(picks)
    best, best_score = None, -1.0
    starts = range(L) if circle else range(max(0, top - size + 1), min(top, L - size) + 1)
    for st in starts:
        idx = [(st + j) % L for j in range(size)]
        if top not in idx:
            continue
        score = float(vals[idx].min())
        if score > best_score:
            best, best_score = idx, score
    return sorted(picks[i] for i in best)


def _initial_reference(G: int, size: int, grid: np.ndarray, domain) -> list[int]:
    if isinstance(domain, Circle):
        return sorted(set(np.linspace(0, G, size, endpoint=False).astype(int)))
    t = -np.cos(np.pi * np.arange(size) / (size - 1))
    target = domain.a + (t + 1) * (domain.b - domain.a) / 2
    idx = np.searchsorted(grid, target).clip(0, G - 1)
    idx = sorted(set(int(i) for i in idx))
    if len(idx) < size:
        idx = sorted(set(np.linspace(0, G - 1, size).astype(int)))
    return idx


def _exchange(A: np.ndarray, y: np.ndarray, grid, domain, max_iter: int) -> tuple | None:
    G, m = A.shape
    size = m + 1
    circle = isinstance(domain, Circle)
    scale = max(float(np.max(np.abs(y))), 1e-300)
    ref = _initial_reference(G, size, grid, domain)
    if len(ref) < size:
        return None
    for _ in range(max_iter):
        signs = (-1.0) ** np.arange(size)
        M = np.column_stack([A[ref], signs])
        try:
            sol = np.linalg.solve(M, y[ref])
        except np.linalg.LinAlgError:
            return None
        c, h = sol[:m], sol[m]
        r = y - A @ c
        emax = float(np.max(np.abs(r)))
        if emax <= abs(h) * (1 + 1e-9) + 1e-14 * scale:
            return c, emax, r
        new = _choose_reference(r, _sign_runs(r, circle), size, circle)
        if new is None or new == ref:
            if emax <= 1e-13 * scale:
                return c, emax, r
            return None
        ref = new
    return None


def _lp(A: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, float, np.ndarray]:
    G, m = A.shape
    cost = np.zeros(m + 1)
    cost[-1] = 1
    ones = np.ones((G, 1))
    A_ub = np.vstack([np.hstack([A, -ones]), np.hstack([-A, -ones])])
    b_ub = np.concatenate([y, -y])
    res = linprog(cost, A_ub=A_ub, b_ub=b_ub, bounds=[(None, None)] * m + [(0, None)],
                  method="highs")
    if not res.success:
        raise RuntimeError(f"linear program failed: {res.message}")
    c = res.x[:m]
    r = y - A @ c
    return c, float(np.max(np.abs(r))), r


def _alternation_count(r: np.ndarray, emax: float, circle: bool, tol: float) -> int:
    if emax == 0:
        return 0
    mask = np.abs(r) >= emax - tol
    masked = np.where(mask, r, 0.0)
    return len(_sign_runs(masked, circle))


def best_uniform_approx(f: SampledFn, n: int, basis: Basis, method: str = "exchange",
                        max_iter: int = 100) -> Approximation:
    """Discrete minimax approximation of every coordinate of f by degree-n polynomials.

    With the sup-of-max-norm coupling the vector problem decouples, so the
    error is the largest coordinate error.
    """
    if n < 0:
        raise ValueError("degree must be nonnegative")
    A = design(basis, f.grid, n, f.domain)
    G, m = A.shape
    if G < m + 1:
        raise ValueError(f"grid of {G} points cannot support degree {n}")
    warnings = []
    if G < 4 * m:
        warnings.append(f"grid has {G} points; at least {4 * m} recommended")
    circle = isinstance(f.domain, Circle)
    coefs, errs, alts = [], [], []
    used, tag = "exchange", None
    for j in range(f.dimension):
        y = f.values[:, j]
        out = _exchange(A, y, f.grid, f.domain, max_iter) if method == "exchange" else None
        if out is None:
            if method == "exchange":
                tag = "IllConditioned"
            used = "lp"
            out = _lp(A, y)
        c, e, r = out
        scale = max(float(np.max(np.abs(y))), 1.0)
        coefs.append(c)
        errs.append(e)
        alts.append(_alternation_count(r, e, circle, 1e-9 * scale))
    return Approximation(basis, n, f.domain, np.column_stack(coefs), max(errs), tuple(errs),
                         used, tag, tuple(alts), tuple(warnings))


def en_profile(f: SampledFn, n_max: int, basis: Basis, floor: float | None = None) -> ErrorSeq:
    """E_1..E_n_max on the grid, made nonincreasing by a running minimum.

    Errors below ``floor`` (default 1000 ulps of the data scale) are rounding
    noise of an exact fit and are set to 0.
    """
    scale = float(np.max(np.abs(f.values))) if f.values.size else 0.0
    floor = 1000 * np.finfo(float).eps * max(scale, 1e-300) if floor is None else floor
    out: list[float] = []
    for n in range(1, n_max + 1):
        e = best_uniform_approx(f, n, basis).error
        e = 0.0 if e <= floor else e
        out.append(min(e, out[-1]) if out else e)
    return ErrorSeq(tuple(out), None, Provenance.COMPUTED,
                    notes=f"sup over a {len(f.grid)}-point grid; {basis.value} basis")


@dataclass(frozen=True)
class DoublingReport:
    sizes: tuple[int, ...]
    errors: tuple[float, ...]
    changes: tuple[float, ...]


def grid_doubling_check(fn: Callable, domain: Interval | Circle, n: int, basis: Basis,
                        size: int = 1001, doublings: int = 2) -> DoublingReport:
    """Best-approximation error on successively doubled grids."""
    sizes, errs = [], []
    for j in range(doublings + 1):
        G = (size - 1) * 2**j + 1 if isinstance(domain, Interval) else size * 2**j
        errs.append(best_uniform_approx(SampledFn.from_function(fn, domain, G), n, basis).error)
        sizes.append(G)
    changes = tuple(abs(b - a) for a, b in zip(errs, errs[1:]))
    return DoublingReport(tuple(sizes), tuple(errs), changes)


# ---------------------------------------------------------------------------
# Markov constants


@dataclass(frozen=True)
class MarkovResult:
    basis: Basis
    degree: int
    value: float
    lower: float
    upper: float
    witness: np.ndarray
    at: float
    method: str  # "Exact" or "LPEstimate"

    @property
    def gap(self) -> float:
        return (self.upper - self.lower) / self.upper if self.upper else 0.0


def markov_constant(basis: Basis, n: int, S: tuple[float, float] | None = None,
                    domain: Interval | Circle | None = None, grid_size: int | None = None,
                    s_points: int = 33) -> MarkovResult:
    """Largest derivative on S over the unit ball of degree-n polynomials in C(domain).

    Trigonometric polynomials on the whole circle give exactly n (witness
    cos(n t)).  Otherwise each point x0 of an S-grid gets a linear program
    maximizing p'(x0) subject to |p| <= 1 on a domain grid; the grid contains
    the extremal nodes of the degree-n Chebyshev polynomial.  The witness
    lower bound divides p'(x0) by the sup of |p| on a 16x finer grid.
    """
    if n < 1:
        raise ValueError("degree must be >= 1")
    domain = domain or (Circle() if basis is Basis.TRIG else Interval())
    if basis is Basis.TRIG and S is None:
        w = np.zeros(2 * n + 1)
        w[2 * n - 1] = 1.0
        return MarkovResult(basis, n, float(n), float(n), float(n), w, 0.0, "Exact")
    if S is None:
        S = (domain.a, domain.b)
    if basis is Basis.CHEBYSHEV:
        K = grid_size or max(400, 40 * n)
        K = n * math.ceil(K / n)
        t = np.cos(np.pi * np.arange(K, -1, -1) / K)
        grid = domain.a + (t + 1) * (domain.b - domain.a) / 2
        grid[0], grid[-1] = domain.a, domain.b
        fine_t = np.cos(np.pi * np.arange(16 * K, -1, -1) / (16 * K))
        fine = domain.a + (fine_t + 1) * (domain.b - domain.a) / 2
    else:
        K = grid_size or max(400, 40 * n)
        K = 2 * n * math.ceil(K / (2 * n))
        grid = np.arange(K) * (TWO_PI / K)
        fine = np.arange(16 * K) * (TWO_PI / (16 * K))
    A = design(basis, grid, n, domain)
    F = design(basis, fine, n, domain)
    m = A.shape[1]
    xs = np.linspace(S[0], S[1], s_points)
    D = design_derivative(basis, xs, n, domain)
    A_ub = np.vstack([A, -A])
    b_ub = np.ones(2 * len(grid))
    upper, lower, best_w, best_x = 0.0, 0.0, None, xs[0]
    for i, x0 in enumerate(xs):
        res = linprog(-D[i], A_ub=A_ub, b_ub=b_ub, bounds=[(None, None)] * m, method="highs")
        if not res.success:
            continue
        val = -res.fun
        if val > upper:
            upper = val
        sup = float(np.max(np.abs(F @ res.x)))
        ratio = float(D[i] @ res.x) / sup if sup > 0 else 0.0
        if ratio > lower:
            lower, best_w, best_x = ratio, res.x, float(x0)
    return MarkovResult(basis, n, upper, lower, upper, best_w, best_x, "LPEstimate")


@dataclass(frozen=True)
class MarkovProfile:
    """M_1..M_n_max with an optional asymptotic certificate (e.g. PowerLog(-2) for n^2)."""

    basis: Basis | None
    values: tuple[float, ...]
    method: str
    lower: tuple[float, ...] = ()
    certificate: PowerLog | None = None
    subset: tuple[float, float] | None = None

    def __post_init__(self):
        if any(b < a * (1 - 1e-9) for a, b in zip(self.values, self.values[1:])):
            raise ValueError("Markov constants must be nondecreasing in n")

    @classmethod
    def compute(cls, basis: Basis, n_max: int, S: tuple[float, float] | None = None,
                **kw) -> "MarkovProfile":
        res = [markov_constant(basis, n, S, **kw) for n in range(1, n_max + 1)]
        vals = np.maximum.accumulate([r.value for r in res])
        method = "Exact" if all(r.method == "Exact" for r in res) else "LPEstimate"
        cert = PowerLog(-1.0, 0.0, 0.0, 1.0) if method == "Exact" else None
        return cls(basis, tuple(float(v) for v in vals), method,
                   tuple(r.lower for r in res), cert, S)

    @classmethod
    def from_values(cls, values: Sequence[float], certificate: PowerLog | None = None,
                    basis: Basis | None = None) -> "MarkovProfile":
        return cls(basis, tuple(float(v) for v in values), "Given", (), certificate)

    def __len__(self) -> int:
        return len(self.values)

    @property
    def linear_constant(self) -> float:
        """Empirical c with M_n <= c n over the profile (no closed form is assumed)."""
        return max(v / n for n, v in enumerate(self.values, start=1))
