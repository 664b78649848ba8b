import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bernstein_classes.error_sequences import ErrorSeq, GeometricTail, ZeroTail, from_rate
from bernstein_classes.geometry import (
    DegenerateLevel, PointCloud, ScaleOutOfResolution, UnverifiedClaim, Verdict,
    box_dimension_profile, coarea_check, condition_checks, cover_series, covering_number,
    example_L, gauge_condition, graph_box_count, lemma51_check, level_set_measure, psi_sum,
    thm215_cover, witnessed_lipschitz,
)
from bernstein_classes.minimax import (
    Basis, Interval, LacunaryTruncation, MarkovProfile, SampledFn, bernstein_nondiff_circle,
    bernstein_nondiff_sampled, best_uniform_approx,
)
from bernstein_classes.rates import double_log_gauge, log_gauge, parse_rate, power, power_gauge

gauges = st.one_of(
    st.builds(power_gauge, st.floats(0.1, 3)),
    st.builds(log_gauge, st.floats(0.2, 3)),
    st.builds(double_log_gauge, st.floats(1, 3), st.floats(0.1, 2)),
)


# ---------------------------------------------------------------------------
# covering numbers against brute force


def brute_line_cover(x: list[float], eps: float) -> int:
    # some optimal cover has every interval starting at a point
    pts = sorted(x)
    for k in range(1, len(pts) + 1):
        for starts in itertools.combinations(pts, k):
            if all(any(s <= v <= s + 2 * eps for s in starts) for v in pts):
                return k
    raise AssertionError


def brute_centered_cover(P: np.ndarray, eps: float) -> int:
    # centers restricted to the points: an upper bound for the true cover
    for k in range(1, len(P) + 1):
        for cs in itertools.combinations(range(len(P)), k):
            d = np.max(np.abs(P[:, None, :] - P[list(cs)][None, :, :]), axis=2)
            if np.all(d.min(axis=1) <= eps):
                return k
    raise AssertionError


@settings(max_examples=60)
@given(st.lists(st.floats(-10, 10, allow_nan=False), min_size=1, max_size=7),
       st.floats(0.05, 3))
def test_line_cover_is_exact(x, eps):
    r = covering_number(PointCloud.line(x), eps)
    assert r.exact and r.greedy == brute_line_cover(x, eps)


@settings(max_examples=40)
@given(st.lists(st.tuples(st.floats(0, 4), st.floats(0, 4)), min_size=2, max_size=7),
       st.floats(0.2, 2))
def test_graph_cover_bracket(pts, eps):
    P = np.array(pts)
    r = covering_number(PointCloud(P), eps)
    # packing <= true cover <= point-centered cover <= farthest-point cover
    assert r.packing <= brute_centered_cover(P, eps) <= r.greedy


def test_interval_union_cover():
    assert covering_number([(0, 1), (0.5, 2.0)], 0.5).greedy == 2
    assert covering_number([(0, 1), (5, 5)], 0.5).greedy == 2
    assert covering_number([(0, 1.01)], 0.5).greedy == 2


def test_cover_series_monotone():
    f = SampledFn.from_function(np.sin, Interval(0, 6), 400)
    reps = cover_series(PointCloud.graph(f), [0.4, 0.2, 0.1, 0.05])
    counts = [r.greedy for r in reps]
    assert counts == sorted(counts)


def test_cover_rejects_bad_radius():
    with pytest.raises(ValueError):
        covering_number(PointCloud.line([0.0]), 0.0)


# ---------------------------------------------------------------------------
# box counting


def dense_box_count(f: SampledFn, eps: float, refine: int = 64) -> int:
    # boxes hit by a dense resampling of the piecewise linear graph: a lower bound
    t = np.linspace(0, 1, refine, endpoint=False)
    x0, x1 = f.grid[:-1, None], f.grid[1:, None]
    y0, y1 = f.scalar[:-1, None], f.scalar[1:, None]
    xs = np.append((x0 + t * (x1 - x0)).ravel(), f.grid[-1]) - f.grid[0]
    ys = np.append((y0 + t * (y1 - y0)).ravel(), f.scalar[-1])
    return len(set(zip(np.floor(xs / eps).astype(int), np.floor(ys / eps).astype(int))))


# values off the box edges, so closed and half-open boxes agree
@pytest.mark.parametrize("fn", [np.sin, lambda x: np.abs(x - 1 / 3) + 1 / 7, lambda x: np.cos(40 * x)])
@pytest.mark.parametrize("j", [3, 5])
def test_box_count_against_dense_sampling(fn, j):
    f = SampledFn.from_function(fn, Interval(-1, 1), 2**9 + 1)
    eps = 2.0**-j
    exact, dense = graph_box_count(f, eps), dense_box_count(f, eps)
    assert dense <= exact <= dense * 1.02 + 2


def test_smooth_graph_has_slope_one():
    f = SampledFn.from_function(np.sin, Interval(-1, 1), 2**14 + 1)
    assert box_dimension_profile(f, range(3, 11)).slope == pytest.approx(1.0, abs=0.03)


def test_bernstein_graph_slope():
    bd = box_dimension_profile(bernstein_nondiff_sampled(2**16), range(4, 11))
    assert 0.95 <= bd.slope <= 1.15


def test_box_dimension_guards():
    f = SampledFn.from_function(np.sin, Interval(-1, 1), 65)
    with pytest.raises(ScaleOutOfResolution):
        box_dimension_profile(f, range(3, 9))
    with pytest.raises(ValueError):
        box_dimension_profile(f, [1, 2, 3])


# ---------------------------------------------------------------------------
# the tube cover


@pytest.mark.parametrize("n", [8, 16, 32])
def test_tube_cover_on_bernstein_circle(n):
    f = bernstein_nondiff_circle(2**14)
    g = LacunaryTruncation.of_degree(n)
    gamma = g.deviation
    rep = thm215_cover(f, g, markov=float(n) * g.coefficient_sum, gamma=gamma, psi=log_gauge(1.0))
    # every graph point lies in the tube over its ball
    assert np.max(np.abs(f.scalar - g(f.grid))) <= gamma
    assert max(rep.diameters) <= 2 * (rep.markov + 1) * gamma * (1 + 1e-9)
    assert rep.psi_sum == pytest.approx(float(np.sum(log_gauge(1.0).psi_k(1.0)(np.array(rep.diameters)))))
    assert rep.holds


def test_tube_cover_with_minimax_approximant():
    f = SampledFn.from_function(lambda x: np.abs(x), Interval(), 2001)
    a = best_uniform_approx(f, 6, Basis.CHEBYSHEV)
    lip = witnessed_lipschitz(f.grid, a(f.grid))
    rep = thm215_cover(f, a, markov=lip, gamma=a.error * (1 + 1e-12), psi=power_gauge(1.0))
    assert rep.holds and rep.cells == math.ceil(2 / (2 * rep.gamma) * (1 - 1e-12))


def test_tube_cover_refuses_unverified_inputs():
    f = bernstein_nondiff_circle(2**12)
    g = LacunaryTruncation.of_degree(16)
    with pytest.raises(UnverifiedClaim):
        thm215_cover(f, g, markov=100.0, gamma=g.deviation / 2, psi=log_gauge())
    with pytest.raises(UnverifiedClaim):
        thm215_cover(f, g, markov=1.0, gamma=g.deviation, psi=log_gauge())


def test_tube_cover_exact_fit_is_degenerate():
    f = SampledFn.from_function(lambda x: 2 * x + 1, Interval(), 101)
    rep = thm215_cover(f, lambda x: 2 * np.asarray(x) + 1, markov=2.0, gamma=0.0, psi=power_gauge(1))
    assert rep.degenerate and rep.cells == 0


def test_example_L_and_gauge_condition():
    assert example_L(2.0, math.exp(-1)) == pytest.approx(2.0)
    with pytest.raises(ValueError):
        example_L(1.0, 1.0)
    # phi = 1/n, M_n = n, log gauge: n * |ln(n e^-n)|^-1 = n / (n - ln n) -> 1
    vals = gauge_condition(power(1.0), np.arange(1, 2001, dtype=float), log_gauge(1.0), 1.0,
                           math.exp(-1))
    n = np.arange(10, 2001)
    np.testing.assert_allclose(vals[9:], n / (n - np.log(n)), rtol=1e-12)


# ---------------------------------------------------------------------------
# growth conditions and the liminf check


def test_condition_checks_trig():
    prof = MarkovProfile.compute(Basis.TRIG, 200)
    by_name = {r.name: r for r in condition_checks(power(1.0), prof, 1.0)}
    n = np.arange(1, 201, dtype=float)
    np.testing.assert_allclose(by_name["phi*M"].values, 1.0)
    np.testing.assert_allclose(by_name["phi*lnM"].values, np.log(n) / n)
    assert by_name["phi*M"].verdict is Verdict.HOLDS and by_name["phi*M"].limit == pytest.approx(1)
    assert by_name["phi*lnM"].verdict is Verdict.HOLDS and by_name["phi*lnM"].limit == 0.0
    assert all(r.certified for r in by_name.values())
    slow = {r.name: r for r in condition_checks(power(0.5), prof, 0.5)}
    assert slow["phi*M"].verdict is Verdict.FAILS
    assert slow["M/n^s"].verdict is Verdict.FAILS


def test_condition_checks_uncertified():
    prof = MarkovProfile.from_values([1, 4, 9, 16])
    assert all(r.verdict is Verdict.EMPIRICAL for r in condition_checks(power(1.0), prof, 2.0))


def test_liminf_check_closed_forms():
    zero = lemma51_check(ErrorSeq((Fraction(1, 2),), ZeroTail()), power_gauge(1.0), n_max=50)
    assert zero.verdict is Verdict.ZERO and zero.certified
    geo = lemma51_check(ErrorSeq((), GeometricTail(1, Fraction(1, 2), Fraction(1, 2))),
                        power_gauge(0.5), n_max=200)
    assert geo.verdict is Verdict.ZERO and geo.certified
    # n * (4 n * n^-2) = 4 for every n
    sq = lemma51_check(from_rate(parse_rate("1/n^2")), power_gauge(1.0), n_max=500)
    assert sq.verdict is Verdict.POSITIVE and sq.limit == pytest.approx(4.0)
    np.testing.assert_allclose(sq.values, 4.0, rtol=1e-12)


# ---------------------------------------------------------------------------
# level sets and the coarea envelope


def test_level_set_brackets_the_crossings():
    f = SampledFn.from_function(np.sin, Interval(0, 6), 601)
    est = level_set_measure(f, 0.3, power_gauge(1.0))
    roots = [math.asin(0.3), math.pi - math.asin(0.3)]
    assert len(est.components) == 2
    for (a, b), r in zip(est.components, roots):
        assert a <= r <= b


def test_flat_level_is_degenerate():
    f = SampledFn.from_function(lambda x: np.zeros_like(x), Interval(), 11)
    with pytest.raises(DegenerateLevel):
        level_set_measure(f, 0.0, power_gauge(1.0))


def test_coarea_linear_is_one():
    # every level meets one cell of length h, and sigma(h) = h^2;
    # (j + 1/2)/256 never equals k/1000, so no level hits a node
    f = SampledFn.from_function(lambda x: x, Interval(0, 1), 1001)
    rep = coarea_check(f, power_gauge(1.0), levels=256)
    assert rep.ratio == pytest.approx(1.0, rel=1e-6)


@pytest.mark.parametrize("fn", [np.sin, np.abs, lambda x: np.cos(7 * x) * x])
def test_coarea_ratio_bounded(fn):
    f = SampledFn.from_function(fn, Interval(-1, 1), 2001)
    assert coarea_check(f, power_gauge(1.0)).ratio <= 1.1


# ---------------------------------------------------------------------------
# gauges


@given(gauges, st.lists(st.floats(1e-300, 10), min_size=2, max_size=20))
def test_gauges_are_nondecreasing(psi, ts):
    t = np.sort(np.array(ts))
    v = psi(t)
    assert np.all(np.diff(v) >= -1e-15 * np.abs(v[1:]))
    assert psi(0.0) == 0.0


def test_psi_sum():
    assert psi_sum([0.5, 0.25], power_gauge(2.0)) == pytest.approx(0.3125)
