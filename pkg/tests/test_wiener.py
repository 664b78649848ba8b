import json
import math
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from bernstein_classes.wiener import (
    GeometricCoefficientTail, Norm, UncertifiedTail, WienerElement, apply_functional, delta,
    evaluate, geometric_element, lift, wiener_En, wiener_En_profile, wiener_norm,
)

dyadic = st.builds(lambda k, e: Fraction(k, 2**e), st.integers(-64, 64), st.integers(0, 8))
supports = st.dictionaries(st.integers(-20, 20), dyadic, min_size=1, max_size=12)


def brute_tail(coeffs: dict, i: int) -> Fraction:
    return sum((abs(Fraction(v)) for n, v in coeffs.items() if abs(n) > i), Fraction(0))


@given(supports, st.integers(0, 25))
def test_En_is_the_tail_sum(coeffs, i):
    f = WienerElement(coeffs)
    assert Fraction(wiener_En(f, i)) == brute_tail(coeffs, i)


@given(supports)
def test_profile_matches_pointwise(coeffs):
    f = WienerElement(coeffs)
    assert wiener_En_profile(f, 25) == [wiener_En(f, i) for i in range(1, 26)]


@given(supports, st.integers(0, 20), st.lists(dyadic, min_size=41, max_size=41))
def test_no_candidate_beats_truncation(coeffs, i, cand):
    f = WienerElement(coeffs)
    p = WienerElement({n: c for n, c in zip(range(-20, 21), cand) if abs(n) <= i})
    assert wiener_norm(f - p) >= wiener_En(f, i)
    assert wiener_norm(f - f.truncate(i)) == wiener_En(f, i)


def test_geometric_tail_closed_form():
    f = geometric_element(Fraction(1, 2))
    # 2 * sum_{n > i} 2^-n = 2^(1-i)
    for i in range(0, 12):
        assert wiener_En(f, i) == Fraction(2, 2**i)
    assert wiener_norm(f) == 3


def test_geometric_tail_against_explicit_sum():
    tail = GeometricCoefficientTail(3, Fraction(1, 3), Fraction(2, 5))
    f = WienerElement({1: (1,), 2: (Fraction(1, 2),)}, tail=tail)
    explicit = {1: 1, 2: Fraction(1, 2)}
    explicit.update({n: Fraction(1, 3) * Fraction(2, 5) ** (n - 4) for n in range(4, 200)})
    for i in (0, 2, 3, 5):
        assert float(wiener_En(f, i)) == pytest.approx(float(brute_tail(explicit, i)), rel=1e-14)


def test_vector_norms():
    f = WienerElement({0: (1, 1), 3: (Fraction(3), Fraction(-4))}, dimension=2, target_norm=Norm.L2)
    assert wiener_En(f, 0) == 5.0
    g = WienerElement({3: (3, -4)}, dimension=2, target_norm=Norm.LINF)
    assert wiener_En(g, 2) == 4


def test_functional_contracts_En():
    f = WienerElement({1: (1, 2), 5: (Fraction(1, 2), -1)}, dimension=2, target_norm=Norm.L1)
    g = apply_functional(f, (1, -1))
    assert wiener_En(g, 1) == Fraction(3, 2)
    assert wiener_En(f, 1) == Fraction(3, 2)


def test_lift_preserves_En():
    a = geometric_element(Fraction(1, 3))
    b = lift(a, (Fraction(1, 2), Fraction(1, 2)))
    for i in range(6):
        assert wiener_En(b, i) == wiener_En(a, i)


def test_evaluate_against_closed_form():
    # sum_n 2^-|n| e^{int} = 3 / (5 - 4 cos t)
    f = geometric_element(Fraction(1, 2))
    for t in (0.0, 0.7, math.pi):
        ev = evaluate(f, t, 60)
        assert ev.real[0] == pytest.approx(3 / (5 - 4 * math.cos(t)), abs=1e-15)
        assert ev.remainder_bound == Fraction(2, 2**60)


@given(supports)
def test_json_and_csv_round_trip(coeffs):
    f = WienerElement(coeffs)
    assert WienerElement.from_json(f.to_json()) == f
    assert WienerElement.from_csv(f.to_csv()) == f


def test_tail_round_trip():
    f = geometric_element(Fraction(1, 4))
    g = WienerElement.from_dict(json.loads(f.to_json()))
    assert [wiener_En(g, i) for i in range(8)] == [wiener_En(f, i) for i in range(8)]


def test_rejections():
    with pytest.raises(ValueError):
        WienerElement({1: (1, 2)})
    with pytest.raises(ValueError):
        WienerElement({1: (math.inf,)})
    with pytest.raises(ValueError):
        wiener_En(delta(), -1)
    with pytest.raises(UncertifiedTail):
        geometric_element().degree()
    with pytest.raises(UncertifiedTail):
        geometric_element().to_csv()
    with pytest.raises(ValueError):
        WienerElement.from_csv("frequency,v_1\n1,1\n1,2\n")
