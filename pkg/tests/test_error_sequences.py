import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from bernstein_classes.error_sequences import (
    ErrorSeq, GeometricTail, Provenance, StepTail, ZeroTail, beurling_witness,
    errors_from_wiener, from_log_rate, from_rate, phi_from_errors, realize_bernstein,
    separation_margins, separation_witness,
)
from bernstein_classes.rates import Role, parse_rate, power
from bernstein_classes.wiener import wiener_En


@st.composite
def dyadic_targets(draw):
    """Nonincreasing dyadic prefix followed by a dyadic geometric tail."""
    steps = draw(st.lists(st.integers(0, 3), min_size=1, max_size=30))
    exps = np.cumsum(steps).tolist()
    prefix = [Fraction(1, 2**e) for e in exps]
    ratio = Fraction(1, 2 ** draw(st.integers(1, 3)))
    return ErrorSeq(tuple(prefix), GeometricTail(len(prefix) + 1, prefix[-1] * ratio, ratio))


@given(dyadic_targets())
def test_realization_is_exact(c):
    f = realize_bernstein(c)
    E = errors_from_wiener(f, 200)
    assert all(E.value(n) == c.value(n) for n in range(1, 201))


@given(dyadic_targets(), st.integers(0, 40), st.integers(41, 120))
def test_realized_coefficients_telescope(c, i, m):
    # independent of the tail bookkeeping: sum the coefficients one by one
    f = realize_bernstein(c)
    total = sum((Fraction(f.coefficient(n)[0]) for n in range(i + 1, m + 1)), Fraction(0))
    assert total == Fraction(c.value(max(i, 1))) - Fraction(c.value(m))
    assert all(f.coefficient(n)[0] >= 0 for n in range(1, m + 1))
    assert all(f.coefficient(-n)[0] == 0 for n in range(1, m + 1))


def test_realization_from_rate():
    c = from_rate(parse_rate("1/n^2"))
    f = realize_bernstein(c)
    for i in (1, 2, 10, 1000):
        assert wiener_En(f, i) == Fraction(1, i * i)


def test_finite_target_needs_a_tail():
    with pytest.raises(ValueError):
        realize_bernstein(ErrorSeq((1, Fraction(1, 2))))
    f = realize_bernstein(ErrorSeq((1, Fraction(1, 2), 0)))
    assert f.finite_support and wiener_En(f, 3) == 0


def test_sequence_validation():
    with pytest.raises(ValueError):
        ErrorSeq((1, 2))
    with pytest.raises(ValueError):
        ErrorSeq((-1,))
    with pytest.raises(ValueError):
        ErrorSeq(())
    with pytest.raises(ValueError):
        ErrorSeq((Fraction(1, 8),), GeometricTail(2, 1, Fraction(1, 2)))


def test_log_values_do_not_underflow():
    E = from_log_rate(power(1.0))  # E_n = exp(-n)
    logs = E.log_values(5000)
    np.testing.assert_allclose(logs, -np.arange(1, 5001), rtol=1e-14)
    assert E.value(5000) == 0.0


def test_phi_from_errors():
    E = from_log_rate(power(0.5))  # E_n = exp(-sqrt n)
    phi = phi_from_errors(E, 400)
    assert phi(1) == 1.0
    n = np.arange(2, 401, dtype=float)
    np.testing.assert_allclose(phi(n), np.minimum(1.0, 1 / np.sqrt(n)), rtol=1e-12)
    zero = ErrorSeq((Fraction(1, 2), Fraction(1, 100), 0, 0, 0, 0))
    # phi(2) = 1/ln 100 ~ 0.217; zeros then take min(phi(n-1), 1/n)
    got = phi_from_errors(zero, 6)(np.arange(2.0, 7.0))
    p2 = 1 / math.log(100)
    np.testing.assert_allclose(got, [p2, p2, p2, 1 / 5, 1 / 6], rtol=1e-14)


def test_separation_witness_margins():
    phi, phi_p = power(1.0), power(0.5)
    E = separation_witness(phi, phi_p, horizon=10**6)
    assert isinstance(E.tail, StepTail)
    np.testing.assert_allclose(E.witness.margins, math.exp(-1), rtol=1e-14)
    m = separation_margins(E, phi, 10**6).margins
    # exp(-1/sqrt(4^i)) increases to 1
    assert all(b > a for a, b in zip(m, m[1:]))
    np.testing.assert_allclose(m, [math.exp(-2.0**-i) for i in range(len(m))], rtol=1e-14)


def test_separation_needs_divergent_ratio():
    with pytest.raises(ValueError):
        separation_witness(power(0.5), power(1.0))
    with pytest.raises(ValueError):
        separation_witness(power(1.0), power(1.0, c=3))


def test_beurling_witness_blocks():
    kappa = parse_rate("1/n^2", Role.WEIGHT)
    E = beurling_witness(kappa, blocks=3)
    prof = E.tail.profile
    assert all(prof.checks.values())
    N3 = prof.extent
    n = np.arange(1, N3 + 1, dtype=float)
    partial = math.fsum(kappa(n) * E.log_values(N3))
    assert partial < -3
    assert math.exp(prof.phi(N3) * E.log_values(N3)[-1]) >= math.exp(-1 / 3)


@given(dyadic_targets())
def test_json_round_trip(c):
    back = ErrorSeq.from_json(c.to_json())
    assert back.values(60) == c.values(60)


def test_csv_round_trip_and_rejects():
    E = ErrorSeq((1, Fraction(1, 2), Fraction(1, 4)))
    back = ErrorSeq.from_csv(E.to_csv())
    assert back.prefix == E.prefix and back.provenance is Provenance.TABULATED
    with pytest.raises(ValueError):
        ErrorSeq.from_csv("n,E_n\n1,1\n3,0.5\n")


def test_zero_tail():
    E = ErrorSeq((Fraction(1, 2),), ZeroTail())
    assert E.value(9) == 0 and E.log_values(3)[-1] == -math.inf
