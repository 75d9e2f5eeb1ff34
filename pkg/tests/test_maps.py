import math

import mpmath

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from exterior_decay import maps
from exterior_decay.errors import InvalidInputError, TailUnavailableError


def quad_tail(f, t):
    val, _ = integrate.quad(lambda s: float(f(s)), t, np.inf, epsabs=0, epsrel=1e-13, limit=500)
    return val


def test_power_evaluation_and_tail():
    f = maps.power(0.125, -2)
    assert f(2.0) == pytest.approx(1 / 32)
    assert f.tail(1.0) == pytest.approx(0.125, rel=1e-15)
    assert f.tail(4.0) == pytest.approx(1 / 32, rel=1e-15)


def test_constant_has_no_tail():
    assert not maps.constant(0.5).has_tail
    assert maps.ZERO.is_zero
    assert maps.ZERO.tail(3.0) == 0.0


def mp_tail(c, e, d, t):
    mpmath.mp.dps = 30
    pts = [t, 10 * t, 100 * t, 1e4 * t, mpmath.inf]
    return float(mpmath.quad(lambda s: c * s**e * mpmath.log(s) ** d, pts))


@pytest.mark.parametrize("e,d", [(-2.0, 0.0), (-3.5, 1.0), (-2.0, -2.0), (-1.5, 2.5)])
def test_log_power_tail_matches_quadrature(e, d):
    f = maps.LogPower(1.3, e, d)
    for t in (math.e**2, 10.0, 1e3):
        assert f.tail(t) == pytest.approx(mp_tail(1.3, e, d, t), rel=1e-8)


@pytest.mark.parametrize("d", [-2.0, -1.5, -3.0])
def test_log_power_borderline_tail_exact(d):
    # int_t^inf c / (s (ln s)^-d) ds = c (ln t)^(d+1) / (-(d+1)); too slow for plain quadrature
    f = maps.LogPower(1.3, -1.0, d)
    for t in (math.e**2, 10.0, 1e3):
        assert f.tail(t) == pytest.approx(1.3 * math.log(t) ** (d + 1) / (-(d + 1)), rel=1e-13)


def test_tail_self_consistency_window_plus_remainder():
    # closed-form tail = quadrature on [t, 10t] + declared remainder
    f = maps.LogPower(1.0, -2.0, -2.0)
    t = math.e**2
    seg, _ = integrate.quad(f, t, 10 * t, epsabs=0, epsrel=1e-13)
    assert f.tail(t) == pytest.approx(seg + f.tail(10 * t), rel=1e-8)


def test_decay_metadata_bounds_function():
    for f in (maps.power(2.0, -2.5), maps.LogPower(1.0, -2.0, 1.0), maps.LogPower(1.0, -1.0, -2.0)):
        dec = f.decay
        s = np.geomspace(max(dec.start, 1.01), 1e8, 400)
        assert np.all(np.abs(f(s)) <= dec.K * s ** (-dec.rho) * (1 + 1e-12))


def test_sum_and_product_stay_closed():
    a = maps.power(1.0, -2.0)
    b = maps.power(0.5, -1.0)
    p = maps.product(a, b)
    assert isinstance(p, maps.LogPower)
    assert p(2.0) == pytest.approx(a(2.0) * b(2.0))
    s = a + b * a
    assert s(3.0) == pytest.approx(a(3.0) + b(3.0) * a(3.0))
    assert s.tail(2.0) == pytest.approx(quad_tail(s, 2.0), rel=1e-10)


def test_table_requires_decay_or_support():
    with pytest.raises(InvalidInputError):
        maps.TableMap(np.array([1.0, 2.0]), np.array([1.0, 0.5]))
    t = maps.TableMap(np.array([1.0, 2.0, 4.0]), np.array([1.0, 0.25, 0.0625]), rule="loglog", table_decay=maps.Decay(1.0, 2.0, 1.0))
    assert t(8.0) == pytest.approx(1 / 64)
    assert t(3.0) == pytest.approx(1 / 9, rel=1e-12)


def test_table_finite_support_is_zero_beyond():
    t = maps.TableMap(np.array([1.0, 2.0]), np.array([1.0, 0.0]), rule="linear", finite_support=True)
    assert t(5.0) == 0.0
    assert t(1.5) == pytest.approx(0.5)


def test_table_below_domain_raises():
    t = maps.TableMap(np.array([1.0, 2.0]), np.array([1.0, 0.0]), rule="linear", finite_support=True)
    with pytest.raises(InvalidInputError):
        t(0.5)


def test_serialization_round_trip():
    docs = [
        {"kind": "power", "c": 0.125, "e": -2.0},
        {"kind": "log_power", "c": 1.0, "e": 0.0, "d": -1.0},
        {"kind": "constant", "c": 0.5},
        {"kind": "table", "x": [1.0, 2.0, 3.0], "y": [1.0, 0.5, 0.2], "rule": "pchip", "decay": {"K": 2.0, "rho": 2.0, "start": 3.0}},
    ]
    for doc in docs:
        f = maps.from_dict(doc)
        g = maps.from_dict(f.to_dict())
        xs = np.array([1.5, 2.5, 7.0])
        assert np.allclose(f(xs), g(xs), rtol=0, atol=0)
    assert maps.from_dict(0.5)(10.0) == 0.5


def test_unknown_kind_rejected():
    with pytest.raises(InvalidInputError):
        maps.from_dict({"kind": "exp"})


def test_radial_map_linear_and_round_trip():
    m = maps.RadialUMap([(maps.power(0.125, -2), 1.0)])
    assert m.is_linear
    assert m(2.0, 0.5) == pytest.approx(0.125 / 4 * 0.5)
    m2 = maps.radial_from_dict(m.to_dict())
    assert m2(3.0, 0.2) == m(3.0, 0.2)
    ef = maps.RadialUMap([(maps.power(1.0, -2), 0.5)])
    assert not ef.is_linear
    with pytest.raises(InvalidInputError):
        ef.linear_coefficient()
    assert maps.radial_from_dict(0).is_zero


def test_tail_unavailable_for_slow_decay():
    from exterior_decay.quadrature import integrate_tail

    with pytest.raises(TailUnavailableError):
        integrate_tail(maps.constant(1.0), 1.0)


@settings(max_examples=40, deadline=None)
@given(
    c=st.floats(0.01, 10.0),
    e=st.floats(-4.0, -1.2),
    t=st.floats(1.5, 1e4),
    k=st.floats(1.01, 50.0),
)
def test_tail_nonincreasing_and_additive(c, e, t, k):
    f = maps.power(c, e)
    assert f.tail(k * t) <= f.tail(t)
    seg, _ = integrate.quad(f, t, k * t, epsabs=0, epsrel=1e-12)
    assert f.tail(t) - f.tail(k * t) == pytest.approx(seg, rel=1e-8, abs=1e-300)


@settings(max_examples=40, deadline=None)
@given(a=st.floats(0.1, 5.0), b=st.floats(0.1, 5.0), x=st.floats(1.1, 1e3))
def test_product_commutes(a, b, x):
    f, g = maps.power(a, -1.0), maps.LogPower(b, -2.0, 1.0)
    assert maps.product(f, g)(x) == pytest.approx(maps.product(g, f)(x), rel=1e-14)
