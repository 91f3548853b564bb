import json
import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate
from scipy.special import gamma

from ringwave.errors import DomainError, SingularityError
from ringwave.kernel import (FractionalOrder, KernelTable, eval_F, eval_F_prime, eval_G, get_table,
                             kernel_table_rows, riesz_constant, similarity_variable)

ORDERS = (0.6, 0.75, 0.9)

pytestmark = pytest.mark.filterwarnings("ignore::scipy.integrate.IntegrationWarning")


def trapezoid_F(a, s, n=2**20):
    """Composite trapezoid on [0, π]; the integrand is even about both ends."""
    p = (3 - 2 * a) / 2
    th = np.linspace(0.0, math.pi, n + 1)
    f = np.cos(th) * (2 * (1 - np.cos(th)) + s) ** (-p)
    return (math.pi / n) * (f.sum() - 0.5 * (f[0] + f[-1]))


# -- FractionalOrder --------------------------------------------------------

@pytest.mark.parametrize("a", [0.5, 1.0, 0.2, 1.3, float("nan")])
def test_order_rejects_outside_open_interval(a):
    with pytest.raises(DomainError):
        FractionalOrder(a)


def test_order_constants():
    o = FractionalOrder(0.75)
    assert o.exponent_tau_low == pytest.approx(0.25)
    assert o.exponent_tau_high == pytest.approx(1.75)
    assert o.p == pytest.approx(0.75)
    assert o.c_a > 0
    assert FractionalOrder(0.75, c_a=2.0).c_a == 2.0
    with pytest.raises(DomainError):
        FractionalOrder(0.75, c_a=-1.0)


def test_riesz_constant_formula_and_newtonian_limit():
    a = 0.6
    expect = gamma((3 - 2 * a) / 2) / (4**a * math.pi**1.5 * gamma(a))
    assert riesz_constant(a) == pytest.approx(expect, rel=1e-15)
    # a -> 1 recovers the Newtonian 1/(4π)
    assert riesz_constant(1 - 1e-9) == pytest.approx(1 / (4 * math.pi), rel=1e-7)


# -- similarity variable ----------------------------------------------------

@pytest.mark.parametrize("args,expect", [((1, 0, 1, 0), 0.0), ((2, 1, 1, 1), 0.5), ((1, 3, 2, -1), 8.5)])
def test_similarity_examples(args, expect):
    assert similarity_variable(*args) == expect


@pytest.mark.parametrize("r,rb", [(0, 1), (1, 0), (-1, 2)])
def test_similarity_rejects_nonpositive_radius(r, rb):
    with pytest.raises(DomainError):
        similarity_variable(r, 0, rb, 0)


def test_similarity_vectorized():
    s = similarity_variable(np.array([1.0, 2.0]), 0.0, 1.0, np.array([0.0, 1.0]))
    np.testing.assert_allclose(s, [0.0, 1.0])


# -- F, F' -------------------------------------------------------------------

def test_eval_F_matches_trapezoid_oracle():
    o = FractionalOrder(0.75)
    ref = trapezoid_F(0.75, 1.0)
    ev = eval_F(o, 1.0)
    assert abs(ev.value - ref) <= 1e-8 * abs(ref)
    assert 0 <= ev.abs_error_estimate <= 1e-10 * (1 + abs(ev.value))


@pytest.mark.parametrize("s", [0.0, -1.0, float("nan")])
def test_eval_F_rejects_nonpositive(s):
    o = FractionalOrder(0.75)
    with pytest.raises(DomainError):
        eval_F(o, s)
    with pytest.raises(DomainError):
        eval_F_prime(o, s)


@pytest.mark.parametrize("a", ORDERS)
def test_signs_on_log_grid(a):
    o = FractionalOrder(a)
    for s in np.geomspace(1e-6, 1e6, 37):
        assert eval_F(o, s).value > 0
        assert eval_F_prime(o, s).value < 0


def test_F_prime_matches_finite_difference():
    o = FractionalOrder(0.75)
    h = 1e-5
    fd = (eval_F(o, 1 + h, 1e-14, 1e-14).value - eval_F(o, 1 - h, 1e-14, 1e-14).value) / (2 * h)
    assert eval_F_prime(o, 1.0).value == pytest.approx(fd, rel=1e-6)


@pytest.mark.parametrize("a", ORDERS)
def test_F_prime_consistency_away_from_zero(a):
    o = FractionalOrder(a)
    for s in (0.1, 3.0, 50.0, 99.0, 101.0, 1e3):
        h = 1e-5 * s
        fd = (eval_F(o, s + h, 1e-14, 1e-14).value - eval_F(o, s - h, 1e-14, 1e-14).value) / (2 * h)
        assert eval_F_prime(o, s).value == pytest.approx(fd, rel=1e-6)


def test_F_prime_magnitude_decays_on_ladder():
    o = FractionalOrder(0.6)
    mags = [abs(eval_F_prime(o, s).value) for s in (10.0, 100.0, 1000.0)]
    assert mags[1] <= mags[0] and mags[2] <= mags[1]


@pytest.mark.parametrize("a", ORDERS)
def test_asymptotes(a):
    """F ~ A s^{-(1-a)} at 0 and F ~ pπ s^{-p-1} at infinity."""
    o = FractionalOrder(a)
    A = math.sqrt(math.pi) * gamma(1 - a) / (2 * gamma(1.5 - a))
    # the O(1) correction cancels in a difference quotient
    s1, s2 = 1e-10, 1e-8
    A_est = (eval_F(o, s1).value - eval_F(o, s2).value) / (s1 ** (a - 1) - s2 ** (a - 1))
    assert A_est == pytest.approx(A, rel=1e-3)
    big = eval_F(o, 1e8).value * 1e8 ** (o.p + 1)
    assert big == pytest.approx(o.p * math.pi, rel=1e-6)


@pytest.mark.parametrize("s", [99.0, 100.0, 101.0])
def test_series_and_quadrature_agree_at_switch(s):
    o = FractionalOrder(0.6)
    p = o.p
    direct, _ = integrate.quad(lambda t: math.cos(t) * (2 * (1 - math.cos(t)) + s) ** (-p), 0, math.pi,
                               epsabs=1e-15, epsrel=1e-13, limit=200)
    assert eval_F(o, s).value == pytest.approx(direct, rel=1e-9)


def test_decay_envelope_constants_are_stable():
    data = json.loads((Path(__file__).parent / "data" / "decay_constants.json").read_text())
    lad = data["ladder"]
    s = np.geomspace(lad["s_min"], lad["s_max"], lad["n"])
    for key, consts in data["constants"].items():
        a = float(key)
        o = FractionalOrder(a)
        F = np.array([eval_F(o, x).value for x in s])
        for tau, name in ((1 - a, "tau_low"), (2.5 - a, "tau_high")):
            sup = float(np.max(F * s**tau))
            assert np.all(F * s**tau <= consts[name] * (1 + 1e-6))
            assert sup == pytest.approx(consts[name], rel=1e-6)


# -- G ----------------------------------------------------------------------

def test_G_symmetry_random_pairs():
    o = FractionalOrder(0.7)
    rng = np.random.default_rng(1)
    for _ in range(100):
        r, rb = rng.uniform(0.05, 3, 2)
        z, zb = rng.uniform(-2, 2, 2)
        g1 = eval_G(o, r, z, rb, zb).value
        g2 = eval_G(o, rb, zb, r, z).value
        assert g1 == pytest.approx(g2, rel=1e-12)


def test_G_unit_prefactor():
    o = FractionalOrder(0.75)
    assert eval_G(o, 1.0, 0.0, 1.0, 1.0).value == pytest.approx(eval_F(o, 1.0).value, rel=1e-14)


def _G_origin_form(a, r, z, rb, zb):
    p = (3 - 2 * a) / 2
    f = lambda t: r * rb * math.cos(t) * (r * r - 2 * r * rb * math.cos(t) + rb * rb + (z - zb) ** 2) ** (-p)
    val, _ = integrate.quad(f, 0, math.pi, epsabs=1e-14, epsrel=1e-13, limit=200)
    return val


def test_G_matches_origin_form():
    o = FractionalOrder(0.6)
    assert eval_G(o, 1.0, 0.0, 2.0, 3.0).value == pytest.approx(_G_origin_form(0.6, 1, 0, 2, 3), rel=1e-8)


def test_two_forms_random_samples():
    rng = np.random.default_rng(7)
    for _ in range(20):
        a = rng.uniform(0.55, 0.95)
        r, rb = rng.uniform(0.2, 2, 2)
        z, zb = rng.uniform(-1, 1, 2)
        o = FractionalOrder(a)
        assert eval_G(o, r, z, rb, zb).value == pytest.approx(_G_origin_form(a, r, z, rb, zb), rel=1e-8)


def test_G_coincident_points():
    with pytest.raises(SingularityError):
        eval_G(FractionalOrder(0.75), 1.0, 0.5, 1.0, 0.5)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.51, 0.99), st.floats(-12, 12))
def test_property_F_positive_and_decreasing(a, logs):
    o = FractionalOrder(a)
    s = 10.0**logs
    assert eval_F(o, s).value > eval_F(o, s * 1.01).value > 0


# -- table ------------------------------------------------------------------

@pytest.mark.parametrize("a", ORDERS)
def test_table_matches_direct_quadrature(a):
    tab = get_table(a)
    assert max(tab.validate()) < 1e-7
    o = FractionalOrder(a)
    rng = np.random.default_rng(3)
    for s in 10.0 ** rng.uniform(-10, 10, 40):
        F, Fp = tab.evaluate(s)
        assert F == pytest.approx(eval_F(o, s).value, rel=1e-7)
        assert Fp == pytest.approx(eval_F_prime(o, s).value, rel=1e-6)


def test_table_extrapolates_with_asymptotic_slopes():
    a = 0.75
    tab = get_table(a)
    F1, _ = tab.evaluate(1e-16)
    F2, _ = tab.evaluate(1e-18)
    assert F2 / F1 == pytest.approx(100 ** (1 - a), rel=1e-3)
    G1, _ = tab.evaluate(1e14)
    G2, _ = tab.evaluate(1e16)
    assert G1 / G2 == pytest.approx(100 ** (FractionalOrder(a).p + 1), rel=1e-3)


def test_table_small_build():
    tab = KernelTable(FractionalOrder(0.8), s_min=1e-4, s_max=1e4, n=400)
    assert max(tab.validate()) < 1e-6


def test_kernel_table_rows():
    rows = kernel_table_rows(FractionalOrder(0.75), [0.5, 2.0])
    assert len(rows) == 2
    a, s, F, Fp, err = rows[0]
    assert (a, s) == (0.75, 0.5)
    assert F > 0 and Fp < 0 and err >= 0
