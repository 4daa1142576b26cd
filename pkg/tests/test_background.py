import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from scipy import integrate, optimize

from dsrn.background import (
    Background,
    BlackHoleParams,
    PhysicalConstants,
    R_of,
    R_split,
    T_of,
    T_split,
    find_mu_max,
    geometrize,
    mu,
    mu_a,
    mu_factored,
    mu_over_r2_critical,
    mu_prime,
    mu_second,
    nu,
    nu_prime,
    solve_horizons,
    solve_horizons_kn,
)
from dsrn.errors import DomainError, NotAdmissible

from conftest import MODERATE, params_strategy

# numpy.roots on [-L/3, 0, 1, -2M, Q^2] and brentq on a 4e5-point sign scan
ROOTS_MODERATE = (-8.610398374688332, 0.13397149639197847, 2.011311425613837, 6.465115452682516)
# dense argmax on 2e5 points followed by golden-section refinement
RFRAK_MODERATE = 3.827710832751497
CSQ_MODERATE = 3.994116872881373


def test_mu_matches_independent_polynomial():
    c = [-0.05 / 3, 0.0, 1.0, -2.0, 0.25]
    r = 1.5
    assert mu(MODERATE, r) == pytest.approx(np.polyval(c, r) / r**2, rel=1e-14)
    assert mu(MODERATE, r) == pytest.approx(-0.2597222222222222, rel=1e-14)


def test_mu_domain_and_far_field():
    with pytest.raises(DomainError):
        mu(MODERATE, 0.0)
    assert mu(MODERATE, 1e3) < 0


def test_mu_derivatives_against_finite_differences(moderate_bg):
    p = MODERATE
    for r in (1.0, 3.0, 5.5):
        h = 1e-5
        fd1 = (mu(p, r + h) - mu(p, r - h)) / (2 * h)
        fd2 = (mu(p, r + h) - 2 * mu(p, r) + mu(p, r - h)) / h**2
        assert mu_prime(p, r) == pytest.approx(fd1, rel=1e-8)
        assert mu_second(p, r) == pytest.approx(fd2, rel=1e-4)


def test_horizons_moderate_match_oracle():
    h = solve_horizons(MODERATE)
    np.testing.assert_allclose(h.as_tuple(), ROOTS_MODERATE, rtol=1e-13)
    for r in h.as_tuple():
        assert abs(mu(MODERATE, r)) <= 1e-12 * max(1, abs(r))


def test_horizons_large_lambda_not_admissible():
    p = BlackHoleParams(1.0, 0.5, 0.2)
    c = [-p.Lam / 3, 0, 1, -2 * p.M, p.Q**2]
    xs = np.linspace(1e-3, 30, 200001)
    positive_sign_changes = np.sum(np.diff(np.sign(np.polyval(c, xs))) != 0)
    assert positive_sign_changes < 3
    with pytest.raises(NotAdmissible) as exc:
        solve_horizons(p)
    assert exc.value.diagnostics


@pytest.mark.parametrize("p", [BlackHoleParams(1, 0, 0.01), BlackHoleParams(1, 1.2, 0.01),
                               BlackHoleParams(-1, 0.5, 0.01), BlackHoleParams(1, 0.5, -0.01)])
def test_sign_constraints(p):
    assert not p.sign_constraints_ok
    with pytest.raises(NotAdmissible):
        solve_horizons(p)


@settings(max_examples=60, deadline=None)
@given(params_strategy)
def test_vieta_and_ordering(p):
    assume(p.admissible)
    h = solve_horizons(p)
    r = np.array(h.as_tuple())
    assert h.r_n < 0 < h.r_c < h.r_minus < h.r_plus
    scale = np.max(np.abs(r))
    assert abs(r.sum()) <= 1e-12 * scale
    e2 = sum(r[i] * r[j] for i in range(4) for j in range(i + 1, 4))
    assert e2 == pytest.approx(-3 / p.Lam, rel=1e-12)
    assert r.prod() == pytest.approx(-3 * p.Q**2 / p.Lam, rel=1e-12)
    xs = np.linspace(h.r_minus, h.r_plus, 50)[1:-1]
    assert np.all(mu(p, xs) > 0)


@settings(max_examples=40, deadline=None)
@given(params_strategy)
def test_factored_mu_reconstruction(p):
    assume(p.admissible)
    h = solve_horizons(p)
    r = np.random.default_rng(1).uniform(h.r_minus, h.r_plus, 100)
    np.testing.assert_allclose(mu_factored(h, p.Lam, r), mu(p, r), rtol=1e-10)


def test_roots_continuous_in_lambda():
    base = np.array(solve_horizons(MODERATE).as_tuple())
    d = 1e-6
    shift = [np.array(solve_horizons(BlackHoleParams(1, 0.5, 0.05 + x)).as_tuple()) - base
             for x in (d, d / 2)]
    ratio = np.abs(shift[0]) / np.abs(shift[1])
    assert np.all((ratio > 1.8) & (ratio < 2.2))


def test_mu_max_matches_grid_oracle(moderate_bg):
    r_frak, c_sq = find_mu_max(MODERATE, moderate_bg.horizons)
    assert r_frak == pytest.approx(RFRAK_MODERATE, rel=1e-8)
    assert c_sq == pytest.approx(CSQ_MODERATE, rel=1e-12)
    assert abs(mu_prime(MODERATE, r_frak)) < 1e-12
    assert mu_second(MODERATE, r_frak) < 0


@settings(max_examples=30, deadline=None)
@given(params_strategy)
def test_mu_max_is_maximum(p):
    assume(p.admissible)
    bg = Background.from_params(p)
    assert mu(p, bg.r_frak) * bg.c_sq == pytest.approx(1.0, rel=1e-14)
    xs = np.linspace(bg.r_minus, bg.r_plus, 1000)
    assert np.all(mu(p, xs) <= mu(p, bg.r_frak) * (1 + 1e-14))


def test_nu_values(moderate_bg):
    bg = moderate_bg
    assert nu(bg, bg.r_frak) == 0
    assert nu(bg, bg.r_minus) == pytest.approx(1.0, abs=1e-12)
    assert nu(bg, bg.r_plus) == pytest.approx(-1.0, abs=1e-12)
    r = 0.5 * (bg.r_minus + bg.r_frak)
    p = bg.params
    direct = math.sqrt(1 - (1 - 2 * p.M / r + p.Q**2 / r**2 - p.Lam * r * r / 3) * bg.c_sq)
    assert 0 < nu(bg, r) < 1
    assert nu(bg, r) == pytest.approx(direct, rel=1e-12)
    with pytest.raises(DomainError):
        nu(bg, bg.r_plus + 2 * bg.eta0)


def test_nu_continuous_and_derivative(moderate_bg):
    bg = moderate_bg
    scale = bg.r_plus - bg.r_minus
    jumps = []
    for h in (1e-3, 1e-4, 1e-5):
        hh = h * scale
        jumps.append(abs(nu(bg, bg.r_frak + hh) - nu(bg, bg.r_frak - hh)) / hh)
    assert max(jumps) < 10
    for r in (2.5, 3.827, 5.0):
        h = 1e-6
        fd = (nu(bg, r + h) - nu(bg, r - h)) / (2 * h)
        assert nu_prime(bg, r) == pytest.approx(fd, rel=1e-6, abs=1e-9)


def test_T_and_R_normalisation_and_growth(moderate_bg):
    bg = moderate_bg
    assert T_of(bg, bg.r_frak) == 0
    assert R_of(bg, bg.r_frak) == 0
    for end, sgn in ((bg.r_minus, 1), (bg.r_plus, -1)):
        vals = [T_of(bg, end + sgn * 10.0**-k) for k in range(3, 7)]
        assert np.all(np.diff(vals) > 0)
    with pytest.raises(DomainError):
        T_of(bg, bg.r_minus)


def test_R_against_refined_composite_rule(moderate_bg):
    bg = moderate_bg
    p = bg.params
    r = 3.0

    def simpson(n):
        x = np.linspace(bg.r_frak, r, 2 * n + 1)
        f = p.Q * np.array([nu(bg, t) for t in x]) / (mu(p, x) * x)
        return integrate.simpson(f, x=x)

    s1, s2 = simpson(400), simpson(800)
    richardson = s2 + (s2 - s1) / 15
    value, err = R_of(bg, r, return_error=True)
    assert value == pytest.approx(richardson, rel=1e-9)
    assert err <= 1e-9 * abs(value)


def test_log_split_matches_quadrature(moderate_bg):
    bg = moderate_bg
    r = np.array([2.05, 3.0, 4.5, 6.4])
    np.testing.assert_allclose(T_split(bg)(r), T_of(bg, r), rtol=1e-10)
    np.testing.assert_allclose(R_split(bg)(r), R_of(bg, r), rtol=1e-10, atol=1e-12)


def test_extension_width_validated(moderate_bg):
    h = moderate_bg.horizons
    with pytest.raises(NotAdmissible):
        Background.from_params(MODERATE, eta0=1.01 * (h.r_minus - h.r_c))
    bg2 = moderate_bg.with_eta0(0.5 * moderate_bg.eta0)
    assert bg2.eta0 == pytest.approx(0.5 * moderate_bg.eta0)


def test_photon_sphere_reported(moderate_bg):
    crit = mu_over_r2_critical(MODERATE, moderate_bg.horizons)
    # r^2 - 3Mr + 2Q^2 = 0 solved by hand
    expected = (3 + math.sqrt(9 - 8 * 0.25)) / 2
    assert any(abs(c - expected) < 1e-12 for c in crit)


def test_mu_a_reduces_to_r2_mu():
    r = np.linspace(0.5, 6, 40)
    np.testing.assert_allclose(mu_a(MODERATE, 0.0, r), r * r * mu(MODERATE, r), rtol=1e-14, atol=1e-14)
    # independently expanded polynomial
    a, L, r0 = 0.1, 0.05, 2.0
    expanded = (r0**2 - L * r0**4 / 3 + a * a - L * a * a * r0 * r0 / 3 - 2 * r0
                + 0.25 * (1 + 2 * L * a * a / 3 + L * L * a**4 / 9))
    assert mu_a(MODERATE, a, r0) == pytest.approx(expanded, rel=1e-14)
    assert mu_a(MODERATE, a, r0) == pytest.approx(-0.007249993055555626, rel=1e-12)


def test_mu_a_is_order_a_squared():
    r = 3.0
    d = [abs(mu_a(MODERATE, a, r) - r * r * mu(MODERATE, r)) for a in (0.02, 0.01, 0.005)]
    assert d[0] / d[1] == pytest.approx(4, rel=0.01)
    assert d[1] / d[2] == pytest.approx(4, rel=0.01)


def test_kn_horizons(moderate_bg):
    h = moderate_bg.horizons
    assert solve_horizons_kn(MODERATE, 0.0) == pytest.approx((h.r_minus, h.r_plus), rel=1e-13)
    a1 = 1e-2 * h.r_minus
    a2 = a1 / 2
    d1 = np.array(solve_horizons_kn(MODERATE, a1)) - (h.r_minus, h.r_plus)
    d2 = np.array(solve_horizons_kn(MODERATE, a2)) - (h.r_minus, h.r_plus)
    C = np.abs(d1) / a1**2
    assert np.all(np.abs(d2) <= 1.1 * C * a2**2)
    with pytest.raises(NotAdmissible):
        solve_horizons_kn(MODERATE, 1.5)


def test_kn_merge_point_detected_by_scan():
    # bisect the first a where the outer sign structure disappears
    def ok(a):
        try:
            solve_horizons_kn(MODERATE, a)
            return True
        except NotAdmissible:
            return False

    assert ok(0.5) and not ok(1.5)
    a_merge = optimize.bisect(lambda a: 1.0 if ok(a) else -1.0, 0.5, 1.5, xtol=1e-6)
    assert not ok(a_merge + 1e-3)


def test_geometrize():
    consts = PhysicalConstants()
    p = geometrize(consts, 1.31e41, 0.0)
    assert p.M == pytest.approx(6.674e-11 * 1.31e41 / 2.998e8**2, rel=1e-15)
    assert p.M == pytest.approx(9.73e13, rel=1e-3)
    assert p.Q == 0
    assert p.Lam == 1.106e-52
    q = geometrize(consts, 1.0, 1.0)
    assert q.Q == pytest.approx(math.sqrt(6.674e-11 / (4 * math.pi * 8.854e-12)) / 2.998e8**2)
    with pytest.raises(ValueError):
        geometrize(consts, 0.0, 0.0)
    with pytest.raises(ValueError):
        PhysicalConstants(G=0.0)


def test_si_scale_horizons_accurate():
    consts = PhysicalConstants()
    for frac in (0.01, 0.5, 0.9):
        geo = geometrize(consts, 1.31e40, 0.0)
        p = BlackHoleParams(geo.M, frac * geo.M, geo.Lam)
        h = solve_horizons(p)
        for r in (h.r_minus, h.r_plus):
            assert abs(mu(p, r)) <= 1e-12 * max(1, abs(r))
