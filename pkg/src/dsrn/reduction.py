"""Closed-form second-order calculus for the charge-driven zero-resonance shift.

Near s = qQ = 0 the stationary operator has the one-dimensional kernel
spanned by r.  Projecting onto it reduces the resonance condition to a
scalar quadratic sigma^2 + A sigma + B = 0, whose small root sigma_+ moves
into the upper half plane when the horizons are far enough apart.
This module evaluates every ingredient of that reduction in closed form.

The pairing against the cokernel element is
``<r*, f> = int_{r_-}^{r_+} r f(r) dr`` (the sphere average is trivial for
spherically symmetric data).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .background import (
    Background,
    BlackHoleParams,
    Horizons,
    PhysicalConstants,
    CHARGE_BOUND,
    geometrize,
    mu_factored,
    nu,
    nu_prime,
    solve_horizons,
)
from .errors import ConsistencyError, NotAdmissible

DEFAULT_S_MAX = 0.1


@dataclass(frozen=True)
class ReducedCoeffs:
    sigma_tilde: float
    beta: float
    K: float
    a1: float
    a2: float
    b1: float
    b2: float
    bracket: float
    m0_sq: float


@dataclass(frozen=True)
class ModeQuadratic:
    A: complex
    B: complex
    sigma_plus: complex | None = None
    sigma_minus: complex | None = None


@dataclass(frozen=True)
class ConditionReport:
    C1: bool
    C1_margin: float
    C2: bool
    C2_margin: float
    m0_max_sq: float
    Cm: bool
    beta_r_plus_inside: bool
    im_coefficient: float

    @property
    def all_hold(self) -> bool:
        return self.C1 and self.C2 and self.Cm


def _rpm(h: Horizons):
    return h.r_minus, h.r_plus


def pairing_moments(horizons: Horizons):
    """<r*, r>, <r*, V r>, <r*, V^2 r> and the two boundary coefficients.

    The boundary term of <r*, (1/r) d_r r^2 nu (sigma + sV)> equals
    ``boundary_sigma * sigma + boundary_s * s``.
    """
    rm, rp = _rpm(horizons)
    m1 = (rp**3 - rm**3) / 3.0
    m2 = (rp**2 - rm**2) / 2.0
    m3 = rp - rm
    return m1, m2, m3, -(rp**2 + rm**2), -(rp + rm)


def sigma_tilde(horizons: Horizons) -> float:
    rm, rp = _rpm(horizons)
    return (rp + rm) / (rp**2 + rm**2)


def beta_ratio(horizons: Horizons) -> float:
    rm, rp = _rpm(horizons)
    return (rp - rm) / (rp + rm)


def s_bracket_zero_test(bg: Background, sigma_t: float | None = None) -> complex:
    """Quadrature value of <r*, S r>; vanishes for the true sigma_tilde."""
    st = sigma_tilde(bg.horizons) if sigma_t is None else sigma_t

    def deriv(r):
        # d/dr [ r^2 nu (st - 1/r) ]
        n = nu(bg, r)
        return (2 * r * n + r * r * nu_prime(bg, r)) * (st - 1 / r) + n

    val, _ = integrate.quad(deriv, bg.r_minus, bg.r_plus,
                            epsabs=1e-13 * bg.r_plus**2, epsrel=1e-12, limit=200)
    return 1j * val


def Sigma(bg: Background, r):
    """(sigma_tilde - 1/r) r^2 nu(r)."""
    r = np.asarray(r, dtype=float)
    return (sigma_tilde(bg.horizons) - 1 / r) * r * r * nu(bg, r)


def F_poly(horizons: Horizons, r):
    """sigma~^2 (r^4 - r_-^4) - 2 sigma~ (r^3 - r_-^3) + (r^2 - r_-^2)."""
    r = np.asarray(r, dtype=float)
    st = sigma_tilde(horizons)
    rm = horizons.r_minus
    return st**2 * (r**4 - rm**4) - 2 * st * (r**3 - rm**3) + (r**2 - rm**2)


def F_factored(horizons: Horizons, r):
    r = np.asarray(r, dtype=float)
    st, b = sigma_tilde(horizons), beta_ratio(horizons)
    rm, rp = _rpm(horizons)
    return st**2 * (r - rm) * (r - rp) * (r + b * rm) * (r - b * rp)


def rational_integral_IF(bg: Background, rtol: float = 1e-9):
    """int_{r_-}^{r_+} F(r)/(r^2 mu) dr, as (closed_form, quadrature).

    With the factored mu the integrand is
    -(3 sigma~^2/Lambda) (r + beta r_-)(r - beta r_+)/((r - r_n)(r - r_c)),
    integrated by partial fractions.  The quadrature route integrates the
    unfactored F against the factored mu.
    """
    h = bg.horizons
    L = bg.params.Lam
    rm, rp, rn, rc = h.r_minus, h.r_plus, h.r_n, h.r_c
    st, b = sigma_tilde(h), beta_ratio(h)

    def num(r):
        return (r + b * rm) * (r - b * rp)

    alpha = num(rn) / (rn - rc)
    gamma = num(rc) / (rc - rn)
    rational = (rp - rm) + alpha * math.log((rp - rn) / (rm - rn)) \
        + gamma * math.log((rp - rc) / (rm - rc))
    closed = -3 * st**2 / L * rational

    quad, _ = integrate.quad(lambda r: F_poly(h, r) / (r * r * mu_factored(h, L, r)),
                             rm, rp, epsabs=0, epsrel=1e-11, limit=400)
    if abs(closed - quad) > rtol * max(abs(closed), abs(quad)):
        raise ConsistencyError(f"I_F closed form {closed!r} vs quadrature {quad!r}")
    return closed, quad


def direct_integration_term(r_minus: float, r_plus: float, c_sq: float) -> float:
    """-c^2 int (sigma~ r - 1)^2 dr over (r_-, r_+), in closed form."""
    rm, rp = r_minus, r_plus
    return -c_sq * (rp - rm) ** 3 * (rp**2 - rp * rm + rm**2) / (3 * (rp**2 + rm**2) ** 2)


def bracket_SPinvS(bg: Background, verify: bool = False) -> float:
    """<r*, S P^-1(0,0,0) S r> from the split of Sigma^2 - Sigma(r_-)^2.

    With ``verify`` the value is also integrated directly from nu and the
    two must agree to 1e-8.
    """
    closed, _ = rational_integral_IF(bg)
    value = closed + direct_integration_term(bg.r_minus, bg.r_plus, bg.c_sq)
    if verify:
        check = bracket_by_quadrature(bg)
        if abs(check - value) > 1e-8 * abs(value):
            raise ConsistencyError(f"bracket split {value!r} vs direct quadrature {check!r}")
    return value


def bracket_by_quadrature(bg: Background) -> float:
    """Verification route: integrate (Sigma^2 - Sigma(r_-)^2)/(r^2 mu) directly."""
    h = bg.horizons
    L = bg.params.Lam
    S_minus_sq = Sigma(bg, h.r_minus) ** 2
    val, _ = integrate.quad(
        lambda r: (Sigma(bg, r) ** 2 - S_minus_sq) / (r * r * mu_factored(h, L, r)),
        h.r_minus, h.r_plus, epsabs=0, epsrel=1e-12, limit=400)
    return val


def quadratic_coeffs(bg: Background, s: float, m0_sq: float = 0.0,
                     s_max: float = DEFAULT_S_MAX):
    """Coefficients of sigma^2 + A sigma + B = 0 for coupling s and m^2 = s^2 m0^2."""
    if abs(s) > s_max:
        raise ValueError(f"|s| = {abs(s)} exceeds s_max = {s_max}")
    rm, rp = _rpm(bg.horizons)
    c2 = bg.c_sq
    K = c2 * (rp**3 - rm**3) / 3
    br = bracket_SPinvS(bg)
    a1 = c2 * (rp**2 - rm**2) / K
    a2 = (rp**2 + rm**2) / K
    b1 = (c2 * (rp - rm) + br) / K - m0_sq / c2
    b2 = (rp + rm) / K
    coeffs = ReducedCoeffs(sigma_tilde(bg.horizons), beta_ratio(bg.horizons),
                           K, a1, a2, b1, b2, br, m0_sq)
    quad = ModeQuadratic(A=s * a1 + 1j * a2, B=s * s * b1 + 1j * s * b2)
    return coeffs, quad


def solve_mode_quadratic(q: ModeQuadratic) -> ModeQuadratic:
    """Both roots; sigma_plus is the one that tends to 0 as B -> 0."""
    A, B = complex(q.A), complex(q.B)
    if A == 0:
        root = np.sqrt(-B)
        return ModeQuadratic(A, B, complex(root), complex(-root))
    sq = np.sqrt(1 - 4 * B / A**2)
    sigma_minus = -A / 2 * (1 + sq)
    sigma_plus = B / sigma_minus if sigma_minus != 0 else -A / 2
    return ModeQuadratic(A, B, complex(sigma_plus), complex(sigma_minus))


def principal_scalar(bg: Background, sigma, s: float, m0_sq: float = 0.0):
    """<r*, P(sigma) r> - s^2 <r*, S P^-1 S r>  =  -K (sigma^2 + A sigma + B)."""
    coeffs, q = quadratic_coeffs(bg, s, m0_sq, s_max=np.inf)
    sigma = np.asarray(sigma, dtype=complex)
    return -coeffs.K * (sigma**2 + q.A * sigma + q.B)


def sigma_plus_series(bg: Background, s: float, m0_sq: float = 0.0) -> complex:
    """sigma_+ to second order in s."""
    rm, rp = _rpm(bg.horizons)
    rs = rp**2 + rm**2
    d = rp - rm
    c_term = bg.c_sq * d**3 * (d**2 + rp * rm) / (3 * rs**3)
    rest = (bracket_SPinvS(bg) - m0_sq * (rp**3 - rm**3) / 3) / rs
    return complex(-s * sigma_tilde(bg.horizons), s * s * (c_term + rest))


def im_sigma_plus_leading(bg: Background, m0_sq: float = 0.0) -> float:
    """Coefficient of s^2 in Im sigma_+."""
    rm, rp = _rpm(bg.horizons)
    rs = rp**2 + rm**2
    closed, _ = rational_integral_IF(bg)
    return closed / rs - m0_sq * (rp**3 - rm**3) / (3 * rs)


def condition_margins(horizons: Horizons):
    rm, rp = _rpm(horizons)
    return rp**2 - 2 * rp * rm - rm**2, rp**4 + rm**4 - 26 * rp**2 * rm**2


def check_conditions(bg: Background, m0_sq: float = 0.0) -> ConditionReport:
    h = bg.horizons
    rm, rp = _rpm(h)
    c1, c2 = condition_margins(h)
    b = beta_ratio(h)
    rs = rp**2 + rm**2
    denom = (2 * bg.params.Lam * rs**2 * (b * rp - h.r_n) * (b * rp - h.r_c)
             * (rs + rp * rm))
    m0_max_sq = 3 * c2 / denom
    return ConditionReport(
        C1=c1 > 0, C1_margin=c1, C2=c2 > 0, C2_margin=c2,
        m0_max_sq=m0_max_sq, Cm=m0_sq < m0_max_sq,
        beta_r_plus_inside=rm < b * rp < rp,
        im_coefficient=im_sigma_plus_leading(bg, m0_sq),
    )


def polynomial_moment_identity(horizons: Horizons):
    """-int (r + beta r_-)(r - beta r_+) dr, by antiderivative and by closed formula."""
    rm, rp = _rpm(horizons)
    b = beta_ratio(horizons)

    def prim(r):
        return r**3 / 3 + b * (rm - rp) * r**2 / 2 - b * b * rm * rp * r

    lhs = -(prim(rp) - prim(rm))
    rhs = (rp - rm) * (rp**4 + rm**4 - 26 * rp**2 * rm**2) / (6 * (rp + rm) ** 2)
    return lhs, rhs


# ---------------------------------------------------------------------------
# physical units


PC_BOUND_C2 = 7.357e104   # m^4
PC_BOUND_C1 = 2.714e52    # m^2
TON618_KG = 1.31e41


@dataclass
class ScanSummary:
    n_points: int
    min_C2: float
    min_C1: float
    argmin_C2: tuple
    argmin_C1: tuple
    excluded: list
    bound_C2: float = PC_BOUND_C2
    bound_C1: float = PC_BOUND_C1

    @property
    def pass_C2(self) -> bool:
        return self.min_C2 >= self.bound_C2

    @property
    def pass_C1(self) -> bool:
        return self.min_C1 >= self.bound_C1


def physical_scan(consts: PhysicalConstants | None = None, n_mass: int = 100,
                  n_charge: int = 50, M_max_kg: float = TON618_KG) -> ScanSummary:
    """Minimum condition margins (SI) over a mass x charge grid.

    Masses are ``M_max (i+1)/n_mass``; charges run over ``j/(n_charge-1)`` of
    the bound 3M/(2 sqrt 2) in geometrized units.  Grid points without the
    required four-root structure are excluded and listed.
    """
    consts = consts or PhysicalConstants()
    best2 = (math.inf, None)
    best1 = (math.inf, None)
    excluded = []
    n_ok = 0
    for i in range(n_mass):
        M_kg = M_max_kg * (i + 1) / n_mass
        geo = geometrize(consts, M_kg, 0.0)
        for j in range(n_charge):
            frac = j / (n_charge - 1) if n_charge > 1 else 0.5
            p = BlackHoleParams(geo.M, frac * CHARGE_BOUND * geo.M, geo.Lam)
            try:
                h = solve_horizons(p)
            except NotAdmissible as exc:
                excluded.append({"M_kg": M_kg, "charge_frac": frac, "reason": str(exc)})
                continue
            n_ok += 1
            c1, c2 = condition_margins(h)
            if c2 < best2[0]:
                best2 = (c2, (M_kg, frac))
            if c1 < best1[0]:
                best1 = (c1, (M_kg, frac))
    return ScanSummary(n_ok, best2[0], best1[0], best2[1], best1[1], excluded)
