"""De Sitter-Reissner-Nordstrom background geometry.

Everything here works in geometrized units (G = c = 1): M and Q are lengths,
Lambda is 1/length**2.  The only SI-aware entry point is :func:`geometrize`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import Chebyshev
from scipy import integrate, optimize

from .errors import ConsistencyError, Degenerate, DomainError, NotAdmissible

CHARGE_BOUND = 3.0 / (2.0 * math.sqrt(2.0))


@dataclass(frozen=True)
class BlackHoleParams:
    """Mass, charge and cosmological constant in geometrized units."""

    M: float
    Q: float
    Lam: float

    @property
    def sign_constraints_ok(self) -> bool:
        """M > 0, 0 < |Q| < 3M/(2 sqrt 2), Lambda > 0."""
        return (
            self.M > 0
            and 0 < abs(self.Q) < CHARGE_BOUND * self.M
            and self.Lam > 0
        )

    @property
    def admissible(self) -> bool:
        if not self.sign_constraints_ok:
            return False
        try:
            solve_horizons(self)
        except NotAdmissible:
            return False
        return True

    def scaled(self, lam: float) -> "BlackHoleParams":
        """The same geometry with every length multiplied by ``lam``."""
        return BlackHoleParams(lam * self.M, lam * self.Q, self.Lam / lam**2)


@dataclass(frozen=True)
class Horizons:
    r_n: float
    r_c: float
    r_minus: float
    r_plus: float

    def as_tuple(self):
        return (self.r_n, self.r_c, self.r_minus, self.r_plus)


@dataclass(frozen=True)
class PhysicalConstants:
    """SI constants; the defaults are the values used for the physical check."""

    G: float = 6.674e-11
    c_light: float = 2.998e8
    eps0: float = 8.854e-12
    Lambda_SI: float = 1.106e-52

    def __post_init__(self):
        for name in ("G", "c_light", "eps0", "Lambda_SI"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")


# ---------------------------------------------------------------------------
# the function mu and its quartic


def _check_r(r):
    r = np.asarray(r, dtype=float)
    if np.any(r == 0):
        raise DomainError("mu is singular at r = 0")
    return r


def mu(params: BlackHoleParams, r):
    """1 - 2M/r + Q^2/r^2 - Lambda r^2/3."""
    r = _check_r(r)
    M, Q, L = params.M, params.Q, params.Lam
    out = 1.0 - 2.0 * M / r + Q * Q / (r * r) - L * r * r / 3.0
    return out if out.ndim else float(out)


def mu_prime(params: BlackHoleParams, r):
    r = _check_r(r)
    M, Q, L = params.M, params.Q, params.Lam
    out = 2.0 * M / r**2 - 2.0 * Q * Q / r**3 - 2.0 * L * r / 3.0
    return out if out.ndim else float(out)


def mu_second(params: BlackHoleParams, r):
    r = _check_r(r)
    M, Q, L = params.M, params.Q, params.Lam
    out = -4.0 * M / r**3 + 6.0 * Q * Q / r**4 - 2.0 * L / 3.0
    return out if out.ndim else float(out)


def r2mu_coeffs(params: BlackHoleParams) -> np.ndarray:
    """Coefficients (highest power first) of the quartic r^2 mu(r)."""
    M, Q, L = params.M, params.Q, params.Lam
    return np.array([-L / 3.0, 0.0, 1.0, -2.0 * M, Q * Q])


def mu_factored(horizons: Horizons, Lam: float, r):
    """mu rebuilt from its roots: Lambda/(3 r^2) (r-r_-)(r_+-r)(r-r_n)(r-r_c)."""
    r = np.asarray(r, dtype=float)
    h = horizons
    return (
        Lam / (3.0 * r * r)
        * (r - h.r_minus) * (h.r_plus - r) * (r - h.r_n) * (r - h.r_c)
    )


def _discriminant(coeffs, roots) -> float:
    a = coeffs[0]
    prod = 1.0 + 0j
    for i in range(len(roots)):
        for j in range(i + 1, len(roots)):
            prod *= (roots[i] - roots[j]) ** 2
    return float((a ** (2 * len(roots) - 2) * prod).real)


def _newton_polish(c, x, iters=60):
    dc = np.polyder(c)
    for _ in range(iters):
        p = np.polyval(c, x)
        dp = np.polyval(dc, x)
        if dp == 0:
            break
        step = p / dp
        x_new = x - step
        if abs(np.polyval(c, x_new)) > abs(p) and abs(step) > 1e-12 * max(1.0, abs(x)):
            break
        x = x_new
        if abs(step) <= 4 * np.finfo(float).eps * max(1.0, abs(x)):
            break
    return x


def _bracketed_roots(c, big):
    """Real roots of the polynomial c on [-big, big] from sign changes."""
    pos = np.geomspace(1e-16 * big, big, 4000)
    grid = np.concatenate([-pos[::-1], [0.0], pos])
    vals = np.polyval(c, grid)
    roots = []
    for k in np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)[0]:
        roots.append(optimize.brentq(lambda x: np.polyval(c, x), grid[k], grid[k + 1],
                                     xtol=1e-300, rtol=4 * np.finfo(float).eps))
    for k in np.nonzero(vals == 0)[0]:
        roots.append(grid[k])
    return sorted(roots)


def _real_quartic_roots(coeffs, length_scale, big):
    """Four distinct real roots of a quartic, ordered, or ``NotAdmissible``.

    Companion-matrix eigenvalues polished by Newton; if that does not give
    four clean real roots, fall back to sign-change bracketing.
    """
    c = np.asarray(coeffs, dtype=float) * length_scale ** np.arange(4, -1, -1)
    c = c / np.max(np.abs(c))
    z = np.roots(c)
    diagnostics = {"companion_roots": (z * length_scale).tolist(),
                   "discriminant": _discriminant(c, z)}
    real = z[np.abs(z.imag) <= 1e-7 * np.maximum(1.0, np.abs(z))].real
    roots = None
    if len(real) == 4:
        cand = np.sort([_newton_polish(c, x) for x in real])
        gaps = np.diff(cand)
        if np.all(gaps > 1e-9 * np.max(np.abs(cand))):
            # each root must be a genuine sign change
            ok = all(
                np.sign(np.polyval(c, x * (1 - 1e-9) - 1e-300))
                != np.sign(np.polyval(c, x * (1 + 1e-9) + 1e-300))
                for x in cand
            )
            if ok:
                roots = cand
    if roots is None:
        found = _bracketed_roots(c, big / length_scale)
        diagnostics["sign_changes"] = len(found)
        if len(found) != 4:
            raise NotAdmissible(
                f"quartic has {len(found)} real roots, need 4 distinct", diagnostics)
        roots = np.array(found)
    return np.asarray(roots) * length_scale, diagnostics


def solve_horizons(params: BlackHoleParams) -> Horizons:
    """The four real roots r_n < 0 < r_c < r_- < r_+ of r^2 mu(r)."""
    M, Q, L = params.M, params.Q, params.Lam
    if not (M > 0 and L > 0):
        raise NotAdmissible("need M > 0 and Lambda > 0", {"M": M, "Lam": L})
    if not 0 < abs(Q) < CHARGE_BOUND * M:
        raise NotAdmissible("need 0 < |Q| < 3M/(2 sqrt 2)", {"Q": Q, "M": M})
    roots, diag = _real_quartic_roots(r2mu_coeffs(params), M, 10.0 * math.sqrt(3.0 / L))
    r_n, r_c, r_m, r_p = (float(x) for x in roots)
    if not r_n < 0 < r_c < r_m < r_p:
        raise NotAdmissible("roots not in the order r_n < 0 < r_c < r_- < r_+",
                            dict(diag, roots=roots.tolist()))
    h = Horizons(r_n, r_c, r_m, r_p)
    mid = np.linspace(r_m, r_p, 203)[1:-1]
    if np.any(mu(params, mid) <= 0):
        raise NotAdmissible("mu is not positive between r_- and r_+", diag)
    return h


# ---------------------------------------------------------------------------
# slicing data


def find_mu_max(params: BlackHoleParams, horizons: Horizons):
    """Location of the maximum of mu on (r_-, r_+) and c^2 = 1/mu there."""
    a, b = horizons.r_minus, horizons.r_plus
    grid = np.geomspace(a, b, 2001)[1:-1]
    d = mu_prime(params, grid)
    flips = np.nonzero(np.sign(d[:-1]) != np.sign(d[1:]))[0]
    if len(flips) != 1:
        raise Degenerate(f"mu has {len(flips)} critical points on (r_-, r_+)")
    k = flips[0]
    r_frak = optimize.brentq(lambda r: mu_prime(params, r), grid[k], grid[k + 1],
                             xtol=1e-300, rtol=4 * np.finfo(float).eps)
    if not mu_second(params, r_frak) < 0:
        raise Degenerate("critical point of mu is not a non-degenerate maximum")
    return r_frak, 1.0 / mu(params, r_frak)


def mu_over_r2_critical(params: BlackHoleParams, horizons: Horizons):
    """Critical points of mu/r^2 inside (r_-, r_+).

    (mu/r^2)' vanishes where r^2 - 3Mr + 2Q^2 = 0, independent of Lambda.
    """
    M, Q = params.M, params.Q
    disc = 9 * M * M - 8 * Q * Q
    if disc <= 0:
        return []
    pts = [(3 * M - math.sqrt(disc)) / 2, (3 * M + math.sqrt(disc)) / 2]
    return [r for r in pts if horizons.r_minus < r < horizons.r_plus]


def default_eta0(horizons: Horizons) -> float:
    h = horizons
    return min(0.4 * (h.r_minus - h.r_c), 0.05 * (h.r_plus - h.r_minus))


@dataclass(frozen=True)
class Background:
    """Horizons and hyperboloidal slicing data for one parameter set."""

    params: BlackHoleParams
    horizons: Horizons
    r_frak: float
    c_sq: float
    eta0: float
    photon_sphere: tuple = ()
    # 1 - mu c^2 = c^2 (r - r_frak)^2 g(r) / r^2 with g quadratic
    _g: tuple = field(default=(), repr=False)

    @classmethod
    def from_params(cls, params: BlackHoleParams, eta0: float | None = None) -> "Background":
        h = solve_horizons(params)
        r_frak, c_sq = find_mu_max(params, h)
        if eta0 is None:
            eta0 = default_eta0(h)
        if not 0 < eta0 < h.r_minus - h.r_c:
            raise NotAdmissible("eta0 must lie in (0, r_- - r_c)", {"eta0": eta0})
        L = params.Lam
        alpha = L / 3.0
        g = (alpha, 2.0 * r_frak * alpha, 1.0 / c_sq - 1.0 + L * r_frak**2)
        bg = cls(params, h, r_frak, c_sq, float(eta0),
                 tuple(mu_over_r2_critical(params, h)), g)
        left = np.linspace(h.r_minus - eta0, h.r_minus, 64, endpoint=False)
        right = np.linspace(h.r_plus, h.r_plus + eta0, 64)[1:]
        if np.any(mu(params, left) >= 0) or np.any(mu(params, right) >= 0):
            raise NotAdmissible("mu has a root on the extension", {"eta0": eta0})
        return bg

    @property
    def interval(self):
        return (self.horizons.r_minus - self.eta0, self.horizons.r_plus + self.eta0)

    @property
    def r_minus(self):
        return self.horizons.r_minus

    @property
    def r_plus(self):
        return self.horizons.r_plus

    def with_eta0(self, eta0: float) -> "Background":
        return Background.from_params(self.params, eta0)


def _g_parts(bg: Background, r):
    alpha, beta, gamma = bg._g
    g = (alpha * r + beta) * r + gamma
    if np.any(g < 0):
        raise ConsistencyError("1 - mu c^2 is negative; c^2 is inconsistent")
    G = np.sqrt(bg.c_sq * g)
    with np.errstate(divide="ignore", invalid="ignore"):
        dG = np.where(G > 0, bg.c_sq * (2 * alpha * r + beta) / (2 * G), 0.0)
    return G, dG


def _check_slab(bg: Background, r):
    r = np.asarray(r, dtype=float)
    a, b = bg.interval
    tol = 1e-12 * (b - a)
    if np.any(r < a - tol) or np.any(r > b + tol):
        raise DomainError("r outside (r_- - eta0, r_+ + eta0)")
    return r


def nu(bg: Background, r):
    """Signed root -sign(r - r_frak) sqrt(1 - mu c^2).

    Evaluated through the factorization of 1 - mu c^2 around its double
    zero at r_frak, which keeps full relative accuracy near r_frak.
    """
    r = _check_slab(bg, r)
    G, _ = _g_parts(bg, r)
    out = -(r - bg.r_frak) * G / r
    return out if out.ndim else float(out)


def nu_prime(bg: Background, r):
    r = _check_slab(bg, r)
    G, dG = _g_parts(bg, r)
    out = -(G * bg.r_frak / r**2 + (r - bg.r_frak) * dG / r)
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# T and R


def _open_interior(bg: Background, r):
    r = np.asarray(r, dtype=float)
    if np.any(r <= bg.r_minus) or np.any(r >= bg.r_plus):
        raise DomainError("T and R diverge at the horizons; need r in (r_-, r_+)")
    return r


def _quad_from_frak(bg, integrand, r, return_error):
    r = _open_interior(bg, r)
    vals, errs = [], []
    scale = bg.r_plus - bg.r_minus
    for x in np.atleast_1d(r):
        v, e = integrate.quad(integrand, bg.r_frak, float(x), epsabs=0.0,
                              epsrel=1e-12, limit=400)
        if e > 1e-9 * max(abs(v), 1e-9 * scale):
            raise ConsistencyError(f"quadrature error estimate {e:.3g} too large at r={x}")
        vals.append(v)
        errs.append(e)
    vals, errs = np.array(vals), np.array(errs)
    if r.ndim == 0:
        vals, errs = float(vals[0]), float(errs[0])
    return (vals, errs) if return_error else vals


def T_of(bg: Background, r, return_error: bool = False):
    """Time shift with T' = -nu/mu, normalized T(r_frak) = 0."""
    p = bg.params
    return _quad_from_frak(bg, lambda x: -nu(bg, x) / mu(p, x), r, return_error)


def R_of(bg: Background, r, return_error: bool = False):
    """Gauge phase with R' = Q nu/(mu r), normalized R(r_frak) = 0."""
    p = bg.params
    return _quad_from_frak(bg, lambda x: p.Q * nu(bg, x) / (mu(p, x) * x), r, return_error)


class HorizonLogSplit:
    """Integral of f/mu from r_frak, split into horizon logarithms plus a smooth part.

    ``F(r) = a_- log|r - r_-| + a_+ log|r - r_+| + S(r)`` with a_pm = f(r_pm)/mu'(r_pm)
    and S a Chebyshev series on [r_-, r_+].  ``from_logs`` accepts the two
    logarithms directly so points closer to a horizon than double precision
    can resolve in r are still handled.
    """

    def __init__(self, bg: Background, f, max_deg: int = 512):
        p, h = bg.params, bg.horizons
        rm, rp = h.r_minus, h.r_plus
        self.a_minus = float(f(rm) / mu_prime(p, rm))
        self.a_plus = float(f(rp) / mu_prime(p, rp))

        def smooth_deriv(x):
            return f(x) / mu(p, x) - self.a_minus / (x - rm) - self.a_plus / (x - rp)

        deg = 32
        while True:
            series = Chebyshev.interpolate(smooth_deriv, deg, domain=[rm, rp])
            tail = np.max(np.abs(series.coef[-4:]))
            if tail <= 1e-13 * np.max(np.abs(series.coef)) or deg >= max_deg:
                break
            deg *= 2
        self.smooth = series.integ(lbnd=bg.r_frak)
        self.offset = -(self.a_minus * math.log(bg.r_frak - rm)
                        + self.a_plus * math.log(rp - bg.r_frak))
        self.bg = bg

    def from_logs(self, r, log_dm, log_dp):
        return self.a_minus * log_dm + self.a_plus * log_dp + self.smooth(r) + self.offset

    def __call__(self, r):
        r = _open_interior(self.bg, r)
        h = self.bg.horizons
        return self.from_logs(r, np.log(r - h.r_minus), np.log(h.r_plus - r))


def T_split(bg: Background) -> HorizonLogSplit:
    return HorizonLogSplit(bg, lambda x: -nu(bg, x))


def R_split(bg: Background) -> HorizonLogSplit:
    Q = bg.params.Q
    return HorizonLogSplit(bg, lambda x: Q * nu(bg, x) / x)


# ---------------------------------------------------------------------------
# slowly rotating background, horizon level only


def mu_a_coeffs(params: BlackHoleParams, a: float) -> np.ndarray:
    M, Q, L = params.M, params.Q, params.Lam
    lam = L * a * a / 3.0
    return np.array([-L / 3.0, 0.0, 1.0 - lam, -2.0 * M, a * a + (1 + lam) ** 2 * Q * Q])


def mu_a(params: BlackHoleParams, a: float, r):
    """(r^2 + a^2)(1 - Lambda r^2/3) - 2Mr + (1 + Lambda a^2/3)^2 Q^2."""
    r = np.asarray(r, dtype=float)
    M, Q, L = params.M, params.Q, params.Lam
    out = (r * r + a * a) * (1 - L * r * r / 3) - 2 * M * r + (1 + L * a * a / 3) ** 2 * Q * Q
    return out if out.ndim else float(out)


def solve_horizons_kn(params: BlackHoleParams, a: float):
    """The two largest roots (r_{-,a}, r_{+,a}) of mu_a."""
    roots, _ = _real_quartic_roots(mu_a_coeffs(params, a), params.M,
                                   10.0 * math.sqrt(3.0 / params.Lam))
    if not roots[2] > 0:
        raise NotAdmissible("mu_a lacks two separated positive outer roots",
                            {"roots": roots.tolist()})
    return float(roots[2]), float(roots[3])


def geometrize(consts: PhysicalConstants, M_kg: float, Q_coulomb: float) -> BlackHoleParams:
    """SI mass and charge to geometrized lengths; Lambda passes through."""
    if not M_kg > 0:
        raise ValueError("mass must be positive")
    c2 = consts.c_light**2
    M = consts.G * M_kg / c2
    Q = Q_coulomb * math.sqrt(consts.G / (4 * math.pi * consts.eps0)) / c2
    return BlackHoleParams(M, Q, consts.Lambda_SI)
