"""End-to-end mode finding and diagnostics for the growing charged mode."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss

from .background import (
    Background,
    R_split,
    T_split,
    nu,
    solve_horizons_kn,
)
from .errors import ConditionsViolated, ConsistencyError, DomainError, NoConvergence, TruncationError
from .reduction import DEFAULT_S_MAX, check_conditions, im_sigma_plus_leading, sigma_plus_series
from .spectral import (
    DEFAULT_N,
    VERIFY_N,
    Discretization,
    assemble_pencil,
    refine_newton,
)


@dataclass(frozen=True)
class ModeQuery:
    """Field parameters on a fixed background.

    The mass enters through m^2 = s^2 m0^2; ``m0_sq`` is the squared ratio.
    """

    bg: Background
    s: float
    m0_sq: float = 0.0
    ell: int = 0
    a: float = 0.0
    s_max: float = DEFAULT_S_MAX

    def __post_init__(self):
        if abs(self.s) > self.s_max:
            raise ValueError(f"|s| = {abs(self.s)} exceeds s_max = {self.s_max}")
        if self.m0_sq < 0:
            raise ValueError("m0_sq must be non-negative")

    @classmethod
    def from_charge(cls, bg: Background, q: float, m: float = 0.0, **kw) -> "ModeQuery":
        s = q * bg.params.Q
        if s == 0 and m != 0:
            raise ValueError("m0 = m/|s| is undefined for s = 0 with m != 0")
        m0_sq = 0.0 if m == 0 else (m / abs(s)) ** 2
        return cls(bg, s, m0_sq, **kw)

    @classmethod
    def from_coupling(cls, bg: Background, s: float, m0_sq: float = 0.0, **kw) -> "ModeQuery":
        return cls(bg, s, m0_sq, **kw)

    @property
    def q(self) -> float:
        return self.s / self.bg.params.Q

    @property
    def m_sq(self) -> float:
        return self.s * self.s * self.m0_sq


@dataclass
class ModeResult:
    sigma: complex
    u_profile: np.ndarray = field(repr=False)
    disc: Discretization = field(repr=False)
    s: float
    ell: int
    m_sq: float
    residual: float
    disc_ok: bool
    series: complex
    sigma_verify: complex | None = None
    energy0: float = math.nan
    energy_sequence: list = field(default_factory=list, repr=False)
    w_nodes: np.ndarray | None = field(default=None, repr=False)
    w_profile: np.ndarray | None = field(default=None, repr=False)
    warnings: list = field(default_factory=list)

    @property
    def growth_rate(self) -> float:
        return 2 * self.sigma.imag

    @property
    def nodes(self) -> np.ndarray:
        return self.disc.nodes

    def u_at(self, r) -> np.ndarray:
        return self.disc.interp_matrix(r) @ self.u_profile

    def du_at(self, r) -> np.ndarray:
        return self.disc.interp_matrix(r) @ (self.disc.D1 @ self.u_profile)


def disc_bound_check(sigma: complex, s: float, horizons, tol: float = 1e-8) -> bool:
    """|sigma| <= |s| sup|V| + tol with sup|V| = 1/r_- on the exterior."""
    return abs(sigma) <= abs(s) / horizons.r_minus + tol


def find_growing_mode(query: ModeQuery, N: int = DEFAULT_N, N_verify: int | None = VERIFY_N,
                      compute_energy: bool = True, growth_s_threshold: float = 0.05,
                      verify_tol: float = 1e-8) -> ModeResult:
    """Locate the resonance continuing the zero resonance.

    The perturbative root seeds a bordered Newton solve at resolution N,
    which is then repeated at ``N_verify``.  When the growth conditions hold
    and |s| is below ``growth_s_threshold`` a non-positive Im sigma is
    treated as an inconsistency.
    """
    bg = query.bg
    notes = []
    report = check_conditions(bg, query.m0_sq)
    if not report.all_hold:
        msg = (f"growth conditions fail (C1={report.C1}, C2={report.C2}, "
               f"Cm={report.Cm}); searching anyway")
        notes.append(msg)
        warnings.warn(msg, ConditionsViolated, stacklevel=2)

    seed = sigma_plus_series(bg, query.s, query.m0_sq)
    pencil = assemble_pencil(bg, query.ell, query.s, query.m_sq, N=N)
    sigma, u, trace = refine_newton(pencil, seed)
    residual = trace[-1]["residual"]

    sigma_v = None
    if N_verify:
        pv = assemble_pencil(bg, query.ell, query.s, query.m_sq, N=N_verify)
        try:
            sigma_v, _, _ = refine_newton(pv, sigma)
        except NoConvergence:
            notes.append(f"verification solve at N={N_verify} did not converge")
        else:
            if abs(sigma_v - sigma) > verify_tol * (1 + abs(sigma)):
                notes.append(f"resolution drift {abs(sigma_v - sigma):.3e} between N={N} and N={N_verify}")

    result = ModeResult(
        sigma=complex(sigma), u_profile=u, disc=pencil.disc, s=query.s, ell=query.ell,
        m_sq=query.m_sq, residual=float(residual),
        disc_ok=disc_bound_check(sigma, query.s, bg.horizons), series=seed,
        sigma_verify=sigma_v, warnings=notes,
    )
    if report.all_hold and query.ell == 0 and 0 < abs(query.s) <= growth_s_threshold \
            and not sigma.imag > 0:
        raise ConsistencyError(f"conditions hold but Im sigma = {sigma.imag:.3e} <= 0")
    if sigma.imag > 0:
        if not result.disc_ok:
            notes.append("growing mode lies outside the disc |sigma| <= |s|/r_-")
        if compute_energy:
            e0, _, seq = energy_Edot(bg, result)
            result.energy0, result.energy_sequence = e0, seq
        inner = np.linspace(bg.r_minus, bg.r_plus, 66)[1:-1]
        result.w_nodes = inner
        result.w_profile = reconstruct_w(bg, result, inner)
    return result


# ---------------------------------------------------------------------------
# profiles and energy


def reconstruct_w(bg: Background, mode: ModeResult, r) -> np.ndarray:
    """w = e^{i sigma T} e^{-i q R} u / r on the open exterior, q = s/Q."""
    r = np.atleast_1d(np.asarray(r, dtype=float))
    if np.any(r <= bg.r_minus) or np.any(r >= bg.r_plus):
        raise DomainError("w is only defined strictly between the horizons")
    T, R = T_split(bg)(r), R_split(bg)(r)
    q = mode.s / bg.params.Q
    return np.exp(1j * mode.sigma * T - 1j * q * R) * mode.u_at(r) / r


def _chart_nodes(y_edges, order=32):
    xg, wg = leggauss(order)
    ys, ws = [], []
    for lo, hi in zip(y_edges[:-1], y_edges[1:]):
        ys.append((lo + hi) / 2 + (hi - lo) / 2 * xg)
        ws.append(wg * (hi - lo) / 2)
    return np.concatenate(ys), np.concatenate(ws)


def _chart_integral(bg, mode, side, y, wy, Tsp, m_sq):
    """Integral of the energy density over a band of the horizon log chart.

    side = -1: r = r_- + (r_frak - r_-) e^{-y};  side = +1: r = r_+ - (r_+ - r_frak) e^{-y}.
    The Jacobian |dr/dy| divided by mu is taken from the factored mu so that
    it stays finite when r rounds to the horizon.
    """
    h, L = bg.horizons, bg.params.Lam
    rm, rp, rf = h.r_minus, h.r_plus, bg.r_frak
    if side < 0:
        log_dm = math.log(rf - rm) - y
        dm = np.exp(log_dm)
        r = rm + dm
        dp = rp - r
        log_dp = np.log(dp)
        jac_over_mu = 3 * r**2 / (L * dp * (r - h.r_n) * (r - h.r_c))
    else:
        log_dp = math.log(rp - rf) - y
        dp = np.exp(log_dp)
        r = rp - dp
        dm = r - rm
        log_dm = np.log(dm)
        jac_over_mu = 3 * r**2 / (L * dm * (r - h.r_n) * (r - h.r_c))
    sig, s = mode.sigma, mode.s
    T = Tsp.from_logs(r, log_dm, log_dp)
    u, du = mode.u_at(r), mode.du_at(r)
    n = nu(bg, r)
    mu_r = L / (3 * r * r) * dm * dp * (r - h.r_n) * (r - h.r_c)
    k = sig + s / r
    grad = mu_r * (du / r - u / r**2) - 1j * n * k * u / r
    dens = (np.abs(k * u) ** 2 + r * r * np.abs(grad) ** 2
            + mu_r * (mode.ell * (mode.ell + 1) / r**2 + m_sq) * np.abs(u) ** 2)
    weight = np.exp(-2 * sig.imag * T)
    return float(np.sum(wy * weight * dens * jac_over_mu))


def energy_Edot(bg: Background, mode: ModeResult, s: float | None = None,
                m_sq: float | None = None, rtol: float = 1e-4, y0: float = 32.0,
                max_doublings: int = 40):
    """Energy at t = 0 of the growing mode, its growth rate and the truncation history.

    Writing W = r w = e^{i sigma T - i q R} u, the energy is

        int [ |sigma + s/r|^2 |W|^2 + r^2 |mu d_r(W/r)|^2
              + mu (l(l+1)/r^2 + m^2) |W|^2 ] dr/mu

    which is finite when Im sigma > 0.  The integral is truncated at
    r_- + (r_frak - r_-) e^{-Y} and r_+ - (r_+ - r_frak) e^{-Y}; Y doubles
    (the cut-off distance is squared) until the relative change is below
    ``rtol``.  Returns (energy0, growth_rate, sequence).
    """
    if not mode.sigma.imag > 0:
        raise ValueError("the energy is finite only for Im sigma > 0")
    if s is not None and s != mode.s:
        mode = _with(mode, s=s)
    m_sq = mode.m_sq if m_sq is None else m_sq
    Tsp = T_split(bg)
    edges = [0.0, 0.25, 0.5, 1, 2, 4, 8, 16, y0]
    total = 0.0
    for side in (-1, 1):
        y, wy = _chart_nodes(np.array(edges))
        total += _chart_integral(bg, mode, side, y, wy, Tsp, m_sq)
    seq = [(y0, total)]
    Y = y0
    for _ in range(max_doublings):
        band = np.linspace(Y, 2 * Y, 9)
        y, wy = _chart_nodes(band, order=24)
        total += sum(_chart_integral(bg, mode, side, y, wy, Tsp, m_sq) for side in (-1, 1))
        Y *= 2
        seq.append((Y, total))
        prev = seq[-2][1]
        if abs(total - prev) <= rtol * abs(total):
            if not total > 0:
                raise TruncationError("energy converged to a non-positive value", seq)
            return total, mode.growth_rate, seq
    raise TruncationError("truncated energies did not settle", seq)


def _with(mode: ModeResult, **changes) -> ModeResult:
    d = dict(mode.__dict__)
    d.update(changes)
    return ModeResult(**d)


# ---------------------------------------------------------------------------
# studies


@dataclass
class ConvergenceTable:
    rows: list
    order: float | None
    note: str = ""

    @property
    def valid_rows(self):
        return [r for r in self.rows if r["ok"]]


def convergence_study(bg: Background, m0_sq: float, s_list, ell: int = 0,
                      N: int = DEFAULT_N, N_verify: int | None = None) -> ConvergenceTable:
    """Spectral against perturbative sigma_+ over decreasing s.

    The fitted order is the least-squares slope of log|diff| against log s,
    and is refused when fewer than two rows converged.
    """
    s_list = [float(x) for x in s_list]
    if any(b >= a for a, b in zip(s_list, s_list[1:])):
        raise ValueError("s_list must be strictly decreasing")
    rows = []
    for s in s_list:
        row = {"s": s, "ok": False}
        series = sigma_plus_series(bg, s, m0_sq)
        row["sigma_series"] = series
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", ConditionsViolated)
                res = find_growing_mode(ModeQuery(bg, s, m0_sq, ell, s_max=math.inf), N=N,
                                        N_verify=N_verify, compute_energy=False,
                                        growth_s_threshold=0.0)
        except NoConvergence as exc:
            row["error"] = str(exc)
        else:
            diff = abs(res.sigma - series)
            row.update(ok=True, sigma_num=res.sigma, diff=diff, diff_over_s3=diff / s**3,
                       im_over_s2=res.sigma.imag / s**2)
        rows.append(row)
    good = [r for r in rows if r["ok"] and r["diff"] > 0]
    if len(good) < 2:
        return ConvergenceTable(rows, None, "fit refused: fewer than two converged rows")
    order = float(np.polyfit(np.log([r["s"] for r in good]), np.log([r["diff"] for r in good]), 1)[0])
    return ConvergenceTable(rows, order)


def kn_continuity_check(query: ModeQuery, c0: float = 1.0, with_mode: bool = True) -> dict:
    """Outer horizons of the slowly rotating background against the a = 0 ones.

    Only the horizon structure is rotated; the reported mode is the
    non-rotating one.
    """
    bg, a = query.bg, query.a
    h = bg.horizons
    rm_a, rp_a = solve_horizons_kn(bg.params, a)
    report = {"a": a, "r_minus_a": rm_a, "r_plus_a": rp_a,
              "delta_minus": rm_a - h.r_minus, "delta_plus": rp_a - h.r_plus,
              "warnings": [],
              "disclaimer": "horizon level only; the rotating eigenproblem is not solved"}
    if a != 0:
        rm_h, rp_h = solve_horizons_kn(bg.params, a / 2)
        report["ratio_minus"] = (rm_a - h.r_minus) / (rm_h - h.r_minus) if rm_h != h.r_minus else math.nan
        report["ratio_plus"] = (rp_a - h.r_plus) / (rp_h - h.r_plus) if rp_h != h.r_plus else math.nan
        report["scaled_minus"] = (rm_a - h.r_minus) / a**2
        report["scaled_plus"] = (rp_a - h.r_plus) / a**2
    if a * a > c0 * query.q**2:
        report["warnings"].append(f"a^2 = {a * a:.3e} exceeds c0 q^2 = {c0 * query.q**2:.3e}")
    if with_mode:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ConditionsViolated)
            report["sigma"] = find_growing_mode(query, compute_energy=False).sigma
    return report


def expected_im_band(bg: Background, s: float, m0_sq: float = 0.0):
    """s^2 times the leading coefficient of Im sigma_+."""
    return s * s * im_sigma_plus_leading(bg, m0_sq)
