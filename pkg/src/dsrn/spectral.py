"""Chebyshev collocation of the stationary operator and its resonances.

The operator is discretized on the extended interval
``[r_- - eta0, r_+ + eta0]`` with no boundary rows.  Because the principal
coefficient mu changes sign at both horizons, demanding a polynomial
solution across them selects the outgoing behaviour automatically.

The pencil is assembled in expanded strong form,

    P(sigma) = sigma^2 A2 + sigma A1 + A0,
    A2 = -c^2,
    A1 = -2 c^2 s/r + i (2 nu d_r + nu'),
    A0 = -c^2 s^2/r^2 + i s (2 (nu/r) d_r + nu'/r - nu/r^2)
         - mu d_r^2 - mu' d_r + mu'/r + l(l+1)/r^2 + m^2,

obtained by distributing the conjugations by 1/r analytically.  Composing
diagonal and differentiation matrices in factor order instead introduces
a second, spurious discrete kernel at sigma = 0 for finite N.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from numpy.polynomial.legendre import leggauss

from .background import Background, mu, mu_prime, nu, nu_prime
from .errors import ConditionError, NoConvergence

DEFAULT_N = 64
VERIFY_N = 96


def cheb_nodes(N: int) -> np.ndarray:
    """Chebyshev-Gauss-Lobatto points cos(pi j/N), j = 0..N (descending)."""
    return np.cos(np.pi * np.arange(N + 1) / N)


def cheb_diff(N: int):
    """Nodes and first-derivative matrix on [-1, 1].

    Off-diagonal entries follow the classical formula; the diagonal is set by
    the negative-sum trick so that constants are differentiated exactly.
    """
    x = cheb_nodes(N)
    c = np.ones(N + 1)
    c[0] = c[-1] = 2.0
    c *= (-1.0) ** np.arange(N + 1)
    dx = x[:, None] - x[None, :]
    D = np.outer(c, 1.0 / c) / (dx + np.eye(N + 1))
    D -= np.diag(D.sum(axis=1))
    return x, D


def bary_matrix(x_nodes: np.ndarray, x_eval: np.ndarray) -> np.ndarray:
    """Barycentric interpolation matrix from Chebyshev-Lobatto nodes."""
    N = len(x_nodes) - 1
    w = (-1.0) ** np.arange(N + 1)
    w[0] *= 0.5
    w[-1] *= 0.5
    x_eval = np.atleast_1d(np.asarray(x_eval, dtype=float))
    d = x_eval[:, None] - x_nodes[None, :]
    exact = d == 0
    d[exact] = 1.0
    L = w / d
    L /= L.sum(axis=1, keepdims=True)
    rows = exact.any(axis=1)
    L[rows] = exact[rows].astype(float)
    return L


@dataclass(frozen=True)
class Discretization:
    N: int
    interval: tuple
    nodes: np.ndarray
    D1: np.ndarray
    D2: np.ndarray
    x: np.ndarray = field(repr=False)
    horizons: tuple = field(repr=False, default=(np.nan, np.nan))

    def to_reference(self, r):
        a, b = self.interval
        return (2 * np.asarray(r, dtype=float) - (a + b)) / (b - a)

    def interp_matrix(self, r_eval) -> np.ndarray:
        return bary_matrix(self.x, self.to_reference(r_eval))

    def interpolate(self, values, r_eval):
        return self.interp_matrix(r_eval) @ np.asarray(values)

    def _gauss(self, lo, hi, extra=8):
        xg, wg = leggauss(self.N + extra)
        rg = (lo + hi) / 2 + (hi - lo) / 2 * xg
        return rg, wg * (hi - lo) / 2

    def gram(self) -> np.ndarray:
        """L2 Gram matrix of the interpolant on the whole interval."""
        rg, wg = self._gauss(*self.interval)
        L = self.interp_matrix(rg)
        return L.T @ (wg[:, None] * L)

    def rstar_weights(self) -> np.ndarray:
        """Row vector w with w @ f = int_{r_-}^{r_+} r f(r) dr for interpolants f."""
        rm, rp = self.horizons
        rg, wg = self._gauss(rm, rp)
        return (wg * rg) @ self.interp_matrix(rg)


def build_discretization(bg: Background, N: int = DEFAULT_N) -> Discretization:
    if N < 16:
        raise ValueError("N must be at least 16")
    a, b = bg.interval
    x, D = cheb_diff(N)
    r = (a + b) / 2 + (b - a) / 2 * x
    D1 = D * (2 / (b - a))
    return Discretization(N=N, interval=(a, b), nodes=r, D1=D1, D2=D1 @ D1, x=x,
                          horizons=(bg.r_minus, bg.r_plus))


@dataclass(frozen=True)
class PencilMatrices:
    A0: np.ndarray
    A1: np.ndarray
    A2: np.ndarray
    ell: int
    s: float
    m_sq: float
    disc: Discretization = field(repr=False)
    fingerprint: tuple = ()

    def __call__(self, sigma) -> np.ndarray:
        return self.A0 + sigma * (self.A1 + sigma * self.A2)

    def derivative(self, sigma) -> np.ndarray:
        return self.A1 + 2 * sigma * self.A2

    def norm_estimate(self, sigma) -> float:
        a = abs(sigma)
        return (np.linalg.norm(self.A0, 2) + a * np.linalg.norm(self.A1, 2)
                + a * a * np.linalg.norm(self.A2, 2))


def assemble_pencil(bg: Background, ell: int = 0, s: float = 0.0, m_sq: float = 0.0,
                    disc: Discretization | None = None, N: int = DEFAULT_N) -> PencilMatrices:
    """Matrices with P(sigma) = A0 + sigma A1 + sigma^2 A2 on the nodes.

    ``m_sq`` is the squared field mass m^2.
    """
    disc = disc or build_discretization(bg, N)
    r = disc.nodes
    D1, D2 = disc.D1, disc.D2
    n, dn = nu(bg, r), nu_prime(bg, r)
    mu_r, dmu = mu(bg.params, r), mu_prime(bg.params, r)
    c2 = bg.c_sq
    eye = np.eye(len(r))

    A2 = -c2 * eye.astype(complex)
    A1 = np.diag(-2 * c2 * s / r) + 1j * (2 * n[:, None] * D1 + np.diag(dn))
    A0 = (np.diag(-c2 * s * s / r**2 + dmu / r + ell * (ell + 1) / r**2 + m_sq)
          + 1j * s * (2 * (n / r)[:, None] * D1 + np.diag(dn / r - n / r**2))
          - mu_r[:, None] * D2 - dmu[:, None] * D1).astype(complex)
    fp = (bg.params.M, bg.params.Q, bg.params.Lam, bg.eta0, disc.N)
    return PencilMatrices(A0, A1, A2, ell, s, m_sq, disc, fp)


# ---------------------------------------------------------------------------
# eigenvalues


@dataclass(frozen=True)
class Mode:
    sigma: complex
    residual: float
    converged: bool
    vector: np.ndarray = field(repr=False, default=None)


@dataclass(frozen=True)
class SpectrumResult:
    modes: list
    N_pair: tuple

    @property
    def sigmas(self) -> np.ndarray:
        return np.array([m.sigma for m in self.modes])

    def converged_modes(self):
        return [m for m in self.modes if m.converged]

    def nearest(self, sigma):
        pool = self.converged_modes() or self.modes
        return min(pool, key=lambda m: abs(m.sigma - sigma))


def scaled_residual(pencil: PencilMatrices, sigma, u) -> float:
    nu_ = np.linalg.norm(u)
    return np.linalg.norm(pencil(sigma) @ u) / (pencil.norm_estimate(sigma) * nu_)


def _solve_qep(A0, A1, A2):
    """Eigenvalues and right vectors of A0 + s A1 + s^2 A2 with invertible A2."""
    n = A0.shape[0]
    inv = np.linalg.solve(A2, np.hstack([A0, A1]))
    C = np.block([[np.zeros((n, n)), np.eye(n)], [-inv[:, :n], -inv[:, n:]]])
    Cb, T = sla.matrix_balance(C, permute=False, separate=True)
    scale = T[0]
    w, V = sla.eig(Cb)
    V = V * scale[:, None]
    return w, V[:n]


def qep_eigenvalues(pencil: PencilMatrices, residual_tol: float = 1e-8) -> SpectrumResult:
    """All eigenvalues of the pencil through its companion linearization."""
    try:
        w, U = _solve_qep(pencil.A0, pencil.A1, pencil.A2)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NoConvergence(f"dense eigensolver failed: {exc}",
                            trace=[{"N": pencil.disc.N, "error": str(exc)}]) from exc
    modes = []
    for k in np.argsort(np.abs(w)):
        sig, u = complex(w[k]), U[:, k]
        if not np.isfinite(sig):
            continue
        res = scaled_residual(pencil, sig, u)
        modes.append(Mode(sig, res, bool(res <= residual_tol), u))
    return SpectrumResult(modes, (pencil.disc.N,))


def filter_converged(resA: SpectrumResult, resB: SpectrumResult, tol: float = 1e-6) -> SpectrumResult:
    """Keep eigenvalues of ``resA`` with a partner in ``resB`` within tol (1 + |sigma|)."""
    other = resB.sigmas
    kept = []
    for m in resA.modes:
        ok = other.size > 0 and np.min(np.abs(other - m.sigma)) <= tol * (1 + abs(m.sigma))
        kept.append(Mode(m.sigma, m.residual, bool(ok and m.residual <= 1e-8), m.vector))
    return SpectrumResult(kept, tuple(resA.N_pair) + tuple(resB.N_pair))


def spectrum(bg: Background, ell: int = 0, s: float = 0.0, m_sq: float = 0.0,
             N_pair=(DEFAULT_N, VERIFY_N), tol: float = 1e-6) -> SpectrumResult:
    """Two-resolution spectrum with cross-resolution filtering."""
    a, b = (qep_eigenvalues(assemble_pencil(bg, ell, s, m_sq, N=N)) for N in N_pair)
    return filter_converged(a, b, tol)


def refine_newton(pencil: PencilMatrices, sigma0, u0=None, tol: float = 1e-10,
                  max_iter: int = 50):
    """Bordered Newton iteration for (sigma, u) with P(sigma) u = 0.

    The normalisation row fixes c^H u = 1 with c the starting vector.  The
    returned u has unit Euclidean norm on the nodes and is phased so that
    its pairing against r* is real and positive.
    """
    sigma = complex(sigma0)
    if u0 is None:
        _, _, Vh = np.linalg.svd(pencil(sigma))
        u0 = Vh[-1].conj()
    u = np.asarray(u0, dtype=complex)
    c = u / np.vdot(u, u)
    n = len(u)
    trace = []
    for it in range(max_iter):
        P = pencil(sigma)
        res = scaled_residual(pencil, sigma, u)
        trace.append({"iter": it, "sigma": sigma, "residual": res})
        if not np.isfinite(res) or abs(sigma) > 1e8:
            break
        J = np.zeros((n + 1, n + 1), dtype=complex)
        J[:n, :n] = P
        J[:n, n] = pencil.derivative(sigma) @ u
        J[n, :n] = c.conj()
        rhs = -np.concatenate([P @ u, [np.vdot(c, u) - 1]])
        try:
            step = np.linalg.solve(J, rhs)
        except np.linalg.LinAlgError:
            break
        u = u + step[:n]
        sigma = sigma + step[n]
        if abs(step[n]) <= 1e-14 * (1 + abs(sigma)):
            res = scaled_residual(pencil, sigma, u)
            if res <= tol:
                trace.append({"iter": it + 1, "sigma": sigma, "residual": res})
                return sigma, _normalise(pencil.disc, u), trace
    # A small residual alone is not accepted: the pencil is far from normal and
    # its pseudospectrum contains regions where the residual is tiny but sigma
    # keeps drifting.
    raise NoConvergence(f"Newton did not converge from sigma0={complex(sigma0)}", trace)


def _normalise(disc: Discretization, u):
    u = u / np.linalg.norm(u)
    p = disc.rstar_weights() @ u
    if abs(p) > 0:
        u = u * (abs(p) / p)
    return u


# ---------------------------------------------------------------------------
# kernel and Grushin scalar


@dataclass(frozen=True)
class KernelReport:
    sigma_min_rel: float
    sigma_min_scaled: float
    cosine: float
    u: np.ndarray = field(repr=False)
    N: int = 0


def _sqrt_gram(disc: Discretization):
    ev, U = np.linalg.eigh(disc.gram())
    return (U * np.sqrt(ev)) @ U.T, (U / np.sqrt(ev)) @ U.T


def kernel_vector(pencil: PencilMatrices) -> KernelReport:
    """Smallest singular values of A0 and the matching right singular vector.

    ``sigma_min_rel`` is taken relative to the largest singular value of the
    nodal matrix.  ``sigma_min_scaled`` is the smallest singular value of A0
    as a map L2 -> L2 of interpolants, multiplied by r_-^2 so that it is
    dimensionless; unlike the relative value it has a finite limit as N
    grows.
    """
    A = pencil.A0
    _, S, Vh = np.linalg.svd(A)
    u = Vh[-1].conj()
    k = pencil.disc.nodes
    cos = abs(np.vdot(k, u)) / (np.linalg.norm(k) * np.linalg.norm(u))
    Wh, Whi = _sqrt_gram(pencil.disc)
    Sw = np.linalg.svd(Wh @ A @ Whi, compute_uv=False)
    rm = pencil.disc.horizons[0]
    return KernelReport(float(S[-1] / S[0]), float(Sw[-1] * rm**2), float(cos), u, pencil.disc.N)


def reduced_scalar(pencil: PencilMatrices, sigma, cond_max: float = 1e13):
    """Numeric effective scalar whose zeros are the singular points of P(sigma).

    With k the nodal samples of r, solve for x with <k, x>_L2 = 0 and
    P(sigma)(k + x) = beta k.  Then <r*, P(sigma)(k + x)> = beta <r*, k>,
    which to leading order equals <r*, P r> - s^2 <r*, S P^-1 S r>.
    Returns (value, condition_estimate).
    """
    disc = pencil.disc
    k = disc.nodes.astype(complex)
    P = pencil(sigma)
    W = disc.gram()
    n = len(k)
    B = np.zeros((n + 1, n + 1), dtype=complex)
    B[:n, :n] = P
    B[:n, n] = -k
    B[n, :n] = k @ W
    rhs = np.concatenate([-P @ k, [0.0]])
    cond = np.linalg.cond(B)
    if not np.isfinite(cond) or cond > cond_max:
        raise ConditionError(f"bordered system condition {cond:.3e} exceeds {cond_max:.1e}", cond)
    sol = np.linalg.solve(B, rhs)
    m1 = disc.rstar_weights() @ k
    return complex(sol[n] * m1), float(cond)


def winding_number(f, center, radius, n: int = 128, max_n: int = 8192) -> int:
    """Winding number of f around 0 along the circle |z - center| = radius.

    The sampling is doubled until no phase increment exceeds pi/4.
    """
    while True:
        z = center + radius * np.exp(2j * np.pi * np.arange(n + 1) / n)
        vals = np.array([f(zi) for zi in z])
        if np.any(vals == 0):
            raise ValueError("f vanishes on the contour")
        dphi = np.angle(vals[1:] / vals[:-1])
        if np.max(np.abs(dphi)) < np.pi / 4 or n >= max_n:
            return int(round(dphi.sum() / (2 * np.pi)))
        n *= 2
