from types import SimpleNamespace

import numpy as np
import pytest
import sympy as sp

from dsrn.errors import ConditionError, NoConvergence
from dsrn.reduction import (
    im_sigma_plus_leading,
    principal_scalar,
    quadratic_coeffs,
    sigma_plus_series,
)
from dsrn.spectral import (
    Mode,
    PencilMatrices,
    SpectrumResult,
    assemble_pencil,
    bary_matrix,
    build_discretization,
    cheb_nodes,
    filter_converged,
    kernel_vector,
    qep_eigenvalues,
    reduced_scalar,
    refine_newton,
    spectrum,
    winding_number,
)


# ---------------------------------------------------------------------------
# oracles


def symbolic_operator(bg, ell, s, m_sq, sigma):
    """Factor-order operator applied to exp(-(r - r_frak)^2), built in sympy.

    nu is taken as -sign(r - r_frak) sqrt(1 - mu c^2) branch by branch, so
    no part of the package evaluation path is reused.
    """
    r, sgn = sp.symbols("r sgn", real=True)
    M, Q, L = (sp.Float(v, 30) for v in (bg.params.M, bg.params.Q, bg.params.Lam))
    c2 = sp.Float(bg.c_sq, 30)
    mu = 1 - 2 * M / r + Q**2 / r**2 - L * r**2 / 3
    nu = -sgn * sp.sqrt(1 - mu * c2)
    u = sp.exp(-(r - sp.Float(bg.r_frak, 30)) ** 2)
    k = sigma + s / r
    expr = (-c2 * k**2 * u
            + sp.I / r * k * r**2 * nu * sp.diff(u / r, r)
            + sp.I / r * sp.diff(r**2 * nu * k * u / r, r)
            - sp.diff(mu * r**2 * sp.diff(u / r, r), r) / r
            + (ell * (ell + 1) / r**2 + m_sq) * u)
    f = sp.lambdify((r, sgn), expr, "numpy")
    g = sp.lambdify(r, u, "numpy")

    def at(nodes):
        sgnv = np.sign(nodes - bg.r_frak)
        return np.array([complex(f(x, sv)) for x, sv in zip(nodes, sgnv)]), g(nodes)

    return at


def det_zero_in_disc(pencil, center, radius, n=512):
    """Number of zeros and their mean of det P inside a circle (argument principle)."""
    t = 2 * np.pi * np.arange(n) / n
    z = center + radius * np.exp(1j * t)
    dz = 1j * radius * np.exp(1j * t) * (2 * np.pi / n)
    logd = np.array([np.trace(np.linalg.solve(pencil(zi), pencil.derivative(zi))) for zi in z])
    count = np.sum(logd * dz) / (2j * np.pi)
    first = np.sum(z * logd * dz) / (2j * np.pi)
    return count, first / count


# ---------------------------------------------------------------------------
# discretization


def test_differentiation_matrices(desk_bg):
    d = build_discretization(desk_bg, 48)
    r = d.nodes
    scale = r.max()
    np.testing.assert_allclose(d.D1 @ r, 1.0, atol=1e-10)
    assert np.max(np.abs(d.D1 @ np.ones_like(r))) <= 1e-12 * scale
    np.testing.assert_allclose(d.D1 @ r**2, 2 * r, rtol=1e-9)
    f = np.sin(r / 3)
    np.testing.assert_allclose(d.D2 @ f, -np.sin(r / 3) / 9, atol=1e-8)
    np.testing.assert_allclose(d.D2, d.D1 @ d.D1)
    with pytest.raises(ValueError):
        build_discretization(desk_bg, 8)


def test_interpolation_converges_geometrically(desk_bg):
    a, b = desk_bg.interval
    x = np.linspace(a, b, 37)[1:-1] + 0.01
    errs = []
    for N in (8, 16, 24, 32):
        xn = cheb_nodes(N)
        rn = (a + b) / 2 + (b - a) / 2 * xn
        L = bary_matrix(xn, (2 * x - (a + b)) / (b - a))
        errs.append(np.max(np.abs(L @ np.exp(rn / 4) - np.exp(x / 4))))
    floor = 1e-12 * np.exp(b / 4)
    assert errs[1] < errs[0] / 50
    assert errs[2] < max(errs[1] / 50, floor)
    assert errs[3] < floor


def test_gram_and_rstar_weights(desk_bg):
    d = build_discretization(desk_bg, 40)
    a, b = d.interval
    one = np.ones_like(d.nodes)
    assert one @ d.gram() @ one == pytest.approx(b - a, rel=1e-13)
    rm, rp = desk_bg.r_minus, desk_bg.r_plus
    assert d.rstar_weights() @ d.nodes == pytest.approx((rp**3 - rm**3) / 3, rel=1e-12)


# ---------------------------------------------------------------------------
# pencil


def test_mass_term_is_identity_shift(desk_bg):
    p0 = assemble_pencil(desk_bg, 0, 0.01, 0.0, N=32)
    p1 = assemble_pencil(desk_bg, 0, 0.01, 0.3, N=32)
    np.testing.assert_allclose(p1.A0 - p0.A0, 0.3 * np.eye(33), atol=1e-13)
    np.testing.assert_array_equal(p0.A2, -desk_bg.c_sq * np.eye(33))


def test_pencil_matches_symbolic_operator(desk_bg):
    sigma, s, ell, m_sq = 0.3 + 0.1j, 0.02, 1, 0.01
    oracle = symbolic_operator(desk_bg, ell, s, m_sq, sigma)
    errs = []
    for N in (32, 64):
        p = assemble_pencil(desk_bg, ell, s, m_sq, N=N)
        exact, u = oracle(p.disc.nodes)
        errs.append(np.max(np.abs(p(sigma) @ u - exact)) / np.max(np.abs(exact)))
    assert errs[0] / errs[1] >= 10 or errs[1] <= 1e-10


def test_kernel_at_zero(desk_bg):
    p = assemble_pencil(desk_bg, N=64)
    k = p.disc.nodes
    res = np.linalg.norm(p.A0 @ k) / (np.linalg.norm(p.A0, 2) * np.linalg.norm(k))
    assert res <= 1e-9
    rep = kernel_vector(p)
    assert rep.sigma_min_rel <= 1e-8
    assert rep.cosine >= 1 - 1e-6
    coarse = kernel_vector(assemble_pencil(desk_bg, N=32))
    # both sit at the roundoff floor
    assert rep.sigma_min_rel <= max(coarse.sigma_min_rel, 1e-14)


@pytest.mark.parametrize("ell", [1, 2])
def test_no_kernel_for_higher_harmonics(desk_bg, ell):
    vals = [kernel_vector(assemble_pencil(desk_bg, ell, N=N)).sigma_min_scaled for N in (32, 64, 96)]
    assert min(vals) >= 1e-3
    assert np.ptp(vals) <= 0.05 * max(vals)


# ---------------------------------------------------------------------------
# eigenvalues


def test_zero_resonance_found(desk_bg):
    res = spectrum(desk_bg, 0, 0.0)
    best = min(res.converged_modes(), key=lambda m: abs(m.sigma))
    assert abs(best.sigma) <= 1e-8 / desk_bg.r_minus


def test_small_coupling_eigenvalue_near_series(desk_bg):
    diffs = []
    for s in (0.02, 0.01):
        res = qep_eigenvalues(assemble_pencil(desk_bg, 0, s))
        ser = sigma_plus_series(desk_bg, s)
        diffs.append(min(abs(res.sigmas - ser)))
        assert diffs[-1] <= 0.1 * s**3
    assert diffs[0] / diffs[1] == pytest.approx(8, rel=0.1)


def test_random_small_pencil_against_determinant():
    rng = np.random.default_rng(7)
    n = 8
    A0, A1 = (rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)) for _ in range(2))
    A2 = np.eye(n) + 0.1 * rng.normal(size=(n, n))
    pencil = PencilMatrices(A0, A1, A2, 0, 0.0, 0.0, SimpleNamespace(N=n - 1))
    res = qep_eigenvalues(pencil)
    assert len(res.modes) == 2 * n
    R = 2 * max(abs(res.sigmas))
    count, _ = det_zero_in_disc(pencil, 0, R, n=4096)
    assert count == pytest.approx(2 * n, abs=1e-6)
    sig = res.sigmas
    for z in sig:
        rho = 0.4 * np.min(np.abs(sig[sig != z] - z))
        c, loc = det_zero_in_disc(pencil, z, rho)
        assert c == pytest.approx(1, abs=1e-8)
        assert abs(loc - z) <= 1e-8 * (1 + abs(z))


def test_determinant_zeros_match_companion_at_N16(desk_bg):
    p = assemble_pencil(desk_bg, 0, 0.01, N=16)
    sig = qep_eigenvalues(p).sigmas
    for z in sig[:4]:
        rho = 0.3 * np.min(np.abs(sig[sig != z] - z))
        c, loc = det_zero_in_disc(p, z, rho)
        assert c == pytest.approx(1, abs=1e-6)
        assert abs(loc - z) <= 1e-6 * (1 + abs(z))


def test_filter_keeps_exact_and_drops_artifacts(desk_bg):
    a = qep_eigenvalues(assemble_pencil(desk_bg, 0, 0.0, N=64))
    b = qep_eigenvalues(assemble_pencil(desk_bg, 0, 0.0, N=96))
    kept = filter_converged(a, b)
    assert any(abs(m.sigma) < 1e-8 and m.converged for m in kept.modes)
    rng = np.random.default_rng(0)
    fake = [Mode(complex(z), 0.0, True) for z in 50 * (rng.normal(size=5) + 1j * rng.normal(size=5))]
    other = [Mode(complex(z) * 1.01, 0.0, True) for z in (m.sigma for m in fake)]
    out = filter_converged(SpectrumResult(fake, (64,)), SpectrumResult(other, (96,)))
    assert not any(m.converged for m in out.modes)
    strict = filter_converged(a, b, tol=0.0)
    assert len(strict.converged_modes()) <= 1


def test_spectral_convergence_between_resolutions(desk_bg):
    ser = sigma_plus_series(desk_bg, 0.01)
    p64, p96 = (assemble_pencil(desk_bg, 0, 0.01, N=N) for N in (64, 96))
    z64, _, _ = refine_newton(p64, ser)
    z96, _, _ = refine_newton(p96, ser)
    assert abs(z64 - z96) <= 1e-8 * (1 + abs(z64))


def test_higher_harmonic_modes_decay(desk_bg):
    res = spectrum(desk_bg, 1, 0.01)
    conv = res.converged_modes()
    assert conv
    assert all(m.sigma.imag < 0 for m in conv)


# ---------------------------------------------------------------------------
# Newton


def test_newton_from_exact_eigenvalue(desk_bg):
    p = assemble_pencil(desk_bg, 0, 0.01)
    res = qep_eigenvalues(p)
    m = min(res.modes, key=lambda m: abs(m.sigma - sigma_plus_series(desk_bg, 0.01)))
    z, u, trace = refine_newton(p, m.sigma, m.vector)
    assert len(trace) - 1 <= 3
    assert abs(z - m.sigma) <= 1e-10 * (1 + abs(z))
    assert np.linalg.norm(u) == pytest.approx(1.0)


def test_newton_from_series_reaches_eigenvalue(desk_bg):
    p = assemble_pencil(desk_bg, 0, 0.02)
    z, _, trace = refine_newton(p, sigma_plus_series(desk_bg, 0.02))
    sig = qep_eigenvalues(p).sigmas
    assert np.min(np.abs(sig - z)) <= 1e-10 * (1 + abs(z))
    assert trace[-1]["residual"] <= 1e-10


def test_newton_never_returns_seed_silently(desk_bg):
    p = assemble_pencil(desk_bg, 0, 0.01)
    a2 = quadratic_coeffs(desk_bg, 0.0)[0].a2
    seed = -10j * a2
    try:
        z, u, trace = refine_newton(p, seed)
    except NoConvergence as exc:
        assert exc.trace
    else:
        sig = qep_eigenvalues(p).sigmas
        assert np.min(np.abs(sig - z)) <= 1e-8 * (1 + abs(z))
        assert trace[-1]["residual"] <= 1e-10


# ---------------------------------------------------------------------------
# Grushin scalar


def test_reduced_scalar_zero_at_origin(desk_bg):
    p = assemble_pencil(desk_bg)
    val, cond = reduced_scalar(p, 0.0)
    _, q = quadratic_coeffs(desk_bg, 0.0)
    K = quadratic_coeffs(desk_bg, 0.0)[0].K
    assert abs(val) <= 1e-8 * K * abs(q.A) ** 2
    with pytest.raises(ConditionError):
        reduced_scalar(p, 0.0, cond_max=10.0)


def test_reduced_scalar_matches_principal_part(desk_bg):
    out = {}
    for s in (0.02, 0.01):
        p = assemble_pencil(desk_bg, 0, s)
        c = sigma_plus_series(desk_bg, s)
        rho = 0.5 * s * s * im_sigma_plus_leading(desk_bg)
        z = c + rho * np.exp(2j * np.pi * np.arange(16) / 16)
        out[s] = max(abs(reduced_scalar(p, zi)[0] - principal_scalar(desk_bg, zi, s)) for zi in z)
        assert winding_number(lambda w: reduced_scalar(p, w)[0], c, rho) == 1
    assert out[0.02] / out[0.01] == pytest.approx(8, rel=0.3)


def test_winding_number_simple():
    assert winding_number(lambda z: z**2, 0, 1) == 2
    assert winding_number(lambda z: z - 3, 0, 1) == 0
    with pytest.raises(ValueError):
        winding_number(lambda z: z - 1, 0, 1, n=4)
