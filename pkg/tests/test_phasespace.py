import math

import numpy as np
import pytest
import scipy.optimize

from rabisq.dynamics import GrwaCoefficients, GrwaPropagator, partial_trace_qubit
from rabisq.errors import DegenerateG, SeriesNotConverged, TruncationTooSmall
from rabisq.fock import coherent_vector, displaced_squeezed_basis_matrix, squeeze_matrix
from rabisq.model import ModelParams, derive
from rabisq.phasespace import (
    Moments,
    auto_half_width,
    husimi_q,
    husimi_q_closedform,
    husimi_q_many,
    moments,
    moments_from_q,
    moments_from_states,
    polar_density,
    polar_density_many,
    polar_normalization,
    q_grid,
    q_weights,
    variance_extrema,
    variance_phi,
    variance_series,
)

B1 = ModelParams(1.0, 0.3, 0.1, 0.35)
N = 60


def projector(v):
    return np.outer(v, v.conj())


def vacuum(n=N):
    rho = np.zeros((n + 1, n + 1), dtype=complex)
    rho[0, 0] = 1
    return rho


@pytest.fixture(scope="module")
def b1_prop():
    return GrwaPropagator(B1, 100)


@pytest.fixture(scope="module")
def b1_rho(b1_prop):
    return b1_prop.density(264.0)


def test_vacuum_q():
    rho = vacuum()
    assert np.isclose(husimi_q(rho, 0), 1 / math.pi)
    for beta in (0.5, 1 - 1j, 2.5j):
        assert np.isclose(husimi_q(rho, beta), math.exp(-abs(beta) ** 2) / math.pi, rtol=1e-12)


def test_coherent_q_peak():
    beta0 = 0.8 - 0.3j
    rho = projector(coherent_vector(beta0, N))
    assert np.isclose(husimi_q(rho, beta0), 1 / math.pi, atol=1e-12)
    assert np.isclose(husimi_q(rho, 0), math.exp(-abs(beta0) ** 2) / math.pi)


def test_q_bounds_and_normalization(b1_rho):
    grid = q_grid(b1_rho)
    assert grid.values.min() >= 0
    assert grid.values.max() <= 1 / math.pi + 1e-12
    assert abs(grid.integral - 1) < 1e-4
    assert grid.time == 264.0


def test_fixed_grid_leakage_reported(b1_rho):
    # the anti-squeezed lobe reaches past |beta| = 4
    grid = q_grid(b1_rho, half_width=4.0)
    assert 0 < grid.leakage < 1e-2
    assert auto_half_width(b1_rho) > 4.0
    assert auto_half_width(vacuum()) == 4.0


def test_q_many_matches_scalar(b1_rho):
    betas = np.array([[0.1, -1 + 0.5j], [2j, 3.0]])
    q = husimi_q_many(b1_rho, betas)
    assert q.shape == (2, 2)
    for idx in np.ndindex(betas.shape):
        assert q[idx] == pytest.approx(husimi_q(b1_rho, betas[idx]), abs=1e-15)


def test_q_weights_match_inner_products():
    d = derive(B1)
    beta = 0.7 - 0.4j
    hp, hm = q_weights(d, beta, 12)
    cb = coherent_vector(beta, 120).conj()
    vp = cb @ displaced_squeezed_basis_matrix(d, 1, 12, 120)
    vm = cb @ displaced_squeezed_basis_matrix(d, -1, 12, 120)
    assert np.allclose(hp, (np.outer(vp, vp.conj()) + np.outer(vm, vm.conj())) / math.pi, atol=1e-12)
    assert np.allclose(hm, (np.outer(vp, vp.conj()) - np.outer(vm, vm.conj())) / math.pi, atol=1e-12)


def test_q_weights_small_g_finite():
    # the individually huge exp(4 eta^2 / nu^2) factors must cancel
    d = derive(ModelParams(1.0, 0.3, 0.1, 1e-6))
    hp, hm = q_weights(d, 0.3 + 0.2j, 8)
    assert np.all(np.isfinite(hp)) and np.all(np.isfinite(hm))


def test_closedform_initial_vacuum(b1_prop):
    c = b1_prop.coefficients_at(0.0)
    for beta in (0.0, 0.5, 1 + 1j):
        q = husimi_q_closedform(c, b1_prop.spectrum, b1_prop.derived, beta)
        assert abs(q - math.exp(-abs(beta) ** 2) / math.pi) < 1e-6


def test_closedform_matches_oracle(b1_prop, b1_rho):
    c = b1_prop.coefficients_at(264.0)
    for beta in (0.5, -1.2 + 0.3j, 2.0 - 2.0j):
        assert abs(husimi_q_closedform(c, b1_prop.spectrum, b1_prop.derived, beta) - husimi_q(b1_rho, beta)) < 1e-6


def test_closedform_far_tail(b1_prop, b1_rho):
    c = b1_prop.coefficients_at(264.0)
    beta = 6 * np.exp(0.3j)
    q = husimi_q_closedform(c, b1_prop.spectrum, b1_prop.derived, beta)
    assert q < 1e-8
    assert abs(q - husimi_q(b1_rho, beta)) < 1e-10


def test_closedform_errors(b1_prop):
    g0 = GrwaPropagator(ModelParams(1.0, 0.3, 0.1, 0.0), 60)
    with pytest.raises(DegenerateG):
        husimi_q_closedform(g0.coefficients, g0.spectrum, g0.derived, 0.1)
    c = b1_prop.coefficients
    short = GrwaCoefficients(c.C0, c.C_plus[:2], c.C_minus[:2])
    with pytest.raises(SeriesNotConverged):
        husimi_q_closedform(short, b1_prop.spectrum, b1_prop.derived, 0.1)


@pytest.mark.parametrize("theta", [0.0, 1.0, math.pi, 5.5])
def test_polar_vacuum(theta):
    assert abs(polar_density(vacuum(), theta) - 1 / (2 * math.pi)) < 1e-9


def test_polar_many_matches_scalar(b1_rho):
    thetas = np.array([0.2, 2.0, 4.0])
    many = polar_density_many(b1_rho, thetas)
    for th, val in zip(thetas, many):
        assert abs(val - polar_density(b1_rho, th)) < 1e-9


def test_polar_normalization(b1_rho):
    assert abs(polar_normalization(b1_rho) - 1) < 1e-6
    assert abs(polar_normalization(vacuum()) - 1) < 1e-6


def test_polar_two_lobes(b1_rho):
    thetas = 2 * math.pi * np.arange(72) / 72
    q = polar_density_many(b1_rho, thetas)
    peaks = [i for i in range(72) if q[i] > q[i - 1] and q[i] > q[(i + 1) % 72]]
    assert len(peaks) == 2
    gap = abs(thetas[peaks[1]] - thetas[peaks[0]])
    assert abs(gap - math.pi) < math.pi / 4
    assert q.max() > 2 / (2 * math.pi) and q.min() < 1 / (2 * math.pi)


def test_moments_vacuum_and_coherent():
    m = moments(vacuum())
    assert m == Moments(0, 0, 0.0)
    m = moments(projector(coherent_vector(0.5, N)))
    assert np.isclose(m.a1, 0.5) and np.isclose(m.a2, 0.25) and np.isclose(m.n_mean, 0.25)


def test_moments_squeezed_vacuum():
    # S(-r) here is the textbook S(r), whose <a^2> is -cosh r sinh r
    r = 0.3
    psi = squeeze_matrix(-r, N)[:, 0]
    m = moments(projector(psi))
    assert abs(m.a1) < 1e-12
    assert np.isclose(m.a2, -math.cosh(r) * math.sinh(r), atol=1e-10)
    assert np.isclose(m.n_mean, math.sinh(r) ** 2, atol=1e-10)
    assert np.isclose(variance_phi(m, 0.0), math.exp(-2 * r) / 2, atol=1e-10)
    # the package's own S(r) squeezes the other quadrature
    m = moments(projector(squeeze_matrix(r, N)[:, 0]))
    assert np.isclose(variance_phi(m, math.pi / 2), math.exp(-2 * r) / 2, atol=1e-10)


def test_moments_truncation_guard():
    rho = np.zeros((11, 11))
    rho[10, 10] = 1
    with pytest.raises(TruncationTooSmall):
        moments(rho)


def test_moments_from_q_agree(b1_rho):
    m1 = moments(b1_rho)
    m2 = moments_from_q(q_grid(b1_rho))
    assert abs(m1.a1 - m2.a1) < 1e-5 and abs(m1.a2 - m2.a2) < 1e-5 and abs(m1.n_mean - m2.n_mean) < 1e-5


def test_moments_from_states_match(b1_prop):
    psi = b1_prop.bipartite([0.0, 120.0, 264.0])
    a1, a2, nm = moments_from_states(psi)
    for k in range(3):
        m = moments(partial_trace_qubit(psi[k]))
        assert np.isclose(a1[k], m.a1) and np.isclose(a2[k], m.a2) and np.isclose(nm[k], m.n_mean)


def test_variance_vacuum_and_mixed():
    for phi in (0.0, 0.7, 2.0):
        assert variance_phi(vacuum(), phi) == pytest.approx(0.5)
    rho = np.diag([0.5, 0.5] + [0.0] * 9)
    assert variance_phi(rho, 1.1) == pytest.approx(1.0)


def test_variance_period_and_extrema(b1_rho):
    m = moments(b1_rho)
    for phi in (0.1, 1.3, 2.9):
        assert np.isclose(variance_phi(m, phi), variance_phi(m, phi + math.pi), atol=1e-14)
    lo, hi = variance_extrema(m)
    f = lambda x: variance_phi(m, x)
    res_lo = scipy.optimize.minimize_scalar(f, bounds=(0, math.pi), method="bounded", options={"xatol": 1e-10})
    res_hi = scipy.optimize.minimize_scalar(lambda x: -f(x), bounds=(0, math.pi), method="bounded", options={"xatol": 1e-10})
    assert abs(res_lo.fun - lo) < 1e-8
    assert abs(-res_hi.fun - hi) < 1e-8


def test_uncertainty_relation(b1_prop):
    times = np.linspace(0, 300, 61)
    a1, a2, nm = moments_from_states(b1_prop.bipartite(times))
    for phi in (0.0, 0.4, 1.2):
        v1 = np.real((a2 - a1**2) * np.exp(-2j * phi)) + nm - np.abs(a1) ** 2 + 0.5
        v2 = np.real((a2 - a1**2) * np.exp(-2j * (phi + math.pi / 2))) + nm - np.abs(a1) ** 2 + 0.5
        assert np.all(v1 * v2 >= 0.25 - 1e-9)


@pytest.mark.parametrize("kind", ["grwa", "exact"])
def test_series_decoupled_constant(kind):
    s = variance_series(ModelParams(1.0, 0.3, 0.0, 0.0), 0.0, np.linspace(0, 50, 21), kind, 30)
    assert np.allclose(s.v_phi, 0.5)
    assert np.isclose(s.min_value, 0.5)


def test_series_window_and_refinement(b1_prop):
    times = np.linspace(0, 300, 1201)
    s = variance_series(B1, 0.0, times, window=(261.0, 267.0), prop=b1_prop)
    assert 261.0 <= s.min_time <= 267.0
    assert np.all(s.v_phi > 0)
    inside = s.v_phi[(times >= 261) & (times <= 267)]
    assert s.min_value <= inside.min() + 1e-15
    with pytest.raises(ValueError):
        variance_series(B1, 0.0, times, window=(400.0, 410.0), prop=b1_prop)


def test_series_global_minimum(b1_prop):
    times = np.linspace(0, 300, 1201)
    s = variance_series(B1, 0.0, times, prop=b1_prop)
    assert s.min_value <= s.v_phi.min() + 1e-15
    assert s.window is None
