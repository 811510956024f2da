"""Husimi Q-function, polar phase density, moments and quadrature variance.

Moments always come from Fock-basis traces; the Q-grid integrals are a
secondary cross-check only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.integrate
import scipy.optimize

from rabisq.dynamics import GrwaCoefficients, OscDensityMatrix, make_propagator
from rabisq.errors import DegenerateG, QuadratureFailure, SeriesNotConverged, TruncationTooSmall
from rabisq.fock import coherent_amplitudes
from rabisq.model import DerivedParams, ModelParams
from rabisq.specfun import hermite_scaled_table
from rabisq.spectrum import GrwaSpectrum

Q_MAX = 1.0 / math.pi
DEFAULT_RESOLUTION = 161
DEFAULT_HALF_WIDTH = 4.0
REFINE_CANDIDATES = 8


class Moments(NamedTuple):
    a1: complex
    a2: complex
    n_mean: float


@dataclass(frozen=True)
class QGrid:
    """Q sampled on a square grid ``[-half_width, half_width]^2``.

    ``values[i, j]`` is Q at ``re_axis[j] + 1j * im_axis[i]``.
    """

    re_axis: np.ndarray
    im_axis: np.ndarray
    values: np.ndarray
    time: float = 0.0

    @property
    def cell(self) -> float:
        return float((self.re_axis[1] - self.re_axis[0]) * (self.im_axis[1] - self.im_axis[0]))

    @property
    def integral(self) -> float:
        return float(np.sum(self.values) * self.cell)

    @property
    def leakage(self) -> float:
        return 1.0 - self.integral


@dataclass(frozen=True)
class VarianceSeries:
    times: np.ndarray
    v_phi: np.ndarray
    phi: float
    min_value: float
    min_time: float
    window: tuple[float, float] | None = None


def _rho(rho) -> np.ndarray:
    return rho.rho if isinstance(rho, OscDensityMatrix) else np.asarray(rho)


def husimi_q_many(rho, betas) -> np.ndarray:
    """``Q(beta) = <beta|rho|beta>/pi`` for an array of ``beta``.

    The coherent amplitudes on levels ``0..N`` are exact, so no bound on
    ``|beta|`` is needed: a state confined to the truncated space has an
    exact Q everywhere.
    """
    r = _rho(rho)
    betas = np.asarray(betas, dtype=complex)
    flat = betas.reshape(-1)
    out = np.empty(flat.shape)
    chunk = 4096
    for s in range(0, flat.size, chunk):
        c = coherent_amplitudes(flat[s : s + chunk], r.shape[0] - 1)
        q = np.einsum("mi,ij,mj->m", c.conj(), r, c, optimize=True)
        if np.max(np.abs(q.imag)) > 1e-12:
            raise ValueError("rho is not Hermitian: complex Q value")
        if q.real.min() < -1e-12:
            raise ValueError("rho is not positive semidefinite: negative Q value")
        # roundoff far in the tail can dip just below zero
        out[s : s + chunk] = np.maximum(q.real, 0.0) / math.pi
    return out.reshape(betas.shape)


def husimi_q(rho, beta: complex) -> float:
    return float(husimi_q_many(rho, np.array([beta]))[0])


def moments(rho) -> Moments:
    """``<a>``, ``<a^2>`` and ``<a^+ a>`` by Fock-basis traces."""
    r = _rho(rho)
    n = r.shape[0] - 1
    k = np.arange(n + 1)
    # Tr(rho a) = sum_k rho[k+1, k] sqrt(k+1)
    a1 = np.sum(np.diagonal(r, -1) * np.sqrt(k[1:]))
    a2 = np.sum(np.diagonal(r, -2) * np.sqrt(k[1:-1] * k[2:]))
    n_mean = float(np.sum(np.diagonal(r).real * k))
    if n_mean >= 0.99 * n:
        raise TruncationTooSmall(f"<n> = {n_mean:.3g} is within 1% of n_trunc = {n}")
    return Moments(complex(a1), complex(a2), n_mean)


def moments_from_states(psi) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Moments of the oscillator for a stack of bipartite vectors ``(T, 2(N+1))``.

    Equal to :func:`moments` of the partial trace, without forming it.
    """
    psi = np.asarray(psi)
    blocks = psi.reshape(psi.shape[0], 2, -1)
    k = np.arange(blocks.shape[-1])
    s1 = np.sqrt(k[1:])
    s2 = np.sqrt(k[1:-1] * k[2:])
    a1 = np.einsum("tqk,tqk->t", blocks[:, :, :-1].conj(), s1 * blocks[:, :, 1:])
    a2 = np.einsum("tqk,tqk->t", blocks[:, :, :-2].conj(), s2 * blocks[:, :, 2:])
    n_mean = np.einsum("tqk,k->t", np.abs(blocks) ** 2, k)
    return a1, a2, n_mean


def _variance(a1, a2, n_mean, phi):
    return np.real((a2 - a1**2) * np.exp(-2j * phi)) + n_mean - np.abs(a1) ** 2 + 0.5


def variance_phi(rho, phi: float) -> float:
    """Variance of ``X_phi = (a e^{-i phi} + a^+ e^{i phi}) / sqrt(2)``."""
    m = rho if isinstance(rho, Moments) else moments(rho)
    return float(_variance(m.a1, m.a2, m.n_mean, phi))


def variance_extrema(m: Moments) -> tuple[float, float]:
    """Minimum and maximum of the variance over the quadrature phase."""
    base = m.n_mean - abs(m.a1) ** 2 + 0.5
    amp = abs(m.a2 - m.a1**2)
    return base - amp, base + amp


def auto_half_width(rho) -> float:
    """Grid half-width holding all but a negligible tail of Q.

    Taken as ``|<a>| + 5 sigma``, never below 4, with ``sigma^2 = (V_max + 1/2) / 2``
    the largest variance of ``Re(beta e^{-i phi})`` under Q.
    """
    m = moments(rho)
    _, vmax = variance_extrema(m)
    return max(DEFAULT_HALF_WIDTH, abs(m.a1) + 5.0 * math.sqrt(0.5 * (vmax + 0.5)))


def q_grid(rho, half_width: float | None = None, resolution: int = DEFAULT_RESOLUTION, time: float | None = None) -> QGrid:
    r = _rho(rho)
    if half_width is None:
        half_width = auto_half_width(r)
    axis = np.linspace(-half_width, half_width, resolution)
    beta = axis[None, :] + 1j * axis[:, None]
    if time is None:
        time = rho.time if isinstance(rho, OscDensityMatrix) else 0.0
    return QGrid(axis, axis.copy(), husimi_q_many(r, beta), float(time))


def moments_from_q(grid: QGrid) -> Moments:
    """Moments from ``<a^k> = ∫ beta^k Q`` and ``<a^+ a> = ∫ |beta|^2 Q - 1``."""
    beta = grid.re_axis[None, :] + 1j * grid.im_axis[:, None]
    w = grid.values * grid.cell
    return Moments(complex(np.sum(beta * w)), complex(np.sum(beta**2 * w)), float(np.sum(np.abs(beta) ** 2 * w) - 1.0))


def _radial_limit(r: np.ndarray) -> float:
    m = moments(r)
    _, vmax = variance_extrema(m)
    return abs(m.a1) + 10.0 * math.sqrt(vmax + 0.5) + 2.0


def polar_density(rho, theta: float, epsabs: float = 1e-11) -> float:
    """``∫_0^∞ Q(s e^{i theta}) s ds`` by adaptive quadrature.

    The upper limit is pushed out until the integrand is below 1e-12.
    """
    r = _rho(rho)
    ray = np.exp(1j * theta)

    def f(s):
        return husimi_q_many(r, np.array([s * ray]))[0] * s

    upper = _radial_limit(r)
    for _ in range(8):
        if f(upper) < 1e-12:
            break
        upper *= 1.5
    else:
        raise QuadratureFailure("radial integrand does not decay")
    val, err = scipy.integrate.quad(f, 0.0, upper, epsabs=epsabs, epsrel=1e-10, limit=200)
    if err > 1e-8:
        raise QuadratureFailure(f"radial quadrature error estimate {err:.2e}")
    return float(val)


def polar_density_many(rho, thetas, epsabs: float = 1e-11) -> np.ndarray:
    """:func:`polar_density` for many angles at once (vector-valued adaptive quadrature)."""
    r = _rho(rho)
    rays = np.exp(1j * np.asarray(thetas, dtype=float))

    def f(s):
        return husimi_q_many(r, s * rays) * s

    upper = _radial_limit(r)
    for _ in range(8):
        if np.max(f(upper)) < 1e-12:
            break
        upper *= 1.5
    else:
        raise QuadratureFailure("radial integrand does not decay")
    val, err = scipy.integrate.quad_vec(f, 0.0, upper, epsabs=epsabs, epsrel=1e-10, norm="max", limit=400)
    if err > 1e-8:
        raise QuadratureFailure(f"radial quadrature error estimate {err:.2e}")
    return np.asarray(val)


def polar_normalization(rho, n_theta: int = 64) -> float:
    """``∫_0^{2pi} polar_density dtheta`` by the periodic trapezoid rule."""
    thetas = 2 * math.pi * np.arange(n_theta) / n_theta
    return float(np.sum(polar_density_many(rho, thetas)) * 2 * math.pi / n_theta)


def q_weights(d: DerivedParams, beta: complex, n_max: int):
    """Phase-space weights ``H^(±)_{n,m}(beta)`` for ``n, m = 0..n_max``.

    ``H^(±)_{n,m} = (<beta|r,n+><r,m+|beta> ± <beta|r,n-><r,m-|beta>) / pi``,
    evaluated from the closed form with Hermite polynomials at
    ``i beta±* / sqrt(2 mu nu)``, ``beta± = beta ± eta (mu - nu)``. The
    ``exp(4 eta^2 / nu^2)`` factors of the two exponentials cancel
    analytically and are never formed.
    """
    if d.nu == 0:
        raise DegenerateG("closed-form weights are singular at g = 0")
    mu, nu, eta = d.mu, d.nu, d.eta
    c = math.sqrt(2 * mu * nu)
    beta = complex(beta)
    ns = np.arange(n_max + 1)
    # (-1)^n (-nu/mu)^{(n+m)/2} on the principal branch = (-1)^n i^{n+m} (nu/mu)^{(n+m)/2}
    phase = (1j * math.sqrt(nu / mu)) ** ns
    left = (-1.0) ** ns * phase
    base = -(eta**2 / mu) * (mu - nu) + nu**2 * abs(beta) ** 2 / (4 * mu**2) - abs(beta + nu / (2 * mu) * beta.conjugate()) ** 2
    out = []
    for s in (1, -1):
        b_s = beta + s * eta * (mu - nu)
        expo = base - s * (2 * eta / mu) * beta.real
        hn = hermite_scaled_table(np.array(1j * b_s.conjugate() / c), n_max)
        hm = hermite_scaled_table(np.array(-1j * b_s / c), n_max)
        out.append(math.exp(expo) * np.outer(left * hn, phase * hm) / (math.pi * mu))
    plus, minus = out
    return plus + minus, plus - minus


def husimi_q_closedform(coeffs: GrwaCoefficients, spec: GrwaSpectrum, d: DerivedParams, beta: complex) -> float:
    """Q from the GRWA amplitudes and the closed-form weights (g > 0).

    ``Q = 1/2 sum_{n,m} (K+_{nm} H+_{nm} + K-_{nm} H-_{nm})`` with
    ``K+ = a a^+ + b b^+`` and ``K- = a b^+ + b a^+`` over the adiabatic
    labels; this is the double series over ``C0``, ``A_n``, ``B_n``.
    """
    if d.nu == 0:
        raise DegenerateG("closed-form Q is singular at g = 0; use husimi_q")
    if abs(coeffs.norm2() - 1.0) > 1e-8:
        raise SeriesNotConverged(f"coefficient series holds only {coeffs.norm2():.10f} of the norm")
    a, b = coeffs.ab(spec)
    h_plus, h_minus = q_weights(d, beta, coeffs.n_max)
    k_plus = np.outer(a, a.conj()) + np.outer(b, b.conj())
    k_minus = np.outer(a, b.conj()) + np.outer(b, a.conj())
    q = 0.5 * np.sum(k_plus * h_plus + k_minus * h_minus)
    return float(q.real)


def _refine_minimum(func, times: np.ndarray, values: np.ndarray, i: int, xtol: float = 0.01) -> tuple[float, float]:
    if i == 0 or i == len(times) - 1 or not values[i] < min(values[i - 1], values[i + 1]):
        return float(times[i]), float(values[i])
    lo, mid, hi = times[i - 1], times[i], times[i + 1]
    # golden-section; scipy's tolerance is relative to |t|
    res = scipy.optimize.minimize_scalar(
        func, bracket=(lo, mid, hi), method="golden", options={"xtol": xtol / (2 * max(abs(mid), 1.0))}
    )
    if res.fun < values[i] and lo <= res.x <= hi:
        return float(res.x), float(res.fun)
    return float(mid), float(values[i])


def default_times(t_max: float = 300.0, dt: float = 0.25) -> np.ndarray:
    return np.linspace(0.0, t_max, int(round(t_max / dt)) + 1)


def variance_series(
    p: ModelParams,
    phi: float = 0.0,
    times=None,
    propagator: str = "grwa",
    n_trunc: int = 100,
    window: tuple[float, float] | None = None,
    prop=None,
) -> VarianceSeries:
    """``V_phi`` on a time grid plus the refined minimum.

    The minimum is searched over the whole grid, or only inside ``window``
    when given. The lowest few grid minima are each polished by
    golden-section search to ``Δ(omega t) = 0.01`` and the best is kept.
    """
    times = default_times() if times is None else np.asarray(times, dtype=float)
    prop = make_propagator(p, propagator, n_trunc) if prop is None else prop
    a1, a2, nm = moments_from_states(prop.bipartite(times))
    v = _variance(a1, a2, nm, phi)
    if np.any(v <= 0):
        raise TruncationTooSmall("non-positive variance")

    def at(t):
        m = moments_from_states(prop.bipartite([t]))
        return float(_variance(*[x[0] for x in m], phi))

    if window is None:
        idx = np.arange(len(times))
    else:
        idx = np.nonzero((times >= window[0]) & (times <= window[1]))[0]
        if idx.size == 0:
            raise ValueError(f"window {window} holds no grid times")
    # the grid can miss a sharp dip, so polish the lowest few grid minima
    sub = v[idx]
    local = [j for j in range(len(sub)) if (j == 0 or sub[j] <= sub[j - 1]) and (j == len(sub) - 1 or sub[j] <= sub[j + 1])]
    candidates = sorted(local, key=lambda j: sub[j])[:REFINE_CANDIDATES]
    best = None
    for j in candidates:
        t_c, v_c = _refine_minimum(at, times, v, int(idx[j]))
        if window is not None and not window[0] <= t_c <= window[1]:
            t_c, v_c = float(times[idx[j]]), float(sub[j])
        if best is None or v_c < best[1]:
            best = (t_c, v_c)
    t_min, v_min = best
    return VarianceSeries(times, v, phi, v_min, t_min, window)
