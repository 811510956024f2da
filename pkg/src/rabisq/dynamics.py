"""Evolution of ``|psi(0)> = |-x> ⊗ |0>`` and the oscillator's reduced
density matrix.

Two propagators share one interface: :class:`GrwaPropagator` (expansion in
GRWA eigenstates) and :class:`ExactPropagator` (full diagonalisation of the
truncated Hamiltonian). Times are always the scaled ``omega * t``.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, replace

import numpy as np

from rabisq.errors import DegenerateG, TruncationTooSmall
from rabisq.fock import TAU_NORM, displaced_squeezed_basis_matrix
from rabisq.model import DerivedParams, ModelParams, derive
from rabisq.specfun import hermite_scaled_seq
from rabisq.spectrum import GrwaSpectrum, exact_eigs, exact_hamiltonian, grwa_eigenbasis, grwa_spectrum

TAIL_TOL = 1e-18


@dataclass(frozen=True)
class GrwaCoefficients:
    """Amplitudes on ``|E0>`` and ``|E±,n>``, ``n = 1..n_max`` (index ``n-1``)."""

    C0: complex
    C_plus: np.ndarray
    C_minus: np.ndarray
    time: float = 0.0

    @property
    def n_max(self) -> int:
        return len(self.C_plus)

    def norm2(self) -> float:
        return abs(self.C0) ** 2 + float(np.sum(np.abs(self.C_plus) ** 2 + np.abs(self.C_minus) ** 2))

    def vector(self) -> np.ndarray:
        """Flat ``[C0, C+1, C-1, C+2, C-2, ...]`` matching :func:`grwa_eigenbasis`."""
        out = np.empty(1 + 2 * self.n_max, dtype=complex)
        out[0] = self.C0
        out[1::2] = self.C_plus
        out[2::2] = self.C_minus
        return out

    def ab(self, spec: GrwaSpectrum):
        """Weights on ``|E+,k>`` and ``|E-,k>``, ``k = 0..n_max``.

        ``a[k] = A_{k+1}`` (zero for ``k = n_max``) and ``b[k] = B_k`` with
        ``B_0 = C0``.
        """
        n = self.n_max
        zp, zm, sg = spec.zeta_plus[:n], spec.zeta_minus[:n], spec.sign_dt[:n]
        a = np.zeros(n + 1, dtype=complex)
        b = np.zeros(n + 1, dtype=complex)
        a[:n] = zp * self.C_plus + zm * self.C_minus
        b[0] = self.C0
        b[1:] = sg * (zm * self.C_plus - zp * self.C_minus)
        return a, b


@dataclass(frozen=True)
class OscDensityMatrix:
    rho: np.ndarray
    time: float = 0.0

    @property
    def n_trunc(self) -> int:
        return self.rho.shape[0] - 1

    @property
    def purity(self) -> float:
        return float(np.real(np.vdot(self.rho.conj().T, self.rho)))

    def violations(self, tol_trace: float = TAU_NORM, tol_psd: float = 1e-8) -> list[str]:
        out = []
        if np.max(np.abs(self.rho - self.rho.conj().T)) > 1e-12:
            out.append("NotHermitian")
        if abs(np.trace(self.rho).real - 1.0) > tol_trace:
            out.append("TraceNotOne")
        if np.linalg.eigvalsh(0.5 * (self.rho + self.rho.conj().T))[0] < -tol_psd:
            out.append("NotPSD")
        return out


def initial_state(n_trunc: int) -> np.ndarray:
    """``|-x> ⊗ |0>`` in the ``[|+x> block, |-x> block]`` layout."""
    if n_trunc < 1:
        raise ValueError("n_trunc must be >= 1")
    psi = np.zeros(2 * (n_trunc + 1), dtype=complex)
    psi[n_trunc + 1] = 1.0
    return psi


def _log_ratio(d: DerivedParams) -> complex:
    # principal branch of log(-nu/(2 mu))
    return cmath.log(complex(-d.nu / (2 * d.mu), 0.0))


def vacuum_weights(d: DerivedParams, n_max: int) -> np.ndarray:
    """``w_n = <r,n-|0>`` for ``n = 0..n_max``.

    For g > 0 this is the squeezed-coherent expansion written with scaled
    Hermite polynomials at ``i (mu - nu) eta / sqrt(2 mu nu)``; for g = 0 it
    reduces to the coherent amplitudes of ``|-eta>``.
    """
    ns = np.arange(n_max + 1)
    if d.nu == 0:
        lf = np.array([math.lgamma(k + 1) for k in ns])
        if d.eta == 0:
            out = np.zeros(n_max + 1, dtype=complex)
            out[0] = 1.0
            return out
        return (np.exp(-0.5 * d.eta**2 + ns * math.log(d.eta) - 0.5 * lf) * (-1.0) ** ns).astype(complex)
    c0 = math.exp(-0.5 * d.eta**2 + d.nu * d.eta**2 / (2 * d.mu)) / math.sqrt(d.mu)
    z = 1j * (d.mu - d.nu) * d.eta / math.sqrt(2 * d.mu * d.nu)
    pref = np.exp(0.5 * ns * (_log_ratio(d) + math.log(2.0)))
    return c0 * pref * hermite_scaled_seq(z, n_max)


def coefficient_cutoff(d: DerivedParams, n_trunc: int, tail_tol: float = TAIL_TOL) -> int:
    """Smallest ``n_max`` leaving less than ``tail_tol`` of the norm outside
    the doublets ``1..n_max``, capped at ``n_trunc // 2``."""
    cap = n_trunc // 2
    w2 = np.abs(vacuum_weights(d, cap)) ** 2
    # weight beyond doublet n is sum_{k>n} |w_k|^2 + |w_n|^2 / 2, summed from the small end
    above = np.concatenate([np.cumsum(w2[::-1])[::-1][1:], [0.0]])
    tail = above + 0.5 * w2
    hits = np.nonzero(tail < tail_tol)[0]
    return int(max(hits[0], 1)) if hits.size else cap


def coefficients_analytic(spec: GrwaSpectrum, d: DerivedParams, n_max: int) -> GrwaCoefficients:
    """Closed-form amplitudes at t = 0 (g > 0 only).

    Powers of ``-nu/(2 mu)`` are taken on the principal branch.
    """
    if d.nu == 0:
        raise DegenerateG("closed-form coefficients are singular at g = 0; use coefficients_oracle")
    if n_max > spec.n_max:
        raise ValueError(f"spectrum only has {spec.n_max} doublets")
    c0 = -math.exp(-0.5 * d.eta**2 + d.nu * d.eta**2 / (2 * d.mu)) / math.sqrt(2 * d.mu)
    ns = np.arange(n_max + 1)
    z = 1j * (d.mu - d.nu) * d.eta / math.sqrt(2 * d.mu * d.nu)
    # (-nu/2mu)^{k/2} H_k(z)/sqrt(k!) == pref_k * h_k(z)
    term = np.exp(0.5 * ns * (_log_ratio(d) + math.log(2.0))) * hermite_scaled_seq(z, n_max)
    k = np.arange(n_max)
    zp, zm, sg = spec.zeta_plus[k], spec.zeta_minus[k], spec.sign_dt[k]
    c_plus = -c0 * (zp * term[k] - sg * zm * term[k + 1])
    c_minus = -c0 * (zm * term[k] + sg * zp * term[k + 1])
    return GrwaCoefficients(complex(c0), c_plus, c_minus)


def coefficients_oracle(spec: GrwaSpectrum, d: DerivedParams, n_max: int, n_trunc: int) -> GrwaCoefficients:
    """Amplitudes by explicit projection of ``|psi(0)>`` on the GRWA eigenvectors."""
    # only the low Fock components enter the projection, so column leakage is harmless here
    _, states = grwa_eigenbasis(spec, d, n_trunc, n_max, check=False)
    c = states.conj().T @ initial_state(n_trunc)
    return GrwaCoefficients(complex(c[0]), c[1::2].copy(), c[2::2].copy())


def evolve(coeffs: GrwaCoefficients, spec: GrwaSpectrum, t_scaled: float) -> GrwaCoefficients:
    n = coeffs.n_max
    t = t_scaled / spec.omega
    return replace(
        coeffs,
        C0=coeffs.C0 * cmath.exp(-1j * spec.E0 * t),
        C_plus=coeffs.C_plus * np.exp(-1j * spec.e_plus[:n] * t),
        C_minus=coeffs.C_minus * np.exp(-1j * spec.e_minus[:n] * t),
        time=coeffs.time + t_scaled,
    )


def reduced_density(coeffs: GrwaCoefficients, spec: GrwaSpectrum, d: DerivedParams, n_trunc: int) -> OscDensityMatrix:
    """Oscillator state as a sum of ``P^(±)_{n,m}`` projector pairs.

    ``P^(±)_{n,m} = (|r,n+><r,m+| ± |r,n-><r,m-|) / 2`` weighted by
    ``K+ = a a^+ + b b^+`` and ``K- = a b^+ + b a^+`` (see :meth:`GrwaCoefficients.ab`).
    """
    a, b = coeffs.ab(spec)
    n = coeffs.n_max
    up = displaced_squeezed_basis_matrix(d, +1, n, n_trunc, check=False)
    um = displaced_squeezed_basis_matrix(d, -1, n, n_trunc, check=False)
    k_plus = np.outer(a, a.conj()) + np.outer(b, b.conj())
    k_minus = np.outer(a, b.conj()) + np.outer(b, a.conj())
    rho = 0.5 * (up @ (k_plus + k_minus) @ up.conj().T + um @ (k_plus - k_minus) @ um.conj().T)
    lost = coeffs.norm2() - np.trace(rho).real
    if lost > TAU_NORM:
        raise TruncationTooSmall(f"reduced density loses {lost:.2e} of its trace beyond n_trunc = {n_trunc}")
    return OscDensityMatrix(rho, coeffs.time)


def partial_trace_qubit(psi: np.ndarray) -> np.ndarray:
    """``Tr_Q |psi><psi|`` for one bipartite vector or a stack ``(..., 2(N+1))``."""
    psi = np.asarray(psi)
    blocks = psi.reshape(psi.shape[:-1] + (2, psi.shape[-1] // 2))
    return np.einsum("...qi,...qj->...ij", blocks, blocks.conj())


def reduced_density_partial_trace(coeffs: GrwaCoefficients, spec: GrwaSpectrum, d: DerivedParams, n_trunc: int) -> OscDensityMatrix:
    """Same state as :func:`reduced_density`, via the full bipartite vector."""
    _, states = grwa_eigenbasis(spec, d, n_trunc, coeffs.n_max, check=False)
    return OscDensityMatrix(partial_trace_qubit(states @ coeffs.vector()), coeffs.time)


class GrwaPropagator:
    """GRWA evolution for a parameter set at fixed truncation."""

    def __init__(self, p: ModelParams, n_trunc: int = 100, tail_tol: float = TAIL_TOL, route: str = "auto"):
        self.params = p
        self.n_trunc = n_trunc
        self.derived = d = derive(p)
        n_max = coefficient_cutoff(d, n_trunc, tail_tol)
        self.spectrum = grwa_spectrum(p, d, n_max)
        if route == "auto":
            route = "analytic" if d.nu > 0 else "oracle"
        if route == "analytic":
            self.coefficients = coefficients_analytic(self.spectrum, d, n_max)
        else:
            self.coefficients = coefficients_oracle(self.spectrum, d, n_max, n_trunc)
        self.energies, self.states = grwa_eigenbasis(self.spectrum, d, n_trunc, n_max, check=False)
        self._c = self.coefficients.vector()
        weight = np.abs(self._c) ** 2
        if abs(weight.sum() - 1.0) > TAU_NORM:
            raise TruncationTooSmall(f"coefficient norm off by {abs(weight.sum() - 1):.2e}")
        # high doublets may spill past n_trunc; what matters is the weighted spill of the state
        leak = 1.0 - np.sum(np.abs(self.states) ** 2, axis=0)
        self.leakage = float(weight @ leak)
        if self.leakage > TAU_NORM:
            raise TruncationTooSmall(f"state loses {self.leakage:.2e} of its norm beyond n_trunc = {n_trunc}")

    def bipartite(self, times) -> np.ndarray:
        """``|psi(t)>`` for each scaled time; shape ``(T, 2(N+1))``."""
        t = np.atleast_1d(np.asarray(times, dtype=float)) / self.params.omega
        phases = np.exp(-1j * np.outer(t, self.energies)) * self._c
        return phases @ self.states.T

    def coefficients_at(self, t_scaled: float) -> GrwaCoefficients:
        return evolve(self.coefficients, self.spectrum, t_scaled)

    def density(self, t_scaled: float) -> OscDensityMatrix:
        return reduced_density(self.coefficients_at(t_scaled), self.spectrum, self.derived, self.n_trunc)


class ExactPropagator:
    """Evolution under the full truncated Hamiltonian."""

    def __init__(self, p: ModelParams, n_trunc: int = 100):
        self.params = p
        self.n_trunc = n_trunc
        self.energies, self.states = exact_eigs(exact_hamiltonian(p, n_trunc))
        self._c = self.states.conj().T @ initial_state(n_trunc)

    def bipartite(self, times) -> np.ndarray:
        t = np.atleast_1d(np.asarray(times, dtype=float)) / self.params.omega
        phases = np.exp(-1j * np.outer(t, self.energies)) * self._c
        return phases @ self.states.T

    def density(self, t_scaled: float) -> OscDensityMatrix:
        return OscDensityMatrix(partial_trace_qubit(self.bipartite(t_scaled)[0]), float(t_scaled))


def make_propagator(p: ModelParams, kind: str = "grwa", n_trunc: int = 100, **kw):
    if kind == "grwa":
        return GrwaPropagator(p, n_trunc, **kw)
    if kind == "exact":
        return ExactPropagator(p, n_trunc)
    raise ValueError(f"unknown propagator {kind!r}")


def evolve_exact_oracle(p: ModelParams, n_trunc: int, t_scaled: float) -> OscDensityMatrix:
    return ExactPropagator(p, n_trunc).density(t_scaled)


def trace_distance(rho1: np.ndarray, rho2: np.ndarray) -> float:
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(rho1 - rho2))))
