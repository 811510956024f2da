"""Adiabatic and GRWA spectra, GRWA eigenvectors in the Fock basis, and the
exact truncated Hamiltonian used as the numerical reference.

Bipartite vectors are laid out as ``[|+x> block, |-x> block]``, each block
holding Fock levels ``0..n_trunc``; total length ``2 (n_trunc + 1)``.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.linalg

from rabisq.errors import ConfigError, DegenerateDeltaTilde, EigensolverFailure
from rabisq.fock import displaced_squeezed_basis_matrix, ladder_ops
from rabisq.model import DerivedParams, ModelParams, check, derive
from rabisq.specfun import laguerre_assoc_seq

RESIDUAL_TOL = 1e-8


class AdiabaticLevel(NamedTuple):
    n: int
    E_n: float
    Delta_n: float
    E_plus: float
    E_minus: float


class Doublet(NamedTuple):
    n: int
    E_plus: float
    E_minus: float
    zeta_plus: float
    zeta_minus: float
    delta_tilde: float
    chi: float
    eps: float
    sign_dt: float


@dataclass(frozen=True)
class GrwaSpectrum:
    """Ground level ``E0`` and doublets ``n = 1..n_max``.

    The per-doublet arrays are indexed by ``n - 1``.
    """

    E0: float
    e_plus: np.ndarray
    e_minus: np.ndarray
    zeta_plus: np.ndarray
    zeta_minus: np.ndarray
    delta_tilde: np.ndarray
    chi: np.ndarray
    eps: np.ndarray
    sign_dt: np.ndarray
    omega: float = 1.0

    @property
    def n_max(self) -> int:
        return len(self.e_plus)

    def doublet(self, n: int) -> Doublet:
        if not 1 <= n <= self.n_max:
            raise IndexError(f"doublet {n} outside 1..{self.n_max}")
        k = n - 1
        return Doublet(
            n,
            float(self.e_plus[k]),
            float(self.e_minus[k]),
            float(self.zeta_plus[k]),
            float(self.zeta_minus[k]),
            float(self.delta_tilde[k]),
            float(self.chi[k]),
            float(self.eps[k]),
            float(self.sign_dt[k]),
        )

    def energies(self) -> np.ndarray:
        """All energies in eigenbasis order ``[E0, E+1, E-1, E+2, E-2, ...]``."""
        out = np.empty(1 + 2 * self.n_max)
        out[0] = self.E0
        out[1::2] = self.e_plus
        out[2::2] = self.e_minus
        return out


@dataclass(frozen=True)
class SpectrumTable:
    lambda_grid: np.ndarray
    levels_grwa: np.ndarray
    levels_exact: np.ndarray
    level_count: int

    @property
    def deviation(self) -> np.ndarray:
        return np.abs(self.levels_grwa - self.levels_exact)


def _oscillator_energy(p: ModelParams, d: DerivedParams, n):
    return (np.asarray(n) + 0.5) * d.Omega - 0.5 * p.omega - p.lam**2 / (p.omega + 2 * p.g)


def _tunneling(p: ModelParams, d: DerivedParams, n_max: int) -> np.ndarray:
    x = 4 * d.eta**2
    return 0.5 * p.delta * math.exp(-2 * d.eta**2) * laguerre_assoc_seq(0, x, n_max)


def adiabatic_levels(p: ModelParams, d: DerivedParams, n_max: int) -> list[AdiabaticLevel]:
    ns = np.arange(n_max + 1)
    E = _oscillator_energy(p, d, ns)
    Dn = _tunneling(p, d, n_max)
    return [AdiabaticLevel(int(n), float(E[n]), float(Dn[n]), float(E[n] + Dn[n]), float(E[n] - Dn[n])) for n in ns]


def delta_tilde(p: ModelParams, d: DerivedParams, n_max: int) -> np.ndarray:
    """Inter-block coupling between ``|E+,n-1>`` and ``|E-,n>`` for ``n = 1..n_max``."""
    ns = np.arange(1, n_max + 1)
    lag1 = laguerre_assoc_seq(1, 4 * d.eta**2, n_max - 1)
    return d.eta * p.delta / np.sqrt(ns) * math.exp(-2 * d.eta**2) * lag1


def grwa_blocks(p: ModelParams, d: DerivedParams, n_max: int) -> np.ndarray:
    """The 2x2 GRWA blocks, shape ``(n_max, 2, 2)``, block ``n`` at index ``n-1``."""
    ns = np.arange(1, n_max + 1)
    E = _oscillator_energy(p, d, np.arange(n_max + 1))
    Dn = _tunneling(p, d, n_max)
    dt = delta_tilde(p, d, n_max)
    blocks = np.empty((n_max, 2, 2))
    blocks[:, 0, 0] = E[ns - 1] + Dn[ns - 1]
    blocks[:, 1, 1] = E[ns] - Dn[ns]
    blocks[:, 0, 1] = blocks[:, 1, 0] = dt
    return blocks


def grwa_spectrum(p: ModelParams, d: DerivedParams, n_max: int) -> GrwaSpectrum:
    """Closed-form eigen-decomposition of every GRWA block.

    Doublet energies are ``mean ± chi`` with ``chi = sqrt(dt^2 + eps^2)``,
    i.e. the exact eigenvalues of each block.
    """
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    blocks = grwa_blocks(p, d, n_max)
    upper, lower, dt = blocks[:, 0, 0], blocks[:, 1, 1], blocks[:, 0, 1]
    eps = 0.5 * (upper - lower)
    mean = 0.5 * (upper + lower)
    chi = np.hypot(dt, eps)

    # zeta_{±}^2 = (chi ± eps)/(2 chi); take the small one from dt^2 to avoid cancellation
    zp = np.full(n_max, math.sqrt(0.5))
    zm = np.full(n_max, math.sqrt(0.5))
    ok = chi > 0
    big = np.sqrt((chi[ok] + np.abs(eps[ok])) / (2 * chi[ok]))
    small = np.abs(dt[ok]) / (2 * chi[ok] * big)
    pos = eps[ok] >= 0
    zp[ok] = np.where(pos, big, small)
    zm[ok] = np.where(pos, small, big)

    sign_dt = np.where(dt < 0, -1.0, 1.0)
    E0 = 0.5 * (d.Omega - p.omega) - p.lam**2 / (p.omega + 2 * p.g) - 0.5 * p.delta * math.exp(-2 * d.eta**2)
    return GrwaSpectrum(
        E0=float(E0),
        e_plus=mean + chi,
        e_minus=mean - chi,
        zeta_plus=zp,
        zeta_minus=zm,
        delta_tilde=dt,
        chi=chi,
        eps=eps,
        sign_dt=sign_dt,
        omega=p.omega,
    )


def _adiabatic_states(d: DerivedParams, n_max: int, n_trunc: int, check: bool = True):
    """``|E+,n>`` and ``|E-,n>`` as columns, shape ``(2(N+1), n_max+1)`` each."""
    up = displaced_squeezed_basis_matrix(d, +1, n_max, n_trunc, check)
    um = displaced_squeezed_basis_matrix(d, -1, n_max, n_trunc, check)
    s = 1 / math.sqrt(2)
    return s * np.vstack([up, um]), s * np.vstack([up, -um])


def grwa_eigenbasis(spec: GrwaSpectrum, d: DerivedParams, n_trunc: int, n_max: int | None = None, check: bool = True):
    """GRWA eigenvectors as columns ordered ``[E0, E+1, E-1, E+2, E-2, ...]``.

    Returns ``(energies, states)``. ``check`` is forwarded to the basis
    construction (see :func:`rabisq.fock.displaced_squeezed_basis_matrix`).
    """
    n_max = spec.n_max if n_max is None else n_max
    e_p, e_m = _adiabatic_states(d, n_max, n_trunc, check)
    states = np.empty((2 * (n_trunc + 1), 1 + 2 * n_max), dtype=complex)
    states[:, 0] = e_m[:, 0]
    k = np.arange(n_max)
    zp, zm, sg = spec.zeta_plus[k], spec.zeta_minus[k], spec.sign_dt[k]
    states[:, 1::2] = zp * e_p[:, k] + sg * zm * e_m[:, k + 1]
    states[:, 2::2] = zm * e_p[:, k] - sg * zp * e_m[:, k + 1]
    return spec.energies()[: 1 + 2 * n_max], states


def grwa_eigenvector_fock(spec: GrwaSpectrum, d: DerivedParams, which, n_trunc: int, strict: bool = False) -> np.ndarray:
    """One GRWA eigenvector; ``which`` is ``"ground"`` or ``(n, ±1)``.

    A vanishing coupling leaves the sign factor undefined; it is taken as +1
    unless ``strict`` is set, in which case :class:`DegenerateDeltaTilde`
    is raised.
    """
    if which == "ground":
        e_p, e_m = _adiabatic_states(d, 0, n_trunc)
        return e_m[:, 0].copy()
    n, branch = which
    if branch not in (1, -1):
        raise ValueError("branch must be +1 or -1")
    db = spec.doublet(n)
    if strict and abs(db.delta_tilde) < 1e-14:
        raise DegenerateDeltaTilde(f"delta_tilde_{n} = {db.delta_tilde:.3g}")
    e_p, e_m = _adiabatic_states(d, n, n_trunc)
    if branch == 1:
        return db.zeta_plus * e_p[:, n - 1] + db.sign_dt * db.zeta_minus * e_m[:, n]
    return db.zeta_minus * e_p[:, n - 1] - db.sign_dt * db.zeta_plus * e_m[:, n]


def exact_hamiltonian(p: ModelParams, n_trunc: int) -> np.ndarray:
    """Full Hamiltonian in the ``(|+x>, |-x>) ⊗ Fock`` basis.

    sigma_x is ``diag(+1, -1)`` there and sigma_z flips the two blocks.
    """
    check(p)
    a, a_dag, n_op = ladder_ops(n_trunc)
    h_osc = p.omega * n_op + p.g * (a_dag @ a_dag + a @ a)
    x = a + a_dag
    flip = 0.5 * p.delta * np.eye(n_trunc + 1)
    return np.block([[h_osc + p.lam * x, flip], [flip, h_osc - p.lam * x]])


def exact_eigs(H: np.ndarray, k: int | None = None):
    """Lowest ``k`` eigenpairs of a dense Hermitian matrix (all when ``k`` is None).

    Returns ``(energies, states)`` with states as columns.
    """
    dim = H.shape[0]
    k = dim if k is None else k
    if not 1 <= k <= dim:
        raise ValueError(f"k = {k} outside 1..{dim}")
    try:
        w, v = scipy.linalg.eigh(H, subset_by_index=[0, k - 1])
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise EigensolverFailure(str(exc)) from exc
    resid = np.linalg.norm(H @ v - v * w, axis=0)
    if np.any(resid > RESIDUAL_TOL):
        raise EigensolverFailure(f"eigenpair residual {resid.max():.2e} exceeds {RESIDUAL_TOL}")
    return w, v


def grwa_levels(p: ModelParams, level_count: int) -> np.ndarray:
    """Lowest ``level_count`` GRWA energies, sorted ascending."""
    d = derive(p)
    n_max = max(2 * level_count, level_count + 10)
    spec = grwa_spectrum(p, d, n_max)
    e = np.sort(spec.energies())
    # doublet energies climb with n; the last doublet must sit above the kept levels
    if spec.e_minus[-1] <= e[level_count - 1]:
        spec = grwa_spectrum(p, d, 4 * n_max)
        e = np.sort(spec.energies())
    return e[:level_count]


def _worker_count() -> int:
    env = os.environ.get("RABISQ_THREADS", "0").strip() or "0"
    try:
        n = int(env)
    except ValueError:
        raise ConfigError(f"RABISQ_THREADS must be an integer, got {env!r}") from None
    return n if n > 0 else (os.cpu_count() or 1)


def spectrum_compare(p: ModelParams, lambda_grid, level_count: int, n_trunc: int, workers: int | None = None) -> SpectrumTable:
    """GRWA vs exact lowest levels over a grid of ``lambda/omega`` values.

    ``p`` supplies omega, delta and g; its lambda is replaced by each grid
    point times omega. Columns are independent and may run on a thread pool;
    the result does not depend on scheduling.
    """
    grid = np.asarray(lambda_grid, dtype=float)
    if grid.size == 0:
        raise ValueError("lambda grid is empty")

    def column(lam_over_omega):
        q = p.replace(lam=lam_over_omega * p.omega)
        e_g = grwa_levels(q, level_count)
        e_x, _ = exact_eigs(exact_hamiltonian(q, n_trunc), level_count)
        return e_g, e_x

    workers = _worker_count() if workers is None else workers
    if workers > 1 and grid.size > 1:
        with ThreadPoolExecutor(max_workers=min(workers, grid.size)) as pool:
            cols = list(pool.map(column, grid))
    else:
        cols = [column(x) for x in grid]
    return SpectrumTable(
        lambda_grid=grid,
        levels_grwa=np.array([c[0] for c in cols]),
        levels_exact=np.array([c[1] for c in cols]),
        level_count=level_count,
    )
