"""Truncated Fock-space operators and states.

Vectors and operators are plain complex ndarrays on levels ``0..n_trunc``
(length ``n_trunc + 1``). Functions that promise a normalised vector check
for truncation leakage and raise :class:`TruncationTooSmall` instead of
renormalising.
"""

from __future__ import annotations

import functools
import math

import numpy as np
import scipy.linalg

from rabisq.errors import TruncationTooSmall
from rabisq.model import DerivedParams
from rabisq.specfun import laguerre_assoc_seq, log_factorial

TAU_NORM = 1e-8


def ladder_ops(n_trunc: int):
    """Return ``(a, a_dag, n_op)`` on levels ``0..n_trunc``."""
    if n_trunc < 1:
        raise ValueError("n_trunc must be >= 1")
    a = np.diag(np.sqrt(np.arange(1, n_trunc + 1, dtype=float)), 1).astype(complex)
    a_dag = a.conj().T
    n_op = np.diag(np.arange(n_trunc + 1, dtype=float)).astype(complex)
    return a, a_dag, n_op


def fock_state(n: int, n_trunc: int) -> np.ndarray:
    v = np.zeros(n_trunc + 1, dtype=complex)
    v[n] = 1.0
    return v


def _displacement(alpha: complex, dim: int) -> np.ndarray:
    a, a_dag, _ = ladder_ops(dim - 1)
    return scipy.linalg.expm(alpha * a_dag - np.conj(alpha) * a)


def _squeeze(xi: complex, dim: int) -> np.ndarray:
    a, a_dag, _ = ladder_ops(dim - 1)
    return scipy.linalg.expm(0.5 * (xi * a_dag @ a_dag - np.conj(xi) * a @ a))


def displacement_matrix(alpha: complex, n_trunc: int) -> np.ndarray:
    """``D(alpha) = exp(alpha a^+ - alpha* a)`` on the truncated space.

    The exponential of the truncated anti-Hermitian generator is exactly
    unitary; its matrix elements are accurate away from the top levels.
    """
    if abs(alpha) ** 2 > n_trunc / 4:
        raise TruncationTooSmall(f"|alpha|^2 = {abs(alpha) ** 2:.3g} exceeds n_trunc/4 = {n_trunc / 4}")
    return _displacement(alpha, n_trunc + 1)


def squeeze_matrix(xi: complex, n_trunc: int) -> np.ndarray:
    """``S(xi) = exp((xi a^+^2 - xi* a^2)/2)``, so that ``S^+ a S = mu a + nu a^+``.

    Squeezed number states spread over many levels, so products such as
    ``S^+ a S`` are only trustworthy on roughly the lowest ``n_trunc/4``
    levels.
    """
    if abs(xi) >= 2 or 3.0 * math.exp(2 * abs(xi)) > n_trunc:
        raise TruncationTooSmall(f"squeeze |xi| = {abs(xi):.3g} too large for n_trunc = {n_trunc}")
    return _squeeze(xi, n_trunc + 1)


@functools.lru_cache(maxsize=32)
def _basis_columns(r: float, eta: float, sign: int, n_max: int, n_trunc: int):
    # Built in a padded space so the truncation edge sits far from the kept levels.
    dim = 2 * (n_trunc + 1) + 40
    s_dag = _squeeze(-r, dim)
    d_dag = _displacement(-sign * eta, dim)
    cols = s_dag @ d_dag[:, : n_max + 1]
    leak = 1.0 - np.sum(np.abs(cols[: n_trunc + 1]) ** 2, axis=0)
    out = cols[: n_trunc + 1].copy()
    out.setflags(write=False)
    leak.setflags(write=False)
    return out, leak


def basis_leakage(d: DerivedParams, sign: int, n_max: int, n_trunc: int) -> np.ndarray:
    """Norm lost beyond ``n_trunc`` by each ``|r, n±>``, ``n = 0..n_max``."""
    return _basis_columns(float(d.r), float(d.eta), int(sign), int(n_max), int(n_trunc))[1]


def displaced_squeezed_basis_matrix(d: DerivedParams, sign: int, n_max: int, n_trunc: int, check: bool = True) -> np.ndarray:
    """Columns ``|r, n±> = S^+(r) D^+(±eta) |n>`` for ``n = 0..n_max``.

    With ``check`` every column must keep its norm to within ``TAU_NORM``.
    Callers that only need the low components, or that check leakage of
    the assembled state themselves, pass ``check=False``.
    """
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    if n_max > n_trunc / 2:
        raise TruncationTooSmall(f"n = {n_max} exceeds n_trunc/2 = {n_trunc / 2}")
    cols, leak = _basis_columns(float(d.r), float(d.eta), int(sign), int(n_max), int(n_trunc))
    if check and leak.max() > TAU_NORM:
        worst = int(np.argmax(leak))
        raise TruncationTooSmall(
            f"|r,{worst}{'+' if sign > 0 else '-'}> loses {leak[worst]:.2e} of its norm beyond n_trunc = {n_trunc}"
        )
    return cols


def displaced_squeezed_basis(d: DerivedParams, sign: int, n: int, n_trunc: int) -> np.ndarray:
    return displaced_squeezed_basis_matrix(d, sign, n, n_trunc)[:, n].copy()


def overlap_analytic(lam_over_omega: float, m: int, n: int) -> float:
    """``<m_-|n_+>`` between oppositely displaced number states (g = 0).

    Closed form in terms of associated Laguerre polynomials with all
    factorial ratios taken in log space.
    """
    if m < 0 or n < 0:
        raise ValueError("m, n must be >= 0")
    x = float(lam_over_omega)
    if x == 0:
        return 1.0 if m == n else 0.0
    lo, hi = min(m, n), max(m, n)
    k = hi - lo
    lag = laguerre_assoc_seq(k, 4 * x * x, lo)[lo]
    log_mag = k * math.log(2 * x) - 2 * x * x + 0.5 * (log_factorial(lo) - log_factorial(hi))
    sign = -1.0 if (m >= n and k % 2 == 1) else 1.0
    return sign * math.exp(log_mag) * lag


def coherent_amplitudes(beta, n_trunc: int) -> np.ndarray:
    """Unnormalised-check amplitudes ``<n|beta>`` for ``n = 0..n_trunc``.

    Vectorised over ``beta``; returns shape ``beta.shape + (n_trunc + 1,)``.
    The components are exact; nothing is implied about the weight beyond
    ``n_trunc``.
    """
    beta = np.asarray(beta, dtype=complex)
    out = np.empty(beta.shape + (n_trunc + 1,), dtype=complex)
    out[..., 0] = np.exp(-0.5 * np.abs(beta) ** 2)
    for n in range(n_trunc):
        out[..., n + 1] = out[..., n] * beta / math.sqrt(n + 1)
    return out


def coherent_vector(beta: complex, n_trunc: int) -> np.ndarray:
    """Coherent state ``|beta> = D(beta)|0>``, amplitudes built in log space."""
    beta = complex(beta)
    if abs(beta) ** 2 > n_trunc / 4:
        raise TruncationTooSmall(f"|beta|^2 = {abs(beta) ** 2:.3g} exceeds n_trunc/4 = {n_trunc / 4}")
    v = np.zeros(n_trunc + 1, dtype=complex)
    if beta == 0:
        v[0] = 1.0
        return v
    n = np.arange(n_trunc + 1)
    lf = np.array([log_factorial(k) for k in n])
    v[:] = np.exp(-0.5 * abs(beta) ** 2 + n * np.log(beta) - 0.5 * lf)
    leak = 1.0 - np.vdot(v, v).real
    if leak > TAU_NORM:
        raise TruncationTooSmall(f"coherent state loses {leak:.2e} of its norm")
    return v
