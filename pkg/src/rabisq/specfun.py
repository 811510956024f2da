"""Hermite and associated Laguerre sequences, log-factorials and the Mehler
kernel check.

Every routine returns the whole sequence ``0..n_max`` because callers always
need all orders at once (basis expansions, series sums).
"""

import math

import numpy as np

from rabisq.errors import NonConvergent

# Cramér's bound on Hermite functions, |H_n(x)| e^{-x^2/2} / sqrt(2^n n! sqrt(pi)) <= 1.0865 pi^{-1/4}.
_CRAMER = 1.0865


def hermite_seq(z, n_max: int) -> np.ndarray:
    """Physicists' Hermite polynomials ``H_0(z) .. H_{n_max}(z)``.

    Unscaled values overflow beyond n ~ 150 for moderate ``|z|``; use
    :func:`hermite_scaled_seq` anywhere ``n`` follows the truncation level.
    """
    if n_max < 0:
        raise ValueError("n_max must be >= 0")
    z = complex(z)
    out = np.empty(n_max + 1, dtype=complex)
    out[0] = 1.0
    if n_max >= 1:
        out[1] = 2.0 * z
    for n in range(1, n_max):
        out[n + 1] = 2.0 * z * out[n] - 2.0 * n * out[n - 1]
    return out


def hermite_scaled_seq(z, n_max: int) -> np.ndarray:
    """``H_n(z) / sqrt(2^n n!)`` for ``n = 0..n_max``.

    The recurrence is carried in the scaled variable,

        h_{n+1} = z sqrt(2/(n+1)) h_n - sqrt(n/(n+1)) h_{n-1},

    so neither ``H_n`` nor ``n!`` is ever formed.
    """
    if n_max < 0:
        raise ValueError("n_max must be >= 0")
    z = complex(z)
    out = np.empty(n_max + 1, dtype=complex)
    out[0] = 1.0
    if n_max >= 1:
        out[1] = math.sqrt(2.0) * z
    for n in range(1, n_max):
        out[n + 1] = z * math.sqrt(2.0 / (n + 1)) * out[n] - math.sqrt(n / (n + 1)) * out[n - 1]
    return out


def hermite_scaled_table(z: np.ndarray, n_max: int) -> np.ndarray:
    """Vectorised :func:`hermite_scaled_seq` over an array of arguments.

    Returns shape ``z.shape + (n_max + 1,)``.
    """
    z = np.asarray(z, dtype=complex)
    out = np.empty(z.shape + (n_max + 1,), dtype=complex)
    out[..., 0] = 1.0
    if n_max >= 1:
        out[..., 1] = math.sqrt(2.0) * z
    for n in range(1, n_max):
        out[..., n + 1] = z * math.sqrt(2.0 / (n + 1)) * out[..., n] - math.sqrt(n / (n + 1)) * out[..., n - 1]
    return out


def laguerre_assoc_seq(j: int, x: float, n_max: int) -> np.ndarray:
    """Associated Laguerre polynomials ``L_n^{(j)}(x)``, ``n = 0..n_max``.

    Uses the three-term recurrence in ``n``,
    ``(n+1) L_{n+1} = (2n+1+j-x) L_n - (n+j) L_{n-1}``, which avoids the
    cancellation of the alternating power sum at large ``x``.
    """
    if j < 0:
        raise ValueError("j must be >= 0")
    if x < 0:
        raise ValueError("x must be >= 0")
    if n_max < 0:
        raise ValueError("n_max must be >= 0")
    out = np.empty(n_max + 1)
    out[0] = 1.0
    if n_max >= 1:
        out[1] = 1.0 + j - x
    for n in range(1, n_max):
        out[n + 1] = ((2 * n + 1 + j - x) * out[n] - (n + j) * out[n - 1]) / (n + 1)
    return out


def log_factorial(n: int) -> float:
    if n < 0:
        raise ValueError("n must be >= 0")
    return math.lgamma(n + 1)


def log_factorials(n_max: int) -> np.ndarray:
    """``ln(k!)`` for ``k = 0..n_max`` as an array."""
    return np.array([math.lgamma(k + 1) for k in range(n_max + 1)])


def mehler_partial_sum(x: float, y: float, t: float, tol: float = 1e-12, n_limit: int = 500):
    """Partial sum of ``sum_n t^n/(2^n n!) H_n(x) H_n(y)``.

    Terms are added until the tail bound
    ``C^2 e^{(x^2+y^2)/2} |t|^{N+1} / (1-|t|)`` drops below ``tol``, with
    ``C`` the Cramér constant. Returns ``(value, N)``.

    Raises
    ------
    NonConvergent
        If the bound is not met by ``n_limit`` terms.
    """
    if not abs(t) < 1:
        raise ValueError("|t| must be < 1")
    scale = _CRAMER**2 * math.exp(0.5 * (x * x + y * y)) / (1.0 - abs(t))
    if t == 0:
        return 1.0, 0
    # smallest N with scale*|t|^(N+1) < tol
    need = math.log(tol / scale) / math.log(abs(t)) - 1.0
    n_terms = max(int(math.ceil(need)), 0)
    if n_terms > n_limit:
        raise NonConvergent(f"Mehler series needs {n_terms} terms (limit {n_limit})")
    hx = hermite_scaled_seq(x, n_terms).real
    hy = hermite_scaled_seq(y, n_terms).real
    powers = t ** np.arange(n_terms + 1)
    return float(np.sum(powers * hx * hy)), n_terms


def mehler_closed_form(x: float, y: float, t: float) -> float:
    d = 1.0 - t * t
    return math.exp(-((t * x) ** 2 - 2 * t * x * y + (t * y) ** 2) / d) / math.sqrt(d)


def mehler_check(x: float, y: float, t: float) -> float:
    """Absolute difference between the Mehler series and its closed form."""
    value, _ = mehler_partial_sum(x, y, t)
    return abs(value - mehler_closed_form(x, y, t))
