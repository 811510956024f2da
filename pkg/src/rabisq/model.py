"""Physical parameters and the derived Bogoliubov quantities.

All energies share the unit of ``omega``; dimensionless quantities
(``r``, ``mu``, ``nu``, ``eta``) depend only on ratios to ``omega``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from rabisq.errors import InvalidParam, UnstableParametric


@dataclass(frozen=True)
class ModelParams:
    """Inputs of ``H = w a^+a + (D/2) sz + l sx (a^+ + a) + g (a^+^2 + a^2)``."""

    omega: float = 1.0
    delta: float = 0.0
    lam: float = 0.0
    g: float = 0.0

    def replace(self, **changes) -> ModelParams:
        kw = {"omega": self.omega, "delta": self.delta, "lam": self.lam, "g": self.g}
        kw.update(changes)
        return ModelParams(**kw)

    def scaled(self) -> ModelParams:
        """Same physics with ``omega`` normalised to 1."""
        w = self.omega
        return ModelParams(1.0, self.delta / w, self.lam / w, self.g / w)


@dataclass(frozen=True)
class DerivedParams:
    """Dressed frequency ``Omega``, squeeze ``r`` (phase fixed to 0),
    ``mu = cosh r``, ``nu = sinh r`` and the displacement ``eta``."""

    Omega: float
    r: float
    mu: float
    nu: float
    eta: float

    @property
    def nu_over_mu(self) -> float:
        return self.nu / self.mu


def validate(p: ModelParams) -> list[str]:
    """Return the names of violated parameter constraints (empty when valid)."""
    bad = []
    vals = (p.omega, p.delta, p.lam, p.g)
    if not all(math.isfinite(v) for v in vals):
        bad.append("NonFinite")
        return bad
    if p.omega <= 0:
        bad.append("NonPositiveOmega")
    if p.delta < 0:
        bad.append("NegativeDelta")
    if p.lam < 0:
        bad.append("NegativeLambda")
    if p.g < 0:
        bad.append("NegativeG")
    if p.omega > 0 and p.g >= p.omega / 2:
        bad.append("UnstableParametric")
    return bad


def check(p: ModelParams) -> None:
    bad = validate(p)
    if "UnstableParametric" in bad:
        raise UnstableParametric(f"g = {p.g} must be below omega/2 = {p.omega / 2}")
    if bad:
        raise InvalidParam(", ".join(bad))


def derive(p: ModelParams) -> DerivedParams:
    check(p)
    w, g, lam = p.omega, p.g, p.lam
    Omega = math.sqrt(w * w - 4.0 * g * g)
    mu = math.sqrt((w + Omega) / (2.0 * Omega))
    # sqrt((w - Omega)/(2 Omega)) with w - Omega = 4g^2/(w + Omega), no cancellation
    nu = 2.0 * g / math.sqrt(2.0 * Omega * (w + Omega))
    r = math.asinh(nu)  # = acosh(mu), accurate at small r
    if g == 0:
        eta = lam / w
    else:
        # (w - Omega)/(2g) written as 2g/(w + Omega) to avoid cancellation at small g
        eta = mu * (1.0 + 2.0 * g / (w + Omega)) * lam / (w + 2.0 * g)
    return DerivedParams(Omega=Omega, r=r, mu=mu, nu=nu, eta=eta)
