"""Noise mechanisms: epsilon to scale, and error-bound quantiles.

Two additive noise families are supported: Laplace with scale ``lambda``,
density ``exp(-|x|/lambda) / (2 lambda)``, and the generalised Cauchy family
with density proportional to ``1 / (1 + |x|^gamma)`` scaled by ``xi``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

from scipy.special import betainc

from advcal.errors import InvalidArgumentError

LAPLACE = "laplace"
GENCAUCHY = "gencauchy"


def laplace_scale(epsilon: float, sensitivity: float = 1.0) -> float:
    """Laplace scale ``sensitivity / epsilon``; ``inf`` at ``epsilon = 0``."""
    if sensitivity <= 0:
        raise InvalidArgumentError(f"sensitivity must be positive, got {sensitivity}")
    if epsilon < 0:
        raise InvalidArgumentError(f"epsilon must be non-negative, got {epsilon}")
    if epsilon == 0:
        return math.inf
    return sensitivity / epsilon


def _check_prob(p: float) -> None:
    if not 0.0 < p < 1.0:
        raise InvalidArgumentError(f"probability must lie in (0, 1), got {p}")


def laplace_quantile(p: float, epsilon: float) -> float:
    """Half-width of the interval holding mass ``p`` under Laplace(1/epsilon)."""
    _check_prob(p)
    if not epsilon > 0:
        raise InvalidArgumentError(f"epsilon must be positive, got {epsilon}")
    return -math.log1p(-p) / epsilon


@lru_cache(maxsize=None)
def cauchy_normalizer(gamma: float) -> float:
    """Constant making ``C / (1 + |x|^gamma)`` a density (``sqrt(2)/pi`` at 4).

    Uses ``int_0^inf dx / (1 + x^gamma) = (pi/gamma) / sin(pi/gamma)``.
    """
    if not gamma > 1:
        raise InvalidArgumentError(f"gamma must exceed 1, got {gamma}")
    return gamma * math.sin(math.pi / gamma) / (2.0 * math.pi)


def cauchy_density(x: float, gamma: float = 4.0) -> float:
    return cauchy_normalizer(gamma) / (1.0 + abs(x) ** gamma)


def cauchy_mass(a: float, gamma: float = 4.0) -> float:
    """Mass of ``[-a, a]`` under the unit generalised Cauchy distribution.

    Substituting ``u = x^g / (1 + x^g)`` turns the integral into a regularised
    incomplete beta function with parameters ``1/g`` and ``1 - 1/g``.
    """
    if not gamma > 1:
        raise InvalidArgumentError(f"gamma must exceed 1, got {gamma}")
    if a <= 0:
        return 0.0
    if math.isinf(a):
        return 1.0
    s = a ** gamma
    return float(betainc(1.0 / gamma, 1.0 - 1.0 / gamma, s / (1.0 + s)))


def cauchy_quantile(p: float, gamma: float = 4.0, tol: float = 1e-12) -> float:
    """Half-width ``a`` with ``cauchy_mass(a) = p``, by window binary search.

    The window doubles until it brackets ``p``, then bisection shrinks it.
    """
    _check_prob(p)
    lo, hi = 0.0, 1.0
    while cauchy_mass(hi, gamma) < p:
        lo, hi = hi, 2.0 * hi
        if hi > 1e300:
            raise InvalidArgumentError(f"could not bracket quantile for p={p}")
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        m = cauchy_mass(mid, gamma)
        if abs(m - p) <= tol or hi - lo <= 4.0 * math.ulp(hi):
            return mid
        if m < p:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def scaled_quantile(a: float, xi: float) -> float:
    """Quantile of ``xi * eta`` given the quantile ``a`` of ``eta``."""
    if not xi > 0:
        raise InvalidArgumentError(f"noise magnitude must be positive, got {xi}")
    return a * xi


@dataclass(frozen=True)
class MechanismSpec:
    """An additive noise distribution.

    ``scale`` is the Laplace ``lambda`` or the Cauchy magnitude
    ``xi = c_t / b`` with ``b = epsilon / gamma - beta``.
    """

    kind: str
    scale: float
    gamma: float = 4.0
    b: Optional[float] = None
    beta: float = 0.0
    c_t: Optional[float] = None

    def __post_init__(self) -> None:
        if self.kind not in (LAPLACE, GENCAUCHY):
            raise InvalidArgumentError(f"unknown mechanism kind {self.kind!r}")
        if not self.scale > 0:
            raise InvalidArgumentError(f"noise scale must be positive, got {self.scale}")
        if self.kind == GENCAUCHY:
            cauchy_normalizer(self.gamma)
            if self.b is not None and not self.b > 0:
                raise InvalidArgumentError(f"Cauchy divisor b must be positive, got {self.b}")

    @classmethod
    def laplace(cls, epsilon: float, sensitivity: float = 1.0) -> "MechanismSpec":
        return cls(LAPLACE, laplace_scale(epsilon, sensitivity))

    @classmethod
    def gencauchy(
        cls, epsilon: float, c_t: float = 1.0, gamma: float = 4.0, beta: float = 0.0
    ) -> "MechanismSpec":
        b = epsilon / gamma - beta
        if not b > 0:
            raise InvalidArgumentError(
                f"epsilon/gamma - beta must be positive, got {b} (epsilon={epsilon}, beta={beta})"
            )
        return cls(GENCAUCHY, c_t / b, gamma=gamma, b=b, beta=beta, c_t=c_t)

    def density(self, x: float) -> float:
        if self.kind == LAPLACE:
            return math.exp(-abs(x) / self.scale) / (2.0 * self.scale)
        return cauchy_density(x / self.scale, self.gamma) / self.scale

    def mass(self, a: float) -> float:
        """Probability that the noise lands in ``[-a, a]``."""
        if a <= 0:
            return 0.0
        if self.kind == LAPLACE:
            return -math.expm1(-a / self.scale)
        return cauchy_mass(a / self.scale, self.gamma)

    def quantile(self, p: float) -> float:
        if self.kind == LAPLACE:
            return laplace_quantile(p, 1.0 / self.scale)
        return scaled_quantile(cauchy_quantile(p, self.gamma), self.scale)

    def inverse_density(self, level: float) -> Optional[float]:
        """Distance ``d >= 0`` at which the density falls to ``level``.

        ``None`` when ``level`` is at or above the peak density.
        """
        if not level > 0:
            return math.inf
        peak = self.density(0.0)
        if level >= peak:
            return None
        if self.kind == LAPLACE:
            return self.scale * math.log(peak / level)
        return self.scale * (peak / level - 1.0) ** (1.0 / self.gamma)
