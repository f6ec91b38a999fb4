"""Prior beliefs over a single attribute and their window-mass functions.

Every prior exposes ``window_mass(t, z)``: the prior probability that the
attribute lies within distance ``z`` of the location ``t``.  Calibration only
ever needs this function, evaluated at the guessing precision ``r`` (the prior
of a correct guess) and at some window radius ``a >= r``.
"""

from __future__ import annotations

import math
import numbers
from dataclasses import dataclass
from typing import Hashable, Iterable, Optional, Sequence, Tuple, Union

from advcal.errors import InvalidArgumentError, InvalidPriorError, NoStationaryPointError

MASS_TOL = 1e-12
SQRT2 = math.sqrt(2.0)


def _clamp01(x: float) -> float:
    return min(1.0, max(0.0, x))


def window_mass_uniform(R: float, t: Optional[float], z: float) -> float:
    """Mass of a window of radius ``z`` under a uniform prior on a length ``R``.

    The window is assumed to fit inside the support; use :func:`corner_adjust`
    when the target may sit near a boundary.  ``t`` is accepted for signature
    symmetry and ignored.
    """
    if R <= 0:
        raise InvalidPriorError(f"uniform prior needs R > 0, got {R}")
    if z < 0:
        raise InvalidArgumentError(f"radius must be non-negative, got {z}")
    return min(2.0 * z / R, 1.0)


def corner_adjust(a: float) -> float:
    """Exponent distance to use when the window may be clipped by a boundary.

    A target near the edge may need neighbours up to ``2a`` away to collect
    the mass of a centred window of radius ``a``.
    """
    if a <= 0:
        raise InvalidArgumentError(f"window radius must be positive, got {a}")
    return 2.0 * a


def window_mass_normal(mu: float, sigma: float, t: float, z: float) -> float:
    if sigma <= 0:
        raise InvalidPriorError(f"normal prior needs sigma > 0, got {sigma}")
    if z < 0:
        raise InvalidArgumentError(f"radius must be non-negative, got {z}")
    s = sigma * SQRT2
    return _clamp01(0.5 * (math.erf((t + z - mu) / s) - math.erf((t - z - mu) / s)))


def default_R_normal(mu: float, sigma: float) -> float:
    """``mu + 3*sqrt(2)*sigma``; the interval it implies covers erf(3) of the mass."""
    if sigma <= 0:
        raise InvalidPriorError(f"normal prior needs sigma > 0, got {sigma}")
    return mu + 3.0 * SQRT2 * sigma


def worst_case_prior(delta: float) -> float:
    """Prior of a correct guess that demands the smallest epsilon, full window."""
    if not 0.0 < delta < 1.0:
        raise InvalidArgumentError(f"delta must lie in (0, 1), got {delta}")
    return (1.0 - delta) / 2.0


def worst_case_prior_windowed(delta: float, q: float) -> float:
    """Closed-form stationary point for a window of mass ``q``, as published.

    Reduces to :func:`worst_case_prior` at ``q = 1``.  For ``q < 1`` the
    published expression is not the minimiser of epsilon (it can even leave
    the admissible range); :func:`worst_case_prior_exact` solves the true
    stationarity condition and is what the calibration pipeline uses.
    """
    if not 0.0 < delta < 1.0:
        raise InvalidArgumentError(f"delta must lie in (0, 1), got {delta}")
    if not 0.0 < q <= 1.0:
        raise InvalidArgumentError(f"window mass must lie in (0, 1], got {q}")
    denom = 2.0 * (delta + q - 1.0)
    if denom <= 0:
        raise NoStationaryPointError(
            f"delta + q = {delta + q} <= 1; fall back to the full window (q = 1)"
        )
    return (delta * (1.0 - delta) + q * (1.0 - q)) / denom


def worst_case_prior_exact(delta: float, q: float) -> float:
    """Prior ``p`` minimising the windowed epsilon for window mass ``q``.

    Setting the derivative of ``ln(p (1-delta-p) / ((q-p)(delta+p)))`` to zero
    gives ``(1-q) p^2 - 2 q delta p + q delta (1-delta) = 0``; the root inside
    ``(0, min(q, 1-delta))`` is returned.
    """
    if not 0.0 < delta < 1.0:
        raise InvalidArgumentError(f"delta must lie in (0, 1), got {delta}")
    if not 0.0 < q <= 1.0:
        raise InvalidArgumentError(f"window mass must lie in (0, 1], got {q}")
    if q == 1.0:
        return (1.0 - delta) / 2.0
    A = 1.0 - q
    B = -2.0 * q * delta
    C = q * delta * (1.0 - delta)
    disc = B * B - 4.0 * A * C
    if disc < 0:
        raise NoStationaryPointError(f"no real stationary point for delta={delta}, q={q}")
    # stable form of the smaller root
    return (2.0 * C) / (-B + math.sqrt(disc))


@dataclass(frozen=True)
class UniformContinuous:
    """Uniform prior on ``[low, low + R]``."""

    R: float
    low: float = 0.0

    def __post_init__(self) -> None:
        if not self.R > 0:
            raise InvalidPriorError(f"uniform prior needs R > 0, got {self.R}")

    kind = "uniform"

    @property
    def extent(self) -> float:
        return self.R

    def window_mass(self, t: Optional[float], z: float) -> float:
        return window_mass_uniform(self.R, t, z)

    def cdf(self, x: float) -> float:
        return _clamp01((x - self.low) / self.R)

    def center(self) -> float:
        return self.low + self.R / 2.0


@dataclass(frozen=True)
class Normal:
    """Normal prior; ``R`` defaults to the 3-sigma-sqrt2 rule when omitted."""

    mu: float
    sigma: float
    R: Optional[float] = None

    kind = "normal"

    def __post_init__(self) -> None:
        if not self.sigma > 0:
            raise InvalidPriorError(f"normal prior needs sigma > 0, got {self.sigma}")
        if self.R is not None and not self.R > 0:
            raise InvalidPriorError(f"explicit R must be positive, got {self.R}")

    @property
    def R_policy(self) -> str:
        return "explicit" if self.R is not None else "3-sigma-sqrt2"

    @property
    def extent(self) -> float:
        return self.R if self.R is not None else default_R_normal(self.mu, self.sigma)

    def window_mass(self, t: float, z: float) -> float:
        return window_mass_normal(self.mu, self.sigma, t, z)

    def cdf(self, x: float) -> float:
        return 0.5 * (1.0 + math.erf((x - self.mu) / (self.sigma * SQRT2)))

    def center(self) -> float:
        return self.mu


Label = Hashable


def _is_number(x: object) -> bool:
    return isinstance(x, numbers.Real) and not isinstance(x, bool)


@dataclass(frozen=True)
class DiscretePmf:
    """Finite prior over labelled points.

    Numeric labels are compared with ``|x - t|``; any other labels use the
    discrete metric (distance 0 to itself, 1 to everything else).
    """

    points: Tuple[Tuple[Label, float], ...]
    kind = "discrete"

    def __init__(self, points: Iterable[Tuple[Label, float]]):
        pts = tuple((label, float(m)) for label, m in points)
        if not pts:
            raise InvalidPriorError("discrete prior has no points")
        labels = [label for label, _ in pts]
        if len(set(labels)) != len(labels):
            raise InvalidPriorError("discrete prior has duplicate labels")
        for label, m in pts:
            if not -MASS_TOL <= m <= 1.0 + MASS_TOL:
                raise InvalidPriorError(f"mass of {label!r} outside [0, 1]: {m}")
        total = math.fsum(m for _, m in pts)
        if abs(total - 1.0) > MASS_TOL:
            raise InvalidPriorError(f"masses sum to {total!r}, expected 1")
        object.__setattr__(self, "points", pts)

    @property
    def numeric(self) -> bool:
        return all(_is_number(label) for label, _ in self.points)

    @property
    def extent(self) -> float:
        if not self.numeric:
            return 1.0
        xs = [float(label) for label, _ in self.points]
        return max(xs) - min(xs) or 1.0

    @property
    def labels(self) -> Tuple[Label, ...]:
        return tuple(label for label, _ in self.points)

    def mass(self, label: Label) -> float:
        for x, m in self.points:
            if x == label:
                return m
        raise InvalidArgumentError(f"unknown label {label!r}")

    def distance(self, x: Label, t: Label) -> float:
        if self.numeric:
            return abs(float(x) - float(t))
        return 0.0 if x == t else 1.0

    def window_mass(self, t: Label, z: float) -> float:
        if z < 0:
            raise InvalidArgumentError(f"radius must be non-negative, got {z}")
        return _clamp01(math.fsum(m for x, m in self.points if self.distance(x, t) <= z))


@dataclass(frozen=True)
class WorstCase:
    """Unknown prior: the correct-guess mass is set to its worst value.

    ``q`` is the mass known to lie inside the window; ``q = 1`` when nothing
    beyond the support bound is known.
    """

    q: float = 1.0
    kind = "worst"

    def __post_init__(self) -> None:
        if not 0.0 < self.q <= 1.0:
            raise InvalidPriorError(f"worst-case window mass must lie in (0, 1], got {self.q}")

    def masses(self, delta: float) -> Tuple[float, float]:
        """Return ``(p, q)`` for an advantage bound ``delta``."""
        return worst_case_prior_exact(delta, self.q), self.q


Prior = Union[UniformContinuous, Normal, DiscretePmf, WorstCase]


@dataclass(frozen=True)
class WindowMass:
    p: float
    q: float
    r: float
    a: float

    def __post_init__(self) -> None:
        if not (-MASS_TOL <= self.p <= self.q + MASS_TOL and self.q <= 1.0 + MASS_TOL):
            raise InvalidArgumentError(f"need 0 <= p <= q <= 1, got p={self.p}, q={self.q}")
        if self.r > self.a:
            raise InvalidArgumentError(f"need r <= a, got r={self.r}, a={self.a}")


def folded(p: float) -> float:
    """Map a prior onto ``(0, 1/2]``; the two-sided epsilon depends only on this."""
    return min(p, 1.0 - p)


def worst_discrete_prior(
    points: Union[DiscretePmf, Sequence[float]], delta: float
) -> Tuple[Optional[float], Optional[float]]:
    """Candidate priors nearest the worst case from below and above.

    Epsilon as a function of the prior is unimodal once priors are folded
    onto ``(0, 1/2]`` (a prior ``p > 1/2`` binds through its complement), so
    the masses whose folded value is nearest ``(1 - delta)/2`` on either side
    are the only candidates worth evaluating.  Either element may be ``None``.
    """
    target = worst_case_prior(delta)
    masses = [m for _, m in points.points] if isinstance(points, DiscretePmf) else list(points)
    masses = [float(m) for m in masses if m > 0.0]
    if not masses:
        raise InvalidPriorError("no candidate with positive mass")
    below = [m for m in masses if folded(m) <= target + MASS_TOL]
    above = [m for m in masses if folded(m) > target + MASS_TOL]
    # ties on folded value go to the smaller raw mass so results are order-free
    p_l = max(below, key=lambda m: (folded(m), -m)) if below else None
    p_r = min(above, key=lambda m: (folded(m), m)) if above else None
    return p_l, p_r


def worst_case_location(prior: Prior, r: float, delta: float) -> float:
    """Location ``t`` of the worst-case target for a continuous prior.

    Uniform priors are location-free (corners aside), so the centre is used.
    For a normal prior the correct-guess mass peaks at the mean; if even that
    peak is below the worst-case prior, the mean is the worst location,
    otherwise the location whose mass equals ``(1 - delta)/2`` is returned.
    """
    if isinstance(prior, UniformContinuous):
        return prior.center()
    if isinstance(prior, Normal):
        target = worst_case_prior(delta)
        if prior.window_mass(prior.mu, r) <= target:
            return prior.mu
        lo, hi = prior.mu, prior.mu + r + 10.0 * prior.sigma
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if prior.window_mass(mid, r) > target:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)
    raise InvalidArgumentError(f"no worst-case location for prior kind {prior.kind!r}")
