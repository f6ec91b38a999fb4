"""Calibration for goals over several independent attributes.

An AND goal is won by guessing every attribute within its radius; an OR goal
by guessing at least one.  Both reduce to the univariate engine once the
correct-guess mass and the window mass are assembled from per-attribute
window masses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Hashable, List, Optional, Sequence, Tuple

from advcal.engine import (
    DEFAULT_GRID,
    EpsilonResult,
    epsilon_one_sided,
    epsilon_two_sided,
    scan_radius,
)
from advcal.errors import EmptyWindowError, InvalidArgumentError
from advcal.priors import MASS_TOL, Prior

AND = "and"
OR = "or"


def lp_norm(values: Sequence[float], p) -> float:
    """``l_p`` norm for ``p`` in ``{1, 2, inf}`` (``"inf"`` accepted)."""
    if p in (math.inf, "inf"):
        return max(abs(v) for v in values)
    if p == 1:
        return math.fsum(abs(v) for v in values)
    if p == 2:
        return math.sqrt(math.fsum(v * v for v in values))
    raise InvalidArgumentError(f"unsupported norm l_{p}; use 1, 2 or inf")


@dataclass(frozen=True)
class MetricSpace:
    norm_p: object
    dims: Tuple[float, ...]

    def __post_init__(self) -> None:
        if self.norm_p not in (1, 2, math.inf, "inf"):
            raise InvalidArgumentError(f"unsupported norm l_{self.norm_p}")
        if any(not R > 0 for R in self.dims):
            raise InvalidArgumentError("dimension bounds must be positive")

    def norm(self, values: Sequence[float]) -> float:
        return lp_norm(values, self.norm_p)


@dataclass(frozen=True)
class SensitiveItem:
    attr: Hashable
    t: object
    r: float
    prior: Prior
    R: float

    def g(self, z: float) -> float:
        return self.prior.window_mass(self.t, z)


@dataclass(frozen=True)
class SensitiveSet:
    items: Tuple[SensitiveItem, ...]
    combinator: str = AND
    scale_factors: Optional[Tuple[float, ...]] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "items", tuple(self.items))
        if not self.items:
            raise InvalidArgumentError("sensitive set is empty")
        if self.combinator not in (AND, OR):
            raise InvalidArgumentError(f"combinator must be 'and' or 'or', got {self.combinator!r}")
        ids = [it.attr for it in self.items]
        if len(set(ids)) != len(ids):
            raise InvalidArgumentError("attribute ids must be unique within a set")
        for it in self.items:
            if not it.r < it.R:
                raise InvalidArgumentError(f"{it.attr}: need r < R, got r={it.r}, R={it.R}")

    def __len__(self) -> int:
        return len(self.items)


@dataclass(frozen=True)
class OrBlockDecomposition:
    """Prior ratios and epsilons of the central block (index 0) and each dimension."""

    alpha: Tuple[float, ...]
    argmax_k: int
    eps: Tuple[float, ...]


def _check_windows(S: SensitiveSet, a_choices: Sequence[float], strict: bool) -> None:
    if len(a_choices) != len(S.items):
        raise InvalidArgumentError(f"need {len(S.items)} window radii, got {len(a_choices)}")
    for it, a in zip(S.items, a_choices):
        too_small = a <= it.r if strict else a < it.r
        if too_small or a > it.R * (1.0 + 1e-12):
            rel = "<" if strict else "<="
            raise InvalidArgumentError(
                f"{it.attr}: window {a} outside r {rel} a <= R (r={it.r}, R={it.R})"
            )


def _full(q: float) -> bool:
    return q >= 1.0 - MASS_TOL


def and_event_epsilon(
    S: SensitiveSet,
    delta: float,
    a_choices: Sequence[float],
    *,
    two_sided: bool = False,
) -> EpsilonResult:
    """Epsilon for guessing every attribute of ``S`` (l_inf mechanism metric).

    With ``two_sided`` and a window covering all the mass, the lower-bound
    side is enforced too.
    """
    _check_windows(S, a_choices, strict=True)
    p = math.prod(it.g(it.r) for it in S.items)
    q = math.prod(it.g(a) for it, a in zip(S.items, a_choices))
    a = lp_norm(a_choices, math.inf)
    if p <= 0.0:
        raise InvalidArgumentError("correct-guess mass is zero")
    if two_sided and _full(q):
        return replace(epsilon_two_sided(p, delta, a), q=q)
    return epsilon_one_sided(p, q, delta, a)


def or_event_epsilon(
    S: SensitiveSet,
    delta: float,
    a_choices: Sequence[float],
    *,
    two_sided: bool = False,
) -> Tuple[EpsilonResult, OrBlockDecomposition]:
    """Epsilon for guessing at least one attribute of ``S``.

    When every window reaches its bound the OR-mass simply replaces the AND
    mass.  With interior windows the space is cut into a central block (index
    0) and per-dimension blocks; each yields an epsilon and the smallest one
    is returned.  Interior blocks are compared over twice the l_inf window
    radius for two or more attributes.
    """
    _check_windows(S, a_choices, strict=False)
    n = len(S.items)
    p_k = [it.g(it.r) for it in S.items]
    q_k = [it.g(a) for it, a in zip(S.items, a_choices)]
    ann = [q - p for p, q in zip(p_k, q_k)]
    Q0 = math.prod(q_k)
    hat0 = math.prod(ann)
    P0 = Q0 - hat0
    alpha0 = P0 / hat0 if hat0 > 0 else math.inf
    alphas = [alpha0] + [p / h if h > 0 else math.inf for p, h in zip(p_k, ann)]
    argmax_k = max(range(n + 1), key=lambda k: alphas[k])

    full = all(a >= it.R * (1.0 - 1e-12) for it, a in zip(S.items, a_choices))
    a_norm = lp_norm(a_choices, math.inf)
    if P0 <= 0.0:
        raise InvalidArgumentError("correct-guess mass is zero")

    if full or n == 1:
        if hat0 <= 0.0:
            raise EmptyWindowError("window carries no mass outside the OR region")
        if two_sided and _full(Q0):
            res = replace(epsilon_two_sided(P0, delta, a_norm), q=Q0)
        else:
            res = epsilon_one_sided(P0, Q0, delta, a_norm)
        return res, OrBlockDecomposition(tuple(alphas), argmax_k, (res.epsilon,))

    a = 2.0 * a_norm
    for it, h in zip(S.items, ann):
        if h <= 0.0:
            raise EmptyWindowError(f"{it.attr}: window mass does not exceed correct-guess mass")
    blocks = [epsilon_one_sided(P0, Q0, delta, a)]
    blocks += [epsilon_one_sided(p, q, delta, a) for p, q in zip(p_k, q_k)]
    worst = min(blocks, key=lambda res: res.epsilon)
    feasible = all(res.feasible for res in blocks)
    res = replace(worst, feasible=feasible, p=P0, q=Q0)
    return res, OrBlockDecomposition(tuple(alphas), argmax_k, tuple(b.epsilon for b in blocks))


@dataclass(frozen=True)
class ScaledPrior:
    """View of a prior in units of ``factor`` original distance units."""

    base: Prior
    factor: float

    @property
    def kind(self) -> str:
        return self.base.kind

    def window_mass(self, t, z: float) -> float:
        return self.base.window_mass(t * self.factor, z * self.factor)


def scale_dimensions(S: SensitiveSet) -> SensitiveSet:
    """Rescale every attribute so its guessing radius becomes 1.

    The factors are recorded on the returned set; an epsilon computed in the
    scaled space converts back with :func:`unscale_epsilon`.
    """
    factors = []
    items = []
    for it in S.items:
        if not it.r > 0:
            raise InvalidArgumentError(
                f"{it.attr}: cannot scale a zero radius (exact guesses use the discrete metric)"
            )
        s = float(it.r)
        factors.append(s)
        items.append(SensitiveItem(it.attr, it.t / s, 1.0, ScaledPrior(it.prior, s), it.R / s))
    prev = S.scale_factors or (1.0,) * len(items)
    total = tuple(f * g for f, g in zip(factors, prev))
    return SensitiveSet(tuple(items), S.combinator, total)


def unscale_epsilon(epsilon: float, factor: float) -> float:
    """Epsilon per original distance unit, given epsilon per scaled unit."""
    return epsilon / factor


def scan_multivariate(
    S: SensitiveSet,
    delta: float,
    N: int = DEFAULT_GRID,
    *,
    two_sided: bool = False,
    refine: bool = True,
) -> EpsilonResult:
    """Choose a common radius ``a``, clip it per dimension, maximise epsilon.

    Grid points where some clipped window does not exceed its radius are
    skipped.  The chosen per-dimension windows are ``min(a, R_i)``.
    """
    r = max(it.r for it in S.items)
    R = max(it.R for it in S.items)

    def evaluate(a: float) -> Optional[EpsilonResult]:
        a_i = [min(a, it.R) for it in S.items]
        try:
            if S.combinator == AND:
                if any(ai <= it.r for ai, it in zip(a_i, S.items)):
                    return None
                res = and_event_epsilon(S, delta, a_i, two_sided=two_sided)
            else:
                res, _ = or_event_epsilon(S, delta, a_i, two_sided=two_sided)
        except EmptyWindowError:
            return None
        return replace(res, a=a)

    best = scan_radius(evaluate, r, R, N, refine)
    if best is None:
        return EpsilonResult(-math.inf, False, "lb", "every window is empty", a=R)
    return best


def window_choices(S: SensitiveSet, a: float) -> List[float]:
    return [min(a, it.R) for it in S.items]
