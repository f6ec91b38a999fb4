"""Univariate conversion of a guessing-advantage bound into epsilon.

Notation: ``p`` is the prior mass of a correct guess, ``q`` the prior mass of
the whole window of radius ``a`` around the target (so the indistinguishable
neighbourhood carries ``q - p``), and ``delta`` the allowed advantage.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Optional

from scipy.optimize import minimize_scalar

from advcal.errors import EmptyWindowError, InvalidArgumentError
from advcal.priors import MASS_TOL, Prior

DEFAULT_GRID = 64


@dataclass(frozen=True)
class EpsilonResult:
    """Outcome of an epsilon computation.

    ``epsilon`` is ``inf`` when the advantage constraint is vacuous.  When
    ``feasible`` is false the window is too tight for any positive epsilon;
    ``epsilon`` then holds the (non-positive) value the formula produced and
    ``log_arg`` the logarithm that came out non-negative.
    """

    epsilon: float
    feasible: bool
    side: str = "lb"
    detail: str = ""
    p: float = float("nan")
    q: float = float("nan")
    a: float = float("nan")
    log_arg: Optional[float] = None

    @property
    def vacuous(self) -> bool:
        return math.isinf(self.epsilon) and self.epsilon > 0

    def usable(self) -> bool:
        return self.feasible and self.epsilon > 0


def _check_inputs(p: float, q: float, delta: float, a: float) -> None:
    if not 0.0 < delta < 1.0:
        raise InvalidArgumentError(f"delta must lie in (0, 1), got {delta}")
    if not a > 0:
        raise InvalidArgumentError(f"window radius must be positive, got {a}")
    if not 0.0 < p <= 1.0 or q > 1.0 + MASS_TOL:
        raise InvalidArgumentError(f"need 0 < p <= q <= 1, got p={p}, q={q}")
    if q - p <= 0.0:
        raise EmptyWindowError(f"window mass q={q} does not exceed target mass p={p}")


def epsilon_one_sided(p: float, q: float, delta: float, a: float = 1.0) -> EpsilonResult:
    """Largest epsilon keeping the posterior of the target below ``p + delta``."""
    _check_inputs(p, q, delta, a)
    if delta + p >= 1.0:
        return EpsilonResult(math.inf, True, "lb", "delta + p >= 1: bound is vacuous", p, q, a)
    arg = (p / (q - p)) * (1.0 / (delta + p) - 1.0)
    log_arg = math.log(arg)
    eps = -log_arg / a
    if log_arg >= 0.0:
        detail = (
            f"infeasible window: p/q = {p / q:.6g} >= delta + p = {delta + p:.6g}"
        )
        return EpsilonResult(eps, False, "lb", detail, p, q, a, log_arg)
    return EpsilonResult(eps, True, "lb", "", p, q, a, log_arg)


def epsilon_two_sided(p: float, delta: float, a: float = 1.0) -> EpsilonResult:
    """Full-window epsilon bounding the advantage in both directions.

    The upper side uses ``p``, the lower side the complement ``1 - p``; the
    smaller prior is always the binding one.
    """
    if p >= 1.0 or p <= 0.0:
        if not 0.0 < delta < 1.0:
            raise InvalidArgumentError(f"delta must lie in (0, 1), got {delta}")
        return EpsilonResult(math.inf, True, "both", "degenerate prior: nothing to learn", p, 1.0, a)
    lb = epsilon_one_sided(p, 1.0, delta, a)
    ub = epsilon_one_sided(1.0 - p, 1.0, delta, a)
    if abs(p - (1.0 - p)) <= MASS_TOL:
        return replace(lb, side="both", p=p)
    if p < 1.0 - p:
        return lb
    return replace(ub, side="ub", p=p)


def posterior_upper_bound(p: float, q: float, epsilon: float, a: float = 1.0) -> float:
    if epsilon < 0:
        raise InvalidArgumentError(f"epsilon must be non-negative, got {epsilon}")
    if q - p <= 0.0:
        raise EmptyWindowError(f"window mass q={q} does not exceed target mass p={p}")
    if math.isinf(epsilon):
        return 1.0
    return 1.0 / (1.0 + math.exp(-epsilon * a) * (q - p) / p)


def _better(cand: EpsilonResult, best: Optional[EpsilonResult]) -> bool:
    if best is None:
        return True
    if cand.feasible != best.feasible:
        return cand.feasible
    return cand.epsilon > best.epsilon


def scan_radius(
    evaluate: Callable[[float], Optional[EpsilonResult]],
    r: float,
    R: float,
    N: int = DEFAULT_GRID,
    refine: bool = True,
) -> Optional[EpsilonResult]:
    """Maximise epsilon over window radii ``r + k (R - r) / N``, ``k = 1..N``.

    ``evaluate`` returns ``None`` for radii whose window is empty.  With
    ``refine`` the best grid point is polished by a bounded scalar search
    between its grid neighbours.
    """
    if N < 1:
        raise InvalidArgumentError(f"grid size must be >= 1, got {N}")
    if not r < R:
        raise InvalidArgumentError(f"need r < R, got r={r}, R={R}")
    step = (R - r) / N
    grid = [r + k * step for k in range(1, N + 1)]
    grid[-1] = R
    best, best_k = None, -1
    for k, a in enumerate(grid):
        res = evaluate(a)
        if res is not None and _better(res, best):
            best, best_k = res, k
    if best is None or not refine or not best.feasible or best.vacuous:
        return best
    lo = grid[best_k - 1] if best_k >= 1 else grid[best_k]
    hi = grid[best_k + 1] if best_k + 1 < len(grid) else grid[best_k]
    if hi <= lo:
        return best

    def objective(a: float) -> float:
        res = evaluate(a)
        if res is None or not res.feasible:
            return math.inf
        return -res.epsilon

    opt = minimize_scalar(
        objective, bounds=(lo, hi), method="bounded", options={"xatol": 1e-10 * max(1.0, hi)}
    )
    cand = evaluate(float(opt.x))
    if cand is not None and _better(cand, best):
        best = cand
    return best


def scan_window(
    prior: Prior,
    t,
    r: float,
    delta: float,
    R: float,
    N: int = DEFAULT_GRID,
    *,
    refine: bool = True,
    corner: bool = False,
) -> EpsilonResult:
    """Pick the window radius in ``(r, R]`` that allows the largest epsilon.

    With ``corner`` the exponent uses the doubled radius so that targets near
    a boundary stay covered.
    """
    p = prior.window_mass(t, r)
    if p <= 0.0:
        raise InvalidArgumentError(f"correct-guess mass is zero at t={t}, r={r}")
    if delta + p >= 1.0:
        return EpsilonResult(math.inf, True, "lb", "delta + p >= 1: bound is vacuous", p, 1.0, R)

    ratios = []

    def evaluate(a: float) -> Optional[EpsilonResult]:
        q = prior.window_mass(t, a)
        if q - p <= 0.0:
            return None
        ratios.append(p / q)
        res = epsilon_one_sided(p, q, delta, 2.0 * a if corner else a)
        return replace(res, a=a)

    best = scan_radius(evaluate, r, R, N, refine)
    if best is None:
        return EpsilonResult(
            -math.inf, False, "lb", "every window in (r, R] is empty", p, p, R
        )
    if not best.feasible:
        detail = (
            f"no feasible window in (r, R]: smallest p/q = {min(ratios):.6g} "
            f">= delta + p = {delta + p:.6g}"
        )
        return replace(best, detail=detail)
    return best


def smallest_feasible_window(
    prior: Prior, t, r: float, delta: float, R: float, tol: float = 1e-10
) -> Optional[float]:
    """Smallest radius whose window satisfies ``delta + p > p / q``.

    Returns ``None`` when even ``a = R`` is infeasible.  The returned radius
    is the bisection upper end, so it is feasible itself.
    """
    p = prior.window_mass(t, r)
    threshold = p / (p + delta)

    def feasible(a: float) -> bool:
        return prior.window_mass(t, a) > threshold

    if not feasible(R):
        return None
    lo, hi = r, R
    while hi - lo > tol * max(1.0, abs(hi)):
        mid = 0.5 * (lo + hi)
        if feasible(mid):
            hi = mid
        else:
            lo = mid
    return hi
