"""Optimal window radius for uniform priors, via the Lambert W function."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple

from advcal.errors import InvalidArgumentError, OutOfDomainError

BRANCH_POINT = -1.0 / math.e
_MAX_ITER = 200


def _residual(w: float, y: float) -> float:
    return abs(w * math.exp(w) - y)


def _start(y: float, branch: int) -> float:
    near = math.sqrt(max(0.0, 2.0 * (1.0 + math.e * y)))
    if branch == 0:
        if y > math.e:
            return math.log1p(y)
        if abs(y) < 1e-8:
            return y - y * y
        if y >= 0.0:
            return 1.0
        return -1.0 + near - near * near / 3.0
    if near < 1.0:
        return -1.0 - near - near * near / 3.0
    return math.log(-y) - math.log(-math.log(-y))


def lambert_w(y: float, branch: int = 0) -> float:
    """Solve ``w * exp(w) = y``.

    ``branch=0`` is the principal branch (``w >= -1``, ``y >= -1/e``);
    ``branch=-1`` the lower branch (``w <= -1``, ``-1/e <= y < 0``).  Uses a
    Newton iteration that is damped so iterates never cross ``w = -1``, and
    finishes by picking the floating-point neighbour with the least residual.
    """
    if branch not in (0, -1):
        raise InvalidArgumentError(f"branch must be 0 or -1, got {branch}")
    if math.isnan(y) or y < BRANCH_POINT:
        raise OutOfDomainError(f"Lambert W undefined for y={y} < -1/e")
    if branch == -1 and y >= 0.0:
        raise OutOfDomainError(f"lower Lambert branch needs -1/e <= y < 0, got {y}")
    if y == BRANCH_POINT:
        return -1.0
    if y == 0.0:
        return 0.0
    if math.isinf(y):
        return math.inf

    w = _start(y, branch)
    if branch == -1 and y > -0.25:
        return _lower_log_form(y, w)
    for _ in range(_MAX_ITER):
        ew = math.exp(w)
        step = (w * ew - y) / ((w + 1.0) * ew)
        nxt = w - step
        if branch == 0 and nxt <= -1.0:
            nxt = 0.5 * (w - 1.0)
        elif branch == -1 and nxt >= -1.0:
            nxt = 0.5 * (w - 1.0)
        if abs(nxt - w) <= 4.0 * math.ulp(abs(nxt)):
            w = nxt
            break
        w = nxt

    best = w
    for direction in (math.inf, -math.inf):
        cand = w
        for _ in range(4):
            cand = math.nextafter(cand, direction)
            if _residual(cand, y) < _residual(best, y):
                best = cand
    return best


def _lower_log_form(y: float, w: float) -> float:
    return _solve_lower_log(math.log(-y), w)


def lambert_w_lower_log(log_neg_y: float) -> float:
    """Lower branch ``W_{-1}(y)`` given ``ln(-y)``, for ``y`` too small to represent.

    Requires ``ln(-y) <= -1`` (that is ``y >= -1/e``).
    """
    if log_neg_y > -1.0:
        raise OutOfDomainError(f"lower Lambert branch needs ln(-y) <= -1, got {log_neg_y}")
    if log_neg_y == -1.0:
        return -1.0
    if log_neg_y > -1.25:
        return lambert_w(-math.exp(log_neg_y), -1)
    return _solve_lower_log(log_neg_y, log_neg_y - math.log(-log_neg_y))


def _solve_lower_log(target: float, w: float) -> float:
    # Newton on w + ln(-w) = ln(-y); e^w may underflow here but this form never needs it
    for _ in range(_MAX_ITER):
        nxt = w - (w + math.log(-w) - target) / (1.0 + 1.0 / w)
        if nxt >= -1.0:
            nxt = 0.5 * (w - 1.0)
        if abs(nxt - w) <= 4.0 * math.ulp(w):
            return nxt
        w = nxt
    return w


@dataclass(frozen=True)
class LambertEval:
    y: float
    w: float
    residual: float


def lambert_eval(y: float, branch: int = 0) -> LambertEval:
    w = lambert_w(y, branch)
    return LambertEval(y, w, _residual(w, y))


def optimal_a_univariate(epsilon: float, r: float) -> float:
    """Window radius ``1/epsilon + r``, which gives the tightest posterior bound.

    Under a uniform prior ``e^{-a eps} (a - r) / r`` is the ratio of window
    to target mass discounted by the DP factor; it peaks at this radius.
    """
    if not epsilon > 0:
        raise InvalidArgumentError(f"epsilon must be positive, got {epsilon}")
    if r < 0:
        raise InvalidArgumentError(f"radius must be non-negative, got {r}")
    return 1.0 / epsilon + r


def posterior_at_optimal_a(epsilon: float, r: float) -> float:
    if not epsilon > 0 or not r > 0:
        raise InvalidArgumentError("epsilon and r must be positive")
    x = epsilon * r
    return 1.0 / (1.0 + 1.0 / (math.exp(x + 1.0) * x))


def epsilon_uniform_closed_form(r: float, R: float, delta: float) -> float:
    """Largest epsilon for a uniform prior with the window at its optimum.

    The correct-guess prior is ``r / R``; returns ``inf`` when
    ``r / R + delta >= 1`` (nothing left to protect).
    """
    if not r > 0 or not R > 0:
        raise InvalidArgumentError("r and R must be positive")
    if not 0.0 < delta < 1.0:
        raise InvalidArgumentError(f"delta must lie in (0, 1), got {delta}")
    s = r / R + delta
    if s >= 1.0:
        return math.inf
    return lambert_w(s / (math.e * (1.0 - s))) / r


def posterior_bound_multidim(epsilon: float, r: float, n: int) -> Tuple[float, float]:
    """Posterior bound ``(eps e r / n)^n`` and the radius ``n / eps`` attaining it.

    Uniform prior on an ``n``-dimensional ball; the bound is capped at 1.
    """
    if not epsilon > 0 or not r > 0:
        raise InvalidArgumentError("epsilon and r must be positive")
    if int(n) != n or n < 1:
        raise InvalidArgumentError(f"dimension must be a positive integer, got {n}")
    bound = (epsilon * math.e * r / n) ** n
    return min(bound, 1.0), n / epsilon
