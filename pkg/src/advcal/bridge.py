"""Conversions between (eps, delta)-DP and probabilistic guessing advantage.

An (eps', delta')-guessing advantage bound holds when, with probability at
least ``delta'`` over the mechanism output, the posterior of the target
exceeds its prior by at most ``eps'``.  Note the convention: ``delta'`` is the
probability that the bound *holds*, not the failure probability.

Masses follow the engine convention: ``p`` is the correct-guess mass and
``q`` the mass of the whole window around it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Tuple, Union

from advcal.engine import EpsilonResult, epsilon_one_sided, epsilon_two_sided
from advcal.errors import EmptyWindowError, InvalidArgumentError
from advcal.noise import LAPLACE, MechanismSpec
from advcal.radius import lambert_w, lambert_w_lower_log

OK = "ok"
CANNOT_SATISFY = "cannot-satisfy"
VACUOUS = "vacuous"
INFINITE_NOISE = "infinite-noise"

SensitivityFn = Union[float, Callable[[float], float]]


@dataclass(frozen=True)
class BridgeParams:
    eps: float
    delta: float
    eps_prime: Optional[float] = None
    delta_prime: Optional[float] = None
    avg_advantage: Optional[float] = None
    chi_lo: Optional[float] = None
    chi_hi: Optional[float] = None
    alpha: Optional[float] = None
    b_prime: Optional[float] = None
    d_of_delta: Optional[float] = None
    status: str = OK
    note: str = ""

    @property
    def ok(self) -> bool:
        return self.status == OK


def average_advantage(eps_prime: float, delta_prime: float) -> float:
    """Expected advantage when the bound ``eps'`` holds with probability ``delta'``.

    Outside that event the advantage is only bounded by 1.
    """
    for name, v in (("eps'", eps_prime), ("delta'", delta_prime)):
        if not 0.0 <= v <= 1.0:
            raise InvalidArgumentError(f"{name} must lie in [0, 1], got {v}")
    return 1.0 + (eps_prime - 1.0) * delta_prime


def _odds(p: float, q: float) -> float:
    if not 0.0 < p < q <= 1.0 + 1e-12:
        raise EmptyWindowError(f"need 0 < p < q <= 1, got p={p}, q={q}")
    return (q - p) / p


def _c_of(mech: MechanismSpec, c_t: Optional[float]) -> float:
    if c_t is not None:
        return c_t
    return mech.c_t if mech.c_t is not None else 0.0


def posterior_bound_approx_dp(eps: float, delta: float, chi_lo: float, p: float, q: float) -> float:
    """Posterior bound under ``f(y|x) <= e^eps f(y|x') + delta``.

    ``chi_lo`` is a lower bound on the output density over the window.
    """
    if delta == 0.0:
        return 1.0 / (1.0 + math.exp(-eps) * _odds(p, q))
    if chi_lo <= 0.0:
        return 1.0
    return 1.0 / (1.0 + _odds(p, q) / (math.exp(eps) + delta / chi_lo))


def dp_to_ga_fixed_delta(
    eps: float,
    delta: float,
    p: float,
    q: float,
    mech: MechanismSpec,
    delta_prime: float,
    c_t: Optional[float] = None,
) -> BridgeParams:
    """Advantage bound ``eps'`` that holds with probability ``delta'``.

    ``c_t`` shifts the density argument (defaults to ``mech.c_t`` or 0).
    """
    if not 0.0 <= delta_prime <= 1.0:
        raise InvalidArgumentError(f"delta' must lie in [0, 1], got {delta_prime}")
    if eps < 0 or delta < 0:
        raise InvalidArgumentError("eps and delta must be non-negative")
    c = _c_of(mech, c_t)
    if delta_prime >= 1.0:
        d = math.inf
    elif delta_prime <= 0.0:
        d = 0.0
    else:
        d = mech.quantile(delta_prime)
    chi = mech.density(c + d) if math.isfinite(d) else 0.0
    if delta > 0.0 and chi <= 0.0:
        return BridgeParams(
            eps, delta, 1.0 - p, delta_prime, average_advantage(1.0 - p, delta_prime),
            chi_lo=chi, d_of_delta=d, status=VACUOUS,
            note="output density vanishes on the window: only the trivial bound holds",
        )
    eps_prime = posterior_bound_approx_dp(eps, delta, chi, p, q) - p
    if eps_prime < 0.0:
        return BridgeParams(
            eps, delta, eps_prime, delta_prime, chi_lo=chi, d_of_delta=d,
            status=CANNOT_SATISFY, note="negative advantage bound: (eps', delta') unattainable",
        )
    return BridgeParams(
        eps, delta, eps_prime, delta_prime, average_advantage(min(eps_prime, 1.0), delta_prime),
        chi_lo=chi, d_of_delta=d,
    )


def dp_to_ga_fixed_eps(
    eps: float,
    delta: float,
    p: float,
    q: float,
    mech: MechanismSpec,
    eps_prime: float,
    c_t: Optional[float] = None,
) -> BridgeParams:
    """Probability ``delta'`` with which an advantage bound ``eps'`` holds."""
    if eps < 0 or delta < 0 or eps_prime < 0:
        raise InvalidArgumentError("eps, delta and eps' must be non-negative")
    c = _c_of(mech, c_t)
    s = p + eps_prime
    if s >= 1.0:
        return BridgeParams(eps, delta, eps_prime, 1.0, average_advantage(min(eps_prime, 1.0), 1.0),
                            d_of_delta=math.inf, note="p + eps' >= 1: bound holds trivially")
    denom = _odds(p, q) * s / (1.0 - s) - math.exp(eps)
    if denom <= 0.0:
        return BridgeParams(eps, delta, eps_prime, status=CANNOT_SATISFY,
                            note="eps' is below the pure-DP advantage for this eps")
    if delta == 0.0:
        return BridgeParams(eps, delta, eps_prime, 1.0, average_advantage(eps_prime, 1.0),
                            chi_lo=0.0, d_of_delta=math.inf)
    threshold = delta / denom
    reach = mech.inverse_density(threshold)
    if reach is None or reach - c <= 0.0:
        return BridgeParams(
            eps, delta, eps_prime, chi_lo=threshold, status=CANNOT_SATISFY,
            note="density at the sensitivity offset is already below the required level",
        )
    d = reach - c
    delta_prime = mech.mass(d)
    return BridgeParams(eps, delta, eps_prime, delta_prime, average_advantage(eps_prime, delta_prime),
                        chi_lo=threshold, d_of_delta=d)


@dataclass(frozen=True)
class ProbabilisticResult:
    eps: float
    delta: float
    vacuous: bool
    epsilon_result: EpsilonResult


def ga_to_dp_probabilistic(
    delta_shared: float, p: float, advantage_delta: float, q: float = 1.0, a: float = 1.0
) -> ProbabilisticResult:
    """Epsilon for probabilistic DP: the pure-DP epsilon, with delta passed through.

    The advantage bound then holds for all but a ``delta`` fraction of outputs.
    """
    if not 0.0 <= delta_shared <= 1.0:
        raise InvalidArgumentError(f"delta must lie in [0, 1], got {delta_shared}")
    if q >= 1.0:
        res = epsilon_two_sided(p, advantage_delta, a)
    else:
        res = epsilon_one_sided(p, q, advantage_delta, a)
    return ProbabilisticResult(res.epsilon, delta_shared, delta_shared >= 1.0, res)


def approx_dp_feasible(delta: float, chi_hi: float) -> bool:
    """Whether any positive epsilon can work: requires ``delta < chi_hi``."""
    return delta < chi_hi


def posterior_bound_approx_dp_upper(eps: float, delta: float, chi_hi: float, p: float, q: float) -> float:
    """Posterior bound from ``f(y|x') >= e^{-eps} (f(y|x) - delta)``.

    ``chi_hi`` bounds the output density from above; 1 when ``delta >= chi_hi``.
    """
    if not approx_dp_feasible(delta, chi_hi):
        return 1.0
    return 1.0 / (1.0 + math.exp(-eps) * (1.0 - delta / chi_hi) * _odds(p, q))


# Laplace noise calibrated to a beta-smooth derivative sensitivity c_beta(t):
# noise c/b * Laplace(1) is (eps, delta)-DP with delta = 2 exp(eps - 1 - (eps - b)/beta),
# provided b + beta <= eps, and the peak output density is b / (2 c).


def laplace_smooth_delta(eps: float, b: float, beta: float) -> float:
    if beta <= 0.0:
        return 0.0
    return 2.0 * math.exp(eps - 1.0 - (eps - b) / beta)


def delta_ratio(eps: float, b: float, beta: float, c: float) -> float:
    """``delta / chi_hi`` for the smooth-sensitivity Laplace mechanism."""
    if beta <= 0.0:
        return 0.0
    return 4.0 * math.exp(eps - 1.0 - (eps - b) / beta) * c / b


def guard_beta(eps: float, b: float, C: float = 1.0) -> float:
    """Largest ``beta`` keeping ``delta_ratio`` at most ``c / C``.

    ``inf`` when every ``beta`` qualifies; 0 for an unbounded ``C``.
    """
    if not 0.0 < b < eps:
        raise InvalidArgumentError(f"need 0 < b < eps, got b={b}, eps={eps}")
    if math.isinf(C):
        return 0.0
    denom = eps - 1.0 - math.log(b / (4.0 * C))
    if denom <= 0.0:
        return math.inf
    return (eps - b) / denom


def degenerate_parameters(eps: float, beta: float) -> Tuple[float, float, float]:
    """``(alpha, b', delta)`` when no slack is used: ``(0, eps - beta, 0)``."""
    return 0.0, eps - beta, 0.0


def b_prime_lambert(eps: float, alpha: float, beta: float, c: float) -> Optional[Tuple[float, float]]:
    """Both roots of ``delta_ratio(eps - alpha, b', beta, c) = 1 - e^{-alpha}``.

    Writing ``x = b'/beta`` the condition reads ``e^x / x <= Y``; its roots
    are ``-W(-1/Y)`` on the principal and lower Lambert branches.  Returns
    ``None`` when ``Y < e`` (no ``b'`` qualifies).
    """
    if not (alpha > 0.0 and beta > 0.0 and c > 0.0):
        return None
    e_ = eps - alpha
    # log space: K = 4 c e^{e_ - 1 - e_/beta} underflows for small beta
    log_Y = math.log(-math.expm1(-alpha)) + math.log(beta) - math.log(4.0 * c) - (e_ - 1.0 - e_ / beta)
    if log_Y < 1.0:
        return None
    if math.isinf(log_Y):
        return 0.0, math.inf
    # -1/Y can be subnormal, so the lower branch works from its logarithm
    arg = max(-math.exp(-log_Y), -1.0 / math.e)
    return -beta * lambert_w(arg, 0), -beta * lambert_w_lower_log(min(-log_Y, -1.0))


@dataclass(frozen=True)
class AlphaCandidate:
    alpha: float
    b_lambert: Optional[float]
    b_grid: Optional[float]

    @property
    def b_best(self) -> Optional[float]:
        opts = [b for b in (self.b_lambert, self.b_grid) if b is not None]
        return max(opts) if opts else None


def _slack_ok(eps: float, alpha: float, b: float, beta: float, c: float) -> bool:
    need = -math.expm1(-alpha)
    return delta_ratio(eps - alpha, b, beta, c) <= need * (1.0 + 1e-9)


def alpha_candidate(eps: float, alpha: float, beta: float, c: float, n_b: int = 64) -> AlphaCandidate:
    """Best ``b'`` for one slack value, by closed form and by a two-level scan."""
    upper = eps - alpha - beta
    if upper <= 0.0:
        return AlphaCandidate(alpha, None, None)
    b_w = None
    roots = b_prime_lambert(eps, alpha, beta, c)
    if roots is not None and roots[0] <= upper:
        b_w = min(roots[1], upper)

    def largest_ok(lo: float, hi: float) -> Optional[float]:
        found = None
        for k in range(1, n_b + 1):
            b = lo + (hi - lo) * k / n_b
            if _slack_ok(eps, alpha, b, beta, c):
                found = b
        return found

    step = upper / n_b
    b_g = largest_ok(0.0, upper)
    if b_g is not None and b_g < upper:
        b_g = largest_ok(b_g, min(b_g + step, upper)) or b_g
    return AlphaCandidate(alpha, b_w, b_g)


@dataclass(frozen=True)
class ApproxLaplaceResult:
    mechanism: Optional[MechanismSpec]
    params: BridgeParams
    beta: float
    c_beta: float
    C_used: float
    noise_level: float
    baseline_noise: float
    posterior_bound: Optional[float]

    @property
    def infinite_noise(self) -> bool:
        return math.isinf(self.noise_level)


def _as_fn(c_t: SensitivityFn) -> Callable[[float], float]:
    if callable(c_t):
        return c_t
    value = float(c_t)
    if value < 0:
        raise InvalidArgumentError(f"derivative sensitivity must be non-negative, got {value}")
    return lambda beta: value


def _search_C(eps: float, b_start: float, c_fn: Callable[[float], float], cap: float = 1e12) -> Optional[float]:
    """Smallest ``C'`` (window binary search) whose guard beta has ``c_beta <= C'``."""

    def ok(C: float) -> bool:
        beta = min(guard_beta(eps, b_start, C), eps - b_start)
        c = c_fn(beta)
        return math.isfinite(c) and c <= C

    hi = max(c_fn(eps - b_start), 1e-12)
    if not math.isfinite(hi) or hi > cap:
        return None
    lo = 0.0
    while not ok(hi):
        lo, hi = hi, 2.0 * hi
        if hi > cap:
            return None
    for _ in range(100):
        if hi - lo <= 1e-12 * hi:
            break
        mid = 0.5 * (lo + hi)
        if mid > 0 and ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


def ga_to_dp_approximate_laplace(
    delta_target: float,
    p: float,
    q: float,
    c_t: SensitivityFn,
    C: float = math.inf,
    *,
    a: float = 1.0,
    beta: Optional[float] = None,
    b_start: Optional[float] = None,
    n_alpha: int = 64,
    n_b: int = 64,
) -> ApproxLaplaceResult:
    """Laplace smooth-sensitivity parameters meeting an advantage bound.

    Starts from the pure-DP epsilon for ``delta_target``, fixes ``beta`` by the
    guard condition at the starting divisor ``b_start`` (a tuning knob,
    default ``eps / 2``), then searches the slack ``alpha`` in ``[0, eps]`` and
    the divisor ``b'`` for the smallest noise level ``c_beta(t) / b'``.  The
    slack-free parameterisation (``alpha = 0``, ``b' = eps - beta``,
    ``delta = 0``) is sound only with global sensitivity, so its noise level
    is ``C / b'``.  With ``C = inf`` the guard bound is replaced by the
    smallest self-consistent ``C'``; if none exists the noise is infinite.
    """
    pure = epsilon_one_sided(p, q, delta_target, a)
    c_fn = _as_fn(c_t)
    if not pure.usable() or pure.vacuous:
        raise InvalidArgumentError(f"pure-DP calibration has no finite positive epsilon: {pure.detail}")
    eps = pure.epsilon
    b0 = eps / 2.0 if b_start is None else b_start
    if not 0.0 < b0 < eps:
        raise InvalidArgumentError(f"starting divisor must lie in (0, eps), got {b0}")

    C_used = C
    if math.isinf(C):
        found = _search_C(eps, b0, c_fn)
        if found is None:
            params = BridgeParams(eps, 0.0, status=INFINITE_NOISE,
                                  note="no finite sensitivity bound C' is self-consistent")
            return ApproxLaplaceResult(None, params, 0.0, math.inf, math.inf, math.inf, math.inf, None)
        C_used = found
    if beta is None:
        beta = min(guard_beta(eps, b0, C_used), eps - b0)
    if not 0.0 <= beta < eps:
        raise InvalidArgumentError(f"beta must lie in [0, eps), got {beta}")
    c = c_fn(beta)

    _, b_deg, _ = degenerate_parameters(eps, beta)
    baseline = C / b_deg if b_deg > 0 else math.inf
    # total order on (noise, alpha, b') keeps the choice independent of evaluation order
    best: Tuple[float, float, float] = (baseline, 0.0, b_deg)

    def consider(alpha: float) -> Optional[float]:
        nonlocal best
        cand = alpha_candidate(eps, alpha, beta, c, n_b)
        b = cand.b_best
        if b is None or b <= 0.0:
            return None
        key = (c / b, alpha, -b)
        if key < (best[0], best[1], -best[2]):
            best = (c / b, alpha, b)
        return c / b

    if beta > 0.0 and c > 0.0 and math.isfinite(c):
        grid = [eps * k / n_alpha for k in range(1, n_alpha + 1)]
        levels = [consider(al) for al in grid]
        scored = [(lv, k) for k, lv in enumerate(levels) if lv is not None]
        if scored:
            _, k = min(scored)
            lo = grid[k - 1] if k > 0 else 0.0
            hi = grid[k + 1] if k + 1 < len(grid) else grid[k]
            for j in range(1, n_alpha):
                consider(lo + (hi - lo) * j / n_alpha)

    noise, alpha, b = best
    if math.isinf(noise):
        params = BridgeParams(eps, 0.0, alpha=0.0, b_prime=b_deg, status=INFINITE_NOISE,
                              note="no slack value yields a finite noise level")
        return ApproxLaplaceResult(None, params, beta, c, C_used, math.inf, baseline, None)

    eps_dp = eps - alpha
    if alpha == 0.0:
        delta_dp, chi_hi, sens = 0.0, b / (2.0 * C), C
    else:
        delta_dp, chi_hi, sens = laplace_smooth_delta(eps_dp, b, beta), b / (2.0 * c), c
    mech = MechanismSpec(LAPLACE, noise, b=b, beta=beta, c_t=sens)
    # posterior bound of the chosen parameterisation; never above p + delta_target
    bound = posterior_bound_approx_dp_upper(eps_dp, delta_dp, chi_hi, p, q)
    params = BridgeParams(eps_dp, delta_dp, chi_hi=chi_hi, alpha=alpha, b_prime=b)
    return ApproxLaplaceResult(mech, params, beta, c, C_used, noise, baseline, bound)
