"""Budget calculus for queries with several outputs.

If each output ``i`` is ``eps_i``-DP and neighbouring databases are measured
with an ``l_p`` norm, the joint release is DP with the dual ``l_q`` norm of
the per-output epsilons: ``l_1`` inputs give the maximum (parallel
composition), ``l_inf`` inputs give the sum (sequential composition).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Sequence

from advcal.errors import InvalidArgumentError
from advcal.multivariate import lp_norm

SEQUENTIAL = "sequential"
PARALLEL = "parallel"

_DUAL = {1: math.inf, 2: 2, math.inf: 1}


def _norm_key(p):
    if p in ("inf", math.inf):
        return math.inf
    if p in (1, 2):
        return int(p)
    raise InvalidArgumentError(f"unsupported input norm l_{p}; use 1, 2 or inf")


def dual_exponent(p):
    return _DUAL[_norm_key(p)]


@dataclass(frozen=True)
class BudgetVector:
    eps: tuple
    input_norm_p: object = math.inf

    def __post_init__(self) -> None:
        object.__setattr__(self, "eps", tuple(float(e) for e in self.eps))
        if not self.eps:
            raise InvalidArgumentError("budget vector is empty")
        if any(e < 0 for e in self.eps):
            raise InvalidArgumentError("per-output epsilons must be non-negative")
        _norm_key(self.input_norm_p)

    def total(self) -> float:
        return dual_norm_compose(self.eps, self.input_norm_p)


def sequential_compose(eps: Sequence[float]) -> float:
    if not eps:
        raise InvalidArgumentError("nothing to compose")
    return math.fsum(eps)


def dual_norm_compose(eps: Sequence[float], input_norm_p) -> float:
    if not eps:
        raise InvalidArgumentError("nothing to compose")
    return lp_norm(eps, dual_exponent(input_norm_p))


def regime_norm(regime: str):
    """Input norm that realises a composition regime."""
    if regime == SEQUENTIAL:
        return math.inf
    if regime == PARALLEL:
        return 1
    raise InvalidArgumentError(f"unknown regime {regime!r}")


def partition_budget(total_eps: float, m: int, regime: str = SEQUENTIAL) -> List[float]:
    """Split a total epsilon equally over ``m`` similar outputs."""
    if total_eps < 0:
        raise InvalidArgumentError(f"total epsilon must be non-negative, got {total_eps}")
    if m < 1:
        raise InvalidArgumentError(f"need at least one output, got {m}")
    if regime == SEQUENTIAL:
        return [total_eps / m] * m
    if regime == PARALLEL:
        return [total_eps] * m
    raise InvalidArgumentError(f"unknown regime {regime!r}")
