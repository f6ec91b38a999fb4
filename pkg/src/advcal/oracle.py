"""Brute-force Bayesian attacker for finite input spaces.

Given a prior over finitely many inputs, a query and a noise mechanism, the
exact posterior of a target set is computed at every output on a grid.  The
largest posterior-minus-prior gap over the grid is an independent check on
any epsilon the calibration engine produces.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Hashable, Mapping, Sequence, Tuple, Union

import numpy as np

from advcal.errors import InvalidArgumentError, InvalidPriorError, UndefinedOutputError
from advcal.noise import LAPLACE, MechanismSpec
from advcal.priors import MASS_TOL

GRID_HALF_WIDTH = 10.0
GRID_STEPS_PER_SCALE = 50
GRID_SLACK = 3e-3

Query = Union[Mapping[Hashable, float], Callable[[Hashable], float]]


@dataclass(frozen=True)
class DiscreteScenario:
    """Finite prior, query and noise.

    A target set covering every point is allowed: nothing can then be
    learned and the advantage is 0.
    """

    points: Tuple[Tuple[Hashable, float], ...]
    query: Query
    target: frozenset
    mech: MechanismSpec

    def __post_init__(self) -> None:
        pts = tuple((x, float(m)) for x, m in self.points)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "target", frozenset(self.target))
        if not pts:
            raise InvalidPriorError("scenario has no points")
        labels = [x for x, _ in pts]
        if len(set(labels)) != len(labels):
            raise InvalidPriorError("duplicate input points")
        if any(m < 0 for _, m in pts):
            raise InvalidPriorError("negative mass")
        total = math.fsum(m for _, m in pts)
        if abs(total - 1.0) > MASS_TOL:
            raise InvalidPriorError(f"masses sum to {total!r}, not 1")
        if not self.target:
            raise InvalidArgumentError("target set is empty")
        if not self.target <= set(labels):
            raise InvalidArgumentError("target set names unknown points")

    def output(self, x: Hashable) -> float:
        return float(self.query(x) if callable(self.query) else self.query[x])

    def prior(self) -> float:
        return math.fsum(m for x, m in self.points if x in self.target) / math.fsum(
            m for _, m in self.points
        )

    def _arrays(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        outs = np.array([self.output(x) for x, _ in self.points], dtype=float)
        masses = np.array([m for _, m in self.points], dtype=float)
        in_target = np.array([x in self.target for x, _ in self.points], dtype=bool)
        return outs, masses, in_target


def _log_density(mech: MechanismSpec, z: np.ndarray) -> np.ndarray:
    # constant terms cancel in the posterior ratio, so they are dropped
    if math.isinf(mech.scale):
        return np.zeros_like(z)
    if mech.kind == LAPLACE:
        return -np.abs(z) / mech.scale
    return -np.log1p(np.abs(z / mech.scale) ** mech.gamma)


def _posteriors(s: DiscreteScenario, ys: np.ndarray) -> np.ndarray:
    outs, masses, in_target = s._arrays()
    if not np.all(np.isfinite(ys)):
        raise UndefinedOutputError("output must be finite")
    logw = _log_density(s.mech, ys[:, None] - outs[None, :])
    with np.errstate(divide="ignore"):
        logw = logw + np.log(masses)[None, :]
    top = logw.max(axis=1, keepdims=True)
    if not np.all(np.isfinite(top)):
        raise UndefinedOutputError("every likelihood vanishes at this output")
    w = np.exp(logw - top)
    return w[:, in_target].sum(axis=1) / w.sum(axis=1)


def posterior_at_output(s: DiscreteScenario, y: float) -> float:
    """Exact posterior probability of the target set after observing ``y``."""
    if math.isinf(s.mech.scale):
        return s.prior()
    return float(_posteriors(s, np.array([float(y)]))[0])


@dataclass(frozen=True)
class AdvantageReport:
    max_advantage: float
    argmax_y: float
    prior: float
    y_lo: float
    y_hi: float
    step: float
    slack: float = GRID_SLACK


def output_grid(s: DiscreteScenario) -> Tuple[np.ndarray, float, float, float]:
    """Output grid spanning the query range padded by ten noise scales.

    The query outputs themselves are added: a Laplace posterior is monotone
    between consecutive outputs, so the supremum sits on one of them.
    """
    outs, _, _ = s._arrays()
    lam = s.mech.scale
    lo = float(outs.min()) - GRID_HALF_WIDTH * lam
    hi = float(outs.max()) + GRID_HALF_WIDTH * lam
    step = lam / GRID_STEPS_PER_SCALE
    n = int(math.ceil((hi - lo) / step)) + 1
    ys = np.concatenate([lo + step * np.arange(n), outs])
    return np.unique(ys), lo, hi, step


def max_advantage(s: DiscreteScenario) -> AdvantageReport:
    """Largest ``|posterior - prior|`` of the target set over the output grid.

    The complement has the same gap with the opposite sign, so this one
    number covers both sides.
    """
    prior = s.prior()
    if math.isinf(s.mech.scale):
        return AdvantageReport(0.0, 0.0, prior, 0.0, 0.0, math.inf)
    ys, lo, hi, step = output_grid(s)
    gaps = np.abs(_posteriors(s, ys) - prior)
    k = int(np.argmax(gaps))
    return AdvantageReport(float(gaps[k]), float(ys[k]), prior, lo, hi, step)


def indicator_scenario(
    points: Sequence[Tuple[Hashable, float]], target, mech: MechanismSpec
) -> DiscreteScenario:
    """Scenario whose query outputs 1 on the target set and 0 elsewhere.

    This sensitivity-1 query separates the target as sharply as any query
    with the same sensitivity can.
    """
    tset = frozenset(target)
    return DiscreteScenario(tuple(points), lambda x: 1.0 if x in tset else 0.0, tset, mech)


@dataclass(frozen=True)
class Discretization:
    points: Tuple[Tuple[float, float], ...]
    max_bin_mass: float
    covered_mass: float
    edges: Tuple[float, float]


def discretize_continuous(prior, bins: int, lo: float, hi: float) -> Discretization:
    """Bin a continuous prior on ``[lo, hi]``; each bin's mass sits at its midpoint.

    Masses come from CDF differences and are renormalised over the range.
    ``max_bin_mass`` bounds the location error introduced.
    """
    if int(bins) != bins or bins < 10:
        raise InvalidArgumentError(f"need at least 10 bins, got {bins}")
    if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
        raise InvalidArgumentError(f"degenerate range [{lo}, {hi}]")
    edges = np.linspace(lo, hi, int(bins) + 1)
    cdf = np.array([prior.cdf(float(e)) for e in edges])
    raw = np.diff(cdf)
    covered = float(cdf[-1] - cdf[0])
    if not covered > 0:
        raise InvalidArgumentError("prior puts no mass on the range")
    masses = raw / covered
    masses = masses / math.fsum(masses)
    mids = 0.5 * (edges[:-1] + edges[1:])
    pts = tuple((float(x), float(m)) for x, m in zip(mids, masses))
    return Discretization(pts, float(masses.max()), covered, (float(lo), float(hi)))
