import math
import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from advcal.engine import epsilon_two_sided
from advcal.errors import InvalidArgumentError, InvalidPriorError, UndefinedOutputError
from advcal.noise import GENCAUCHY, LAPLACE, MechanismSpec
from advcal.oracle import (
    GRID_SLACK,
    DiscreteScenario,
    discretize_continuous,
    indicator_scenario,
    max_advantage,
    output_grid,
    posterior_at_output,
)
from advcal.priors import Normal, UniformContinuous, worst_case_prior

from conftest import cat_joint


def random_scenario(rng, delta=None):
    """Random prior over at most 12 points, sensitivity-1 query, Laplace at engine epsilon."""
    while True:
        n = rng.randint(2, 12)
        w = [rng.random() + 1e-3 for _ in range(n)]
        masses = [x / sum(w) for x in w]
        masses[-1] = 1.0 - math.fsum(masses[:-1])
        target = rng.sample(range(n), rng.randint(1, n - 1))
        p = math.fsum(masses[i] for i in target)
        d = delta if delta is not None else rng.uniform(0.02, 0.3)
        res = epsilon_two_sided(p, d)
        if res.feasible and math.isfinite(res.epsilon) and res.epsilon > 0:
            break
    outputs = {i: rng.random() for i in range(n)}
    mech = MechanismSpec.laplace(res.epsilon)
    return DiscreteScenario(tuple(enumerate(masses)), outputs, target, mech), d


def test_indistinguishable_inputs():
    s = DiscreteScenario(((0, 0.5), (1, 0.5)), {0: 3.0, 1: 3.0}, {0}, MechanismSpec.laplace(1.0))
    for y in (-10.0, 0.0, 3.0, 50.0):
        assert posterior_at_output(s, y) == pytest.approx(0.5, abs=1e-15)


def test_no_noise_limit():
    s = DiscreteScenario(((0, 0.3), (1, 0.7)), {0: 0.0, 1: 1.0}, {0}, MechanismSpec.laplace(1e4))
    assert posterior_at_output(s, 0.0) > 1 - 1e-12


def test_zero_epsilon_gives_prior_exactly():
    mech = MechanismSpec(LAPLACE, math.inf)
    s = DiscreteScenario(((0, 0.3), (1, 0.7)), {0: 0.0, 1: 1.0}, {0}, mech)
    assert posterior_at_output(s, 0.0) == s.prior() == 0.3
    assert max_advantage(s).max_advantage == 0.0


def test_posterior_by_hand():
    lam = 2.0
    s = DiscreteScenario(((0, 0.25), (1, 0.75)), {0: 0.0, 1: 1.0}, {0}, MechanismSpec(LAPLACE, lam))
    y = 0.3
    w0 = 0.25 * math.exp(-abs(y) / lam)
    w1 = 0.75 * math.exp(-abs(y - 1) / lam)
    assert posterior_at_output(s, y) == pytest.approx(w0 / (w0 + w1), rel=1e-14)


def test_cauchy_posterior_by_hand():
    mech = MechanismSpec(GENCAUCHY, 1.5)
    s = DiscreteScenario(((0, 0.4), (1, 0.6)), {0: 0.0, 1: 2.0}, {0}, mech)
    y = 0.7
    w0, w1 = 0.4 * mech.density(y), 0.6 * mech.density(y - 2)
    assert posterior_at_output(s, y) == pytest.approx(w0 / (w0 + w1), rel=1e-12)


def test_undefined_output():
    s = DiscreteScenario(((0, 0.5), (1, 0.5)), {0: 0.0, 1: 1.0}, {0}, MechanismSpec.laplace(1.0))
    with pytest.raises(UndefinedOutputError):
        posterior_at_output(s, math.inf)


def test_scenario_validation():
    mech = MechanismSpec.laplace(1.0)
    with pytest.raises(InvalidPriorError):
        DiscreteScenario(((0, 0.5), (1, 0.4)), {0: 0, 1: 1}, {0}, mech)
    with pytest.raises(InvalidArgumentError):
        DiscreteScenario(((0, 0.5), (1, 0.5)), {0: 0, 1: 1}, set(), mech)
    with pytest.raises(InvalidArgumentError):
        DiscreteScenario(((0, 0.5), (1, 0.5)), {0: 0, 1: 1}, {7}, mech)


def test_cats_and_at_calibrated_epsilon():
    joint = cat_joint()
    eps = epsilon_two_sided(0.2, 0.1).epsilon
    worst = 0.0
    for target in joint:
        s = indicator_scenario(sorted(joint.items()), {target}, MechanismSpec.laplace(eps))
        worst = max(worst, max_advantage(s).max_advantage)
    assert worst <= 0.1 + 2e-3


def test_doubling_epsilon_raises_advantage():
    joint = sorted(cat_joint().items())
    eps = epsilon_two_sided(0.2, 0.1).epsilon
    target = {("black", "M")}
    a1 = max_advantage(indicator_scenario(joint, target, MechanismSpec.laplace(eps))).max_advantage
    a2 = max_advantage(indicator_scenario(joint, target, MechanismSpec.laplace(2 * eps))).max_advantage
    assert a2 > a1


def test_single_point_prior():
    s = indicator_scenario([("only", 1.0)], {"only"}, MechanismSpec.laplace(1.0))
    assert max_advantage(s).max_advantage == 0.0


def test_grid_covers_ten_scales():
    s = indicator_scenario([(0, 0.5), (1, 0.5)], {0}, MechanismSpec(LAPLACE, 2.0))
    ys, lo, hi, step = output_grid(s)
    assert lo <= -20 and hi >= 21
    assert step <= 2.0 / 50
    assert 0.0 in ys and 1.0 in ys


def test_engine_soundness_randomised():
    rng = random.Random(20240611)
    for _ in range(200):
        s, d = random_scenario(rng)
        assert max_advantage(s).max_advantage <= d + GRID_SLACK


@pytest.mark.parametrize("delta", [0.05, 0.1, 0.2])
def test_worst_case_prior_is_tight(delta):
    p = worst_case_prior(delta)
    eps = epsilon_two_sided(p, delta).epsilon
    s = indicator_scenario([(0, p), (1, 1 - p)], {0}, MechanismSpec.laplace(eps))
    adv = max_advantage(s).max_advantage
    assert 0.8 * delta <= adv <= delta + GRID_SLACK


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_soundness_property(seed):
    s, d = random_scenario(random.Random(seed))
    assert max_advantage(s).max_advantage <= d + GRID_SLACK


def test_discretise_uniform():
    disc = discretize_continuous(UniformContinuous(100), 10, 0, 100)
    assert [m for _, m in disc.points] == pytest.approx([0.1] * 10)
    assert disc.points[0][0] == pytest.approx(5.0)
    assert disc.max_bin_mass == pytest.approx(0.1)


def test_discretise_normal():
    prior = Normal(2000, 235.7)
    disc = discretize_continuous(prior, 200, 1000, 3000)
    assert math.fsum(m for _, m in disc.points) == pytest.approx(1.0, abs=1e-12)
    # the range spans about 4.24 sigma each side
    assert disc.covered_mass == pytest.approx(math.erf(1000 / (235.7 * math.sqrt(2))), abs=1e-12)


def test_discretise_rejects_bad_input():
    with pytest.raises(InvalidArgumentError):
        discretize_continuous(UniformContinuous(1), 1, 0, 1)
    with pytest.raises(InvalidArgumentError):
        discretize_continuous(UniformContinuous(1), 10, 1, 1)
