import itertools
import math

import pytest
from hypothesis import assume, given, settings, strategies as st

from advcal.engine import epsilon_one_sided, epsilon_two_sided
from advcal.errors import InvalidArgumentError
from advcal.multivariate import (
    AND,
    OR,
    MetricSpace,
    SensitiveItem,
    SensitiveSet,
    and_event_epsilon,
    lp_norm,
    or_event_epsilon,
    scale_dimensions,
    scan_multivariate,
    unscale_epsilon,
    window_choices,
)
from advcal.priors import DiscretePmf, Normal, UniformContinuous


def uni(name, R, r, t=None):
    return SensitiveItem(name, t if t is not None else R / 2, r, UniformContinuous(R), R)


def test_lp_norms():
    v = [3.0, -4.0]
    assert lp_norm(v, 1) == 7
    assert lp_norm(v, 2) == 5
    assert lp_norm(v, "inf") == lp_norm(v, math.inf) == 4
    with pytest.raises(InvalidArgumentError):
        lp_norm(v, 3)
    assert MetricSpace(2, (1.0, 1.0)).norm(v) == 5


def test_set_validation():
    with pytest.raises(InvalidArgumentError):
        SensitiveSet((uni("x", 10, 1), uni("x", 10, 1)))
    with pytest.raises(InvalidArgumentError):
        SensitiveSet((uni("x", 10, 10),))
    with pytest.raises(InvalidArgumentError):
        SensitiveSet((uni("x", 10, 1),), "xor")


@settings(max_examples=150)
@given(R=st.floats(10, 1000), rf=st.floats(0.01, 0.3), af=st.floats(0.05, 1.0), delta=st.floats(0.02, 0.5))
def test_single_attribute_reduces_to_univariate(R, rf, af, delta):
    r = rf * R / 2
    a = r + af * (R - r)
    it = uni("x", R, r)
    p, q = it.g(r), it.g(a)
    assume(q - p > 1e-9)
    ref = epsilon_one_sided(p, q, delta, a)
    got_and = and_event_epsilon(SensitiveSet((it,)), delta, [a])
    got_or, _ = or_event_epsilon(SensitiveSet((it,), OR), delta, [a])
    assert got_and.epsilon == pytest.approx(ref.epsilon, rel=1e-12)
    assert got_or.epsilon == pytest.approx(ref.epsilon, rel=1e-12, abs=1e-15)


def test_and_masses_multiply():
    S = SensitiveSet((uni("x", 100, 5), uni("y", 50, 5)))
    res = and_event_epsilon(S, 0.1, [20, 10])
    assert res.p == pytest.approx(0.1 * 0.2)
    assert res.q == pytest.approx(0.4 * 0.4)
    assert res.a == 20
    assert res.epsilon == pytest.approx(epsilon_one_sided(0.02, 0.16, 0.1, 20).epsilon)


def test_and_window_bounds():
    S = SensitiveSet((uni("x", 100, 5),))
    with pytest.raises(InvalidArgumentError):
        and_event_epsilon(S, 0.1, [5])
    with pytest.raises(InvalidArgumentError):
        and_event_epsilon(S, 0.1, [101])


@settings(max_examples=150)
@given(
    ps=st.lists(st.floats(0.01, 0.3), min_size=2, max_size=4),
    delta=st.floats(0.02, 0.3),
)
def test_or_full_window_mass_is_union(ps, delta):
    items = tuple(uni(f"x{i}", 100, 50 * p) for i, p in enumerate(ps))
    S = SensitiveSet(items, OR)
    res, dec = or_event_epsilon(S, delta, [it.R for it in items])
    union = 1 - math.prod(1 - p for p in ps)
    assert res.p == pytest.approx(union, rel=1e-12)
    assert res.q == pytest.approx(1.0)
    assert len(dec.eps) == 1
    assume(union + delta < 1)
    assert res.epsilon == pytest.approx(epsilon_one_sided(union, 1.0, delta, 100).epsilon, rel=1e-9)


def test_or_interior_uses_blocks_and_doubled_radius():
    items = (uni("x", 100, 2), uni("y", 100, 2))
    S = SensitiveSet(items, OR)
    a = [30, 20]
    res, dec = or_event_epsilon(S, 0.1, a)
    p = [it.g(it.r) for it in items]
    q = [it.g(ai) for it, ai in zip(items, a)]
    P0 = q[0] * q[1] - (q[0] - p[0]) * (q[1] - p[1])
    blocks = [epsilon_one_sided(P0, q[0] * q[1], 0.1, 60)]
    blocks += [epsilon_one_sided(pi, qi, 0.1, 60) for pi, qi in zip(p, q)]
    assert dec.eps == pytest.approx(tuple(b.epsilon for b in blocks))
    assert res.epsilon == pytest.approx(min(b.epsilon for b in blocks))
    assert res.feasible == all(b.feasible for b in blocks)
    assert len(dec.alpha) == 3


def test_cats_joint_discrete():
    # exact guesses on the joint space: every pair of inputs is one unit apart
    colors = {"red": 0.2, "white": 0.1, "tabby": 0.25, "black": 0.4, "tortoise": 0.05}
    pmf = DiscretePmf([((c, g), m * 0.5) for c, m in colors.items() for g in "MF"])
    it = SensitiveItem("cat", ("black", "M"), 0, pmf, 1)
    res = and_event_epsilon(SensitiveSet((it,)), 0.1, [1], two_sided=True)
    assert res.epsilon == pytest.approx(0.539, abs=1e-3)


def test_scaling_round_trip():
    it = SensitiveItem("s", 2000, 100, Normal(2000, 235.7), 3000)
    S = SensitiveSet((it,))
    scaled = scale_dimensions(S)
    assert scaled.items[0].r == 1.0
    assert scaled.scale_factors == (100.0,)
    e_orig = and_event_epsilon(S, 0.1, [400]).epsilon
    e_scaled = and_event_epsilon(scaled, 0.1, [4]).epsilon
    assert unscale_epsilon(e_scaled, 100) == pytest.approx(e_orig, rel=1e-12)
    assert unscale_epsilon(0.767, 200) == pytest.approx(0.0038, abs=1e-4)


def test_scaling_rejects_exact_guess():
    pmf = DiscretePmf([("a", 0.5), ("b", 0.5)])
    with pytest.raises(InvalidArgumentError):
        scale_dimensions(SensitiveSet((SensitiveItem("c", "a", 0, pmf, 1),)))


def test_scan_beats_every_grid_point():
    items = (uni("x", 100, 5), uni("y", 60, 3))
    S = SensitiveSet(items, AND)
    best = scan_multivariate(S, 0.1, 32)
    for k in range(1, 33):
        a = 5 + k * 95 / 32
        a_i = window_choices(S, a)
        if any(ai <= it.r for ai, it in zip(a_i, items)):
            continue
        assert best.epsilon >= and_event_epsilon(S, 0.1, a_i).epsilon - 1e-12


def test_scan_or_full_window_two_sided():
    items = (uni("x", 10, 1), uni("y", 10, 1))
    S = SensitiveSet(items, OR)
    res = scan_multivariate(S, 0.1, 8, two_sided=True)
    assert res.feasible
    full, _ = or_event_epsilon(S, 0.1, [10, 10], two_sided=True)
    assert res.epsilon >= full.epsilon - 1e-12
