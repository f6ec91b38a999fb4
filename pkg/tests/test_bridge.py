import math

import pytest
from hypothesis import assume, given, settings, strategies as st

from advcal.bridge import (
    CANNOT_SATISFY,
    INFINITE_NOISE,
    OK,
    VACUOUS,
    alpha_candidate,
    approx_dp_feasible,
    average_advantage,
    b_prime_lambert,
    degenerate_parameters,
    delta_ratio,
    dp_to_ga_fixed_delta,
    dp_to_ga_fixed_eps,
    ga_to_dp_approximate_laplace,
    ga_to_dp_probabilistic,
    guard_beta,
    laplace_smooth_delta,
    posterior_bound_approx_dp,
    posterior_bound_approx_dp_upper,
)
from advcal.engine import epsilon_two_sided, posterior_upper_bound
from advcal.errors import InvalidArgumentError
from advcal.noise import GENCAUCHY, LAPLACE, MechanismSpec

LAP1 = MechanismSpec(LAPLACE, 1.0, c_t=1.0)


@settings(max_examples=200)
@given(eps=st.floats(0.01, 5), p=st.floats(0.01, 0.9), frac=st.floats(0.05, 1), dp=st.floats(0.01, 0.99))
def test_zero_delta_reduces_to_pure_bound(eps, p, frac, dp):
    q = p + frac * (1 - p)
    assume(q - p > 1e-9)
    res = dp_to_ga_fixed_delta(eps, 0.0, p, q, LAP1, dp)
    assert res.eps_prime == pytest.approx(posterior_upper_bound(p, q, eps, 1) - p, abs=1e-9)


def test_fixed_delta_example():
    # evaluated by hand: d = -ln(0.1), lower density (1/2) e^{-(1 + d)}
    d = -math.log(0.1)
    chi = 0.5 * math.exp(-(1 + d))
    expected = 1 / (1 + (1 / (math.e + 0.01 / chi)) * 0.8 / 0.2) - 0.2
    res = dp_to_ga_fixed_delta(1.0, 0.01, 0.2, 1.0, LAP1, 0.9)
    assert res.status == OK
    assert res.d_of_delta == pytest.approx(d)
    assert res.chi_lo == pytest.approx(chi)
    assert res.eps_prime == pytest.approx(expected, rel=1e-12)
    assert res.eps_prime == pytest.approx(0.2491828637123612, rel=1e-12)
    assert res.avg_advantage == pytest.approx(1 + (res.eps_prime - 1) * 0.9)


def test_fixed_delta_vacuous_when_density_vanishes():
    res = dp_to_ga_fixed_delta(1.0, 0.01, 0.2, 1.0, LAP1, 1.0)
    assert res.status == VACUOUS
    assert res.eps_prime == pytest.approx(0.8)


def test_huge_delta_cannot_raise_bound_below_zero():
    res = dp_to_ga_fixed_delta(0.0, 50.0, 0.2, 0.3, LAP1, 0.5)
    assert res.status == OK and res.eps_prime > 0
    res = dp_to_ga_fixed_eps(1.0, 0.01, 0.2, 1.0, LAP1, 0.01)
    assert res.status == CANNOT_SATISFY


@settings(max_examples=200)
@given(
    eps=st.floats(0.05, 3),
    delta=st.floats(1e-4, 0.05),
    p=st.floats(0.05, 0.5),
    dp=st.floats(0.05, 0.95),
    kind=st.sampled_from([LAPLACE, GENCAUCHY]),
    c=st.floats(0.0, 2.0),
)
def test_fixed_delta_and_fixed_eps_are_inverse(eps, delta, p, dp, kind, c):
    mech = MechanismSpec(kind, 1.0, c_t=c)
    fwd = dp_to_ga_fixed_delta(eps, delta, p, 1.0, mech, dp)
    assume(fwd.status == OK and p + fwd.eps_prime < 1 - 1e-9)
    back = dp_to_ga_fixed_eps(eps, delta, p, 1.0, mech, fwd.eps_prime)
    assert back.status == OK
    assert back.delta_prime == pytest.approx(dp, abs=1e-6)


def test_fixed_eps_zero_delta_always_holds():
    res = dp_to_ga_fixed_eps(1.0, 0.0, 0.2, 1.0, LAP1, 0.3)
    assert res.delta_prime == 1.0


def test_fixed_eps_density_below_threshold():
    # the density at the offset is already below the required level
    far = MechanismSpec(LAPLACE, 1.0, c_t=30.0)
    res = dp_to_ga_fixed_eps(1.0, 0.01, 0.2, 1.0, far, 0.3)
    assert res.status == CANNOT_SATISFY
    assert res.note


def test_fixed_eps_below_pure_advantage():
    pure = posterior_upper_bound(0.2, 1.0, 1.0) - 0.2
    res = dp_to_ga_fixed_eps(1.0, 0.01, 0.2, 1.0, LAP1, pure * 0.9)
    assert res.status == CANNOT_SATISFY


@pytest.mark.parametrize("e,d,expected", [(0.1, 1, 0.1), (0.1, 0, 1.0), (0.2, 0.9, 0.28)])
def test_average_advantage(e, d, expected):
    assert average_advantage(e, d) == pytest.approx(expected)


def test_average_advantage_domain():
    with pytest.raises(InvalidArgumentError):
        average_advantage(1.5, 0.5)


def test_probabilistic_route():
    r0 = ga_to_dp_probabilistic(0.0, 0.2, 0.1)
    assert (r0.eps, r0.delta) == (pytest.approx(0.539, abs=1e-3), 0.0)
    r = ga_to_dp_probabilistic(0.05, 0.2, 0.1)
    assert r.eps == r0.eps == epsilon_two_sided(0.2, 0.1).epsilon
    assert r.delta == 0.05 and not r.vacuous
    assert ga_to_dp_probabilistic(1.0, 0.2, 0.1).vacuous


@settings(max_examples=200)
@given(eps=st.floats(0.1, 20), bf=st.floats(0.01, 0.99), C=st.floats(0.1, 100))
def test_guard_identity(eps, bf, C):
    b = bf * eps
    beta = guard_beta(eps, b, C)
    assume(math.isfinite(beta) and beta > 0)
    # at the guard the delta term equals c / C times the sensitivity bound
    assert delta_ratio(eps, b, beta, 1.0) == pytest.approx(1.0 / C, rel=1e-9)


def test_guard_identity_unit_bound():
    eps, b, c = 3.0, 1.0, 0.7
    beta = (eps - b) / (eps - 1 - math.log(b / 4))
    assert guard_beta(eps, b) == pytest.approx(beta)
    assert 4 * math.exp(eps - 1 - (eps - b) / beta) * c / b == pytest.approx(c, abs=1e-9)


def test_guard_edge_cases():
    assert guard_beta(1.0, 0.5, math.inf) == 0.0
    assert guard_beta(0.5, 0.45, 0.1) == math.inf
    with pytest.raises(InvalidArgumentError):
        guard_beta(1.0, 1.0)


def test_degenerate_parameters():
    assert degenerate_parameters(0.8, 0.1) == (0.0, 0.8 - 0.1, 0.0)
    assert laplace_smooth_delta(1.0, 0.5, 0.0) == 0.0


@settings(max_examples=200)
@given(eps=st.floats(0.5, 10), af=st.floats(0.01, 0.9), beta=st.floats(0.01, 1.0), c=st.floats(1e-4, 10))
def test_lambert_roots_solve_boundary(eps, af, beta, c):
    alpha = af * eps
    roots = b_prime_lambert(eps, alpha, beta, c)
    if roots is None:
        return
    need = -math.expm1(-alpha)
    assume(roots[0] > 1e-300 and math.isfinite(roots[1]))
    for b in roots:
        assert delta_ratio(eps - alpha, b, beta, c) == pytest.approx(need, rel=1e-6)


@settings(max_examples=200)
@given(eps=st.floats(0.5, 10), af=st.floats(0.01, 0.9), beta=st.floats(0.01, 1.0), c=st.floats(1e-4, 10))
def test_search_never_worse_than_lambert(eps, af, beta, c):
    cand = alpha_candidate(eps, af * eps, beta, c)
    if cand.b_lambert is not None:
        assert cand.b_best >= cand.b_lambert
        # the scan can approach the closed form from below, never pass it
        assert cand.b_grid is None or cand.b_grid <= cand.b_lambert * (1 + 1e-6)


def test_search_improves_on_baseline():
    res = ga_to_dp_approximate_laplace(0.1, 0.2, 1.0, 0.5, C=1.0)
    assert res.noise_level <= res.baseline_noise
    assert res.params.status == OK


def test_search_uses_slack_when_it_pays():
    res = ga_to_dp_approximate_laplace(0.3, 0.02, 1.0, 0.01, C=10.0)
    assert res.params.alpha > 0
    assert res.noise_level < res.baseline_noise
    assert res.posterior_bound <= 0.02 + 0.3 + 1e-12
    p = res.params
    assert p.delta == pytest.approx(laplace_smooth_delta(p.eps, p.b_prime, res.beta))


def test_degenerate_choice_matches_pure_pipeline():
    res = ga_to_dp_approximate_laplace(0.1, 0.2, 1.0, 0.5, C=1.0)
    assert res.params.alpha == 0.0
    assert res.params.b_prime == res.params.eps - res.beta
    assert res.params.delta == 0.0
    assert res.posterior_bound == pytest.approx(0.3, abs=1e-12)


def test_infinite_noise_for_hostile_sensitivity():
    for c_t in (math.inf, lambda beta: 1e13, lambda beta: math.nan):
        res = ga_to_dp_approximate_laplace(0.1, 0.2, 1.0, c_t)
        assert res.params.status == INFINITE_NOISE
        assert res.infinite_noise and res.mechanism is None


def test_approximate_search_is_deterministic():
    a = ga_to_dp_approximate_laplace(0.3, 0.02, 1.0, 0.01, C=10.0)
    b = ga_to_dp_approximate_laplace(0.3, 0.02, 1.0, 0.01, C=10.0)
    assert a == b


@settings(max_examples=200)
@given(
    e1=st.floats(0, 3), e2=st.floats(0, 3), d1=st.floats(0, 0.1), d2=st.floats(0, 0.1),
    chi=st.floats(0.01, 1), p=st.floats(0.05, 0.9),
)
def test_posterior_chain_monotone(e1, e2, d1, d2, chi, p):
    lo_e, hi_e = sorted((e1, e2))
    lo_d, hi_d = sorted((d1, d2))
    f = lambda e, d: posterior_bound_approx_dp(e, d, chi, p, 1.0)
    assert f(lo_e, lo_d) <= f(hi_e, lo_d) + 1e-15
    assert f(lo_e, lo_d) <= f(lo_e, hi_d) + 1e-15


@settings(max_examples=200)
@given(e=st.floats(0, 3), d=st.floats(0, 0.5), chi=st.floats(0.01, 1), p=st.floats(0.05, 0.9))
def test_approximate_bound_dominates_pure(e, d, chi, p):
    pure = posterior_upper_bound(p, 1.0, e)
    assert posterior_bound_approx_dp_upper(e, d, chi, p, 1.0) >= pure - 1e-15
    assert posterior_bound_approx_dp_upper(e, 0.0, chi, p, 1.0) == pytest.approx(pure, rel=1e-15)


def test_feasibility_needs_delta_below_density():
    assert approx_dp_feasible(0.1, 0.2)
    assert not approx_dp_feasible(0.2, 0.2)
    assert posterior_bound_approx_dp_upper(1.0, 0.3, 0.2, 0.2, 1.0) == 1.0


def test_search_validation():
    with pytest.raises(InvalidArgumentError):
        ga_to_dp_approximate_laplace(0.1, 0.2, 1.0, -1.0, C=1.0)
    with pytest.raises(InvalidArgumentError):
        ga_to_dp_approximate_laplace(0.1, 0.2, 1.0, 0.5, C=1.0, b_start=5.0)
    with pytest.raises(InvalidArgumentError):
        ga_to_dp_approximate_laplace(0.9, 0.2, 1.0, 0.5, C=1.0)
