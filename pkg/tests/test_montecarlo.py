import math

import numpy as np
import pytest

from mcnoma.channel import SystemParams, UserProfile
from mcnoma.montecarlo import (
    OutageEstimate,
    closed_form_outage,
    pair_outage_events,
    samples_for,
    simulate_pair_outage,
    simulate_single_outage,
    simulate_threshold_outage,
    single_closed_form_outage,
)
from mcnoma.power import (
    PairSolution,
    VirtualUser,
    pair_outage,
    solve_case,
    solve_pair,
    solve_single,
)
from mcnoma.rng import make_rng

PARAMS = SystemParams.from_dbm(-128.0, 3.6)
N = 10**6


def user(uid, d, rate, delta=0.01):
    return VirtualUser.from_profile(UserProfile.create(uid, d, rate, delta, PARAMS), 1)


@pytest.fixture
def near_far():
    return user(1, 60.0, 3.0, 0.01), user(2, 170.0, 1.5, 0.05)


def within(est: OutageEstimate, target, k=4.0):
    se = math.sqrt(target * (1 - target) / est.samples)
    return abs(est.outage_rate - target) <= k * se


def test_binding_outage_matches_requirement(near_far):
    a, b = near_far
    sol = solve_pair(a, b)
    emp = simulate_pair_outage(sol, a, b, PARAMS, N, make_rng(1))
    exact = pair_outage(sol, a, b)
    for est, req, ex in zip(emp, (a.outage_req, b.outage_req), exact):
        assert est.outage_rate <= req + 4 * math.sqrt(req * (1 - req) / N)
        assert within(est, ex)
    # at least one user sits on its constraint
    assert any(within(e, r) for e, r in zip(emp, (a.outage_req, b.outage_req)))


def test_both_cases_simulated(near_far):
    a, b = near_far
    for sic in ("a", "b"):
        s, o = (a, b) if sic == "a" else (b, a)
        case = solve_case(s, o)
        sol = case if sic == "a" else PairSolution(case.power_b, case.power_a, "b")
        emp = simulate_pair_outage(sol, a, b, PARAMS, N, make_rng(2))
        for est, ex in zip(emp, closed_form_outage(sol, a, b, PARAMS)):
            assert within(est, ex)


def test_extra_power_removes_outage(near_far):
    a, b = near_far
    sol = solve_pair(a, b)
    boosted = PairSolution(10 * sol.power_a, 10 * sol.power_b, sol.sic_user)
    emp = simulate_pair_outage(boosted, a, b, PARAMS, N, make_rng(3))
    assert emp.a.outage_rate < a.outage_req and emp.b.outage_rate < b.outage_req


def test_reduced_power_breaks_requirement(near_far):
    a, b = near_far
    sol = solve_pair(a, b)
    cut = PairSolution(0.5 * sol.power_a, 0.5 * sol.power_b, sol.sic_user)
    emp = simulate_pair_outage(cut, a, b, PARAMS, N, make_rng(4))
    assert max(emp.a.outage_rate - a.outage_req, emp.b.outage_rate - b.outage_req) > 0


def test_closed_form_routes_agree():
    rng = np.random.default_rng(10)
    for _ in range(50):
        d = rng.uniform(30, 200, 2)
        r = rng.uniform(0.1, 10, 2)
        e = rng.uniform(1e-3, 0.1, 2)
        a, b = user(1, d[0], r[0], e[0]), user(2, d[1], r[1], e[1])
        sol = solve_pair(a, b)
        np.testing.assert_allclose(closed_form_outage(sol, a, b, PARAMS), pair_outage(sol, a, b),
                                   rtol=1e-9)


def test_threshold_events_match_rate_events(near_far):
    a, b = near_far
    sol = solve_pair(a, b)
    rate_based = simulate_pair_outage(sol, a, b, PARAMS, N, make_rng(5))
    threshold = simulate_threshold_outage(sol, a, b, PARAMS, N, make_rng(5))
    # identical draws, so the two event definitions agree draw by draw up to rounding
    for x, y in zip(rate_based, threshold):
        assert abs(x.outage_rate - y.outage_rate) <= 10 / N


def test_events_sic_branches():
    s = VirtualUser.from_sinr(1.0, 1.0)
    o = VirtualUser.from_sinr(1.0, 1.0)
    # strong channel: both decoded
    out_s, out_o = pair_outage_events(np.array([100.0]), np.array([100.0]), 1.0, 3.0, s, o, 1.0)
    assert not out_s[0] and not out_o[0]
    # weak channel at the SIC performer: SIC fails and the own message is lost too
    out_s, _ = pair_outage_events(np.array([1e-3]), np.array([1.0]), 1.0, 3.0, s, o, 1.0)
    assert out_s[0]


def test_undecodable_pair_rejected(near_far):
    a, b = near_far
    with pytest.raises(ValueError):
        simulate_pair_outage(PairSolution(1.0, 1.0, "a"), a, b, PARAMS, 10, make_rng(0))


def test_distance_required():
    a = VirtualUser.from_sinr(1.0, 1.0)
    with pytest.raises(ValueError):
        simulate_single_outage(1.0, a, PARAMS, 10, make_rng(0))


def test_single_user_cases():
    u = user(1, 120.0, 2.0, 0.02)
    p = solve_single(u)
    est = simulate_single_outage(p, u, PARAMS, N, make_rng(6))
    assert single_closed_form_outage(p, u, PARAMS) == pytest.approx(0.02, rel=1e-9)
    assert within(est, 0.02)
    assert simulate_single_outage(1e6 * p, u, PARAMS, 10**5, make_rng(7)).outage_rate == 0.0
    assert simulate_single_outage(1e-9 * p, u, PARAMS, 10**5, make_rng(8)).outage_rate == 1.0
    with pytest.raises(ValueError):
        simulate_single_outage(0.0, u, PARAMS, 10, make_rng(0))


def test_reproducible(near_far):
    a, b = near_far
    sol = solve_pair(a, b)
    x = simulate_pair_outage(sol, a, b, PARAMS, 3 * 10**5, make_rng(42))
    y = simulate_pair_outage(sol, a, b, PARAMS, 3 * 10**5, make_rng(42))
    assert x == y


def test_blocks_cover_sample_count():
    u = user(1, 90.0, 1.0)
    est = simulate_single_outage(solve_single(u), u, PARAMS, (1 << 20) + 7, make_rng(1))
    assert est.samples == (1 << 20) + 7
    with pytest.raises(ValueError):
        simulate_single_outage(1.0, u, PARAMS, 0, make_rng(1))


def test_standard_error():
    est = OutageEstimate.from_count(10_000, N)
    assert est.std_error == pytest.approx(math.sqrt(0.01 * 0.99 / N))
    assert est.std_error == pytest.approx(1e-4, rel=0.01)


def test_samples_for_rare_targets():
    assert samples_for(0.01) == N
    assert samples_for(1e-5) == 10**7
    assert samples_for(1e-9) == 10**8


def test_outage_monotone_in_own_power(near_far):
    a, b = near_far
    sol = solve_pair(a, b)
    s, o = (a, b) if sol.sic_user == "a" else (b, a)
    p_s, p_o = sol.performer_powers()

    def rates(ps, po):
        pair = PairSolution(ps, po, "a")
        est = simulate_pair_outage(pair, s, o, PARAMS, 2 * 10**5, make_rng(77))
        return est.a.outage_rate, est.b.outage_rate

    other = [rates(p_s, p_o * f)[1] for f in (1.0, 1.5, 2.0, 4.0)]
    assert all(x >= y for x, y in zip(other, other[1:]))
    # the performer's own term dominates once the other power is large
    big = 50 * p_o
    own = [rates(p_s * f, big)[0] for f in (0.8, 1.0, 1.5, 3.0)]
    assert all(x >= y for x, y in zip(own, own[1:]))
