import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aoma.analytic import (
    RandomizedPolicy,
    SwitchingPolicy,
    fa_coefficients,
    ma_coefficients,
    mc1_stationary,
    occupancy_rate,
    randomized_metrics,
    randomized_stationary,
    switching_metrics,
    switching_stationary,
    truncated_metrics,
    truncated_stationary,
    truncation_gap,
)
from aoma.model import FalseAlarm, MissedAlarm, ModelParams, Synced
from aoma.oracle import oracle_solve

# Reference values below were produced by the dense linear solve in
# aoma.oracle on the truncated chain (N=300 or 400), which never touches
# the closed forms.

SW23_ORACLE = {
    Synced(0): 0.407457271295895,
    Synced(1): 0.25717089199735294,
    MissedAlarm(1): 0.081491454259179,
    MissedAlarm(2): 0.057044017981425284,
    MissedAlarm(3): 0.003993081258699769,
    FalseAlarm(1): 0.0771512675992059,
    FalseAlarm(3): 0.04937681126349178,
    FalseAlarm(4): 0.003950144901079341,
}
SW23_OBJECTIVE = 1.1603459921124102

RND_ORACLE = {
    Synced(0): 0.5298341968911915,
    Synced(1): 0.30847668393782396,
    MissedAlarm(1): 0.06781877720207251,
    MissedAlarm(5): 0.0003051750408268521,
    FalseAlarm(1): 0.034240911917098424,
    FalseAlarm(5): 0.0023530175499064713,
}


def test_switching_masses_match_frozen_oracle(fig5a):
    dist = switching_stationary(fig5a, SwitchingPolicy(2, 3))
    for s, ref in SW23_ORACLE.items():
        assert dist.mass(s) == pytest.approx(ref, abs=1e-9)
    assert switching_metrics(fig5a, SwitchingPolicy(2, 3)).objective == pytest.approx(SW23_OBJECTIVE, abs=1e-9)


def test_switching_metrics_fig5a_policy(fig5a):
    m = switching_metrics(fig5a, SwitchingPolicy(3, 13))
    assert m.avg_cost == pytest.approx(0.492496776787164, abs=1e-9)
    assert m.frequency == pytest.approx(0.017331355016660874, abs=1e-9)
    assert m.objective == pytest.approx(0.6311476169204511, abs=1e-9)


def test_zero_threshold_regimes_match_frozen_oracle(fig5a):
    m = switching_metrics(fig5a, SwitchingPolicy(0, 0))
    assert m.frequency == pytest.approx(1.0, abs=1e-12)
    assert m.objective == pytest.approx(8.013611869786667, abs=1e-9)
    assert m.objective == pytest.approx(m.avg_cost + fig5a.lam)

    # missed-alarm mass at age 1 carries the synced-state factor
    dist = switching_stationary(fig5a, SwitchingPolicy(0, 4))
    assert dist.mass(Synced(0)) == pytest.approx(0.24515686139905263, abs=1e-9)
    assert dist.mass(MissedAlarm(1)) == pytest.approx(0.0049031372279810526, abs=1e-9)
    assert dist.mass(MissedAlarm(1)) == pytest.approx(fig5a.p * fig5a.p_f * dist.mass(Synced(0)))
    assert switching_metrics(fig5a, SwitchingPolicy(0, 4)).objective == pytest.approx(2.6961049061785465, abs=1e-9)


def test_randomized_matches_frozen_oracle(fig5a):
    pol = RandomizedPolicy(0.4, 0.7)
    dist = randomized_stationary(fig5a, pol)
    for s, ref in RND_ORACLE.items():
        assert dist.mass(s) == pytest.approx(ref, abs=1e-9)
    m = randomized_metrics(fig5a, pol)
    # the false-alarm term includes the factor q; without it this is off by ~0.06
    assert m.avg_cost == pytest.approx(0.1275670743219236, abs=1e-9)
    assert m.frequency == pytest.approx(0.52, abs=1e-12)
    assert m.objective == pytest.approx(4.287567074321924, abs=1e-9)


def test_mc1_masses_sum_to_one(fig5a):
    nus = mc1_stationary(fig5a, RandomizedPolicy(0.4, 0.7))
    assert sum(nus.values()) == pytest.approx(1.0, abs=1e-12)
    dist = randomized_stationary(fig5a, RandomizedPolicy(0.4, 0.7))
    assert dist.ma.total() == pytest.approx(nus[(1, 0)], abs=1e-12)
    assert dist.fa.total() == pytest.approx(nus[(0, 1)], abs=1e-12)


def test_randomized_rejects_zero_rates():
    with pytest.raises(ValueError):
        RandomizedPolicy(0.0, 0.5)
    with pytest.raises(ValueError):
        RandomizedPolicy(0.5, 1.2)


def test_randomized_perfect_always_transmit():
    pr = ModelParams(0.2, 0.3, 1.0, lam=3.0)
    m = randomized_metrics(pr, RandomizedPolicy(1.0, 1.0))
    assert (m.avg_cost, m.frequency, m.objective) == pytest.approx((0.0, 1.0, 3.0))
    dist = randomized_stationary(pr, RandomizedPolicy(1.0, 1.0))
    assert dist.ma.total() == 0.0 and dist.fa.total() == 0.0


@pytest.mark.parametrize("f", [0.1, 0.5, 0.9])
def test_randomized_symmetry(f):
    pr = ModelParams(0.25, 0.25, 0.8, beta=0.5)
    dist = randomized_stationary(pr, RandomizedPolicy(f, f))
    assert dist.synced0 == pytest.approx(dist.synced1)
    for k in range(1, 40):
        assert dist.mass(MissedAlarm(k)) == pytest.approx(dist.mass(FalseAlarm(k)), abs=1e-15)
    assert dist.ma.first_moment() == pytest.approx(dist.fa.first_moment())


@pytest.mark.parametrize("d", [0, 1, 3, 7])
def test_switching_symmetry(d):
    pr = ModelParams(0.3, 0.3, 0.85)
    dist = switching_stationary(pr, SwitchingPolicy(d, d))
    assert dist.synced0 == pytest.approx(dist.synced1)
    for k in range(1, 30):
        assert dist.mass(MissedAlarm(k)) == pytest.approx(dist.mass(FalseAlarm(k)), abs=1e-15)
    assert occupancy_rate(dist, "MA") == pytest.approx(occupancy_rate(dist, "FA"))


def test_always_transmit_on_perfect_channel():
    pr = ModelParams(0.2, 0.3, 1.0, lam=2.0)
    dist = switching_stationary(pr, SwitchingPolicy(0, 0))
    assert dist.synced0 == pytest.approx(pr.nu0)
    assert dist.synced1 == pytest.approx(pr.nu1)
    assert occupancy_rate(dist, "MA") == 0.0 and occupancy_rate(dist, "FA") == 0.0
    m = switching_metrics(pr, SwitchingPolicy(0, 0))
    assert (m.avg_cost, m.frequency, m.objective) == pytest.approx((0.0, 1.0, 2.0))


def test_occupancy_rejects_unknown_class(fig5a):
    with pytest.raises(ValueError):
        occupancy_rate(switching_stationary(fig5a, SwitchingPolicy(1, 1)), "XX")


def test_threshold_one_is_consistent(fig5a):
    a1, ad = ma_coefficients(fig5a, 1)
    assert a1 == pytest.approx(ad)
    dist = switching_stationary(fig5a, SwitchingPolicy(1, 5))
    r = fig5a.q_bar * fig5a.p_f
    for k in range(1, 10):
        assert dist.mass(MissedAlarm(k + 1)) == pytest.approx(r * dist.mass(MissedAlarm(k)))


@pytest.mark.parametrize("policy", [(0, 0), (0, 3), (2, 0), (2, 5)])
def test_perfect_channel_clears_mass_past_threshold(policy):
    pr = ModelParams(0.2, 0.3, 1.0)
    dist = switching_stationary(pr, SwitchingPolicy(*policy))
    d_ma, d_fa = policy
    assert all(dist.mass(MissedAlarm(k)) == 0.0 for k in range(max(d_ma, 1) + 1, 40))
    assert all(dist.mass(FalseAlarm(k)) == 0.0 for k in range(max(d_fa, 1) + 1, 40))
    assert dist.total() == pytest.approx(1.0, abs=1e-12)


probs = st.floats(0.05, 0.5)
channel = st.floats(0.5, 1.0)
thresholds = st.integers(0, 20)


@settings(max_examples=60, deadline=None)
@given(p=probs, q=probs, ps=channel, d=thresholds)
def test_quotient_identity(p, q, ps, d):
    pr = ModelParams(p, q, ps)
    if d == 0:
        d = 1
    a1, ad = ma_coefficients(pr, d)
    b1, bd = fa_coefficients(pr, d)
    assert p - q * a1 == pytest.approx(pr.q_bar * ps * ad, abs=1e-12)
    assert q - p * b1 == pytest.approx(pr.p_bar * ps * bd, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(p=probs, q=probs, ps=channel, x=thresholds, y=thresholds, beta=st.floats(0, 1), lam=st.floats(0, 10))
def test_normalization_and_metric_consistency(p, q, ps, x, y, beta, lam):
    pr = ModelParams(p, q, ps, beta, lam)
    dist = switching_stationary(pr, SwitchingPolicy(x, y))
    assert dist.total() == pytest.approx(1.0, abs=1e-10)
    assert np.all(dist.vector() >= 0.0)
    m = switching_metrics(pr, SwitchingPolicy(x, y))
    assert 0.0 <= m.frequency <= 1.0 + 1e-12
    assert m.objective == m.avg_cost + lam * m.frequency
    assert dist.expected_cost(pr) == pytest.approx(m.avg_cost, rel=1e-9, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(p=probs, q=probs, ps=channel, f0=st.floats(0.01, 1.0), f1=st.floats(0.01, 1.0))
def test_randomized_normalization(p, q, ps, f0, f1):
    pr = ModelParams(p, q, ps, 0.3)
    dist = randomized_stationary(pr, RandomizedPolicy(f0, f1))
    assert dist.total() == pytest.approx(1.0, abs=1e-10)
    assert dist.expected_cost(pr) == pytest.approx(randomized_metrics(pr, RandomizedPolicy(f0, f1)).avg_cost, rel=1e-9, abs=1e-12)


def _oracle_draws(count, seed):
    rng = np.random.default_rng(seed)
    for _ in range(count):
        p, q = rng.uniform(0.05, 0.5, 2)
        ps = rng.uniform(0.5, 1.0)
        yield ModelParams(p, q, ps, rng.uniform(0, 1), rng.uniform(0, 10)), SwitchingPolicy(*rng.integers(0, 21, 2))


@pytest.mark.parametrize("params,policy", list(_oracle_draws(15, 11)))
def test_switching_against_linear_solve(params, policy):
    n = 260
    oracle = oracle_solve(params, policy, n)
    dist = switching_stationary(params, policy)
    # compare on ages where the truncated chain is exact
    for s in oracle.mdp.states[:-1]:
        if s.age < n:
            assert dist.mass(s) == pytest.approx(oracle.mass(s), abs=1e-8)
    assert switching_metrics(params, policy).objective == pytest.approx(oracle.metrics().objective, abs=1e-8)


@settings(max_examples=20, deadline=None)
@given(p=st.floats(0.05, 0.45), d=st.integers(1, 15), beta=st.floats(0.1, 0.9))
def test_off_diagonal_never_beats_both_diagonals(p, d, beta):
    pr = ModelParams(p, p, 0.9, 0.5, 8.0 * beta)
    for x in range(1, 16):
        if x == d:
            continue
        L_xy = switching_metrics(pr, SwitchingPolicy(x, d)).objective
        diag = min(switching_metrics(pr, SwitchingPolicy(x, x)).objective, switching_metrics(pr, SwitchingPolicy(d, d)).objective)
        assert L_xy >= diag - 1e-12


class TestTruncation:
    def test_interior_and_boundary(self, fig5a):
        pol, n = SwitchingPolicy(2, 3), 50
        full = switching_stationary(fig5a, pol)
        trunc = truncated_stationary(fig5a, pol, n)
        for k in range(1, n):
            assert trunc.mass(MissedAlarm(k)) == pytest.approx(full.mass(MissedAlarm(k)), rel=1e-13)
            assert trunc.mass(FalseAlarm(k)) == pytest.approx(full.mass(FalseAlarm(k)), rel=1e-13)
        r = fig5a.q_bar * fig5a.p_f
        assert trunc.mass(MissedAlarm(n)) == pytest.approx(r / (1 - r) * trunc.mass(MissedAlarm(n - 1)))
        assert trunc.total() == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("policy", [(2, 3), (0, 3), (4, 0), (0, 0)])
    def test_matches_linear_solve(self, fig5a, policy):
        pol, n = SwitchingPolicy(*policy), 12
        oracle = oracle_solve(fig5a, pol, n)
        trunc = truncated_stationary(fig5a, pol, n)
        assert max(abs(trunc.mass(s) - oracle.mass(s)) for s in oracle.mdp.states) < 1e-10
        assert truncated_metrics(fig5a, pol, n).objective == pytest.approx(oracle.metrics().objective, abs=1e-10)

    def test_perfect_channel_has_empty_boundary(self):
        pr = ModelParams(0.2, 0.3, 1.0)
        trunc = truncated_stationary(pr, SwitchingPolicy(3, 4), 10)
        assert trunc.mass(MissedAlarm(10)) == 0.0 and trunc.mass(FalseAlarm(10)) == 0.0
        assert truncation_gap(pr, SwitchingPolicy(3, 4), 10) == 0.0

    @pytest.mark.parametrize("policy", [(3, 13), (0, 0), (1, 0), (0, 6)])
    def test_gap_identity(self, fig5a, policy):
        pol = SwitchingPolicy(*policy)
        for n in (15, 20, 30, 60):
            lhs = switching_metrics(fig5a, pol).objective - truncated_metrics(fig5a, pol, n).objective
            assert lhs == pytest.approx(truncation_gap(fig5a, pol, n), abs=1e-12)

    def test_gap_decays_geometrically(self, fig5a):
        pol = SwitchingPolicy(3, 13)
        ratios = [truncation_gap(fig5a, pol, 2 * n) / truncation_gap(fig5a, pol, n) for n in (15, 20, 30, 40)]
        assert all(r < 1e-6 for r in ratios)
        assert ratios == sorted(ratios, reverse=True)

    def test_rejects_small_n(self, fig5a):
        with pytest.raises(ValueError):
            truncated_stationary(fig5a, SwitchingPolicy(3, 13), 13)
        with pytest.raises(ValueError):
            truncation_gap(fig5a, SwitchingPolicy(0, 0), 1)
