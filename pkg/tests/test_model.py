import math

import pytest

from aoma.model import (
    FalseAlarm,
    MissedAlarm,
    ModelParams,
    Synced,
    closed_form_expected_cost,
    expected_stage_cost,
    stage_cost,
    transition_kernel,
)


def as_dict(entries):
    return {e.next_state: e.probability for e in entries}


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(p=0.0, q=0.3, p_s=0.9),
        dict(p=0.2, q=1.0, p_s=0.9),
        dict(p=0.2, q=0.3, p_s=0.0),
        dict(p=0.2, q=0.3, p_s=1.1),
        dict(p=0.2, q=0.3, p_s=0.9, beta=-0.1),
        dict(p=0.2, q=0.3, p_s=0.9, lam=-1.0),
        dict(p=0.2, q=0.3, p_s=0.9, lam=math.inf),
        dict(p=float("nan"), q=0.3, p_s=0.9),
    ],
)
def test_params_rejected(kwargs):
    with pytest.raises(ValueError):
        ModelParams(**kwargs)


def test_derived_quantities():
    pr = ModelParams(0.2, 0.3, 0.9)
    assert pr.p_f == pytest.approx(0.1)
    assert pr.nu0 == pytest.approx(0.6)
    assert pr.nu0 + pr.nu1 == pytest.approx(1.0)
    assert pr.positively_correlated
    assert not ModelParams(0.8, 0.5, 0.9).positively_correlated
    assert ModelParams(0.25, 0.25, 1.0).symmetric


def test_swapped_is_an_involution():
    pr = ModelParams(0.2, 0.3, 0.9, 0.8, 8.0)
    assert pr.swapped().swapped() == pr
    sw = pr.swapped()
    assert (sw.p, sw.q, sw.p_s, sw.lam) == (0.3, 0.2, 0.9, 8.0)
    assert sw.beta == pytest.approx(0.2)


def test_states_validate_and_encode_pairs():
    with pytest.raises(ValueError):
        MissedAlarm(0)
    with pytest.raises(ValueError):
        Synced(2)
    assert (MissedAlarm(4).source, MissedAlarm(4).estimate) == (1, 0)
    assert (FalseAlarm(4).source, FalseAlarm(4).estimate) == (0, 1)
    assert Synced(0) != Synced(1)


def test_kernel_missed_alarm_transmit():
    row = as_dict(transition_kernel(ModelParams(0.2, 0.3, 0.9), MissedAlarm(2), 1))
    assert row == pytest.approx({Synced(0): 0.3, Synced(1): 0.63, MissedAlarm(3): 0.07})


def test_kernel_synced_idle():
    pr = ModelParams(0.37, 0.11, 0.6)
    assert as_dict(transition_kernel(pr, Synced(0), 0)) == pytest.approx({Synced(0): 0.63, MissedAlarm(1): 0.37})


def test_kernel_perfect_channel_keeps_zero_entry():
    row = as_dict(transition_kernel(ModelParams(0.2, 0.3, 1.0), FalseAlarm(5), 1))
    assert row == pytest.approx({Synced(1): 0.2, Synced(0): 0.8, FalseAlarm(6): 0.0})


def test_kernel_rows_and_age_moves():
    pr = ModelParams(0.35, 0.15, 0.7)
    states = [Synced(0), Synced(1)] + [MissedAlarm(d) for d in range(1, 30)] + [FalseAlarm(d) for d in range(1, 30)]
    for s in states:
        for a in (0, 1):
            entries = transition_kernel(pr, s, a)
            assert len(entries) in (2, 3)
            assert sum(e.probability for e in entries) == pytest.approx(1.0, abs=1e-12)
            for e in entries:
                assert e.probability >= 0.0
                assert e.next_state.age in (0, s.age + 1)


def test_stage_costs():
    pr = ModelParams(0.2, 0.3, 0.9, beta=0.8)
    assert stage_cost(pr, MissedAlarm(3)) == pytest.approx(2.4)
    assert stage_cost(pr, FalseAlarm(5)) == pytest.approx(1.0)
    assert stage_cost(pr, Synced(0)) == 0.0


def test_expected_cost_examples(fig5a):
    assert expected_stage_cost(fig5a, MissedAlarm(2), 1) == pytest.approx(8.168)
    assert expected_stage_cost(fig5a, Synced(1), 0) == pytest.approx(0.06)
    assert expected_stage_cost(fig5a.replace(lam=0.0), Synced(0), 0) == pytest.approx(0.8 * 0.2)


@pytest.mark.parametrize("pr", [ModelParams(0.2, 0.3, 0.9, 0.8, 8.0), ModelParams(0.6, 0.05, 0.55, 0.1, 0.3)])
def test_expected_cost_matches_per_class_forms(pr):
    states = [Synced(0), Synced(1)] + [MissedAlarm(d) for d in range(1, 1001)] + [FalseAlarm(d) for d in range(1, 1001)]
    for s in states:
        for a in (0, 1):
            assert expected_stage_cost(pr, s, a) == pytest.approx(closed_form_expected_cost(pr, s, a), rel=1e-12, abs=1e-12)
