import pytest

from il_lab.adversary import (apply_censoring, bribery_sweep, censor_leader_strategy,
                              max_censorship_probe)
from il_lab.model import IlEntry, InclusionList, Transaction

T_STAR = Transaction("c0", 0, 100)
T2 = Transaction("c1", 1, 100)


def test_bribed_list_omits_target():
    il = InclusionList.signed(2, 1, [IlEntry.full(T_STAR), IlEntry.full(T2)])
    out = apply_censoring(il, {T_STAR.tx_id})
    assert out.tx_ids == [T2.tx_id] and out.signature_ok()
    assert apply_censoring(il, set()).tx_ids == il.tx_ids


def _ils(with_target):
    return [InclusionList.signed(a, 0, [IlEntry.full(T_STAR)] if a in with_target else [])
            for a in range(4)]


def test_censoring_leader_finds_subset():
    assert censor_leader_strategy(_ils({1, 2}), {T_STAR.tx_id}, 3) == "silent"
    assert censor_leader_strategy(_ils({1}), {T_STAR.tx_id}, 3) == (0, 2, 3)
    assert censor_leader_strategy(_ils({1, 2, 3}), {T_STAR.tx_id}, 3, "honest") == "honest"


@pytest.mark.parametrize("variant, expected", [("il-base", 2), ("il-local", 1), ("il-rbc", 2)])
def test_bribery_thresholds_at_n4(variant, expected):
    sweep = bribery_sweep(variant, 4, 1)
    assert sweep.threshold == expected
    assert sweep.outcomes[0].target_included          # the leader alone cannot censor
    assert sweep.outcomes[expected - 1].target_included


def test_bribery_needs_an_il_variant():
    with pytest.raises(ValueError):
        bribery_sweep("plain", 4, 1)


def test_plain_probe_one_period():
    probe = max_censorship_probe("plain", 4, 1)
    assert probe.censoring_blocks == 1 and probe.rounds == round(probe.period_rounds)


@pytest.mark.parametrize("variant", ["il-base", "il-da", "il-local"])
def test_il_probe_zero(variant):
    probe = max_censorship_probe(variant, 7, 2)
    assert probe.censoring_blocks == 0 and probe.rounds == 0
    assert len(probe.malicious) == 2


def test_no_adversary_without_faults():
    for variant in ("plain", "il-gossip"):
        probe = max_censorship_probe(variant, 3, 0)
        assert probe.malicious == () and probe.rounds == 0
