import json

import pytest
from hypothesis import given, settings, strategies as st

from il_lab.config import (AdversaryConfig, ScenarioConfig, WorkloadConfig, from_dict, loads,
                           scenario, to_dict)
from il_lab.model import (IlEntry, InclusionList, Proposal, Transaction, Vote, digest, sign,
                          verify)
from il_lab.simnet import ConfigError, NetConfig


def tx(i, size=100, conflict=None):
    return Transaction(client=f"c{i}", nonce=i, size_bytes=size, conflict_class=conflict)


def test_tx_id_depends_on_payload_only():
    a = Transaction("c", 1, 10, submit_round=0)
    b = Transaction("c", 1, 10, submit_round=9)
    assert a.tx_id == b.tx_id
    assert a.tx_id != Transaction("c", 2, 10).tx_id


def test_signatures_are_bound_to_signer():
    d = digest("m", 1)
    assert verify(3, d, sign(3, d))
    assert not verify(2, d, sign(3, d))


def test_il_signature_and_form_checks():
    il = InclusionList.signed(1, 0, [IlEntry.full(tx(1)), IlEntry.full(tx(2))])
    assert il.signature_ok() and il.well_formed()
    forged = InclusionList(1, 0, il.entries, sign(2, il.body_digest()))
    assert not forged.signature_ok()
    mixed = InclusionList.signed(1, 0, [IlEntry.full(tx(1)), IlEntry.hashed(tx(2).tx_id)])
    assert not mixed.well_formed()
    dup = InclusionList.signed(1, 0, [IlEntry.full(tx(1))] * 2)
    assert not dup.well_formed()


def test_empty_il_is_still_signed():
    il = InclusionList.signed(0, 0, [])
    assert il.signature_ok() and il.tx_ids == []


def test_vote_signature():
    v = Vote.signed(2, 1, "abc", 3)
    assert v.signature_ok()
    assert not Vote(2, 1, "abd", 3, v.sig).signature_ok()


@pytest.mark.parametrize("data, key", [
    ({"net": {"n": 4, "f": 2}}, "n ≥ 3f+1 violated"),
    ({"net": {"n": 4, "f": 1}, "variant": "nope"}, "variant"),
    ({"net": {"n": 4, "f": 1}, "bogus": 1}, "bogus"),
    ({"net": {"n": 4, "f": 1, "dleta": 1}}, "net.dleta"),
    ({"net": {"n": 4, "f": 1}, "adversary": {"malicious": [0, 1]}}, "adversary.malicious"),
    ({"net": {"n": 4, "f": 1}, "adversary": {"bribed": [7]}}, "adversary.bribed"),
    ({"net": {"n": 4, "f": 1}, "gossip": {"fanout": 5}}, "gossip"),
    ({"variant": "plain"}, "net"),
])
def test_config_errors_name_the_key(data, key):
    with pytest.raises(ConfigError, match=key.replace("+", "\\+")):
        from_dict(data)


def test_economic_model_allows_many_bribes():
    cfg = scenario(4, 1, "il-base", adversary=AdversaryConfig(bribed=(0, 1, 2), economic=True))
    assert cfg.adversary.bribed == (0, 1, 2)


def test_invalid_json():
    with pytest.raises(ConfigError):
        loads("{not json")


configs = st.builds(
    lambda n_f, variant, seed, rule, epochs, count, interval, strategy: scenario(
        n_f[0], n_f[1], variant, seed=seed, selection_rule=rule, epochs=epochs,
        workload=WorkloadConfig(tx_count=count, interval=interval),
        adversary=AdversaryConfig(network_strategy=strategy)),
    st.sampled_from([(4, 1), (7, 2), (10, 3), (5, 1)]),
    st.sampled_from(["plain", "il-base", "il-da", "il-rbc", "il-gossip", "il-local"]),
    st.integers(0, 2**31), st.sampled_from(["frequency", "prefix"]), st.integers(1, 20),
    st.integers(0, 30), st.integers(1, 5),
    st.sampled_from(["fair", "max-delay", "random-delay"]),
)


@settings(max_examples=60, deadline=None)
@given(configs)
def test_config_round_trip(cfg):
    text = cfg.dumps()
    again = loads(text)
    assert again == cfg
    assert again.dumps() == text
    assert to_dict(from_dict(json.loads(text))) == cfg.to_dict()


def test_explicit_tx_schedule_round_trips():
    cfg = from_dict({"net": {"n": 4, "f": 1}, "workload": {
        "txs": [{"round": 0, "recipients": [0, 1]}, {"round": 3, "conflict": "k"}]}})
    assert loads(cfg.dumps()) == cfg
    assert cfg.workload.txs[0].recipients == (0, 1)
