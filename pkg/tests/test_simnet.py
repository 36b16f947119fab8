import hashlib
import json

import pytest

from il_lab.simnet import ConfigError, NetConfig, SimNet, SimTimeout, make_policy


def test_fair_delivery_after_gst():
    net = SimNet(NetConfig(n=4, f=1))
    net.round = 5
    assert net.send(0, 1, "vote1", 64).deliver_round == 6


def test_max_delay_hits_the_cap():
    net = SimNet(NetConfig(n=4, f=1, delta_cap=3), make_policy("max-delay"))
    net.round = 5
    assert net.send(0, 1, "vote1", 64).deliver_round == 8


def test_pre_gst_delays_stay_within_cap_for_many_seeds():
    for seed in range(1000):
        cfg = NetConfig(n=4, f=1, gst=10, pre_gst_cap=20, seed=seed)
        net = SimNet(cfg, make_policy("random-delay"))
        net.round = 2
        env = net.send(0, 1, "tx", 1)
        assert 2 < env.deliver_round <= 22


def test_unknown_node_is_a_config_error():
    net = SimNet(NetConfig(n=4, f=1))
    with pytest.raises(ConfigError):
        net.send(0, 9, "tx", 1)


def test_same_round_delivery_is_sorted_by_id():
    net = SimNet(NetConfig(n=4, f=1, delta_cap=2), make_policy("max-delay"))
    early = [net.send(0, 1, "a", 1) for _ in range(4)]
    net.step()
    late = net.send(2, 3, "b", 1)
    assert early[-1].deliver_round == 2 and late.deliver_round == 3
    delivered = net.step()
    assert [e.id for e in delivered] == sorted(e.id for e in early)


def test_empty_step():
    assert SimNet(NetConfig(n=4, f=1)).step() == []


def _trace_hash(seed):
    net = SimNet(NetConfig(n=7, f=2, delta_cap=4, gst=5, seed=seed), make_policy("random-delay"))
    for r in range(20):
        for s in range(7):
            net.send(s, (s + r) % 7, "x", r)
        net.step()
    text = "\n".join(json.dumps(rec, sort_keys=True) for rec in net.trace_lines())
    return hashlib.sha256(text.encode()).hexdigest()


def test_replay_is_identical():
    assert _trace_hash(3) == _trace_hash(3)
    assert _trace_hash(3) != _trace_hash(4)


def test_run_until_cap_raises_with_trace():
    net = SimNet(NetConfig(n=4, f=1))
    net.send(0, 1, "x", 1)
    with pytest.raises(SimTimeout) as info:
        net.run_until(lambda s: False, max_rounds=10)
    assert info.value.round_index == 10 and net.round == 10
    assert info.value.trace_tail


def test_run_until_true_at_start_takes_no_steps():
    net = SimNet(NetConfig(n=4, f=1))
    assert net.run_until(lambda s: True) == 0 and net.round == 0


def test_every_message_delivered_exactly_once():
    net = SimNet(NetConfig(n=4, f=1, delta_cap=3, gst=4, pre_gst_cap=6, seed=1),
                 make_policy("random-delay"))
    sent = [net.send(i % 4, (i + 1) % 4, "x", 1).id for i in range(50)]
    got = []
    net.run_until(lambda s: s.in_flight == 0, max_rounds=50,
                  on_deliver=lambda batch: got.extend(e.id for e in batch))
    assert sorted(got) == sent


@pytest.mark.parametrize("kwargs", [dict(n=4, f=2), dict(n=4, f=1, actual_delay=2),
                                    dict(n=4, f=1, pre_gst_cap=0), dict(n=4, f=1, gst=-1)])
def test_bad_net_config(kwargs):
    with pytest.raises(ConfigError):
        NetConfig(**kwargs)


def test_n_3f_message():
    with pytest.raises(ConfigError, match="n ≥ 3f\\+1 violated"):
        NetConfig(n=4, f=2)


def test_targeted_delay_only_slows_victims():
    net = SimNet(NetConfig(n=4, f=1, delta_cap=3), make_policy("targeted-delay", [2]))
    assert net.send(0, 1, "x", 1).deliver_round == 1
    assert net.send(0, 2, "x", 1).deliver_round == 3
