import itertools

from il_lab.dissemination import (ALL, BOT, DaReader, Disperser, GossipConfig, GossipEngine,
                                  RbcEngine, StorageNode, rbc_broadcast)
from il_lab.model import RetrievabilityCertificate, Transaction
from il_lab.oracles import da_schedule, rbc_exhaustive, rbc_honest_rounds

TX = Transaction("c0", 0, 100)


def _disperse(n_s=4, f_s=1, behaviours=None):
    behaviours = behaviours or {}
    nodes = {f"s{i}": StorageNode(f"s{i}", behaviours.get(i, "honest")) for i in range(n_s)}
    d = Disperser(n_s, f_s)
    cert = None
    for sid, _, tx in d.start(TX, list(nodes)):
        for _, _, (h, node, tag) in nodes[sid].on_disperse("c0", tx):
            cert = d.on_ack(h, node, tag) or cert
    return nodes, cert


def _retrieve(nodes, cert, n_s=4, f_s=1):
    reader = DaReader(n_s, f_s, list(nodes))
    for sid, _, h in reader.start(cert, 0):
        for _, _, (ch, got) in nodes[sid].on_query("r", h):
            reader.on_response(sid, ch, got, 2)
    return reader.lookup(cert)


def test_three_acks_certify():
    nodes, cert = _disperse()
    assert cert is not None and cert.is_valid(4, 1)
    assert len(cert.acks) == 3


def test_two_acks_are_not_enough():
    _, cert = _disperse()
    partial = RetrievabilityCertificate(cert.content_hash, frozenset(list(cert.acks)[:2]))
    assert not partial.is_valid(4, 1)


def test_retrieve_with_a_lying_node():
    nodes, cert = _disperse(behaviours={0: "lie"})
    assert _retrieve(nodes, cert) == TX


def test_forged_cert_is_bottom():
    nodes, _ = _disperse()
    forged = RetrievabilityCertificate(TX.tx_id, frozenset({("s0", "x"), ("s1", "y"), ("s2", "z")}))
    assert _retrieve(nodes, forged) is BOT


def test_da_schedules_agree():
    for seed in range(40):
        out = da_schedule(seed)
        assert len({repr(r) for r in out["results"]["honest"]}) == 1
        assert out["results"]["honest"][0] == out["tx"]


def test_rbc_honest_latency_is_three_hops():
    assert rbc_honest_rounds(4, 1, 1) == 3


def test_rbc_engine_delivers_once():
    engines = [RbcEngine(i, 4, 1) for i in range(4)]
    tag, out = rbc_broadcast(TX, "c0")
    queue = [("c0", r, kind, payload) for r in range(4) for _, kind, payload in out]
    delivered = {}
    while queue:
        sender, to, kind, (t, v) = queue.pop(0)
        msgs, got = engines[to].handle(kind, sender, t, v)
        if got is not None:
            assert to not in delivered
            delivered[to] = got
        for dest, k, p in msgs:
            assert dest == ALL
            queue += [(to, r, k, p) for r in range(4)]
    assert delivered == {r: TX for r in range(4)}
    assert all(e.instance(tag).sent_ready for e in engines)


def test_rbc_exhaustive_is_clean():
    result = rbc_exhaustive(4, 1)
    assert result["cases"] > 0 and not result["violations"]


def test_gossip_flooding_reaches_all_in_one_hop():
    n = 5
    engines = [GossipEngine(i, [p for p in range(n) if p != i], GossipConfig(fanout=n - 1), 0)
               for i in range(n)]
    out, new = engines[0].on_tx(TX)
    assert new and sorted(p for p, _, _ in out) == [1, 2, 3, 4]


def _spread(seed, n=7, fanout=2):
    engines = [GossipEngine(i, [p for p in range(n) if p != i], GossipConfig(fanout=fanout), seed)
               for i in range(n)]
    reached = {0: 0}
    frontier = [(p, 1) for p, _, _ in engines[0].on_tx(TX)[0]]
    for rnd in itertools.count(1):
        nxt = []
        for p, r in frontier:
            out, new = engines[p].on_tx(TX)
            if new:
                reached.setdefault(p, r)
                nxt += [(q, r + 1) for q, _, _ in out]
        for e in engines:
            for partner, _, have in e.tick(rnd):
                for _, _, txs in engines[partner].on_digest(e.node_id, have):
                    for t in txs:
                        if engines[e.node_id].on_tx(t)[1]:
                            reached.setdefault(e.node_id, rnd)
        frontier = nxt
        if len(reached) == n or rnd > 50:
            return reached


def test_gossip_reproducible_and_complete():
    assert _spread(11) == _spread(11)
    assert len(_spread(11)) == 7


def test_gossip_single_entry_point_reaches_everyone_by_anti_entropy():
    reached = _spread(3, n=7, fanout=1)
    assert len(reached) == 7


def test_gossip_config_bounds():
    import pytest
    with pytest.raises(ValueError):
        GossipConfig(fanout=0).check(4)
    with pytest.raises(ValueError):
        GossipConfig(fanout=4).check(4)
