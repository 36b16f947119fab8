import pytest

from il_lab.config import AdversaryConfig, WorkloadConfig, scenario
from il_lab.consensus import Simulation, default_recipients, leader_of, run_scenario
from il_lab.metrics import committed_chain, compute_metrics
from il_lab.model import Vote
from il_lab.oracles import consensus_exhaustive
from il_lab.simnet import SimTimeout
from il_lab.variants import VARIANTS

WL = WorkloadConfig(tx_count=6, interval=1)


@pytest.mark.parametrize("epoch, n, leader", [(0, 4, 0), (5, 4, 1), (13, 7, 6)])
def test_leader_rotation(epoch, n, leader):
    assert leader_of(epoch, n) == leader


def test_default_recipients():
    assert default_recipients("il-base", 3, 4, 1) == (0, 1, 3)
    assert default_recipients("il-local", 0, 4, 1) == (0, 1, 2, 3)


def test_plain_honest_latency_is_three_rounds():
    report = compute_metrics(run_scenario(scenario(4, 1, "plain", workload=WL, epochs=6)))
    assert report.proposal_latency_rounds == 3


@pytest.mark.parametrize("variant", VARIANTS)
def test_honest_runs_commit_every_epoch(variant):
    sim = run_scenario(scenario(4, 1, variant, workload=WL, epochs=6))
    assert sorted(committed_chain(sim)) == list(range(6))
    assert not [e for e in sim.log.entries if e[3] == "timeout"]
    committed = {t for ref in committed_chain(sim).values() for t in sim.log.blocks[ref].tx_ids}
    assert committed == set(sim.log.tx_ids.values())


def test_epoch_start_messages():
    sim = Simulation(scenario(4, 1, "il-base", workload=WorkloadConfig(tx_count=0)))
    sim.start()
    il_sends = [e for e in sim.net.trace if e.kind == "il"]
    assert sorted(e.sender for e in il_sends) == [1, 2, 3]
    sim.tick()
    assert set(sim.replicas[0].ils_for(0)) == {0, 1, 2, 3}
    assert all(not r.my_ils[0].entries and r.my_ils[0].signature_ok() for r in sim.replicas)
    plain = Simulation(scenario(4, 1, "plain", workload=WorkloadConfig(tx_count=0)))
    plain.start()
    assert not [e for e in plain.net.trace if e.kind == "il"]


def test_honest_epochs_never_time_out_over_seeds():
    for seed in range(100):
        variant = VARIANTS[seed % len(VARIANTS)]
        cfg = scenario(7, 2, variant, seed=seed, delta=1, delta_cap=2, workload=WL, epochs=4,
                       adversary=AdversaryConfig(network_strategy="random-delay"))
        sim = run_scenario(cfg)
        assert not [e for e in sim.log.entries if e[3] == "timeout"], (variant, seed)


def test_silent_leader_skips_one_epoch():
    adv = AdversaryConfig(malicious=(0,), leader_strategy="silent")
    sim = run_scenario(scenario(4, 1, "plain", workload=WL, adversary=adv, epochs=4))
    assert min(committed_chain(sim)) == 1


def test_f_silent_leaders_delay_first_commit_to_epoch_f():
    adv = AdversaryConfig(malicious=(0, 1), leader_strategy="silent")
    sim = run_scenario(scenario(7, 2, "il-base", workload=WL, adversary=adv, epochs=4))
    assert min(committed_chain(sim)) == 2


def test_wrong_leader_is_rejected():
    sim = Simulation(scenario(4, 1, "plain", workload=WorkloadConfig(tx_count=0)))
    sim.start()
    from il_lab.model import Block, Proposal
    sim.replicas[2].on_proposal(1, Proposal.signed(Block(0, 1, ())))
    assert sim.log.rejections == [(2, 0, Block(0, 1, ()).ref, "wrong-leader")]


def test_vote_quorum_boundary():
    sim = Simulation(scenario(4, 1, "plain", workload=WorkloadConfig(tx_count=0)))
    sim.start()
    from il_lab.model import Block
    block = Block(0, 0, ())
    sim.register_block(block)
    r = sim.replicas[3]
    for voter in (0, 1):
        r.on_vote2(voter, (Vote.signed(0, 2, block.ref, voter), None))
    assert 0 not in r.chain
    r.on_vote2(1, (Vote.signed(0, 2, block.ref, 1), None))     # repeat is not counted
    assert 0 not in r.chain
    r.on_vote2(2, (Vote.signed(0, 2, block.ref, 2), None))
    assert r.chain[0] == block.ref and r.epoch == 1


def test_commit_certificate_is_adopted():
    sim = Simulation(scenario(4, 1, "plain", workload=WorkloadConfig(tx_count=0)))
    sim.start()
    from il_lab.model import Block
    block = Block(0, 0, ())
    sim.register_block(block)
    r = sim.replicas[3]
    votes = tuple(Vote.signed(0, 2, block.ref, v) for v in (0, 1, 2))
    r.on_commit_cert(0, votes[:2])
    assert 0 not in r.chain
    r.on_commit_cert(0, votes)
    assert r.chain[0] == block.ref


@pytest.mark.parametrize("variant", VARIANTS)
def test_equivocating_leaders_never_split_honest_replicas(variant):
    for seed in range(25):
        adv = AdversaryConfig(malicious=(seed % 4,), leader_strategy="equivocate",
                              network_strategy="random-delay")
        cfg = scenario(4, 1, variant, seed=seed, delta_cap=2, gst=seed % 7, workload=WL,
                       adversary=adv, epochs=6)
        assert run_scenario(cfg).log.agreement_violations() == []


def test_single_epoch_enumeration_sample():
    result = consensus_exhaustive("plain", max_cases=500)
    assert result["cases"] == 500 and not result["violations"]


def test_round_cap_raises():
    with pytest.raises(SimTimeout):
        run_scenario(scenario(4, 1, "plain", workload=WL, epochs=6, max_rounds=5))


def test_runs_are_deterministic():
    cfg = scenario(7, 2, "il-gossip", seed=5, delta_cap=2, workload=WL, epochs=5,
                   adversary=AdversaryConfig(malicious=(1,), leader_strategy="equivocate",
                                             network_strategy="random-delay"))
    a, b = run_scenario(cfg, keep_trace=True), run_scenario(cfg, keep_trace=True)
    assert list(a.net.trace_lines()) == list(b.net.trace_lines())
    assert a.log.commits == b.log.commits
