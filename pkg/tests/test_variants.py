import random

import pytest
from hypothesis import given, settings, strategies as st

from il_lab.config import WorkloadConfig, scenario
from il_lab.consensus import Simulation
from il_lab.model import Block, IlEntry, InclusionList, ListsUsed, Proposal, Transaction
from il_lab.oracles import oracle_select, random_instance
from il_lab.variants import (ACCEPT, PENDING, REJECT, censoring_subsets, resolve_conflicts,
                             select)


def h(name):
    return IlEntry.hashed(name)


def ids(entries):
    return [e.tx_id for e in entries]


UNIT = lambda e: 1  # noqa: E731


def test_frequency_picks_most_listed():
    lists = [(0, [h("a"), h("b")]), (1, [h("b"), h("c")]), (2, [h("b"), h("a")])]
    assert ids(select(lists, "frequency", 2, UNIT)) == ["b", "a"]


def test_prefix_takes_largest_fitting_x():
    lists = [(0, [h("a"), h("b")]), (1, [h("b"), h("c")]), (2, [h("b"), h("a")])]
    assert sorted(ids(select(lists, "prefix", 2, UNIT))) == ["a", "b"]


def test_unbounded_capacity_is_the_union():
    lists = [(0, [h("a"), h("b")]), (1, [h("b"), h("c")]), (2, [h("b"), h("a")])]
    for rule in ("frequency", "prefix"):
        assert sorted(ids(select(lists, rule, None, UNIT))) == ["a", "b", "c"]


def test_frequency_ties_by_tx_id():
    lists = [(0, [h("z"), h("y")]), (1, [h("x")])]
    assert ids(select(lists, "frequency", None, UNIT)) == ["x", "y", "z"]


CLASSES = {"x": "k", "y": "k", "w": "k"}
conflict_of = lambda e: CLASSES.get(e.tx_id)  # noqa: E731


def test_conflict_lowest_author_wins():
    out = resolve_conflicts([(2, [h("x")]), (1, [h("y")])], conflict_of)
    assert dict((a, ids(es)) for a, es in out) == {1: ["y"], 2: []}


def test_conflict_earliest_position_within_a_list():
    out = resolve_conflicts([(1, [h("x"), h("a"), h("b"), h("y")])], conflict_of)
    assert ids(out[0][1]) == ["x", "a", "b"]


def test_no_conflicts_is_identity():
    lists = [(0, [h("a"), h("b")]), (1, [h("c")])]
    assert resolve_conflicts(lists, lambda e: None) == lists


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 10**9))
def test_selection_matches_oracle(seed):
    inst = random_instance(random.Random(seed))
    for rule in ("frequency", "prefix"):
        got = select(inst.lists, rule, inst.capacity, inst.size_of, inst.conflict_of)
        want = oracle_select(inst.lists, rule, inst.capacity, inst.size_of, inst.conflict_of)
        assert ids(got) == ids(want)


# -- strategies against a live replica ---------------------------------------

def started(variant, n=4, f=1, **kw):
    sim = Simulation(scenario(n, f, variant, workload=WorkloadConfig(tx_count=0), **kw),
                     keep_trace=False)
    sim.start()
    return sim


def test_make_il_forms_follow_the_variant():
    t1 = Transaction("c1", 1, 100)
    sim = started("il-base")
    r = sim.replicas[1]
    r.make_eligible(t1, IlEntry.full(t1))
    assert [e.form for e in sim.variant.make_il(r, 1).entries] == ["full-tx"]
    sim = started("il-rbc")
    r = sim.replicas[1]
    r.store[t1.tx_id] = t1          # received raw, never delivered
    assert sim.variant.make_il(r, 1).entries == ()


def _base_block(sim, authors, epoch=0):
    ils = tuple(InclusionList.signed(a, epoch, []) for a in authors)
    return Proposal.signed(Block(epoch, 0, (), ils))


def test_base_threshold():
    sim = started("il-base")
    v, r = sim.variant, sim.replicas[1]
    assert v.validate(r, _base_block(sim, [0, 1])) == (REJECT, "insufficient-ils")
    assert v.validate(r, _base_block(sim, [0, 1, 2])).status == ACCEPT


def test_leader_il_toggle():
    sim = started("il-base", leader_il_counts=False)
    v, r = sim.variant, sim.replicas[1]
    assert v.validate(r, _base_block(sim, [0, 1, 2])) == (REJECT, "insufficient-ils")
    assert v.validate(r, _base_block(sim, [1, 2, 3])).status == ACCEPT


def test_base_rejects_forged_il():
    sim = started("il-base")
    forged = InclusionList(2, 0, (), "bad")
    ils = (InclusionList.signed(0, 0, []), InclusionList.signed(1, 0, []), forged)
    verdict = sim.variant.validate(sim.replicas[1], Proposal.signed(Block(0, 0, (), ils)))
    assert verdict == (REJECT, "malformed-il")


def test_rbc_vote_waits_for_payload():
    t1 = Transaction("c1", 1, 100)
    sim = started("il-rbc")
    leader, voter = sim.replicas[0], sim.replicas[1]
    ils = []
    for a in range(3):
        ils.append(InclusionList.signed(a, 0, [IlEntry.hashed(t1.tx_id)]))
    leader.store[t1.tx_id] = t1
    block = sim.variant.build(leader, 0, ils)
    assert sim.variant.validate(voter, Proposal.signed(block)).status == PENDING
    voter.store[t1.tx_id] = t1
    assert sim.variant.validate(voter, Proposal.signed(block)).status == ACCEPT
    assert block.tx_ids == [t1.tx_id]


def test_local_lists_used_rules():
    t1 = Transaction("c1", 1, 100)
    sim = started("il-local")
    v, r = sim.variant, sim.replicas[1]
    r.my_ils[0] = InclusionList.signed(1, 0, [IlEntry.full(t1)])
    short = Proposal.signed(Block(0, 0, (), ListsUsed(frozenset({0, 1}))))
    assert v.validate(r, short) == (REJECT, "insufficient-lists")
    omits = Proposal.signed(Block(0, 0, (), ListsUsed(frozenset({0, 1, 2}))))
    assert v.validate(r, omits) == (REJECT, "il-omitted")
    assert v.validate(sim.replicas[3], omits).status == ACCEPT      # unlisted: blind accept
    honours = Proposal.signed(Block(0, 0, (IlEntry.full(t1),), ListsUsed(frozenset({0, 1, 2}))))
    assert v.validate(r, honours).status == ACCEPT


def test_block_invariants():
    a = Transaction("c1", 1, 100, conflict_class="k")
    b = Transaction("c2", 2, 100, conflict_class="k")
    sim = started("il-local")
    r = sim.replicas[1]
    used = ListsUsed(frozenset({0, 2, 3}))
    dup = Proposal.signed(Block(0, 0, (IlEntry.full(a), IlEntry.full(a)), used))
    assert sim.variant.validate(r, dup) == (REJECT, "duplicate-tx")
    clash = Proposal.signed(Block(0, 0, (IlEntry.full(a), IlEntry.full(b)), used))
    assert sim.variant.validate(r, clash) == (REJECT, "conflicting-txs")
    r.committed.add(a.tx_id)
    again = Proposal.signed(Block(0, 0, (IlEntry.full(a),), used))
    assert sim.variant.validate(r, again) == (REJECT, "already-committed")


def test_censoring_subsets():
    t = Transaction("c1", 1, 1)
    ils = [InclusionList.signed(a, 0, [IlEntry.full(t)] if a in (1, 2) else []) for a in range(4)]
    assert censoring_subsets(ils, 3, {t.tx_id}) == []
    ils[2] = InclusionList.signed(2, 0, [])
    assert censoring_subsets(ils, 3, {t.tx_id}) == [(0, 2, 3)]
