"""Independent reference implementations used to check the production code.

The selection oracles work by exhaustive search over subsets rather than by
the greedy scans in :mod:`il_lab.variants`. The broadcast, availability and
single-epoch consensus checks enumerate byzantine behaviour exhaustively
(or over many seeded schedules) on the smallest interesting system.
"""

from __future__ import annotations

import itertools
import random
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

from .dissemination import BOT, DaReader, Disperser, RbcEngine, StorageNode, rbc_broadcast
from .model import Block, IlEntry, Proposal, RetrievabilityCertificate, Transaction, Vote, sign

# -- selection and conflict rules ---------------------------------------------


def oracle_resolve_conflicts(lists, conflict_of) -> list[tuple[int, list[IlEntry]]]:
    """For each class keep the member whose earliest occurrence is lexicographically least."""
    occurrences: dict[str, list] = {}
    for author, entries in lists:
        for pos, entry in enumerate(entries):
            cls = conflict_of(entry)
            if cls is not None:
                occurrences.setdefault(cls, []).append(((author, pos), entry.tx_id))
    winners = {}
    for cls, occ in occurrences.items():
        best = occ[0]
        for candidate in occ[1:]:
            if candidate[0] < best[0]:
                best = candidate
        winners[cls] = best[1]
    out = []
    for author, entries in sorted(lists, key=lambda item: item[0]):
        out.append((author, [e for e in entries
                             if conflict_of(e) is None or winners[conflict_of(e)] == e.tx_id]))
    return out


def _distinct(lists) -> dict[str, IlEntry]:
    first = {}
    for _, entries in sorted(lists, key=lambda item: item[0]):
        for e in entries:
            first.setdefault(e.tx_id, e)
    return first


def oracle_frequency(lists, capacity: Optional[int], size_of) -> list[IlEntry]:
    """Largest rank-closed subset that fits, found by trying every subset.

    A subset is rank-closed when it contains every transaction ranked above
    any of its members, where rank is (more lists first, then tx id).
    """
    first = _distinct(lists)
    count = {t: sum(1 for _, entries in lists if t in {e.tx_id for e in entries}) for t in first}
    ids = sorted(first)
    rank = lambda t: (-count[t], t)  # noqa: E731
    best: tuple = ()
    for r in range(len(ids) + 1):
        for subset in itertools.combinations(ids, r):
            chosen = set(subset)
            closed = all(rank(o) > rank(t) or o in chosen for t in chosen for o in ids)
            fits = capacity is None or sum(size_of(first[t]) for t in chosen) <= capacity
            if closed and fits and len(chosen) > len(best):
                best = subset
    return [first[t] for t in sorted(best, key=rank)]


def oracle_prefix(lists, capacity: Optional[int], size_of) -> list[IlEntry]:
    """Among every prefix depth x, the deepest whose union (and all shallower ones) fits."""
    lists = sorted(lists, key=lambda item: item[0])
    depth = max((len(e) for _, e in lists), default=0)
    unions = []
    for x in range(depth + 1):
        seen: dict[str, IlEntry] = {}
        for _, entries in lists:
            for e in entries[:x]:
                seen.setdefault(e.tx_id, e)
        unions.append(list(seen.values()))
    best = []
    for x, union in enumerate(unions):
        if capacity is not None and any(sum(size_of(e) for e in unions[y]) > capacity
                                        for y in range(x + 1)):
            break
        best = union
    return best


def oracle_select(lists, rule: str, capacity, size_of, conflict_of) -> list[IlEntry]:
    resolved = oracle_resolve_conflicts(lists, conflict_of)
    pick = oracle_frequency if rule == "frequency" else oracle_prefix
    return pick(resolved, capacity, size_of)


@dataclass
class SelectionInstance:
    lists: list
    capacity: Optional[int]
    sizes: dict
    classes: dict

    def size_of(self, entry: IlEntry) -> int:
        return self.sizes[entry.tx_id]

    def conflict_of(self, entry: IlEntry):
        return self.classes.get(entry.tx_id)


def random_instance(rng: random.Random, max_lists: int = 5, max_entries: int = 6,
                    pool: int = 8) -> SelectionInstance:
    txs = [Transaction(client="o", nonce=i, size_bytes=rng.randint(1, 4)) for i in range(pool)]
    authors = sorted(rng.sample(range(8), rng.randint(1, max_lists)))
    lists = []
    for a in authors:
        picked = rng.sample(txs, rng.randint(0, min(max_entries, pool)))
        lists.append((a, [IlEntry.full(t) for t in picked]))
    classes = {}
    for t in txs:
        if rng.random() < 0.35:
            classes[t.tx_id] = f"k{rng.randint(0, 2)}"
    capacity = None if rng.random() < 0.2 else rng.randint(0, 14)
    return SelectionInstance(lists, capacity, {t.tx_id: t.size_bytes for t in txs}, classes)


# -- reliable broadcast --------------------------------------------------------

RBC_CHOICES = ("none", "v", "w", "both")


@dataclass
class RbcRun:
    delivered: dict = field(default_factory=dict)   # honest replica -> tx


def _run_rbc(n: int, f: int, honest: Sequence[int], tag, initial: list, byz_echo: dict,
             byz_ready: dict, values: dict) -> RbcRun:
    """Deliver every message FIFO until quiescence. ``initial`` holds (to, kind, from, tag, tx)."""
    engines = {r: RbcEngine(r, n, f) for r in honest}
    queue = deque(initial)
    byz = [r for r in range(n) if r not in honest][0]
    for h in honest:
        for choice, kind in ((byz_echo[h], "rbc-echo"), (byz_ready[h], "rbc-ready")):
            for key in (("v", "w") if choice == "both" else (choice,) if choice != "none" else ()):
                queue.append((h, kind, byz, tag, values[key]))
    run = RbcRun()
    while queue:
        to, kind, sender, t, tx = queue.popleft()
        out, got = engines[to].handle(kind, sender, t, tx)
        if got is not None:
            assert to not in run.delivered, "double delivery"
            run.delivered[to] = got
        for recipient, k, (tg, val) in out:
            for r in honest:
                queue.append((r, k, to, tg, val))
    return run


def rbc_exhaustive(n: int = 4, f: int = 1) -> dict:
    """Every byzantine client SEND pattern crossed with every byzantine replica echo/ready choice.

    Replica ``n - 1`` is byzantine. Returns counts and the list of violations
    (empty when validity, consistency and totality hold everywhere).
    """
    honest = list(range(n - 1))
    byz = n - 1
    v = Transaction(client="c", nonce=0, size_bytes=10)
    w = Transaction(client="c", nonce=0, size_bytes=10, body="other")
    values = {"v": v, "w": w}
    tag = ("c", "slot")
    violations, cases, delivered_any = [], 0, 0
    per_honest = list(itertools.product(RBC_CHOICES, repeat=len(honest)))
    send_patterns = list(itertools.product(("v", "w", "none"), repeat=len(honest)))
    for sends in send_patterns:
        honest_client = sends == ("v",) * len(honest)
        initial = [(h, "rbc-send", "c", tag, values[s]) for h, s in zip(honest, sends) if s != "none"]
        for echo in per_honest:
            for ready in per_honest:
                cases += 1
                run = _run_rbc(n, f, honest, tag, initial, dict(zip(honest, echo)),
                               dict(zip(honest, ready)), values)
                got = set(tx.tx_id for tx in run.delivered.values())
                problem = None
                if len(got) > 1:
                    problem = "consistency"
                elif run.delivered and len(run.delivered) != len(honest):
                    problem = "totality"
                elif honest_client and (len(run.delivered) != len(honest) or got != {v.tx_id}):
                    problem = "validity"
                if problem:
                    violations.append((problem, sends, echo, ready))
                delivered_any += bool(run.delivered)
    return {"cases": cases, "delivered_cases": delivered_any, "violations": violations,
            "byzantine_replica": byz}


def rbc_honest_rounds(n: int = 4, f: int = 1, delta: int = 1) -> int:
    """Rounds from the client's send until every replica delivers, honest case."""
    v = Transaction(client="c", nonce=0, size_bytes=10)
    tag, out = rbc_broadcast(v, "c")
    engines = {r: RbcEngine(r, n, f) for r in range(n)}
    current = [(r, kind, "c", tag, tx) for r in range(n) for _, kind, (tag, tx) in out]
    delivered: dict[int, int] = {}
    rnd = 0
    while current:
        rnd += delta
        nxt = []
        for to, kind, sender, t, tx in current:
            msgs, got = engines[to].handle(kind, sender, t, tx)
            if got is not None:
                delivered[to] = rnd
            nxt += [(r, k, to, tg, val) for _, k, (tg, val) in msgs for r in range(n)]
        current = nxt
    assert len(delivered) == n
    return max(delivered.values())


# -- data availability ---------------------------------------------------------

def da_schedule(seed: int, n_s: int = 4, f_s: int = 1, readers: int = 2) -> dict:
    """One adversarial schedule: byzantine storage behaviours and response order chosen by ``seed``."""
    rng = random.Random(f"da-schedule:{seed}")
    storage_ids = [f"s{i}" for i in range(n_s)]
    faulty = rng.sample(storage_ids, rng.randint(0, f_s))
    nodes = {s: StorageNode(s, rng.choice(("silent", "lie", "withhold")) if s in faulty else "honest")
             for s in storage_ids}
    tx = Transaction(client="c", nonce=seed, size_bytes=rng.randint(1, 500))
    disperser = Disperser(n_s, f_s)
    cert = None
    acks = []
    for s, kind, payload in disperser.start(tx, storage_ids):
        acks += nodes[s].on_disperse("c", payload)
    rng.shuffle(acks)
    for _, _, (h, node, tag) in acks:
        cert = cert or disperser.on_ack(h, node, tag)
    forged = RetrievabilityCertificate(tx.tx_id, frozenset(
        (s, sign("mallory", cert.ack_digest())) for s in storage_ids))
    results = {"honest": [], "forged": []}
    for label, c in (("honest", cert), ("forged", forged)):
        for r in range(readers):
            reader = DaReader(n_s, f_s, storage_ids)
            responses = []
            for s, kind, h in reader.start(c, 0):
                responses += [(s, p) for _, _, p in nodes[s].on_query(f"r{r}", h)]
            rng.shuffle(responses)
            for rnd, (s, (h, got)) in enumerate(responses, start=1):
                reader.on_response(s, h, got, rnd)
            result = reader.lookup(c)
            results[label].append(BOT if result is None else result)
    return {"tx": tx, "cert_valid": cert.is_valid(n_s, f_s), "faulty": sorted(faulty),
            "results": results}


# -- single-epoch consensus ------------------------------------------------------

VOTE_CHOICES = ("none", "A", "B", "both")
PROPOSAL_CHOICES = ("A", "B", "none")


def consensus_exhaustive(variant: str = "plain", max_cases: Optional[int] = None) -> dict:
    """Byzantine leader 0 scripts one epoch at n=4 against three honest replicas.

    For each honest replica the leader picks which proposal it sends
    (A, B or none) and which vote-1 it sends (none, A, B, both); its vote-2
    choice is enumerated globally. Checks that no two honest replicas
    commit different blocks.
    """
    from .config import AdversaryConfig, WorkloadConfig, scenario
    from .consensus import Simulation

    cfg = scenario(4, 1, variant, epochs=1, workload=WorkloadConfig(tx_count=0),
                   adversary=AdversaryConfig(malicious=(0,), leader_strategy="silent"))
    honest = (1, 2, 3)
    combos = itertools.product(itertools.product(PROPOSAL_CHOICES, repeat=3),
                               itertools.product(VOTE_CHOICES, repeat=3), VOTE_CHOICES)
    cases, commits, violations = 0, 0, []
    for props, votes1, vote2 in combos:
        if max_cases is not None and cases >= max_cases:
            break
        cases += 1
        sim = Simulation(cfg, keep_trace=False)
        sim.replicas[0].handle = lambda *a, **k: None
        sim.start()
        a = sim.replicas[0].variant.build_plain(sim.replicas[0], 0)
        blocks = {"A": a, "B": Block(0, 0, a.txs, a.il_evidence, nonce=1)}
        for b in blocks.values():
            sim.register_block(b)
        for h, p, v1 in zip(honest, props, votes1):
            if p != "none":
                sim.net.send(0, h, "proposal", 0, Proposal.signed(blocks[p]))
            for key in (("A", "B") if v1 == "both" else (v1,) if v1 != "none" else ()):
                sim.net.send(0, h, "vote1", 0, Vote.signed(0, 1, blocks[key].ref, 0))
            for key in (("A", "B") if vote2 == "both" else (vote2,) if vote2 != "none" else ()):
                sim.net.send(0, h, "vote2", 0, (Vote.signed(0, 2, blocks[key].ref, 0), None))
        sim.run_until(lambda s: all(s.replicas[h].epoch >= 1 for h in honest) and s.net.in_flight == 0,
                      max_rounds=60)
        refs = {sim.replicas[h].chain[0] for h in honest if 0 in sim.replicas[h].chain}
        commits += bool(refs)
        if len(refs) > 1:
            violations.append((props, votes1, vote2))
    return {"cases": cases, "committing_cases": commits, "violations": violations}
