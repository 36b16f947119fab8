"""Leader-based epoch consensus hosting the inclusion-list strategies.

Each epoch is an independent slot: the round-robin leader proposes, replicas
send vote-1 for the first acceptable proposal, vote-2 once they see 2f+1
vote-1s for a block, and commit on 2f+1 vote-2s. A replica leaves an epoch on
commit or on timeout; a timed-out epoch leaves a gap in the chain.

A replica's list for epoch ``e + 1`` travels inside its vote-2 for epoch
``e`` to the next leader, so in the happy path lists cost no extra round.

Because a replica counts only the first vote of each voter, an equivocating
leader can leave a quorum visible at some replicas and not at others. A
replica that sent vote-2 but timed out asks its peers for the commit
certificate and holds off judging or building later blocks for a short
grace period, so a late commit is learned before its transactions could be
proposed again.
"""

from __future__ import annotations

import random
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Callable, Optional

from .config import ScenarioConfig
from .dissemination import (ALL, BOT, DaReader, Disperser, GossipEngine, RbcEngine,
                            StorageNode, rbc_broadcast)
from .metrics import Accounting
from .model import (DA_CERT, FULL_TX, TX_HASH, Block, IlEntry, InclusionList,
                    Proposal, Transaction, Vote)
from .simnet import SimNet, SimTimeout, make_policy
from .variants import ACCEPT, PENDING, REJECT, VariantParams, make_variant


def leader_of(epoch: int, n: int) -> int:
    return epoch % n


def default_recipients(variant: str, index: int, n: int, f: int) -> tuple[int, ...]:
    """Client rule: 2f+1 rotating replicas, or all of them where the variant needs it."""
    if variant in ("plain", "il-local", "il-rbc", "il-da"):
        return tuple(range(n))
    return tuple(sorted((index + j) % n for j in range(2 * f + 1)))


@dataclass
class ReceivedIl:
    il: InclusionList
    arrival_round: int
    eligible_round: Optional[int] = None


@dataclass
class RunLog:
    """Everything the metrics need, recorded as the run unfolds."""

    honest: frozenset = frozenset()     # neither malicious nor bribed
    correct: frozenset = frozenset()    # not malicious; bribed replicas still follow the protocol
    submits: dict = field(default_factory=dict)        # tx_id -> (index, round, recipients)
    tx_ids: dict = field(default_factory=dict)         # workload index -> tx_id
    eligible: dict = field(default_factory=lambda: defaultdict(dict))  # tx_id -> {replica: round}
    ils: list = field(default_factory=list)            # (epoch, author, round, tx_ids)
    proposals: list = field(default_factory=list)      # (epoch, leader, ref, round)
    commits: list = field(default_factory=list)        # (replica, epoch, ref, round)
    entries: list = field(default_factory=list)        # (replica, epoch, round, cause)
    rejections: list = field(default_factory=list)     # (replica, epoch, ref, reason)
    t_disp: dict = field(default_factory=dict)         # tx_id -> rounds
    t_ret: list = field(default_factory=list)          # rounds per completed retrieval
    blocks: dict = field(default_factory=dict)         # ref -> Block

    def honest_commits(self) -> dict:
        """epoch -> {replica: (ref, round)} over protocol-following replicas."""
        out: dict = defaultdict(dict)
        for replica, epoch, ref, rnd in self.commits:
            if replica in self.correct:
                out[epoch][replica] = (ref, rnd)
        return out

    def agreement_violations(self) -> list[int]:
        return sorted(e for e, by in self.honest_commits().items()
                      if len({ref for ref, _ in by.values()}) > 1)


class Replica:
    def __init__(self, sim: Simulation, rid: int, role: str, censored: frozenset):
        self.sim = sim
        self.id = rid
        self.role = role                    # honest | malicious | bribed
        self.censored_ids = censored
        cfg = sim.cfg
        self.n, self.f = cfg.net.n, cfg.net.f
        self.quorum = 2 * self.f + 1
        self.variant = sim.variant
        self.epoch = -1
        self.entered_round = 0
        self.deadline = 0
        self.store: dict[str, Transaction] = {}
        self.eligible: dict[str, IlEntry] = {}
        self.committed: set[str] = set()
        self.chain: dict[int, str] = {}
        self.my_ils: dict[int, InclusionList] = {}
        self._ils: dict[int, dict[int, ReceivedIl]] = defaultdict(dict)
        self.voted1: dict[int, str] = {}
        self.voted2: dict[int, str] = {}
        self._votes: dict[tuple, dict[str, set]] = defaultdict(lambda: defaultdict(set))
        self._voter_seen: dict[tuple, dict[int, str]] = defaultdict(dict)
        self._pending: dict[int, Proposal] = {}
        self._wanted: set[str] = set()
        self._client_certs: set[str] = set()    # certificates handed over by clients
        self._buffer: dict[int, list] = defaultdict(list)
        self._proposed: set[int] = set()
        self._any_voted: set[tuple] = set()
        self._vote2s: dict[tuple, dict[int, Vote]] = defaultdict(dict)
        self._certs: dict[int, tuple] = {}
        self._queries: dict[int, set] = defaultdict(set)
        self._unresolved: dict[int, int] = {}     # epoch -> round the grace ends
        self.rbc = RbcEngine(rid, self.n, self.f)
        peers = [r for r in range(self.n) if r != rid]
        self.gossip = GossipEngine(rid, peers, cfg.gossip, cfg.net.seed)
        self.da = DaReader(sim.n_s, sim.f_s, sim.storage_ids)

    # -- helpers -------------------------------------------------------------

    @property
    def round(self) -> int:
        return self.sim.net.round

    @property
    def params(self) -> VariantParams:
        return self.sim.params

    @property
    def behaviour(self) -> str:
        if self.role == "honest":
            return "honest"
        return self.sim.cfg.adversary.leader_strategy

    def order_key(self, tx_id: str):
        tx = self.store.get(tx_id)
        submitted = self.sim.log.submits.get(tx_id)
        return (submitted[1] if submitted else (tx.submit_round if tx else 0), tx_id)

    def ils_for(self, epoch: int) -> dict[int, ReceivedIl]:
        return self._ils[epoch]

    def send(self, recipient, kind: str, payload) -> None:
        self.sim.send(self.id, recipient, kind, payload)

    def broadcast(self, kind: str, payload) -> None:
        for r in range(self.n):
            self.send(r, kind, payload)

    def _emit(self, outbound) -> None:
        for recipient, kind, payload in outbound:
            if recipient == ALL:
                self.broadcast(kind, payload)
            else:
                self.send(recipient, kind, payload)

    # -- payload resolution --------------------------------------------------

    def payload(self, entry: IlEntry) -> Optional[Transaction]:
        if entry.form == FULL_TX:
            return entry.ref
        if entry.form == TX_HASH:
            return self.store.get(entry.ref)
        result = self.da.lookup(entry.ref)
        return result if isinstance(result, Transaction) else None

    def resolve(self, entry: IlEntry) -> str:
        if entry.form == FULL_TX:
            return "ok"
        if entry.form == TX_HASH:
            return "ok" if entry.ref in self.store else "pending"
        if self.params.allow_invalid_certs:
            return "ok"
        result = self.da.lookup(entry.ref)
        if result is None:
            self._emit(self.da.start(entry.ref, self.round))
            result = self.da.lookup(entry.ref)
            if result is None:
                return "pending"
        return "bad" if result is BOT else "ok"

    def make_eligible(self, tx: Transaction, entry: IlEntry) -> None:
        self.store.setdefault(tx.tx_id, tx)
        if tx.tx_id in self.committed or tx.tx_id in self.eligible:
            return
        self.eligible[tx.tx_id] = entry
        self.sim.log.eligible[tx.tx_id].setdefault(self.id, self.round)
        self.on_store_update()

    def on_store_update(self) -> None:
        pending = self._pending.get(self.epoch)
        if pending is not None:
            self._judge(pending)
        self.try_propose()

    # -- message handling ----------------------------------------------------

    def handle(self, sender, kind: str, payload) -> None:
        handler = getattr(self, "on_" + kind.replace("-", "_"))
        handler(sender, payload)

    def on_tx(self, sender, tx: Transaction) -> None:
        if self.variant.name == "il-gossip":
            self._gossip_receive(tx)
        else:
            self.make_eligible(tx, IlEntry.full(tx))

    def _gossip_receive(self, tx: Transaction) -> None:
        out, new = self.gossip.on_tx(tx)
        if self.role == "malicious":
            out = []
        self._emit(out)
        if new:
            self.store.setdefault(tx.tx_id, tx)
            self.make_eligible(tx, IlEntry.hashed(tx.tx_id))

    def on_gossip_fwd(self, sender, tx: Transaction) -> None:
        self._gossip_receive(tx)

    def on_gossip_pull(self, sender, txs) -> None:
        for tx in txs:
            self._gossip_receive(tx)

    def on_gossip_digest(self, sender, have) -> None:
        if self.role != "malicious":
            self._emit(self.gossip.on_digest(sender, have))

    def on_gossip_want(self, sender, wanted) -> None:
        if self.role != "malicious":
            self._emit(self.gossip.on_want(sender, wanted))

    def _rbc(self, kind: str, sender, payload) -> None:
        tag, value = payload
        out, delivered = self.rbc.handle(kind, sender, tag, value)
        self._emit(out)
        if delivered is not None:
            self.store.setdefault(delivered.tx_id, delivered)
            self.make_eligible(delivered, IlEntry.hashed(delivered.tx_id))

    def on_rbc_send(self, sender, payload) -> None:
        self._rbc("rbc-send", sender, payload)

    def on_rbc_echo(self, sender, payload) -> None:
        self._rbc("rbc-echo", sender, payload)

    def on_rbc_ready(self, sender, payload) -> None:
        self._rbc("rbc-ready", sender, payload)

    def on_da_cert(self, sender, cert) -> None:
        if self.params.allow_invalid_certs:
            self.eligible.setdefault(cert.content_hash, IlEntry.cert(cert))
            self.sim.log.eligible[cert.content_hash].setdefault(self.id, self.round)
            self.on_store_update()
            return
        self._client_certs.add(cert.key)
        self._emit(self.da.start(cert, self.round))

    def on_da_response(self, sender, payload) -> None:
        content_hash, tx = payload
        for cert, got in self.da.on_response(sender, content_hash, tx, self.round):
            self.sim.log.t_ret.append(self.da.durations[cert.key])
            self.store.setdefault(got.tx_id, got)
            if cert.key in self._client_certs:
                self.make_eligible(got, IlEntry.cert(cert))
            else:
                self.on_store_update()

    def on_il(self, sender, il: InclusionList) -> None:
        if il.author != sender or il.epoch < self.epoch:
            return
        if il.author not in self._ils[il.epoch]:
            self._ils[il.epoch][il.author] = ReceivedIl(il, self.round)
        if il.epoch == self.epoch:
            self.try_propose()

    def on_proposal(self, sender, proposal: Proposal) -> None:
        epoch = proposal.block.epoch
        if epoch > self.epoch:
            self._buffer[epoch].append(proposal)
            return
        if epoch < self.epoch:
            return
        self._consider(proposal)

    def on_vote1(self, sender, vote: Vote) -> None:
        self._count(sender, vote)

    def on_vote2(self, sender, payload) -> None:
        vote, il = payload
        if il is not None:
            self.on_il(sender, il)
        self._count(sender, vote)

    # -- voting --------------------------------------------------------------

    def _consider(self, proposal: Proposal) -> None:
        block = proposal.block
        epoch = block.epoch
        if self.role == "malicious" and self.sim.cfg.adversary.malicious_votes == "any":
            self._vote_any(block)
            return
        if epoch in self.voted1 or epoch in self._pending:
            return
        if block.leader != leader_of(epoch, self.n) or not proposal.signature_ok():
            self.sim.log.rejections.append((self.id, epoch, block.ref, "wrong-leader"))
            return
        self._pending[epoch] = proposal
        self._judge(proposal)

    def _awaiting(self) -> bool:
        for epoch in [e for e, until in self._unresolved.items() if until <= self.round]:
            del self._unresolved[epoch]
        return bool(self._unresolved)

    def _judge(self, proposal: Proposal) -> None:
        block = proposal.block
        if self._awaiting():
            return
        verdict = self.variant.validate(self, proposal)
        if verdict.status == PENDING:
            self._request_missing(block)
            return
        del self._pending[block.epoch]
        if verdict.status == REJECT:
            self.sim.log.rejections.append((self.id, block.epoch, block.ref, verdict.reason))
            return
        self._vote(1, block.epoch, block.ref)

    def _request_missing(self, block: Block) -> None:
        if self.variant.name != "il-gossip":
            return
        ids = {e.tx_id for il in block.evidence_ils for e in il.entries} | set(block.tx_ids)
        missing = sorted(t for t in ids if t not in self.store and t not in self._wanted)
        if missing:
            self._wanted.update(missing)
            self.send(block.leader, "gossip-want", tuple(missing))

    def _vote(self, phase: int, epoch: int, ref: str) -> None:
        record = self.voted1 if phase == 1 else self.voted2
        assert record.get(epoch, ref) == ref, f"honest replica {self.id} equivocated"
        record[epoch] = ref
        vote = Vote.signed(epoch, phase, ref, self.id)
        if phase == 1:
            self.broadcast("vote1", vote)
            return
        il = self._piggyback_il(epoch, ref)
        nxt = leader_of(epoch + 1, self.n)
        for r in range(self.n):
            self.send(r, "vote2", (vote, il if r == nxt else None))

    def _vote_any(self, block: Block) -> None:
        if (block.epoch, block.ref) in self._any_voted:
            return
        self._any_voted.add((block.epoch, block.ref))
        self.broadcast("vote1", Vote.signed(block.epoch, 1, block.ref, self.id))
        il = self._piggyback_il(block.epoch, block.ref)
        nxt = leader_of(block.epoch + 1, self.n)
        vote = Vote.signed(block.epoch, 2, block.ref, self.id)
        for r in range(self.n):
            self.send(r, "vote2", (vote, il if r == nxt else None))

    def _piggyback_il(self, epoch: int, ref: str) -> Optional[InclusionList]:
        if not self.variant.uses_ils or epoch + 1 in self.my_ils:
            return None
        block = self.sim.log.blocks.get(ref)
        return self._issue_il(epoch + 1, block.tx_ids if block is not None else ())

    def _issue_il(self, epoch: int, exclude=()) -> InclusionList:
        il = self.variant.make_il(self, epoch, exclude)
        self.my_ils[epoch] = il
        self.sim.log.ils.append((epoch, self.id, self.round, tuple(il.tx_ids)))
        return il

    def _count(self, sender, vote: Vote) -> None:
        if vote.voter != sender or not vote.signature_ok():
            return
        key = (vote.epoch, vote.phase)
        seen = self._voter_seen[key]
        if vote.voter in seen:
            return
        seen[vote.voter] = vote.block_ref
        voters = self._votes[key][vote.block_ref]
        voters.add(vote.voter)
        if vote.phase == 2:
            self._vote2s[(vote.epoch, vote.block_ref)][vote.voter] = vote
        if len(voters) < self.quorum:
            return
        if vote.phase == 1:
            self._on_vote1_quorum(vote.epoch, vote.block_ref)
        elif vote.epoch not in self.chain:
            self._certs[vote.epoch] = tuple(
                v for _, v in sorted(self._vote2s[(vote.epoch, vote.block_ref)].items()))
            self.commit(vote.epoch, vote.block_ref)
            for r in sorted(self._queries.pop(vote.epoch, ())):
                self.send(r, "commit-cert", self._certs[vote.epoch])

    def on_commit_query(self, sender, epoch: int) -> None:
        if self.role == "malicious":
            return
        if epoch in self._certs:
            self.send(sender, "commit-cert", self._certs[epoch])
        elif epoch not in self.chain:
            self._queries[epoch].add(sender)

    def on_commit_cert(self, sender, votes) -> None:
        """Adopt a commit proven by 2f+1 matching, correctly signed vote-2s."""
        if not votes:
            return
        epoch, ref = votes[0].epoch, votes[0].block_ref
        voters = {v.voter for v in votes if v.phase == 2 and v.epoch == epoch
                  and v.block_ref == ref and v.signature_ok()}
        if len(voters) < self.quorum or ref not in self.sim.log.blocks:
            return
        self._unresolved.pop(epoch, None)
        if epoch not in self.chain:
            self._certs[epoch] = tuple(votes)
            self.commit(epoch, ref)
        self.on_store_update()

    def _on_vote1_quorum(self, epoch: int, ref: str) -> None:
        if epoch != self.epoch or epoch in self.voted2:
            return
        if self.role == "malicious" and self.sim.cfg.adversary.malicious_votes == "any":
            return
        self._vote(2, epoch, ref)

    def commit(self, epoch: int, ref: str) -> None:
        block = self.sim.log.blocks[ref]
        self.chain[epoch] = ref
        for tid in block.tx_ids:
            self.committed.add(tid)
            self.eligible.pop(tid, None)
        self.sim.log.commits.append((self.id, epoch, ref, self.round))
        if epoch >= self.epoch:
            self.enter_epoch(epoch + 1, "commit")

    # -- epochs --------------------------------------------------------------

    def enter_epoch(self, epoch: int, cause: str) -> list:
        """Move to ``epoch``; returns the inclusion-list messages this emitted."""
        self.epoch = epoch
        self.entered_round = self.round
        self.deadline = self.round + self.sim.epoch_timeout
        self.sim.log.entries.append((self.id, epoch, self.round, cause))
        for stale in [e for e in self._pending if e < epoch]:
            del self._pending[stale]
        emitted = []
        if self.variant.uses_ils and epoch not in self.my_ils:
            il = self._issue_il(epoch)
            self.send(leader_of(epoch, self.n), "il", il)
            emitted.append(il)
        for proposal in self._buffer.pop(epoch, []):
            self._consider(proposal)
        for e in [e for e in self._buffer if e < epoch]:
            del self._buffer[e]
        for ref, voters in list(self._votes[(epoch, 1)].items()):
            if len(voters) >= self.quorum:
                self._on_vote1_quorum(epoch, ref)
                break
        self.try_propose()
        return emitted

    def on_epoch_timeout(self) -> None:
        if self.epoch not in self.chain and self.round >= self.deadline:
            left = self.epoch
            if left in self.voted2 and self.role != "malicious":
                self._unresolved[left] = self.round + self.sim.grace_rounds
                for r in range(self.n):
                    if r != self.id:
                        self.send(r, "commit-query", left)
            self.enter_epoch(left + 1, "timeout")

    def on_tick(self) -> None:
        if self._unresolved and not self._awaiting():
            self.on_store_update()

    # -- leader --------------------------------------------------------------

    def try_propose(self) -> None:
        epoch = self.epoch
        if epoch < 0 or leader_of(epoch, self.n) != self.id or epoch in self._proposed:
            return
        if self._awaiting():
            return
        strategy = self.behaviour
        if strategy == "silent":
            return
        if not self.variant.uses_ils:
            censor = self.sim.targets if strategy == "censor" else frozenset()
            self._propose(self.variant.build_plain(self, epoch, censor))
            return
        usable = self.variant.usable_ils(self, epoch)
        if strategy == "censor":
            choice = self.variant.censor_selection(self, epoch, usable, self.sim.targets)
            if choice is not None:
                if isinstance(choice, tuple) and len(choice) == 2 and isinstance(choice[1], list):
                    used, listed = choice
                    self._propose(self.variant.build(self, epoch, used, listed))
                else:
                    self._propose(self.variant.build(self, epoch, choice))
                return
            if not self._censor_exhausted(epoch, usable):
                return
            if self.sim.cfg.adversary.fallback == "silent":
                self._proposed.add(epoch)
                return
        chosen = self.variant.honest_selection(self, epoch, usable)
        if chosen is None:
            return
        block = self.variant.build(self, epoch, chosen)
        if strategy == "equivocate":
            self._equivocate(block)
        else:
            self._propose(block)

    def _censor_exhausted(self, epoch: int, usable) -> bool:
        got = self._ils[epoch]
        if len(got) >= self.n and len(usable) >= sum(
                1 for rec in got.values() if self.variant.counts_toward_threshold(rec.il, self.id)):
            return True
        return self.round >= self.entered_round + self.sim.censor_patience

    def _propose(self, block: Block) -> None:
        self._proposed.add(block.epoch)
        self.sim.register_block(block)
        self.sim.log.proposals.append((block.epoch, self.id, block.ref, self.round))
        self.broadcast("proposal", Proposal.signed(block))

    def _equivocate(self, block: Block) -> None:
        self._proposed.add(block.epoch)
        twin = Block(block.epoch, block.leader, block.txs, block.il_evidence, nonce=1)
        for b in (block, twin):
            self.sim.register_block(b)
            self.sim.log.proposals.append((b.epoch, self.id, b.ref, self.round))
        rng = self.sim.rng
        for r in range(self.n):
            if r in self.sim.log.honest:
                chosen = block if rng.random() < 0.5 else twin
                self.send(r, "proposal", Proposal.signed(chosen))
            else:
                self.send(r, "proposal", Proposal.signed(block))
                self.send(r, "proposal", Proposal.signed(twin))


class Simulation:
    """One deterministic run of a scenario."""

    def __init__(self, cfg: ScenarioConfig, keep_trace: bool = True):
        self.cfg = cfg
        n, f = cfg.net.n, cfg.net.f
        adv = cfg.adversary
        self.params = VariantParams(
            n=n, f=f, selection_rule=cfg.selection_rule,
            block_capacity_bytes=cfg.block_capacity_bytes,
            leader_il_counts=cfg.leader_il_counts,
            cert_only_blocks=cfg.cert_only_blocks,
            allow_invalid_certs=cfg.allow_invalid_certs,
        )
        self.variant = make_variant(cfg.variant, self.params)
        self.n_s, self.f_s = cfg.n_s, cfg.f_s
        self.storage_ids = [f"s{i}" for i in range(self.n_s)]
        self.size = cfg.size_model.with_storage(self.n_s, self.f_s)
        self.acct = Accounting(self.size)
        self.rng = random.Random(f"sim:{cfg.net.seed}")
        delta = cfg.net.delta_cap
        self.epoch_timeout = cfg.epoch_timeout or (4 + self.variant.latency_increment) * delta
        self.censor_patience = max(1, self.epoch_timeout - 3 * delta - 1)
        self.grace_rounds = 3 * delta

        self.specs = self._workload()
        self.client_ids = [f"c{i}" for i in range(len(self.specs))]
        policy = make_policy(adv.network_strategy, adv.targeted_nodes)
        nodes = list(range(n)) + self.storage_ids + self.client_ids
        self.net = SimNet(cfg.net, policy, nodes, keep_trace=keep_trace)
        self.net.on_send.append(self.acct.record)

        malicious, bribed = set(adv.malicious), set(adv.bribed) - set(adv.malicious)
        self.log = RunLog(honest=frozenset(r for r in range(n)
                                           if r not in malicious and r not in bribed),
                          correct=frozenset(r for r in range(n) if r not in malicious))
        self.txs = [self._make_tx(i, spec) for i, spec in enumerate(self.specs)]
        for i, tx in enumerate(self.txs):
            self.log.tx_ids[i] = tx.tx_id
        self.targets = frozenset(self.txs[i].tx_id for i in adv.targets)
        self.replicas = []
        for r in range(n):
            role = "malicious" if r in malicious else "bribed" if r in bribed else "honest"
            censored = self.targets if role != "honest" else frozenset()
            self.replicas.append(Replica(self, r, role, censored))
        self.storage = {sid: StorageNode(sid, cfg.da.byzantine.get(i, "honest"))
                        for i, sid in enumerate(self.storage_ids)}
        self.dispersers = {cid: Disperser(self.n_s, self.f_s) for cid in self.client_ids}
        self._local: list = []
        self._dispatching = False
        self._by_round = defaultdict(list)
        for i, spec in enumerate(self.specs):
            self._by_round[spec["round"]].append(i)
        self.started = False

    # -- workload ------------------------------------------------------------

    def _workload(self) -> list[dict]:
        wl, n, f = self.cfg.workload, self.cfg.net.n, self.cfg.net.f
        size = wl.tx_size or self.cfg.size_model.tx_bytes
        specs = []
        if wl.txs:
            for i, spec in enumerate(wl.txs):
                specs.append({"round": spec.round, "recipients": spec.recipients,
                              "size": spec.size or size, "conflict": spec.conflict})
        else:
            for i in range(wl.tx_count):
                specs.append({"round": wl.start_round + (i // wl.per_round) * wl.interval,
                              "recipients": None, "size": size, "conflict": None})
        for i, spec in enumerate(specs):
            if spec["recipients"] is None:
                if wl.recipients == "all":
                    spec["recipients"] = tuple(range(n))
                elif wl.recipients == "default":
                    spec["recipients"] = default_recipients(self.cfg.variant, i, n, f)
                else:
                    spec["recipients"] = tuple(wl.recipients)
        return specs

    def _make_tx(self, i: int, spec: dict) -> Transaction:
        return Transaction(client=f"c{i}", nonce=i, size_bytes=spec["size"],
                           conflict_class=spec["conflict"], submit_round=spec["round"])

    def _submit(self, i: int) -> None:
        tx, spec, client = self.txs[i], self.specs[i], self.client_ids[i]
        self.log.submits[tx.tx_id] = (i, self.net.round, spec["recipients"])
        name = self.cfg.variant
        if name == "il-rbc":
            _, out = rbc_broadcast(tx, client)
            for _, kind, payload in out:
                for r in range(self.cfg.net.n):
                    self.send(client, r, kind, payload)
        elif name == "il-da":
            for sid, kind, payload in self.dispersers[client].start(tx, self.storage_ids):
                self.send(client, sid, kind, payload)
        else:
            for r in spec["recipients"]:
                self.send(client, r, "tx", tx)

    # -- transport -----------------------------------------------------------

    def payload_bytes(self, kind: str, payload) -> int:
        s = self.size
        if kind == "tx":
            return payload.size_bytes
        if kind == "il":
            return s.il_bytes(payload)
        if kind == "proposal":
            return s.block_bytes(payload.block, self.variant.block_carries_txs)
        if kind == "vote1":
            return s.vote_bytes
        if kind == "commit-query":
            return s.hash_bytes
        if kind == "commit-cert":
            return len(payload) * s.vote_bytes
        if kind == "vote2":
            vote, il = payload
            return s.vote_bytes + (s.il_bytes(il) if il is not None else 0)
        if kind.startswith("rbc-"):
            return payload[1].size_bytes
        if kind == "gossip-fwd":
            return payload.size_bytes
        if kind == "gossip-pull":
            return sum(tx.size_bytes for tx in payload)
        if kind in ("gossip-digest", "gossip-want"):
            return max(1, len(payload)) * s.hash_bytes
        if kind == "da-disperse":
            return payload.size_bytes
        if kind == "da-ack":
            return s.hash_bytes + s.sig_bytes
        if kind == "da-cert":
            return s.cert_bytes
        if kind == "da-query":
            return s.hash_bytes
        if kind == "da-response":
            tx = payload[1]
            return tx.size_bytes if tx is not None else s.hash_bytes
        raise ValueError(f"no size rule for {kind}")

    def send(self, sender, recipient, kind: str, payload) -> None:
        if recipient == sender:
            self._local.append((sender, recipient, kind, payload))
            if not self._dispatching:
                self._drain()
            return
        self.net.send(sender, recipient, kind, self.payload_bytes(kind, payload), payload)

    def _drain(self) -> None:
        self._dispatching = True
        try:
            while self._local:
                sender, recipient, kind, payload = self._local.pop(0)
                self._deliver(sender, recipient, kind, payload)
        finally:
            self._dispatching = False

    def _deliver(self, sender, recipient, kind: str, payload) -> None:
        if isinstance(recipient, int):
            self.replicas[recipient].handle(sender, kind, payload)
        elif recipient in self.storage:
            node = self.storage[recipient]
            out = node.on_disperse(sender, payload) if kind == "da-disperse" else node.on_query(sender, payload)
            for to, k, p in out:
                self.send(recipient, to, k, p)
        else:
            self._client_receive(recipient, kind, payload)

    def _client_receive(self, client, kind: str, payload) -> None:
        if kind != "da-ack":
            return
        content_hash, node, tag = payload
        cert = self.dispersers[client].on_ack(content_hash, node, tag)
        if cert is None:
            return
        i = int(client[1:])
        self.log.t_disp[content_hash] = self.net.round - self.log.submits[content_hash][1]
        for r in self.specs[i]["recipients"]:
            self.send(client, r, "da-cert", cert)

    def register_block(self, block: Block) -> None:
        self.log.blocks.setdefault(block.ref, block)

    # -- driver --------------------------------------------------------------

    def start(self) -> None:
        if self.started:
            return
        self.started = True
        self._dispatching = True
        for i in self._by_round.pop(0, []):
            self._submit(i)
        for replica in self.replicas:
            replica.enter_epoch(0, "start")
        self._dispatching = False
        self._drain()

    def tick(self) -> None:
        batch = self.net.step()
        self._dispatching = True
        for env in batch:
            self._deliver(env.sender, env.recipient, env.kind, env.payload)
            while self._local:
                self._deliver(*self._local.pop(0))
        rnd = self.net.round
        for i in self._by_round.pop(rnd, []):
            self._submit(i)
        for replica in self.replicas:
            if self.cfg.variant == "il-gossip":
                out = replica.gossip.tick(rnd)
                if replica.role != "malicious":
                    replica._emit(out)
            replica.on_epoch_timeout()
            replica.on_tick()
            if replica.epoch >= 0:
                replica.try_propose()
            while self._local:
                self._deliver(*self._local.pop(0))
        self._dispatching = False
        self._drain()

    def done(self) -> bool:
        target = self.cfg.epochs
        return all(self.replicas[r].epoch >= target for r in self.log.correct) and not self._by_round

    @property
    def max_rounds(self) -> int:
        if self.cfg.max_rounds is not None:
            return self.cfg.max_rounds
        last_submit = max((s["round"] for s in self.specs), default=0)
        return last_submit + (self.cfg.epochs + 2) * (self.epoch_timeout + 2) + self.cfg.net.gst \
            + self.cfg.net.pre_gst_cap + 20

    def run(self) -> RunLog:
        self.start()
        cap = self.max_rounds
        while not self.done():
            if self.net.round >= cap:
                raise SimTimeout(self.net.round, self.net.trace[-50:])
            self.tick()
        return self.log

    def run_until(self, predicate: Callable[[Simulation], bool], max_rounds: int) -> int:
        """Tick until ``predicate(self)`` holds; ``max_rounds`` is an absolute cap."""
        self.start()
        while not predicate(self):
            if self.net.round >= max_rounds:
                raise SimTimeout(self.net.round, self.net.trace[-50:])
            self.tick()
        return self.net.round


def run_scenario(cfg: ScenarioConfig, keep_trace: bool = False) -> Simulation:
    sim = Simulation(cfg, keep_trace=keep_trace)
    sim.run()
    return sim
