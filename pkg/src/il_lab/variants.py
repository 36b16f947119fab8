"""Inclusion-list strategies plugged into the consensus host.

A strategy answers four questions for the host: what a replica puts in its
list, which collected lists a leader may build from, what block follows from
them, and whether a received proposal is acceptable. The selection and
conflict rules are plain functions so they can be checked in isolation.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from itertools import combinations
from typing import Callable, Iterable, NamedTuple, Optional, Sequence

from .dissemination import BOT
from .model import (DA_CERT, FULL_TX, TX_HASH, Block, IlEntry, InclusionList,
                    ListsUsed, Proposal, Transaction)

VARIANTS = ("plain", "il-base", "il-da", "il-rbc", "il-gossip", "il-local")
IL_VARIANTS = VARIANTS[1:]
SELECTION_RULES = ("frequency", "prefix")

ACCEPT = "accept"
REJECT = "reject"
PENDING = "pending"


class Verdict(NamedTuple):
    status: str
    reason: str = ""


ACCEPTED = Verdict(ACCEPT)


@dataclass(frozen=True)
class VariantParams:
    n: int
    f: int
    selection_rule: str = "frequency"
    block_capacity_bytes: Optional[int] = None
    leader_il_counts: bool = True
    cert_only_blocks: bool = False
    allow_invalid_certs: bool = False

    def __post_init__(self):
        if self.selection_rule not in SELECTION_RULES:
            raise ValueError(f"unknown selection_rule {self.selection_rule!r}")


# -- selection rules ---------------------------------------------------------

Lists = Sequence[tuple[int, Sequence[IlEntry]]]   # (author, entries) in author order


def resolve_conflicts(lists: Lists, conflict_of: Callable[[IlEntry], Optional[str]]):
    """Drop every conflicting transaction except one winner per class.

    The winner is the class member with the smallest (author, position)
    occurrence: the lowest-id list that carries any member decides, and
    inside that list the earliest entry wins.
    """
    lists = sorted(lists, key=lambda item: item[0])
    winner: dict[str, tuple] = {}
    for author, entries in lists:
        for pos, entry in enumerate(entries):
            cls = conflict_of(entry)
            if cls is None:
                continue
            occ = (author, pos)
            if cls not in winner or occ < winner[cls][0]:
                winner[cls] = (occ, entry.tx_id)
    keep = {cls: tid for cls, (_, tid) in winner.items()}
    resolved = []
    for author, entries in lists:
        kept = [e for e in entries
                if conflict_of(e) is None or keep[conflict_of(e)] == e.tx_id]
        resolved.append((author, kept))
    return resolved


def _first_occurrences(lists: Lists) -> dict[str, IlEntry]:
    first: dict[str, IlEntry] = {}
    for _, entries in sorted(lists, key=lambda item: item[0]):
        for entry in entries:
            first.setdefault(entry.tx_id, entry)
    return first


def select_frequency(lists: Lists, capacity: Optional[int],
                     size_of: Callable[[IlEntry], int]) -> list[IlEntry]:
    """Most frequent first (ties by tx id), stopping at the first overflow."""
    counts = Counter(tid for _, entries in lists for tid in {e.tx_id for e in entries})
    first = _first_occurrences(lists)
    ranked = sorted(counts, key=lambda tid: (-counts[tid], tid))
    chosen, used = [], 0
    for tid in ranked:
        size = size_of(first[tid])
        if capacity is not None and used + size > capacity:
            break
        chosen.append(first[tid])
        used += size
    return chosen


def select_prefix(lists: Lists, capacity: Optional[int],
                  size_of: Callable[[IlEntry], int]) -> list[IlEntry]:
    """Union of the first ``x`` entries of every list for the largest ``x`` that fits."""
    lists = sorted(lists, key=lambda item: item[0])
    longest = max((len(entries) for _, entries in lists), default=0)

    def union(x: int) -> list[IlEntry]:
        seen, out = set(), []
        for _, entries in lists:
            for entry in entries[:x]:
                if entry.tx_id not in seen:
                    seen.add(entry.tx_id)
                    out.append(entry)
        return out

    if capacity is None:
        return union(longest)
    best = []
    for x in range(longest + 1):
        candidate = union(x)
        if sum(size_of(e) for e in candidate) > capacity:
            break
        best = candidate
    return best


SELECTORS = {"frequency": select_frequency, "prefix": select_prefix}


def select(lists: Lists, rule: str, capacity: Optional[int],
           size_of: Callable[[IlEntry], int],
           conflict_of: Callable[[IlEntry], Optional[str]] = lambda e: None) -> list[IlEntry]:
    return SELECTORS[rule](resolve_conflicts(lists, conflict_of), capacity, size_of)


# -- strategies --------------------------------------------------------------

def _payload_conflict(replica) -> Callable[[IlEntry], Optional[str]]:
    def conflict_of(entry: IlEntry):
        tx = replica.payload(entry)
        return tx.conflict_class if tx is not None else None
    return conflict_of


def _payload_size(replica) -> Callable[[IlEntry], int]:
    def size_of(entry: IlEntry):
        tx = replica.payload(entry)
        return tx.size_bytes if tx is not None else 0
    return size_of


class PlainVariant:
    """Leader proposes straight from its mempool; no inclusion lists."""

    name = "plain"
    uses_ils = False
    entry_form = FULL_TX
    block_carries_txs = True
    latency_increment = 0

    def __init__(self, params: VariantParams):
        self.params = params

    @property
    def threshold(self) -> int:
        return 0

    def make_il(self, replica, epoch, exclude=()) -> Optional[InclusionList]:
        return None

    def build_plain(self, leader, epoch: int, censor: frozenset = frozenset()) -> Block:
        pending = sorted(
            (e for tid, e in leader.eligible.items()
             if tid not in leader.committed and tid not in censor),
            key=lambda e: leader.order_key(e.tx_id),
        )
        txs = select([(leader.id, pending)], "prefix", self.params.block_capacity_bytes,
                     _payload_size(leader), _payload_conflict(leader))
        return Block(epoch, leader.id, tuple(txs))

    def validate(self, replica, proposal: Proposal) -> Verdict:
        block = proposal.block
        if block.il_evidence is not None:
            return Verdict(REJECT, "unexpected-evidence")
        if any(e.form != FULL_TX for e in block.txs):
            return Verdict(REJECT, "bad-entry-form")
        return check_block_invariants(replica, block, self.params)


def check_block_invariants(replica, block: Block, params: VariantParams) -> Verdict:
    ids = block.tx_ids
    if len(ids) != len(set(ids)):
        return Verdict(REJECT, "duplicate-tx")
    if any(tid in replica.committed for tid in ids):
        return Verdict(REJECT, "already-committed")
    classes = [c for c in (_payload_conflict(replica)(e) for e in block.txs) if c is not None]
    if len(classes) != len(set(classes)):
        return Verdict(REJECT, "conflicting-txs")
    if params.block_capacity_bytes is not None:
        if sum(_payload_size(replica)(e) for e in block.txs) > params.block_capacity_bytes:
            return Verdict(REJECT, "over-capacity")
    return ACCEPTED


class IlVariant:
    """Shared machinery for the variants that embed or reference lists."""

    name = "il"
    uses_ils = True
    entry_form = FULL_TX
    block_carries_txs = True
    latency_increment = 0   # in units of Δ, for the default epoch timeout

    def __init__(self, params: VariantParams):
        self.params = params

    @property
    def threshold(self) -> int:
        return self.params.n - self.params.f

    # replica side ---------------------------------------------------------

    def il_entry(self, replica, tx_id: str) -> Optional[IlEntry]:
        return replica.eligible.get(tx_id)

    def make_il(self, replica, epoch: int, exclude: Iterable[str] = ()) -> InclusionList:
        """Every eligible, uncommitted, uncensored transaction in (submit round, id) order."""
        skip = set(exclude) | replica.committed | replica.censored_ids
        tids = sorted((tid for tid in replica.eligible if tid not in skip), key=replica.order_key)
        return InclusionList.signed(replica.id, epoch, [self.il_entry(replica, t) for t in tids])

    # leader side ----------------------------------------------------------

    def counts_toward_threshold(self, il: InclusionList, leader_id: int) -> bool:
        return self.params.leader_il_counts or il.author != leader_id

    def well_formed(self, il: InclusionList, epoch: int) -> bool:
        return (il.epoch == epoch and 0 <= il.author < self.params.n and il.signature_ok()
                and il.well_formed() and all(e.form == self.entry_form for e in il.entries))

    def il_status(self, replica, il: InclusionList) -> str:
        """``ok`` when every entry resolves at ``replica``; ``pending`` or ``bad`` otherwise."""
        status = "ok"
        for entry in il.entries:
            s = replica.resolve(entry)
            if s == "bad":
                return "bad"
            if s == "pending":
                status = "pending"
        return status

    def usable_ils(self, leader, epoch: int) -> list[InclusionList]:
        """Collected lists that are resolvable now, in eligibility order."""
        usable = []
        for author, rec in leader.ils_for(epoch).items():
            if not self.well_formed(rec.il, epoch):
                continue
            if not self.counts_toward_threshold(rec.il, leader.id):
                continue
            if rec.eligible_round is None:
                if self.il_status(leader, rec.il) != "ok":
                    continue
                rec.eligible_round = leader.round
            usable.append(rec)
        usable.sort(key=lambda rec: (rec.eligible_round, rec.il.author))
        return [rec.il for rec in usable]

    def honest_selection(self, leader, epoch: int, usable: list[InclusionList]):
        if len(usable) < self.threshold:
            return None
        return usable[: self.threshold]

    def censor_selection(self, leader, epoch: int, usable: list[InclusionList], targets):
        clean = [il for il in usable if not set(il.tx_ids) & targets]
        if len(clean) < self.threshold:
            return None
        return clean[: self.threshold]

    def block_entry(self, replica, entry: IlEntry) -> IlEntry:
        return entry

    def derive_txs(self, replica, ils: Sequence[InclusionList]) -> tuple[IlEntry, ...]:
        lists = []
        for il in sorted(ils, key=lambda il: il.author):
            entries = [self.block_entry(replica, e) for e in il.entries
                       if e.tx_id not in replica.committed]
            lists.append((il.author, entries))
        return tuple(select(lists, self.params.selection_rule, self.capacity,
                            _payload_size(replica), _payload_conflict(replica)))

    @property
    def capacity(self) -> Optional[int]:
        return self.params.block_capacity_bytes

    def build(self, leader, epoch: int, chosen: Sequence[InclusionList]) -> Block:
        chosen = tuple(sorted(chosen, key=lambda il: il.author))
        return Block(epoch, leader.id, self.derive_txs(leader, chosen), chosen)

    # validator side -------------------------------------------------------

    def validate(self, replica, proposal: Proposal) -> Verdict:
        block = proposal.block
        ils = block.il_evidence
        if not isinstance(ils, tuple):
            return Verdict(REJECT, "missing-evidence")
        authors = [il.author for il in ils]
        if len(authors) != len(set(authors)):
            return Verdict(REJECT, "duplicate-signer")
        if not all(self.well_formed(il, block.epoch) for il in ils):
            return Verdict(REJECT, "malformed-il")
        counted = sum(1 for il in ils if self.counts_toward_threshold(il, block.leader))
        if counted < self.threshold:
            return Verdict(REJECT, "insufficient-ils")
        pending = False
        for il in ils:
            status = self.il_status(replica, il)
            if status == "bad":
                return Verdict(REJECT, "invalid-il")
            pending = pending or status == "pending"
        for entry in block.txs:
            if replica.resolve(entry) == "pending":
                pending = True
        if pending:
            return Verdict(PENDING, "unresolved")
        if block.txs != self.derive_txs(replica, ils):
            return Verdict(REJECT, "txs-mismatch")
        return check_block_invariants(replica, block, self.params)


class BaseIlVariant(IlVariant):
    """Lists carry full transactions and the block is just the lists."""

    name = "il-base"
    entry_form = FULL_TX
    block_carries_txs = False


class RbcIlVariant(IlVariant):
    """Lists carry hashes of transactions delivered by reliable broadcast."""

    name = "il-rbc"
    entry_form = TX_HASH
    latency_increment = 2


class GossipIlVariant(IlVariant):
    """Lists carry hashes of transactions received through gossip."""

    name = "il-gossip"
    entry_form = TX_HASH
    latency_increment = 2


class DaIlVariant(IlVariant):
    """Lists carry retrievability certificates.

    With ``allow_invalid_certs`` replicas list certificates without
    retrieving them and blocks carry certificates, so readers settle each
    one themselves. ``cert_only_blocks`` keeps the retrieval check but
    still writes certificates instead of payloads.
    """

    name = "il-da"
    entry_form = DA_CERT
    latency_increment = 2

    def block_entry(self, replica, entry: IlEntry) -> IlEntry:
        if self.params.cert_only_blocks or self.params.allow_invalid_certs:
            return entry
        tx = replica.payload(entry)
        return IlEntry.full(tx) if tx is not None else entry

    def validate(self, replica, proposal: Proposal) -> Verdict:
        block = proposal.block
        want = DA_CERT if (self.params.cert_only_blocks or self.params.allow_invalid_certs) else None
        if want and any(e.form != DA_CERT for e in block.txs):
            return Verdict(REJECT, "bad-entry-form")
        return super().validate(replica, proposal)


class LocalIlVariant(IlVariant):
    """Proposal names the lists it used; each listed replica checks its own."""

    name = "il-local"
    entry_form = FULL_TX

    @property
    def threshold(self) -> int:
        return 2 * self.params.f + 1

    @property
    def capacity(self) -> Optional[int]:
        return None

    def build(self, leader, epoch: int, chosen: Sequence[InclusionList],
              listed: Optional[Iterable[int]] = None) -> Block:
        chosen = tuple(sorted(chosen, key=lambda il: il.author))
        ids = frozenset(listed if listed is not None else (il.author for il in chosen))
        return Block(epoch, leader.id, self.derive_txs(leader, chosen), ListsUsed(ids))

    def censor_selection(self, leader, epoch: int, usable: list[InclusionList], targets):
        """Use only target-free lists and pad ``lists-used`` with ids that will object.

        Listed owners of a target-free list accept, unlisted replicas vote
        without being able to check, listed owners of a target-bearing list
        reject. Returns ``(used, listed)`` when that tally reaches 2f+1.
        """
        n, f = self.params.n, self.params.f
        clean = [il for il in usable if not set(il.tx_ids) & targets]
        clean_ids = [il.author for il in clean]
        listed = list(clean_ids)
        others = [r for r in range(n) if r not in clean_ids]
        while len(listed) < self.threshold and others:
            listed.append(others.pop(0))
        if len(listed) < self.threshold:
            return None
        accepts = len(clean_ids) + (n - len(listed))
        if accepts < 2 * f + 1:
            return None
        return clean, sorted(listed)

    def validate(self, replica, proposal: Proposal) -> Verdict:
        block = proposal.block
        used = block.il_evidence
        if not isinstance(used, ListsUsed):
            return Verdict(REJECT, "missing-lists-used")
        if len(used.ids) < self.threshold:
            return Verdict(REJECT, "insufficient-lists")
        if any(e.form != FULL_TX for e in block.txs):
            return Verdict(REJECT, "bad-entry-form")
        if replica.id in used.ids:
            own = replica.my_ils.get(block.epoch)
            if own is not None:
                in_block = set(block.tx_ids) | replica.committed
                if any(tid not in in_block for tid in own.tx_ids):
                    return Verdict(REJECT, "il-omitted")
        return check_block_invariants(replica, block, self.params)


VARIANT_CLASSES = {
    "plain": PlainVariant,
    "il-base": BaseIlVariant,
    "il-da": DaIlVariant,
    "il-rbc": RbcIlVariant,
    "il-gossip": GossipIlVariant,
    "il-local": LocalIlVariant,
}


def make_variant(name: str, params: VariantParams):
    try:
        return VARIANT_CLASSES[name](params)
    except KeyError:
        raise ValueError(f"unknown variant {name!r}") from None


def censoring_subsets(ils: Sequence[InclusionList], size: int, targets) -> list[tuple[int, ...]]:
    """Every ``size``-subset of lists (by author) that omits all targets."""
    return [tuple(il.author for il in combo)
            for combo in combinations(sorted(ils, key=lambda il: il.author), size)
            if not any(set(il.tx_ids) & targets for il in combo)]
