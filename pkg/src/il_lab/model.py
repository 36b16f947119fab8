"""Domain records shared by the consensus host, the IL variants and the
dissemination layers.

Signatures are opaque tags: a keyed digest over the signer id and message
digest. Nothing outside :func:`sign` can produce a tag that passes
:func:`verify`, which is all the protocols need.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Hashable, Optional, Union

NodeId = Hashable

FULL_TX = "full-tx"
TX_HASH = "tx-hash"
DA_CERT = "da-cert"
ENTRY_FORMS = (FULL_TX, TX_HASH, DA_CERT)

_KEYRING_SALT = b"il-lab-keyring"


def digest(*parts) -> str:
    return hashlib.sha256(repr(parts).encode()).hexdigest()


def sign(signer: NodeId, message_digest: str) -> str:
    key = hashlib.sha256(_KEYRING_SALT + repr(signer).encode()).digest()
    return hashlib.sha256(key + message_digest.encode()).hexdigest()[:32]


def verify(signer: NodeId, message_digest: str, tag: str) -> bool:
    return tag == sign(signer, message_digest)


@dataclass(frozen=True)
class Transaction:
    client: str
    nonce: int
    size_bytes: int
    conflict_class: Optional[str] = None
    submit_round: int = field(default=0, compare=False)
    body: str = ""

    @property
    def tx_id(self) -> str:
        return digest("tx", self.client, self.nonce, self.size_bytes,
                      self.conflict_class, self.body)[:16]

    @property
    def order_key(self) -> tuple[int, str]:
        return (self.submit_round, self.tx_id)


@dataclass(frozen=True)
class RetrievabilityCertificate:
    content_hash: str
    acks: frozenset  # of (storage node id, signature tag)

    def ack_digest(self) -> str:
        return digest("da-ack", self.content_hash)

    def valid_signers(self) -> set:
        d = self.ack_digest()
        return {node for node, tag in self.acks if verify(node, d, tag)}

    def is_valid(self, n_s: int, f_s: int) -> bool:
        return len(self.valid_signers()) >= n_s - f_s

    @property
    def key(self) -> str:
        return digest("cert", self.content_hash, tuple(sorted(self.acks, key=repr)))[:16]


EntryRef = Union[Transaction, str, RetrievabilityCertificate]


@dataclass(frozen=True)
class IlEntry:
    form: str
    ref: EntryRef

    @property
    def tx_id(self) -> str:
        if self.form == FULL_TX:
            return self.ref.tx_id
        if self.form == TX_HASH:
            return self.ref
        return self.ref.content_hash

    @property
    def key(self) -> str:
        return self.ref.key if self.form == DA_CERT else self.tx_id

    @classmethod
    def full(cls, tx: Transaction) -> IlEntry:
        return cls(FULL_TX, tx)

    @classmethod
    def hashed(cls, tx_id: str) -> IlEntry:
        return cls(TX_HASH, tx_id)

    @classmethod
    def cert(cls, cert: RetrievabilityCertificate) -> IlEntry:
        return cls(DA_CERT, cert)


@dataclass(frozen=True)
class InclusionList:
    author: int
    epoch: int
    entries: tuple[IlEntry, ...]
    sig: str = ""

    def body_digest(self) -> str:
        return digest("il", self.author, self.epoch, tuple(e.key for e in self.entries))

    @classmethod
    def signed(cls, author: int, epoch: int, entries) -> InclusionList:
        entries = tuple(entries)
        unsigned = cls(author, epoch, entries)
        return cls(author, epoch, entries, sign(author, unsigned.body_digest()))

    def signature_ok(self) -> bool:
        return verify(self.author, self.body_digest(), self.sig)

    def well_formed(self) -> bool:
        keys = [e.key for e in self.entries]
        forms = {e.form for e in self.entries}
        return len(keys) == len(set(keys)) and len(forms) <= 1

    @property
    def tx_ids(self) -> list[str]:
        return [e.tx_id for e in self.entries]


@dataclass(frozen=True)
class ListsUsed:
    ids: frozenset


@dataclass(frozen=True)
class Block:
    epoch: int
    leader: int
    txs: tuple[IlEntry, ...]
    il_evidence: Union[tuple[InclusionList, ...], ListsUsed, None] = None
    nonce: int = 0

    @property
    def ref(self) -> str:
        if isinstance(self.il_evidence, tuple):
            evidence = tuple((il.author, il.body_digest()) for il in self.il_evidence)
        elif isinstance(self.il_evidence, ListsUsed):
            evidence = tuple(sorted(self.il_evidence.ids))
        else:
            evidence = None
        return digest("block", self.epoch, self.leader,
                      tuple(e.key for e in self.txs), evidence, self.nonce)[:20]

    @property
    def tx_ids(self) -> list[str]:
        return [e.tx_id for e in self.txs]

    @property
    def evidence_ils(self) -> tuple[InclusionList, ...]:
        return self.il_evidence if isinstance(self.il_evidence, tuple) else ()


@dataclass(frozen=True)
class Proposal:
    block: Block
    leader_sig: str

    @classmethod
    def signed(cls, block: Block) -> Proposal:
        return cls(block, sign(block.leader, block.ref))

    def signature_ok(self) -> bool:
        return verify(self.block.leader, self.block.ref, self.leader_sig)


@dataclass(frozen=True)
class Vote:
    epoch: int
    phase: int
    block_ref: str
    voter: int
    sig: str

    @classmethod
    def signed(cls, epoch: int, phase: int, block_ref: str, voter: int) -> Vote:
        return cls(epoch, phase, block_ref, voter,
                   sign(voter, digest("vote", epoch, phase, block_ref)))

    def signature_ok(self) -> bool:
        return verify(self.voter, digest("vote", self.epoch, self.phase, self.block_ref), self.sig)


@dataclass(frozen=True)
class QuorumCertificate:
    epoch: int
    phase: int
    block_ref: str
    voters: frozenset

    def is_valid(self, f: int) -> bool:
        return len(self.voters) >= 2 * f + 1
