"""Transaction dissemination substrates.

Each engine is a small state machine that consumes one inbound message and
returns the messages it wants sent as ``(recipient, kind, payload)`` tuples,
with ``ALL`` standing for every replica. Keeping them free of the network
lets the exhaustive checks drive them message by message.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Hashable, Optional

from .model import RetrievabilityCertificate, Transaction, sign

NodeId = Hashable
ALL = "*"


class _Bottom:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "⊥"

    def __bool__(self):
        return False


BOT = _Bottom()


# -- reliable broadcast ------------------------------------------------------

@dataclass
class RbcInstance:
    tag: tuple
    sent_echo: bool = False
    sent_ready: bool = False
    delivered: Optional[Transaction] = None
    echo_from: dict = field(default_factory=dict)   # value key -> set of senders
    ready_from: dict = field(default_factory=dict)
    values: dict = field(default_factory=dict)      # value key -> Transaction

    def echo_count(self, key) -> int:
        return len(self.echo_from.get(key, ()))

    def ready_count(self, key) -> int:
        return len(self.ready_from.get(key, ()))


class RbcEngine:
    """Bracha broadcast at one replica.

    ECHO on the first SEND from the tag's originator, READY on 2f+1 ECHOs or
    f+1 READYs for a value, deliver on 2f+1 READYs. A sender counts at most
    once per (phase, value).
    """

    def __init__(self, node_id: NodeId, n: int, f: int):
        self.node_id = node_id
        self.n = n
        self.f = f
        self.instances: dict[tuple, RbcInstance] = {}

    def instance(self, tag) -> RbcInstance:
        inst = self.instances.get(tag)
        if inst is None:
            inst = self.instances[tag] = RbcInstance(tag)
        return inst

    def _ready(self, inst: RbcInstance, key) -> list:
        inst.sent_ready = True
        return [(ALL, "rbc-ready", (inst.tag, inst.values[key]))]

    def _maybe_deliver(self, inst: RbcInstance, key) -> Optional[Transaction]:
        if inst.delivered is None and inst.ready_count(key) >= 2 * self.f + 1:
            inst.delivered = inst.values[key]
            return inst.delivered
        return None

    def handle(self, kind: str, sender: NodeId, tag, value: Transaction):
        """Returns ``(outbound, delivered_value_or_None)``."""
        inst = self.instance(tag)
        key = value.tx_id
        inst.values.setdefault(key, value)
        out: list = []
        if kind == "rbc-send":
            if sender != tag[0] or inst.sent_echo:
                return out, None
            inst.sent_echo = True
            out.append((ALL, "rbc-echo", (tag, value)))
            return out, None
        if kind == "rbc-echo":
            inst.echo_from.setdefault(key, set()).add(sender)
            if not inst.sent_ready and inst.echo_count(key) >= 2 * self.f + 1:
                out += self._ready(inst, key)
            return out, None
        if kind == "rbc-ready":
            inst.ready_from.setdefault(key, set()).add(sender)
            if not inst.sent_ready and inst.ready_count(key) >= self.f + 1:
                out += self._ready(inst, key)
            return out, self._maybe_deliver(inst, key)
        raise ValueError(f"not an rbc message: {kind}")


def rbc_broadcast(tx: Transaction, client: str, tag=None) -> tuple[tuple, list]:
    """Client side of the broadcast: one SEND to every replica."""
    tag = tag if tag is not None else (client, tx.tx_id)
    return tag, [(ALL, "rbc-send", (tag, tx))]


# -- gossip ------------------------------------------------------------------

@dataclass(frozen=True)
class GossipConfig:
    fanout: int = 2
    anti_entropy_period: int = 2
    forward_once: bool = True

    def check(self, n: int) -> None:
        if not 1 <= self.fanout <= max(1, n - 1):
            raise ValueError("gossip fanout must lie in [1, n-1]")
        if self.anti_entropy_period < 1:
            raise ValueError("anti_entropy_period must be positive")


class GossipEngine:
    """Push gossip with periodic digest exchange.

    Forward targets come from a per-replica seeded RNG. The anti-entropy
    partner walks the peer list round-robin, so every pair of replicas has
    synced within ``(n - 1) * period`` rounds regardless of the RNG.
    """

    def __init__(self, node_id: int, peers: list[int], config: GossipConfig, seed: int):
        self.node_id = node_id
        self.peers = sorted(peers)
        self.config = config
        self.rng = random.Random(f"gossip:{seed}:{node_id}")
        self.known: dict[str, Transaction] = {}
        self._ticks = 0

    def on_tx(self, tx: Transaction) -> tuple[list, bool]:
        new = tx.tx_id not in self.known
        if new:
            self.known[tx.tx_id] = tx
        if not new and self.config.forward_once:
            return [], False
        k = min(self.config.fanout, len(self.peers))
        return [(p, "gossip-fwd", tx) for p in sorted(self.rng.sample(self.peers, k))], new

    def tick(self, round_index: int) -> list:
        if not self.peers or round_index == 0 or round_index % self.config.anti_entropy_period:
            return []
        partner = self.peers[(self.node_id + self._ticks) % len(self.peers)]
        self._ticks += 1
        return [(partner, "gossip-digest", frozenset(self.known))]

    def on_digest(self, sender: int, have: frozenset) -> list:
        missing = tuple(tx for tid, tx in sorted(self.known.items()) if tid not in have)
        return [(sender, "gossip-pull", missing)] if missing else []

    def on_want(self, sender: int, wanted) -> list:
        found = tuple(self.known[t] for t in sorted(wanted) if t in self.known)
        return [(sender, "gossip-pull", found)] if found else []


# -- data availability -------------------------------------------------------

STORAGE_BEHAVIOURS = ("honest", "silent", "lie", "withhold")


class StorageNode:
    """Replication-based DA storage server.

    ``silent`` never acks or answers, ``withhold`` acks but never answers,
    ``lie`` acks and answers every query with a fabricated transaction.
    """

    def __init__(self, node_id: str, behaviour: str = "honest"):
        if behaviour not in STORAGE_BEHAVIOURS:
            raise ValueError(f"unknown storage behaviour {behaviour!r}")
        self.node_id = node_id
        self.behaviour = behaviour
        self.data: dict[str, Transaction] = {}

    def on_disperse(self, client, tx: Transaction) -> list:
        if self.behaviour == "silent":
            return []
        self.data[tx.tx_id] = tx
        cert_digest = RetrievabilityCertificate(tx.tx_id, frozenset()).ack_digest()
        return [(client, "da-ack", (tx.tx_id, self.node_id, sign(self.node_id, cert_digest)))]

    def on_query(self, reader, content_hash: str) -> list:
        if self.behaviour in ("silent", "withhold"):
            return []
        if self.behaviour == "lie":
            fake = Transaction(client=f"forged-{self.node_id}", nonce=0, size_bytes=1,
                               body=content_hash)
            return [(reader, "da-response", (content_hash, fake))]
        tx = self.data.get(content_hash)
        return [(reader, "da-response", (content_hash, tx))]


class Disperser:
    """Client half of ``disperse``: collects acks into a certificate."""

    def __init__(self, n_s: int, f_s: int):
        self.n_s = n_s
        self.f_s = f_s
        self.acks: dict[str, dict] = {}
        self.done: dict[str, RetrievabilityCertificate] = {}

    def start(self, tx: Transaction, storage: list) -> list:
        self.acks.setdefault(tx.tx_id, {})
        return [(s, "da-disperse", tx) for s in storage]

    def on_ack(self, content_hash: str, node, tag: str) -> Optional[RetrievabilityCertificate]:
        if content_hash in self.done or content_hash not in self.acks:
            return None
        self.acks[content_hash][node] = tag
        cert = RetrievabilityCertificate(content_hash, frozenset(self.acks[content_hash].items()))
        if len(cert.valid_signers()) >= self.n_s - self.f_s:
            self.done[content_hash] = cert
            return cert
        return None


@dataclass
class _Retrieval:
    cert: RetrievabilityCertificate
    started: int
    matches: set = field(default_factory=set)


class DaReader:
    """Reader half of ``retrieve``.

    A structurally invalid certificate resolves to ``BOT`` at once. Otherwise
    the reader queries every storage node and resolves once f_s + 1 responses
    carry a payload hashing to the certificate's content hash.
    """

    def __init__(self, n_s: int, f_s: int, storage: list):
        self.n_s = n_s
        self.f_s = f_s
        self.storage = list(storage)
        self.results: dict[str, object] = {}
        self.pending: dict[str, _Retrieval] = {}
        self.durations: dict[str, int] = {}

    def lookup(self, cert: RetrievabilityCertificate):
        """The settled result, or None while unknown/pending."""
        return self.results.get(cert.key)

    def start(self, cert: RetrievabilityCertificate, round_index: int) -> list:
        if cert.key in self.results or cert.key in self.pending:
            return []
        if not cert.is_valid(self.n_s, self.f_s):
            self.results[cert.key] = BOT
            self.durations[cert.key] = 0
            return []
        self.pending[cert.key] = _Retrieval(cert, round_index)
        return [(s, "da-query", cert.content_hash) for s in self.storage]

    def on_response(self, responder, content_hash: str, tx, round_index: int) -> list:
        """Returns ``[(cert, tx), ...]`` for retrievals settled by this response."""
        settled = []
        if tx is None or tx.tx_id != content_hash:
            return settled
        for key, r in list(self.pending.items()):
            if r.cert.content_hash != content_hash:
                continue
            r.matches.add(responder)
            if len(r.matches) >= self.f_s + 1:
                self.results[key] = tx
                self.durations[key] = round_index - r.started
                del self.pending[key]
                settled.append((r.cert, tx))
        return settled
