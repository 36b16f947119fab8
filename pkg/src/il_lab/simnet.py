"""Deterministic round-based message scheduler.

Time is a sequence of integer rounds. A message sent during round ``r`` is
delivered at some round in ``(r, r + bound]`` where the bound is the
post-GST cap ``delta_cap`` or, before GST, the configured ``pre_gst_cap``.
Which round inside that window is picked by a delay policy; the honest
policy always uses ``actual_delay``.
"""

from __future__ import annotations

import random
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Hashable, Iterable

NodeId = Hashable


class ConfigError(ValueError):
    """Raised for invalid simulation or scenario configuration."""


class SimTimeout(RuntimeError):
    """``run_until`` hit its round cap before the predicate held."""

    def __init__(self, round_index: int, trace_tail: list[Envelope]):
        super().__init__(f"predicate not satisfied by round {round_index}")
        self.round_index = round_index
        self.trace_tail = trace_tail


@dataclass(frozen=True)
class NetConfig:
    n: int
    f: int
    delta_cap: int = 1
    actual_delay: int = 1
    gst: int = 0
    pre_gst_cap: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.f < 0 or self.n < 1:
            raise ConfigError("n must be positive and f nonnegative")
        if self.n < 3 * self.f + 1:
            raise ConfigError("n ≥ 3f+1 violated")
        if not 1 <= self.actual_delay <= self.delta_cap:
            raise ConfigError("1 ≤ actual_delay ≤ delta_cap violated")
        if self.pre_gst_cap < 1:
            raise ConfigError("pre_gst_cap must be at least 1")
        if self.gst < 0:
            raise ConfigError("gst must be nonnegative")

    @property
    def quorum(self) -> int:
        return 2 * self.f + 1

    def bound(self, send_round: int) -> int:
        """Largest legal delay for a message sent at ``send_round``."""
        return self.delta_cap if send_round >= self.gst else self.pre_gst_cap

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class Envelope:
    id: int
    sender: NodeId
    recipient: NodeId
    kind: str
    payload_bytes: int
    send_round: int
    deliver_round: int
    payload: Any = field(default=None, repr=False, compare=False)

    def trace_record(self) -> dict:
        return {
            "id": self.id,
            "sender": self.sender,
            "recipient": self.recipient,
            "kind": self.kind,
            "payload_bytes": self.payload_bytes,
            "send_round": self.send_round,
            "deliver_round": self.deliver_round,
        }


# A delay policy maps (sender, recipient, kind, send_round, config, rng) to a
# delay in rounds. The scheduler clamps nothing: an illegal delay is a bug.
DelayPolicy = Callable[[NodeId, NodeId, str, int, NetConfig, random.Random], int]


def fair_delay(sender, recipient, kind, send_round, config, rng) -> int:
    return config.actual_delay


def max_delay(sender, recipient, kind, send_round, config, rng) -> int:
    return config.bound(send_round)


def random_delay(sender, recipient, kind, send_round, config, rng) -> int:
    return rng.randint(1, config.bound(send_round))


def targeted_delay(targets: Iterable[NodeId]) -> DelayPolicy:
    """Max delay on every link touching ``targets``, honest delay elsewhere."""
    victims = frozenset(targets)

    def policy(sender, recipient, kind, send_round, config, rng) -> int:
        if sender in victims or recipient in victims:
            return config.bound(send_round)
        return config.actual_delay

    return policy


NETWORK_STRATEGIES = {
    "fair": fair_delay,
    "max-delay": max_delay,
    "random-delay": random_delay,
}


def make_policy(name: str, targets: Iterable[NodeId] = ()) -> DelayPolicy:
    if name == "targeted-delay":
        return targeted_delay(targets)
    try:
        return NETWORK_STRATEGIES[name]
    except KeyError:
        raise ConfigError(f"unknown network_strategy {name!r}") from None


class SimNet:
    def __init__(
        self,
        config: NetConfig,
        policy: DelayPolicy = fair_delay,
        nodes: Iterable[NodeId] | None = None,
        keep_trace: bool = True,
    ):
        self.config = config
        self.policy = policy
        self.rng = random.Random(f"simnet:{config.seed}")
        self.nodes: set[NodeId] = set(range(config.n) if nodes is None else nodes)
        self.round = 0
        self.finished = False
        self.keep_trace = keep_trace
        self.trace: list[Envelope] = []
        self.on_send: list[Callable[[Envelope], None]] = []
        self._next_id = 0
        self._queue: dict[int, list[Envelope]] = defaultdict(list)
        self._in_flight = 0

    def register(self, *node_ids: NodeId) -> None:
        self.nodes.update(node_ids)

    @property
    def in_flight(self) -> int:
        return self._in_flight

    def send(self, sender: NodeId, recipient: NodeId, kind: str,
             payload_bytes: int, payload: Any = None) -> Envelope:
        if self.finished:
            raise RuntimeError("simulation already finished")
        for node in (sender, recipient):
            if node not in self.nodes:
                raise ConfigError(f"unknown node id {node!r}")
        if payload_bytes < 0:
            raise ValueError("payload_bytes must be nonnegative")
        delay = self.policy(sender, recipient, kind, self.round, self.config, self.rng)
        env = Envelope(
            id=self._next_id,
            sender=sender,
            recipient=recipient,
            kind=kind,
            payload_bytes=payload_bytes,
            send_round=self.round,
            deliver_round=self.round + delay,
            payload=payload,
        )
        self._check_delay(env)
        self._next_id += 1
        self._queue[env.deliver_round].append(env)
        self._in_flight += 1
        if self.keep_trace:
            self.trace.append(env)
        for hook in self.on_send:
            hook(env)
        return env

    def _check_delay(self, env: Envelope) -> None:
        delay = env.deliver_round - env.send_round
        if not 1 <= delay <= self.config.bound(env.send_round):
            raise AssertionError(
                f"illegal delay {delay} for envelope {env.id} sent at round {env.send_round}"
            )

    def step(self) -> list[Envelope]:
        self.round += 1
        due = self._queue.pop(self.round, [])
        due.sort(key=lambda e: (e.deliver_round, e.id))
        for env in due:
            self._check_delay(env)
        self._in_flight -= len(due)
        return due

    def run_until(self, predicate: Callable[[SimNet], bool], max_rounds: int | None = None,
                  on_deliver: Callable[[list[Envelope]], None] | None = None) -> int:
        """Step until ``predicate(self)`` holds; returns the stopping round.

        ``max_rounds`` is an absolute round cap. ``on_deliver`` receives each
        round's delivered batch, which is how a driver hooks node handlers in.
        """
        if predicate(self):
            return self.round
        if max_rounds is None:
            raise ValueError("run_until needs max_rounds when the predicate may never hold")
        while self.round < max_rounds:
            batch = self.step()
            if on_deliver is not None:
                on_deliver(batch)
            if predicate(self):
                return self.round
        raise SimTimeout(self.round, self.trace[-50:])

    def finish(self) -> None:
        self.finished = True

    def trace_lines(self) -> Iterable[dict]:
        for env in self.trace:
            yield env.trace_record()
