"""Scenario configuration: parsing, validation and serialization.

The on-disk format is a single JSON object. Every key is optional except
``net.n`` and ``net.f``; unknown keys are rejected so typos surface as
errors instead of silently running the default.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Optional, Union

from .dissemination import STORAGE_BEHAVIOURS, GossipConfig
from .metrics import SizeModel
from .simnet import ConfigError, NetConfig
from .variants import SELECTION_RULES, VARIANTS

LEADER_STRATEGIES = ("honest", "silent", "censor", "equivocate")
NETWORK_STRATEGIES = ("fair", "max-delay", "random-delay", "targeted-delay")
FALLBACKS = ("silent", "honest")
VOTE_POLICIES = ("honest", "any")


@dataclass(frozen=True)
class AdversaryConfig:
    malicious: tuple[int, ...] = ()
    bribed: tuple[int, ...] = ()
    targets: tuple[int, ...] = ()          # workload indices of censored transactions
    leader_strategy: str = "honest"        # for leaders in ``malicious`` or ``bribed``
    network_strategy: str = "fair"
    targeted_nodes: tuple[int, ...] = ()
    fallback: str = "silent"
    malicious_votes: str = "any"
    economic: bool = False                 # lets ``bribed`` exceed f


@dataclass(frozen=True)
class DaConfig:
    n_s: Optional[int] = None
    f_s: Optional[int] = None
    byzantine: dict = field(default_factory=dict)   # storage index -> behaviour

    def __post_init__(self):
        try:
            normalized = {int(k): v for k, v in self.byzantine.items()}
        except (TypeError, ValueError):
            raise ConfigError("da.byzantine: keys must be storage indices") from None
        object.__setattr__(self, "byzantine", normalized)


@dataclass(frozen=True)
class TxSpec:
    round: int
    recipients: Optional[tuple[int, ...]] = None
    size: Optional[int] = None
    conflict: Optional[str] = None


@dataclass(frozen=True)
class WorkloadConfig:
    tx_count: int = 4
    tx_size: Optional[int] = None        # defaults to size_model.tx_bytes
    start_round: int = 0
    interval: int = 1
    per_round: int = 1
    recipients: Union[str, tuple[int, ...]] = "default"   # "default" | "all" | explicit ids
    txs: tuple[TxSpec, ...] = ()         # explicit schedule; overrides the generator


@dataclass(frozen=True)
class ScenarioConfig:
    net: NetConfig
    variant: str = "plain"
    selection_rule: str = "frequency"
    block_capacity_bytes: Optional[int] = None
    leader_il_counts: bool = True
    cert_only_blocks: bool = False
    allow_invalid_certs: bool = False
    da: DaConfig = DaConfig()
    gossip: GossipConfig = GossipConfig()
    adversary: AdversaryConfig = AdversaryConfig()
    workload: WorkloadConfig = WorkloadConfig()
    epochs: int = 4
    epoch_timeout: Optional[int] = None
    size_model: SizeModel = SizeModel()
    output_dir: str = "out"
    max_rounds: Optional[int] = None
    name: str = ""

    def __post_init__(self):
        validate(self)

    @property
    def n_s(self) -> int:
        return self.da.n_s if self.da.n_s is not None else self.net.n

    @property
    def f_s(self) -> int:
        return self.da.f_s if self.da.f_s is not None else self.net.f

    def with_(self, **changes) -> ScenarioConfig:
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return to_dict(self)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def validate(cfg: ScenarioConfig) -> None:
    n, f = cfg.net.n, cfg.net.f
    if cfg.variant not in VARIANTS:
        raise ConfigError(f"variant: unknown variant {cfg.variant!r}")
    if cfg.selection_rule not in SELECTION_RULES:
        raise ConfigError(f"selection_rule: unknown rule {cfg.selection_rule!r}")
    if cfg.block_capacity_bytes is not None and cfg.block_capacity_bytes <= 0:
        raise ConfigError("block_capacity_bytes: must be positive")
    if cfg.epochs < 1:
        raise ConfigError("epochs: must be at least 1")
    if cfg.epoch_timeout is not None and cfg.epoch_timeout < 1:
        raise ConfigError("epoch_timeout: must be positive")
    adv = cfg.adversary
    for key in ("malicious", "bribed", "targeted_nodes"):
        ids = getattr(adv, key)
        if any(not 0 <= r < n for r in ids):
            raise ConfigError(f"adversary.{key}: replica ids must lie in [0, n)")
    if len(set(adv.malicious)) > f:
        raise ConfigError("adversary.malicious: more than f malicious replicas")
    if not adv.economic and len(set(adv.bribed) | set(adv.malicious)) > f:
        raise ConfigError("adversary.bribed: more than f faulty replicas outside the economic model")
    if adv.leader_strategy not in LEADER_STRATEGIES:
        raise ConfigError(f"adversary.leader_strategy: unknown strategy {adv.leader_strategy!r}")
    if adv.network_strategy not in NETWORK_STRATEGIES:
        raise ConfigError(f"adversary.network_strategy: unknown strategy {adv.network_strategy!r}")
    if adv.fallback not in FALLBACKS:
        raise ConfigError(f"adversary.fallback: unknown fallback {adv.fallback!r}")
    if adv.malicious_votes not in VOTE_POLICIES:
        raise ConfigError(f"adversary.malicious_votes: unknown policy {adv.malicious_votes!r}")
    wl = cfg.workload
    if wl.tx_count < 0 or wl.interval < 1 or wl.per_round < 1 or wl.start_round < 0:
        raise ConfigError("workload: tx_count ≥ 0, interval ≥ 1, per_round ≥ 1, start_round ≥ 0")
    if any(not 0 <= t < max(wl.tx_count, len(wl.txs)) for t in adv.targets):
        raise ConfigError("adversary.targets: indices must name workload transactions")
    if isinstance(wl.recipients, str):
        if wl.recipients not in ("default", "all"):
            raise ConfigError("workload.recipients: expected 'default', 'all' or a list of ids")
    elif not wl.recipients or any(not 0 <= r < n for r in wl.recipients):
        raise ConfigError("workload.recipients: replica ids must lie in [0, n)")
    for spec in wl.txs:
        if spec.round < 0 or (spec.recipients is not None
                              and any(not 0 <= r < n for r in spec.recipients)):
            raise ConfigError("workload.txs: bad round or recipient id")
    n_s, f_s = cfg.n_s, cfg.f_s
    if n_s < 3 * f_s + 1:
        raise ConfigError("da: n_s ≥ 3f_s+1 violated")
    bad = cfg.da.byzantine
    if len(bad) > f_s or any(not 0 <= k < n_s or v not in STORAGE_BEHAVIOURS for k, v in bad.items()):
        raise ConfigError("da.byzantine: at most f_s storage nodes with known behaviours")
    try:
        cfg.gossip.check(n)
    except ValueError as exc:
        raise ConfigError(f"gossip: {exc}") from None


# -- (de)serialization -------------------------------------------------------

_SECTIONS = {
    "net": NetConfig,
    "da": DaConfig,
    "gossip": GossipConfig,
    "adversary": AdversaryConfig,
    "workload": WorkloadConfig,
    "size_model": SizeModel,
}


def _plain(value):
    if isinstance(value, tuple):
        return [_plain(v) for v in value]
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    return value


def to_dict(cfg: ScenarioConfig) -> dict:
    out = {}
    for f in fields(cfg):
        value = getattr(cfg, f.name)
        if f.name in _SECTIONS:
            value = {k: _plain(v) for k, v in asdict(value).items()}
        out[f.name] = _plain(value)
    return out


def _build(cls, data: dict, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected an object")
    known = {f.name: f for f in fields(cls)}
    unknown = sorted(set(data) - set(known))
    if unknown:
        raise ConfigError(f"{where}.{unknown[0]}: unknown key")
    kwargs = {}
    for key, value in data.items():
        if isinstance(value, list):
            if cls is WorkloadConfig and key == "txs":
                value = tuple(_build(TxSpec, dict(v, recipients=tuple(v["recipients"])
                                                  if v.get("recipients") is not None else None),
                                     f"{where}.txs") for v in value)
            else:
                value = tuple(value)
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except ConfigError as exc:
        raise ConfigError(f"{where}: {exc}") from None
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


def from_dict(data: dict) -> ScenarioConfig:
    if not isinstance(data, dict):
        raise ConfigError("config: expected a JSON object")
    if "net" not in data:
        raise ConfigError("net: missing required section")
    kwargs = {}
    top = {f.name for f in fields(ScenarioConfig)}
    for key, value in data.items():
        if key not in top:
            raise ConfigError(f"{key}: unknown key")
        if key in _SECTIONS:
            value = _build(_SECTIONS[key], value, key)
        kwargs[key] = value
    return ScenarioConfig(**kwargs)


def loads(text: str) -> ScenarioConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config: invalid JSON ({exc})") from None
    return from_dict(data)


def load(path: Union[str, Path]) -> ScenarioConfig:
    return loads(Path(path).read_text())


def scenario(n: int, f: int, variant: str = "plain", *, seed: int = 0, delta: int = 1,
             gst: int = 0, pre_gst_cap: int = 10, **overrides: Any) -> ScenarioConfig:
    """Shorthand used by sweeps and tests."""
    net = NetConfig(n=n, f=f, delta_cap=max(delta, overrides.pop("delta_cap", delta)),
                    actual_delay=delta, gst=gst, pre_gst_cap=pre_gst_cap, seed=seed)
    return ScenarioConfig(net=net, variant=variant, **overrides)
