"""Adversary strategies and the censorship experiments built on them.

The per-message behaviour lives in the replica (lists omit censored
transactions, censoring leaders search for a target-free selection); this
module holds the pure decision helpers plus the two experiment drivers:
the bribery sweep for the economic model and the censorship probe for the
honest-malicious model.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

from .config import AdversaryConfig, ScenarioConfig, TxSpec, WorkloadConfig, scenario
from .consensus import Simulation, default_recipients, leader_of, run_scenario
from .metrics import censoring_blocks, committed_chain, obligated_epoch, proposal_period
from .model import InclusionList
from .variants import IL_VARIANTS, censoring_subsets

__all__ = [
    "AdversaryConfig", "BriberyOutcome", "BriberySweep", "CensorshipProbe",
    "apply_censoring", "bribery_sweep", "censor_leader_strategy", "max_censorship_probe",
]


def apply_censoring(il: InclusionList, targets) -> InclusionList:
    """The list a bribed or malicious author sends instead of ``il``."""
    targets = frozenset(targets)
    kept = [e for e in il.entries if e.tx_id not in targets]
    return InclusionList.signed(il.author, il.epoch, kept)


def censor_leader_strategy(ils: Sequence[InclusionList], targets, size: int,
                           fallback: str = "silent"):
    """A target-free ``size``-subset of ``ils`` (by author), else the fallback action."""
    subsets = censoring_subsets(ils, size, frozenset(targets))
    return subsets[0] if subsets else fallback


# -- economic model ----------------------------------------------------------

@dataclass(frozen=True)
class BriberyOutcome:
    variant: str
    bribed_count: int          # bribed replicas besides the leader
    leader_bribed: bool
    censored_epoch: bool       # the epoch committed a block without the target
    target_included: bool      # the epoch committed a block with the target
    epoch: int


@dataclass(frozen=True)
class BriberySweep:
    variant: str
    n: int
    f: int
    threshold: Optional[int]   # least bribed_count that censors, None if none does
    outcomes: tuple[BriberyOutcome, ...]


def _single_target(n: int, f: int, variant: str, seed: int, **overrides) -> ScenarioConfig:
    """One target transaction sent to every replica at round 0."""
    wl = WorkloadConfig(txs=(TxSpec(round=0, recipients=tuple(range(n))),))
    return scenario(n, f, variant, seed=seed, workload=wl, **overrides)


def _target_epoch_block(sim: Simulation, epoch: int) -> Optional[bool]:
    """Whether the committed block of ``epoch`` holds the target; None if no block."""
    ref = committed_chain(sim).get(epoch)
    if ref is None:
        return None
    return sim.log.tx_ids[0] in sim.log.blocks[ref].tx_ids


def bribery_sweep(variant: str, n: int, f: int, *, seed: int = 0,
                  leader_il_counts: bool = True, epochs: int = 4) -> BriberySweep:
    """Fewest bribed replicas (besides the leader) that censor the obligated epoch.

    An honest dry run fixes the epoch whose lists first carry the target;
    that epoch's leader is always bribed and ``k`` more replicas are added
    in id order. Bribed replicas omit the target from their lists and are
    otherwise honest; a bribed leader that finds no target-free selection
    proposes honestly.
    """
    if variant not in IL_VARIANTS:
        raise ValueError(f"bribery_sweep needs an inclusion-list variant, got {variant!r}")
    base = _single_target(n, f, variant, seed, leader_il_counts=leader_il_counts, epochs=epochs)
    dry = run_scenario(base)
    target_epoch = obligated_epoch(dry, dry.log.tx_ids[0])
    if target_epoch is None:
        raise RuntimeError("target never reached the lists in the honest run")
    leader = leader_of(target_epoch, n)
    others = [r for r in range(n) if r != leader]
    outcomes = []
    for k in range(n):
        adv = AdversaryConfig(bribed=tuple(sorted([leader] + others[:k])), targets=(0,),
                              leader_strategy="censor", fallback="honest", economic=True)
        sim = run_scenario(base.with_(adversary=adv, epochs=max(epochs, target_epoch + 2)))
        holds = _target_epoch_block(sim, target_epoch)
        outcomes.append(BriberyOutcome(variant, k, True, holds is False, holds is True,
                                       target_epoch))
    censored = [o.censored_epoch for o in outcomes]
    first = censored.index(True) if True in censored else None
    if first is not None:
        assert all(censored[first:]), f"censorship not monotone in bribes: {censored}"
    return BriberySweep(variant, n, f, first, tuple(outcomes))


# -- honest-malicious model --------------------------------------------------

@dataclass(frozen=True)
class CensorshipProbe:
    variant: str
    n: int
    f: int
    obligated_epoch: Optional[int]
    inclusion_epoch: Optional[int]
    censoring_blocks: int
    period_rounds: Optional[float]
    rounds: int
    malicious: tuple[int, ...]


def _probe_malicious(variant: str, n: int, f: int, target_epoch: int, recipients) -> tuple[int, ...]:
    if f == 0:
        return ()
    if variant == "plain":
        return tuple(sorted({leader_of(target_epoch + i, n) for i in range(f)}))
    leader = leader_of(target_epoch, n)
    picks = [leader] + [r for r in recipients if r != leader]
    picks += [r for r in range(n) if r not in picks]
    return tuple(sorted(picks[:f]))


def max_censorship_probe(variant: str, n: int, f: int, *, seed: int = 0,
                         epochs: int = 6, **overrides) -> CensorshipProbe:
    """Rounds the strongest implemented adversary delays one target transaction.

    The plain host gets ``f`` censoring leaders in consecutive epochs from
    the first epoch that could include the target. Inclusion-list variants
    get ``f`` malicious replicas: the leader of the obligated epoch plus
    replicas that received the target, all omitting it from their lists;
    the leader stays silent when it finds no target-free selection.
    """
    recipients = default_recipients(variant, 0, n, f)
    wl = WorkloadConfig(txs=(TxSpec(round=0, recipients=recipients),))
    base = scenario(n, f, variant, seed=seed, workload=wl, epochs=epochs, **overrides)
    dry = run_scenario(base)
    target = dry.log.tx_ids[0]
    target_epoch = obligated_epoch(dry, target)
    if target_epoch is None:
        raise RuntimeError("target never became includable in the honest run")
    malicious = _probe_malicious(variant, n, f, target_epoch, recipients)
    adv = AdversaryConfig(malicious=malicious, targets=(0,) if malicious else (),
                          leader_strategy="censor", fallback="silent")
    sim = run_scenario(base.with_(adversary=adv, epochs=max(epochs, target_epoch + 2 * f + 2)))
    blocks = censoring_blocks(sim, target)
    period = proposal_period(sim)
    included = [e for e, ref in sorted(committed_chain(sim).items())
                if target in sim.log.blocks[ref].tx_ids]
    rounds = round(blocks * period) if blocks else 0
    return CensorshipProbe(variant, n, f, obligated_epoch(sim, target),
                           included[0] if included else None, blocks, period, rounds, malicious)
