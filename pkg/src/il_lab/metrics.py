"""Round, message and byte accounting plus the comparison report."""

from __future__ import annotations

import csv
import io
import json
import math
from collections import Counter, defaultdict
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .model import DA_CERT, FULL_TX, TX_HASH, Block, IlEntry, InclusionList, ListsUsed
from .simnet import Envelope


@dataclass(frozen=True)
class SizeModel:
    tx_bytes: int = 250
    hash_bytes: int = 32
    sig_bytes: int = 64
    cert_bytes: Optional[int] = None
    il_entry_overhead_bytes: int = 0
    id_bytes: int = 4

    def __post_init__(self):
        for name in ("tx_bytes", "hash_bytes", "sig_bytes", "id_bytes"):
            if getattr(self, name) <= 0:
                raise ValueError(f"size_model.{name} must be positive")
        if self.cert_bytes is not None and self.cert_bytes <= 0:
            raise ValueError("size_model.cert_bytes must be positive")
        if self.il_entry_overhead_bytes < 0:
            raise ValueError("size_model.il_entry_overhead_bytes must be nonnegative")

    def with_storage(self, n_s: int, f_s: int) -> SizeModel:
        if self.cert_bytes is not None:
            return self
        return SizeModel(self.tx_bytes, self.hash_bytes, self.sig_bytes,
                         self.hash_bytes + (n_s - f_s) * self.sig_bytes,
                         self.il_entry_overhead_bytes, self.id_bytes)

    def entry_bytes(self, entry: IlEntry) -> int:
        if entry.form == FULL_TX:
            base = entry.ref.size_bytes
        elif entry.form == TX_HASH:
            base = self.hash_bytes
        else:
            base = self.cert_bytes
        return base + self.il_entry_overhead_bytes

    def il_bytes(self, il: InclusionList) -> int:
        return sum(self.entry_bytes(e) for e in il.entries) + self.sig_bytes

    def block_bytes(self, block: Block, include_txs: bool = True) -> int:
        size = self.sig_bytes
        if include_txs:
            size += sum(self.entry_bytes(e) for e in block.txs)
        if isinstance(block.il_evidence, tuple):
            size += sum(self.il_bytes(il) for il in block.il_evidence)
        elif isinstance(block.il_evidence, ListsUsed):
            size += len(block.il_evidence.ids) * self.id_bytes
        return size

    @property
    def vote_bytes(self) -> int:
        return self.sig_bytes


COMPONENT_OF_KIND = {
    "tx": "client",
    "il": "il",
    "proposal": "proposal",
    "vote1": "vote",
    "vote2": "vote",
    "commit-query": "vote",
    "commit-cert": "vote",
    "rbc-send": "rbc",
    "rbc-echo": "rbc",
    "rbc-ready": "rbc",
    "gossip-fwd": "gossip",
    "gossip-digest": "gossip",
    "gossip-pull": "gossip",
    "gossip-want": "gossip",
    "da-disperse": "da",
    "da-ack": "da",
    "da-cert": "da",
    "da-query": "da",
    "da-response": "da",
}


class Accounting:
    """Per-kind message and byte counters fed from every send.

    A piggybacked inclusion list rides inside a vote-2 envelope; its bytes
    are booked under the ``il`` component so the vote cost stays comparable
    with the plain host.
    """

    def __init__(self, size_model: SizeModel):
        self.size_model = size_model
        self.messages_by_kind: Counter = Counter()
        self.bytes_by_kind: Counter = Counter()
        self.bytes_by_component: Counter = Counter()

    def record(self, env: Envelope) -> None:
        self.messages_by_kind[env.kind] += 1
        self.bytes_by_kind[env.kind] += env.payload_bytes
        component = COMPONENT_OF_KIND.get(env.kind, "other")
        if env.kind == "vote2" and env.payload is not None and env.payload[1] is not None:
            il_part = self.size_model.il_bytes(env.payload[1])
            self.bytes_by_component["il"] += il_part
            self.bytes_by_component["vote"] += env.payload_bytes - il_part
        else:
            self.bytes_by_component[component] += env.payload_bytes

    @property
    def messages_total(self) -> int:
        return sum(self.messages_by_kind.values())

    @property
    def bytes_total(self) -> int:
        return sum(self.bytes_by_kind.values())

    @property
    def proposal_path_bytes(self) -> int:
        """Bytes spent moving proposals and inclusion lists."""
        return self.bytes_by_component["proposal"] + self.bytes_by_component["il"]


# -- report ------------------------------------------------------------------

@dataclass(frozen=True)
class MetricsReport:
    """One row of the comparison table.

    Latencies are in rounds measured with the actual delay δ; the Δ-bound
    columns (``delta_cap``, ``epoch_timeout_rounds``) sit alongside them.
    Fields that do not apply to a variant are ``None``.
    """

    scenario: str
    variant: str
    n: int
    f: int
    seed: int
    delta: int
    delta_cap: int
    epoch_timeout_rounds: int
    proposal_latency_rounds: Optional[int]
    end_to_end_latency_rounds: Optional[int]
    proposal_period_rounds: Optional[float]
    max_tx_censorship_rounds: Optional[int]
    censoring_blocks: Optional[int]
    messages_total: int
    bytes_total: int
    proposal_path_bytes: int
    bytes_incremental_vs_plain: Optional[int]
    proposal_bytes_incremental_vs_plain: Optional[int]
    duplication_factor: Optional[float]
    committed_blocks: int
    committed_txs: int
    t_prop: Optional[int]
    t_disp: Optional[int]
    t_ret: Optional[int]
    status: str = "ok"
    error: str = ""

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def failed(cls, scenario: str, variant: str, n: int, f: int, seed: int, error: str) -> MetricsReport:
        blank = {fl.name: None for fl in fields(cls)}
        blank.update(scenario=scenario, variant=variant, n=n, f=f, seed=seed, delta=0, delta_cap=0,
                     epoch_timeout_rounds=0, messages_total=0, bytes_total=0,
                     proposal_path_bytes=0, committed_blocks=0, committed_txs=0,
                     status="failed", error=error)
        return cls(**blank)

    @classmethod
    def from_dict(cls, data: dict) -> MetricsReport:
        known = {fl.name for fl in fields(cls)}
        return cls(**{k: v for k, v in data.items() if k in known})


COLUMNS = tuple(fl.name for fl in fields(MetricsReport))


@dataclass
class TxTiming:
    tx_id: str
    submit_round: int
    includable_round: Optional[int]
    proposal_round: Optional[int]
    commit_round: Optional[int]
    epoch: Optional[int]

    def proposal_latency(self, delta: int) -> Optional[int]:
        """Critical-path latency: commit minus submission, less the first hop and queueing."""
        if self.commit_round is None or self.includable_round is None:
            return None
        queueing = max(0, self.proposal_round - self.includable_round)
        return self.commit_round - self.submit_round - delta - queueing

    @property
    def end_to_end(self) -> Optional[int]:
        return None if self.commit_round is None else self.commit_round - self.submit_round


def committed_chain(sim) -> dict[int, str]:
    """epoch -> ref committed by honest replicas."""
    chain = {}
    for epoch, by in sorted(sim.log.honest_commits().items()):
        chain[epoch] = min(ref for ref, _ in by.values())
    return chain


def quorum_commit_round(sim, epoch: int, ref: str) -> Optional[int]:
    rounds = sorted(rnd for _, e, r, rnd in sim.log.commits if e == epoch and r == ref)
    q = 2 * sim.cfg.net.f + 1
    return rounds[q - 1] if len(rounds) >= q else None


def tx_timings(sim) -> dict[str, TxTiming]:
    log = sim.log
    chain = committed_chain(sim)
    proposed_at = {ref: rnd for _, _, ref, rnd in log.proposals}
    included: dict[str, tuple[int, str]] = {}
    for epoch, ref in chain.items():
        for tid in log.blocks[ref].tx_ids:
            included.setdefault(tid, (epoch, ref))
    out = {}
    for tid, (_, submit, _) in sorted(log.submits.items(), key=lambda kv: (kv[1][1], kv[0])):
        honest_elig = [r for node, r in log.eligible.get(tid, {}).items() if node in log.honest]
        includable = max(honest_elig) if honest_elig else None
        epoch = ref = None
        if tid in included:
            epoch, ref = included[tid]
        out[tid] = TxTiming(
            tx_id=tid, submit_round=submit, includable_round=includable,
            proposal_round=proposed_at.get(ref) if ref else None,
            commit_round=quorum_commit_round(sim, epoch, ref) if ref else None,
            epoch=epoch,
        )
    return out


def obligated_epoch(sim, tx_id: str) -> Optional[int]:
    """First epoch in which the protocol obliges the leader to include ``tx_id``.

    Inclusion-list variants: the first epoch whose honest lists carrying the
    transaction reach the censorship-resistance requirement (f+1, or 2f+1 for
    the local variant). Plain host: the first epoch whose leader held the
    transaction in a round before it entered the epoch.
    """
    log, n, f = sim.log, sim.cfg.net.n, sim.cfg.net.f
    if not sim.variant.uses_ils:
        held = log.eligible.get(tx_id, {})
        for replica, epoch, rnd, _ in sorted(log.entries, key=lambda e: (e[1], e[2], e[0])):
            if replica == epoch % n and replica in held and held[replica] < rnd:
                return epoch
        return None
    need = 2 * f + 1 if sim.variant.name == "il-local" else f + 1
    counts: Counter = Counter()
    for epoch, author, _, tids in log.ils:
        if author in log.honest and tx_id in tids:
            counts[epoch] += 1
    hits = sorted(e for e, c in counts.items() if c >= need)
    return hits[0] if hits else None


def censoring_blocks(sim, tx_id: str) -> int:
    """Committed blocks from the obligated epoch on that still lack ``tx_id``."""
    start = obligated_epoch(sim, tx_id)
    if start is None:
        return 0
    count = 0
    for epoch, ref in sorted(committed_chain(sim).items()):
        if tx_id in sim.log.blocks[ref].tx_ids:
            break
        if epoch >= start:
            count += 1
    return count


def proposal_period(sim) -> Optional[float]:
    chain = committed_chain(sim)
    proposed_at = {ref: rnd for _, _, ref, rnd in sim.log.proposals}
    rounds = [proposed_at[ref] for _, ref in sorted(chain.items())]
    if len(rounds) < 2:
        return None
    return float(np.mean(np.diff(rounds)))


def duplication_factor(sim) -> Optional[float]:
    """Payload copies in the committed output per distinct committed transaction.

    A block's own entries count once each when the block carries them; every
    full-transaction entry of an embedded list counts as a further copy.
    """
    copies: Counter = Counter()
    for _, ref in sorted(committed_chain(sim).items()):
        block = sim.log.blocks[ref]
        if sim.variant.block_carries_txs:
            copies.update(block.tx_ids)
        for il in block.evidence_ils:
            copies.update(e.tx_id for e in il.entries if e.form == FULL_TX)
    if not copies:
        return None
    return sum(copies.values()) / len(copies)


def compute_metrics(sim, baseline=None, scenario: str = "") -> MetricsReport:
    """Derive the report row from a finished :class:`~il_lab.consensus.Simulation`.

    ``baseline`` is a finished plain-host run over the same workload and
    seed; without it the incremental columns are ``None`` (or 0 for plain).
    """
    cfg = sim.cfg
    if not sim.done():
        raise RuntimeError("compute_metrics needs a completed run")
    delta = cfg.net.actual_delay
    timings = tx_timings(sim)
    latencies = [t.proposal_latency(delta) for t in timings.values()]
    latencies = [x for x in latencies if x is not None]
    e2e = [t.end_to_end for t in timings.values() if t.end_to_end is not None]
    period = proposal_period(sim)
    watched = sorted(sim.targets) or sorted(timings)
    blocks = max((censoring_blocks(sim, t) for t in watched), default=0)
    censorship = round(blocks * period) if period is not None else (0 if blocks == 0 else None)

    t_prop = None
    if sim.variant.name == "il-gossip":
        props = [t.includable_round - t.submit_round - delta
                 for t in timings.values() if t.includable_round is not None]
        t_prop = max(props) if props else None
    t_disp = max(sim.log.t_disp.values()) if sim.log.t_disp else None
    t_ret = max(sim.log.t_ret) if sim.log.t_ret else None

    acct = sim.acct
    if cfg.variant == "plain" and baseline is None:
        inc, inc_prop = 0, 0
    elif baseline is not None:
        inc = acct.bytes_total - baseline.acct.bytes_total
        inc_prop = acct.proposal_path_bytes - baseline.acct.proposal_path_bytes
    else:
        inc = inc_prop = None
    chain = committed_chain(sim)
    committed = {t for ref in chain.values() for t in sim.log.blocks[ref].tx_ids}
    return MetricsReport(
        scenario=scenario or cfg.name or cfg.variant,
        variant=cfg.variant, n=cfg.net.n, f=cfg.net.f, seed=cfg.net.seed,
        delta=delta, delta_cap=cfg.net.delta_cap, epoch_timeout_rounds=sim.epoch_timeout,
        proposal_latency_rounds=max(latencies) if latencies else None,
        end_to_end_latency_rounds=max(e2e) if e2e else None,
        proposal_period_rounds=period,
        max_tx_censorship_rounds=censorship,
        censoring_blocks=blocks,
        messages_total=acct.messages_total,
        bytes_total=acct.bytes_total,
        proposal_path_bytes=acct.proposal_path_bytes,
        bytes_incremental_vs_plain=inc,
        proposal_bytes_incremental_vs_plain=inc_prop,
        duplication_factor=duplication_factor(sim),
        committed_blocks=len(chain),
        committed_txs=len(committed),
        t_prop=t_prop, t_disp=t_disp, t_ret=t_ret,
    )


def scaling_fit(ns: Sequence[float], values: Sequence[float]) -> float:
    """Least-squares slope of log(value) against log(n)."""
    if len(ns) != len(values) or len(ns) < 2:
        raise ValueError("scaling_fit needs matching sequences of at least two points")
    if any(v <= 0 for v in values) or any(x <= 0 for x in ns):
        raise ValueError("scaling_fit needs positive n and byte counts")
    slope, _ = np.polyfit(np.log(np.asarray(ns, float)), np.log(np.asarray(values, float)), 1)
    return float(slope)


# -- table emission ----------------------------------------------------------

def _order(report: MetricsReport):
    from .variants import VARIANTS
    rank = VARIANTS.index(report.variant) if report.variant in VARIANTS else len(VARIANTS)
    return (report.n, report.f, rank, report.scenario, report.seed)


def sort_reports(reports: Iterable[MetricsReport]) -> list[MetricsReport]:
    return sorted(reports, key=_order)


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.4g}"
    return str(value)


def _signed(value) -> str:
    return "" if value is None else f"{value:+d}"


def render_csv(reports: Sequence[MetricsReport]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(COLUMNS)
    for r in reports:
        writer.writerow([_cell(getattr(r, c)) for c in COLUMNS])
    return buf.getvalue()


def render_json(reports: Sequence[MetricsReport]) -> str:
    return json.dumps([r.to_dict() for r in reports], indent=2, sort_keys=True) + "\n"


def render_markdown(reports: Sequence[MetricsReport]) -> str:
    """Comparison table: IL rows show latency and bytes relative to plain at the same (n, f)."""
    plain = {(r.n, r.f): r for r in reports if r.variant == "plain" and r.status == "ok"}
    head = ["scenario", "variant", "n", "f", "proposal latency", "period",
            "max tx censorship", "bytes", "communication vs plain", "duplication", "status"]
    lines = ["| " + " | ".join(head) + " |", "|" + "---|" * len(head)]
    for r in reports:
        base = plain.get((r.n, r.f))
        latency = _cell(r.proposal_latency_rounds)
        if r.variant != "plain" and base is not None and r.proposal_latency_rounds is not None \
                and base.proposal_latency_rounds is not None:
            latency = _signed(r.proposal_latency_rounds - base.proposal_latency_rounds)
        row = [r.scenario, r.variant, str(r.n), str(r.f), latency,
               _cell(r.proposal_period_rounds), _cell(r.max_tx_censorship_rounds),
               _cell(r.bytes_total), _signed(r.bytes_incremental_vs_plain),
               _cell(r.duplication_factor), r.status if not r.error else f"{r.status}: {r.error}"]
        lines.append("| " + " | ".join(row) + " |")
    note = ("\nLatency and period in rounds (actual delay δ). IL rows give latency as an "
            "increment over the plain row with the same n and f when one is present.\n")
    return "\n".join(lines) + "\n" + note


def emit_table(reports: Sequence[MetricsReport], out_dir, stem: str = "report",
               figures: bool = True) -> dict[str, Path]:
    """Write CSV, JSON and Markdown tables (plus figures) under ``out_dir``."""
    reports = sort_reports(reports)
    if not reports:
        raise ValueError("emit_table needs at least one report")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "csv": out / f"{stem}.csv",
        "json": out / f"{stem}.json",
        "md": out / f"{stem}.md",
    }
    paths["csv"].write_text(render_csv(reports))
    paths["json"].write_text(render_json(reports))
    paths["md"].write_text(render_markdown(reports))
    if figures:
        from .plotting import plot_reports
        paths.update(plot_reports(reports, out, stem))
    return paths


def load_reports(path) -> list[MetricsReport]:
    data = json.loads(Path(path).read_text())
    if isinstance(data, dict):
        data = [data]
    return [MetricsReport.from_dict(d) for d in data]
