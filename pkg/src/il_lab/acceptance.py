"""The acceptance criteria as runnable checks.

Each ``criterion_*`` function returns a :class:`Verdict` with a one-line
detail string; ``run_all`` runs them in order. Details carry only
deterministic data so repeated runs print identical lines.
"""

from __future__ import annotations

import hashlib
import random
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Optional

from .adversary import bribery_sweep, max_censorship_probe
from .config import AdversaryConfig, WorkloadConfig, scenario
from .consensus import run_scenario
from .metrics import committed_chain, compute_metrics, scaling_fit, tx_timings
from .oracles import (consensus_exhaustive, da_schedule, oracle_select, random_instance,
                      rbc_exhaustive)
from .simnet import NetConfig
from .variants import IL_VARIANTS, VARIANTS, select

PAIRS = ((4, 1), (7, 2), (10, 3))
SCALING_NS = (4, 7, 13, 25)
SCALING_BANDS = {"il-base": (1.8, 2.2), "il-local": (0.8, 1.2)}
EXPECTED_INCREMENT = {"il-base": 0, "il-local": 0, "il-rbc": 2}


@dataclass(frozen=True)
class Verdict:
    number: int
    title: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] criterion {self.number:>2}: {self.title} -- {self.detail}"


def criterion_1() -> Verdict:
    """IL variants: the target lands in the first block after it is obligated."""
    failures, checked = [], 0
    for n, f in PAIRS:
        for variant in IL_VARIANTS:
            probe = max_censorship_probe(variant, n, f)
            checked += 1
            if probe.censoring_blocks != 0 or probe.inclusion_epoch is None \
                    or probe.inclusion_epoch < probe.obligated_epoch:
                failures.append(f"{variant}@n={n}: blocks={probe.censoring_blocks}")
    ok = not failures
    detail = f"{checked} runs, censoring blocks 0 everywhere" if ok else "; ".join(failures)
    return Verdict(1, "max tx censorship is 0 for every IL variant", ok, detail)


def criterion_2() -> Verdict:
    results, ok = [], True
    for n, f in PAIRS:
        probe = max_censorship_probe("plain", n, f)
        exact = probe.censoring_blocks == f and probe.rounds == round(f * probe.period_rounds)
        ok = ok and exact
        results.append(f"n={n}: {probe.censoring_blocks} periods ({probe.rounds} rounds)")
    return Verdict(2, "plain host delays the target f proposal periods", ok, "; ".join(results))


def criterion_3() -> Verdict:
    rows, ok = [], True
    for n, f in PAIRS[:2]:
        for variant in IL_VARIANTS:
            sweep = bribery_sweep(variant, n, f)
            expected = f if variant == "il-local" else 2 * f
            below = sweep.outcomes[expected - 1] if expected >= 1 else None
            good = sweep.threshold == expected and (below is None or below.target_included)
            ok = ok and good
            rows.append(f"{variant}@{n}:{sweep.threshold}")
    return Verdict(3, "bribery thresholds leader+2f (local: leader+f)", ok, ", ".join(rows))


def latency_workload() -> WorkloadConfig:
    return WorkloadConfig(tx_count=12, start_round=0, interval=1, per_round=1)


def criterion_4(n: int = 7, f: int = 2, seed: int = 0) -> Verdict:
    wl = latency_workload()
    plain = run_scenario(scenario(n, f, "plain", seed=seed, workload=wl, epochs=10))
    base_lat = compute_metrics(plain).proposal_latency_rounds
    plain_per_tx = {t: x.proposal_latency(1) for t, x in tx_timings(plain).items()}
    rows, ok = [], base_lat is not None and set(plain_per_tx.values()) == {base_lat}
    for variant in ("il-base", "il-rbc", "il-da", "il-gossip", "il-local"):
        sim = run_scenario(scenario(n, f, variant, seed=seed, workload=wl, epochs=10))
        report = compute_metrics(sim, plain)
        timings = tx_timings(sim)
        if variant == "il-da":
            expected = report.t_disp + report.t_ret
            good = report.t_disp == 2 and report.t_ret == 2
        elif variant == "il-gossip":
            expected = report.t_prop
            good = all(x.proposal_latency(1) == base_lat + x.includable_round - x.submit_round - 1
                       for x in timings.values())
        else:
            expected = EXPECTED_INCREMENT[variant]
            good = True
        if variant != "il-gossip":
            good = good and all(x.proposal_latency(1) == base_lat + expected for x in timings.values())
        inc = report.proposal_latency_rounds - base_lat
        good = good and inc == expected and len(timings) == report.committed_txs
        ok = ok and good
        rows.append(f"{variant} +{inc} (expected +{expected})")
    return Verdict(4, "latency increments over plain", ok, f"plain {base_lat}; " + ", ".join(rows))


def scaling_workload(per_epoch: int = 8, epochs: int = 6) -> WorkloadConfig:
    return WorkloadConfig(tx_count=per_epoch * epochs, start_round=0, interval=3,
                          per_round=per_epoch)


def scaling_points(variant: str, ns: Iterable[int] = SCALING_NS, seed: int = 0) -> list[int]:
    values = []
    for n in ns:
        cfg = scenario(n, (n - 1) // 3, variant, seed=seed, workload=scaling_workload(), epochs=9)
        values.append(compute_metrics(run_scenario(cfg), run_scenario(cfg.with_(variant="plain")))
                      .proposal_bytes_incremental_vs_plain)
    return values


def criterion_5() -> Verdict:
    rows, ok = [], True
    for variant, (lo, hi) in SCALING_BANDS.items():
        slope = scaling_fit(SCALING_NS, scaling_points(variant))
        ok = ok and lo <= slope <= hi
        rows.append(f"{variant} slope {slope:.3f} in [{lo}, {hi}]")
    return Verdict(5, "communication scaling exponents", ok, "; ".join(rows))


def dedup_config(variant: str, seed: int):
    rng = random.Random(f"dedup:{variant}:{seed}")
    adv = AdversaryConfig(malicious=tuple(sorted(rng.sample(range(7), 2))), targets=(0,),
                          leader_strategy=rng.choice(("censor", "silent", "equivocate")),
                          network_strategy=rng.choice(("fair", "random-delay")))
    net = NetConfig(n=7, f=2, delta_cap=2, actual_delay=1, seed=seed)
    wl = WorkloadConfig(tx_count=10, interval=1, per_round=2)
    return scenario(7, 2, variant, seed=seed, workload=wl, adversary=adv, epochs=6).with_(net=net)


def criterion_6(runs: int = 100) -> Verdict:
    bad = []
    for variant in ("il-da", "il-rbc", "il-gossip", "il-local"):
        for seed in range(runs):
            report = compute_metrics(run_scenario(dedup_config(variant, seed)))
            if report.duplication_factor != 1.0:
                bad.append(f"{variant}/{seed}={report.duplication_factor}")
    ok = not bad
    detail = f"{4 * runs} runs at duplication 1.0" if ok else ", ".join(bad[:5])
    return Verdict(6, "deduplication", ok, detail)


def safety_config(variant: str, seed: int):
    gst = (0, 5, 20)[seed % 3]
    adv = AdversaryConfig(malicious=(seed % 4,), leader_strategy="equivocate",
                          network_strategy=("max-delay", "random-delay")[(seed // 3) % 2])
    net = NetConfig(n=4, f=1, delta_cap=2, actual_delay=1, gst=gst, pre_gst_cap=10, seed=seed)
    wl = WorkloadConfig(tx_count=4, interval=2)
    return scenario(4, 1, variant, seed=seed, workload=wl, adversary=adv, epochs=10).with_(net=net)


def safety_runs(variant: str, runs: int) -> tuple[int, int]:
    """Returns (agreement violations, runs whose honest replicas committed something)."""
    violations = progressed = 0
    for seed in range(runs):
        sim = run_scenario(safety_config(variant, seed))
        violations += len(sim.log.agreement_violations())
        progressed += bool(committed_chain(sim))
    return violations, progressed


def criterion_7(runs: int = 1000) -> Verdict:
    rows, ok = [], True
    for variant in VARIANTS:
        violations, progressed = safety_runs(variant, runs)
        ok = ok and violations == 0 and progressed == runs
        rows.append(f"{variant}:{violations}")
    exhaustive = consensus_exhaustive("plain")
    ok = ok and not exhaustive["violations"]
    rows.append(f"exhaustive {exhaustive['cases']} cases:{len(exhaustive['violations'])}")
    return Verdict(7, "agreement under equivocation", ok, "violations " + ", ".join(rows))


def criterion_8() -> Verdict:
    result = rbc_exhaustive(4, 1)
    ok = not result["violations"] and result["delivered_cases"] > 0
    return Verdict(8, "reliable broadcast against exhaustive byzantine choices", ok,
                   f"{result['cases']} cases, {result['delivered_cases']} delivering, "
                   f"{len(result['violations'])} violations")


def criterion_9(schedules: int = 200) -> Verdict:
    bad = 0
    for seed in range(schedules):
        out = da_schedule(seed)
        honest, forged = out["results"]["honest"], out["results"]["forged"]
        same = len({repr(r) for r in honest}) == 1 and len({repr(r) for r in forged}) == 1
        bad += not (same and out["cert_valid"] and honest[0] == out["tx"])
    return Verdict(9, "data availability agreement", bad == 0,
                   f"{schedules} schedules, {bad} disagreements")


def criterion_10(instances: int = 500) -> Verdict:
    rng = random.Random("selection-oracle")
    mismatches = 0
    for _ in range(instances):
        inst = random_instance(rng)
        for rule in ("frequency", "prefix"):
            got = select(inst.lists, rule, inst.capacity, inst.size_of, inst.conflict_of)
            want = oracle_select(inst.lists, rule, inst.capacity, inst.size_of, inst.conflict_of)
            mismatches += [e.tx_id for e in got] != [e.tx_id for e in want]
    return Verdict(10, "selection and conflict rules match brute force", mismatches == 0,
                   f"{instances} instances x 2 rules, {mismatches} mismatches")


def _fingerprint_run(cfg, out: Path) -> str:
    from .cli import execute_run
    execute_run(cfg, out, trace=True)
    h = hashlib.sha256()
    for path in sorted(out.rglob("*")):
        if path.suffix in (".csv", ".json", ".md", ".jsonl"):
            h.update(path.name.encode())
            h.update(path.read_bytes())
    return h.hexdigest()


def criterion_11() -> Verdict:
    configs = [safety_config(v, 7).with_(name=f"det-{v}") for v in VARIANTS]
    with tempfile.TemporaryDirectory() as tmp:
        first = [_fingerprint_run(c, Path(tmp) / "a" / c.name) for c in configs]
        second = [_fingerprint_run(c, Path(tmp) / "b" / c.name) for c in configs]
    verdicts = [criterion_10(50).line() for _ in range(2)]
    ok = first == second and verdicts[0] == verdicts[1]
    return Verdict(11, "determinism of reports, traces and verdicts", ok,
                   f"{len(configs)} scenarios byte-identical across two runs" if ok
                   else "outputs differ between identical runs")


CRITERIA: dict[int, Callable[[], Verdict]] = {
    1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4, 5: criterion_5,
    6: criterion_6, 7: criterion_7, 8: criterion_8, 9: criterion_9, 10: criterion_10,
    11: criterion_11,
}


def run_all(only: Optional[Iterable[int]] = None, echo: Optional[Callable[[str], None]] = None) -> list[Verdict]:
    verdicts = []
    for number in sorted(only or CRITERIA):
        verdict = CRITERIA[number]()
        if echo:
            echo(verdict.line())
        verdicts.append(verdict)
    return verdicts
