"""Command line entry point: ``il-lab run|sweep|table|verify``.

Exit codes: 0 success, 1 acceptance failure, 2 configuration error,
3 runtime error (simulation timeout or a failed sweep cell with --strict).
"""

from __future__ import annotations

import argparse
import itertools
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, replace
from pathlib import Path
from typing import Optional, Sequence

from .config import AdversaryConfig, ScenarioConfig, from_dict, load, to_dict
from .consensus import Simulation
from .metrics import MetricsReport, compute_metrics, emit_table, load_reports
from .simnet import ConfigError, SimTimeout

EXIT_OK, EXIT_CRITERION, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3


def output_root(cli_out: Optional[str], cfg_out: str = "out") -> Path:
    env = os.environ.get("IL_LAB_OUT")
    return Path(env or cli_out or cfg_out)


def write_trace(sim: Simulation, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w") as fh:
        for record in sim.net.trace_lines():
            fh.write(json.dumps(record, sort_keys=True) + "\n")


def run_cell(cfg: ScenarioConfig, trace_path: Optional[Path] = None) -> MetricsReport:
    """One scenario plus its plain baseline, reduced to a report row."""
    sim = Simulation(cfg, keep_trace=trace_path is not None)
    try:
        sim.run()
    finally:
        if trace_path is not None:
            write_trace(sim, trace_path)
    baseline = None
    if cfg.variant != "plain":
        baseline = Simulation(cfg.with_(variant="plain", adversary=AdversaryConfig(
            malicious=cfg.adversary.malicious, network_strategy=cfg.adversary.network_strategy,
            targeted_nodes=cfg.adversary.targeted_nodes)), keep_trace=False)
        baseline.run()
    return compute_metrics(sim, baseline, scenario=cfg.name or cfg.variant)


def execute_run(cfg: ScenarioConfig, out: Path, trace: bool = False) -> MetricsReport:
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(cfg.dumps() + "\n")
    report = run_cell(cfg, out / "trace.jsonl" if trace else None)
    emit_table([report], out)
    return report


def _apply_overrides(cfg: ScenarioConfig, args) -> ScenarioConfig:
    if args.seed is not None:
        cfg = cfg.with_(net=replace(cfg.net, seed=args.seed))
    if args.max_rounds is not None:
        cfg = cfg.with_(max_rounds=args.max_rounds)
    return cfg


def cmd_run(args) -> int:
    cfg = _apply_overrides(load(args.config), args)
    out = output_root(args.out, cfg.output_dir) / (cfg.name or cfg.variant)
    try:
        report = execute_run(cfg, out, trace=args.trace)
    except SimTimeout as exc:
        print(f"runtime error: {exc}; partial trace in {out}", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"{report.scenario}: latency {report.proposal_latency_rounds} rounds, "
          f"period {report.proposal_period_rounds}, bytes {report.bytes_total} -> {out}")
    return EXIT_OK


# -- sweeps ------------------------------------------------------------------

def expand_grid(grid: dict) -> list[ScenarioConfig]:
    """Cartesian product of variants × n × adversaries × seeds over a base scenario."""
    known = {"base", "variants", "n", "adversaries", "seeds", "kind", "workers", "name"}
    unknown = sorted(set(grid) - known)
    if unknown:
        raise ConfigError(f"grid.{unknown[0]}: unknown key")
    base = dict(grid.get("base", {}))
    variants = grid.get("variants", [base.get("variant", "plain")])
    ns = grid.get("n", [base.get("net", {}).get("n", 4)])
    adversaries = grid.get("adversaries", {"honest": {}})
    seeds = grid.get("seeds", [base.get("net", {}).get("seed", 0)])
    if not all(isinstance(x, list) and x for x in (variants, ns, seeds)) or not adversaries:
        raise ConfigError("grid: variants, n and seeds must be non-empty lists")
    cells = []
    for variant, n, (adv_name, adv), seed in itertools.product(
            variants, ns, sorted(adversaries.items()), seeds):
        data = json.loads(json.dumps(base))
        net = dict(data.get("net", {}))
        f = net["f"] if net.get("n") == n and "f" in net else (n - 1) // 3
        net.update(n=n, f=f, seed=seed)
        data.update(net=net, variant=variant, adversary=adv,
                    name=f"{variant}-n{n}-{adv_name}-s{seed}")
        cells.append(from_dict(data))
    return cells


def _cell_worker(payload: tuple) -> dict:
    cfg_dict, kind = payload
    cfg = from_dict(cfg_dict)
    try:
        if kind == "bribery":
            from .adversary import bribery_sweep
            sweep = bribery_sweep(cfg.variant, cfg.net.n, cfg.net.f, seed=cfg.net.seed,
                                  leader_il_counts=cfg.leader_il_counts)
            expected = cfg.net.f if cfg.variant == "il-local" else 2 * cfg.net.f
            return {"scenario": cfg.name, "variant": cfg.variant, "n": cfg.net.n, "f": cfg.net.f,
                    "threshold": sweep.threshold, "expected": expected, "status": "ok"}
        return run_cell(cfg).to_dict()
    except Exception as exc:  # a failed cell must not sink the sweep
        if kind == "bribery":
            return {"scenario": cfg.name, "variant": cfg.variant, "n": cfg.net.n, "f": cfg.net.f,
                    "threshold": None, "expected": None, "status": f"failed: {exc}"}
        return MetricsReport.failed(cfg.name, cfg.variant, cfg.net.n, cfg.net.f,
                                    cfg.net.seed, f"{type(exc).__name__}: {exc}").to_dict()


def run_sweep(grid: dict, out: Path, workers: int = 1) -> list:
    kind = grid.get("kind", "run")
    if kind not in ("run", "bribery"):
        raise ConfigError("grid.kind: expected 'run' or 'bribery'")
    cells = expand_grid(grid)
    payloads = [(to_dict(c), kind) for c in cells]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_cell_worker, payloads))
    else:
        rows = [_cell_worker(p) for p in payloads]
    out.mkdir(parents=True, exist_ok=True)
    if kind == "bribery":
        rows.sort(key=lambda r: (r["n"], r["variant"], r["scenario"]))
        (out / "bribery.json").write_text(json.dumps(rows, indent=2, sort_keys=True) + "\n")
        lines = ["| scenario | variant | n | f | bribes besides leader | expected | status |",
                 "|---|---|---|---|---|---|---|"]
        lines += [f"| {r['scenario']} | {r['variant']} | {r['n']} | {r['f']} | {r['threshold']} "
                  f"| {r['expected']} | {r['status']} |" for r in rows]
        (out / "bribery.md").write_text("\n".join(lines) + "\n")
        return rows
    reports = [MetricsReport.from_dict(r) for r in rows]
    emit_table(reports, out)
    return reports


def cmd_sweep(args) -> int:
    try:
        grid = json.loads(Path(args.grid).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"grid: invalid JSON ({exc})") from None
    if not isinstance(grid, dict) or not grid:
        raise ConfigError("grid: empty grid")
    out = output_root(args.out) / grid.get("name", "sweep")
    workers = args.workers or grid.get("workers", 1)
    rows = run_sweep(grid, out, workers)
    failed = [r for r in rows if (r.status if isinstance(r, MetricsReport) else r["status"]) != "ok"]
    print(f"{len(rows)} cells, {len(failed)} failed -> {out}")
    return EXIT_RUNTIME if failed and args.strict else EXIT_OK


def cmd_table(args) -> int:
    reports = [r for path in args.reports for r in load_reports(path)]
    if not reports:
        raise ConfigError("table: no reports given")
    out = output_root(args.out, "out") / "table"
    emit_table(reports, out)
    print(f"{len(reports)} rows -> {out}")
    return EXIT_OK


def cmd_verify(args) -> int:
    from .acceptance import run_all
    only = [int(x) for x in args.only.split(",")] if args.only else None
    verdicts = run_all(only, echo=print)
    failed = [v.number for v in verdicts if not v.passed]
    print(f"{len(verdicts) - len(failed)}/{len(verdicts)} criteria passed")
    return EXIT_CRITERION if failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="il-lab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", help="output directory (IL_LAB_OUT overrides)")
        p.add_argument("--seed", type=int, help="override net.seed")
        p.add_argument("--max-rounds", type=int, dest="max_rounds", help="round cap per run")
        p.add_argument("--trace", action="store_true", help="write trace.jsonl")

    p = sub.add_parser("run", help="run one scenario")
    p.add_argument("config")
    common(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run a grid of scenarios")
    p.add_argument("grid")
    p.add_argument("--workers", type=int, default=0)
    p.add_argument("--strict", action="store_true", help="exit 3 if any cell failed")
    common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("table", help="merge report.json files into one table")
    p.add_argument("reports", nargs="+")
    common(p)
    p.set_defaults(func=cmd_table)

    p = sub.add_parser("verify", help="run the acceptance suite")
    p.add_argument("--only", help="comma-separated criterion numbers")
    common(p)
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FileNotFoundError, IsADirectoryError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SimTimeout as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
