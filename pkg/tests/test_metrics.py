import json

import pytest

from il_lab.config import WorkloadConfig, scenario
from il_lab.consensus import Simulation, run_scenario
from il_lab.metrics import (COLUMNS, MetricsReport, SizeModel, compute_metrics, emit_table,
                            load_reports, render_markdown, scaling_fit)
from il_lab.model import IlEntry, InclusionList, Transaction

WL = WorkloadConfig(tx_count=6, interval=1)


def test_il_byte_arithmetic():
    size = SizeModel(tx_bytes=100, sig_bytes=1)
    txs = [Transaction(f"c{i}", i, 100) for i in range(2)]
    assert size.il_bytes(InclusionList.signed(0, 0, [IlEntry.full(t) for t in txs])) == 201
    hashed = InclusionList.signed(0, 0, [IlEntry.hashed(t.tx_id) for t in txs])
    assert SizeModel(hash_bytes=32, sig_bytes=1).il_bytes(hashed) == 65
    assert size.vote_bytes == 1


def test_default_cert_size():
    assert SizeModel().with_storage(4, 1).cert_bytes == 32 + 3 * 64


def test_size_model_rejects_nonpositive():
    with pytest.raises(ValueError):
        SizeModel(tx_bytes=0)


def test_bytes_conserved_against_trace():
    sim = run_scenario(scenario(4, 1, "il-rbc", workload=WL, epochs=4), keep_trace=True)
    report = compute_metrics(sim)
    assert report.bytes_total == sum(e.payload_bytes for e in sim.net.trace)
    assert report.messages_total == len(sim.net.trace)


def test_plain_baseline_identity():
    cfg = scenario(4, 1, "plain", workload=WL, epochs=4)
    report = compute_metrics(run_scenario(cfg), run_scenario(cfg))
    assert report.bytes_incremental_vs_plain == 0


@pytest.mark.parametrize("variant, increment", [("il-base", 0), ("il-rbc", 2), ("il-local", 0)])
def test_latency_increments_at_n4(variant, increment):
    plain = run_scenario(scenario(4, 1, "plain", workload=WL, epochs=6))
    sim = run_scenario(scenario(4, 1, variant, workload=WL, epochs=6))
    report = compute_metrics(sim, plain)
    assert report.proposal_latency_rounds == 3 + increment
    if variant == "il-base":
        assert report.duplication_factor > 1.0       # copies live in the embedded lists
    else:
        assert report.duplication_factor == 1.0


def test_incomplete_run_is_an_error():
    sim = Simulation(scenario(4, 1, "plain", workload=WL, epochs=4))
    sim.start()
    with pytest.raises(RuntimeError):
        compute_metrics(sim)


def test_scaling_fit_slopes():
    ns = [4, 7, 13, 25]
    assert scaling_fit(ns, [n * n * 3 for n in ns]) == pytest.approx(2.0)
    assert scaling_fit(ns, [5 * n for n in ns]) == pytest.approx(1.0)
    assert scaling_fit(ns, [42 for _ in ns]) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValueError):
        scaling_fit(ns, [1, 2, 0, 4])


def _reports():
    plain_cfg = scenario(4, 1, "plain", workload=WL, epochs=4)
    plain = run_scenario(plain_cfg)
    out = [compute_metrics(plain, plain, scenario="plain")]
    for v in ("il-base", "il-da", "il-rbc", "il-gossip", "il-local"):
        out.append(compute_metrics(run_scenario(plain_cfg.with_(variant=v)), plain, scenario=v))
    return out


def test_emit_table_files_and_order(tmp_path):
    reports = _reports()
    paths = emit_table(list(reversed(reports)), tmp_path, figures=False)
    data = json.loads((tmp_path / "report.json").read_text())
    assert [r["variant"] for r in data] == ["plain", "il-base", "il-da", "il-rbc", "il-gossip",
                                           "il-local"]
    header = (tmp_path / "report.csv").read_text().splitlines()[0]
    assert header.split(",") == list(COLUMNS)
    md = (tmp_path / "report.md").read_text()
    assert md.count("\n| ") == 6 and "+2" in md
    assert load_reports(tmp_path / "report.json") == sorted(reports, key=lambda r: data.index(
        next(d for d in data if d["variant"] == r.variant)))
    assert paths


def test_single_report_table(tmp_path):
    emit_table(_reports()[:1], tmp_path, figures=False)
    assert len(json.loads((tmp_path / "report.json").read_text())) == 1


def test_figures_written(tmp_path):
    emit_table(_reports(), tmp_path)
    assert (tmp_path / "report_summary.png").exists()


def test_empty_table_rejected(tmp_path):
    with pytest.raises(ValueError):
        emit_table([], tmp_path)


def test_failed_row_round_trips():
    row = MetricsReport.failed("x", "il-base", 4, 1, 0, "boom")
    assert MetricsReport.from_dict(row.to_dict()) == row
    assert "failed" in render_markdown([row])
