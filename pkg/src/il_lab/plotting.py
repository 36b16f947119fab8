"""Figures written next to the report tables."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

_META = {"Software": None}


def _bar(ax, labels, values, ylabel):
    ax.bar(range(len(values)), values, color="#4c72b0")
    ax.set_xticks(range(len(values)))
    ax.set_xticklabels(labels, rotation=30, ha="right", fontsize=8)
    ax.set_ylabel(ylabel)


def plot_reports(reports: Sequence, out_dir: Path, stem: str = "report") -> dict[str, Path]:
    ok = [r for r in reports if r.status == "ok"]
    if not ok:
        return {}
    paths = {}
    labels = [f"{r.variant}\nn={r.n}" for r in ok]
    fig, axes = plt.subplots(1, 3, figsize=(12, 3.6))
    _bar(axes[0], labels, [r.proposal_latency_rounds or 0 for r in ok], "proposal latency (rounds)")
    _bar(axes[1], labels, [r.proposal_period_rounds or 0 for r in ok], "proposal period (rounds)")
    _bar(axes[2], labels, [r.bytes_total for r in ok], "bytes sent")
    fig.tight_layout()
    paths["summary_png"] = out_dir / f"{stem}_summary.png"
    fig.savefig(paths["summary_png"], dpi=100, metadata=_META)
    plt.close(fig)

    by_variant: dict[str, list] = {}
    for r in ok:
        if r.proposal_bytes_incremental_vs_plain and r.proposal_bytes_incremental_vs_plain > 0:
            by_variant.setdefault(r.variant, []).append(r)
    series = {v: sorted(rs, key=lambda r: r.n) for v, rs in by_variant.items()
              if len({r.n for r in rs}) >= 2}
    if series:
        fig, ax = plt.subplots(figsize=(5, 4))
        for variant, rs in sorted(series.items()):
            ax.loglog([r.n for r in rs], [r.proposal_bytes_incremental_vs_plain for r in rs],
                      marker="o", label=variant)
        ax.set_xlabel("n")
        ax.set_ylabel("incremental proposal-path bytes")
        ax.legend(fontsize=8)
        fig.tight_layout()
        paths["scaling_png"] = out_dir / f"{stem}_scaling.png"
        fig.savefig(paths["scaling_png"], dpi=100, metadata=_META)
        plt.close(fig)
    return paths
