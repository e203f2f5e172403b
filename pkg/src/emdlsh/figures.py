"""Figure rendering for report files.

Each suite report is accompanied by PNG figures next to the delimited
output: one panel per record group (records share a group when their name
agrees up to the first '/') showing estimates with error bars against the
declared bounds, plus one summary panel of verdict counts.
"""

from __future__ import annotations

import os
from collections import OrderedDict

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)


def _groups(records):
    grouped = OrderedDict()
    for rec in records:
        head = rec.name.split("/", 1)[0]
        grouped.setdefault(head, []).append(rec)
    return grouped


def _panel(ax, name, records):
    ypos = range(len(records))
    colors = ["#2a7e43" if r.passed else "#b03a2e" for r in records]
    ax.barh(list(ypos), [r.estimate for r in records],
            xerr=[3 * r.sigma for r in records], color=colors, alpha=0.75,
            error_kw={"ecolor": "#333333", "capsize": 2})
    for y, rec in zip(ypos, records):
        ax.plot([rec.bound, rec.bound], [y - 0.4, y + 0.4],
                color="#1f4e79", linewidth=1.6)
    ax.set_yticks(list(ypos))
    ax.set_yticklabels([r.name.split("/", 1)[-1] for r in records], fontsize=7)
    ax.set_title(name, fontsize=9)
    ax.invert_yaxis()
    ax.tick_params(axis="x", labelsize=7)


def render_report_figures(report, out_path) -> list:
    """Write one figure per record group plus a summary; returns the paths."""
    base, _ = os.path.splitext(str(out_path))
    written = []
    for name, records in _groups(report.records).items():
        fig, ax = plt.subplots(figsize=(7, max(2.0, 0.35 * len(records) + 1)))
        _panel(ax, name, records)
        ax.set_xlabel("estimate (bars, with 3-sigma error) vs bound (vertical marks)",
                      fontsize=7)
        fig.tight_layout()
        path = f"{base}_{name.replace(' ', '_')}.png"
        fig.savefig(path, dpi=110)
        plt.close(fig)
        written.append(path)
    fig, ax = plt.subplots(figsize=(4, 3))
    n_pass = sum(r.passed for r in report.records)
    n_fail = len(report.records) - n_pass
    ax.bar(["pass", "fail"], [n_pass, n_fail], color=["#2a7e43", "#b03a2e"])
    ax.set_title("verdicts")
    fig.tight_layout()
    path = f"{base}_summary.png"
    fig.savefig(path, dpi=110)
    plt.close(fig)
    written.append(path)
    return written
