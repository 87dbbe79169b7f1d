"""Figure rendering for CLI reports.

Renders compact bar charts next to the delimited text output: the length
spectrum of an enumerated multilanguage, or the per-nonterminal
empty-string parse counts of an analysis report.  Infinite values are
drawn at the top of the axis with an ``inf`` label.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .counts import INF  # noqa: E402

FIG_SIZE = (4.8, 3.0)


def _new_axes(title: str):
    fig, ax = plt.subplots(figsize=FIG_SIZE)
    ax.set_title(title, fontsize=10)
    ax.spines["right"].set_visible(False)
    ax.spines["top"].set_visible(False)
    ax.tick_params(labelsize=8)
    return fig, ax


def _bar_with_inf(ax, labels, values):
    finite = [v for v in values if v is not INF]
    top = max([v for v in finite if v > 0], default=1)
    shown = [top * 1.25 if v is INF else v for v in values]
    bars = ax.bar(range(len(labels)), shown, color="#4878a8")
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels(labels)
    for bar, v in zip(bars, values):
        if v is INF:
            bar.set_color("#b04030")
            ax.text(bar.get_x() + bar.get_width() / 2, bar.get_height(),
                    "inf", ha="center", va="bottom", fontsize=8)


def save_length_spectrum(ms, max_len: int, path: str):
    """Total count per string length, for an enumerated multilanguage."""
    totals = []
    for n in range(max_len + 1):
        total = 0
        for s, c in ms.items():
            if len(s) == n:
                total = total + c
        totals.append(total)
    fig, ax = _new_axes(f"strings by length (max {max_len})")
    _bar_with_inf(ax, [str(n) for n in range(max_len + 1)], totals)
    ax.set_xlabel("length", fontsize=9)
    ax.set_ylabel("total count", fontsize=9)
    fig.savefig(path, bbox_inches="tight")
    plt.close(fig)


def save_nullable_counts(counts, path: str):
    """Empty-string parse count per nonterminal."""
    items = sorted(counts.items(), key=lambda kv: (len(kv[0].name), kv[0].name))
    fig, ax = _new_axes("empty-string parse counts")
    if items:
        _bar_with_inf(ax, [s.name for s, _ in items], [c for _, c in items])
    ax.set_xlabel("nonterminal", fontsize=9)
    ax.set_ylabel("count", fontsize=9)
    fig.savefig(path, bbox_inches="tight")
    plt.close(fig)
