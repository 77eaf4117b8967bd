"""Minimal vector charts for the aggregate tables.

Everything renders through the Agg backend straight to SVG with a fixed
hash salt and no embedded creation date, so rerunning on identical inputs
reproduces identical bytes. The heatmap uses the viridis ramp pinned to
0..100 so color encodes absolute percentage, not per-corpus range.
"""

import re
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_SVG_SALT = "bias-audit"


def _configure():
    plt.rcParams["svg.hashsalt"] = _SVG_SALT


def _save(fig, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def _slug(name: str) -> str:
    return re.sub(r"[^a-z0-9]+", "-", name.lower()).strip("-") or "unnamed"


def render_publisher_charts(chart_dir, publisher_rows: list[dict]) -> list[Path]:
    """One mean-score-by-year line chart per publisher plus a combined
    chart. Overall rows (year None) are not part of the time series."""
    _configure()
    chart_dir = Path(chart_dir)
    series: dict[str, list[tuple[int, float]]] = {}
    for row in publisher_rows:
        if row["year"] is None:
            continue
        series.setdefault(row["publisher"], []).append(
            (row["year"], row["mean_paragraph_score"]))

    written = []
    for publisher in sorted(series):
        points = sorted(series[publisher])
        fig, ax = plt.subplots(figsize=(6, 3.5))
        ax.plot([y for y, _ in points], [v for _, v in points], marker="o")
        ax.set_title(publisher)
        ax.set_xlabel("year")
        ax.set_ylabel("mean paragraph score")
        ax.set_ylim(0, 2)
        fig.tight_layout()
        written.append(_save(fig, chart_dir / f"publisher_{_slug(publisher)}.svg"))

    fig, ax = plt.subplots(figsize=(7, 4))
    for publisher in sorted(series):
        points = sorted(series[publisher])
        ax.plot([y for y, _ in points], [v for _, v in points],
                marker="o", label=publisher)
    ax.set_xlabel("year")
    ax.set_ylabel("mean paragraph score")
    ax.set_ylim(0, 2)
    if series:
        ax.legend(fontsize="small")
    fig.tight_layout()
    written.append(_save(fig, chart_dir / "publishers_combined.svg"))
    return written


def render_state_heatmap(chart_dir, state_rows: list[dict]) -> Path:
    """State-by-year grid of biased-paragraph percentages on the viridis
    ramp, fixed to 0..100; cells without coverage stay white."""
    _configure()
    chart_dir = Path(chart_dir)
    states = sorted({r["state"] for r in state_rows})
    years = sorted({r["year"] for r in state_rows})
    grid = np.full((max(len(states), 1), max(len(years), 1)), np.nan)
    index = {(r["state"], r["year"]): r["pct_paragraphs_biased"] for r in state_rows}
    for i, state in enumerate(states):
        for j, year in enumerate(years):
            if (state, year) in index:
                grid[i, j] = index[(state, year)]

    cmap = plt.get_cmap("viridis").copy()
    cmap.set_bad("#ffffff")
    height = max(2.5, 0.28 * len(states) + 1.5)
    fig, ax = plt.subplots(figsize=(max(4.0, 0.6 * len(years) + 2.0), height))
    im = ax.imshow(np.ma.masked_invalid(grid), cmap=cmap, vmin=0.0, vmax=100.0,
                   aspect="auto", interpolation="nearest")
    ax.set_xticks(range(len(years)), [str(y) for y in years], rotation=90, fontsize=7)
    ax.set_yticks(range(len(states)), states, fontsize=7)
    fig.colorbar(im, ax=ax, label="% biased paragraphs")
    fig.tight_layout()
    return _save(fig, chart_dir / "state_year_heatmap.svg")
