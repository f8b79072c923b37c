"""Action-frequency heatmaps over (day, prior visitor count)."""
from __future__ import annotations

import csv
import sys
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

FREQ_COLUMNS = ("day", "visited", "action", "count")


def load_freq(path):
    """Read a (day, visited, action, count) CSV into a nested dict."""
    table = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(FREQ_COLUMNS) - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"{path}: missing columns {sorted(missing)}")
        for record in reader:
            key = (int(record["day"]), int(record["visited"]))
            cell = table.setdefault(key, {})
            action = record["action"]
            cell[action] = cell.get(action, 0) + int(record["count"])
    return table


def plot_freq_heatmap(csv_path, out_path):
    """One panel per action; cell colour = that action's share of the cell.

    Shares are normalised within each (day, visited) cell so a fully
    deterministic policy shows a single saturated panel per cell.
    """
    table = load_freq(csv_path)
    base = Path(out_path)
    base = base.with_suffix("") if base.suffix in (".png", ".svg") else base
    png = base.with_suffix(".png")
    svg = base.with_suffix(".svg")

    plt.rcParams["svg.hashsalt"] = "riddle-plots"
    if not table:
        print("warning: empty frequency table, writing empty figure",
              file=sys.stderr)
        fig, ax = plt.subplots(figsize=(4, 3))
        ax.set_axis_off()
        ax.set_title("no data")
        fig.savefig(png, dpi=150, metadata={"Software": "riddle-plots"})
        fig.savefig(svg, metadata={"Date": None})
        plt.close(fig)
        return png, svg

    days = sorted({d for d, _ in table})
    visits = sorted({v for _, v in table})
    actions = sorted({a for cell in table.values() for a in cell})

    fig, axes = plt.subplots(1, len(actions),
                             figsize=(3.2 * len(actions), 3.2), squeeze=False)
    for ax, action in zip(axes[0], actions):
        grid = np.full((len(visits), len(days)), np.nan)
        for (d, v), cell in table.items():
            total = sum(cell.values())
            grid[visits.index(v), days.index(d)] = cell.get(action, 0) / total
        im = ax.imshow(grid, origin="lower", vmin=0.0, vmax=1.0,
                       cmap="viridis", aspect="auto")
        ax.set_xticks(range(len(days)), [str(d) for d in days])
        ax.set_yticks(range(len(visits)), [str(v) for v in visits])
        ax.set_xlabel("day")
        ax.set_ylabel("prior visitors")
        ax.set_title(action)
    fig.colorbar(im, ax=axes[0], fraction=0.03, label="share of cell")

    fig.savefig(png, dpi=150, metadata={"Software": "riddle-plots"})
    fig.savefig(svg, metadata={"Date": None})
    plt.close(fig)
    return png, svg
