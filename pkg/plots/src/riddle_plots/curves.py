"""Training curves: per-group mean over seeds with a 95% confidence band."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

METRICS_COLUMNS = (
    "episode", "n", "variant", "seed", "mean_reward",
    "norm_reward", "loss", "epsilon", "n_cap",
)

Z_95 = 1.959964  # two-sided 95% normal quantile, as in the analysis CIs


@dataclass
class CurveSpec:
    csv_paths: list
    group_keys: tuple = ("variant",)
    reference_lines: dict = field(default_factory=dict)  # label -> y value
    out_path: str = "curves"
    title: str = ""
    ylabel: str = ""
    raw_reward: bool = False  # default y is the normalised reward

    def __post_init__(self):
        for key in self.group_keys:
            if key not in METRICS_COLUMNS:
                raise ValueError(f"unknown group key {key!r}")
        for label, value in self.reference_lines.items():
            if not np.isfinite(value):
                raise ValueError(f"reference line {label!r} is not finite")


def load_metrics(paths):
    """Read one or more metrics CSVs into a list of row dicts."""
    rows = []
    for path in paths:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            missing = set(METRICS_COLUMNS) - set(reader.fieldnames or ())
            if missing:
                raise ValueError(
                    f"{path}: missing columns {sorted(missing)}"
                )
            for record in reader:
                rows.append({
                    "episode": int(record["episode"]),
                    "n": int(record["n"]),
                    "variant": record["variant"],
                    "seed": int(record["seed"]),
                    "mean_reward": float(record["mean_reward"]),
                    "norm_reward": float(record["norm_reward"]),
                    "loss": float(record["loss"]),
                    "epsilon": float(record["epsilon"]),
                    "n_cap": int(record["n_cap"]),
                })
    if not rows:
        raise ValueError("no data rows in input")
    return rows


def _group_label(row, keys):
    return ", ".join(str(row[k]) for k in keys)


def _band(rows_by_seed, value_key):
    """Shared episode grid, per-episode mean and 95% half-width over seeds."""
    grids = [tuple(r["episode"] for r in series) for series in rows_by_seed]
    if len(set(grids)) != 1:
        raise ValueError("seeds disagree on the evaluation grid")
    episodes = np.array(grids[0])
    values = np.array([[r[value_key] for r in series] for series in rows_by_seed])
    mean = values.mean(axis=0)
    if values.shape[0] < 2:
        half = np.zeros_like(mean)
    else:
        half = Z_95 * values.std(axis=0, ddof=1) / np.sqrt(values.shape[0])
    return episodes, mean, half


def plot_curves(spec: CurveSpec):
    """Render the curves; returns the written (png, svg) paths."""
    rows = load_metrics(spec.csv_paths)
    value_key = "mean_reward" if spec.raw_reward else "norm_reward"

    groups = {}
    for row in rows:
        label = _group_label(row, spec.group_keys)
        groups.setdefault(label, {}).setdefault(row["seed"], []).append(row)

    plt.rcParams["svg.hashsalt"] = "riddle-plots"
    plt.rcParams["svg.fonttype"] = "none"  # keep labels as text, reproducibly
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for label in sorted(groups):
        by_seed = [
            sorted(series, key=lambda r: r["episode"])
            for _, series in sorted(groups[label].items())
        ]
        episodes, mean, half = _band(by_seed, value_key)
        (line,) = ax.plot(episodes, mean, label=label)
        ax.fill_between(episodes, mean - half, mean + half,
                        color=line.get_color(), alpha=0.2, linewidth=0)
    for label, value in sorted(spec.reference_lines.items()):
        ax.axhline(value, linestyle="--", color="grey", linewidth=1)
        ax.annotate(label, xy=(0.99, value), xycoords=("axes fraction", "data"),
                    ha="right", va="bottom", fontsize=8, color="grey")
    ax.set_xlabel("episode")
    ax.set_ylabel(spec.ylabel or ("mean reward" if spec.raw_reward
                                  else "normalised reward"))
    if spec.title:
        ax.set_title(spec.title)
    ax.legend(loc="lower right", fontsize=8)
    fig.tight_layout()

    base = Path(spec.out_path)
    base = base.with_suffix("") if base.suffix in (".png", ".svg") else base
    png = base.with_suffix(".png")
    svg = base.with_suffix(".svg")
    fig.savefig(png, dpi=150, metadata={"Software": "riddle-plots"})
    fig.savefig(svg, metadata={"Date": None})
    plt.close(fig)
    return png, svg
