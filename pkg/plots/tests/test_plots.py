"""Unit coverage for the plotting package (CSV in, figures out)."""
import numpy as np
import pytest

from riddle_plots.curves import CurveSpec, load_metrics, plot_curves, _band
from riddle_plots.heatmap import load_freq, plot_freq_heatmap

HEADER = "episode,n,variant,seed,mean_reward,norm_reward,loss,epsilon,n_cap"


def write_metrics(path, variants, seeds, episodes=(100, 200, 300)):
    lines = [HEADER]
    for v_i, variant in enumerate(variants):
        for seed in seeds:
            for ep in episodes:
                norm = 0.1 * v_i + ep / 1000 + 0.01 * seed
                lines.append(
                    f"{ep},3,{variant},{seed},{norm * 0.74},{norm},0.5,0.05,3")
    path.write_text("\n".join(lines) + "\n")


def test_load_metrics_missing_column(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("episode,n\n100,3\n")
    with pytest.raises(ValueError, match="missing columns"):
        load_metrics([bad])


def test_load_metrics_empty(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text(HEADER + "\n")
    with pytest.raises(ValueError, match="no data rows"):
        load_metrics([empty])


def test_band_math_and_single_seed():
    series = lambda seed, vals: [
        {"episode": 100 * (i + 1), "norm_reward": v} for i, v in enumerate(vals)
    ]
    eps, mean, half = _band([series(0, [0.4, 0.6])], "norm_reward")
    assert list(eps) == [100, 200]
    assert np.allclose(half, 0.0)  # single seed: zero-width band
    eps, mean, half = _band(
        [series(0, [0.4, 0.6]), series(1, [0.6, 0.8])], "norm_reward")
    assert np.allclose(mean, [0.5, 0.7])
    expect = 1.959964 * np.std([0.4, 0.6], ddof=1) / np.sqrt(2)
    assert np.allclose(half, expect)


def test_band_rejects_misaligned_grids():
    a = [{"episode": 100, "norm_reward": 0.5}]
    b = [{"episode": 200, "norm_reward": 0.5}]
    with pytest.raises(ValueError, match="grid"):
        _band([a, b], "norm_reward")


def test_spec_validation():
    with pytest.raises(ValueError, match="group key"):
        CurveSpec(csv_paths=[], group_keys=("colour",))
    with pytest.raises(ValueError, match="finite"):
        CurveSpec(csv_paths=[], reference_lines={"oracle": float("nan")})


def test_plot_curves_writes_both_formats(tmp_path):
    csv = tmp_path / "metrics.csv"
    write_metrics(csv, ["ddrqn"], [0])
    spec = CurveSpec(csv_paths=[csv], out_path=str(tmp_path / "fig"),
                     reference_lines={"oracle": 0.74})
    png, svg = plot_curves(spec)
    assert png.exists() and svg.exists()
    assert b"ddrqn" in svg.read_bytes()


def test_load_freq_and_missing_columns(tmp_path):
    csv = tmp_path / "freq.csv"
    csv.write_text("day,visited,action,count\n1,1,On,40\n1,1,None,20\n2,2,Off,30\n")
    table = load_freq(csv)
    assert table[(1, 1)] == {"On": 40, "None": 20}
    bad = tmp_path / "bad.csv"
    bad.write_text("day,count\n1,5\n")
    with pytest.raises(ValueError, match="missing columns"):
        load_freq(bad)


def test_heatmap_empty_csv_warns_but_succeeds(tmp_path, capsys):
    csv = tmp_path / "freq.csv"
    csv.write_text("day,visited,action,count\n")
    png, svg = plot_freq_heatmap(csv, tmp_path / "fig")
    assert png.exists() and svg.exists()
    assert "empty" in capsys.readouterr().err


def test_heatmap_renders_table(tmp_path):
    csv = tmp_path / "freq.csv"
    csv.write_text(
        "day,visited,action,count\n"
        "1,1,On,60\n1,1,None,40\n2,1,Off,10\n2,2,None,30\n3,2,Tell,5\n"
    )
    png, svg = plot_freq_heatmap(csv, tmp_path / "fig")
    assert png.exists() and svg.exists()
