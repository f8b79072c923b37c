"""Acceptance criteria for the plotting package."""
from riddle_plots.cli import curves_main, heatmap_main
from riddle_plots.heatmap import load_freq

from test_plots import write_metrics

ORACLE_N3 = 540 / 729  # printed by the training CLI's oracle command


def test_s1_curves_from_combined_variant_csv(tmp_path):
    csv = tmp_path / "ablation.csv"
    variants = ["ddrqn", "no_share", "no_last_action", "replay", "naive"]
    write_metrics(csv, variants, seeds=[0, 1, 2])
    out = tmp_path / "fig"
    args = ["--csv", str(csv), "--group", "variant",
            "--ref", f"oracle={ORACLE_N3:.6f}", "--out", str(out)]
    assert curves_main(args) == 0
    svg = (out.with_suffix(".svg")).read_bytes()
    for variant in variants:
        assert variant.encode() in svg  # one legend entry per variant
    assert (out.with_suffix(".png")).exists()
    # re-run is data-identical
    first = (out.with_suffix(".svg")).read_bytes()
    assert curves_main(args) == 0
    assert (out.with_suffix(".svg")).read_bytes() == first


def test_s2_heatmap_from_counter_frequencies(tmp_path):
    # counter-protocol frequencies: on day 1 a non-counter turns the switch
    # on and the counter does nothing, so day-1 mass sits on On/None only
    csv = tmp_path / "freq.csv"
    csv.write_text(
        "day,visited,action,count\n"
        "1,1,On,66\n1,1,None,34\n"
        "2,1,On,20\n2,1,Off,12\n2,2,On,40\n2,2,None,28\n"
        "3,2,Off,18\n3,3,Tell,11\n3,2,None,51\n"
    )
    table = load_freq(csv)
    day1_actions = {a for (d, _), cell in table.items() if d == 1 for a in cell}
    assert day1_actions == {"On", "None"}
    out = tmp_path / "fig"
    assert heatmap_main(["--csv", str(csv), "--out", str(out)]) == 0
    assert out.with_suffix(".png").exists()
    assert out.with_suffix(".svg").exists()
