"""End-to-end acceptance suite.

One test per criterion; `pytest -v` output is the per-criterion record.
Training-heavy criteria share session-scoped fixtures so the multi-seed runs
happen once.  Total runtime is dominated by the 5-seed switch runs (~40 min
on one desktop core).
"""
import json
import time
from fractions import Fraction

import numpy as np
import pytest

from riddle_ddrqn.analysis import (
    divergence_point,
    extract_decision_tree,
    false_positive_rate,
    parity_agreement,
    tree_samples,
)
from riddle_ddrqn.cli import main
from riddle_ddrqn.env import SwitchAction
from riddle_ddrqn.strategies import (
    coverage_probability_closed_form,
    coverage_probability_markov,
    exact_expected_reward,
    run_switch_episodes,
    verify_parity_optimality,
)
from riddle_ddrqn.tabular import tabular_greedy_eval, tabular_train
from riddle_ddrqn.training import (
    TrainConfig,
    VariantFlags,
    evaluate,
    generate_traces,
    train,
)

SEEDS = (0, 1, 2, 3, 4)

ORACLE_EV = Fraction(540, 729)  # oracle expected reward, n=3 d=6
TOLD_EV = Fraction(13, 27)  # tell-on-last-day expected reward, n=3 d=6

SWITCH_VARIANTS = ("ddrqn", "no_share", "naive", "switch_disabled")


def _train_with_snapshot(cfg):
    """Train and keep a copy of the parameters at the best greedy evaluation."""
    best = {"norm": -np.inf, "stores": None}

    def on_metrics(row, model):
        if row.norm_reward > best["norm"]:
            best["norm"] = row.norm_reward
            best["stores"] = [s.clone() for s in model.stores]

    result = train(cfg, on_metrics=on_metrics)
    result.model.stores = best["stores"]
    return result, best["norm"]


def _final_raw(metrics, points=5):
    """Final performance: mean raw reward over the last evaluation points."""
    return float(np.mean([r.mean_reward for r in metrics[-points:]]))


@pytest.fixture(scope="session")
def switch_runs():
    """5-seed, 50k-episode switch n=3 runs for each method variant."""
    runs = {}
    for variant in SWITCH_VARIANTS:
        runs[variant] = []
        for seed in SEEDS:
            cfg = TrainConfig(
                riddle="switch", n=3, flags=VariantFlags.from_name(variant),
                max_episodes=50_000, eval_every=1000, eval_episodes=100,
                seed=seed,
            )
            result, best_norm = _train_with_snapshot(cfg)
            runs[variant].append({
                "seed": seed,
                "result": result,
                "best_norm": best_norm,
                "final_raw": _final_raw(result.metrics),
            })
    return runs


@pytest.fixture(scope="session")
def hats3_runs():
    """5-seed, 20k-episode hats n=3 runs (paper batch size and epsilon)."""
    runs = []
    for seed in SEEDS:
        cfg = TrainConfig(
            riddle="hats", n=3, max_episodes=20_000, eval_every=1000,
            eval_episodes=100, seed=seed, init_scale=1.5, forget_bias=0.0,
        )
        result, best_norm = _train_with_snapshot(cfg)
        runs.append({"seed": seed, "result": result, "best_norm": best_norm})
    return runs


def test_p1_parity_protocol_exact_for_all_n_up_to_12():
    start = time.time()
    for n in range(1, 13):
        assert verify_parity_optimality(n), f"parity protocol suboptimal at n={n}"
    assert time.time() - start < 1.0


def test_p2_counter_protocol_never_false_positive_100k_episodes():
    start = time.time()
    for n in (3, 4):
        rng = np.random.default_rng(n)
        traces = run_switch_episodes(n, 4 * n - 6, 100_000, rng, policy="counter")
        assert false_positive_rate(traces) == 0.0
    assert time.time() - start < 10.0


def test_p3_oracle_value_two_exact_methods_and_monte_carlo():
    start = time.time()
    assert coverage_probability_closed_form(3, 6) == ORACLE_EV
    assert coverage_probability_markov(3, 6) == ORACLE_EV
    assert exact_expected_reward("oracle", 3, 6).value == ORACLE_EV
    episodes = 100_000
    rng = np.random.default_rng(7)
    rewards = np.fromiter(
        (t.reward for t in run_switch_episodes(3, 6, episodes, rng, policy="oracle")),
        dtype=float, count=episodes,
    )
    exact = float(ORACLE_EV)
    se = np.sqrt((1.0 - exact ** 2) / episodes)  # rewards are +-1
    assert abs(rewards.mean() - exact) < 3 * se
    assert time.time() - start < 10.0


def test_p4_gradcheck_passes_for_both_architectures(capsys):
    start = time.time()
    assert main(["gradcheck", "--arch", "hats", "--n", "3"]) == 0
    assert main(["gradcheck", "--arch", "switch", "--n", "3"]) == 0
    out = capsys.readouterr().out
    assert out.count("PASS") == 2
    assert time.time() - start < 60.0


def test_p5_switch_n3_reaches_oracle_level(switch_runs):
    bests = [run["best_norm"] for run in switch_runs["ddrqn"]]
    assert max(bests) >= 0.95, f"best-of-5 normalised reward {max(bests):.3f}"
    assert np.mean(bests) >= 0.85, f"mean-of-5 normalised reward {np.mean(bests):.3f}"


def test_p6a_no_weight_sharing_fails_to_learn(switch_runs):
    finals = [run["final_raw"] for run in switch_runs["no_share"]]
    bound = float(TOLD_EV) + 0.05
    assert np.mean(finals) <= bound, (
        f"no_share mean final {np.mean(finals):.4f} > {bound:.4f}"
    )


def test_p6b_ddrqn_beats_tell_on_last_day(switch_runs):
    finals = [run["final_raw"] for run in switch_runs["ddrqn"]]
    assert np.mean(finals) > float(TOLD_EV), (
        f"ddrqn mean final {np.mean(finals):.4f} <= {float(TOLD_EV):.4f}"
    )


def test_p6c_naive_method_trails_ddrqn(switch_runs):
    denom = float(ORACLE_EV)
    ddrqn = np.mean([run["final_raw"] for run in switch_runs["ddrqn"]]) / denom
    naive = np.mean([run["final_raw"] for run in switch_runs["naive"]]) / denom
    assert ddrqn - naive >= 0.1, f"normalised gap {ddrqn - naive:.3f} < 0.1"


def test_p7_switch_communication_emerges(switch_runs):
    ddrqn_rows = [r for run in switch_runs["ddrqn"] for r in run["result"].metrics]
    nosw_rows = [r for run in switch_runs["switch_disabled"]
                 for r in run["result"].metrics]
    point = divergence_point(ddrqn_rows, nosw_rows)
    assert point is not None, "learning curves never separated"
    finals = [run["final_raw"] for run in switch_runs["switch_disabled"]]
    bound = float(TOLD_EV) + 0.05
    assert np.mean(finals) <= bound, (
        f"switch_disabled mean final {np.mean(finals):.4f} > {bound:.4f}"
    )


def test_p8_hats_n3_learns_the_parity_protocol(hats3_runs):
    best = max(hats3_runs, key=lambda run: run["best_norm"])
    result = best["result"]
    rng = np.random.default_rng(1234)
    traces = generate_traces(result.model, result.config, 1000, rng)
    mean_reward = float(np.mean([t.reward for t in traces]))
    assert mean_reward >= 2.4, f"best-seed greedy mean reward {mean_reward:.3f}"
    # either polarity of the parity code is the same protocol with the
    # colour labels swapped, so score the better-matching polarity
    agreement = parity_agreement(traces)
    agreement = max(agreement, 1.0 - agreement)
    assert agreement >= 0.9, f"parity agreement {agreement:.3f}"


def test_p9_hats_n10_beats_tabular_q_learning():
    eval_rng = np.random.default_rng(999)
    eval_episodes = 10_000
    tabular_best = -np.inf
    for seed in SEEDS:
        rng = np.random.default_rng(seed)
        table, _ = tabular_train(10, 20_000, rng)
        tabular_best = max(
            tabular_best, tabular_greedy_eval(table, 10, eval_episodes, eval_rng))
    ddrqn_best = -np.inf
    for seed in SEEDS:
        cfg = TrainConfig(
            riddle="hats", n=10, max_episodes=20_000, eval_every=1000,
            eval_episodes=200, seed=seed, hidden=32,
            init_scale=1.5, forget_bias=0.0,
        )
        result, _ = _train_with_snapshot(cfg)
        mean, _ = evaluate(
            result.model,
            TrainConfig(riddle="hats", n=10, hidden=32,
                        eval_episodes=eval_episodes),
            eval_rng,
        )
        ddrqn_best = max(ddrqn_best, mean)
    assert ddrqn_best - tabular_best >= 0.5, (
        f"ddrqn {ddrqn_best:.3f} vs tabular {tabular_best:.3f}"
    )


def test_p10_decision_trees_recover_the_strategies(switch_runs):
    # hand-coded counter protocol: the tree must be exact
    rng = np.random.default_rng(42)
    counter = list(run_switch_episodes(3, 12, 1000, rng, policy="counter"))
    tree = extract_decision_tree(
        counter,
        features=("agent_first", "switch", "acted_on_before", "prior_offs_full"),
    )
    assert all(leaf.purity == 1.0 for leaf in tree.leaves())

    # converged switch policies: among the seeds that reached oracle level,
    # at least one must use the switch position as a binary code after day 2,
    # where first-time visitors Tell on exactly one position (either
    # polarity) with leaf purity >= 0.9
    converged = [r for r in switch_runs["ddrqn"] if r["best_norm"] >= 0.95]
    assert converged, "no seed converged to oracle level"
    encodings = []
    for run in converged:
        result = run["result"]
        traces = generate_traces(result.model, result.config, 1000,
                                 np.random.default_rng(4321))
        samples = [
            s for s in tree_samples(traces)
            if s["day_bucket"] == ">2" and not s["visited_before"]
        ]
        by_switch = {}
        for s in samples:
            by_switch.setdefault(s["switch"], []).append(s)
        if set(by_switch) != {0, 1}:
            continue
        majorities = {}
        for sw, group in by_switch.items():
            counts = {}
            for s in group:
                counts[s["action"]] = counts.get(s["action"], 0) + 1
            action = max(counts, key=counts.get)
            majorities[sw] = (action, counts[action] / len(group))
        tell_sides = [
            sw for sw, (action, purity) in majorities.items()
            if action == SwitchAction.TELL.value and purity >= 0.9
        ]
        other_actions = {
            action for sw, (action, _) in majorities.items()
            if sw not in tell_sides
        }
        if len(tell_sides) == 1 and SwitchAction.TELL.value not in other_actions:
            encodings.append((run["seed"], tell_sides[0]))
    assert encodings, "no converged seed encodes the visit count in the switch"


def test_p11_training_is_byte_deterministic(tmp_path):
    config = tmp_path / "config.json"
    config.write_text(json.dumps({
        "riddle": "switch", "n": 3, "max_episodes": 1000, "eval_every": 500,
        "eval_episodes": 50, "seed": 5,
    }))
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    assert main(["train", "--config", str(config), "--out", str(out_a)]) == 0
    assert main(["train", "--config", str(config), "--out", str(out_b)]) == 0
    assert (out_a / "metrics.csv").read_bytes() == (out_b / "metrics.csv").read_bytes()
