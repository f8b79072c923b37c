"""Hand-coded protocols and the exact expected-value machinery."""
from fractions import Fraction

import numpy as np
import pytest

from riddle_ddrqn.env import HatColour, SwitchAction
from riddle_ddrqn.errors import BoundsError, InvalidConfigError
from riddle_ddrqn.strategies import (
    coverage_probability_closed_form,
    coverage_probability_markov,
    counter_act,
    exact_expected_reward,
    oracle_policy,
    parity_answers,
    parity_expected_reward,
    parity_policy,
    run_hats_episode,
    run_switch_episode,
    run_switch_episodes,
    tell_on_last_day_act,
    verify_parity_optimality,
)


class ScriptedRng:
    """Replays a fixed visitor sequence through the rng integer interface."""

    def __init__(self, values):
        self.values = list(values)

    def integers(self, low, high, size=None):
        assert size is None
        return self.values.pop(0)


# ---------------------------------------------------------------------------
# Parity protocol
# ---------------------------------------------------------------------------

def test_parity_worked_example():
    # hats B,R,R,B: agent 1 sees one blue (odd) -> Red; everyone else deduces
    # their own hat, so the episode scores 3 (agent 1's own hat is a coin flip
    # it happens to lose here).
    trace = run_hats_episode(4, np.random.default_rng(0), parity_policy,
                            hats=[HatColour.BLUE, HatColour.RED,
                                  HatColour.RED, HatColour.BLUE])
    assert [s.action for s in trace.steps] == [1, 1, 1, 0]
    assert trace.reward == 3


def test_parity_optimality_small_range():
    for n in range(1, 9):
        assert verify_parity_optimality(n)


def test_parity_enumeration_bound():
    with pytest.raises(BoundsError):
        verify_parity_optimality(21)
    with pytest.raises(InvalidConfigError):
        verify_parity_optimality(0)


def test_parity_answers_matches_policy():
    rng = np.random.default_rng(1)
    hats = rng.integers(0, 2, size=(50, 5))
    batched = parity_answers(hats)
    for row, hat_row in zip(batched, hats):
        trace = run_hats_episode(5, rng, parity_policy,
                                 hats=[HatColour(int(h)) for h in hat_row])
        assert [s.action for s in trace.steps] == list(row)


def test_parity_expected_reward_value():
    assert parity_expected_reward(3) == Fraction(5, 2)
    assert parity_expected_reward(10) == Fraction(19, 2)


# ---------------------------------------------------------------------------
# Counter protocol and baselines
# ---------------------------------------------------------------------------

def test_counter_worked_example():
    # visitors 2,1,3,1 with agent 1 as counter: 2 turns the switch on, the
    # counter turns it off (count 1), 3 turns it on, the counter reaches
    # count 2 = n-1 and Tells.
    rng = ScriptedRng([2, 1, 3, 1])
    trace = run_switch_episode(3, 10, rng, counter_act(3))
    assert [s.action for s in trace.steps] == [
        SwitchAction.ON.value, SwitchAction.OFF.value,
        SwitchAction.ON.value, SwitchAction.TELL.value,
    ]
    assert trace.reward == 1


def test_counter_never_false_positive():
    rng = np.random.default_rng(2)
    for n in (3, 4):
        for trace in run_switch_episodes(n, 2 * n, 300, rng, policy="counter"):
            assert trace.reward in (0, 1)


def test_counter_repeat_visits_do_not_recount():
    # agent 2 visits twice before the counter arrives: only one On happens
    rng = ScriptedRng([2, 2, 3, 1, 3, 1])
    trace = run_switch_episode(3, 10, rng, counter_act(3))
    actions = [s.action for s in trace.steps]
    assert actions.count(SwitchAction.ON.value) == 2
    assert trace.reward == 1


def test_tell_on_last_day_always_resolves():
    rng = np.random.default_rng(3)
    rewards = [t.reward for t in
               run_switch_episodes(3, 6, 500, rng, policy="tell_on_last_day")]
    assert set(rewards) <= {-1, 1}
    assert all(len(t.steps) == 6 for t in
               run_switch_episodes(3, 6, 20, rng, policy="tell_on_last_day"))


def test_oracle_tells_exactly_at_coverage():
    rng = np.random.default_rng(4)
    for trace in run_switch_episodes(3, 6, 500, rng, policy="oracle"):
        if trace.reward == 1:
            assert trace.visited_counts[-1] == 3
        else:
            assert trace.reward == 0


# ---------------------------------------------------------------------------
# Exact expected values
# ---------------------------------------------------------------------------

def test_coverage_probability_methods_agree():
    for n in range(1, 7):
        for d in range(1, 21):
            assert (coverage_probability_closed_form(n, d)
                    == coverage_probability_markov(n, d))


def test_coverage_probability_edge_values():
    assert coverage_probability_closed_form(1, 1) == 1
    assert coverage_probability_closed_form(3, 2) == 0  # 3 agents, 2 days
    assert coverage_probability_closed_form(2, 2) == Fraction(1, 2)


def test_oracle_exact_value_n3_d6():
    ev = exact_expected_reward("oracle", 3, 6)
    assert ev.value == Fraction(540, 729)


def test_tell_on_last_day_exact_value_n3_d6():
    ev = exact_expected_reward("tell_on_last_day", 3, 6)
    assert ev.value == Fraction(2 * 540 - 729, 729)


def test_exact_value_bounds():
    with pytest.raises(BoundsError):
        exact_expected_reward("oracle", 11, 6)
    with pytest.raises(BoundsError):
        exact_expected_reward("oracle", 3, 65)
    with pytest.raises(InvalidConfigError):
        exact_expected_reward("unknown", 3, 6)


def test_oracle_monte_carlo_consistency():
    rng = np.random.default_rng(5)
    episodes = 20000
    rewards = np.fromiter(
        (t.reward for t in run_switch_episodes(3, 6, episodes, rng, policy="oracle")),
        dtype=np.float64, count=episodes,
    )
    p = float(exact_expected_reward("oracle", 3, 6).value)
    se = np.sqrt(p * (1 - p) / episodes)
    assert abs(rewards.mean() - p) < 4 * se


def test_tell_on_last_day_monte_carlo_consistency():
    rng = np.random.default_rng(6)
    episodes = 20000
    rewards = np.fromiter(
        (t.reward for t in
         run_switch_episodes(3, 6, episodes, rng, policy="tell_on_last_day")),
        dtype=np.float64, count=episodes,
    )
    ev = float(exact_expected_reward("tell_on_last_day", 3, 6).value)
    se = 2.0 / np.sqrt(episodes)  # reward spread is [-1, 1]
    assert abs(rewards.mean() - ev) < 4 * se
