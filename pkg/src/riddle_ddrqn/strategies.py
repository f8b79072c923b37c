"""Hand-coded reference policies and exact expected-value computation.

These serve both as baselines (the parity protocol, the counter protocol,
"tell on last day", the full-state oracle) and as test oracles: expected
rewards are computed exactly over rationals by two independent methods.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from fractions import Fraction
from math import comb

import numpy as np

from .env import (
    EpisodeTrace,
    HatColour,
    HatsObservation,
    SwitchAction,
    SwitchObservation,
    SwitchState,
    TraceStep,
    hats_observe,
    hats_reset,
    hats_reward,
    hats_step,
    switch_observe,
    switch_reset,
    switch_step,
)
from .errors import BoundsError, InvalidConfigError

PARITY_ENUMERATION_BOUND = 20


# ---------------------------------------------------------------------------
# Hats: parity protocol
# ---------------------------------------------------------------------------

def parity_policy(obs: HatsObservation) -> HatColour:
    """The optimal hats protocol.

    Agent 1 answers Blue iff the number of blue hats it sees is even.  Every
    later agent treats the heard answers of agents 2..m-1 as true colours and
    deduces the unique colour consistent with the announced parity.
    """
    m = obs.agent_index
    if m == 1:
        blues_seen = sum(1 for h in obs.seen if h is HatColour.BLUE)
        return HatColour.BLUE if blues_seen % 2 == 0 else HatColour.RED
    announced_even = obs.heard[0] is HatColour.BLUE
    known_blues = sum(1 for h in obs.heard[1:] if h is HatColour.BLUE)
    known_blues += sum(1 for h in obs.seen if h is HatColour.BLUE)
    own_blue = (known_blues % 2 == 0) != announced_even
    return HatColour.BLUE if own_blue else HatColour.RED


def parity_answers(hats: np.ndarray) -> np.ndarray:
    """Vectorised parity protocol over a batch of hat assignments.

    hats is an int array (episodes, n) with Blue=0, Red=1; returns the
    answers each agent gives under the protocol, same shape.
    """
    hats = np.asarray(hats, dtype=np.int64)
    episodes, n = hats.shape
    answers = np.zeros_like(hats)
    blues_ahead = np.sum(hats[:, 1:] == 0, axis=1)
    announced_even = blues_ahead % 2 == 0
    answers[:, 0] = np.where(announced_even, 0, 1)
    for m in range(2, n + 1):
        known = np.sum(answers[:, 1 : m - 1] == 0, axis=1)
        known += np.sum(hats[:, m:] == 0, axis=1)
        own_blue = (known % 2 == 0) != announced_even
        answers[:, m - 1] = np.where(own_blue, 0, 1)
    return answers


def verify_parity_optimality(n: int) -> bool:
    """Exhaustively check that agents 2..n always answer correctly.

    Enumerates all 2^n hat assignments; true iff the protocol's reward is at
    least n-1 on every one of them.
    """
    if n < 1:
        raise InvalidConfigError(f"need n >= 1, got {n}")
    if n > PARITY_ENUMERATION_BOUND:
        raise BoundsError(f"enumeration over 2^{n} assignments exceeds the bound")
    counts = np.arange(2 ** n, dtype=np.int64)
    hats = (counts[:, None] >> np.arange(n)[None, :]) & 1
    answers = parity_answers(hats)
    if n == 1:
        return True
    return bool(np.all(answers[:, 1:] == hats[:, 1:]))


def parity_expected_reward(n: int) -> Fraction:
    """Expected reward of the parity protocol: n-1 guaranteed plus a coin flip."""
    return Fraction(2 * n - 1, 2)


# ---------------------------------------------------------------------------
# Switch: counter protocol, tell-on-last-day, full-state oracle
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CounterMemory:
    is_counter: bool
    has_turned_on: bool = False
    off_count: int = 0


def counter_policy(obs: SwitchObservation, mem: CounterMemory, n: int):
    """One agent's decision under the counter protocol.

    The counter alone turns the switch off, counting the offs; it Tells when
    the count reaches n-1.  Every other agent turns the switch on exactly
    once.  Returns (action, updated memory).
    """
    if not obs.in_room_flag:
        return SwitchAction.NONE, mem
    if mem.is_counter:
        if mem.off_count >= n - 1:
            return SwitchAction.TELL, mem
        if obs.switch_seen:
            count = mem.off_count + 1
            new_mem = replace(mem, off_count=count)
            if count >= n - 1:
                return SwitchAction.TELL, new_mem
            return SwitchAction.OFF, new_mem
        return SwitchAction.NONE, mem
    if not obs.switch_seen and not mem.has_turned_on:
        return SwitchAction.ON, replace(mem, has_turned_on=True)
    return SwitchAction.NONE, mem


def tell_on_last_day_policy(obs: SwitchObservation, day: int, d_max: int) -> SwitchAction:
    """Tell on the final day if in the room; otherwise do nothing."""
    if obs.in_room_flag and day == d_max:
        return SwitchAction.TELL
    return SwitchAction.NONE


def oracle_policy(state: SwitchState) -> SwitchAction:
    """Full-state observer: the in-room agent Tells exactly when all have visited."""
    if len(state.visited) == state.n:
        return SwitchAction.TELL
    return SwitchAction.NONE


# ---------------------------------------------------------------------------
# Episode runners producing traces
# ---------------------------------------------------------------------------

def run_switch_episode(n: int, d_max: int, rng, act, seed=None,
                       initial_on: bool = False) -> EpisodeTrace:
    """Drive one switch episode with act(state) -> SwitchAction for the visitor."""
    state = switch_reset(n, d_max, rng, initial_on=initial_on)
    steps = []
    visited_counts = []
    while not state.terminal:
        obs = switch_observe(state, state.in_room)
        action = act(state)
        steps.append(
            TraceStep(
                agent=state.in_room,
                obs={"ir": True, "sw": int(state.switch_on)},
                action=action.value,
            )
        )
        visited_counts.append(len(state.visited))
        state = switch_step(state, action, rng)
    return EpisodeTrace(
        riddle="switch",
        n=n,
        d_max=d_max,
        seed=seed,
        steps=steps,
        reward=state.final_reward,
        visited_counts=visited_counts,
    )


def counter_act(n: int):
    """Stateful counter-protocol actor for run_switch_episode; agent 1 counts."""
    memories = {m: CounterMemory(is_counter=(m == 1)) for m in range(1, n + 1)}

    def act(state: SwitchState) -> SwitchAction:
        m = state.in_room
        action, memories[m] = counter_policy(switch_observe(state, m), memories[m], n)
        return action

    return act


def tell_on_last_day_act(d_max: int):
    def act(state: SwitchState) -> SwitchAction:
        return tell_on_last_day_policy(
            switch_observe(state, state.in_room), state.day, d_max
        )

    return act


def run_switch_episodes(n, d_max, episodes, rng, policy="counter", seed=None):
    """Generate EpisodeTraces for a named hand-coded policy.

    All episodes are simulated in lock-step (a day loop over vectorised
    episode state); stepping the environment object per day is an order of
    magnitude slower at the 10^5-episode scale used for exactness checks.
    """
    if policy not in ("counter", "tell_on_last_day", "oracle"):
        raise InvalidConfigError(f"unknown switch policy {policy!r}")
    visitors = rng.integers(1, n + 1, size=(episodes, d_max))
    rows = np.arange(episodes)
    sw = np.zeros(episodes, dtype=bool)
    visited = np.zeros((episodes, n + 1), dtype=bool)
    used_on = np.zeros((episodes, n + 1), dtype=bool)  # one On per non-counter
    count = np.zeros(episodes, dtype=np.int64)
    active = np.ones(episodes, dtype=bool)
    reward = np.zeros(episodes)
    length = np.zeros(episodes, dtype=np.int64)
    sw_log = np.zeros((episodes, d_max), dtype=np.int64)
    act_log = np.full((episodes, d_max), SwitchAction.NONE.value, dtype=np.int64)
    visited_log = np.zeros((episodes, d_max), dtype=np.int64)

    no_action = np.zeros(episodes, dtype=bool)
    for t in range(d_max):
        day = t + 1
        vis = visitors[:, t]
        visited[rows[active], vis[active]] = True
        full = visited[:, 1:].sum(axis=1) == n
        sw_log[:, t] = sw
        visited_log[:, t] = visited[:, 1:].sum(axis=1)
        if policy == "counter":
            is_counter = vis == 1
            pre_tell = active & is_counter & (count >= n - 1)
            counted = active & is_counter & sw & ~pre_tell
            count[counted] += 1
            tell = active & is_counter & (count >= n - 1)
            off = counted & ~tell
            on = active & ~is_counter & ~sw & ~used_on[rows, vis]
            used_on[rows[on], vis[on]] = True
        elif policy == "tell_on_last_day":
            tell = active & (day == d_max)
            off = on = no_action
        else:  # oracle: Tell exactly when coverage is complete
            tell = active & full
            off = on = no_action
        act_log[tell, t] = SwitchAction.TELL.value
        act_log[off, t] = SwitchAction.OFF.value
        act_log[on, t] = SwitchAction.ON.value
        sw = np.where(on, True, np.where(off, False, sw))
        reward[tell] = np.where(full[tell], 1.0, -1.0)
        length[active] = day
        active &= ~tell
        if not active.any():
            break

    for e in range(episodes):
        end = int(length[e])
        vis_row = visitors[e, :end].tolist()
        sw_row = sw_log[e, :end].tolist()
        act_row = act_log[e, :end].tolist()
        steps = [
            TraceStep(agent=vis_row[t], obs={"ir": True, "sw": sw_row[t]},
                      action=act_row[t])
            for t in range(end)
        ]
        yield EpisodeTrace(
            riddle="switch",
            n=n,
            d_max=d_max,
            seed=seed,
            steps=steps,
            reward=float(reward[e]),
            visited_counts=visited_log[e, :end].tolist(),
        )


def run_hats_episode(n: int, rng, policy=parity_policy, seed=None,
                     hats=None) -> EpisodeTrace:
    """Drive one hats episode with policy(observation) -> HatColour."""
    if hats is None:
        state = hats_reset(n, rng)
    else:
        from .env import HatsState

        state = HatsState(n=n, hats=tuple(hats), answers=(None,) * n, step=0)
    steps = []
    for m in range(1, n + 1):
        obs = hats_observe(state, m)
        answer = policy(obs)
        steps.append(
            TraceStep(
                agent=m,
                obs={
                    "heard": [h.value for h in obs.heard],
                    "seen": [h.value for h in obs.seen],
                },
                action=answer.value,
            )
        )
        state = hats_step(state, m, answer)
    return EpisodeTrace(
        riddle="hats",
        n=n,
        d_max=None,
        seed=seed,
        steps=steps,
        reward=hats_reward(state),
        hats=[h.value for h in state.hats],
    )


# ---------------------------------------------------------------------------
# Exact expected values
# ---------------------------------------------------------------------------

class ExactMethod(Enum):
    ENUMERATION = "enumeration"
    MARKOV_CHAIN = "markov_chain"
    CLOSED_FORM = "closed_form"


@dataclass(frozen=True)
class ExactValue:
    value: Fraction
    method: ExactMethod

    def to_decimal(self, significant_digits: int = 12) -> str:
        return f"{float(self.value):.{significant_digits}g}"


EXACT_N_BOUND = 10
EXACT_D_MAX_BOUND = 64


def coverage_probability_closed_form(n: int, d: int) -> Fraction:
    """P(all n agents drawn within d uniform draws), by inclusion-exclusion."""
    total = Fraction(0)
    for k in range(n + 1):
        total += (-1) ** k * comb(n, k) * Fraction(n - k, n) ** d
    return total


def coverage_probability_markov(n: int, d: int) -> Fraction:
    """Same probability via the absorbing chain over the visited count.

    State k moves to k+1 with probability (n-k)/n and stays otherwise; start
    at k=0 and take one transition per daily draw.
    """
    probs = [Fraction(0)] * (n + 1)
    probs[0] = Fraction(1)
    for _ in range(d):
        nxt = [Fraction(0)] * (n + 1)
        for k in range(n + 1):
            if probs[k] == 0:
                continue
            nxt[k] += probs[k] * Fraction(k, n)
            if k < n:
                nxt[k + 1] += probs[k] * Fraction(n - k, n)
        probs = nxt
    return probs[n]


def exact_expected_reward(policy: str, n: int, d_max: int) -> ExactValue:
    """Exact expected episode reward of a hand-coded switch policy.

    "oracle": +1 iff all agents are drawn within the horizon (the completing
    visitor Tells immediately), else the episode expires at 0.
    "tell_on_last_day": Tell always resolves on day d_max, so the reward is
    +1 with the coverage probability through day d_max and -1 otherwise.
    """
    if not 1 <= n <= EXACT_N_BOUND:
        raise BoundsError(f"exact computation bounded at n <= {EXACT_N_BOUND}, got {n}")
    if not 1 <= d_max <= EXACT_D_MAX_BOUND:
        raise BoundsError(
            f"exact computation bounded at d_max <= {EXACT_D_MAX_BOUND}, got {d_max}"
        )
    p_closed = coverage_probability_closed_form(n, d_max)
    p_markov = coverage_probability_markov(n, d_max)
    if p_closed != p_markov:
        raise AssertionError(
            f"inclusion-exclusion and Markov chain disagree: {p_closed} vs {p_markov}"
        )
    if policy == "oracle":
        return ExactValue(value=p_closed, method=ExactMethod.CLOSED_FORM)
    if policy == "tell_on_last_day":
        return ExactValue(value=2 * p_closed - 1, method=ExactMethod.CLOSED_FORM)
    raise InvalidConfigError(f"unknown policy {policy!r}")
