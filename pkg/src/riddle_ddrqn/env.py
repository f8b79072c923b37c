"""Hats and switch riddles as episodic, partially observable multi-agent environments.

Both environments are exposed as pure state-transition functions over frozen
dataclasses.  The random source is always passed in explicitly, so identical
(config, seed) pairs reproduce identical trajectories.

Numeric encoding is fixed globally: Blue=0, Red=1 for hat colours and answers,
and On=0, Off=1, Tell=2, None=3 for switch actions.  Logs, tables and network
inputs all use this encoding.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple, Optional

from .errors import (
    DataError,
    InvalidConfigError,
    NotTerminalError,
    ProtocolViolationError,
)


class HatColour(Enum):
    BLUE = 0
    RED = 1


class SwitchAction(Enum):
    ON = 0
    OFF = 1
    TELL = 2
    NONE = 3


# ---------------------------------------------------------------------------
# Hats riddle
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HatsState:
    n: int
    hats: tuple  # tuple[HatColour, ...], length n
    answers: tuple  # tuple[Optional[HatColour], ...], length n; answers[k] set iff k < step
    step: int  # agents 1..step have answered

    @property
    def terminal(self) -> bool:
        return self.step == self.n


@dataclass(frozen=True)
class HatsObservation:
    heard: tuple  # answers a^1..a^{m-1}
    seen: tuple  # hats s^{m+1}..s^n
    agent_index: int  # m, 1-based
    n: int


def hats_reset(n: int, rng) -> HatsState:
    """Draw n hats independently and uniformly; nobody has answered yet."""
    if n < 1:
        raise InvalidConfigError(f"hats riddle needs n >= 1 agents, got {n}")
    hats = tuple(HatColour(int(b)) for b in rng.integers(0, 2, size=n))
    return HatsState(n=n, hats=hats, answers=(None,) * n, step=0)


def hats_observe(state: HatsState, m: int) -> HatsObservation:
    """Observation of the next-to-act agent: answers heard, hats seen ahead."""
    if m != state.step + 1 or not 1 <= m <= state.n:
        raise ProtocolViolationError(
            f"agent {m} cannot observe at step {state.step} (n={state.n})"
        )
    return HatsObservation(
        heard=state.answers[: m - 1],
        seen=state.hats[m:],
        agent_index=m,
        n=state.n,
    )


def hats_step(state: HatsState, m: int, answer: HatColour) -> HatsState:
    """Agent m announces its answer.  Agents act strictly in order 1..n."""
    if state.terminal:
        raise ProtocolViolationError("episode already terminal")
    if m != state.step + 1:
        raise ProtocolViolationError(
            f"agent {m} acted out of turn (expected agent {state.step + 1})"
        )
    answers = state.answers[: m - 1] + (answer,) + state.answers[m:]
    return HatsState(n=state.n, hats=state.hats, answers=answers, step=state.step + 1)


def hats_reward(state: HatsState) -> int:
    """Number of agents whose answer matches their own hat colour."""
    if not state.terminal:
        raise NotTerminalError("hats reward is only defined on terminal states")
    return sum(1 for h, a in zip(state.hats, state.answers) if h == a)


# ---------------------------------------------------------------------------
# Switch riddle
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SwitchState:
    n: int
    switch_on: bool
    in_room: int  # 1-based agent index of today's visitor
    visited: frozenset  # agent indices that have been in the room
    day: int  # >= 1
    d_max: int
    terminal: bool = False
    final_reward: int = 0  # in {-1, 0, +1}; nonzero only when terminal


@dataclass(frozen=True)
class SwitchObservation:
    in_room_flag: bool
    switch_seen: Optional[bool]  # present iff in the room


def default_d_max(n: int) -> int:
    """Episode horizon used in all experiments: 4n - 6, floored at 1."""
    return max(1, 4 * n - 6)


def switch_reset(n: int, d_max: int, rng, initial_on: bool = False) -> SwitchState:
    """Day 1: one visitor drawn uniformly; the switch starts off by default."""
    if n < 1:
        raise InvalidConfigError(f"switch riddle needs n >= 1 agents, got {n}")
    if d_max < 1:
        raise InvalidConfigError(f"switch riddle needs d_max >= 1, got {d_max}")
    visitor = int(rng.integers(1, n + 1))
    return SwitchState(
        n=n,
        switch_on=initial_on,
        in_room=visitor,
        visited=frozenset((visitor,)),
        day=1,
        d_max=d_max,
    )


def switch_observe(state: SwitchState, m: int) -> SwitchObservation:
    if state.terminal:
        raise ProtocolViolationError("episode already terminal")
    in_room = m == state.in_room
    return SwitchObservation(
        in_room_flag=in_room,
        switch_seen=state.switch_on if in_room else None,
    )


def switch_step(state: SwitchState, action: SwitchAction, rng) -> SwitchState:
    """Apply the in-room agent's action; all other agents implicitly take None.

    Tell ends the episode with reward +1 iff every agent has visited, else -1.
    Otherwise the day advances; past the horizon the episode expires at reward
    0, and otherwise a new visitor is drawn uniformly with replacement.
    """
    if state.terminal:
        raise ProtocolViolationError("episode already terminal")
    if action is SwitchAction.TELL:
        reward = 1 if len(state.visited) == state.n else -1
        return SwitchState(
            n=state.n,
            switch_on=state.switch_on,
            in_room=state.in_room,
            visited=state.visited,
            day=state.day,
            d_max=state.d_max,
            terminal=True,
            final_reward=reward,
        )
    if action is SwitchAction.ON:
        switch_on = True
    elif action is SwitchAction.OFF:
        switch_on = False
    else:
        switch_on = state.switch_on
    day = state.day + 1
    if day > state.d_max:
        return SwitchState(
            n=state.n,
            switch_on=switch_on,
            in_room=state.in_room,
            visited=state.visited,
            day=state.day,
            d_max=state.d_max,
            terminal=True,
            final_reward=0,
        )
    visitor = int(rng.integers(1, state.n + 1))
    return SwitchState(
        n=state.n,
        switch_on=switch_on,
        in_room=visitor,
        visited=state.visited | {visitor},
        day=day,
        d_max=state.d_max,
    )


# ---------------------------------------------------------------------------
# Episode traces
# ---------------------------------------------------------------------------

# a NamedTuple rather than a dataclass: traces are built in the millions and
# tuple construction is several times cheaper
class TraceStep(NamedTuple):
    agent: int  # acting agent (in-turn for hats, in-room for switch)
    obs: dict  # hats: {"heard": [...], "seen": [...]}; switch: {"ir": bool, "sw": 0|1|None}
    action: int  # numeric encoding (hat colour or switch action)


@dataclass
class EpisodeTrace:
    """Full record of one episode: the unit of logging and analysis."""

    riddle: str  # "hats" | "switch"
    n: int
    d_max: Optional[int]
    seed: Optional[int]
    steps: list  # list[TraceStep]
    reward: float
    visited_counts: list = field(default_factory=list)  # switch only, per day
    hats: Optional[list] = None  # hats only, the hidden assignment

    def to_json(self) -> str:
        doc = {
            "riddle": self.riddle,
            "n": self.n,
            "d_max": self.d_max,
            "seed": self.seed,
            "steps": [
                {"agent": s.agent, "obs": s.obs, "action": s.action}
                for s in self.steps
            ],
            "reward": self.reward,
            "visited_counts": self.visited_counts,
        }
        if self.hats is not None:
            doc["hats"] = self.hats
        return json.dumps(doc, separators=(",", ":"))

    @classmethod
    def from_json(cls, line: str) -> "EpisodeTrace":
        doc = json.loads(line)
        return cls(
            riddle=doc["riddle"],
            n=doc["n"],
            d_max=doc.get("d_max"),
            seed=doc.get("seed"),
            steps=[
                TraceStep(agent=s["agent"], obs=s["obs"], action=s["action"])
                for s in doc["steps"]
            ],
            reward=doc["reward"],
            visited_counts=doc.get("visited_counts", []),
            hats=doc.get("hats"),
        )


def write_traces_jsonl(traces, path) -> None:
    with open(path, "w") as fh:
        for trace in traces:
            fh.write(trace.to_json())
            fh.write("\n")


def read_traces_jsonl(path):
    """Load traces from JSONL; raises DataError with the offending line number."""
    traces = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                traces.append(EpisodeTrace.from_json(line))
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise DataError(f"bad trace on line {lineno}: {exc}", lineno) from exc
    return traces
