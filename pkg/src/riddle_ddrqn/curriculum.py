"""Adaptive curriculum over the agent count n, shared by both riddles.

Training samples n from {n_min .. n_cap}; the cap is raised whenever the
smoothed performance at the cap becomes near optimal.  The default sampling
weight is 1 / (gap + delta) with gap = 1 - normalised performance, i.e.
inversely proportional to the performance gap; the proportional-to-gap
alternative is available via weight_mode="gap".
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace


@dataclass(frozen=True)
class CurriculumState:
    n_min: int
    n_cap: int
    n_max: int
    perf: dict = field(default_factory=dict)  # n -> smoothed normalised reward in [0, 1]
    promote_threshold: float = 0.95
    smoothing: float = 0.1  # exponential smoothing coefficient for perf updates
    delta: float = 0.05  # sampling-weight floor
    weight_mode: str = "inverse_gap"  # "inverse_gap" | "gap"

    def __post_init__(self):
        if not self.n_min <= self.n_cap <= self.n_max:
            raise ValueError(
                f"need n_min <= n_cap <= n_max, got {self.n_min}, {self.n_cap}, {self.n_max}"
            )
        if self.weight_mode not in ("inverse_gap", "gap"):
            raise ValueError(f"unknown weight_mode {self.weight_mode!r}")


def sampling_weights(state: CurriculumState):
    """Normalised sampling weights over {n_min .. n_cap}; all strictly positive."""
    levels = list(range(state.n_min, state.n_cap + 1))
    raw = []
    for n in levels:
        gap = 1.0 - state.perf.get(n, 0.0)
        if state.weight_mode == "inverse_gap":
            raw.append(1.0 / (gap + state.delta))
        else:
            raw.append(gap + state.delta)
    total = sum(raw)
    return levels, [w / total for w in raw]


def sample_n(state: CurriculumState, rng) -> int:
    levels, weights = sampling_weights(state)
    return int(levels[rng.choice(len(levels), p=weights)])


def update_and_promote(state: CurriculumState, n: int, eval_norm_reward: float) -> CurriculumState:
    """Fold one evaluation into the smoothed performance; promote at the cap."""
    reward = min(1.0, max(0.0, eval_norm_reward))
    perf = dict(state.perf)
    beta = state.smoothing
    if n in perf:
        perf[n] = (1.0 - beta) * perf[n] + beta * reward
    else:
        # seed the average with the first sample; starting from zero would
        # take ~1/beta evaluations to approach the true level
        perf[n] = reward
    n_cap = state.n_cap
    if perf.get(n_cap, 0.0) >= state.promote_threshold and n_cap < state.n_max:
        n_cap += 1
    return replace(state, perf=perf, n_cap=n_cap)
