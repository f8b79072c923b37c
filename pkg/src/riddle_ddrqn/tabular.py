"""Tabular independent Q-learning baseline for the hats riddle.

Each agent owns a table keyed by the bit-encoding of (heard answers, seen
hats); the shared team reward drives terminal-only updates.  The key space
grows as 2^(n-1) per agent, which is what makes this baseline fall behind
the recurrent learner at larger n.
"""
from __future__ import annotations

import json

import numpy as np

from .errors import BoundsError
from .training import epsilon_for

TABULAR_N_BOUND = 12
DEFAULT_LR = 0.05


class QTable:
    """Per-agent action-value tables over observation bit keys."""

    def __init__(self, n: int):
        self.n = n
        self.tables = {m: {} for m in range(1, n + 1)}

    def values(self, m: int, key: int) -> np.ndarray:
        table = self.tables[m]
        if key not in table:
            table[key] = np.zeros(2, dtype=np.float64)
        return table[key]

    def to_json(self) -> str:
        doc = {
            "n": self.n,
            "tables": {
                str(m): {str(k): [float(q[0]), float(q[1])] for k, q in table.items()}
                for m, table in self.tables.items()
            },
        }
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text: str) -> "QTable":
        doc = json.loads(text)
        table = cls(int(doc["n"]))
        for m, entries in doc["tables"].items():
            table.tables[int(m)] = {
                int(k): np.array(q, dtype=np.float64) for k, q in entries.items()
            }
        return table


def _obs_key(answers, hats, m: int, n: int) -> int:
    """Bit-pack agent m's observation: heard answers then seen hats."""
    key = 0
    for a in answers[: m - 1]:
        key = (key << 1) | int(a)
    for h in hats[m:]:
        key = (key << 1) | int(h)
    return key


def _pick(q: np.ndarray, epsilon: float, rng) -> int:
    if epsilon > 0.0 and rng.random() < epsilon:
        return int(rng.integers(0, 2))
    if q[0] == q[1]:
        return int(rng.integers(0, 2))
    return int(np.argmax(q))


def _play_episode(table: QTable, n: int, epsilon: float, rng):
    hats = rng.integers(0, 2, size=n)
    answers = np.zeros(n, dtype=np.int64)
    keys = np.zeros(n, dtype=np.int64)
    for m in range(1, n + 1):
        key = _obs_key(answers, hats, m, n)
        keys[m - 1] = key
        answers[m - 1] = _pick(table.values(m, key), epsilon, rng)
    reward = float((answers == hats).sum())
    return hats, answers, keys, reward


def tabular_train(n: int, episodes: int, rng, lr: float = DEFAULT_LR,
                  epsilon=None, eval_every: int = 0, eval_episodes: int = 100,
                  on_eval=None):
    """Train per-agent tables with terminal updates Q += lr * (r - Q).

    Returns (table, evals) where evals is a list of (episode, greedy mean
    reward) pairs collected every eval_every episodes (none when 0).
    """
    if not 1 <= n <= TABULAR_N_BOUND:
        raise BoundsError(f"tabular baseline bounded at n <= {TABULAR_N_BOUND}, got {n}")
    if epsilon is None:
        epsilon = epsilon_for("hats", n)
    table = QTable(n)
    evals = []
    for episode in range(1, episodes + 1):
        _, answers, keys, reward = _play_episode(table, n, epsilon, rng)
        for m in range(1, n + 1):
            q = table.values(m, int(keys[m - 1]))
            a = int(answers[m - 1])
            q[a] += lr * (reward - q[a])
        if eval_every and episode % eval_every == 0:
            mean_reward = tabular_greedy_eval(table, n, eval_episodes, rng)
            evals.append((episode, mean_reward))
            if on_eval is not None:
                on_eval(episode, mean_reward)
    return table, evals


def tabular_greedy_eval(table: QTable, n: int, episodes: int, rng) -> float:
    """Mean team reward over greedy rollouts (ties broken at random)."""
    total = 0.0
    for _ in range(episodes):
        _, _, _, reward = _play_episode(table, n, 0.0, rng)
        total += reward
    return total / episodes
