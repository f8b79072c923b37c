"""Strategy extraction and verification over logged episode traces.

Works purely on behaviour: everything here is reconstructed from the JSONL
trace stream (visitor sequence, switch positions, actions), never from
network internals.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from statistics import NormalDist
from typing import Optional

import numpy as np

from .env import SwitchAction
from .errors import AlignmentError, EmptyInputError

ACTION_NAMES = {a.value: a.name.capitalize() for a in SwitchAction}


# ---------------------------------------------------------------------------
# Parity agreement (hats)
# ---------------------------------------------------------------------------

def parity_agreement(traces) -> float:
    """Fraction of episodes where agent 1 announces the parity encoding.

    The encoding is fixed-polarity: Blue iff the number of blue hats among
    agents 2..n is even.  A learned protocol that uses the opposite polarity
    scores near 0 here by design; callers interested in either polarity can
    compare max(x, 1 - x) themselves.
    """
    matches = 0
    total = 0
    for trace in traces:
        blues_seen = sum(1 for h in trace.hats[1:] if h == 0)
        expected = 0 if blues_seen % 2 == 0 else 1
        matches += int(trace.steps[0].action == expected)
        total += 1
    if total == 0:
        raise EmptyInputError("parity_agreement needs at least one episode")
    return matches / total


# ---------------------------------------------------------------------------
# Action-frequency table (switch)
# ---------------------------------------------------------------------------

@dataclass
class FrequencyTable:
    """Counts of in-room actions bucketed by (day, prior distinct visitors)."""

    counts: dict = field(default_factory=dict)  # (day, visited) -> {action: count}

    def add(self, day: int, visited: int, action: int) -> None:
        cell = self.counts.setdefault((day, visited), {})
        cell[action] = cell.get(action, 0) + 1

    def to_csv_rows(self):
        """(day, visited, action, count) rows, sorted, with action names."""
        rows = []
        for (day, visited) in sorted(self.counts):
            cell = self.counts[(day, visited)]
            for action in sorted(cell):
                rows.append((day, visited, ACTION_NAMES[action], cell[action]))
        return rows


def action_frequency(traces) -> FrequencyTable:
    table = FrequencyTable()
    for trace in traces:
        for t, step in enumerate(trace.steps):
            table.add(t + 1, trace.visited_counts[t], step.action)
    return table


# ---------------------------------------------------------------------------
# Decision-tree extraction (switch)
# ---------------------------------------------------------------------------

DEFAULT_TREE_FEATURES = ("day_bucket", "switch", "visited_before")

# Extended feature set able to express protocols that hinge on agent roles,
# e.g. a designated counter.  All of these are reconstructed from the trace.
ROLE_TREE_FEATURES = ("agent_first", "switch", "acted_on_before", "prior_offs_full")


@dataclass
class DecisionTreeNode:
    action: int  # majority action at this node
    purity: float
    count: int
    feature: Optional[str] = None  # None at leaves
    children: dict = field(default_factory=dict)  # feature value -> node

    @property
    def is_leaf(self) -> bool:
        return self.feature is None

    def to_text(self, indent: int = 0) -> str:
        pad = "  " * indent
        if self.is_leaf:
            return (
                f"{pad}-> {ACTION_NAMES[self.action]} "
                f"(purity {self.purity:.3f}, count {self.count})"
            )
        lines = [f"{pad}[{self.feature}]"]
        for value in sorted(self.children, key=str):
            lines.append(f"{pad}  = {value}:")
            lines.append(self.children[value].to_text(indent + 2))
        return "\n".join(lines)

    def to_json_dict(self) -> dict:
        doc = {
            "action": ACTION_NAMES[self.action],
            "purity": self.purity,
            "count": self.count,
        }
        if not self.is_leaf:
            doc["feature"] = self.feature
            doc["children"] = {
                str(v): node.to_json_dict() for v, node in self.children.items()
            }
        return doc

    def leaves(self):
        if self.is_leaf:
            return [self]
        out = []
        for node in self.children.values():
            out.extend(node.leaves())
        return out


def _day_bucket(day: int, day_buckets) -> str:
    for bound in day_buckets:
        if day <= bound:
            return str(bound)
    return f">{day_buckets[-1]}"


def tree_samples(traces, day_buckets=(1, 2)):
    """One feature dict per in-room decision, reconstructed from the trace."""
    samples = []
    for trace in traces:
        seen_agents = set()
        on_agents = set()
        offs = 0
        for t, step in enumerate(trace.steps):
            samples.append(
                {
                    "day_bucket": _day_bucket(t + 1, day_buckets),
                    "switch": step.obs["sw"],
                    "visited_before": step.agent in seen_agents,
                    "agent_first": step.agent == 1,
                    "acted_on_before": step.agent in on_agents,
                    "prior_offs_full": offs >= trace.n - 2,
                    "action": step.action,
                }
            )
            seen_agents.add(step.agent)
            if step.action == SwitchAction.ON.value:
                on_agents.add(step.agent)
            if step.action == SwitchAction.OFF.value:
                offs += 1
    return samples


def _majority(samples):
    counts = {}
    for s in samples:
        counts[s["action"]] = counts.get(s["action"], 0) + 1
    action = max(sorted(counts), key=counts.get)
    return action, counts[action] / len(samples)


def _build_tree(samples, features, purity_floor):
    action, purity = _majority(samples)
    node = DecisionTreeNode(action=action, purity=purity, count=len(samples))
    if purity >= purity_floor or not features:
        return node
    best = None
    for feature in features:
        groups = {}
        for s in samples:
            groups.setdefault(s[feature], []).append(s)
        if len(groups) < 2:
            continue
        score = sum(_majority(g)[1] * len(g) for g in groups.values()) / len(samples)
        if best is None or score > best[0]:
            best = (score, feature, groups)
    if best is None:
        return node
    _, feature, groups = best
    remaining = tuple(f for f in features if f != feature)
    node.feature = feature
    node.children = {
        value: _build_tree(group, remaining, purity_floor)
        for value, group in groups.items()
    }
    return node


def extract_decision_tree(traces, purity_floor: float = 1.0,
                          features=DEFAULT_TREE_FEATURES,
                          day_buckets=(1, 2)) -> DecisionTreeNode:
    """Greedy recursive partition of in-room decisions.

    At each node the feature whose split maximises the weighted majority
    purity is chosen; recursion stops once a node's purity reaches
    purity_floor, no feature improves on it, or the features are exhausted.
    """
    samples = tree_samples(traces, day_buckets)
    if not samples:
        raise EmptyInputError("extract_decision_tree needs at least one decision")
    return _build_tree(samples, tuple(features), purity_floor)


# ---------------------------------------------------------------------------
# Communication-emergence detection
# ---------------------------------------------------------------------------

def confidence_interval(values, confidence: float = 0.95):
    """Normal-approximation (mean, half width) across seeds."""
    values = np.asarray(values, dtype=np.float64)
    mean = float(values.mean())
    if values.size < 2:
        return mean, 0.0
    z = NormalDist().inv_cdf(0.5 + confidence / 2.0)
    half = z * float(values.std(ddof=1)) / np.sqrt(values.size)
    return mean, half


def _group_by_episode(rows):
    grid = {}
    for row in rows:
        grid.setdefault(row.episode, []).append(row.norm_reward)
    return grid


def divergence_point(metrics_a, metrics_b, confidence: float = 0.95,
                     run_length: int = 3) -> Optional[int]:
    """Earliest evaluation episode from which stream a separates above b.

    Separation means the seeds' 95% confidence intervals stop overlapping
    (a's lower bound above b's upper bound) for run_length consecutive grid
    points.  Returns None if that never happens.
    """
    grid_a = _group_by_episode(metrics_a)
    grid_b = _group_by_episode(metrics_b)
    if not grid_a or not grid_b:
        raise EmptyInputError("divergence_point needs non-empty metric streams")
    if sorted(grid_a) != sorted(grid_b):
        raise AlignmentError("metric streams are on different evaluation grids")
    episodes = sorted(grid_a)
    separated = []
    for ep in episodes:
        mean_a, half_a = confidence_interval(grid_a[ep], confidence)
        mean_b, half_b = confidence_interval(grid_b[ep], confidence)
        separated.append(mean_a - half_a > mean_b + half_b)
    for i in range(len(episodes) - run_length + 1):
        if all(separated[i : i + run_length]):
            return episodes[i]
    return None


# ---------------------------------------------------------------------------
# Outcome rates (switch)
# ---------------------------------------------------------------------------

def outcome_rates(traces) -> dict:
    """Fractions of episodes ending in a premature Tell, a correct Tell,
    or horizon expiry; the three sum to 1."""
    false_positive = success = expiry = total = 0
    for trace in traces:
        total += 1
        if trace.steps and trace.steps[-1].action == SwitchAction.TELL.value:
            if trace.visited_counts[-1] < trace.n:
                false_positive += 1
            else:
                success += 1
        else:
            expiry += 1
    if total == 0:
        raise EmptyInputError("outcome_rates needs at least one episode")
    return {
        "false_positive": false_positive / total,
        "success": success / total,
        "expiry": expiry / total,
    }


def false_positive_rate(traces) -> float:
    """Fraction of episodes ending in Tell before all agents have visited."""
    return outcome_rates(traces)["false_positive"]
