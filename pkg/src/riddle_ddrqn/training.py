"""DDRQN training: variants, configuration, rollouts, Bellman targets, the loop.

The default variant is DDRQN itself (inter-agent weight sharing, last-action
input, no experience replay).  Every ablation from the paper's comparison is
reachable through VariantFlags, including the naive independent-DRQN baseline
and the disabled-switch probe.

Rollouts are batched: a whole mini-batch of episodes advances in lock step,
with every agent's recurrent state unrolled on every time step whether or not
that agent is in the interrogation room.
"""
from __future__ import annotations

from collections import deque
from dataclasses import asdict, dataclass, field, replace
from typing import Optional

import numpy as np

from .curriculum import CurriculumState, sample_n, update_and_promote
from .env import EpisodeTrace, SwitchAction, TraceStep, default_d_max, switch_reset, switch_step
from .errors import InvalidConfigError
from .nets import HatsNet, SwitchNet
from .strategies import exact_expected_reward, parity_expected_reward

NONE_ACTION = SwitchAction.NONE.value


# ---------------------------------------------------------------------------
# Variants and configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class VariantFlags:
    share_weights: bool = True
    last_action_input: bool = True
    experience_replay: bool = False
    switch_disabled: bool = False

    _NAMES = None  # populated below

    @property
    def name(self) -> str:
        for name, flags in VARIANTS.items():
            if flags == self:
                return name
        return "custom"

    @classmethod
    def from_name(cls, name: str) -> "VariantFlags":
        try:
            return VARIANTS[name]
        except KeyError:
            raise InvalidConfigError(
                f"unknown variant {name!r}; expected one of {sorted(VARIANTS)}"
            ) from None


VARIANTS = {
    "ddrqn": VariantFlags(),
    "no_share": VariantFlags(share_weights=False),
    "no_last_action": VariantFlags(last_action_input=False),
    "replay": VariantFlags(experience_replay=True),
    "naive": VariantFlags(share_weights=False, last_action_input=False,
                          experience_replay=True),
    "switch_disabled": VariantFlags(switch_disabled=True),
}

ABLATION_VARIANTS = ("ddrqn", "no_share", "no_last_action", "replay", "naive")


def epsilon_for(riddle: str, n: int) -> float:
    """Exploration rates: 1 - 0.5^(1/n) for hats, 0.05 for switch."""
    if riddle == "hats":
        return 1.0 - 0.5 ** (1.0 / n)
    return 0.05


@dataclass(frozen=True)
class CurriculumConfig:
    n_min: int
    n_max: int
    promote_threshold: float = 0.95
    smoothing: float = 0.1
    delta: float = 0.05
    weight_mode: str = "inverse_gap"


@dataclass
class TrainConfig:
    riddle: str
    n: int
    flags: VariantFlags = field(default_factory=VariantFlags)
    d_max: Optional[int] = None  # switch only; defaults to 4n - 6
    gamma: float = 0.95
    alpha_minus: float = 0.01
    lr: float = 1e-3
    batch_episodes: int = 20
    eval_every: int = 100
    eval_episodes: int = 100
    max_episodes: int = 10_000
    replay_capacity: int = 5000  # ablation-only; used when experience_replay is set
    hidden: Optional[int] = None  # defaults: 64 for hats, 128 for switch
    init_scale: Optional[float] = None  # default 1/sqrt(fan_in) per matrix
    forget_bias: float = 1.0
    initial_switch_on: bool = False
    curriculum: Optional[CurriculumConfig] = None
    seed: int = 0
    stop_at_norm: Optional[float] = None  # early stop once reached on consecutive evals
    stop_patience: int = 2
    checkpoint_every: int = 0

    def validate(self) -> None:
        if self.riddle not in ("hats", "switch"):
            raise InvalidConfigError(f"unknown riddle {self.riddle!r}")
        if self.n < 1:
            raise InvalidConfigError(f"need n >= 1, got {self.n}")
        if self.riddle == "hats" and self.flags.switch_disabled:
            raise InvalidConfigError("switch_disabled only applies to the switch riddle")
        if self.batch_episodes < 1 or self.eval_episodes < 1 or self.max_episodes < 1:
            raise InvalidConfigError("episode counts must be positive")
        if self.eval_every % self.batch_episodes != 0:
            raise InvalidConfigError(
                "eval_every must be a multiple of batch_episodes "
                f"({self.eval_every} vs {self.batch_episodes})"
            )
        if not 0.0 <= self.gamma < 1.0:
            raise InvalidConfigError(f"gamma must be in [0, 1), got {self.gamma}")
        if self.curriculum is not None:
            if self.flags.experience_replay:
                raise InvalidConfigError("curriculum cannot be combined with replay")
            if not self.flags.share_weights:
                raise InvalidConfigError("curriculum requires inter-agent weight sharing")
            if self.curriculum.n_min < 1 or self.curriculum.n_min > self.curriculum.n_max:
                raise InvalidConfigError("curriculum needs 1 <= n_min <= n_max")

    @property
    def effective_d_max(self) -> int:
        return self.d_max if self.d_max is not None else default_d_max(self.n)

    @property
    def effective_hidden(self) -> int:
        return self.hidden if self.hidden is not None else (64 if self.riddle == "hats" else 128)

    @property
    def epsilon(self) -> float:
        return epsilon_for(self.riddle, self.n)

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc["flags"] = asdict(self.flags)
        doc["variant"] = self.flags.name
        if self.curriculum is not None:
            doc["curriculum"] = asdict(self.curriculum)
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "TrainConfig":
        doc = dict(doc)
        variant = doc.pop("variant", None)
        flags_doc = doc.pop("flags", None)
        if flags_doc is not None:
            flags = VariantFlags(**flags_doc)
        elif variant is not None:
            flags = VariantFlags.from_name(variant)
        else:
            flags = VariantFlags()
        cur_doc = doc.pop("curriculum", None)
        curriculum = CurriculumConfig(**cur_doc) if cur_doc else None
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(doc) - known
        if unknown:
            raise InvalidConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            cfg = cls(flags=flags, curriculum=curriculum, **doc)
        except TypeError as exc:
            raise InvalidConfigError(str(exc)) from exc
        cfg.validate()
        return cfg


@dataclass(frozen=True)
class MetricsRow:
    episode: int
    n: int
    variant: str
    seed: int
    mean_reward: float
    norm_reward: float
    loss: float
    epsilon: float
    n_cap: int


METRICS_COLUMNS = (
    "episode", "n", "variant", "seed",
    "mean_reward", "norm_reward", "loss", "epsilon", "n_cap",
)


# ---------------------------------------------------------------------------
# Episode records and replay
# ---------------------------------------------------------------------------

@dataclass
class SwitchEpisodeRecord:
    inputs: np.ndarray  # (T, n, input_dim)
    actions: np.ndarray  # (T, n); NONE for out-of-room agents
    rec_h: np.ndarray  # (T, n, hidden), hidden state after each step
    rec_c: np.ndarray
    reward: float
    length: int


@dataclass
class HatsEpisodeRecord:
    hats: np.ndarray  # (n,)
    answers: np.ndarray  # (n,)
    reward: float


class ReplayBuffer:
    """Uniform episode replay; only used by the replay/naive ablations."""

    def __init__(self, capacity: int):
        self.storage = deque(maxlen=capacity)

    def __len__(self):
        return len(self.storage)

    def extend(self, records) -> None:
        self.storage.extend(records)

    def sample(self, k: int, rng):
        idx = rng.integers(0, len(self.storage), size=k)
        return [self.storage[int(i)] for i in idx]


# ---------------------------------------------------------------------------
# Model assembly
# ---------------------------------------------------------------------------

@dataclass
class Model:
    riddle: str
    flags: VariantFlags
    n: int
    n_onehot: int
    hidden: int
    net: object  # SwitchNet | HatsNet
    stores: list
    targets: Optional[list]  # switch only
    adams: list

    @property
    def shared(self) -> bool:
        return self.flags.share_weights

    def store_index(self, agent: int) -> int:
        return 0 if self.shared else agent

    def groups(self, n_agents: int):
        """(store index, agent list) pairs covering all agents of an episode."""
        if self.shared:
            return [(0, list(range(n_agents)))]
        return [(a, [a]) for a in range(n_agents)]


def build_model(cfg: TrainConfig, rng) -> Model:
    hidden = cfg.effective_hidden
    if cfg.riddle == "switch":
        n_onehot = cfg.curriculum.n_max if cfg.curriculum else cfg.n
        net = SwitchNet(n_onehot=n_onehot, hidden=hidden)
    else:
        n_onehot = cfg.n
        net = HatsNet(hidden=hidden)
    n_stores = 1 if cfg.flags.share_weights else cfg.n
    stores = []
    for _ in range(n_stores):
        params = net.build_params()
        net.init_params(params, rng, scale=cfg.init_scale, forget_bias=cfg.forget_bias)
        stores.append(params)
    targets = [s.clone() for s in stores] if cfg.riddle == "switch" else None
    adams = [  # one optimiser per online store
        _new_adam(stores[i], cfg.lr) for i in range(n_stores)
    ]
    return Model(
        riddle=cfg.riddle,
        flags=cfg.flags,
        n=cfg.n,
        n_onehot=n_onehot,
        hidden=hidden,
        net=net,
        stores=stores,
        targets=targets,
        adams=adams,
    )


def _new_adam(store, lr):
    from .nncore import AdamState

    return AdamState(store.size, lr=lr)


# ---------------------------------------------------------------------------
# Rollouts
# ---------------------------------------------------------------------------

def rollout_batch(model: Model, cfg: TrainConfig, episodes: int, epsilon: float,
                  rng, n: Optional[int] = None, collect_records: bool = True,
                  collect_traces: bool = False):
    """Run a batch of episodes in lock step.

    Returns (records, rewards, traces); records/traces are empty lists when
    not collected.
    """
    if model.riddle == "switch":
        return _rollout_switch(model, cfg, episodes, epsilon, rng, n,
                               collect_records, collect_traces)
    return _rollout_hats(model, cfg, episodes, epsilon, rng, n,
                         collect_records, collect_traces)


def _rollout_switch(model, cfg, episodes, epsilon, rng, n, collect_records,
                    collect_traces):
    n_agents = n if n is not None else cfg.n
    d_max = cfg.effective_d_max if n_agents == cfg.n else default_d_max(n_agents)
    net: SwitchNet = model.net
    E, hid, D = episodes, model.hidden, net.input_dim
    flags = model.flags

    states = [
        switch_reset(n_agents, d_max, rng, initial_on=cfg.initial_switch_on)
        for _ in range(E)
    ]
    H = np.zeros((E, n_agents, hid))
    C = np.zeros((E, n_agents, hid))
    last_action = np.full((E, n_agents), -1, dtype=np.int64)  # -1 -> zero one-hot
    active = np.ones(E, dtype=bool)
    lengths = np.zeros(E, dtype=np.int64)
    rewards = np.zeros(E)
    agent_ids = np.tile(np.arange(n_agents), (E, 1))
    step_X, step_act, step_H, step_C = [], [], [], []
    trace_days = []

    for day in range(1, d_max + 1):
        if not active.any():
            break
        sw = np.array([s.switch_on for s in states], dtype=np.float64)
        in_room0 = np.array([s.in_room - 1 for s in states], dtype=np.int64)
        ir = (agent_ids == in_room0[:, None]).astype(np.float64)
        if flags.switch_disabled:
            sw_in = np.zeros_like(ir)
        else:
            sw_in = ir * sw[:, None]
        la = last_action if flags.last_action_input else np.full_like(last_action, -1)
        X = net.make_inputs(
            sw_in.ravel(), ir.ravel(), la.ravel(), agent_ids.ravel(), n_agents
        ).reshape(E, n_agents, D)

        Q = np.empty((E, n_agents, 4))
        H2 = np.empty_like(H)
        C2 = np.empty_like(C)
        for si, agents in model.groups(n_agents):
            xs = X[:, agents].reshape(-1, D)
            hs = H[:, agents].reshape(-1, hid)
            cs = C[:, agents].reshape(-1, hid)
            q, h2, c2, _ = net.step_forward(model.stores[si], xs, hs, cs)
            Q[:, agents] = q.reshape(E, len(agents), 4)
            H2[:, agents] = h2.reshape(E, len(agents), hid)
            C2[:, agents] = c2.reshape(E, len(agents), hid)

        explore = rng.random(E) < epsilon
        rand_a = rng.integers(0, 4, size=E)
        greedy = np.argmax(Q[np.arange(E), in_room0], axis=1)
        chosen = np.where(explore, rand_a, greedy)
        actions = np.full((E, n_agents), NONE_ACTION, dtype=np.int64)
        actions[np.arange(E), in_room0] = chosen

        if collect_records:
            step_X.append(X)
            step_act.append(actions)
            step_H.append(H2)
            step_C.append(C2)
        if collect_traces:
            visited_now = np.array([len(s.visited) for s in states])
            trace_days.append((in_room0 + 1, sw.astype(int), chosen.copy(), visited_now))

        for e in range(E):
            if not active[e]:
                continue
            nxt = switch_step(states[e], SwitchAction(int(chosen[e])), rng)
            states[e] = nxt
            if nxt.terminal:
                active[e] = False
                lengths[e] = day
                rewards[e] = nxt.final_reward
        last_action = actions
        H, C = H2, C2

    records = []
    if collect_records:
        Xs = np.stack(step_X)
        As = np.stack(step_act)
        Hs = np.stack(step_H)
        Cs = np.stack(step_C)
        for e in range(E):
            T = int(lengths[e])
            records.append(
                SwitchEpisodeRecord(
                    inputs=Xs[:T, e],
                    actions=As[:T, e],
                    rec_h=Hs[:T, e],
                    rec_c=Cs[:T, e],
                    reward=float(rewards[e]),
                    length=T,
                )
            )
    traces = []
    if collect_traces:
        for e in range(E):
            T = int(lengths[e])
            steps = []
            visited_counts = []
            for t in range(T):
                rooms, sws, acts, vis = trace_days[t]
                steps.append(
                    TraceStep(
                        agent=int(rooms[e]),
                        obs={"ir": True, "sw": int(sws[e])},
                        action=int(acts[e]),
                    )
                )
                visited_counts.append(int(vis[e]))
            traces.append(
                EpisodeTrace(
                    riddle="switch",
                    n=n_agents,
                    d_max=d_max,
                    seed=cfg.seed,
                    steps=steps,
                    reward=float(rewards[e]),
                    visited_counts=visited_counts,
                )
            )
    return records, rewards, traces


def _rollout_hats(model, cfg, episodes, epsilon, rng, n, collect_records,
                  collect_traces):
    n_agents = n if n is not None else cfg.n
    net: HatsNet = model.net
    E = episodes
    hats = rng.integers(0, 2, size=(E, n_agents))
    answers = np.zeros((E, n_agents), dtype=np.int64)
    for m in range(1, n_agents + 1):
        heard = answers[:, : m - 1].astype(np.float64)
        seen = hats[:, m:].astype(np.float64)
        si = model.store_index(m - 1)
        q, _ = net.forward_decision(model.stores[si], heard, seen, m, n_agents)
        greedy = np.argmax(q, axis=1)
        explore = rng.random(E) < epsilon
        rand = rng.integers(0, 2, size=E)
        answers[:, m - 1] = np.where(explore, rand, greedy)
    rewards = (answers == hats).sum(axis=1).astype(np.float64)

    records = []
    if collect_records:
        records = [
            HatsEpisodeRecord(hats=hats[e].copy(), answers=answers[e].copy(),
                              reward=float(rewards[e]))
            for e in range(E)
        ]
    traces = []
    if collect_traces:
        for e in range(E):
            steps = [
                TraceStep(
                    agent=m,
                    obs={
                        "heard": [int(a) for a in answers[e, : m - 1]],
                        "seen": [int(h) for h in hats[e, m:]],
                    },
                    action=int(answers[e, m - 1]),
                )
                for m in range(1, n_agents + 1)
            ]
            traces.append(
                EpisodeTrace(
                    riddle="hats",
                    n=n_agents,
                    d_max=None,
                    seed=cfg.seed,
                    steps=steps,
                    reward=float(rewards[e]),
                    hats=[int(h) for h in hats[e]],
                )
            )
    return records, rewards, traces


# ---------------------------------------------------------------------------
# Bellman targets and parameter updates
# ---------------------------------------------------------------------------

def compute_targets(model: Model, record: SwitchEpisodeRecord, gamma: float) -> np.ndarray:
    """Per-step, per-agent target values for one switch episode.

    The terminal step regresses on the raw reward and never consults the
    target network; earlier steps bootstrap from the target store fed with
    the recorded next input and recorded hidden state.
    """
    net: SwitchNet = model.net
    T, n_agents = record.actions.shape
    y = np.zeros((T, n_agents))
    for si, agents in model.groups(n_agents):
        target = model.targets[si]
        for t in range(1, T):
            q, _, _, _ = net.step_forward(
                target,
                record.inputs[t, agents],
                record.rec_h[t - 1, agents],
                record.rec_c[t - 1, agents],
            )
            y[t - 1, agents] = gamma * q.max(axis=1)
    y[T - 1, :] = record.reward
    return y


def train_switch_batch(model: Model, records, cfg: TrainConfig) -> float:
    """One DDRQN update from a batch of episodes; returns the mean squared error."""
    net: SwitchNet = model.net
    E = len(records)
    n_agents = records[0].inputs.shape[1]
    hid, D = model.hidden, net.input_dim
    Tmax = max(r.length for r in records)
    total_sq = 0.0
    total_count = 0

    for si, agents in model.groups(n_agents):
        nA = len(agents)
        R = E * nA
        X = np.zeros((R, Tmax, D))
        act = np.zeros((R, Tmax), dtype=np.int64)
        recH = np.zeros((R, Tmax, hid))
        recC = np.zeros((R, Tmax, hid))
        L = np.zeros(R, dtype=np.int64)
        final_r = np.zeros(R)
        for e, rec in enumerate(records):
            T = rec.length
            sl = slice(e * nA, (e + 1) * nA)
            X[sl, :T] = rec.inputs[:T, agents].transpose(1, 0, 2)
            act[sl, :T] = rec.actions[:T, agents].T
            recH[sl, :T] = rec.rec_h[:T, agents].transpose(1, 0, 2)
            recC[sl, :T] = rec.rec_c[:T, agents].transpose(1, 0, 2)
            L[sl] = T
            final_r[sl] = rec.reward

        # Bootstrapped targets from the lagged store and recorded hidden states.
        target = model.targets[si]
        y = np.zeros((R, Tmax))
        for t in range(1, Tmax):
            need = L > t
            if not need.any():
                break
            q, _, _, _ = net.step_forward(target, X[:, t], recH[:, t - 1], recC[:, t - 1])
            y[:, t - 1] = np.where(need, cfg.gamma * q.max(axis=1), y[:, t - 1])
        y[np.arange(R), L - 1] = final_r

        # Online forward pass (recomputed for gradients), then BPTT.
        store = model.stores[si]
        h = np.zeros((R, hid))
        c = np.zeros((R, hid))
        caches = []
        dQs = []
        rows = np.arange(R)
        for t in range(Tmax):
            q, h, c, cache = net.step_forward(store, X[:, t], h, c)
            caches.append(cache)
            valid = t < L
            diff = (q[rows, act[:, t]] - y[:, t]) * valid
            dq = np.zeros_like(q)
            dq[rows, act[:, t]] = 2.0 * diff
            dQs.append(dq)
            total_sq += float((diff ** 2).sum())
            total_count += int(valid.sum())
        dh = np.zeros((R, hid))
        dc = np.zeros((R, hid))
        for t in reversed(range(Tmax)):
            dh, dc = net.step_backward(store, dQs[t], dh, dc, caches[t])

        model.adams[si].apply(store)
        from .nncore import soft_update

        soft_update(target, store, cfg.alpha_minus)

    return total_sq / max(1, total_count)


def train_hats_batch(model: Model, records, cfg: TrainConfig) -> float:
    """One update on a batch of hats episodes.

    Every hats decision is terminal (the team reward is paid at episode end
    and no agent acts twice), so each Q-value regresses directly on the
    episode reward; no target network or discounting is involved.
    """
    net: HatsNet = model.net
    E = len(records)
    n_agents = records[0].hats.size
    hats = np.stack([r.hats for r in records])
    answers = np.stack([r.answers for r in records])
    rewards = np.array([r.reward for r in records])
    rows = np.arange(E)
    total_sq = 0.0
    touched = set()
    for m in range(1, n_agents + 1):
        si = model.store_index(m - 1)
        store = model.stores[si]
        heard = answers[:, : m - 1].astype(np.float64)
        seen = hats[:, m:].astype(np.float64)
        q, cache = net.forward_decision(store, heard, seen, m, n_agents)
        a = answers[:, m - 1]
        diff = q[rows, a] - rewards
        dq = np.zeros_like(q)
        dq[rows, a] = 2.0 * diff
        net.backward_decision(store, dq, cache)
        total_sq += float((diff ** 2).sum())
        touched.add(si)
    for si in sorted(touched):
        model.adams[si].apply(model.stores[si])
    return total_sq / (E * n_agents)


def train_batch(model: Model, records, cfg: TrainConfig) -> float:
    if model.riddle == "switch":
        return train_switch_batch(model, records, cfg)
    return train_hats_batch(model, records, cfg)


# ---------------------------------------------------------------------------
# Evaluation and the outer loop
# ---------------------------------------------------------------------------

def normalisation_denominator(riddle: str, n: int, d_max: Optional[int] = None) -> float:
    """Maximum/oracle expected reward used to normalise evaluation rewards."""
    if riddle == "hats":
        # The best achievable expectation is n - 1/2 (the parity protocol is
        # provably optimal), not n: no policy can make agent 1's answer
        # informative about its own hat.
        return float(parity_expected_reward(n))
    d = d_max if d_max is not None else default_d_max(n)
    return float(exact_expected_reward("oracle", n, d).value)


def evaluate(model: Model, cfg: TrainConfig, rng, n: Optional[int] = None):
    """Greedy evaluation; returns (mean reward, normalised reward)."""
    n_agents = n if n is not None else cfg.n
    _, rewards, _ = rollout_batch(
        model, cfg, cfg.eval_episodes, 0.0, rng, n=n_agents, collect_records=False
    )
    mean_reward = float(rewards.mean())
    d_max = cfg.effective_d_max if (cfg.riddle == "switch" and n_agents == cfg.n) else None
    denom = normalisation_denominator(cfg.riddle, n_agents, d_max)
    return mean_reward, mean_reward / denom


def generate_traces(model: Model, cfg: TrainConfig, episodes: int, rng,
                    epsilon: float = 0.0):
    """Roll out episodes under the current parameters and return their traces."""
    _, _, traces = rollout_batch(
        model, cfg, episodes, epsilon, rng,
        collect_records=False, collect_traces=True,
    )
    return traces


@dataclass
class TrainResult:
    config: TrainConfig
    metrics: list  # list[MetricsRow]
    model: Model
    episodes: int
    curriculum_state: Optional[CurriculumState] = None


def train(cfg: TrainConfig, on_metrics=None, on_checkpoint=None) -> TrainResult:
    """Run one training job: alternate batched rollouts and updates.

    Without experience replay (the DDRQN default) each collected batch is
    used for exactly one update and discarded; with replay, episodes enter
    the buffer and updates sample from it uniformly.  Greedy evaluations are
    produced every eval_every episodes.
    """
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    model = build_model(cfg, rng)
    buffer = ReplayBuffer(cfg.replay_capacity) if cfg.flags.experience_replay else None
    cur = None
    if cfg.curriculum is not None:
        cc = cfg.curriculum
        cur = CurriculumState(
            n_min=cc.n_min, n_cap=cc.n_min, n_max=cc.n_max,
            promote_threshold=cc.promote_threshold, smoothing=cc.smoothing,
            delta=cc.delta, weight_mode=cc.weight_mode,
        )
    metrics = []
    episodes_done = 0
    last_loss = float("nan")
    stop_hits = 0

    while episodes_done < cfg.max_episodes:
        n_b = sample_n(cur, rng) if cur is not None else cfg.n
        eps = epsilon_for(cfg.riddle, n_b)
        records, _, _ = rollout_batch(model, cfg, cfg.batch_episodes, eps, rng, n=n_b)
        episodes_done += cfg.batch_episodes
        if buffer is not None:
            buffer.extend(records)
            batch = buffer.sample(cfg.batch_episodes, rng)
        else:
            batch = records
        last_loss = train_batch(model, batch, cfg)

        if episodes_done % cfg.eval_every == 0:
            if cur is not None:
                row_reward = row_norm = 0.0
                for level in range(cur.n_min, cur.n_cap + 1):
                    mean_reward, norm = evaluate(model, cfg, rng, n=level)
                    if level == cur.n_cap:
                        row_reward, row_norm = mean_reward, norm
                    cur = update_and_promote(cur, level, norm)
                row_n = row_cap = cur.n_cap
                mean_reward, norm = row_reward, row_norm
            else:
                mean_reward, norm = evaluate(model, cfg, rng)
                row_n = row_cap = cfg.n
            row = MetricsRow(
                episode=episodes_done,
                n=row_n,
                variant=cfg.flags.name,
                seed=cfg.seed,
                mean_reward=mean_reward,
                norm_reward=norm,
                loss=last_loss,
                epsilon=epsilon_for(cfg.riddle, row_n),
                n_cap=row_cap,
            )
            metrics.append(row)
            if on_metrics is not None:
                on_metrics(row, model)
            if cfg.stop_at_norm is not None:
                stop_hits = stop_hits + 1 if norm >= cfg.stop_at_norm else 0
                if stop_hits >= cfg.stop_patience:
                    break
        if cfg.checkpoint_every and episodes_done % cfg.checkpoint_every == 0:
            if on_checkpoint is not None:
                on_checkpoint(episodes_done, model)

    return TrainResult(
        config=cfg, metrics=metrics, model=model,
        episodes=episodes_done, curriculum_state=cur,
    )
