"""The two riddle-specific recurrent Q-network architectures.

Both are assembled from the nncore primitives and expose exact forward and
backward passes over batches; backpropagation through time is driven by the
training loop, which holds the per-step caches.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nncore import DenseLayer, LSTMCell, ParamStore, one_hot_rows

SWITCH_ACTIONS = 4
HAT_ACTIONS = 2


class SwitchNet:
    """Q-network for the switch riddle.

    Input (7 + n_onehot): switch bit, in-room bit, one-hot last action (4),
    one-hot agent index (n_onehot), and the agent count as a raw scalar.
    Two ReLU layers feed an LSTM; a two-hidden-layer head emits one Q-value
    per action (On, Off, Tell, None).
    """

    def __init__(self, n_onehot: int, hidden: int = 128):
        self.n_onehot = n_onehot
        self.hidden = hidden
        self.input_dim = 7 + n_onehot
        self.mlp1 = DenseLayer("in1", self.input_dim, hidden, "relu")
        self.mlp2 = DenseLayer("in2", hidden, hidden, "relu")
        self.lstm = LSTMCell("lstm", hidden, hidden)
        self.head1 = DenseLayer("out1", hidden, hidden, "relu")
        self.head2 = DenseLayer("out2", hidden, hidden, "relu")
        self.head3 = DenseLayer("out3", hidden, SWITCH_ACTIONS, "identity")
        self._layers = [self.mlp1, self.mlp2, self.lstm, self.head1, self.head2, self.head3]

    def build_params(self) -> ParamStore:
        slots = []
        for layer in self._layers:
            slots.extend(layer.slots())
        return ParamStore.build(slots)

    def init_params(self, params: ParamStore, rng, scale=None, forget_bias: float = 1.0):
        for layer in self._layers:
            if isinstance(layer, LSTMCell):
                layer.init(params, rng, scale=scale, forget_bias=forget_bias)
            else:
                layer.init(params, rng, scale=scale)

    def make_inputs(self, sw_bits, ir_bits, last_actions, agent_indices, n_value):
        """Assemble the per-step input matrix for a batch of agent rows.

        last_actions uses -1 for the all-zero pre-episode encoding (and for
        the last-action-input ablation); agent_indices are 0-based.
        """
        batch = len(agent_indices)
        X = np.zeros((batch, self.input_dim), dtype=np.float64)
        X[:, 0] = sw_bits
        X[:, 1] = ir_bits
        X[:, 2:6] = one_hot_rows(np.asarray(last_actions), SWITCH_ACTIONS)
        X[:, 6 : 6 + self.n_onehot] = one_hot_rows(np.asarray(agent_indices), self.n_onehot)
        X[:, 6 + self.n_onehot] = float(n_value)
        return X

    def step_forward(self, params: ParamStore, x, h, c):
        z1, c1 = self.mlp1.forward(params, x)
        z2, c2 = self.mlp2.forward(params, z1)
        h_new, c_new, c3 = self.lstm.step(params, z2, h, c)
        y1, c4 = self.head1.forward(params, h_new)
        y2, c5 = self.head2.forward(params, y1)
        q, c6 = self.head3.forward(params, y2)
        return q, h_new, c_new, (c1, c2, c3, c4, c5, c6)

    def step_backward(self, params: ParamStore, dq, dh_next, dc_next, cache):
        """Backward through one unrolled step; returns (dh_prev, dc_prev)."""
        c1, c2, c3, c4, c5, c6 = cache
        dy2 = self.head3.backward(params, dq, c6)
        dy1 = self.head2.backward(params, dy2, c5)
        dh = self.head1.backward(params, dy1, c4) + dh_next
        dz2, dh_prev, dc_prev = self.lstm.step_backward(params, dh, dc_next, c3)
        dz1 = self.mlp2.backward(params, dz2, c2)
        self.mlp1.backward(params, dz1, c1)
        return dh_prev, dc_prev


class HatsNet:
    """Q-network for the hats riddle.

    Heard answers and seen hats are embedded (each combined element-wise with
    a shared embedding of the pair (m, n)) and summarised by two separate
    LSTMs; the concatenated final outputs feed the Q head.  An empty sequence
    summarises to the zero initial hidden state.  The head emits one Q-value
    per colour.
    """

    def __init__(self, hidden: int = 64):
        self.hidden = hidden
        self.embed_ans = DenseLayer("emb_a", 1, hidden, "relu")
        self.embed_hat = DenseLayer("emb_s", 1, hidden, "relu")
        self.embed_idx = DenseLayer("emb_mn", 2, hidden, "relu")
        self.lstm_a = LSTMCell("lstm_a", hidden, hidden)
        self.lstm_s = LSTMCell("lstm_s", hidden, hidden)
        self.head1 = DenseLayer("out1", 2 * hidden, hidden, "relu")
        self.head2 = DenseLayer("out2", hidden, hidden, "relu")
        self.head3 = DenseLayer("out3", hidden, HAT_ACTIONS, "identity")
        self._layers = [
            self.embed_ans, self.embed_hat, self.embed_idx,
            self.lstm_a, self.lstm_s,
            self.head1, self.head2, self.head3,
        ]

    def build_params(self) -> ParamStore:
        slots = []
        for layer in self._layers:
            slots.extend(layer.slots())
        return ParamStore.build(slots)

    def init_params(self, params: ParamStore, rng, scale=None, forget_bias: float = 1.0):
        for layer in self._layers:
            if isinstance(layer, LSTMCell):
                layer.init(params, rng, scale=scale, forget_bias=forget_bias)
            else:
                layer.init(params, rng, scale=scale)

    def _run_path(self, params, lstm, embed, seq, idx_emb):
        """Unroll one LSTM over a (batch, length) sequence of scalar tokens."""
        batch, length = seq.shape
        h, c = lstm.zero_state(batch)
        caches = []
        for k in range(length):
            e, e_cache = embed.forward(params, seq[:, k : k + 1])
            z = e + idx_emb
            h, c, s_cache = lstm.step(params, z, h, c)
            caches.append((e_cache, s_cache))
        return h, caches

    def forward_decision(self, params: ParamStore, heard, seen, m: int, n: int):
        """Q-values for agent m's single decision.

        heard: (batch, m-1) answers 0/1; seen: (batch, n-m) hats 0/1.
        """
        batch = heard.shape[0]
        idx_in = np.broadcast_to(
            np.array([float(m), float(n)]), (batch, 2)
        ).copy()
        idx_emb, idx_cache = self.embed_idx.forward(params, idx_in)
        y_a, caches_a = self._run_path(params, self.lstm_a, self.embed_ans, heard, idx_emb)
        y_s, caches_s = self._run_path(params, self.lstm_s, self.embed_hat, seen, idx_emb)
        cat = np.concatenate([y_a, y_s], axis=1)
        z1, c1 = self.head1.forward(params, cat)
        z2, c2 = self.head2.forward(params, z1)
        q, c3 = self.head3.forward(params, z2)
        cache = (idx_cache, caches_a, caches_s, c1, c2, c3, batch)
        return q, cache

    def _backward_path(self, params, lstm, embed, dy, caches):
        """BPTT over one path; returns the gradient w.r.t. the shared idx embedding."""
        dh = dy
        dc = np.zeros_like(dy)
        d_idx = np.zeros_like(dy)
        for e_cache, s_cache in reversed(caches):
            dz, dh, dc = lstm.step_backward(params, dh, dc, s_cache)
            embed.backward(params, dz, e_cache)
            d_idx += dz
        return d_idx

    def backward_decision(self, params: ParamStore, dq, cache):
        idx_cache, caches_a, caches_s, c1, c2, c3, batch = cache
        dz2 = self.head3.backward(params, dq, c3)
        dz1 = self.head2.backward(params, dz2, c2)
        dcat = self.head1.backward(params, dz1, c1)
        dy_a = dcat[:, : self.hidden]
        dy_s = dcat[:, self.hidden :]
        d_idx = self._backward_path(params, self.lstm_a, self.embed_ans, dy_a, caches_a)
        d_idx += self._backward_path(params, self.lstm_s, self.embed_hat, dy_s, caches_s)
        self.embed_idx.backward(params, d_idx, idx_cache)
