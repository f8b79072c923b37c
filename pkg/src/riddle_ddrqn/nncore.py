"""Minimal neural-network kernel in double-precision numpy.

Flat parameter storage with named slots, dense layers, an LSTM cell with
exact backward passes, Adam, target-network soft updates, and central
finite-difference gradient checking.  Everything operates on batches
(rows = independent samples) and accumulates gradients into the store.
"""
from __future__ import annotations

import base64
import json
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np


# ---------------------------------------------------------------------------
# Parameter storage
# ---------------------------------------------------------------------------

class ParamStore:
    """Flat vector of parameters with named (offset, shape) sub-views.

    The gradient buffer mirrors the value buffer; layer backward passes
    accumulate into it and the optimiser consumes and clears it.
    """

    def __init__(self, layout: dict, values: np.ndarray, grads: np.ndarray):
        self.layout = layout  # name -> (offset, shape)
        self.values = values
        self.grads = grads

    @classmethod
    def build(cls, slots) -> "ParamStore":
        layout = {}
        offset = 0
        for name, shape in slots:
            if name in layout:
                raise ValueError(f"duplicate slot {name!r}")
            size = int(np.prod(shape, dtype=np.int64))
            layout[name] = (offset, tuple(shape))
            offset += size
        values = np.zeros(offset, dtype=np.float64)
        grads = np.zeros(offset, dtype=np.float64)
        return cls(layout, values, grads)

    @property
    def size(self) -> int:
        return self.values.size

    def view(self, name: str) -> np.ndarray:
        offset, shape = self.layout[name]
        return self.values[offset : offset + int(np.prod(shape, dtype=np.int64))].reshape(shape)

    def grad(self, name: str) -> np.ndarray:
        offset, shape = self.layout[name]
        return self.grads[offset : offset + int(np.prod(shape, dtype=np.int64))].reshape(shape)

    def zero_grads(self) -> None:
        self.grads[:] = 0.0

    def clone(self) -> "ParamStore":
        return ParamStore(self.layout, self.values.copy(), self.grads.copy())

    def same_layout(self, other: "ParamStore") -> bool:
        return self.layout == other.layout


def soft_update(target: ParamStore, online: ParamStore, alpha_minus: float) -> None:
    """In-place target tracking: theta_minus += alpha_minus * (theta - theta_minus)."""
    if not target.same_layout(online):
        raise ValueError("soft_update requires identical parameter layouts")
    target.values += alpha_minus * (online.values - target.values)


# ---------------------------------------------------------------------------
# Checkpoints: one-line JSON header, then base64 little-endian float64 values
# ---------------------------------------------------------------------------

def save_checkpoint(path, params: ParamStore, header: Optional[dict] = None) -> None:
    doc = dict(header or {})
    doc["layout"] = {name: [off, list(shape)] for name, (off, shape) in params.layout.items()}
    blob = base64.b64encode(params.values.astype("<f8").tobytes()).decode("ascii")
    with open(path, "w") as fh:
        fh.write(json.dumps(doc, separators=(",", ":")))
        fh.write("\n")
        fh.write(blob)
        fh.write("\n")


def load_checkpoint(path):
    with open(path) as fh:
        header = json.loads(fh.readline())
        blob = fh.readline().strip()
    layout = {
        name: (off, tuple(shape)) for name, (off, shape) in header.pop("layout").items()
    }
    values = np.frombuffer(base64.b64decode(blob), dtype="<f8").astype(np.float64)
    store = ParamStore(layout, values.copy(), np.zeros_like(values))
    return store, header


# ---------------------------------------------------------------------------
# Encoding helpers
# ---------------------------------------------------------------------------

def one_hot(index: int, size: int) -> np.ndarray:
    if not 0 <= index < size:
        raise ValueError(f"one_hot index {index} out of range [0, {size})")
    vec = np.zeros(size, dtype=np.float64)
    vec[index] = 1.0
    return vec


def one_hot_rows(indices: np.ndarray, size: int) -> np.ndarray:
    """Batched one-hot; a negative index encodes the all-zero vector."""
    indices = np.asarray(indices, dtype=np.int64)
    if np.any(indices >= size):
        raise ValueError("one_hot index out of range")
    out = np.zeros((indices.size, size), dtype=np.float64)
    valid = indices >= 0
    out[np.nonzero(valid)[0], indices[valid]] = 1.0
    return out


# ---------------------------------------------------------------------------
# Layers
# ---------------------------------------------------------------------------

def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


@dataclass(frozen=True)
class DenseLayer:
    name: str
    input_dim: int
    output_dim: int
    activation: str = "relu"  # "relu" | "identity"

    def slots(self):
        return [
            (f"{self.name}.W", (self.output_dim, self.input_dim)),
            (f"{self.name}.b", (self.output_dim,)),
        ]

    def init(self, params: ParamStore, rng, scale: Optional[float] = None) -> None:
        bound = scale if scale is not None else 1.0 / np.sqrt(self.input_dim)
        params.view(f"{self.name}.W")[:] = rng.uniform(
            -bound, bound, size=(self.output_dim, self.input_dim)
        )
        params.view(f"{self.name}.b")[:] = 0.0

    def forward(self, params: ParamStore, x: np.ndarray):
        if x.shape[-1] != self.input_dim:
            raise ValueError(
                f"{self.name}: expected input dim {self.input_dim}, got {x.shape[-1]}"
            )
        z = x @ params.view(f"{self.name}.W").T + params.view(f"{self.name}.b")
        if self.activation == "relu":
            y = np.maximum(z, 0.0)
        else:
            y = z
        return y, (x, z)

    def backward(self, params: ParamStore, dy: np.ndarray, cache):
        x, z = cache
        if self.activation == "relu":
            dz = dy * (z > 0.0)
        else:
            dz = dy
        params.grad(f"{self.name}.W")[:] += dz.T @ x
        params.grad(f"{self.name}.b")[:] += dz.sum(axis=0)
        return dz @ params.view(f"{self.name}.W")


_GATES = ("i", "f", "o", "g")


@dataclass(frozen=True)
class LSTMCell:
    """Standard forget-gate LSTM, no peepholes.

    c' = sigm(f) * c + sigm(i) * tanh(g);  h' = sigm(o) * tanh(c').
    The initial hidden state is all zeros.
    """

    name: str
    input_dim: int
    hidden_dim: int

    def slots(self):
        slots = []
        for gate in _GATES:
            slots.append((f"{self.name}.W_{gate}", (self.hidden_dim, self.input_dim)))
            slots.append((f"{self.name}.U_{gate}", (self.hidden_dim, self.hidden_dim)))
            slots.append((f"{self.name}.b_{gate}", (self.hidden_dim,)))
        return slots

    def init(self, params: ParamStore, rng, scale: Optional[float] = None,
             forget_bias: float = 1.0) -> None:
        in_bound = scale if scale is not None else 1.0 / np.sqrt(self.input_dim)
        rec_bound = scale if scale is not None else 1.0 / np.sqrt(self.hidden_dim)
        for gate in _GATES:
            params.view(f"{self.name}.W_{gate}")[:] = rng.uniform(
                -in_bound, in_bound, size=(self.hidden_dim, self.input_dim)
            )
            params.view(f"{self.name}.U_{gate}")[:] = rng.uniform(
                -rec_bound, rec_bound, size=(self.hidden_dim, self.hidden_dim)
            )
            params.view(f"{self.name}.b_{gate}")[:] = 0.0
        params.view(f"{self.name}.b_f")[:] = forget_bias

    def zero_state(self, batch: int):
        return (
            np.zeros((batch, self.hidden_dim), dtype=np.float64),
            np.zeros((batch, self.hidden_dim), dtype=np.float64),
        )

    def step(self, params: ParamStore, x: np.ndarray, h: np.ndarray, c: np.ndarray):
        if x.shape[-1] != self.input_dim:
            raise ValueError(
                f"{self.name}: expected input dim {self.input_dim}, got {x.shape[-1]}"
            )
        pre = {}
        for gate in _GATES:
            pre[gate] = (
                x @ params.view(f"{self.name}.W_{gate}").T
                + h @ params.view(f"{self.name}.U_{gate}").T
                + params.view(f"{self.name}.b_{gate}")
            )
        i = _sigmoid(pre["i"])
        f = _sigmoid(pre["f"])
        o = _sigmoid(pre["o"])
        g = np.tanh(pre["g"])
        c_new = f * c + i * g
        tanh_c = np.tanh(c_new)
        h_new = o * tanh_c
        cache = (x, h, c, i, f, o, g, tanh_c)
        return h_new, c_new, cache

    def step_backward(self, params: ParamStore, dh: np.ndarray, dc: np.ndarray, cache):
        """Backward through one step; returns (dx, dh_prev, dc_prev)."""
        x, h, c, i, f, o, g, tanh_c = cache
        do = dh * tanh_c
        dc_total = dc + dh * o * (1.0 - tanh_c ** 2)
        di = dc_total * g
        df = dc_total * c
        dg = dc_total * i
        dc_prev = dc_total * f
        d_pre = {
            "i": di * i * (1.0 - i),
            "f": df * f * (1.0 - f),
            "o": do * o * (1.0 - o),
            "g": dg * (1.0 - g ** 2),
        }
        dx = np.zeros_like(x)
        dh_prev = np.zeros_like(h)
        for gate in _GATES:
            d = d_pre[gate]
            params.grad(f"{self.name}.W_{gate}")[:] += d.T @ x
            params.grad(f"{self.name}.U_{gate}")[:] += d.T @ h
            params.grad(f"{self.name}.b_{gate}")[:] += d.sum(axis=0)
            dx += d @ params.view(f"{self.name}.W_{gate}")
            dh_prev += d @ params.view(f"{self.name}.U_{gate}")
        return dx, dh_prev, dc_prev


# ---------------------------------------------------------------------------
# Adam
# ---------------------------------------------------------------------------

class AdamState:
    def __init__(self, size: int, lr: float = 1e-3, beta1: float = 0.9,
                 beta2: float = 0.999, eps_hat: float = 1e-8):
        self.m = np.zeros(size, dtype=np.float64)
        self.v = np.zeros(size, dtype=np.float64)
        self.t = 0
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps_hat = eps_hat

    def apply(self, params: ParamStore) -> None:
        """One bias-corrected Adam step on the accumulated gradients, then clear them."""
        g = params.grads
        self.t += 1
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * g
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * g * g
        m_hat = self.m / (1.0 - self.beta1 ** self.t)
        v_hat = self.v / (1.0 - self.beta2 ** self.t)
        params.values -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps_hat)
        params.zero_grads()


# ---------------------------------------------------------------------------
# Gradient checking
# ---------------------------------------------------------------------------

GRAD_CHECK_PARAM_BOUND = 20_000


@dataclass
class GradCheckReport:
    per_slot: dict  # slot name -> max relative error
    max_rel_err: float
    tolerance: float
    worst_slot: str

    @property
    def passed(self) -> bool:
        return self.max_rel_err < self.tolerance


def grad_check(params: ParamStore, loss_fn: Callable[[ParamStore, bool], float],
               tolerance: float = 1e-4, step: float = 1e-5,
               denom_floor: float = 1e-4) -> GradCheckReport:
    """Compare analytic gradients against central finite differences.

    loss_fn(params, want_grad) must return a scalar loss and, when want_grad
    is true, leave the analytic gradient accumulated in params.grads.

    denom_floor turns the comparison into an absolute one for near-zero
    gradients, where the central difference is dominated by floating-point
    cancellation rather than by the derivative.
    """
    if params.size > GRAD_CHECK_PARAM_BOUND:
        raise ValueError(
            f"{params.size} parameters exceed the finite-difference bound"
        )
    params.zero_grads()
    loss_fn(params, True)
    analytic = params.grads.copy()
    params.zero_grads()

    numeric = np.zeros_like(analytic)
    for idx in range(params.size):
        orig = params.values[idx]
        params.values[idx] = orig + step
        up = loss_fn(params, False)
        params.values[idx] = orig - step
        down = loss_fn(params, False)
        params.values[idx] = orig
        numeric[idx] = (up - down) / (2.0 * step)

    denom = np.maximum(denom_floor, np.maximum(np.abs(analytic), np.abs(numeric)))
    rel = np.abs(analytic - numeric) / denom
    per_slot = {}
    for name, (offset, shape) in params.layout.items():
        size = int(np.prod(shape, dtype=np.int64))
        per_slot[name] = float(rel[offset : offset + size].max()) if size else 0.0
    worst = max(per_slot, key=per_slot.get)
    return GradCheckReport(
        per_slot=per_slot,
        max_rel_err=float(rel.max()),
        tolerance=tolerance,
        worst_slot=worst,
    )
