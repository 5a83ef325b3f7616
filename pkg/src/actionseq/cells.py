"""LSTM and GRU cells: single-step forward passes and hand-derived backward passes.

Gate blocks are packed row-wise into one input matrix w_x, one recurrent
matrix w_h and one bias vector b so a step costs two mat-vec products.
Gate order is [input, forget, candidate, output] for the LSTM and
[update, reset, candidate] for the GRU.

The GRU candidate applies the reset gate to the recurrent term after the
matrix product: n = tanh(w_n x + b_n + r * (u_n h_prev)). The candidate
has no second bias on the recurrent side.

Backward passes consume the cache produced by the *_step_cached variant
of the matching forward call and are verified against finite differences
(see numkit.grad_check); unrolled chains are assembled by the training
module.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numkit import sigmoid


@dataclass
class LstmCellParams:
    w_x: np.ndarray  # (4*hidden, input)
    w_h: np.ndarray  # (4*hidden, hidden)
    b: np.ndarray    # (4*hidden,)

    @property
    def input_dim(self) -> int:
        return self.w_x.shape[1]

    @property
    def hidden_dim(self) -> int:
        return self.w_h.shape[1]

    @classmethod
    def zeros(cls, input_dim: int, hidden_dim: int) -> "LstmCellParams":
        return cls(
            w_x=np.zeros((4 * hidden_dim, input_dim)),
            w_h=np.zeros((4 * hidden_dim, hidden_dim)),
            b=np.zeros(4 * hidden_dim),
        )

    @classmethod
    def init(cls, input_dim: int, hidden_dim: int, rng: np.random.Generator) -> "LstmCellParams":
        # Weights uniform in [-1/sqrt(hidden), +1/sqrt(hidden)], biases zero
        # (including the forget gate, so zero-parameter algebra stays exact).
        s = 1.0 / np.sqrt(hidden_dim)
        return cls(
            w_x=rng.uniform(-s, s, (4 * hidden_dim, input_dim)),
            w_h=rng.uniform(-s, s, (4 * hidden_dim, hidden_dim)),
            b=np.zeros(4 * hidden_dim),
        )


@dataclass
class GruCellParams:
    w_x: np.ndarray  # (3*hidden, input)
    w_h: np.ndarray  # (3*hidden, hidden)
    b: np.ndarray    # (3*hidden,)

    @property
    def input_dim(self) -> int:
        return self.w_x.shape[1]

    @property
    def hidden_dim(self) -> int:
        return self.w_h.shape[1]

    @classmethod
    def zeros(cls, input_dim: int, hidden_dim: int) -> "GruCellParams":
        return cls(
            w_x=np.zeros((3 * hidden_dim, input_dim)),
            w_h=np.zeros((3 * hidden_dim, hidden_dim)),
            b=np.zeros(3 * hidden_dim),
        )

    @classmethod
    def init(cls, input_dim: int, hidden_dim: int, rng: np.random.Generator) -> "GruCellParams":
        s = 1.0 / np.sqrt(hidden_dim)
        return cls(
            w_x=rng.uniform(-s, s, (3 * hidden_dim, input_dim)),
            w_h=rng.uniform(-s, s, (3 * hidden_dim, hidden_dim)),
            b=np.zeros(3 * hidden_dim),
        )


def _check_dims(name, vec, dim):
    if vec.shape != (dim,):
        raise ValueError(f"{name} has shape {vec.shape}, expected ({dim},)")


# ---------------------------------------------------------------------------
# LSTM
# ---------------------------------------------------------------------------

def lstm_step(x, h_prev, c_prev, params: LstmCellParams):
    """One LSTM step. Returns (c, h).

    i, f, o = sigmoid(gate pre-activations), g = tanh(candidate):
        c = f * c_prev + i * g
        h = o * tanh(c)
    """
    c, h, _ = lstm_step_cached(x, h_prev, c_prev, params)
    return c, h


def lstm_step_cached(x, h_prev, c_prev, params: LstmCellParams):
    """LSTM step that also returns the cache needed by lstm_step_backward."""
    d = params.hidden_dim
    _check_dims("x", np.asarray(x), params.input_dim)
    _check_dims("h_prev", np.asarray(h_prev), d)
    _check_dims("c_prev", np.asarray(c_prev), d)
    a = params.w_x @ x + params.w_h @ h_prev + params.b
    i = sigmoid(a[:d])
    f = sigmoid(a[d:2 * d])
    g = np.tanh(a[2 * d:3 * d])
    o = sigmoid(a[3 * d:])
    c = f * c_prev + i * g
    tanh_c = np.tanh(c)
    h = o * tanh_c
    cache = (x, h_prev, c_prev, i, f, g, o, tanh_c)
    return c, h, cache


def lstm_step_backward(params: LstmCellParams, cache, dh, dc):
    """Backward through one LSTM step.

    dh, dc are the upstream gradients w.r.t. this step's h and c.
    Returns (param_grads, dx, dh_prev, dc_prev) where param_grads is an
    LstmCellParams holding gradient arrays.
    """
    if cache is None:
        raise ValueError("lstm_step_backward needs the cache from lstm_step_cached")
    x, h_prev, c_prev, i, f, g, o, tanh_c = cache
    d = params.hidden_dim
    do = dh * tanh_c
    dc_total = dc + dh * o * (1.0 - tanh_c * tanh_c)
    di = dc_total * g
    df = dc_total * c_prev
    dg = dc_total * i
    dc_prev = dc_total * f
    da = np.concatenate([
        di * i * (1.0 - i),
        df * f * (1.0 - f),
        dg * (1.0 - g * g),
        do * o * (1.0 - o),
    ])
    grads = LstmCellParams(w_x=np.outer(da, x), w_h=np.outer(da, h_prev), b=da)
    dx = params.w_x.T @ da
    dh_prev = params.w_h.T @ da
    return grads, dx, dh_prev, dc_prev


# ---------------------------------------------------------------------------
# GRU
# ---------------------------------------------------------------------------

def gru_step(x, h_prev, params: GruCellParams):
    """One GRU step. Returns h = (1 - z) * n + z * h_prev."""
    h, _ = gru_step_cached(x, h_prev, params)
    return h


def gru_step_cached(x, h_prev, params: GruCellParams):
    d = params.hidden_dim
    _check_dims("x", np.asarray(x), params.input_dim)
    _check_dims("h_prev", np.asarray(h_prev), d)
    a = params.w_x @ x + params.b
    rec = params.w_h @ h_prev
    z = sigmoid(a[:d] + rec[:d])
    r = sigmoid(a[d:2 * d] + rec[d:2 * d])
    u = rec[2 * d:]                      # candidate recurrent term, pre reset
    n = np.tanh(a[2 * d:] + r * u)
    h = (1.0 - z) * n + z * h_prev
    cache = (x, h_prev, z, r, n, u)
    return h, cache


def gru_step_backward(params: GruCellParams, cache, dh):
    """Backward through one GRU step; returns (param_grads, dx, dh_prev)."""
    if cache is None:
        raise ValueError("gru_step_backward needs the cache from gru_step_cached")
    x, h_prev, z, r, n, u = cache
    d = params.hidden_dim
    dz = dh * (h_prev - n)
    dn = dh * (1.0 - z)
    dh_prev = dh * z
    da_n = dn * (1.0 - n * n)
    dr = da_n * u
    da_z = dz * z * (1.0 - z)
    da_r = dr * r * (1.0 - r)
    da = np.concatenate([da_z, da_r, da_n])
    # Recurrent blocks: z and r see h_prev directly, the candidate sees r * (u_n h_prev).
    drec = np.concatenate([da_z, da_r, da_n * r])
    grads = GruCellParams(w_x=np.outer(da, x), w_h=np.outer(drec, h_prev), b=da)
    dx = params.w_x.T @ da
    dh_prev = dh_prev + params.w_h.T @ drec
    return grads, dx, dh_prev
