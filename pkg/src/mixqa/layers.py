"""Recurrent layers: single GRU cells, fused sequence runs, and BiGRU encoders.

The GRU follows the Cho-style gate equations with biases:

    z_t = sigmoid(x_t W_z + h_{t-1} U_z + b_z)
    r_t = sigmoid(x_t W_r + h_{t-1} U_r + b_r)
    n_t = tanh(x_t W_n + (r_t * h_{t-1}) U_n + b_n)
    h_t = z_t * h_{t-1} + (1 - z_t) * n_t

Gate weights are stored column-blocked as [z | r | n] so the input
projection for a whole sequence is a single matmul; only the hidden-state
recurrences run step by step.
"""

from __future__ import annotations

import numpy as np

from .autodiff import Parameter, Tensor, concat, take_row

try:  # optional JIT for the sequential recurrences; numpy fallback below
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        return wrap


def uniform_init(rng: np.random.Generator, shape, scale: float) -> np.ndarray:
    return rng.uniform(-scale, scale, size=shape)


class GruLayer:
    """One direction of a GRU; holds the three gate blocks as fused parameters."""

    def __init__(self, input_size: int, hidden_size: int, rng: np.random.Generator, name: str = "gru"):
        if hidden_size <= 0 or input_size <= 0:
            raise ValueError(f"GruLayer: sizes must be positive, got {input_size}x{hidden_size}")
        self.input_size = input_size
        self.hidden_size = hidden_size
        self.W = Parameter(f"{name}.W", uniform_init(rng, (input_size, 3 * hidden_size), 1.0 / np.sqrt(input_size)))
        self.U = Parameter(f"{name}.U", uniform_init(rng, (hidden_size, 3 * hidden_size), 1.0 / np.sqrt(hidden_size)))
        self.b = Parameter(f"{name}.b", np.zeros(3 * hidden_size))

    def parameters(self) -> list[Parameter]:
        return [self.W, self.U, self.b]


@njit(cache=True)
def _forward_loop(P, Uzr, Un, h0, hidden):
    L = P.shape[0]
    Z = np.empty((L, hidden))
    R = np.empty((L, hidden))
    N = np.empty((L, hidden))
    H = np.empty((L, hidden))
    h = h0.copy()
    for t in range(L):
        # sigmoid via tanh: stable for any magnitude, one transcendental call
        zr = 0.5 * (np.tanh(0.5 * (P[t, : 2 * hidden] + h @ Uzr)) + 1.0)
        z = zr[:hidden]
        r = zr[hidden:]
        n = np.tanh(P[t, 2 * hidden :] + (r * h) @ Un)
        h = z * h + (1.0 - z) * n
        Z[t] = z
        R[t] = r
        N[t] = n
        H[t] = h
    return Z, R, N, H


@njit(cache=True)
def _backward_loop(Uzr_T, Un_T, h0, Z, R, N, H, dH, hidden):
    L = H.shape[0]
    dPre = np.empty((L, 3 * hidden))
    dh = np.zeros(hidden)
    for t in range(L - 1, -1, -1):
        dh = dh + dH[t]
        h_prev = h0 if t == 0 else H[t - 1]
        z = Z[t]
        r = R[t]
        n = N[t]
        dz = dh * (h_prev - n)
        dn = dh * (1.0 - z)
        dh_prev = dh * z
        dn_pre = dn * (1.0 - n * n)
        drh = dn_pre @ Un_T
        dh_prev = dh_prev + drh * r
        dr = drh * h_prev
        dPre[t, :hidden] = dz * z * (1.0 - z)
        dPre[t, hidden : 2 * hidden] = dr * r * (1.0 - r)
        dPre[t, 2 * hidden :] = dn_pre
        dh = dh_prev + dPre[t, : 2 * hidden] @ Uzr_T
    return dPre, dh


def _gru_forward(Wv, Uv, bv, X, h0, hidden):
    """Run the recurrence over time-ordered rows of X; returns stacked states."""
    P = np.ascontiguousarray(X @ Wv + bv)  # (L, 3h) input projections, all gates at once
    Uzr = np.ascontiguousarray(Uv[:, : 2 * hidden])
    Un = np.ascontiguousarray(Uv[:, 2 * hidden :])
    Z, R, N, H = _forward_loop(P, Uzr, Un, h0, hidden)
    return P, Z, R, N, H


def _gru_backward(Wv, Uv, X, h0, Z, R, N, H, dH):
    """Reverse sweep; returns (dX, dW, dU, db, dh0)."""
    L, hidden = H.shape
    Uzr_T = np.ascontiguousarray(Uv[:, : 2 * hidden].T)
    Un_T = np.ascontiguousarray(Uv[:, 2 * hidden :].T)
    dPre, dh = _backward_loop(Uzr_T, Un_T, h0, Z, R, N, H, np.ascontiguousarray(dH), hidden)
    Hprev = np.vstack((h0[None, :], H[:-1])) if L > 1 else h0[None, :]
    dU = np.empty_like(Uv)
    dU[:, : 2 * hidden] = Hprev.T @ dPre[:, : 2 * hidden]
    dU[:, 2 * hidden :] = (R * Hprev).T @ dPre[:, 2 * hidden :]
    dW = X.T @ dPre
    db = dPre.sum(axis=0)
    dX = dPre @ Wv.T
    return dX, dW, dU, db, dh


def gru_run(layer: GruLayer, xs: Tensor, reverse: bool = False, h0: Tensor | None = None) -> Tensor:
    """Hidden states for a whole sequence, rows kept in input order.

    With ``reverse=True`` the recurrence consumes the sequence back to
    front, so row i holds the state after reading positions L-1..i.
    """
    if xs.values.ndim != 2 or xs.values.shape[0] == 0:
        raise ValueError(f"gru_run: need a non-empty (L, input) matrix, got shape {xs.shape}")
    if xs.values.shape[1] != layer.input_size:
        raise ValueError(f"gru_run: input width {xs.values.shape[1]} != layer input size {layer.input_size}")
    hidden = layer.hidden_size
    h0_values = np.zeros(hidden) if h0 is None else h0.values
    if h0_values.shape != (hidden,):
        raise ValueError(f"gru_run: h0 shape {h0_values.shape} != ({hidden},)")

    X = xs.values[::-1] if reverse else xs.values
    Wv, Uv, bv = layer.W.values, layer.U.values, layer.b.values
    _, Z, R, N, H = _gru_forward(Wv, Uv, bv, X, h0_values, hidden)
    out_values = H[::-1].copy() if reverse else H

    parents = (xs, layer.W, layer.U, layer.b) + (() if h0 is None else (h0,))

    def push(g):
        dH = g[::-1] if reverse else g
        dX, dW, dU, db, dh0 = _gru_backward(Wv, Uv, X, h0_values, Z, R, N, H, dH)
        xs.accumulate(dX[::-1] if reverse else dX)
        layer.W.accumulate(dW)
        layer.U.accumulate(dU)
        layer.b.accumulate(db)
        if h0 is not None:
            h0.accumulate(dh0)

    return Tensor(out_values, parents, push)


def gru_step(layer: GruLayer, h_prev: Tensor, x_t: Tensor) -> Tensor:
    """Single GRU update h_{t-1} -> h_t for one input vector."""
    if x_t.values.ndim != 1:
        raise ValueError(f"gru_step: x_t must be a vector, got shape {x_t.shape}")
    xs = Tensor(x_t.values[None, :], (x_t,), lambda g: x_t.accumulate(g[0]))
    states = gru_run(layer, xs, h0=h_prev)
    return take_row(states, 0)


def bigru(forward_layer: GruLayer, backward_layer: GruLayer, xs: Tensor) -> tuple[Tensor, Tensor]:
    """Run both directions over a sequence.

    Returns per-position states H (L x 2h, forward || backward) and the
    end-state summary: forward state at the last position concatenated
    with the backward state at position 0.
    """
    hf = gru_run(forward_layer, xs)
    hb = gru_run(backward_layer, xs, reverse=True)
    H = concat([hf, hb], axis=1)
    v = concat([take_row(hf, xs.values.shape[0] - 1), take_row(hb, 0)])
    return H, v


class BiGru:
    """Paired forward/backward GRU layers over the same input width."""

    def __init__(self, input_size: int, hidden_size: int, rng: np.random.Generator, name: str = "bigru"):
        self.hidden_size = hidden_size
        self.fwd = GruLayer(input_size, hidden_size, rng, name=f"{name}.fwd")
        self.bwd = GruLayer(input_size, hidden_size, rng, name=f"{name}.bwd")

    def __call__(self, xs: Tensor) -> tuple[Tensor, Tensor]:
        return bigru(self.fwd, self.bwd, xs)

    def parameters(self) -> list[Parameter]:
        return self.fwd.parameters() + self.bwd.parameters()
