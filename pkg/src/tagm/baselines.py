"""Comparison models sharing the same kernels and heads.

plain-RNN: an ungated ReLU recurrence classified from its last state;
collapses on noisy sequences because every observation enters the state.

AM-NN: the attention scorer followed by an attention-weighted sum of the
raw inputs and one feed-forward layer; isolates what recurrent
integration of the gates adds on top of attention pooling alone.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .attention import AttentionParams, AttentionTrace, attention_backward, attention_forward
from .numerics import DimensionError, as_matrix, as_vector, init_uniform

__all__ = [
    "RnnParams",
    "RnnTrace",
    "plain_rnn_forward",
    "plain_rnn_backward",
    "AmnnCache",
    "amnn_forward",
    "amnn_backward",
]


@dataclass
class RnnParams:
    w: np.ndarray  # (H, D) input weights
    u: np.ndarray  # (H, H) recurrent weights
    b: np.ndarray  # (H,)

    @property
    def hidden(self) -> int:
        return self.w.shape[0]

    @property
    def dim(self) -> int:
        return self.w.shape[1]

    @classmethod
    def init(cls, dim: int, hidden: int, rng: np.random.Generator) -> "RnnParams":
        return cls(
            w=init_uniform(rng, hidden, dim),
            u=init_uniform(rng, hidden, hidden),
            b=np.zeros(hidden),
        )

    @classmethod
    def zeros(cls, dim: int, hidden: int) -> "RnnParams":
        return cls(w=np.zeros((hidden, dim)), u=np.zeros((hidden, hidden)), b=np.zeros(hidden))

    def tensors(self):
        return [("w", self.w), ("u", self.u), ("b", self.b)]

    def copy(self) -> "RnnParams":
        return RnnParams(self.w.copy(), self.u.copy(), self.b.copy())


@dataclass
class RnnTrace:
    pre: np.ndarray  # (T, H)
    h: np.ndarray    # (T, H)

    @property
    def last(self) -> np.ndarray:
        return self.h[-1]


def plain_rnn_forward(x: np.ndarray, p: RnnParams) -> RnnTrace:
    """h_t = relu(w x_t + u h_{t-1} + b) from a zero initial state."""
    x = as_matrix(x, cols=p.dim, name="sequence")
    t_len = x.shape[0]
    if t_len < 1:
        raise DimensionError("sequence must have at least one timestep")
    h_dim = p.hidden
    pre = np.empty((t_len, h_dim))
    h = np.empty((t_len, h_dim))
    w_in = x @ p.w.T + p.b
    prev = np.zeros(h_dim)
    for t in range(t_len):
        np.dot(p.u, prev, out=pre[t])
        pre[t] += w_in[t]
        np.maximum(pre[t], 0.0, out=h[t])
        prev = h[t]
    return RnnTrace(pre=pre, h=h)


def plain_rnn_backward(
    x: np.ndarray,
    p: RnnParams,
    trace: RnnTrace,
    grad_last: np.ndarray,
) -> tuple[RnnParams, np.ndarray]:
    """Gradients of grad_last . h_T w.r.t. parameters and inputs."""
    x = as_matrix(x, cols=p.dim, name="sequence")
    t_len = x.shape[0]
    h_dim = p.hidden
    grad_last = as_vector(grad_last, h_dim, "grad_last")

    mask = trace.pre > 0.0
    u_t = np.ascontiguousarray(p.u.T)
    dz = np.empty((t_len, h_dim))
    dh = grad_last.astype(np.float64).copy()
    for t in range(t_len - 1, -1, -1):
        np.multiply(dh, mask[t], out=dz[t])
        dh = u_t @ dz[t]

    h_prev = np.vstack([np.zeros((1, h_dim)), trace.h[:-1]])
    g = RnnParams(w=dz.T @ x, u=dz.T @ h_prev, b=dz.sum(axis=0))
    grad_x = dz @ p.w
    return g, grad_x


@dataclass
class AmnnCache:
    attn: AttentionTrace
    v: np.ndarray    # (D,) attention-weighted input sum
    pre: np.ndarray  # (H,) feed-forward pre-activation
    h: np.ndarray    # (H,) feed-forward output


def amnn_forward(x: np.ndarray, attn: AttentionParams, ff_w: np.ndarray, ff_b: np.ndarray) -> AmnnCache:
    """Pool inputs by attention weight, then one ReLU feed-forward layer.

    v = sum_t a_t x_t; h = relu(ff_w v + ff_b).
    """
    x = as_matrix(x, cols=attn.dim, name="sequence")
    trace = attention_forward(x, attn)
    v = trace.a @ x
    pre = ff_w @ v + ff_b
    return AmnnCache(attn=trace, v=v, pre=pre, h=np.maximum(pre, 0.0))


def amnn_backward(
    x: np.ndarray,
    attn: AttentionParams,
    ff_w: np.ndarray,
    cache: AmnnCache,
    grad_h: np.ndarray,
) -> tuple[AttentionParams, np.ndarray, np.ndarray, np.ndarray]:
    """Gradients of grad_h . h w.r.t. attention params, ff_w, ff_b, inputs."""
    x = as_matrix(x, cols=attn.dim, name="sequence")
    grad_h = as_vector(grad_h, ff_w.shape[0], "grad_h")
    d_pre = grad_h * (cache.pre > 0.0)
    d_ff_w = np.outer(d_pre, cache.v)
    d_ff_b = d_pre.copy()
    d_v = ff_w.T @ d_pre
    grad_a = x @ d_v
    grad_x = np.outer(cache.attn.a, d_v)
    attn_g, grad_x_attn = attention_backward(x, attn, cache.attn, grad_a)
    grad_x += grad_x_attn
    return attn_g, d_ff_w, d_ff_b, grad_x
