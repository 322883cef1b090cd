"""Per-timestep salience scoring.

Two independent ReLU recurrences sweep the sequence left-to-right and
right-to-left (both from zero initial states); a learned linear fusion of
the two hidden tracks is squashed through a sigmoid, yielding one gate
value a_t in (0, 1) per timestep. The gates drive the gated recurrence in
`gated_unit` and double as an interpretable salience profile.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import DimensionError, as_matrix, as_vector, init_uniform, sigmoid

__all__ = [
    "AttentionParams",
    "AttentionTrace",
    "attention_forward",
    "attention_backward",
    "localization_ratio",
]


@dataclass
class AttentionParams:
    """Weights of the bi-directional scorer plus the scalar fusion layer.

    The fusion bias is stored as a shape-(1,) array so that every learnable
    tensor is an ndarray (uniform treatment by the optimizer and the
    checkpoint format).
    """

    fwd_w: np.ndarray  # (H, D) input weights, left-to-right track
    fwd_u: np.ndarray  # (H, H) recurrent weights
    fwd_b: np.ndarray  # (H,)
    bwd_w: np.ndarray  # (H, D) input weights, right-to-left track
    bwd_u: np.ndarray  # (H, H)
    bwd_b: np.ndarray  # (H,)
    fusion_m: np.ndarray  # (2H,) fusion weights over (fwd_h; bwd_h)
    fusion_b: np.ndarray  # (1,)

    @property
    def hidden(self) -> int:
        return self.fwd_w.shape[0]

    @property
    def dim(self) -> int:
        return self.fwd_w.shape[1]

    @classmethod
    def init(cls, dim: int, hidden: int, rng: np.random.Generator) -> "AttentionParams":
        """Uniform fan-sum init for weight matrices, zero biases.

        fusion_m is treated as a (1, 2H) matrix for its init range; the
        fusion bias starts at 0 so gates open near 0.5 (uncommitted).
        """
        return cls(
            fwd_w=init_uniform(rng, hidden, dim),
            fwd_u=init_uniform(rng, hidden, hidden),
            fwd_b=np.zeros(hidden),
            bwd_w=init_uniform(rng, hidden, dim),
            bwd_u=init_uniform(rng, hidden, hidden),
            bwd_b=np.zeros(hidden),
            fusion_m=init_uniform(rng, 1, 2 * hidden).ravel(),
            fusion_b=np.zeros(1),
        )

    @classmethod
    def zeros(cls, dim: int, hidden: int) -> "AttentionParams":
        return cls(
            fwd_w=np.zeros((hidden, dim)),
            fwd_u=np.zeros((hidden, hidden)),
            fwd_b=np.zeros(hidden),
            bwd_w=np.zeros((hidden, dim)),
            bwd_u=np.zeros((hidden, hidden)),
            bwd_b=np.zeros(hidden),
            fusion_m=np.zeros(2 * hidden),
            fusion_b=np.zeros(1),
        )

    def tensors(self):
        return [
            ("fwd_w", self.fwd_w),
            ("fwd_u", self.fwd_u),
            ("fwd_b", self.fwd_b),
            ("bwd_w", self.bwd_w),
            ("bwd_u", self.bwd_u),
            ("bwd_b", self.bwd_b),
            ("fusion_m", self.fusion_m),
            ("fusion_b", self.fusion_b),
        ]

    def copy(self) -> "AttentionParams":
        return AttentionParams(*(arr.copy() for _, arr in self.tensors()))

    def validate(self) -> None:
        h, d = self.hidden, self.dim
        as_matrix(self.fwd_u, h, h, "fwd_u")
        as_matrix(self.bwd_w, h, d, "bwd_w")
        as_matrix(self.bwd_u, h, h, "bwd_u")
        as_vector(self.fwd_b, h, "fwd_b")
        as_vector(self.bwd_b, h, "bwd_b")
        as_vector(self.fusion_m, 2 * h, "fusion_m")
        as_vector(self.fusion_b, 1, "fusion_b")


@dataclass
class AttentionTrace:
    """Everything the forward pass computed, kept for exact backprop."""

    a: np.ndarray        # (T,) gate values in (0, 1)
    logits: np.ndarray   # (T,) pre-sigmoid fusion outputs
    fwd_h: np.ndarray    # (T, H) left-to-right hidden states
    bwd_h: np.ndarray    # (T, H) right-to-left hidden states
    fwd_pre: np.ndarray  # (T, H) pre-activations of fwd_h
    bwd_pre: np.ndarray  # (T, H) pre-activations of bwd_h


def attention_forward(x: np.ndarray, p: AttentionParams) -> AttentionTrace:
    """Score every timestep of a (T, D) sequence.

    Left-to-right: fwd_h[t] = relu(fwd_w x_t + fwd_u fwd_h[t-1] + fwd_b),
    starting from a zero state; the right-to-left track mirrors it. Gates:
    a_t = sigmoid(fusion_m . (fwd_h[t]; bwd_h[t]) + fusion_b).
    """
    x = as_matrix(x, cols=p.dim, name="sequence")
    t_len = x.shape[0]
    if t_len < 1:
        raise DimensionError("sequence must have at least one timestep")
    h = p.hidden

    fwd_pre = np.empty((t_len, h))
    fwd_h = np.empty((t_len, h))
    bwd_pre = np.empty((t_len, h))
    bwd_h = np.empty((t_len, h))

    fwd_in = x @ p.fwd_w.T + p.fwd_b  # (T, H), input drive precomputed
    prev = np.zeros(h)
    for t in range(t_len):
        np.dot(p.fwd_u, prev, out=fwd_pre[t])
        fwd_pre[t] += fwd_in[t]
        np.maximum(fwd_pre[t], 0.0, out=fwd_h[t])
        prev = fwd_h[t]

    bwd_in = x @ p.bwd_w.T + p.bwd_b
    nxt = np.zeros(h)
    for t in range(t_len - 1, -1, -1):
        np.dot(p.bwd_u, nxt, out=bwd_pre[t])
        bwd_pre[t] += bwd_in[t]
        np.maximum(bwd_pre[t], 0.0, out=bwd_h[t])
        nxt = bwd_h[t]

    logits = fwd_h @ p.fusion_m[:h] + bwd_h @ p.fusion_m[h:] + p.fusion_b[0]
    a = sigmoid(logits)
    return AttentionTrace(a=a, logits=logits, fwd_h=fwd_h, bwd_h=bwd_h, fwd_pre=fwd_pre, bwd_pre=bwd_pre)


def attention_backward(
    x: np.ndarray,
    p: AttentionParams,
    trace: AttentionTrace,
    grad_a: np.ndarray,
) -> tuple[AttentionParams, np.ndarray]:
    """Gradients of sum_t grad_a[t] * a_t w.r.t. parameters and inputs.

    Returns a parameter-shaped gradient bundle and the (T, D) input
    gradient. The left-to-right chain is unrolled back in time (its state
    feeds t+1), the right-to-left chain forward in time (its state feeds
    t-1); per-timestep outer products are accumulated as single matmuls
    over the stacked deltas.
    """
    x = as_matrix(x, cols=p.dim, name="sequence")
    t_len = x.shape[0]
    h = p.hidden
    grad_a = as_vector(grad_a, t_len, "grad_a")

    a = trace.a
    ds = grad_a * a * (1.0 - a)  # (T,) sigmoid backprop into fusion logits
    m_f = p.fusion_m[:h]
    m_b = p.fusion_m[h:]

    g = AttentionParams.zeros(p.dim, h)
    g.fusion_m = np.concatenate([trace.fwd_h.T @ ds, trace.bwd_h.T @ ds])
    g.fusion_b = np.array([ds.sum()])

    fwd_mask = trace.fwd_pre > 0.0
    bwd_mask = trace.bwd_pre > 0.0

    dz_f = np.empty((t_len, h))
    fwd_u_t = np.ascontiguousarray(p.fwd_u.T)
    carry = np.zeros(h)
    for t in range(t_len - 1, -1, -1):
        dh = ds[t] * m_f + carry
        np.multiply(dh, fwd_mask[t], out=dz_f[t])
        carry = fwd_u_t @ dz_f[t]

    dz_b = np.empty((t_len, h))
    bwd_u_t = np.ascontiguousarray(p.bwd_u.T)
    carry = np.zeros(h)
    for t in range(t_len):
        dh = ds[t] * m_b + carry
        np.multiply(dh, bwd_mask[t], out=dz_b[t])
        carry = bwd_u_t @ dz_b[t]

    fwd_h_prev = np.vstack([np.zeros((1, h)), trace.fwd_h[:-1]])
    bwd_h_next = np.vstack([trace.bwd_h[1:], np.zeros((1, h))])

    g.fwd_w = dz_f.T @ x
    g.fwd_u = dz_f.T @ fwd_h_prev
    g.fwd_b = dz_f.sum(axis=0)
    g.bwd_w = dz_b.T @ x
    g.bwd_u = dz_b.T @ bwd_h_next
    g.bwd_b = dz_b.sum(axis=0)

    grad_x = dz_f @ p.fwd_w + dz_b @ p.bwd_w
    return g, grad_x


def localization_ratio(a: np.ndarray, mask: np.ndarray) -> float:
    """Mean attention inside the salience mask over mean attention outside.

    Returns nan when either side of the mask is empty.
    """
    a = as_vector(a, name="attention")
    mask = as_vector(mask, a.shape[0], "mask")
    inside = a[mask > 0.5]
    outside = a[mask <= 0.5]
    if inside.size == 0 or outside.size == 0:
        return float("nan")
    return float(inside.mean() / outside.mean())
