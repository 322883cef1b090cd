"""Scalar-gated recurrence over per-timestep salience scores.

Each step proposes a candidate state that fully incorporates the current
observation, then blends it with the previous state through the scalar
gate: h_t = (1 - a_t) * h_{t-1} + a_t * cand_t. A closed gate (a_t = 0)
copies the previous state bit-exactly, which is what makes the unit
immune to zero-salience noise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import DimensionError, as_matrix, as_vector, init_uniform

__all__ = ["CellParams", "CellTrace", "cell_forward", "cell_backward"]


@dataclass
class CellParams:
    w: np.ndarray  # (H, H) recurrent weights on the previous hidden state
    u: np.ndarray  # (H, D) input weights
    b: np.ndarray  # (H,)

    @property
    def hidden(self) -> int:
        return self.w.shape[0]

    @property
    def dim(self) -> int:
        return self.u.shape[1]

    @classmethod
    def init(cls, dim: int, hidden: int, rng: np.random.Generator) -> "CellParams":
        return cls(
            w=init_uniform(rng, hidden, hidden),
            u=init_uniform(rng, hidden, dim),
            b=np.zeros(hidden),
        )

    @classmethod
    def zeros(cls, dim: int, hidden: int) -> "CellParams":
        return cls(w=np.zeros((hidden, hidden)), u=np.zeros((hidden, dim)), b=np.zeros(hidden))

    def tensors(self):
        return [("w", self.w), ("u", self.u), ("b", self.b)]

    def copy(self) -> "CellParams":
        return CellParams(self.w.copy(), self.u.copy(), self.b.copy())

    def validate(self) -> None:
        h = self.hidden
        as_matrix(self.w, h, h, "w")
        as_matrix(self.u, h, None, "u")
        as_vector(self.b, h, "b")


@dataclass
class CellTrace:
    pre: np.ndarray        # (T, H) candidate pre-activations
    candidate: np.ndarray  # (T, H) relu(pre)
    h: np.ndarray          # (T, H) gated hidden states; h[-1] is the sequence code

    @property
    def last(self) -> np.ndarray:
        return self.h[-1]


def cell_forward(x: np.ndarray, a: np.ndarray, p: CellParams) -> CellTrace:
    """Run the gated recurrence from a zero initial state.

    cand_t = relu(w h_{t-1} + u x_t + b); h_t = (1-a_t) h_{t-1} + a_t cand_t.
    Gate values outside [0, 1] are a contract violation upstream and are
    rejected here.
    """
    x = as_matrix(x, cols=p.dim, name="sequence")
    t_len = x.shape[0]
    if t_len < 1:
        raise DimensionError("sequence must have at least one timestep")
    a = as_vector(a, t_len, "attention")
    if np.any(a < 0.0) or np.any(a > 1.0):
        raise ValueError("attention values outside [0, 1]")

    h_dim = p.hidden
    pre = np.empty((t_len, h_dim))
    cand = np.empty((t_len, h_dim))
    h = np.empty((t_len, h_dim))

    u_in = x @ p.u.T + p.b
    prev = np.zeros(h_dim)
    for t in range(t_len):
        np.dot(p.w, prev, out=pre[t])
        pre[t] += u_in[t]
        np.maximum(pre[t], 0.0, out=cand[t])
        # literal convex combination keeps the degenerate gates bit-exact
        h[t] = (1.0 - a[t]) * prev + a[t] * cand[t]
        prev = h[t]
    return CellTrace(pre=pre, candidate=cand, h=h)


def cell_backward(
    x: np.ndarray,
    a: np.ndarray,
    p: CellParams,
    trace: CellTrace,
    grad_last: np.ndarray,
) -> tuple[CellParams, np.ndarray, np.ndarray]:
    """Gradients of grad_last . h_T w.r.t. parameters, gates and inputs.

    The per-timestep gate gradient is the direct convex-combination term
    dh_t . (cand_t - h_{t-1}); the chained part flows through the carried
    state delta.
    """
    x = as_matrix(x, cols=p.dim, name="sequence")
    t_len = x.shape[0]
    h_dim = p.hidden
    a = as_vector(a, t_len, "attention")
    grad_last = as_vector(grad_last, h_dim, "grad_last")

    h_prev = np.vstack([np.zeros((1, h_dim)), trace.h[:-1]])
    diff = trace.candidate - h_prev
    mask = trace.pre > 0.0
    w_t = np.ascontiguousarray(p.w.T)

    dz = np.empty((t_len, h_dim))
    grad_a = np.empty(t_len)
    dh = grad_last.astype(np.float64).copy()
    for t in range(t_len - 1, -1, -1):
        grad_a[t] = dh @ diff[t]
        np.multiply(dh, mask[t], out=dz[t])
        dz[t] *= a[t]
        dh = (1.0 - a[t]) * dh + w_t @ dz[t]

    g = CellParams(w=dz.T @ h_prev, u=dz.T @ x, b=dz.sum(axis=0))
    grad_x = dz @ p.u
    return g, grad_a, grad_x
