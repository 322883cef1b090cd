"""Dense float64 kernels shared by every model component.

Conventions: a "matrix" is a 2-D C-contiguous float64 ndarray (row-major),
a "vector" is a 1-D float64 ndarray. numpy provides storage and BLAS;
this module owns shape validation and the numerical-stability policy
(stable sigmoid and softmax, ReLU subgradient at 0 defined as 0).
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "DimensionError",
    "as_matrix",
    "as_vector",
    "require_finite",
    "affine",
    "relu",
    "relu_grad",
    "sigmoid",
    "softmax_stable",
    "clip_elementwise",
    "init_uniform",
    "INIT_SCHEME",
]

# uniform [-r, r] with r = sqrt(6 / (fan_in + fan_out)); recorded in checkpoints
INIT_SCHEME = "uniform-sqrt6-fan-sum"


class DimensionError(ValueError):
    """An operand's shape violates the operation's contract."""


def as_matrix(a, rows: int | None = None, cols: int | None = None, name: str = "matrix") -> np.ndarray:
    """Coerce to a 2-D float64 array, optionally pinning its shape."""
    m = np.ascontiguousarray(a, dtype=np.float64)
    if m.ndim != 2:
        raise DimensionError(f"{name}: expected a 2-D array, got shape {m.shape}")
    if rows is not None and m.shape[0] != rows:
        raise DimensionError(f"{name}: expected {rows} rows, got {m.shape[0]}")
    if cols is not None and m.shape[1] != cols:
        raise DimensionError(f"{name}: expected {cols} columns, got {m.shape[1]}")
    return m


def as_vector(a, length: int | None = None, name: str = "vector") -> np.ndarray:
    """Coerce to a 1-D float64 array, optionally pinning its length."""
    v = np.ascontiguousarray(a, dtype=np.float64)
    if v.ndim != 1:
        raise DimensionError(f"{name}: expected a 1-D array, got shape {v.shape}")
    if length is not None and v.shape[0] != length:
        raise DimensionError(f"{name}: expected length {length}, got {v.shape[0]}")
    return v


def require_finite(name: str, *arrays) -> None:
    """Raise if any array contains NaN or Inf."""
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise ValueError(f"{name}: non-finite values present")


def affine(w: np.ndarray, x: np.ndarray, b: np.ndarray) -> np.ndarray:
    """w @ x + b for an (m, n) matrix, a length-n vector and a length-m bias."""
    w = np.asarray(w)
    x = np.asarray(x)
    b = np.asarray(b)
    if w.ndim != 2 or x.ndim != 1 or b.ndim != 1:
        raise DimensionError(
            f"affine: expected matrix/vector/vector, got shapes {w.shape}/{x.shape}/{b.shape}"
        )
    if w.shape[1] != x.shape[0]:
        raise DimensionError(f"affine: matrix {w.shape} incompatible with input of length {x.shape[0]}")
    if w.shape[0] != b.shape[0]:
        raise DimensionError(f"affine: matrix {w.shape} incompatible with bias of length {b.shape[0]}")
    return w @ x + b


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def relu_grad(pre: np.ndarray) -> np.ndarray:
    """Subgradient of relu at its pre-activation; 0 at exactly 0."""
    return (pre > 0.0).astype(np.float64)


def sigmoid(x):
    """Logistic function; exp only ever sees a non-positive argument.

    Accepts scalars or arrays; returns a float for scalar input.
    """
    arr = np.asarray(x, dtype=np.float64)
    out = np.empty_like(arr)
    pos = arr >= 0.0
    out[pos] = 1.0 / (1.0 + np.exp(-arr[pos]))
    ex = np.exp(arr[~pos])
    out[~pos] = ex / (1.0 + ex)
    return float(out) if out.ndim == 0 else out


def softmax_stable(z) -> np.ndarray:
    """Shift-invariant softmax: exp(z - max(z)) normalized to sum 1."""
    z = as_vector(z, name="softmax input")
    if z.shape[0] < 1:
        raise DimensionError("softmax input must have at least one entry")
    e = np.exp(z - z.max())
    return e / e.sum()


def clip_elementwise(g: np.ndarray, lo: float, hi: float) -> np.ndarray:
    """Map every element to min(hi, max(lo, g_i))."""
    if lo > hi:
        raise ValueError(f"clip bounds inverted: lo={lo} > hi={hi}")
    return np.clip(np.asarray(g, dtype=np.float64), lo, hi)


def init_uniform(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    """Weight matrix drawn uniform on [-r, r], r = sqrt(6/(fan_in + fan_out)).

    fan_in is the column count, fan_out the row count.
    """
    r = np.sqrt(6.0 / (rows + cols))
    return rng.uniform(-r, r, size=(rows, cols))
