"""Minimal dense-tensor reverse-mode autodiff.

Tensors wrap numpy arrays; every differentiable op appends a record to an
explicit tape, whose append order is already topological, so the backward
pass is a single reversed sweep that visits each record exactly once and
returns a gradient map keyed by tensor.

Passing ``tape=None`` runs any op in inference mode (no recording).  Ops
inherit the dtype of their inputs: training runs in float32, while tests
may build float64 graphs for tight finite-difference checks.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = [
    "Tensor",
    "Tape",
    "ShapeError",
    "backward",
    "matmul",
    "bmm",
    "add",
    "sub",
    "mul",
    "scale",
    "bias_add",
    "relu",
    "softmax",
    "layer_norm",
    "reshape",
    "transpose_last2",
    "concat",
    "mean_pool_half",
    "repeat_double",
    "sum_all",
    "where_mask",
]


class ShapeError(ValueError):
    """Operands with incompatible shapes; message names both."""


class Tensor:
    """A dense array node.  ``requires`` marks it as a gradient leaf or
    the product of one."""

    __slots__ = ("data", "requires")

    def __init__(self, data, requires: bool = False):
        self.data = np.asarray(data)
        self.requires = requires

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires={self.requires})"


@dataclass
class _Record:
    out: Tensor
    inputs: tuple[Tensor, ...]
    vjp: Callable  # grad_out -> tuple of grads aligned with inputs (None allowed)


@dataclass
class Tape:
    """Ordered op records; append order is topological by construction."""

    records: list[_Record] = field(default_factory=list)

    def append(self, out: Tensor, inputs: tuple[Tensor, ...], vjp: Callable) -> None:
        self.records.append(_Record(out, inputs, vjp))


def _emit(tape: Tape | None, out_data: np.ndarray, inputs: tuple[Tensor, ...], vjp) -> Tensor:
    track = tape is not None and any(t.requires for t in inputs)
    out = Tensor(out_data, requires=track)
    if track:
        tape.append(out, inputs, vjp)
    return out


def backward(tape: Tape, loss: Tensor) -> dict[Tensor, np.ndarray]:
    """Reverse sweep from a scalar loss; returns {tensor: gradient}."""
    if loss.data.shape != ():
        raise ValueError(f"loss must be a scalar, got shape {loss.data.shape}")
    grads: dict[Tensor, np.ndarray] = {loss: np.ones((), dtype=loss.data.dtype)}
    for rec in reversed(tape.records):
        g_out = grads.get(rec.out)
        if g_out is None:
            continue
        for t, g in zip(rec.inputs, rec.vjp(g_out)):
            if g is None or not t.requires:
                continue
            acc = grads.get(t)
            grads[t] = g if acc is None else acc + g
    return grads


def _check(cond: bool, msg: str) -> None:
    if not cond:
        raise ShapeError(msg)


def matmul(tape: Tape | None, a: Tensor, b: Tensor) -> Tensor:
    _check(
        a.data.ndim == 2 and b.data.ndim == 2 and a.shape[1] == b.shape[0],
        f"matmul needs (n,k)x(k,m), got {a.shape} x {b.shape}",
    )
    def vjp(g):
        return g @ b.data.T, a.data.T @ g
    return _emit(tape, a.data @ b.data, (a, b), vjp)


def bmm(tape: Tape | None, a: Tensor, b: Tensor) -> Tensor:
    _check(
        a.data.ndim == 3 and b.data.ndim == 3 and a.shape[0] == b.shape[0] and a.shape[2] == b.shape[1],
        f"bmm needs (B,n,k)x(B,k,m), got {a.shape} x {b.shape}",
    )
    def vjp(g):
        return g @ b.data.transpose(0, 2, 1), a.data.transpose(0, 2, 1) @ g
    return _emit(tape, a.data @ b.data, (a, b), vjp)


def add(tape: Tape | None, a: Tensor, b: Tensor) -> Tensor:
    _check(a.shape == b.shape, f"add needs equal shapes, got {a.shape} vs {b.shape}")
    return _emit(tape, a.data + b.data, (a, b), lambda g: (g, g))


def sub(tape: Tape | None, a: Tensor, b: Tensor) -> Tensor:
    _check(a.shape == b.shape, f"sub needs equal shapes, got {a.shape} vs {b.shape}")
    return _emit(tape, a.data - b.data, (a, b), lambda g: (g, -g))


def mul(tape: Tape | None, a: Tensor, b: Tensor) -> Tensor:
    _check(a.shape == b.shape, f"mul needs equal shapes, got {a.shape} vs {b.shape}")
    def vjp(g):
        return g * b.data, g * a.data
    return _emit(tape, a.data * b.data, (a, b), vjp)


def scale(tape: Tape | None, a: Tensor, c: float) -> Tensor:
    c = float(c)
    return _emit(tape, a.data * c, (a,), lambda g: (g * c,))


def bias_add(tape: Tape | None, x: Tensor, b: Tensor) -> Tensor:
    """Row-vector bias: (..., W) + (W,), or per-sample bias (B, H, W) + (B, W)."""
    if b.data.ndim == 1:
        _check(
            x.shape[-1] == b.shape[0],
            f"bias_add needs trailing dims to match, got {x.shape} + {b.shape}",
        )
        axes = tuple(range(x.data.ndim - 1))
        def vjp(g):
            return g, g.sum(axis=axes)
        return _emit(tape, x.data + b.data, (x, b), vjp)
    _check(
        x.data.ndim == 3 and b.data.ndim == 2 and x.shape[0] == b.shape[0] and x.shape[2] == b.shape[1],
        f"bias_add needs (B,H,W) + (B,W), got {x.shape} + {b.shape}",
    )
    def vjp(g):
        return g, g.sum(axis=1)
    return _emit(tape, x.data + b.data[:, None, :], (x, b), vjp)


def relu(tape: Tape | None, x: Tensor) -> Tensor:
    keep = x.data > 0
    def vjp(g):
        return (g * keep,)
    return _emit(tape, np.where(keep, x.data, 0.0), (x,), vjp)


def softmax(tape: Tape | None, x: Tensor) -> Tensor:
    """Row softmax over the last axis, stabilized by max subtraction."""
    shifted = x.data - x.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    s = e / e.sum(axis=-1, keepdims=True)
    def vjp(g):
        inner = (g * s).sum(axis=-1, keepdims=True)
        return ((g - inner) * s,)
    return _emit(tape, s, (x,), vjp)


def layer_norm(tape: Tape | None, x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize the last axis to zero mean / unit variance, then affine."""
    w = x.shape[-1]
    _check(
        gain.shape == (w,) and bias.shape == (w,),
        f"layer_norm affine params must be ({w},), got {gain.shape} and {bias.shape}",
    )
    mu = x.data.mean(axis=-1, keepdims=True)
    centered = x.data - mu
    var = (centered * centered).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = centered * inv
    def vjp(g):
        g_xhat = g * gain.data
        gx = inv / w * (
            w * g_xhat
            - g_xhat.sum(axis=-1, keepdims=True)
            - xhat * (g_xhat * xhat).sum(axis=-1, keepdims=True)
        )
        axes = tuple(range(x.data.ndim - 1))
        return gx, (g * xhat).sum(axis=axes), g.sum(axis=axes)
    return _emit(tape, xhat * gain.data + bias.data, (x, gain, bias), vjp)


def reshape(tape: Tape | None, x: Tensor, shape: tuple[int, ...]) -> Tensor:
    orig = x.shape
    def vjp(g):
        return (g.reshape(orig),)
    return _emit(tape, x.data.reshape(shape), (x,), vjp)


def transpose_last2(tape: Tape | None, x: Tensor) -> Tensor:
    _check(x.data.ndim >= 2, f"transpose_last2 needs ndim >= 2, got {x.shape}")
    def vjp(g):
        return (np.swapaxes(g, -1, -2),)
    return _emit(tape, np.swapaxes(x.data, -1, -2), (x,), vjp)


def concat(tape: Tape | None, parts: list[Tensor]) -> Tensor:
    """Concatenate along the last axis."""
    _check(len(parts) >= 1, "concat needs at least one tensor")
    lead = parts[0].shape[:-1]
    _check(
        all(p.shape[:-1] == lead for p in parts),
        f"concat needs equal leading dims, got {[p.shape for p in parts]}",
    )
    widths = [p.shape[-1] for p in parts]
    splits = np.cumsum(widths)[:-1]
    def vjp(g):
        return tuple(np.split(g, splits, axis=-1))
    return _emit(tape, np.concatenate([p.data for p in parts], axis=-1), tuple(parts), vjp)


def mean_pool_half(tape: Tape | None, x: Tensor) -> Tensor:
    """Halve axis 1 of (B, H, W) by averaging adjacent pairs; H must be even."""
    _check(
        x.data.ndim == 3 and x.shape[1] % 2 == 0,
        f"mean_pool_half needs (B, even H, W), got {x.shape}",
    )
    def vjp(g):
        gx = np.empty_like(x.data)
        gx[:, 0::2] = 0.5 * g
        gx[:, 1::2] = 0.5 * g
        return (gx,)
    return _emit(tape, 0.5 * (x.data[:, 0::2] + x.data[:, 1::2]), (x,), vjp)


def repeat_double(tape: Tape | None, x: Tensor) -> Tensor:
    """Double axis 1 of (B, H, W) by repeating each row."""
    _check(x.data.ndim == 3, f"repeat_double needs (B,H,W), got {x.shape}")
    def vjp(g):
        return (g[:, 0::2] + g[:, 1::2],)
    return _emit(tape, np.repeat(x.data, 2, axis=1), (x,), vjp)


def sum_all(tape: Tape | None, x: Tensor) -> Tensor:
    """Sum every entry to a scalar (accumulated in float64, cast back)."""
    total = np.asarray(x.data.sum(dtype=np.float64), dtype=x.data.dtype)
    def vjp(g):
        return (np.broadcast_to(g, x.shape).astype(x.data.dtype, copy=False),)
    return _emit(tape, total, (x,), vjp)


def where_mask(tape: Tape | None, mask: np.ndarray, a: Tensor, b: Tensor) -> Tensor:
    """Entrywise select by a constant mask: a where mask, else b.

    Uses ``np.where`` (never multiplication), so poisoned entries on the
    unselected side cannot leak NaNs into the output or the gradients.
    """
    mask = np.asarray(mask, dtype=bool)
    _check(
        mask.shape == a.shape == b.shape,
        f"where_mask needs equal shapes, got mask {mask.shape}, {a.shape}, {b.shape}",
    )
    zero = np.zeros((), dtype=a.data.dtype)
    def vjp(g):
        return np.where(mask, g, zero), np.where(mask, zero, g)
    return _emit(tape, np.where(mask, a.data, b.data), (a, b), vjp)
