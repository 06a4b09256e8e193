"""Adaptive multi-agent attention.

Each agent contributes its own query against shared global keys and
values; the per-agent attention outputs are concatenated along the
feature axis.  Built from primitive tape ops, so it differentiates for
free.
"""

from __future__ import annotations

import math

from .engine import Tape, Tensor, ShapeError, bmm, concat, scale, softmax, transpose_last2

__all__ = ["adaptive_attention"]


def adaptive_attention(tape: Tape | None, qs: list[Tensor], k: Tensor, v: Tensor) -> Tensor:
    """Per-agent scaled dot-product attention over shared keys/values.

    ``qs[i]`` is agent i's query (B, T, d_k); ``k`` is (B, T, d_k) and
    ``v`` (B, T, d_v).  Returns the concatenation of the per-agent
    outputs, shape (B, T, M * d_v).
    """
    if not qs:
        raise ShapeError("need at least one agent query")
    d_k = k.shape[-1]
    for i, q in enumerate(qs):
        if q.shape[-1] != d_k:
            raise ShapeError(f"query {i} key-dim {q.shape[-1]} != {d_k}")
    k_t = transpose_last2(tape, k)
    outs = []
    for q in qs:
        scores = scale(tape, bmm(tape, q, k_t), 1.0 / math.sqrt(d_k))
        outs.append(bmm(tape, softmax(tape, scores), v))
    return concat(tape, outs)
