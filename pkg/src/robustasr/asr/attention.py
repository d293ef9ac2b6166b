"""Scaled dot-product and multi-head attention, sinusoid position encoding."""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from ..diffcore import (
    DimensionError,
    Tensor,
    dense,
    dropout,
    fan_in_uniform,
    softmax_lastdim,
    transpose,
)

NEG_INF = -1e30  # large-negative mask: exp() underflows to exactly 0.0


def scaled_dot_attention(q, k, v, mask=None):
    """softmax(Q K^T / sqrt(d_k) + mask) V.  Masked positions get -inf logits."""
    d_k = q.shape[-1]
    if k.shape[-1] != d_k:
        raise DimensionError(f"query dim {d_k} does not match key dim {k.shape[-1]}")
    if k.shape[-2] != v.shape[-2]:
        raise DimensionError(f"key count {k.shape[-2]} does not match value count {v.shape[-2]}")
    logits = (q @ transpose(k, *range(k.ndim - 2), k.ndim - 1, k.ndim - 2)) * (1.0 / np.sqrt(d_k))
    if mask is not None:
        logits = logits + np.asarray(mask, dtype=np.float64)
    return softmax_lastdim(logits) @ v


def causal_mask(t):
    """(t, t) additive mask hiding positions j > i."""
    m = np.zeros((t, t))
    m[np.triu_indices(t, k=1)] = NEG_INF
    return m


def distance_penalty_mask(t_q, t_k, rho):
    """Additive logit penalty -rho*|i-j|, biasing attention toward nearby frames."""
    i = np.arange(t_q)[:, None]
    j = np.arange(t_k)[None, :]
    return -rho * np.abs(i - j).astype(np.float64)


@lru_cache(maxsize=32)
def _pe_table(max_pos, d_model):
    pos = np.arange(max_pos)[:, None].astype(np.float64)
    i = np.arange(d_model)[None, :].astype(np.float64)
    angles = pos / (10000.0 ** (i / d_model))
    table = np.where(np.arange(d_model)[None, :] % 2 == 0, np.sin(angles), np.cos(angles))
    return table


def positional_encoding(max_pos, d_model):
    """Sinusoid absolute position table: sin on even dims, cos on odd dims."""
    if d_model < 2:
        raise ValueError(f"d_model must be >= 2, got {d_model}")
    return _pe_table(int(max_pos), int(d_model)).copy()


class MultiHeadAttention:
    """h parallel attention heads over shared projections, concat, out-project.

    Projections are bias-free; per-head slices of the packed matrices equal
    the per-head matrices of the textbook formulation.
    """

    def __init__(self, d_model, h, rng, attn_dropout=0.0):
        if d_model % h != 0:
            raise DimensionError(f"d_model={d_model} not divisible by h={h}")
        self.d_model = d_model
        self.h = h
        self.d_k = d_model // h
        self.attn_dropout = attn_dropout
        self.wq = fan_in_uniform(rng, (d_model, d_model), d_model)
        self.wk = fan_in_uniform(rng, (d_model, d_model), d_model)
        self.wv = fan_in_uniform(rng, (d_model, d_model), d_model)
        self.wo = fan_in_uniform(rng, (d_model, d_model), d_model)

    def params(self, prefix=""):
        return {f"{prefix}wq": self.wq, f"{prefix}wk": self.wk, f"{prefix}wv": self.wv, f"{prefix}wo": self.wo}

    def _split(self, x, t):
        # (t, d_model) -> (h, t, d_k)
        return transpose(x.reshape(t, self.h, self.d_k), 1, 0, 2)

    def forward(self, q, k, v, mask=None, train=False, rng=None):
        t_q, t_k = q.shape[0], k.shape[0]
        qh = self._split(dense(q, self.wq), t_q)
        kh = self._split(dense(k, self.wk), t_k)
        vh = self._split(dense(v, self.wv), t_k)
        logits = (qh @ transpose(kh, 0, 2, 1)) * (1.0 / np.sqrt(self.d_k))
        if mask is not None:
            logits = logits + np.asarray(mask, dtype=np.float64)[None, :, :]
        weights = softmax_lastdim(logits)
        if train and self.attn_dropout > 0.0:
            weights = dropout(weights, self.attn_dropout, rng, train)
        heads = weights @ vh                                  # (h, t_q, d_k)
        merged = transpose(heads, 1, 0, 2).reshape(t_q, self.d_model)
        return dense(merged, self.wo)
