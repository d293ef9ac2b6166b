"""Memory-reduced self-attention for the enhancement nets.

Queries keep full time resolution; keys and values come from a p-pooled
copy of the feature map, and all projections shrink channels by the factor
b.  A learnable residual weight beta (init 0) keeps the layer an exact
identity at initialization.
"""

from __future__ import annotations

import numpy as np

from ..diffcore import (
    DimensionError,
    Tensor,
    dense,
    fan_in_uniform,
    max_pool1d,
    pad as pad_op,
    softmax_lastdim,
    transpose,
)

NEG_INF = -1e30


class SelfAttentionLayer:
    """Channel reduction b, key/value pooling p, learnable residual beta."""

    def __init__(self, channels, b, p, rng):
        if channels % b != 0:
            raise DimensionError(f"channels={channels} not divisible by reduction b={b}")
        self.channels = channels
        self.b = b
        self.p = p
        cr = channels // b
        self.wq = fan_in_uniform(rng, (channels, cr), channels)
        self.wk = fan_in_uniform(rng, (channels, cr), channels)
        self.wv = fan_in_uniform(rng, (channels, cr), channels)
        self.wo = fan_in_uniform(rng, (cr, channels), cr)
        self.beta = Tensor(np.zeros(1), requires_grad=True)

    def params(self, prefix=""):
        return {
            f"{prefix}wq": self.wq,
            f"{prefix}wk": self.wk,
            f"{prefix}wv": self.wv,
            f"{prefix}wo": self.wo,
            f"{prefix}beta": self.beta,
        }

    def forward(self, f, return_attention=False):
        """f: (L, C) or (B, L, C); output matches; A rows sum to 1."""
        squeeze = f.ndim == 2
        if squeeze:
            f = f.reshape(1, *f.shape)
        B, L, C = f.shape
        if C != self.channels:
            raise DimensionError(f"feature channels {C} do not match layer channels {self.channels}")

        q = dense(f, self.wq)                             # (B, L, C/b)

        # pool keys/values; right-pad to a multiple of p, mask windows that
        # contain padding only
        rem = (-L) % self.p
        fp_in = pad_op(f, ((0, 0), (0, rem), (0, 0))) if rem else f
        pooled = max_pool1d(fp_in, self.p, self.p)        # (B, L/p, C)
        n_keys = pooled.shape[1]
        k = dense(pooled, self.wk)
        v = dense(pooled, self.wv)

        logits = q @ transpose(k, 0, 2, 1)                # (B, L, n_keys)
        starts = np.arange(n_keys) * self.p
        key_mask = np.where(starts >= L, NEG_INF, 0.0)
        if key_mask.any():
            logits = logits + key_mask[None, None, :]
        attn = softmax_lastdim(logits)
        out = (attn @ v) @ self.wo                        # (B, L, C)
        result = self.beta * out + f
        if squeeze:
            result = result.reshape(L, C)
            attn = attn.reshape(L, n_keys)
        if return_attention:
            return result, attn
        return result


def sa_layer_forward(f, layer: SelfAttentionLayer, return_attention=False):
    if not isinstance(f, Tensor):
        f = Tensor(np.asarray(f, dtype=np.float64))
    return layer.forward(f, return_attention=return_attention)
