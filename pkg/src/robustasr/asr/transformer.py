"""Transformer encoder/decoder with pre-norm blocks and joint CTC head hooks."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..diffcore import (
    Tensor,
    dense,
    dropout,
    fan_in_uniform,
    layer_norm,
    relu,
    take,
    zeros_param,
)
from .attention import MultiHeadAttention, causal_mask, distance_penalty_mask, positional_encoding


@dataclass
class TransformerConfig:
    d_model: int = 256
    h: int = 4
    n_enc: int = 12
    n_dec: int = 6
    d_ff: int = 2048
    dropout: float = 0.1
    ctc_weight: float = 0.3
    distance_penalty: float = 0.0
    use_pe: bool = True

    def __post_init__(self):
        if self.d_model % self.h != 0:
            raise ValueError(f"d_model={self.d_model} must be divisible by h={self.h}")
        if not 0.0 <= self.ctc_weight <= 1.0:
            raise ValueError(f"ctc_weight must lie in [0, 1], got {self.ctc_weight}")


def toy_transformer_config(**overrides):
    base = dict(d_model=64, h=4, n_enc=2, n_dec=2, d_ff=128, dropout=0.0)
    base.update(overrides)
    return TransformerConfig(**base)


class FeedForward:
    """Two dense layers with an activation between (Eq-style FFN)."""

    def __init__(self, d_model, d_ff, rng, act=relu):
        self.w1 = fan_in_uniform(rng, (d_model, d_ff), d_model)
        self.b1 = zeros_param((d_ff,))
        self.w2 = fan_in_uniform(rng, (d_ff, d_model), d_ff)
        self.b2 = zeros_param((d_model,))
        self.act = act

    def params(self, prefix=""):
        return {f"{prefix}w1": self.w1, f"{prefix}b1": self.b1, f"{prefix}w2": self.w2, f"{prefix}b2": self.b2}

    def forward(self, x):
        return dense(self.act(dense(x, self.w1, self.b1)), self.w2, self.b2)


def ffn(x, w1, b1, w2, b2):
    """max(0, x W1 + b1) W2 + b2."""
    return dense(relu(dense(x, w1, b1)), w2, b2)


class _NormWrapper:
    def __init__(self, d, prefix):
        self.gamma = Tensor(np.ones(d), requires_grad=True)
        self.beta = Tensor(np.zeros(d), requires_grad=True)
        self.prefix = prefix

    def params(self):
        return {f"{self.prefix}gamma": self.gamma, f"{self.prefix}beta": self.beta}

    def forward(self, x):
        return layer_norm(x, self.gamma, self.beta)


class TransformerEncoderBlock:
    """Pre-norm: x + SubBlock(LayerNorm(x)) for attention then FFN."""

    def __init__(self, cfg: TransformerConfig, rng):
        self.mha = MultiHeadAttention(cfg.d_model, cfg.h, rng, attn_dropout=cfg.dropout)
        self.ffn = FeedForward(cfg.d_model, cfg.d_ff, rng)
        self.norm1 = _NormWrapper(cfg.d_model, "norm1.")
        self.norm2 = _NormWrapper(cfg.d_model, "norm2.")
        self.p_drop = cfg.dropout

    def params(self, prefix=""):
        out = {}
        out.update({prefix + k: v for k, v in self.mha.params("mha.").items()})
        out.update({prefix + k: v for k, v in self.ffn.params("ffn.").items()})
        out.update({prefix + k: v for k, v in self.norm1.params().items()})
        out.update({prefix + k: v for k, v in self.norm2.params().items()})
        return out

    def forward(self, x, mask=None, train=False, rng=None):
        h = self.norm1.forward(x)
        x = x + dropout(self.mha.forward(h, h, h, mask=mask, train=train, rng=rng), self.p_drop, rng, train)
        h = self.norm2.forward(x)
        x = x + dropout(self.ffn.forward(h), self.p_drop, rng, train)
        return x


class TransformerEncoder:
    """Input embedding, position encoding, N_e pre-norm blocks (no subsampling)."""

    def __init__(self, cfg: TransformerConfig, feat_dim, rng):
        self.cfg = cfg
        self.feat_dim = feat_dim
        self.embed_w = fan_in_uniform(rng, (feat_dim, cfg.d_model), feat_dim)
        self.embed_b = zeros_param((cfg.d_model,))
        self.blocks = [TransformerEncoderBlock(cfg, rng) for _ in range(cfg.n_enc)]

    def params(self, prefix=""):
        out = {f"{prefix}embed.w": self.embed_w, f"{prefix}embed.b": self.embed_b}
        for i, blk in enumerate(self.blocks):
            out.update(blk.params(f"{prefix}block{i}."))
        return out

    def forward(self, feats, train=False, rng=None):
        if not isinstance(feats, Tensor):
            feats = Tensor(np.asarray(feats, dtype=np.float64))
        t = feats.shape[0]
        if t == 0:
            raise ValueError("encoder received an empty feature matrix")
        x = dense(feats, self.embed_w, self.embed_b)
        if self.cfg.use_pe:
            x = x + positional_encoding(t, self.cfg.d_model)
        x = dropout(x, self.cfg.dropout, rng, train)
        mask = None
        if self.cfg.distance_penalty > 0.0:
            mask = distance_penalty_mask(t, t, self.cfg.distance_penalty)
        for blk in self.blocks:
            x = blk.forward(x, mask=mask, train=train, rng=rng)
        return x


class TransformerDecoderBlock:
    def __init__(self, cfg: TransformerConfig, rng):
        self.self_mha = MultiHeadAttention(cfg.d_model, cfg.h, rng, attn_dropout=cfg.dropout)
        self.cross_mha = MultiHeadAttention(cfg.d_model, cfg.h, rng, attn_dropout=cfg.dropout)
        self.ffn = FeedForward(cfg.d_model, cfg.d_ff, rng)
        self.norm1 = _NormWrapper(cfg.d_model, "norm1.")
        self.norm2 = _NormWrapper(cfg.d_model, "norm2.")
        self.norm3 = _NormWrapper(cfg.d_model, "norm3.")
        self.p_drop = cfg.dropout

    def params(self, prefix=""):
        out = {}
        out.update({prefix + k: v for k, v in self.self_mha.params("self.").items()})
        out.update({prefix + k: v for k, v in self.cross_mha.params("cross.").items()})
        out.update({prefix + k: v for k, v in self.ffn.params("ffn.").items()})
        for n in (self.norm1, self.norm2, self.norm3):
            out.update({prefix + k: v for k, v in n.params().items()})
        return out

    def forward(self, x, memory, self_mask, train=False, rng=None):
        h = self.norm1.forward(x)
        x = x + dropout(self.self_mha.forward(h, h, h, mask=self_mask, train=train, rng=rng), self.p_drop, rng, train)
        h = self.norm2.forward(x)
        x = x + dropout(self.cross_mha.forward(h, memory, memory, train=train, rng=rng), self.p_drop, rng, train)
        h = self.norm3.forward(x)
        x = x + dropout(self.ffn.forward(h), self.p_drop, rng, train)
        return x


class TransformerDecoder:
    """Token embedding + PE, N_d masked blocks, linear projection to vocab."""

    def __init__(self, cfg: TransformerConfig, vocab_size, rng):
        self.cfg = cfg
        self.vocab_size = vocab_size
        self.embed = fan_in_uniform(rng, (vocab_size, cfg.d_model), cfg.d_model)
        self.blocks = [TransformerDecoderBlock(cfg, rng) for _ in range(cfg.n_dec)]
        self.out_w = fan_in_uniform(rng, (cfg.d_model, vocab_size), cfg.d_model)
        self.out_b = zeros_param((vocab_size,))

    def params(self, prefix=""):
        out = {f"{prefix}embed": self.embed, f"{prefix}out.w": self.out_w, f"{prefix}out.b": self.out_b}
        for i, blk in enumerate(self.blocks):
            out.update(blk.params(f"{prefix}block{i}."))
        return out

    def forward(self, memory, token_ids, train=False, rng=None):
        """Teacher-forced logits (len(token_ids), vocab) under a causal mask."""
        token_ids = np.asarray(token_ids, dtype=int)
        if token_ids.size == 0:
            raise ValueError("decoder needs a non-empty prefix (start with sos)")
        t = len(token_ids)
        x = take(self.embed, token_ids) * np.sqrt(self.cfg.d_model)
        if self.cfg.use_pe:
            x = x + positional_encoding(t, self.cfg.d_model)
        x = dropout(x, self.cfg.dropout, rng, train)
        mask = causal_mask(t)
        for blk in self.blocks:
            x = blk.forward(x, memory, mask, train=train, rng=rng)
        return dense(x, self.out_w, self.out_b)
