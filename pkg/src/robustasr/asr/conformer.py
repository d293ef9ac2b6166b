"""Conformer encoder: conv subsampling, macaron FFN pairs, conv module, MHSA."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..diffcore import (
    BatchNormState,
    DimensionError,
    Tensor,
    batch_norm,
    conv1d,
    dense,
    dropout,
    fan_in_uniform,
    glu,
    pad as pad_op,
    relu,
    swish,
    take,
    zeros_param,
)
from .attention import MultiHeadAttention, positional_encoding
from .transformer import FeedForward, _NormWrapper


@dataclass
class ConformerConfig:
    d_model: int = 256
    h: int = 4
    n_enc: int = 12
    n_dec: int = 6
    d_ff: int = 2048
    conv_kernel: int = 31
    subsample_channels: int = 256
    dropout: float = 0.1
    ctc_weight: float = 0.3
    use_pe: bool = True

    def __post_init__(self):
        if self.d_model % self.h != 0:
            raise ValueError(f"d_model={self.d_model} must be divisible by h={self.h}")
        if self.conv_kernel % 2 == 0:
            raise ValueError(f"conv module kernel must be odd, got {self.conv_kernel}")


def toy_conformer_config(**overrides):
    base = dict(d_model=64, h=4, n_enc=2, n_dec=2, d_ff=128, conv_kernel=15, subsample_channels=64, dropout=0.0)
    base.update(overrides)
    return ConformerConfig(**base)


def depthwise_conv1d(x, w):
    """Per-channel convolution of (T, C) with kernels (K, C), same padding."""
    k, c = w.shape
    if x.shape[-1] != c:
        raise DimensionError(f"depthwise kernel channels {c} do not match input {x.shape[-1]}")
    t = x.shape[0]
    half = (k - 1) // 2
    xp = pad_op(x, ((half, half), (0, 0)))
    idx = np.arange(t)[:, None] + np.arange(k)[None, :]
    cols = take(xp, idx)               # (T, K, C)
    return (cols * w.reshape(1, k, c)).sum(axis=1)


class ConformerConvModule:
    """LN, pointwise conv doubling channels, GLU, depthwise conv, BN, Swish,
    pointwise conv, dropout.  The residual add happens in the block."""

    def __init__(self, cfg: ConformerConfig, rng):
        d = cfg.d_model
        self.norm = _NormWrapper(d, "norm.")
        self.pw1_w = fan_in_uniform(rng, (d, 2 * d), d)
        self.pw1_b = zeros_param((2 * d,))
        self.dw_w = fan_in_uniform(rng, (cfg.conv_kernel, d), cfg.conv_kernel)
        self.bn_gamma = Tensor(np.ones(d), requires_grad=True)
        self.bn_beta = Tensor(np.zeros(d), requires_grad=True)
        self.bn_state = BatchNormState(d)
        self.pw2_w = fan_in_uniform(rng, (d, d), d)
        self.pw2_b = zeros_param((d,))
        self.p_drop = cfg.dropout

    def params(self, prefix=""):
        out = {
            f"{prefix}pw1.w": self.pw1_w,
            f"{prefix}pw1.b": self.pw1_b,
            f"{prefix}dw.w": self.dw_w,
            f"{prefix}bn.gamma": self.bn_gamma,
            f"{prefix}bn.beta": self.bn_beta,
            f"{prefix}pw2.w": self.pw2_w,
            f"{prefix}pw2.b": self.pw2_b,
        }
        out.update({prefix + k: v for k, v in self.norm.params().items()})
        return out

    def forward(self, x, train=False, rng=None):
        h = self.norm.forward(x)
        h = glu(dense(h, self.pw1_w, self.pw1_b), axis=-1)
        h = depthwise_conv1d(h, self.dw_w)
        h = batch_norm(h, self.bn_gamma, self.bn_beta, "train" if train else "eval", state=self.bn_state)
        h = swish(h)
        h = dense(h, self.pw2_w, self.pw2_b)
        return dropout(h, self.p_drop, rng, train)


class ConformerBlock:
    """x' = x + FFN(x)/2; x'' = x' + MHSA(x'); x''' = x'' + Conv(x'');
    y = LayerNorm(x''' + FFN(x''')/2), every module pre-normed."""

    def __init__(self, cfg: ConformerConfig, rng):
        d = cfg.d_model
        self.ffn1 = FeedForward(d, cfg.d_ff, rng, act=swish)
        self.ffn1_norm = _NormWrapper(d, "norm.")
        self.mhsa = MultiHeadAttention(d, cfg.h, rng, attn_dropout=cfg.dropout)
        self.mhsa_norm = _NormWrapper(d, "norm.")
        self.conv = ConformerConvModule(cfg, rng)
        self.ffn2 = FeedForward(d, cfg.d_ff, rng, act=swish)
        self.ffn2_norm = _NormWrapper(d, "norm.")
        self.final_norm = _NormWrapper(d, "norm.")
        self.p_drop = cfg.dropout

    def params(self, prefix=""):
        out = {}
        out.update({prefix + "ffn1." + k: v for k, v in self.ffn1.params().items()})
        out.update({prefix + "ffn1_" + k: v for k, v in self.ffn1_norm.params().items()})
        out.update({prefix + "mhsa." + k: v for k, v in self.mhsa.params().items()})
        out.update({prefix + "mhsa_" + k: v for k, v in self.mhsa_norm.params().items()})
        out.update({prefix + "conv." + k: v for k, v in self.conv.params().items()})
        out.update({prefix + "ffn2." + k: v for k, v in self.ffn2.params().items()})
        out.update({prefix + "ffn2_" + k: v for k, v in self.ffn2_norm.params().items()})
        out.update({prefix + "final_" + k: v for k, v in self.final_norm.params().items()})
        return out

    def _ffn_branch(self, ffn_mod, norm, x, train, rng):
        return dropout(ffn_mod.forward(norm.forward(x)), self.p_drop, rng, train)

    def forward(self, x, train=False, rng=None):
        x = x + self._ffn_branch(self.ffn1, self.ffn1_norm, x, train, rng) * 0.5
        h = self.mhsa_norm.forward(x)
        x = x + dropout(self.mhsa.forward(h, h, h, train=train, rng=rng), self.p_drop, rng, train)
        x = x + self.conv.forward(x, train=train, rng=rng)
        x = x + self._ffn_branch(self.ffn2, self.ffn2_norm, x, train, rng) * 0.5
        return self.final_norm.forward(x)


class SubsampleConv:
    """Two stride-2 kernel-3 conv layers over time, then projection to d_model.

    Length rule per layer: L -> floor((L - 1) / 2) + 1 (same-style pad of 1);
    100 frames subsample to 25.
    """

    def __init__(self, cfg: ConformerConfig, feat_dim, rng):
        ch = cfg.subsample_channels
        self.conv1_w = fan_in_uniform(rng, (3, feat_dim, ch), 3 * feat_dim)
        self.conv1_b = zeros_param((ch,))
        self.conv2_w = fan_in_uniform(rng, (3, ch, ch), 3 * ch)
        self.conv2_b = zeros_param((ch,))
        self.proj_w = fan_in_uniform(rng, (ch, cfg.d_model), ch)
        self.proj_b = zeros_param((cfg.d_model,))

    def params(self, prefix=""):
        return {
            f"{prefix}conv1.w": self.conv1_w,
            f"{prefix}conv1.b": self.conv1_b,
            f"{prefix}conv2.w": self.conv2_w,
            f"{prefix}conv2.b": self.conv2_b,
            f"{prefix}proj.w": self.proj_w,
            f"{prefix}proj.b": self.proj_b,
        }

    @staticmethod
    def out_len(t):
        for _ in range(2):
            t = (t - 1) // 2 + 1
        return t

    def forward(self, feats):
        t = feats.shape[0]
        if t < 4:
            raise DimensionError(f"subsample needs at least 4 frames, got {t}")
        x = feats.reshape(1, t, feats.shape[1])
        x = relu(conv1d(x, self.conv1_w, self.conv1_b, stride=2, pad=1))
        x = relu(conv1d(x, self.conv2_w, self.conv2_b, stride=2, pad=1))
        x = x.reshape(x.shape[1], x.shape[2])
        return dense(x, self.proj_w, self.proj_b)


class ConformerEncoder:
    """Subsample conv front, position encoding, N_e conformer blocks."""

    def __init__(self, cfg: ConformerConfig, feat_dim, rng):
        self.cfg = cfg
        self.feat_dim = feat_dim
        self.subsample = SubsampleConv(cfg, feat_dim, rng)
        self.blocks = [ConformerBlock(cfg, rng) for _ in range(cfg.n_enc)]

    def params(self, prefix=""):
        out = self.subsample.params(f"{prefix}subsample.")
        for i, blk in enumerate(self.blocks):
            out.update(blk.params(f"{prefix}block{i}."))
        return out

    def forward(self, feats, train=False, rng=None):
        if not isinstance(feats, Tensor):
            feats = Tensor(np.asarray(feats, dtype=np.float64))
        x = self.subsample.forward(feats)
        if self.cfg.use_pe:
            x = x + positional_encoding(x.shape[0], self.cfg.d_model)
        x = dropout(x, self.cfg.dropout, rng, train)
        for blk in self.blocks:
            x = blk.forward(x, train=train, rng=rng)
        return x
