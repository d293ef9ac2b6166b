"""Discriminator: encoder-style conv stack over a two-channel input with
virtual batch norm, LeakyReLU(0.3), a 1x1 squeeze and a linear score head.

Virtual batch norm keeps a frozen reference batch of input pairs; every
forward pass propagates the reference through the current weights so each
layer normalizes the live example with merged (reference + example)
statistics while the reference itself uses its own statistics.
"""

from __future__ import annotations

import numpy as np

from ..data import CheckpointPayload, check_architecture
from ..diffcore import (
    ConfigurationError,
    DimensionError,
    Tensor,
    batch_norm_virtual,
    concat,
    conv1d,
    dense,
    fan_in_uniform,
    leaky_relu,
    zeros_param,
)
from .attention import SelfAttentionLayer
from .generator import SeganArch

LEAKY_ALPHA = 0.3


def _ref_batch_stats_norm(x, gamma, beta, eps=1e-5):
    """Normalize a batch by its own (on-graph) statistics."""
    mu = x.mean(axis=(0, 1), keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(axis=(0, 1), keepdims=True)
    return xc * ((var + eps) ** -0.5) * gamma + beta


class Discriminator:
    def __init__(self, arch: SeganArch, rng):
        self.arch = arch
        n = arch.n_layers
        f = arch.filters
        w = arch.width

        self.conv_w, self.conv_b = [], []
        self.vbn_gamma, self.vbn_beta = [], []
        cin = 2
        for i in range(n):
            self.conv_w.append(fan_in_uniform(rng, (w, cin, f[i]), w * cin))
            self.conv_b.append(zeros_param((f[i],)))
            self.vbn_gamma.append(Tensor(np.ones(f[i]), requires_grad=True))
            self.vbn_beta.append(Tensor(np.zeros(f[i]), requires_grad=True))
            cin = f[i]

        self.attn = {l: SelfAttentionLayer(f[l - 1], arch.attn_b, arch.attn_p, rng) for l in arch.attention_layers}

        # squeeze 8 x C_top to 8 values, then a linear classification head
        self.squeeze_w = fan_in_uniform(rng, (1, f[-1], 1), f[-1])
        self.squeeze_b = zeros_param((1,))
        self.head_w = fan_in_uniform(rng, (arch.bottleneck_len, 1), arch.bottleneck_len)
        self.head_b = zeros_param((1,))

        self._reference = None

    def params(self):
        out = {}
        for i in range(self.arch.n_layers):
            out[f"conv{i + 1}.w"] = self.conv_w[i]
            out[f"conv{i + 1}.b"] = self.conv_b[i]
            out[f"conv{i + 1}.vbn_gamma"] = self.vbn_gamma[i]
            out[f"conv{i + 1}.vbn_beta"] = self.vbn_beta[i]
        for l, attn in self.attn.items():
            out.update(attn.params(f"conv{l}.attn."))
        out["squeeze.w"] = self.squeeze_w
        out["squeeze.b"] = self.squeeze_b
        out["head.w"] = self.head_w
        out["head.b"] = self.head_b
        return out

    # -- virtual batch norm reference ------------------------------------

    def register_reference(self, candidate, conditioning):
        """Freeze the reference input pairs (first training batch by contract)."""
        ref = np.concatenate(
            [np.asarray(candidate, dtype=np.float64), np.asarray(conditioning, dtype=np.float64)], axis=2
        )
        if ref.ndim != 3 or ref.shape[1] != self.arch.chunk_len or ref.shape[2] != 2:
            raise DimensionError(f"reference batch must be (B, {self.arch.chunk_len}, 2), got {ref.shape}")
        self._reference = ref

    @property
    def has_reference(self):
        return self._reference is not None

    def reference_arrays(self):
        return self._reference

    # -- forward -------------------------------------------------------------

    def forward(self, candidate, conditioning):
        """Scalar score per example for (candidate, conditioning) pairs."""
        if self._reference is None:
            raise ConfigurationError(
                "discriminator uses virtual batch norm: register a reference batch before the first forward"
            )
        if not isinstance(candidate, Tensor):
            candidate = Tensor(np.asarray(candidate, dtype=np.float64))
        if not isinstance(conditioning, Tensor):
            conditioning = Tensor(np.asarray(conditioning, dtype=np.float64))
        for name, t in (("candidate", candidate), ("conditioning", conditioning)):
            if t.ndim != 3 or t.shape[1] != self.arch.chunk_len or t.shape[2] != 1:
                raise DimensionError(f"{name} must be (B, {self.arch.chunk_len}, 1), got {t.shape}")

        x = concat([candidate, conditioning], axis=2)
        ref = Tensor(self._reference)
        arch = self.arch
        for i in range(arch.n_layers):
            x = conv1d(x, self.conv_w[i], self.conv_b[i], stride=arch.stride, pad=arch.pad)
            ref = conv1d(ref, self.conv_w[i], self.conv_b[i], stride=arch.stride, pad=arch.pad)
            x = batch_norm_virtual(x, self.vbn_gamma[i], self.vbn_beta[i], ref)
            ref = _ref_batch_stats_norm(ref, self.vbn_gamma[i], self.vbn_beta[i])
            x = leaky_relu(x, LEAKY_ALPHA)
            ref = leaky_relu(ref, LEAKY_ALPHA)
            layer = i + 1
            if layer in self.attn:
                x = self.attn[layer].forward(x)
                ref = self.attn[layer].forward(ref)

        x = conv1d(x, self.squeeze_w, self.squeeze_b, stride=1, pad=0)   # (B, bottleneck, 1)
        x = x.reshape(x.shape[0], x.shape[1])
        return dense(x, self.head_w, self.head_b).reshape(x.shape[0])

    # -- persistence ------------------------------------------------------------

    def architecture(self):
        return {"kind": "segan-discriminator", **self.arch.describe()}

    def to_payload(self, meta=None):
        tensors = {k: p.data for k, p in self.params().items()}
        if self._reference is not None:
            tensors["vbn.reference"] = self._reference
        return CheckpointPayload(architecture=self.architecture(), tensors=tensors, meta=meta or {})

    def load_payload(self, payload):
        check_architecture(self.architecture(), payload.architecture, context="discriminator")
        for name, p in self.params().items():
            p.data = np.array(payload.tensors[name], dtype=np.float64)
        if "vbn.reference" in payload.tensors:
            self._reference = np.array(payload.tensors["vbn.reference"], dtype=np.float64)

    @classmethod
    def from_payload(cls, payload, rng=None):
        arch_d = dict(payload.architecture)
        if arch_d.pop("kind") != "segan-discriminator":
            raise ValueError("checkpoint does not hold a discriminator")
        arch = SeganArch(
            chunk_len=arch_d["chunk_len"], filters=tuple(arch_d["filters"]), width=arch_d["width"],
            stride=arch_d["stride"], attention_layers=tuple(arch_d["attention_layers"]),
            attn_b=arch_d["attn_b"], attn_p=arch_d["attn_p"],
        )
        d = cls(arch, rng or np.random.default_rng(0))
        d.load_payload(payload)
        return d
