"""Enhancement generator: strided conv encoder, latent stack, mirrored decoder.

Every strided layer exactly halves the time axis (width 31, stride 2,
pad 15); decoder layers double it back (out_pad 1).  Skip connections
concatenate each encoder output with the mirror decoder output, so decoder
input channels are twice the ladder width at that depth.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..data import CheckpointPayload, check_architecture
from ..diffcore import (
    DimensionError,
    Tensor,
    concat,
    const_param,
    conv1d,
    conv1d_transposed,
    fan_in_uniform,
    prelu,
    zeros_param,
)
from .attention import SelfAttentionLayer

PAPER_FILTERS = (16, 32, 32, 64, 64, 128, 128, 256, 256, 512, 1024)
TOY_FILTERS = (16, 32, 64, 128)


@dataclass(frozen=True)
class SeganArch:
    """Architecture shared by generator and discriminator."""

    chunk_len: int = 16384
    filters: tuple = PAPER_FILTERS
    width: int = 31
    stride: int = 2
    attention_layers: tuple = (10,)
    attn_b: int = 8
    attn_p: int = 4

    def __post_init__(self):
        n = len(self.filters)
        if self.chunk_len % (self.stride ** n) != 0:
            raise ValueError(f"chunk_len {self.chunk_len} not divisible by stride^{n}")
        for l in self.attention_layers:
            if not 1 <= l <= n - 1:
                raise ValueError(f"attention layer {l} out of range 1..{n - 1}")
            if self.filters[l - 1] % self.attn_b != 0:
                raise ValueError(f"attention b={self.attn_b} does not divide {self.filters[l - 1]} channels at layer {l}")

    @property
    def n_layers(self):
        return len(self.filters)

    @property
    def bottleneck_len(self):
        return self.chunk_len // (self.stride ** self.n_layers)

    @property
    def pad(self):
        return (self.width - 1) // 2

    def ladder(self):
        """Expected encoder feature-map shapes (length, channels)."""
        return [(self.chunk_len // 2 ** (i + 1), f) for i, f in enumerate(self.filters)]

    def describe(self):
        return {
            "chunk_len": self.chunk_len,
            "filters": list(self.filters),
            "width": self.width,
            "stride": self.stride,
            "attention_layers": list(self.attention_layers),
            "attn_b": self.attn_b,
            "attn_p": self.attn_p,
        }


def toy_arch(**overrides):
    base = dict(chunk_len=1024, filters=TOY_FILTERS, attention_layers=(3,), attn_b=8, attn_p=4)
    base.update(overrides)
    return SeganArch(**base)


class Generator:
    def __init__(self, arch: SeganArch, rng):
        self.arch = arch
        n = arch.n_layers
        f = arch.filters
        w, pad = arch.width, arch.pad

        self.enc_w, self.enc_b, self.enc_a = [], [], []
        cin = 1
        for i in range(n):
            self.enc_w.append(fan_in_uniform(rng, (w, cin, f[i]), w * cin))
            self.enc_b.append(zeros_param((f[i],)))
            self.enc_a.append(const_param(0.25, (f[i],)))
            cin = f[i]

        # decoder layer j: input 2*f[n-j], output f[n-j-1] (waveform at the top)
        self.dec_w, self.dec_b, self.dec_a = [], [], []
        for j in range(1, n + 1):
            icj = 2 * f[n - j]
            ocj = f[n - j - 1] if j < n else 1
            self.dec_w.append(fan_in_uniform(rng, (w, ocj, icj), w * icj))
            self.dec_b.append(zeros_param((ocj,)))
            # the waveform output layer starts linear (slope 1); squashing
            # negative samples at init stalls the regression badly
            self.dec_a.append(const_param(1.0 if j == n else 0.25, (ocj,)))
        # start with the latent path silent (mirrors the attention beta=0
        # residual safety): the unit-variance draw otherwise drowns the
        # encoding until the net learns to gate it
        self.dec_w[0].data[:, :, arch.filters[-1] :] = 0.0

        self.enc_attn = {
            l: SelfAttentionLayer(f[l - 1], arch.attn_b, arch.attn_p, rng) for l in arch.attention_layers
        }
        self.dec_attn = {
            n - l: SelfAttentionLayer(f[l - 1], arch.attn_b, arch.attn_p, rng) for l in arch.attention_layers
        }

    def params(self):
        out = {}
        for i, (w, b, a) in enumerate(zip(self.enc_w, self.enc_b, self.enc_a), start=1):
            out[f"enc{i}.w"] = w
            out[f"enc{i}.b"] = b
            out[f"enc{i}.a"] = a
        for j, (w, b, a) in enumerate(zip(self.dec_w, self.dec_b, self.dec_a), start=1):
            out[f"dec{j}.w"] = w
            out[f"dec{j}.b"] = b
            out[f"dec{j}.a"] = a
        for l, attn in self.enc_attn.items():
            out.update(attn.params(f"enc{l}.attn."))
        for j, attn in self.dec_attn.items():
            out.update(attn.params(f"dec{j}.attn."))
        return out

    def z_shape(self, batch):
        return (batch, self.arch.bottleneck_len, self.arch.filters[-1])

    def forward(self, noisy, z, record_shapes=None):
        """noisy: (B, L, 1) chunks, z: bottleneck-shaped latent; returns (B, L, 1).

        record_shapes, if a list, collects (length, channels) per layer output
        for ladder conformance checks.
        """
        arch = self.arch
        if not isinstance(noisy, Tensor):
            noisy = Tensor(np.asarray(noisy, dtype=np.float64))
        if noisy.ndim != 3 or noisy.shape[2] != 1 or noisy.shape[1] != arch.chunk_len:
            raise DimensionError(
                f"generator expects (B, {arch.chunk_len}, 1) chunks, got {noisy.shape}"
            )
        if not isinstance(z, Tensor):
            z = Tensor(np.asarray(z, dtype=np.float64))
        if z.shape != self.z_shape(noisy.shape[0]):
            raise DimensionError(f"latent shape {z.shape} does not match {self.z_shape(noisy.shape[0])}")

        n = arch.n_layers
        skips = []
        h = noisy
        for i in range(1, n + 1):
            h = prelu(conv1d(h, self.enc_w[i - 1], self.enc_b[i - 1], stride=arch.stride, pad=arch.pad),
                      self.enc_a[i - 1])
            if i in self.enc_attn:
                h = self.enc_attn[i].forward(h)
            if record_shapes is not None:
                record_shapes.append(("enc", i, h.shape[1], h.shape[2]))
            if i < n:
                skips.append(h)

        d = concat([h, z], axis=2)
        for j in range(1, n + 1):
            u = conv1d_transposed(d, self.dec_w[j - 1], self.dec_b[j - 1],
                                  stride=arch.stride, pad=arch.pad, out_pad=1)
            u = prelu(u, self.dec_a[j - 1])
            if j in self.dec_attn:
                u = self.dec_attn[j].forward(u)
            if record_shapes is not None:
                record_shapes.append(("dec", j, u.shape[1], u.shape[2]))
            if j < n:
                d = concat([u, skips[n - j - 1]], axis=2)
        return u

    def architecture(self):
        return {"kind": "segan-generator", **self.arch.describe()}

    def to_payload(self, meta=None):
        return CheckpointPayload(
            architecture=self.architecture(),
            tensors={k: p.data for k, p in self.params().items()},
            meta=meta or {},
        )

    def load_payload(self, payload):
        check_architecture(self.architecture(), payload.architecture, context="generator")
        for name, p in self.params().items():
            p.data = np.array(payload.tensors[name], dtype=np.float64)

    @classmethod
    def from_payload(cls, payload, rng=None):
        arch_d = dict(payload.architecture)
        if arch_d.pop("kind") != "segan-generator":
            raise ValueError("checkpoint does not hold a generator")
        arch = SeganArch(
            chunk_len=arch_d["chunk_len"], filters=tuple(arch_d["filters"]), width=arch_d["width"],
            stride=arch_d["stride"], attention_layers=tuple(arch_d["attention_layers"]),
            attn_b=arch_d["attn_b"], attn_p=arch_d["attn_p"],
        )
        g = cls(arch, rng or np.random.default_rng(0))
        g.load_payload(payload)
        return g
