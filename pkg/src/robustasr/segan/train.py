"""Adversarial pretraining of the enhancement GAN on aligned chunk pairs."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..diffcore import RMSprop, TrainingDiverged, Tensor, backward, concat, iir_first_order
from ..signal import Waveform, preemphasis
from .discriminator import Discriminator
from .generator import Generator, SeganArch, toy_arch
from .losses import d_loss, g_loss_parts


@dataclass
class SeganTrainConfig:
    arch: SeganArch = field(default_factory=SeganArch)
    lambda_l1: float = 100.0
    lr: float = 2e-4
    batch: int = 50
    epochs: int = 86
    chunk_overlap_train: float = 0.5
    preemph: float = 0.95
    seed: int = 0
    ref_batch: int = 8

    def __post_init__(self):
        if not 0.0 <= self.chunk_overlap_train < 1.0:
            raise ValueError(f"chunk overlap must lie in [0, 1), got {self.chunk_overlap_train}")
        for name in ("lambda_l1", "lr", "batch", "epochs"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


def toy_train_config(**overrides):
    base = dict(arch=toy_arch(), batch=16, epochs=14, lr=5e-4, ref_batch=4)
    base.update(overrides)
    return SeganTrainConfig(**base)


def chunk_pairs(pairs, chunk_len, overlap, preemph_coeff):
    """Aligned (clean, noisy) chunk arrays from waveform pairs.

    Both signals are preemphasized first (applied to all net inputs during
    training and test); utterances shorter than one chunk are zero-padded.
    """
    hop = max(1, int(round(chunk_len * (1.0 - overlap))))
    clean_chunks, noisy_chunks = [], []
    for clean, noisy in pairs:
        c = preemphasis(clean.samples if isinstance(clean, Waveform) else clean, preemph_coeff)
        x = preemphasis(noisy.samples if isinstance(noisy, Waveform) else noisy, preemph_coeff)
        if len(c) != len(x):
            raise ValueError(f"pair length mismatch: clean {len(c)} vs noisy {len(x)}")
        if len(c) < chunk_len:
            padded_c = np.zeros(chunk_len)
            padded_x = np.zeros(chunk_len)
            padded_c[: len(c)] = c
            padded_x[: len(x)] = x
            clean_chunks.append(padded_c)
            noisy_chunks.append(padded_x)
            continue
        for start in range(0, len(c) - chunk_len + 1, hop):
            clean_chunks.append(c[start : start + chunk_len])
            noisy_chunks.append(x[start : start + chunk_len])
    return np.stack(clean_chunks), np.stack(noisy_chunks)


def segan_pretrain(pairs, cfg: SeganTrainConfig, log_fn=None):
    """Alternating D/G steps; returns (generator, discriminator, history).

    pairs: iterable of (clean Waveform/array, noisy Waveform/array), aligned.
    The first batch under the run seed becomes the frozen virtual-batch-norm
    reference.
    """
    pairs = list(pairs)
    if not pairs:
        raise ValueError("empty training set")
    rng = np.random.default_rng(cfg.seed)
    init_rng = np.random.default_rng([cfg.seed, 1])
    gen = Generator(cfg.arch, init_rng)
    disc = Discriminator(cfg.arch, init_rng)
    opt_g = RMSprop(gen.params(), lr=cfg.lr)
    opt_d = RMSprop(disc.params(), lr=cfg.lr)

    clean_all, noisy_all = chunk_pairs(pairs, cfg.arch.chunk_len, cfg.chunk_overlap_train, cfg.preemph)
    n_chunks = clean_all.shape[0]

    # reference batch: first cfg.ref_batch chunks of the first shuffled epoch
    first_order = rng.permutation(n_chunks)
    ref_idx = first_order[: min(cfg.ref_batch, n_chunks)]
    disc.register_reference(clean_all[ref_idx, :, None], noisy_all[ref_idx, :, None])

    history = []
    for epoch in range(cfg.epochs):
        order = first_order if epoch == 0 else rng.permutation(n_chunks)
        d_vals, adv_vals, l1_vals = [], [], []
        for start in range(0, n_chunks, cfg.batch):
            idx = order[start : start + cfg.batch]
            clean_b = clean_all[idx, :, None]
            noisy_b = noisy_all[idx, :, None]
            nb = Tensor(noisy_b)

            # one generator pass per batch: its detached copy feeds the D step,
            # the live graph then meets the freshly updated D in the G step
            z = rng.standard_normal(gen.z_shape(len(idx)))
            fake = gen.forward(Tensor(noisy_b), z)
            both_cand = concat([Tensor(clean_b), fake.detach()], axis=0)
            both_cond = concat([nb, nb], axis=0)
            scores = disc.forward(both_cand, both_cond)
            dl = d_loss(scores[: len(idx)], scores[len(idx) :])
            if not np.isfinite(dl.item()):
                raise TrainingDiverged(f"NaN discriminator loss at epoch {epoch}")
            opt_d.zero_grad()
            backward(dl)
            opt_d.step()

            # the L1 fidelity term compares de-emphasized (natural-domain)
            # signals: inverting the preemphasis filter inside the loss keeps
            # low-frequency reconstruction drift from hiding in the
            # preemphasized domain and exploding on output de-emphasis
            s_fake = disc.forward(fake, nb)
            fake_de = iir_first_order(fake.reshape(len(idx), cfg.arch.chunk_len), cfg.preemph)
            clean_de = iir_first_order(Tensor(clean_b[:, :, 0]), cfg.preemph)
            gl, adv, l1 = g_loss_parts(s_fake, fake_de, clean_de, cfg.lambda_l1)
            if not np.isfinite(gl.item()):
                raise TrainingDiverged(f"NaN generator loss at epoch {epoch}")
            opt_g.zero_grad()
            backward(gl)
            opt_g.step()

            d_vals.append(dl.item())
            adv_vals.append(adv.item())
            l1_vals.append(l1.item())
        row = {
            "epoch": epoch,
            "d_loss": float(np.mean(d_vals)),
            "g_loss_adv": float(np.mean(adv_vals)),
            "g_loss_l1": float(np.mean(l1_vals)),
        }
        history.append(row)
        if log_fn:
            log_fn(row)
    return gen, disc, history


def discriminator_accuracy(gen: Generator, disc: Discriminator, pairs, cfg: SeganTrainConfig, seed=0):
    """Fraction of correct real/fake calls at the 0.5 score threshold."""
    clean_all, noisy_all = chunk_pairs(pairs, cfg.arch.chunk_len, 0.0, cfg.preemph)
    rng = np.random.default_rng(seed)
    from ..diffcore import no_grad

    with no_grad():
        z = rng.standard_normal(gen.z_shape(clean_all.shape[0]))
        fake = gen.forward(noisy_all[:, :, None], z)
        s_real = disc.forward(clean_all[:, :, None], noisy_all[:, :, None]).data
        s_fake = disc.forward(fake, noisy_all[:, :, None]).data
    correct = int((s_real > 0.5).sum() + (s_fake <= 0.5).sum())
    return correct / (len(s_real) + len(s_fake))
