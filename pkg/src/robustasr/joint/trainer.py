"""Adversarial joint training: generator -> FBank -> ASR with the
discriminator as global guide.

Per step, the composed objective L = l_asr + kappa*l_enh + gamma*l_gan
updates the generator and ASR through one backward pass over the shared
graph; the discriminator is then updated on its own least-squares
objective over the same forward values (a config flag can freeze it).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..asr.model import AsrModel
from ..diffcore import Adam, RMSprop, Tensor, TrainingDiverged, backward, concat, iir_first_order
from ..segan import Discriminator, Generator, d_loss, enhance_chunks_graph, g_loss_parts, preemphasized_chunks
from ..signal import FbankConfig, NormStats, fbank_graph, build_mel_filterbank


@dataclass
class OptimizerSpec:
    kind: str = "rmsprop"
    lr: float = 2e-4

    def build(self, params):
        if self.kind == "rmsprop":
            return RMSprop(params, lr=self.lr)
        if self.kind == "adam":
            return Adam(params, lr=self.lr, beta1=0.9, beta2=0.98, eps=1e-9)
        raise ValueError(f"unknown optimizer kind {self.kind!r}")


@dataclass
class JointConfig:
    kappa: float = 6.0
    gamma: float = 3.0
    lambda_l1: float = 100.0
    preemph: float = 0.95
    epochs: int = 2
    batch_utts: int = 4
    seed: int = 0
    freeze_generator: bool = False
    freeze_discriminator: bool = False
    freeze_asr: bool = False
    gen_opt: OptimizerSpec = field(default_factory=lambda: OptimizerSpec("rmsprop", 1e-4))
    disc_opt: OptimizerSpec = field(default_factory=lambda: OptimizerSpec("rmsprop", 1e-4))
    asr_opt: OptimizerSpec = field(default_factory=lambda: OptimizerSpec("adam", 1e-4))

    def __post_init__(self):
        if self.kappa < 0 or self.gamma < 0:
            raise ValueError("kappa and gamma must be non-negative")


def joint_loss(l_asr, l_enh, l_gan, cfg: JointConfig):
    """l_asr + kappa*l_enh + gamma*l_gan; NaN components abort by name."""
    for name, val in (("l_asr", l_asr), ("l_enh", l_enh), ("l_gan", l_gan)):
        v = val.item() if isinstance(val, Tensor) else float(val)
        if not np.isfinite(v):
            raise TrainingDiverged(f"joint loss component {name} is not finite ({v})")
    return l_asr + l_enh * cfg.kappa + l_gan * cfg.gamma


class JointTrainer:
    """Owns the three nets, frozen feature statistics, and their optimizers."""

    def __init__(self, gen: Generator, disc: Discriminator, asr: AsrModel,
                 norm_stats: NormStats, fbank_cfg: FbankConfig, cfg: JointConfig):
        self.gen = gen
        self.disc = disc
        self.asr = asr
        self.norm_stats = norm_stats
        self.fbank_cfg = fbank_cfg
        self.mel = build_mel_filterbank(fbank_cfg)
        self.cfg = cfg
        self.rng = np.random.default_rng(cfg.seed)
        self.opt_gen = cfg.gen_opt.build(gen.params())
        self.opt_disc = cfg.disc_opt.build(disc.params())
        self.opt_asr = cfg.asr_opt.build(asr.params())
        self.step_count = 0

    def utterance_losses(self, clean, noisy, tokens):
        """Build the composed graph for one utterance; returns loss tensors."""
        cfg = self.cfg
        fake, pe_noisy, n = enhance_chunks_graph(noisy, self.gen, self.rng, cfg.preemph)
        n_chunks, chunk = fake.shape[0], fake.shape[1]

        # discriminator scores for (clean, cond) and (fake, cond) in one pass
        pe_clean = preemphasized_chunks(clean, chunk, cfg.preemph)
        cond = Tensor(pe_noisy)
        scores = self.disc.forward(concat([Tensor(pe_clean), fake], axis=0), concat([cond, cond], axis=0))
        s_real = scores[:n_chunks]
        s_fake = scores[n_chunks:]

        # enhancement loss: adversarial score plus natural-domain L1
        fake_de = iir_first_order(fake.reshape(n_chunks, chunk), cfg.preemph)
        clean_de = iir_first_order(Tensor(pe_clean[:, :, 0]), cfg.preemph)
        l_enh, l_enh_adv, l_enh_l1 = g_loss_parts(s_fake, fake_de, clean_de, cfg.lambda_l1)

        l_gan = d_loss(s_real, s_fake)

        # recognition loss over the enhanced waveform's features
        enhanced = iir_first_order(fake.reshape(n_chunks * chunk)[:n], cfg.preemph)
        feats = fbank_graph(enhanced, self.mel, self.norm_stats, self.fbank_cfg)
        l_asr, parts = self.asr.utterance_loss(feats, tokens, train=True, rng=self.rng)
        return l_asr, l_enh, l_gan, {"ce": parts["ce"], "ctc": parts["ctc"],
                                     "l_enh_adv": l_enh_adv.item(), "l_enh_l1": l_enh_l1.item()}

    def joint_step(self, batch):
        """One optimizer step over a batch of (clean, noisy, token_ids).

        Returns the mean loss components.  G/ASR update on the full
        objective; D updates on its own objective unless gamma == 0 or the
        freeze flag is set.
        """
        cfg = self.cfg
        n = len(batch)
        if n == 0:
            raise ValueError("joint_step needs a non-empty batch")
        built = []
        sums = {"l_asr": 0.0, "l_enh": 0.0, "l_gan": 0.0, "total": 0.0}
        for clean, noisy, tokens in batch:
            l_asr, l_enh, l_gan, _ = self.utterance_losses(clean, noisy, tokens)
            total = joint_loss(l_asr, l_enh, l_gan, cfg)
            built.append((total, l_gan))
            sums["l_asr"] += l_asr.item()
            sums["l_enh"] += l_enh.item()
            sums["l_gan"] += l_gan.item()
            sums["total"] += total.item()

        self.opt_gen.zero_grad()
        self.opt_asr.zero_grad()
        for total, _ in built:
            backward(total * (1.0 / n))
        if not cfg.freeze_generator:
            self.opt_gen.step()
        if not cfg.freeze_asr:
            self.opt_asr.step()

        if cfg.gamma > 0.0 and not cfg.freeze_discriminator:
            self.opt_disc.zero_grad()
            for _, l_gan in built:
                backward(l_gan * (1.0 / n))
            self.opt_disc.step()

        self.step_count += 1
        return {k: v / n for k, v in sums.items()}

    def train(self, triples, log_fn=None):
        """triples: list of (clean, noisy, token_ids); runs cfg.epochs."""
        if not triples:
            raise ValueError("empty joint-training set")
        history = []
        for epoch in range(self.cfg.epochs):
            order = self.rng.permutation(len(triples))
            rows = []
            for start in range(0, len(order), self.cfg.batch_utts):
                batch = [triples[i] for i in order[start : start + self.cfg.batch_utts]]
                rows.append(self.joint_step(batch))
            mean = {k: float(np.mean([r[k] for r in rows])) for k in rows[0]}
            mean["epoch"] = epoch
            history.append(mean)
            if log_fn:
                log_fn(mean)
        return history
