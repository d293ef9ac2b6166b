"""The end-to-end ASR model: encoder (transformer or conformer), attention
decoder, and CTC head, with checkpoint (de)serialization."""

from __future__ import annotations

from dataclasses import asdict

import numpy as np

from ..data import CheckpointPayload, check_architecture
from ..diffcore import Tensor, dense, fan_in_uniform, log_softmax_lastdim, no_grad, zeros_param
from .conformer import ConformerConfig, ConformerEncoder, toy_conformer_config
from .decode import beam_decode, greedy_decode
from .losses import ce_loss, ctc_loss, joint_asr_loss
from .transformer import (
    TransformerConfig,
    TransformerDecoder,
    TransformerEncoder,
    toy_transformer_config,
)
from .vocab import TokenVocab


class AsrModel:
    """kind 'transformer' or 'conformer'; decoding is always a transformer."""

    def __init__(self, kind, cfg, vocab: TokenVocab, feat_dim, rng):
        if kind not in ("transformer", "conformer"):
            raise ValueError(f"unknown ASR model kind {kind!r}")
        self.kind = kind
        self.cfg = cfg
        self.vocab = vocab
        self.feat_dim = feat_dim
        if kind == "transformer":
            self.encoder = TransformerEncoder(cfg, feat_dim, rng)
            dec_cfg = cfg
        else:
            self.encoder = ConformerEncoder(cfg, feat_dim, rng)
            dec_cfg = TransformerConfig(
                d_model=cfg.d_model, h=cfg.h, n_enc=0, n_dec=cfg.n_dec, d_ff=cfg.d_ff,
                dropout=cfg.dropout, ctc_weight=cfg.ctc_weight,
            )
        self.decoder = TransformerDecoder(dec_cfg, vocab.size, rng)
        self.ctc_w = fan_in_uniform(rng, (cfg.d_model, vocab.size), cfg.d_model)
        self.ctc_b = zeros_param((vocab.size,))

    # -- parameters / persistence ------------------------------------------

    def params(self):
        out = self.encoder.params("enc.")
        out.update(self.decoder.params("dec."))
        out["ctc.w"] = self.ctc_w
        out["ctc.b"] = self.ctc_b
        return out

    def architecture(self):
        return {"model": self.kind, "feat_dim": self.feat_dim, "vocab": self.vocab.symbols, "cfg": asdict(self.cfg)}

    def to_payload(self, meta=None):
        tensors = {name: p.data for name, p in self.params().items()}
        return CheckpointPayload(architecture=self.architecture(), tensors=tensors, meta=meta or {})

    def load_payload(self, payload: CheckpointPayload):
        check_architecture(self.architecture(), payload.architecture, context="asr model")
        params = self.params()
        missing = sorted(set(params) - set(payload.tensors))
        if missing:
            raise ValueError(f"checkpoint is missing tensors: {missing}")
        for name, p in params.items():
            arr = payload.tensors[name]
            if arr.shape != p.data.shape:
                raise ValueError(f"tensor {name!r} shape {arr.shape} mismatches model {p.data.shape}")
            p.data = np.array(arr, dtype=np.float64)

    @classmethod
    def from_payload(cls, payload: CheckpointPayload, rng=None):
        arch = payload.architecture
        cfg_cls = TransformerConfig if arch["model"] == "transformer" else ConformerConfig
        cfg = cfg_cls(**arch["cfg"])
        model = cls(arch["model"], cfg, TokenVocab(arch["vocab"]), arch["feat_dim"],
                    rng or np.random.default_rng(0))
        model.load_payload(payload)
        return model

    # -- forward paths ---------------------------------------------------------

    def encode(self, feats, train=False, rng=None):
        return self.encoder.forward(feats, train=train, rng=rng)

    def decoder_logits(self, memory, token_ids, train=False, rng=None):
        return self.decoder.forward(memory, token_ids, train=train, rng=rng)

    def ctc_log_probs(self, memory):
        return log_softmax_lastdim(dense(memory, self.ctc_w, self.ctc_b))

    def utterance_loss(self, feats, token_ids, train=True, rng=None):
        """Joint CTC-attention loss for one utterance; returns (loss, parts)."""
        token_ids = list(token_ids)
        memory = self.encode(feats, train=train, rng=rng)
        dec_in = [self.vocab.sos_id] + token_ids
        dec_target = np.array(token_ids + [self.vocab.eos_id])
        logits = self.decoder_logits(memory, dec_in, train=train, rng=rng)
        ce = ce_loss(logits, dec_target, pad_id=self.vocab.pad_id)
        ctc = ctc_loss(self.ctc_log_probs(memory), token_ids, blank=self.vocab.blank_id)
        total = joint_asr_loss(ce, ctc, self.cfg.ctc_weight)
        return total, {"ce": ce.item(), "ctc": ctc.item(), "n_tokens": len(dec_target)}

    # -- decoding -----------------------------------------------------------------

    def step_fn(self, memory):
        def fn(prefix):
            with no_grad():
                logits = self.decoder_logits(memory, prefix, train=False)
            return log_softmax_lastdim(logits[logits.shape[0] - 1, :]).data

        return fn

    def transcribe(self, feats, beam=1, alpha=1.0, max_len=None):
        """Decode one utterance to a symbol string."""
        with no_grad():
            memory = self.encode(feats, train=False)
        if max_len is None:
            max_len = max(8, 2 * memory.shape[0])
        if beam <= 1:
            ids = greedy_decode(self.step_fn(memory), self.vocab.sos_id, self.vocab.eos_id, max_len)
        else:
            ids = beam_decode(self.step_fn(memory), self.vocab.sos_id, self.vocab.eos_id, beam, alpha, max_len)
        return self.vocab.decode(ids)


def build_asr_model(kind, preset, vocab: TokenVocab, feat_dim, rng, **overrides):
    """kind: transformer|conformer, preset: toy|paper."""
    if kind == "transformer":
        cfg = toy_transformer_config(**overrides) if preset == "toy" else TransformerConfig(**overrides)
    elif kind == "conformer":
        cfg = toy_conformer_config(**overrides) if preset == "toy" else ConformerConfig(**overrides)
    else:
        raise ValueError(f"unknown ASR model kind {kind!r}")
    return AsrModel(kind, cfg, vocab, feat_dim, rng)
