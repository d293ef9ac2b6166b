"""ASR training loop over precomputed features, one optimizer step per group."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..diffcore import Adam, LrSchedule, TrainingDiverged, backward
from ..signal import FbankConfig, build_mel_filterbank, compute_norm_stats, raw_fbank
from .model import AsrModel
from .vocab import cer


@dataclass
class AsrTrainConfig:
    epochs: int = 60
    batch_utts: int = 8
    k_prime: float = 0.4
    warmup_n: int = 400
    seed: int = 0


def prepare_features(manifest, fbank_cfg: FbankConfig, vocab, norm_stats=None):
    """Load audio, extract unnormalized log-mel, fit stats if absent, normalize.

    Returns (items, norm_stats) where items are (utt_id, feats, token_ids).
    """
    mel = build_mel_filterbank(fbank_cfg)
    raws = []
    for rec in manifest.records:
        wav = manifest.load_audio(rec)
        raws.append((rec.id, raw_fbank(wav, mel, fbank_cfg), rec.transcript))
    if norm_stats is None:
        norm_stats = compute_norm_stats([r for _, r, _ in raws])
    inv = 1.0 / np.sqrt(norm_stats.var + 1e-12)
    items = [(utt_id, (r - norm_stats.mean) * inv, vocab.encode(tr)) for utt_id, r, tr in raws]
    return items, norm_stats


def train_asr(model: AsrModel, items, cfg: AsrTrainConfig, log_fn=None):
    """items: list of (utt_id, feats, token_ids).  Returns per-epoch history."""
    if not items:
        raise ValueError("empty training set")
    params = model.params()
    schedule = LrSchedule(cfg.k_prime, model.cfg.d_model, cfg.warmup_n)
    opt = Adam(params, schedule=schedule, beta1=0.9, beta2=0.98, eps=1e-9)
    rng = np.random.default_rng(cfg.seed)
    history = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(items))
        epoch_loss = 0.0
        epoch_tokens = 0
        for start in range(0, len(order), cfg.batch_utts):
            group = [items[i] for i in order[start : start + cfg.batch_utts]]
            n_tok = sum(len(tok) + 1 for _, _, tok in group)
            opt.zero_grad()
            for _, feats, tokens in group:
                loss, parts = model.utterance_loss(feats, tokens, train=True, rng=rng)
                if not np.isfinite(loss.item()):
                    raise TrainingDiverged(f"NaN/inf ASR loss at epoch {epoch}, step {opt.n}")
                backward(loss * (1.0 / n_tok))
                epoch_loss += loss.item()
                epoch_tokens += parts["n_tokens"]
            opt.step()
        row = {"epoch": epoch, "loss_per_token": epoch_loss / max(1, epoch_tokens), "lr": schedule(max(1, opt.n))}
        history.append(row)
        if log_fn:
            log_fn(row)
    return history


def dataset_cer(model: AsrModel, items, beam=1, alpha=1.0):
    """Mean CER plus per-utterance rows over (utt_id, feats, token_ids) items."""
    rows = []
    for utt_id, feats, tokens in items:
        hyp = model.transcribe(feats, beam=beam, alpha=alpha)
        ref = model.vocab.decode(tokens)
        rows.append({"id": utt_id, "hyp": hyp, "ref": ref, "cer": cer(hyp, ref)})
    mean = float(np.mean([r["cer"] for r in rows])) if rows else 0.0
    return mean, rows
