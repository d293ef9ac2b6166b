"""Pipeline evaluation: per-condition CER (and SSNR when the front-end runs)."""

from __future__ import annotations

import numpy as np

from ..asr.model import AsrModel
from ..asr.vocab import cer
from ..segan import Generator, enhance_waveform
from ..signal import FbankConfig, NormStats, build_mel_filterbank, fbank, ssnr


class MissingAudioError(FileNotFoundError):
    """Evaluation refuses to silently skip unreadable audio."""


def evaluate_pipeline(asr: AsrModel, norm_stats: NormStats, fbank_cfg: FbankConfig,
                      manifests: dict, gen: Generator = None, use_front_end=False,
                      beam=1, alpha=1.0, enhance_seed=0, clean_refs=None):
    """CER table over condition -> manifest.

    Returns {"conditions": {cond: {"cer": float, "ssnr_db": float|None}},
    "rows": [...]}.  clean_refs, when given, maps utterance id to the clean
    Waveform so enhanced/noisy SSNR can be reported per condition.
    """
    if not manifests:
        raise ValueError("no evaluation manifests given")
    if use_front_end and gen is None:
        raise ValueError("front-end evaluation requested without a generator")
    mel = build_mel_filterbank(fbank_cfg)
    table = {}
    rows = []
    for cond, manifest in manifests.items():
        if not manifest.records:
            raise ValueError(f"manifest for condition {cond!r} is empty")
        missing = manifest.missing_audio()
        if missing:
            raise MissingAudioError(f"condition {cond!r}: missing audio files: {missing}")
        cers = []
        ssnrs = []
        for rec in manifest.records:
            wav = manifest.load_audio(rec)
            if use_front_end:
                wav = enhance_waveform(wav, gen, seed=enhance_seed)
            feats = fbank(wav, mel=mel, norm_stats=norm_stats, cfg=fbank_cfg)
            hyp = asr.transcribe(feats.values, beam=beam, alpha=alpha)
            utt_cer = cer(hyp, rec.transcript)
            cers.append(utt_cer)
            row = {"condition": cond, "id": rec.id, "hyp": hyp, "ref": rec.transcript, "cer": utt_cer}
            if clean_refs is not None and rec.id in clean_refs:
                row["ssnr_db"] = ssnr(clean_refs[rec.id], wav)
                ssnrs.append(row["ssnr_db"])
            rows.append(row)
        table[cond] = {
            "cer": float(np.mean(cers)),
            "ssnr_db": float(np.mean(ssnrs)) if ssnrs else None,
        }
    return {"conditions": table, "rows": rows}
