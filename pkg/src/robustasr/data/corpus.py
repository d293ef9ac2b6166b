"""Synthetic toy corpus: 12 word-symbols rendered as tone/chirp patterns.

Each vocabulary symbol maps to a fixed 100 ms pattern at 16 kHz; utterances
are 3 to 8 words separated by short silences.  The corpus is a stand-in for
a real speech corpus that keeps every downstream contract testable on a
desktop machine.
"""

from __future__ import annotations

import numpy as np

from ..signal import Waveform
from .manifest import DatasetManifest, UtteranceRecord

CORPUS_VERSION = 1

WORD_SYMBOLS = "abcdefghijkl"
PATTERN_MS = 100.0
_SR = 16000

# eight steady tones (log-spaced) plus four chirps; distinct enough that a
# matched filter recovers the transcript from clean audio
_TONE_FREQS = [340.0, 470.0, 650.0, 900.0, 1240.0, 1720.0, 2380.0, 3290.0]
_CHIRPS = [(400.0, 1200.0), (1200.0, 400.0), (800.0, 2600.0), (2600.0, 800.0)]


def symbol_pattern(symbol, sr=_SR, amp=0.35):
    """The fixed waveform pattern of one vocabulary symbol."""
    k = WORD_SYMBOLS.index(symbol)
    n = int(round(PATTERN_MS * 1e-3 * sr))
    t = np.arange(n) / sr
    if k < len(_TONE_FREQS):
        x = np.sin(2 * np.pi * _TONE_FREQS[k] * t)
    else:
        f0, f1 = _CHIRPS[k - len(_TONE_FREQS)]
        # linear chirp: phase integral of the swept frequency
        phase = 2 * np.pi * (f0 * t + 0.5 * (f1 - f0) * t * t / (n / sr))
        x = np.sin(phase)
    fade = int(0.005 * sr)
    env = np.ones(n)
    ramp = 0.5 - 0.5 * np.cos(np.pi * np.arange(fade) / fade)
    env[:fade] = ramp
    env[-fade:] = ramp[::-1]
    return amp * x * env


def render_transcript(transcript, rng, sr=_SR, gap_ms=(20.0, 50.0)):
    """Concatenate symbol patterns with rng-drawn silences between words."""
    pieces = []
    for i, ch in enumerate(transcript):
        if i > 0:
            gap = rng.uniform(gap_ms[0], gap_ms[1])
            pieces.append(np.zeros(int(round(gap * 1e-3 * sr))))
        pieces.append(symbol_pattern(ch, sr))
    return np.concatenate(pieces)


def synth_toy_corpus(n_utts, seed, vocab=WORD_SYMBOLS, split="train", words=(3, 8), id_prefix=None):
    """Deterministic utterance set: returns (manifest, {utt_id: Waveform}).

    Audio references in the manifest are filled in by the caller once the
    waveforms are written; records start with inline condition 'clean'.
    """
    if n_utts < 1:
        raise ValueError(f"n_utts must be >= 1, got {n_utts}")
    prefix = id_prefix if id_prefix is not None else split
    records = []
    audio = {}
    for i in range(n_utts):
        rng = np.random.default_rng([seed, hash_split(split), i])
        n_words = int(rng.integers(words[0], words[1] + 1))
        transcript = "".join(vocab[int(rng.integers(0, len(vocab)))] for _ in range(n_words))
        utt_id = f"{prefix}{i:04d}"
        audio[utt_id] = Waveform(render_transcript(transcript, rng), _SR, id=utt_id)
        records.append(
            UtteranceRecord(id=utt_id, audio=None, transcript=transcript, split=split, condition="clean")
        )
    manifest = DatasetManifest(
        records=records,
        vocab="".join(vocab),
        provenance={"generator_version": CORPUS_VERSION, "seed": int(seed), "split": split},
    )
    return manifest, audio


def hash_split(split):
    # stable small integer per split name for seed derivation
    return sum((i + 1) * ord(c) for i, c in enumerate(split)) % 100003


def detect_transcript(wav: Waveform, vocab=WORD_SYMBOLS, threshold=0.5):
    """Matched-filter oracle: recover the symbol sequence from clean audio."""
    templates = {ch: symbol_pattern(ch, wav.sample_rate) for ch in vocab}
    n = len(wav.samples)
    hits = []
    for ch, tpl in templates.items():
        tn = len(tpl)
        if tn > n:
            continue
        corr = np.correlate(wav.samples, tpl, mode="valid") / (tpl @ tpl)
        pos = 0
        while pos < len(corr):
            window = corr[pos : pos + tn]
            peak = int(np.argmax(window))
            if window[peak] > threshold:
                hits.append((pos + peak, ch))
                pos += peak + tn
            else:
                pos += tn
    hits.sort()
    return "".join(ch for _, ch in hits)
