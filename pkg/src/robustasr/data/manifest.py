"""Dataset manifests: line-delimited JSON records plus a header line.

The manifest round-trips losslessly and keeps noise/SNR assignments next to
each utterance so every corpus derivation is reproducible from its file.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..signal import Waveform, load_wav, mix_at_snr, save_wav
from .noise import NoiseSpec, synth_noise

MANIFEST_VERSION = 1


@dataclass
class UtteranceRecord:
    id: str
    audio: str | None
    transcript: str
    split: str
    condition: str = "clean"
    snr_db: float | None = None
    noise: str | None = None
    clipped: int | None = None

    def to_json(self):
        d = {k: v for k, v in asdict(self).items() if v is not None}
        return json.dumps(d, sort_keys=True)

    @classmethod
    def from_json(cls, line):
        return cls(**json.loads(line))


@dataclass
class DatasetManifest:
    records: list[UtteranceRecord]
    vocab: str = ""
    provenance: dict = field(default_factory=dict)
    base_dir: Path | None = None

    def __post_init__(self):
        ids = [r.id for r in self.records]
        if len(set(ids)) != len(ids):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise ValueError(f"duplicate utterance ids in manifest: {dupes}")
        for r in self.records:
            if r.condition == "clean" and r.snr_db is not None:
                raise ValueError(f"record {r.id}: clean condition must not carry snr_db")

    def save(self, path):
        path = Path(path)
        header = {
            "kind": "manifest-header",
            "version": MANIFEST_VERSION,
            "vocab": self.vocab,
            "provenance": self.provenance,
        }
        lines = [json.dumps(header, sort_keys=True)]
        lines.extend(r.to_json() for r in self.records)
        _atomic_write_text(path, "\n".join(lines) + "\n")
        self.base_dir = path.parent

    @classmethod
    def load(cls, path):
        path = Path(path)
        with open(path, "r", encoding="utf-8") as f:
            lines = [ln for ln in f.read().splitlines() if ln.strip()]
        if not lines:
            raise ValueError(f"{path}: empty manifest")
        header = json.loads(lines[0])
        if header.get("kind") != "manifest-header":
            raise ValueError(f"{path}: missing manifest header line")
        if header.get("version") != MANIFEST_VERSION:
            raise ValueError(
                f"{path}: manifest version {header.get('version')} unsupported (expected {MANIFEST_VERSION})"
            )
        records = [UtteranceRecord.from_json(ln) for ln in lines[1:]]
        return cls(records=records, vocab=header.get("vocab", ""), provenance=header.get("provenance", {}), base_dir=path.parent)

    def audio_path(self, record: UtteranceRecord) -> Path:
        if record.audio is None:
            raise ValueError(f"record {record.id} has no audio reference")
        base = self.base_dir or Path(".")
        return base / record.audio

    def load_audio(self, record: UtteranceRecord) -> Waveform:
        wav = load_wav(self.audio_path(record))
        wav.id = record.id
        return wav

    def missing_audio(self):
        return [str(self.audio_path(r)) for r in self.records if not self.audio_path(r).exists()]

    def subset(self, split=None, condition=None):
        recs = [
            r
            for r in self.records
            if (split is None or r.split == split) and (condition is None or r.condition == condition)
        ]
        return DatasetManifest(records=recs, vocab=self.vocab, provenance=dict(self.provenance), base_dir=self.base_dir)


def _atomic_write_text(path: Path, text):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_corpus_audio(manifest: DatasetManifest, audio: dict, out_dir, subdir="audio/clean"):
    """Persist waveforms as WAV and point manifest records at them."""
    out_dir = Path(out_dir)
    (out_dir / subdir).mkdir(parents=True, exist_ok=True)
    for rec in manifest.records:
        rel = f"{subdir}/{rec.id}.wav"
        save_wav(out_dir / rel, audio[rec.id])
        rec.audio = rel
    manifest.base_dir = out_dir
    return manifest


def corrupt_split(
    manifest: DatasetManifest,
    noise_bank: list[NoiseSpec],
    condition,
    snr_range=(0.0, 20.0),
    seed=0,
    out_dir=None,
    margin=16000,
):
    """Mix every record with a bank-drawn noise at a random SNR in range.

    Writes mixed audio under out_dir/audio/<condition> and returns a new
    manifest with the (noise, snr) assignment recorded per utterance.
    """
    if condition not in ("match", "unmatch"):
        raise ValueError(f"condition must be 'match' or 'unmatch', got {condition!r}")
    if not noise_bank:
        raise ValueError("noise bank is empty")
    out_dir = Path(out_dir) if out_dir is not None else manifest.base_dir
    if out_dir is None:
        raise ValueError("corrupt_split needs an output directory")
    subdir = f"audio/{condition}"
    (out_dir / subdir).mkdir(parents=True, exist_ok=True)

    new_records = []
    for i, rec in enumerate(manifest.records):
        rng = np.random.default_rng([seed, i])
        spec = noise_bank[int(rng.integers(0, len(noise_bank)))]
        snr_db = float(rng.uniform(snr_range[0], snr_range[1]))
        clean = manifest.load_audio(rec)
        noise = synth_noise(spec, len(clean) + margin, clean.sample_rate)
        mixed, info = mix_at_snr(clean, noise, snr_db, seed=int(rng.integers(0, 2 ** 31)), return_info=True)
        rel = f"{subdir}/{rec.id}.wav"
        save_wav(out_dir / rel, mixed)
        new_records.append(
            UtteranceRecord(
                id=rec.id,
                audio=rel,
                transcript=rec.transcript,
                split=rec.split,
                condition=condition,
                snr_db=round(snr_db, 4),
                noise=spec.name,
                clipped=info.clipped,
            )
        )
    prov = dict(manifest.provenance)
    prov.update({"corruption_seed": int(seed), "condition": condition, "snr_range": list(snr_range)})
    return DatasetManifest(records=new_records, vocab=manifest.vocab, provenance=prov, base_dir=out_dir)
