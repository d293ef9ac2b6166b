"""Multi-condition training set construction: corrupt 90% of utterances."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ..data import DatasetManifest, NoiseSpec, UtteranceRecord, synth_noise
from ..signal import mix_at_snr, save_wav


def build_mct_dataset(manifest: DatasetManifest, noise_bank, seed, out_dir=None,
                      corrupt_frac=0.9, snr_range=(0.0, 20.0), margin=16000):
    """Corrupt a deterministic corrupt_frac share of the manifest.

    Corrupted records get a bank-drawn noise at a uniform SNR from
    snr_range and point at newly written audio; the remainder stays clean.
    """
    if not noise_bank:
        raise ValueError("noise bank is empty")
    if not manifest.records:
        raise ValueError("manifest is empty")
    out_dir = Path(out_dir) if out_dir is not None else manifest.base_dir
    if out_dir is None:
        raise ValueError("build_mct_dataset needs an output directory")
    subdir = "audio/mct"
    (out_dir / subdir).mkdir(parents=True, exist_ok=True)

    n = len(manifest.records)
    n_corrupt = int(n * corrupt_frac + 0.5)
    rng = np.random.default_rng(seed)
    corrupt_idx = set(rng.permutation(n)[:n_corrupt].tolist())

    records = []
    for i, rec in enumerate(manifest.records):
        if i not in corrupt_idx:
            records.append(
                UtteranceRecord(id=rec.id, audio=rec.audio, transcript=rec.transcript,
                                split=rec.split, condition="clean")
            )
            continue
        sub_rng = np.random.default_rng([seed, i])
        spec: NoiseSpec = noise_bank[int(sub_rng.integers(0, len(noise_bank)))]
        snr_db = float(sub_rng.uniform(snr_range[0], snr_range[1]))
        clean = manifest.load_audio(rec)
        noise = synth_noise(spec, len(clean) + margin, clean.sample_rate)
        mixed, info = mix_at_snr(clean, noise, snr_db, seed=int(sub_rng.integers(0, 2 ** 31)), return_info=True)
        rel = f"{subdir}/{rec.id}.wav"
        save_wav(out_dir / rel, mixed)
        records.append(
            UtteranceRecord(id=rec.id, audio=rel, transcript=rec.transcript, split=rec.split,
                            condition="match", snr_db=round(snr_db, 4), noise=spec.name, clipped=info.clipped)
        )
    prov = dict(manifest.provenance)
    prov.update({"mct_seed": int(seed), "corrupt_frac": corrupt_frac, "snr_range": list(snr_range)})
    return DatasetManifest(records=records, vocab=manifest.vocab, provenance=prov, base_dir=out_dir)
