"""Waveform utilities and the differentiable FBank feature chain."""

from .features import (
    FbankConfig,
    FeatureMatrix,
    MelFilterbank,
    NormStats,
    build_mel_filterbank,
    compute_norm_stats,
    delta,
    delta_graph,
    fbank,
    fbank_graph,
    log_mel_graph,
    raw_fbank,
    stft,
    stft_power_graph,
)
from .waveform import (
    DegenerateSignalError,
    MixInfo,
    Waveform,
    deemphasis,
    load_wav,
    mix_at_snr,
    preemphasis,
    save_wav,
    ssnr,
)

__all__ = [
    "FbankConfig",
    "FeatureMatrix",
    "MelFilterbank",
    "NormStats",
    "build_mel_filterbank",
    "compute_norm_stats",
    "delta",
    "delta_graph",
    "fbank",
    "fbank_graph",
    "log_mel_graph",
    "raw_fbank",
    "stft",
    "stft_power_graph",
    "DegenerateSignalError",
    "MixInfo",
    "Waveform",
    "deemphasis",
    "load_wav",
    "mix_at_snr",
    "preemphasis",
    "save_wav",
    "ssnr",
]
