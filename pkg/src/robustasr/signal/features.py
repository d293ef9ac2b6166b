"""Differentiable FBank chain: STFT, mel weighting, log, global normalization.

The same graph code serves feature extraction for ASR training (evaluated
under no_grad) and the joint-training path where gradients must flow from
the recognition loss back into the enhancement front-end.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from ..diffcore import Tensor, concat, log, maximum_const, no_grad, take

from .waveform import Waveform


@dataclass(frozen=True)
class FbankConfig:
    sample_rate: int = 16000
    win_ms: float = 25.0
    hop_ms: float = 10.0
    n_fft: int = 512
    n_mels: int = 80
    fmin: float = 20.0
    fmax: float = 8000.0
    log_floor: float = 1e-10
    with_deltas: bool = False
    delta_window: int = 2

    @property
    def win(self):
        return int(round(self.win_ms * 1e-3 * self.sample_rate))

    @property
    def hop(self):
        return int(round(self.hop_ms * 1e-3 * self.sample_rate))

    @property
    def n_bins(self):
        return self.n_fft // 2 + 1

    @property
    def dim(self):
        return self.n_mels * (3 if self.with_deltas else 1)


def hann_periodic(n):
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


def _hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=float) / 700.0)


def _mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=float) / 2595.0) - 1.0)


@dataclass
class MelFilterbank:
    """Triangular mel filters evaluated at FFT bin centers; rows sum >= one bin."""

    matrix: np.ndarray  # (n_mels, n_bins)
    fmin: float
    fmax: float


def build_mel_filterbank(cfg: FbankConfig) -> MelFilterbank:
    bins_hz = np.arange(cfg.n_bins) * cfg.sample_rate / cfg.n_fft
    mels = np.linspace(_hz_to_mel(cfg.fmin), _hz_to_mel(cfg.fmax), cfg.n_mels + 2)
    edges = _mel_to_hz(mels)
    mat = np.zeros((cfg.n_mels, cfg.n_bins))
    for m in range(cfg.n_mels):
        lo, center, hi = edges[m], edges[m + 1], edges[m + 2]
        up = (bins_hz - lo) / max(center - lo, 1e-9)
        down = (hi - bins_hz) / max(hi - center, 1e-9)
        mat[m] = np.maximum(0.0, np.minimum(up, down))
        if mat[m].max() <= 0.0:
            # narrow filters can miss every bin center; anchor the nearest bin
            mat[m, int(np.argmin(np.abs(bins_hz - center)))] = 1.0
    return MelFilterbank(matrix=mat, fmin=cfg.fmin, fmax=cfg.fmax)


@lru_cache(maxsize=8)
def _dft_matrices(win, n_fft):
    n = np.arange(win)[:, None]
    k = np.arange(n_fft // 2 + 1)[None, :]
    ang = -2.0 * np.pi * n * k / n_fft
    return np.cos(ang), np.sin(ang)


def _frame_index(length, win, hop):
    if length < win:
        raise ValueError(f"signal of {length} samples is shorter than one {win}-sample window")
    n_frames = 1 + (length - win) // hop
    return np.arange(n_frames)[:, None] * hop + np.arange(win)[None, :]


def stft(x, cfg: FbankConfig = FbankConfig()):
    """Complex STFT frames (n_frames, n_bins) with a periodic Hann window."""
    arr = x.samples if isinstance(x, Waveform) else np.asarray(x, dtype=np.float64)
    idx = _frame_index(len(arr), cfg.win, cfg.hop)
    frames = arr[idx] * hann_periodic(cfg.win)
    return np.fft.rfft(frames, n=cfg.n_fft, axis=-1)


def stft_power_graph(x: Tensor, cfg: FbankConfig) -> Tensor:
    """|STFT|^2 as a differentiable graph: frame gather, window, DFT matmuls."""
    idx = _frame_index(x.shape[0], cfg.win, cfg.hop)
    frames = take(x, idx) * hann_periodic(cfg.win)[None, :]
    cos_m, sin_m = _dft_matrices(cfg.win, cfg.n_fft)
    re = frames @ Tensor(cos_m)
    im = frames @ Tensor(sin_m)
    return re * re + im * im


@dataclass
class NormStats:
    """Per-dimension mean/variance of the normalization population."""

    mean: np.ndarray
    var: np.ndarray

    def to_arrays(self):
        return {"mean": self.mean, "var": self.var}

    @classmethod
    def from_arrays(cls, arrays):
        return cls(mean=np.asarray(arrays["mean"]), var=np.asarray(arrays["var"]))


@dataclass
class FeatureMatrix:
    """frames x dim matrix of normalized log FBank features (+ deltas)."""

    values: np.ndarray
    norm_stats: NormStats | None = None

    @property
    def frames(self):
        return self.values.shape[0]

    @property
    def dim(self):
        return self.values.shape[1]


def delta_graph(f: Tensor, window=2) -> Tensor:
    """Regression-based delta along time with edge replication."""
    if window < 1:
        raise ValueError(f"delta window must be >= 1, got {window}")
    t = f.shape[0]
    first = f[0:1, :]
    last = f[t - 1 : t, :]
    padded = concat([first] * window + [f] + [last] * window, axis=0)
    denom = 2.0 * sum(n * n for n in range(1, window + 1))
    acc = None
    for n in range(1, window + 1):
        diff = padded[window + n : window + n + t, :] - padded[window - n : window - n + t, :]
        term = diff * (n / denom)
        acc = term if acc is None else acc + term
    return acc


def delta(features, window=2):
    arr = np.asarray(features, dtype=np.float64)
    with no_grad():
        return delta_graph(Tensor(arr), window).data


def log_mel_graph(x: Tensor, mel: MelFilterbank, cfg: FbankConfig) -> Tensor:
    power = stft_power_graph(x, cfg)
    energies = power @ Tensor(mel.matrix.T)
    return log(maximum_const(energies, cfg.log_floor))


def fbank_graph(x: Tensor, mel: MelFilterbank, norm_stats: NormStats, cfg: FbankConfig) -> Tensor:
    """Full differentiable chain: power spectrum -> mel -> log -> deltas -> norm."""
    feats = log_mel_graph(x, mel, cfg)
    if cfg.with_deltas:
        d1 = delta_graph(feats, cfg.delta_window)
        d2 = delta_graph(d1, cfg.delta_window)
        feats = concat([feats, d1, d2], axis=1)
    inv = 1.0 / np.sqrt(norm_stats.var + 1e-12)
    return (feats - Tensor(norm_stats.mean[None, :])) * Tensor(inv[None, :])


def raw_fbank(x, mel=None, cfg: FbankConfig = FbankConfig()):
    """Unnormalized log-mel (+ deltas) as a numpy array; feeds stats estimation."""
    if mel is None:
        mel = build_mel_filterbank(cfg)
    arr = x.samples if isinstance(x, Waveform) else np.asarray(x, dtype=np.float64)
    with no_grad():
        feats = log_mel_graph(Tensor(arr), mel, cfg)
        if cfg.with_deltas:
            d1 = delta_graph(feats, cfg.delta_window)
            d2 = delta_graph(d1, cfg.delta_window)
            feats = concat([feats, d1, d2], axis=1)
    return feats.data


def compute_norm_stats(feature_arrays) -> NormStats:
    """Global per-dim mean/variance over a population of (frames, dim) arrays."""
    total = None
    total_sq = None
    count = 0
    for arr in feature_arrays:
        arr = np.asarray(arr, dtype=np.float64)
        s = arr.sum(axis=0)
        sq = (arr * arr).sum(axis=0)
        total = s if total is None else total + s
        total_sq = sq if total_sq is None else total_sq + sq
        count += arr.shape[0]
    if count == 0:
        raise ValueError("cannot compute normalization statistics from an empty population")
    mean = total / count
    var = total_sq / count - mean * mean
    return NormStats(mean=mean, var=np.maximum(var, 0.0))


def fbank(x, mel=None, with_deltas=None, norm_stats=None, cfg: FbankConfig = FbankConfig()) -> FeatureMatrix:
    """Normalized log FBank features of a waveform.

    norm_stats=None normalizes against this utterance alone; training code
    passes frozen global statistics instead.
    """
    if with_deltas is not None and with_deltas != cfg.with_deltas:
        cfg = replace(cfg, with_deltas=with_deltas)
    if mel is None:
        mel = build_mel_filterbank(cfg)
    raw = raw_fbank(x, mel, cfg)
    if norm_stats is None:
        norm_stats = compute_norm_stats([raw])
    inv = 1.0 / np.sqrt(norm_stats.var + 1e-12)
    return FeatureMatrix(values=(raw - norm_stats.mean) * inv, norm_stats=norm_stats)
