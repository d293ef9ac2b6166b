"""Waveform-domain utilities: WAV io, SNR mixing, preemphasis, segmental SNR."""

from __future__ import annotations

import wave
from dataclasses import dataclass

import numpy as np

from ..diffcore import iir_scan


class DegenerateSignalError(ValueError):
    """A signal with no usable power where power is required."""


@dataclass
class Waveform:
    """Mono sample sequence with its rate; samples live in [-1, 1] once mixed."""

    samples: np.ndarray
    sample_rate: int = 16000
    id: str | None = None

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise ValueError(f"waveform must be 1-d, got shape {self.samples.shape}")
        if not np.isfinite(self.samples).all():
            raise ValueError("waveform contains non-finite samples")
        if self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")

    def __len__(self):
        return len(self.samples)

    def power(self):
        return float(np.mean(self.samples ** 2)) if len(self.samples) else 0.0


def load_wav(path):
    """Read 16-bit PCM mono WAV at 16 kHz; anything else is rejected."""
    with wave.open(str(path), "rb") as f:
        if f.getnchannels() != 1:
            raise ValueError(f"{path}: expected mono audio, got {f.getnchannels()} channels")
        if f.getsampwidth() != 2:
            raise ValueError(f"{path}: expected 16-bit PCM, got {8 * f.getsampwidth()}-bit")
        if f.getframerate() != 16000:
            raise ValueError(
                f"{path}: expected 16 kHz audio, got {f.getframerate()} Hz (resampling is out of scope)"
            )
        raw = f.readframes(f.getnframes())
    samples = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    return Waveform(samples, 16000)


def save_wav(path, wav: Waveform):
    """Write 16-bit PCM mono; samples are hard-clipped into [-1, 1]."""
    clipped = np.clip(wav.samples, -1.0, 1.0)
    pcm = np.round(clipped * 32767.0).astype("<i2")
    with wave.open(str(path), "wb") as f:
        f.setnchannels(1)
        f.setsampwidth(2)
        f.setframerate(wav.sample_rate)
        f.writeframes(pcm.tobytes())


def preemphasis(x, coeff=0.95):
    """y[0] = x[0]; y[n] = x[n] - coeff*x[n-1].  Accepts Waveform or array."""
    if not 0.0 <= coeff < 1.0:
        raise ValueError(f"preemphasis coefficient must be in [0, 1), got {coeff}")
    arr = x.samples if isinstance(x, Waveform) else np.asarray(x, dtype=np.float64)
    y = np.empty_like(arr)
    y[0:1] = arr[0:1]
    y[1:] = arr[1:] - coeff * arr[:-1]
    if isinstance(x, Waveform):
        return Waveform(y, x.sample_rate, x.id)
    return y


def deemphasis(x, coeff=0.95):
    """Inverse of preemphasis: y[n] = x[n] + coeff*y[n-1]."""
    arr = x.samples if isinstance(x, Waveform) else np.asarray(x, dtype=np.float64)
    y = iir_scan(arr, coeff)
    if isinstance(x, Waveform):
        return Waveform(y, x.sample_rate, x.id)
    return y


@dataclass
class MixInfo:
    gain: float
    offset: int
    measured_snr_db: float
    clipped: int = 0


def mix_at_snr(clean: Waveform, noise: Waveform, snr_db, seed, return_info=False):
    """clean + g*noise_segment with g giving the requested SNR on that segment.

    The noise is randomly offset (seed-driven) and truncated to the clean
    length; g = sqrt(P_clean / (P_noise * 10^(snr/10))) measured on the
    chosen segment, so the realized SNR matches the request exactly up to
    the clipping applied at the end.
    """
    n = len(clean)
    if len(noise) < n:
        raise ValueError(f"noise ({len(noise)} samples) shorter than clean ({n} samples)")
    p_clean = clean.power()
    if p_clean <= 0.0:
        raise DegenerateSignalError("clean signal has zero power")
    rng = np.random.default_rng(seed)
    offset = int(rng.integers(0, len(noise) - n + 1))
    segment = noise.samples[offset : offset + n]
    p_noise = float(np.mean(segment ** 2))
    if p_noise <= 0.0:
        raise DegenerateSignalError("noise segment has zero power")
    gain = float(np.sqrt(p_clean / (p_noise * 10.0 ** (snr_db / 10.0))))
    mixed = clean.samples + gain * segment
    clipped = int(np.count_nonzero(np.abs(mixed) > 1.0))
    mixed = np.clip(mixed, -1.0, 1.0)
    measured = 10.0 * np.log10(p_clean / (gain * gain * p_noise))
    out = Waveform(mixed, clean.sample_rate, clean.id)
    if return_info:
        return out, MixInfo(gain=gain, offset=offset, measured_snr_db=float(measured), clipped=clipped)
    return out


SSNR_FLOOR_DB = -10.0
SSNR_CEIL_DB = 35.0


def ssnr(clean: Waveform, processed: Waveform, frame_ms=32.0, floor_db=SSNR_FLOOR_DB, ceil_db=SSNR_CEIL_DB):
    """Segmental SNR: per-frame 10*log10(sum c^2 / sum (c-p)^2), clamped, averaged.

    Frames are non-overlapping; an error-free frame scores the ceiling and a
    silent-reference frame with any error scores the floor.
    """
    if len(clean) != len(processed):
        raise ValueError(f"length mismatch: clean {len(clean)} vs processed {len(processed)}")
    if clean.sample_rate != processed.sample_rate:
        raise ValueError("sample-rate mismatch between clean and processed")
    frame = int(round(frame_ms * 1e-3 * clean.sample_rate))
    c = clean.samples
    p = processed.samples
    n_frames = len(c) // frame
    if n_frames == 0:
        n_frames, frame = 1, len(c)
    vals = np.empty(n_frames)
    for i in range(n_frames):
        cs = c[i * frame : (i + 1) * frame]
        es = cs - p[i * frame : (i + 1) * frame]
        sig = float(np.sum(cs ** 2))
        err = float(np.sum(es ** 2))
        if err == 0.0:
            vals[i] = ceil_db
        elif sig == 0.0:
            vals[i] = floor_db
        else:
            vals[i] = np.clip(10.0 * np.log10(sig / err), floor_db, ceil_db)
    return float(vals.mean())
