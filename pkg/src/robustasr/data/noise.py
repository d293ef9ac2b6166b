"""Parametric noise families standing in for recorded intrusions.

Matched and unmatched banks use disjoint families so the unmatched test
condition genuinely measures generalization.  Generation is deterministic
per (name, seed, length) and normalized to unit power.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from ..signal import Waveform

MATCHED_FAMILIES = ("white", "tonal_machinery", "bandpass_low", "impulsive", "engine_hum")
UNMATCHED_FAMILIES = ("pink", "bandpass_high", "amplitude_modulated")


@dataclass(frozen=True)
class NoiseSpec:
    name: str
    family: str
    seed: int = 0
    params: tuple = field(default_factory=tuple)  # ((key, value), ...) kept hashable


def _rng_for(spec: NoiseSpec, length):
    digest = hashlib.sha256(spec.name.encode()).digest()
    name_key = int.from_bytes(digest[:4], "little")
    return np.random.default_rng([spec.seed, name_key, length])


def _band_filter(x, lo_hz, hi_hz, sr):
    spec = np.fft.rfft(x)
    freqs = np.fft.rfftfreq(len(x), 1.0 / sr)
    spec[(freqs < lo_hz) | (freqs > hi_hz)] = 0.0
    return np.fft.irfft(spec, n=len(x))


def _unit_power(x):
    p = np.mean(x * x)
    if p <= 0:
        raise ValueError("generated noise has zero power")
    return x / np.sqrt(p)


def synth_noise(spec: NoiseSpec, length, sr=16000) -> Waveform:
    """Unit-power noise of the requested family; see module docstring."""
    if length < 1:
        raise ValueError(f"noise length must be >= 1, got {length}")
    rng = _rng_for(spec, length)
    params = dict(spec.params)
    t = np.arange(length) / sr

    if spec.family == "white":
        x = rng.standard_normal(length)
    elif spec.family == "pink":
        # shape white noise to 1/f power (about -3 dB per octave)
        white = rng.standard_normal(length)
        fspec = np.fft.rfft(white)
        freqs = np.fft.rfftfreq(length, 1.0 / sr)
        scale = np.ones_like(freqs)
        nz = freqs > 0
        scale[nz] = 1.0 / np.sqrt(freqs[nz])
        scale[0] = 0.0
        x = np.fft.irfft(fspec * scale, n=length)
    elif spec.family == "tonal_machinery":
        f0 = params.get("f0", 110.0)
        x = np.zeros(length)
        for h in range(1, 9):
            x += np.sin(2 * np.pi * f0 * h * t + rng.uniform(0, 2 * np.pi)) / h
        x += 0.15 * rng.standard_normal(length)
    elif spec.family == "bandpass_low":
        x = _band_filter(rng.standard_normal(length), params.get("lo", 50.0), params.get("hi", 800.0), sr)
    elif spec.family == "bandpass_high":
        x = _band_filter(rng.standard_normal(length), params.get("lo", 2000.0), params.get("hi", 6000.0), sr)
    elif spec.family == "impulsive":
        rate = params.get("rate_hz", 8.0)
        x = 0.05 * rng.standard_normal(length)
        n_pulses = max(1, int(rate * length / sr))
        starts = rng.integers(0, max(1, length - 200), size=n_pulses)
        burst = np.exp(-np.arange(200) / 30.0)
        for s in starts:
            x[s : s + 200] += rng.choice([-1.0, 1.0]) * burst[: length - s]
    elif spec.family == "engine_hum":
        f0 = params.get("f0", 45.0)
        x = np.zeros(length)
        for h, a in ((1, 1.0), (2, 0.6), (3, 0.35), (4, 0.2)):
            x += a * np.sin(2 * np.pi * f0 * h * t + rng.uniform(0, 2 * np.pi))
        x *= 1.0 + 0.3 * np.sin(2 * np.pi * 1.5 * t + rng.uniform(0, 2 * np.pi))
        x += 0.1 * rng.standard_normal(length)
    elif spec.family == "amplitude_modulated":
        fm = params.get("fm", 3.0)
        carrier = rng.standard_normal(length)
        x = carrier * (1.0 + 0.8 * np.sin(2 * np.pi * fm * t + rng.uniform(0, 2 * np.pi)))
    else:
        raise ValueError(f"unknown noise family: {spec.family!r}")

    return Waveform(_unit_power(x), sr, id=spec.name)


def default_noise_bank(seed=0):
    """(matched, unmatched) NoiseSpec lists with disjoint families."""
    matched = [NoiseSpec(name=f"m_{fam}", family=fam, seed=seed) for fam in MATCHED_FAMILIES]
    unmatched = [NoiseSpec(name=f"u_{fam}", family=fam, seed=seed) for fam in UNMATCHED_FAMILIES]
    return matched, unmatched
