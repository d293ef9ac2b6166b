"""Waveform utilities and the FBank chain: mixing, STFT, mel, deltas, SSNR."""

import numpy as np
import pytest

from robustasr.diffcore import Tensor
from robustasr.signal import (
    DegenerateSignalError,
    FbankConfig,
    Waveform,
    build_mel_filterbank,
    compute_norm_stats,
    deemphasis,
    delta,
    fbank,
    fbank_graph,
    load_wav,
    mix_at_snr,
    preemphasis,
    raw_fbank,
    save_wav,
    ssnr,
    stft,
    stft_power_graph,
)

from gradcheck import fd_gradcheck

RNG = np.random.default_rng(4242)


def _tone(freq, seconds=1.0, sr=16000, amp=0.3):
    t = np.arange(int(seconds * sr)) / sr
    return Waveform(amp * np.sin(2 * np.pi * freq * t), sr)


# -- wav io -------------------------------------------------------------------


def test_wav_roundtrip(tmp_path):
    wav = _tone(440.0, 0.25)
    path = tmp_path / "tone.wav"
    save_wav(path, wav)
    back = load_wav(path)
    assert back.sample_rate == 16000
    np.testing.assert_allclose(back.samples, wav.samples, atol=1.0 / 32767)


def test_wav_rejects_wrong_rate(tmp_path):
    import wave as wave_mod

    path = tmp_path / "bad.wav"
    with wave_mod.open(str(path), "wb") as f:
        f.setnchannels(1)
        f.setsampwidth(2)
        f.setframerate(8000)
        f.writeframes(b"\x00\x00" * 100)
    with pytest.raises(ValueError, match="16 kHz"):
        load_wav(path)


# -- mixing --------------------------------------------------------------------


def test_mix_equal_power_at_0db_gain_is_one():
    clean = _tone(500.0)
    noise = Waveform(RNG.standard_normal(len(clean)) * clean.power() ** 0.5 / 1.0)
    noise.samples *= np.sqrt(clean.power() / noise.power())
    _, info = mix_at_snr(clean, noise, 0.0, seed=1, return_info=True)
    assert abs(info.gain - 1.0) < 1e-9
    assert abs(info.measured_snr_db - 0.0) < 0.1


def test_mix_20db_equal_power_gain_tenth():
    clean = _tone(500.0)
    noise = Waveform(np.copy(clean.samples))
    _, info = mix_at_snr(clean, noise, 20.0, seed=1, return_info=True)
    assert abs(info.gain - 0.1) < 1e-12


def test_mix_measured_snr_tracks_request():
    clean = Waveform(RNG.standard_normal(8000) * 0.1)
    noise = Waveform(RNG.standard_normal(20000))
    for snr_db in (0.0, 7.3, 20.0):
        _, info = mix_at_snr(clean, noise, snr_db, seed=9, return_info=True)
        assert abs(info.measured_snr_db - snr_db) < 0.1


def test_mix_silent_clean_rejected():
    clean = Waveform(np.zeros(1000))
    noise = Waveform(RNG.standard_normal(2000))
    with pytest.raises(DegenerateSignalError):
        mix_at_snr(clean, noise, 10.0, seed=0)


def test_mix_deterministic_per_seed():
    clean = _tone(700.0)
    noise = Waveform(RNG.standard_normal(3 * len(clean)))
    a = mix_at_snr(clean, noise, 5.0, seed=42).samples
    b = mix_at_snr(clean, noise, 5.0, seed=42).samples
    np.testing.assert_array_equal(a, b)


# -- preemphasis ------------------------------------------------------------------


def test_preemphasis_examples():
    x = Waveform(np.ones(5))
    y = preemphasis(x, 0.95)
    np.testing.assert_allclose(y.samples, [1.0, 0.05, 0.05, 0.05, 0.05])
    np.testing.assert_allclose(preemphasis(x, 0.0).samples, x.samples)
    np.testing.assert_allclose(preemphasis(Waveform(np.zeros(4)), 0.95).samples, 0.0)


def test_preemphasis_is_linear():
    a, b = 2.5, -1.25
    x = RNG.standard_normal(100)
    y = RNG.standard_normal(100)
    lhs = preemphasis(a * x + b * y, 0.95)
    rhs = a * preemphasis(x, 0.95) + b * preemphasis(y, 0.95)
    np.testing.assert_allclose(lhs, rhs, atol=1e-13)


def test_deemphasis_inverts_preemphasis():
    x = RNG.standard_normal(500)
    np.testing.assert_allclose(deemphasis(preemphasis(x, 0.95), 0.95), x, atol=1e-9)


# -- stft ---------------------------------------------------------------------------


def test_stft_zero_signal_and_frame_count():
    cfg = FbankConfig()
    z = stft(Waveform(np.zeros(16000)), cfg)
    assert z.shape == (98, 257)
    np.testing.assert_allclose(np.abs(z), 0.0)


def test_stft_rejects_short_signal():
    with pytest.raises(ValueError, match="shorter"):
        stft(Waveform(np.zeros(100)), FbankConfig())


def test_stft_sine_peaks_at_bin():
    cfg = FbankConfig()
    # bin 16 of a 512-point FFT at 16 kHz sits at exactly 500 Hz
    wav = _tone(500.0, 0.2)
    mags = np.abs(stft(wav, cfg))
    assert (mags.argmax(axis=1) == 16).all()


def test_stft_power_graph_matches_rfft_oracle():
    cfg = FbankConfig()
    x = RNG.standard_normal(1200) * 0.2
    power = stft_power_graph(Tensor(x), cfg).data
    want = np.abs(stft(x, cfg)) ** 2
    np.testing.assert_allclose(power, want, atol=1e-9)


# -- mel filterbank -------------------------------------------------------------------


def test_mel_rows_triangular_nonneg_nonzero():
    mel = build_mel_filterbank(FbankConfig())
    assert mel.matrix.shape == (80, 257)
    assert (mel.matrix >= 0.0).all()
    for row in mel.matrix:
        assert row.max() > 0.0
        peak = row.argmax()
        assert (np.diff(row[: peak + 1]) >= -1e-12).all()
        assert (np.diff(row[peak:]) <= 1e-12).all()
    ones = mel.matrix @ np.ones(257)
    assert (ones > 0.0).all()


# -- fbank ----------------------------------------------------------------------------


def test_fbank_dims():
    wav = _tone(440.0, 0.3)
    assert fbank(wav, cfg=FbankConfig(with_deltas=False)).dim == 80
    assert fbank(wav, cfg=FbankConfig(with_deltas=True)).dim == 240


def test_fbank_constant_spectrum_self_normalized_is_zero():
    # identical frames leave zero per-dim variance, so the normalized output
    # collapses to (numerical) zero
    wav = Waveform(np.full(8000, 0.25))
    fm = fbank(wav, cfg=FbankConfig())
    np.testing.assert_allclose(fm.values, 0.0, atol=1e-6)


def test_fbank_population_normalization_invariants():
    cfg = FbankConfig()
    mel = build_mel_filterbank(cfg)
    wavs = [Waveform(RNG.standard_normal(6000) * 0.1) for _ in range(4)]
    stats = compute_norm_stats([raw_fbank(w, mel, cfg) for w in wavs])
    normed = np.concatenate([fbank(w, mel=mel, norm_stats=stats, cfg=cfg).values for w in wavs])
    np.testing.assert_allclose(normed.mean(axis=0), 0.0, atol=1e-6)
    np.testing.assert_allclose(normed.var(axis=0), 1.0, atol=1e-4)


def test_fbank_gradient_vs_finite_differences():
    cfg = FbankConfig(win_ms=4.0, hop_ms=2.0, n_fft=64, n_mels=12, fmax=8000.0)
    mel = build_mel_filterbank(cfg)
    x = Tensor(RNG.standard_normal(200) * 0.3, requires_grad=True)
    stats_src = raw_fbank(x.data, mel, cfg)
    stats = compute_norm_stats([stats_src + RNG.standard_normal(stats_src.shape) * 0.05])
    fd_gradcheck(lambda: fbank_graph(x, mel, stats, cfg).sum(), [x], RNG, n_coords=10)


# -- deltas ------------------------------------------------------------------------------


def test_delta_constant_is_zero():
    f = np.tile(RNG.standard_normal(6), (10, 1))
    np.testing.assert_allclose(delta(f), 0.0, atol=1e-12)


def test_delta_linear_ramp_gives_slope():
    slope = np.array([0.5, -2.0, 3.0])
    t = np.arange(12)[:, None]
    f = t * slope[None, :]
    d = delta(f, window=2)
    # interior rows equal the slope exactly for a linear ramp
    np.testing.assert_allclose(d[2:-2], np.tile(slope, (8, 1)), atol=1e-12)


def test_delta_single_frame_is_zero():
    f = RNG.standard_normal((1, 4))
    np.testing.assert_allclose(delta(f), 0.0, atol=1e-12)


# -- ssnr ----------------------------------------------------------------------------------


def test_ssnr_identical_hits_ceiling():
    wav = _tone(300.0, 0.5)
    assert ssnr(wav, wav) == 35.0


def test_ssnr_sign_flip_is_quarter_ratio():
    # error power is 4x signal power per frame: 10*log10(1/4) = -6.02 dB
    wav = _tone(300.0, 0.5)
    flipped = Waveform(-wav.samples)
    np.testing.assert_allclose(ssnr(wav, flipped), 10.0 * np.log10(0.25), atol=1e-9)


def test_ssnr_overwhelming_noise_hits_floor():
    wav = _tone(300.0, 0.5, amp=0.05)
    drowned = Waveform(np.clip(wav.samples + RNG.standard_normal(len(wav)) * 0.9, -1, 1))
    assert ssnr(wav, drowned) == -10.0


def test_ssnr_equal_power_orthogonal_noise_near_zero_db():
    sr = 16000
    frame = 512
    n = frame * 20
    clean = RNG.standard_normal(n) * 0.1
    noise = np.empty_like(clean)
    for i in range(20):
        c = clean[i * frame : (i + 1) * frame]
        r = RNG.standard_normal(frame)
        r -= r @ c / (c @ c) * c          # orthogonalize per frame
        r *= np.sqrt((c @ c) / (r @ r))   # match frame power
        noise[i * frame : (i + 1) * frame] = r
    val = ssnr(Waveform(clean, sr), Waveform(clean + noise, sr))
    assert abs(val) < 1e-6


def test_ssnr_length_mismatch_rejected():
    with pytest.raises(ValueError, match="length"):
        ssnr(_tone(200.0, 0.1), _tone(200.0, 0.2))
