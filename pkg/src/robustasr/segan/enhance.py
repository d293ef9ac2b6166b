"""Sliding-window waveform enhancement shared by inference and joint training."""

from __future__ import annotations

import hashlib

import numpy as np

from ..diffcore import Tensor, iir_first_order, no_grad
from ..signal import Waveform, preemphasis
from .generator import Generator


def _utt_seed(seed, utt_id):
    digest = hashlib.sha256((utt_id or "").encode()).digest()
    return [int(seed), int.from_bytes(digest[:4], "little")]


def preemphasized_chunks(signal, chunk_len, preemph=0.95):
    """Preemphasize and split into zero-padded non-overlapping (n, L, 1) chunks."""
    signal = np.asarray(signal, dtype=np.float64)
    n = len(signal)
    if n < 1:
        raise ValueError("cannot chunk an empty signal")
    pe = preemphasis(signal, preemph)
    n_chunks = -(-n // chunk_len)
    padded = np.zeros(n_chunks * chunk_len)
    padded[:n] = pe
    return padded.reshape(n_chunks, chunk_len, 1)


def enhance_chunks_graph(noisy, gen: Generator, rng, preemph=0.95):
    """Generator pass over an utterance; returns (fake_chunks, pe_chunks, n).

    fake_chunks is the live (n_chunks, L, 1) graph tensor in the
    preemphasized domain; pe_chunks are the conditioning inputs.
    """
    pe_chunks = preemphasized_chunks(noisy, gen.arch.chunk_len, preemph)
    z = rng.standard_normal(gen.z_shape(pe_chunks.shape[0]))
    fake = gen.forward(Tensor(pe_chunks), z)
    return fake, pe_chunks, len(np.asarray(noisy))


def enhance_array_graph(noisy, gen: Generator, rng, preemph=0.95):
    """Differentiable enhancement of a 1-d signal; returns a (len,) Tensor.

    Preemphasis is applied to the input, the generator runs over
    non-overlapping zero-padded chunks with a fresh latent per chunk, the
    concatenation is trimmed to the input length, and the inverse filter
    restores the natural spectrum.
    """
    fake, _, n = enhance_chunks_graph(noisy, gen, rng, preemph)
    flat = fake.reshape(fake.shape[0] * fake.shape[1])[:n]
    return iir_first_order(flat, preemph)


def enhance_waveform(wav: Waveform, gen: Generator, seed=0, preemph=0.95) -> Waveform:
    """Deterministic enhancement: the latent stream is seeded per utterance."""
    rng = np.random.default_rng(_utt_seed(seed, wav.id))
    with no_grad():
        out = enhance_array_graph(wav.samples, gen, rng, preemph)
    return Waveform(np.clip(out.data, -1.0, 1.0), wav.sample_rate, wav.id)
