"""Enhancement GAN: attention shapes, net ladders, losses, enhancement."""

import numpy as np
import pytest

from robustasr.diffcore import ConfigurationError, DimensionError, Tensor, backward
from robustasr.segan import (
    Discriminator,
    Generator,
    SeganArch,
    SelfAttentionLayer,
    chunk_pairs,
    d_loss,
    enhance_waveform,
    g_loss,
    sa_layer_forward,
    toy_arch,
    toy_train_config,
)
from robustasr.signal import Waveform, preemphasis

from gradcheck import fd_gradcheck, leaf

RNG = np.random.default_rng(31337)


# -- self-attention layer ----------------------------------------------------


def test_sa_layer_figure_shapes():
    # L=9, C=6, p=3, b=2: Q 9x3, K/V 3x3, A 9x3, O 9x6
    layer = SelfAttentionLayer(6, b=2, p=3, rng=np.random.default_rng(1))
    f = RNG.standard_normal((9, 6))
    out, attn = sa_layer_forward(f, layer, return_attention=True)
    assert out.shape == (9, 6)
    assert attn.shape == (9, 3)
    np.testing.assert_allclose(attn.data.sum(axis=-1), 1.0, atol=1e-6)


def test_sa_layer_beta_zero_is_identity():
    layer = SelfAttentionLayer(8, b=4, p=2, rng=np.random.default_rng(2))
    f = RNG.standard_normal((12, 8))
    out = sa_layer_forward(f, layer)
    np.testing.assert_array_equal(out.data, f)


def test_sa_layer_single_pooled_key():
    layer = SelfAttentionLayer(4, b=2, p=5, rng=np.random.default_rng(3))
    layer.beta.data[:] = 1.0
    f = RNG.standard_normal((5, 4))   # L == p: one pooled key
    out, attn = sa_layer_forward(f, layer, return_attention=True)
    np.testing.assert_allclose(attn.data, 1.0, atol=1e-12)
    pooled = f.max(axis=0, keepdims=True)
    want = (pooled @ layer.wv.data) @ layer.wo.data + f
    np.testing.assert_allclose(out.data, want, atol=1e-12)


def test_sa_layer_pads_and_masks_ragged_length():
    layer = SelfAttentionLayer(4, b=2, p=4, rng=np.random.default_rng(4))
    layer.beta.data[:] = 0.7
    f = RNG.standard_normal((10, 4))  # pads to 12, the third window is half real
    out, attn = sa_layer_forward(f, layer, return_attention=True)
    assert out.shape == (10, 4)
    assert attn.shape == (10, 3)
    np.testing.assert_allclose(attn.data.sum(axis=-1), 1.0, atol=1e-6)


def test_sa_layer_rejects_bad_reduction():
    with pytest.raises(DimensionError):
        SelfAttentionLayer(6, b=4, p=2, rng=np.random.default_rng(5))


def test_sa_layer_gradients():
    layer = SelfAttentionLayer(6, b=2, p=3, rng=np.random.default_rng(6))
    layer.beta.data[:] = 0.5
    f = leaf(RNG, (9, 6))
    tensors = [f, layer.wq, layer.wk, layer.wv, layer.wo, layer.beta]
    fd_gradcheck(lambda: (layer.forward(f) ** 2.0).sum(), tensors, RNG, n_coords=4)


# -- generator -------------------------------------------------------------------


def test_generator_toy_ladder_and_output_shape():
    arch = toy_arch()
    gen = Generator(arch, np.random.default_rng(7))
    x = RNG.standard_normal((2, 1024, 1)) * 0.1
    z = RNG.standard_normal(gen.z_shape(2))
    shapes = []
    y = gen.forward(Tensor(x), z, record_shapes=shapes)
    assert y.shape == (2, 1024, 1)
    enc = [(l, c) for kind, _, l, c in shapes if kind == "enc"]
    assert enc == [(512, 16), (256, 32), (128, 64), (64, 128)]
    dec = [(l, c) for kind, _, l, c in shapes if kind == "dec"]
    assert dec == [(128, 64), (256, 32), (512, 16), (1024, 1)]


def test_generator_rejects_wrong_chunk_length():
    gen = Generator(toy_arch(), np.random.default_rng(8))
    with pytest.raises(DimensionError):
        gen.forward(Tensor(np.zeros((1, 512, 1))), np.zeros(gen.z_shape(1)))
    with pytest.raises(DimensionError):
        gen.forward(Tensor(np.zeros((1, 1024, 1))), np.zeros((1, 2, 2)))


def test_generator_output_finite_and_deterministic():
    gen = Generator(toy_arch(), np.random.default_rng(9))
    x = RNG.standard_normal((1, 1024, 1)) * 0.2
    z = RNG.standard_normal(gen.z_shape(1))
    a = gen.forward(Tensor(x), z).data
    b = gen.forward(Tensor(x), z).data
    assert np.isfinite(a).all()
    np.testing.assert_array_equal(a, b)


def test_generator_gradient_to_input():
    arch = toy_arch(chunk_len=64, filters=(4, 8), attention_layers=(1,), attn_b=2, attn_p=4)
    gen = Generator(arch, np.random.default_rng(10))
    x = leaf(RNG, (1, 64, 1), scale=0.3)
    z = RNG.standard_normal(gen.z_shape(1))
    picked = [x, gen.enc_w[0], gen.dec_w[-1], gen.dec_a[0]]
    fd_gradcheck(lambda: (gen.forward(x, z) ** 2.0).sum(), picked, RNG, n_coords=4)


# -- discriminator --------------------------------------------------------------------


def _toy_disc(rng_seed=11):
    arch = toy_arch()
    d = Discriminator(arch, np.random.default_rng(rng_seed))
    ref = RNG.standard_normal((3, 1024, 1)) * 0.1
    d.register_reference(ref, ref)
    return d


def test_discriminator_scalar_scores_and_determinism():
    d = _toy_disc()
    x = RNG.standard_normal((4, 1024, 1)) * 0.1
    c = RNG.standard_normal((4, 1024, 1)) * 0.1
    s1 = d.forward(Tensor(x), Tensor(c))
    s2 = d.forward(Tensor(x), Tensor(c))
    assert s1.shape == (4,)
    np.testing.assert_array_equal(s1.data, s2.data)
    assert np.isfinite(s1.data).all()


def test_discriminator_requires_reference():
    d = Discriminator(toy_arch(), np.random.default_rng(12))
    x = np.zeros((1, 1024, 1))
    with pytest.raises(ConfigurationError, match="reference"):
        d.forward(Tensor(x), Tensor(x))


def test_discriminator_rejects_bad_shapes():
    d = _toy_disc()
    with pytest.raises(DimensionError):
        d.forward(Tensor(np.zeros((1, 512, 1))), Tensor(np.zeros((1, 512, 1))))


def test_discriminator_gradient_wrt_candidate():
    arch = toy_arch(chunk_len=64, filters=(4, 8), attention_layers=(1,), attn_b=2, attn_p=4)
    d = Discriminator(arch, np.random.default_rng(13))
    ref = RNG.standard_normal((2, 64, 1)) * 0.2
    d.register_reference(ref, ref)
    cand = leaf(RNG, (2, 64, 1), scale=0.2)
    cond = Tensor(RNG.standard_normal((2, 64, 1)) * 0.2)
    fd_gradcheck(lambda: (d.forward(cand, cond) ** 2.0).sum(), [cand], RNG, n_coords=6)


# -- losses ------------------------------------------------------------------------------


def test_d_loss_values():
    assert d_loss(np.array([1.0]), np.array([0.0])).item() == 0.0
    np.testing.assert_allclose(d_loss(np.array([0.0]), np.array([1.0])).item(), 1.0)
    np.testing.assert_allclose(d_loss(np.array([0.5]), np.array([0.5])).item(), 0.25)


def test_d_loss_zero_iff_perfect():
    r = RNG.random(8)
    f = RNG.random(8)
    assert d_loss(r, f).item() > 0.0
    assert d_loss(np.ones(8), np.zeros(8)).item() == 0.0


def test_g_loss_values():
    clean = RNG.standard_normal(100)
    assert g_loss(np.array([1.0]), clean, clean, 100.0).item() == 0.0
    shifted = clean + 0.1
    np.testing.assert_allclose(g_loss(np.array([0.0]), shifted, clean, 100.0).item(), 10.5, atol=1e-9)
    # doubling lambda doubles the L1 term exactly
    base = g_loss(np.array([1.0]), shifted, clean, 50.0).item()
    np.testing.assert_allclose(g_loss(np.array([1.0]), shifted, clean, 100.0).item(), 2 * base, atol=1e-12)


def test_g_loss_length_mismatch():
    with pytest.raises(ValueError):
        g_loss(np.array([1.0]), np.zeros(5), np.zeros(6), 1.0)


def test_g_step_decreases_g_loss_on_frozen_discriminator():
    # one small-lr generator step lowers the generator objective on the batch
    from robustasr.diffcore import RMSprop
    from robustasr.segan import g_loss_parts

    arch = toy_arch(chunk_len=256, filters=(8, 16), attention_layers=(1,), attn_b=2, attn_p=4)
    rng = np.random.default_rng(14)
    gen = Generator(arch, rng)
    disc = Discriminator(arch, rng)
    ref = rng.standard_normal((2, 256, 1)) * 0.1
    disc.register_reference(ref, ref)
    noisy = rng.standard_normal((4, 256, 1)) * 0.1
    clean = noisy * 0.8
    z = rng.standard_normal(gen.z_shape(4))

    def compute():
        fake = gen.forward(Tensor(noisy), z)
        s = disc.forward(fake, Tensor(noisy))
        return g_loss(s, fake, Tensor(clean), 100.0)

    before = compute()
    opt = RMSprop(gen.params(), lr=1e-5)
    opt.zero_grad()
    backward(before)
    opt.step()
    assert compute().item() < before.item()


# -- chunking / enhancement ------------------------------------------------------------------


def test_chunk_pairs_overlap_and_padding():
    clean = Waveform(RNG.standard_normal(2304) * 0.1)
    noisy = Waveform(clean.samples + 0.01)
    c, n = chunk_pairs([(clean, noisy)], 1024, 0.5, 0.95)
    assert c.shape == (3, 1024)          # starts 0, 512, 1024
    short = Waveform(RNG.standard_normal(100) * 0.1)
    c2, _ = chunk_pairs([(short, short)], 1024, 0.5, 0.95)
    assert c2.shape == (1, 1024)
    np.testing.assert_allclose(c2[0, 100:], 0.0)
    np.testing.assert_allclose(c2[0, :100], preemphasis(short.samples, 0.95))


def test_enhance_waveform_length_contract():
    gen = Generator(toy_arch(), np.random.default_rng(15))
    for n in (1, 1024, 1025, 4000):
        wav = Waveform(RNG.standard_normal(n) * 0.05, id=f"utt{n}")
        out = enhance_waveform(wav, gen, seed=3)
        assert len(out) == n
        assert np.isfinite(out.samples).all()


def test_enhance_waveform_deterministic_per_seed():
    # fixed z policy: same utterance + seed reproduces bitwise; note the
    # latent path starts silent by design, so an untrained generator is
    # z-independent and cross-seed outputs may legitimately coincide
    gen = Generator(toy_arch(), np.random.default_rng(16))
    wav = Waveform(RNG.standard_normal(3000) * 0.05, id="uttx")
    a = enhance_waveform(wav, gen, seed=4).samples
    b = enhance_waveform(wav, gen, seed=4).samples
    np.testing.assert_array_equal(a, b)


def test_pretrain_smoke_and_history(tmp_path):
    from robustasr.segan import segan_pretrain

    rng = np.random.default_rng(17)
    arch = toy_arch(chunk_len=256, filters=(8, 16), attention_layers=(1,), attn_b=2, attn_p=4)
    cfg = toy_train_config(arch=arch, epochs=1, batch=4, seed=0)
    pairs = []
    for i in range(4):
        clean = Waveform(rng.standard_normal(600) * 0.1, id=f"p{i}")
        noisy = Waveform(np.clip(clean.samples + rng.standard_normal(600) * 0.05, -1, 1), id=f"p{i}")
        pairs.append((clean, noisy))
    gen, disc, history = segan_pretrain(pairs, cfg)
    assert len(history) == 1
    for key in ("d_loss", "g_loss_adv", "g_loss_l1"):
        assert np.isfinite(history[0][key])


def test_pretrain_rejects_empty_dataset():
    from robustasr.segan import segan_pretrain

    with pytest.raises(ValueError, match="empty"):
        segan_pretrain([], toy_train_config())


def test_generator_checkpoint_roundtrip(tmp_path):
    from robustasr.data import CheckpointError, load_checkpoint, save_checkpoint

    gen = Generator(toy_arch(), np.random.default_rng(18))
    save_checkpoint(gen.to_payload(), tmp_path / "g.ckpt")
    clone = Generator.from_payload(load_checkpoint(tmp_path / "g.ckpt"))
    for (name, a), (_, b) in zip(sorted(gen.params().items()), sorted(clone.params().items())):
        np.testing.assert_array_equal(a.data, b.data, err_msg=name)
    # paper-arch model refuses the toy checkpoint
    paper_gen = Generator(SeganArch(), np.random.default_rng(1))
    with pytest.raises(CheckpointError, match="fingerprint"):
        paper_gen.load_payload(load_checkpoint(tmp_path / "g.ckpt"))
