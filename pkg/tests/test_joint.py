"""Joint objective algebra, degenerate-weight contracts, MCT construction."""

import numpy as np
import pytest

from robustasr.asr import TokenVocab, build_asr_model
from robustasr.data import (
    DatasetManifest,
    default_noise_bank,
    load_checkpoint,
    save_checkpoint,
    synth_toy_corpus,
    write_corpus_audio,
)
from robustasr.diffcore import Tensor, TrainingDiverged, backward
from robustasr.joint import (
    JointConfig,
    JointTrainer,
    MissingAudioError,
    build_mct_dataset,
    evaluate_pipeline,
    joint_loss,
    load_pipeline,
    pipeline_payload,
)
from robustasr.segan import Discriminator, Generator, toy_arch
from robustasr.signal import FbankConfig, NormStats

RNG = np.random.default_rng(2024)
VOCAB = TokenVocab("abcdefghijkl")


def _small_setup(seed=0, kappa=6.0, gamma=3.0, chunk=1024):
    rng = np.random.default_rng(seed)
    arch = toy_arch()
    gen = Generator(arch, rng)
    disc = Discriminator(arch, rng)
    ref = rng.standard_normal((2, chunk, 1)) * 0.1
    disc.register_reference(ref, ref)
    asr = build_asr_model("conformer", "toy", VOCAB, 80, rng)
    stats = NormStats(mean=np.zeros(80), var=np.ones(80))
    cfg = JointConfig(kappa=kappa, gamma=gamma, epochs=1, batch_utts=2, seed=seed)
    trainer = JointTrainer(gen, disc, asr, stats, FbankConfig(), cfg)
    return trainer


def _toy_triple(seed=0, n=6000):
    rng = np.random.default_rng(seed)
    clean = rng.standard_normal(n) * 0.1
    noisy = np.clip(clean + rng.standard_normal(n) * 0.03, -1, 1)
    return clean, noisy, VOCAB.encode("adg")


# -- joint loss -------------------------------------------------------------


def test_joint_loss_values():
    assert joint_loss(1.0, 0.5, 0.2, JointConfig(kappa=0.0, gamma=0.0)) == 1.0
    np.testing.assert_allclose(joint_loss(1.0, 0.5, 0.2, JointConfig(kappa=6.0, gamma=3.0)), 4.6, atol=1e-12)


def test_joint_loss_linear_in_components():
    cfg = JointConfig(kappa=2.0, gamma=5.0)
    base = joint_loss(1.0, 1.0, 1.0, cfg)
    np.testing.assert_allclose(joint_loss(2.0, 1.0, 1.0, cfg) - base, 1.0, atol=1e-12)
    np.testing.assert_allclose(joint_loss(1.0, 2.0, 1.0, cfg) - base, 2.0, atol=1e-12)
    np.testing.assert_allclose(joint_loss(1.0, 1.0, 2.0, cfg) - base, 5.0, atol=1e-12)


def test_joint_loss_nan_names_component():
    with pytest.raises(TrainingDiverged, match="l_enh"):
        joint_loss(1.0, float("nan"), 0.0, JointConfig())


def test_joint_config_rejects_negative_weights():
    with pytest.raises(ValueError):
        JointConfig(kappa=-1.0)


# -- degeneration contracts ---------------------------------------------------


def _collect_grads(trainer, triple, kappa, gamma):
    trainer.cfg.kappa = kappa
    trainer.cfg.gamma = gamma
    trainer.rng = np.random.default_rng(123)  # fixed z / dropout stream
    for p in list(trainer.gen.params().values()) + list(trainer.asr.params().values()):
        p.grad = None
    l_asr, l_enh, l_gan, _ = trainer.utterance_losses(*triple)
    total = joint_loss(l_asr, l_enh, l_gan, trainer.cfg)
    backward(total)
    return {
        name: (None if p.grad is None else p.grad.copy())
        for name, p in {**{f"g.{k}": v for k, v in trainer.gen.params().items()},
                        **{f"a.{k}": v for k, v in trainer.asr.params().items()}}.items()
    }


def test_kappa_gamma_zero_equals_pure_asr_gradients():
    trainer = _small_setup()
    triple = _toy_triple()
    got = _collect_grads(trainer, triple, kappa=0.0, gamma=0.0)

    trainer.rng = np.random.default_rng(123)
    for p in list(trainer.gen.params().values()) + list(trainer.asr.params().values()):
        p.grad = None
    l_asr, _, _, _ = trainer.utterance_losses(*triple)
    backward(l_asr)
    want = {
        name: (None if p.grad is None else p.grad.copy())
        for name, p in {**{f"g.{k}": v for k, v in trainer.gen.params().items()},
                        **{f"a.{k}": v for k, v in trainer.asr.params().items()}}.items()
    }
    for name in want:
        if want[name] is None:
            assert got[name] is None or np.allclose(got[name], 0.0, atol=1e-12)
        else:
            np.testing.assert_allclose(got[name], want[name], atol=1e-9, err_msg=name)


def test_gamma_zero_matches_kappa_only_gradients():
    # gamma=0 grads equal those of l_asr + kappa*l_enh with no gan term at all
    trainer = _small_setup()
    triple = _toy_triple()
    got = _collect_grads(trainer, triple, kappa=6.0, gamma=0.0)

    trainer.rng = np.random.default_rng(123)
    for p in list(trainer.gen.params().values()) + list(trainer.asr.params().values()):
        p.grad = None
    l_asr, l_enh, _, _ = trainer.utterance_losses(*triple)
    backward(l_asr + l_enh * 6.0)
    want = {
        name: (None if p.grad is None else p.grad.copy())
        for name, p in {**{f"g.{k}": v for k, v in trainer.gen.params().items()},
                        **{f"a.{k}": v for k, v in trainer.asr.params().items()}}.items()
    }
    for name in want:
        if want[name] is not None:
            np.testing.assert_allclose(got[name], want[name], atol=1e-9, err_msg=name)


def test_gamma_zero_leaves_discriminator_untouched():
    trainer = _small_setup(gamma=0.0)
    before = {k: p.data.copy() for k, p in trainer.disc.params().items()}
    trainer.joint_step([_toy_triple()])
    for k, p in trainer.disc.params().items():
        np.testing.assert_array_equal(p.data, before[k], err_msg=k)
    assert trainer.opt_disc.n == 0


def test_joint_step_updates_all_components_with_gan():
    trainer = _small_setup()
    before_g = {k: p.data.copy() for k, p in trainer.gen.params().items()}
    before_d = {k: p.data.copy() for k, p in trainer.disc.params().items()}
    before_a = {k: p.data.copy() for k, p in trainer.asr.params().items()}
    out = trainer.joint_step([_toy_triple()])
    assert all(np.isfinite(v) for v in out.values())
    assert any(not np.array_equal(p.data, before_g[k]) for k, p in trainer.gen.params().items())
    assert any(not np.array_equal(p.data, before_d[k]) for k, p in trainer.disc.params().items())
    assert any(not np.array_equal(p.data, before_a[k]) for k, p in trainer.asr.params().items())


def test_generator_gradient_flows_from_asr_loss_alone():
    trainer = _small_setup(kappa=0.0, gamma=0.0)
    l_asr, _, _, _ = trainer.utterance_losses(*_toy_triple())
    trainer.opt_gen.zero_grad()
    backward(l_asr)
    g = trainer.gen.enc_w[0].grad
    assert g is not None and np.isfinite(g).all() and np.abs(g).max() > 0.0


def test_freeze_flags_respected():
    trainer = _small_setup()
    trainer.cfg.freeze_generator = True
    trainer.cfg.freeze_asr = True
    before_g = {k: p.data.copy() for k, p in trainer.gen.params().items()}
    before_a = {k: p.data.copy() for k, p in trainer.asr.params().items()}
    trainer.joint_step([_toy_triple()])
    for k, p in trainer.gen.params().items():
        np.testing.assert_array_equal(p.data, before_g[k])
    for k, p in trainer.asr.params().items():
        np.testing.assert_array_equal(p.data, before_a[k])


def test_same_seed_same_trajectory():
    outs = []
    for _ in range(2):
        trainer = _small_setup(seed=5)
        outs.append(trainer.joint_step([_toy_triple()]))
    assert outs[0] == outs[1]


# -- initialization contract -----------------------------------------------------


def test_initialization_from_checkpoints_is_bit_exact(tmp_path):
    trainer = _small_setup(seed=9)
    from robustasr.cli import load_segan, segan_payload

    save_checkpoint(segan_payload(trainer.gen, trainer.disc), tmp_path / "segan.ckpt")
    gen2, disc2 = load_segan(load_checkpoint(tmp_path / "segan.ckpt"))
    for (k, a), (_, b) in zip(sorted(trainer.gen.params().items()), sorted(gen2.params().items())):
        np.testing.assert_array_equal(a.data, b.data, err_msg=k)
    for (k, a), (_, b) in zip(sorted(trainer.disc.params().items()), sorted(disc2.params().items())):
        np.testing.assert_array_equal(a.data, b.data, err_msg=k)


def test_pipeline_checkpoint_fingerprint_guard(tmp_path):
    trainer = _small_setup(seed=3)
    payload = pipeline_payload(trainer.gen, trainer.disc, trainer.asr, trainer.norm_stats,
                               trainer.fbank_cfg, config_fingerprint="fp-A", step=4)
    save_checkpoint(payload, tmp_path / "pipe.ckpt")
    loaded = load_checkpoint(tmp_path / "pipe.ckpt")
    gen, disc, asr, stats, fb, meta = load_pipeline(loaded, expected_fingerprint="fp-A")
    assert meta["step"] == 4
    from robustasr.data import CheckpointError

    with pytest.raises(CheckpointError, match="fingerprint"):
        load_pipeline(loaded, expected_fingerprint="fp-B")


# -- MCT dataset -----------------------------------------------------------------


def _corpus_on_disk(tmp_path, n=10, seed=1):
    manifest, audio = synth_toy_corpus(n, seed=seed)
    write_corpus_audio(manifest, audio, tmp_path)
    return manifest


def test_mct_corrupts_exact_fraction(tmp_path):
    manifest = _corpus_on_disk(tmp_path, n=10)
    matched, _ = default_noise_bank()
    mct = build_mct_dataset(manifest, matched, seed=4, out_dir=tmp_path)
    corrupted = [r for r in mct.records if r.condition == "match"]
    clean = [r for r in mct.records if r.condition == "clean"]
    assert len(corrupted) == 9 and len(clean) == 1
    for rec in corrupted:
        assert 0.0 <= rec.snr_db <= 20.0
        assert rec.noise is not None


def test_mct_deterministic_per_seed(tmp_path):
    manifest = _corpus_on_disk(tmp_path, n=8)
    matched, _ = default_noise_bank()
    a = build_mct_dataset(manifest, matched, seed=11, out_dir=tmp_path)
    b = build_mct_dataset(manifest, matched, seed=11, out_dir=tmp_path)
    assert [(r.condition, r.noise, r.snr_db) for r in a.records] == [
        (r.condition, r.noise, r.snr_db) for r in b.records
    ]


def test_mct_rejects_empty_inputs(tmp_path):
    manifest = _corpus_on_disk(tmp_path, n=2)
    with pytest.raises(ValueError, match="empty"):
        build_mct_dataset(manifest, [], seed=0, out_dir=tmp_path)


# -- evaluation -----------------------------------------------------------------------


def test_evaluate_pipeline_deterministic_and_checks_missing(tmp_path):
    manifest = _corpus_on_disk(tmp_path, n=3, seed=6)
    trainer = _small_setup()
    manifests = {"clean": manifest}
    r1 = evaluate_pipeline(trainer.asr, trainer.norm_stats, trainer.fbank_cfg, manifests)
    r2 = evaluate_pipeline(trainer.asr, trainer.norm_stats, trainer.fbank_cfg, manifests)
    assert r1 == r2

    (tmp_path / manifest.records[0].audio).unlink()
    with pytest.raises(MissingAudioError, match=manifest.records[0].id):
        evaluate_pipeline(trainer.asr, trainer.norm_stats, trainer.fbank_cfg, manifests)


def test_evaluate_pipeline_rejects_empty_manifest():
    trainer = _small_setup()
    empty = DatasetManifest(records=[], vocab="abcdefghijkl")
    with pytest.raises(ValueError, match="empty"):
        evaluate_pipeline(trainer.asr, trainer.norm_stats, trainer.fbank_cfg, {"clean": empty})
