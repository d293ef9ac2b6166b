"""Experiment runner: synth-data, train-segan, train-asr, joint-train,
enhance, evaluate, report.

Every stage resolves its configuration (preset defaults, optional config
file, environment, --set overrides), writes artifacts under
<out>/<stage>-<confighash>/ together with the resolved config, and exits
nonzero on failure: 2 invalid config, 3 missing inputs, 4 NaN abort,
1 anything else.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from .asr import AsrTrainConfig, TokenVocab, build_asr_model, prepare_features, train_asr
from .asr.model import AsrModel
from .config import ConfigError, config_hash, resolve_config, serialize_config
from .data import (
    CheckpointPayload,
    DatasetManifest,
    default_noise_bank,
    load_checkpoint,
    save_checkpoint,
    synth_toy_corpus,
    write_corpus_audio,
    corrupt_split,
)
from .data.checkpoint import CheckpointError
from .diffcore import TrainingDiverged
from .joint import (
    JointConfig,
    JointTrainer,
    MissingAudioError,
    OptimizerSpec,
    build_mct_dataset,
    evaluate_pipeline,
    load_pipeline,
    pipeline_payload,
)
from .segan import (
    Discriminator,
    Generator,
    SeganArch,
    SeganTrainConfig,
    enhance_waveform,
    segan_pretrain,
    toy_arch,
)
from .signal import FbankConfig, NormStats, load_wav, save_wav

EXIT_OK = 0
EXIT_OTHER = 1
EXIT_CONFIG = 2
EXIT_MISSING_INPUT = 3
EXIT_NAN = 4

STAGES = ("synth-data", "train-segan", "train-asr", "joint-train", "enhance", "evaluate")


# -- small helpers -----------------------------------------------------------


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        writer.writerows(rows)


def _read_csv(path):
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        rows = list(reader)
    return rows[0], rows[1:]


def _require_file(path, what):
    if not path or not Path(path).exists():
        raise FileNotFoundError(f"{what} not found: {path!r}")
    return Path(path)


def _fbank_cfg(cfg):
    return FbankConfig(with_deltas=cfg["fbank.with_deltas"])


def _segan_arch(cfg):
    if cfg["preset"] == "toy":
        return toy_arch(attention_layers=(cfg["segan.attention_layer"],),
                        attn_b=cfg["segan.b"], attn_p=cfg["segan.p"])
    return SeganArch(attention_layers=(cfg["segan.attention_layer"],),
                     attn_b=cfg["segan.b"], attn_p=cfg["segan.p"])


def segan_payload(gen, disc, opt_g=None, opt_d=None, meta=None):
    tensors = {}
    for prefix, payload in (("generator", gen.to_payload()), ("discriminator", disc.to_payload())):
        for name, arr in payload.tensors.items():
            tensors[f"{prefix}.{name}"] = arr
    for prefix, opt in (("opt_g", opt_g), ("opt_d", opt_d)):
        if opt is not None:
            for name, arr in opt.state_dict().items():
                tensors[f"{prefix}.{name}"] = np.asarray(arr, dtype=np.float64)
    architecture = {"kind": "segan", "generator": gen.architecture(), "discriminator": disc.architecture()}
    return CheckpointPayload(architecture=architecture, tensors=tensors, meta=meta or {})


def load_segan(payload):
    arch = payload.architecture
    if arch.get("kind") != "segan":
        raise CheckpointError("checkpoint does not hold an enhancement GAN")

    def sub(prefix, sub_arch):
        tensors = {n[len(prefix) + 1 :]: a for n, a in payload.tensors.items() if n.startswith(prefix + ".")}
        return CheckpointPayload(architecture=sub_arch, tensors=tensors, meta=payload.meta)

    gen = Generator.from_payload(sub("generator", arch["generator"]))
    disc = Discriminator.from_payload(sub("discriminator", arch["discriminator"]))
    return gen, disc


def asr_payload(model, stats, fbank_cfg, meta=None):
    from dataclasses import asdict

    tensors = {f"asr.{n}": a for n, a in model.to_payload().tensors.items()}
    tensors["norm.mean"] = stats.mean
    tensors["norm.var"] = stats.var
    architecture = {"kind": "asr", "asr": model.architecture(), "fbank": asdict(fbank_cfg)}
    return CheckpointPayload(architecture=architecture, tensors=tensors, meta=meta or {})


def load_asr(payload):
    arch = payload.architecture
    if arch.get("kind") != "asr":
        raise CheckpointError("checkpoint does not hold an ASR model")
    tensors = {n[4:]: a for n, a in payload.tensors.items() if n.startswith("asr.")}
    model = AsrModel.from_payload(CheckpointPayload(architecture=arch["asr"], tensors=tensors, meta=payload.meta))
    stats = NormStats(mean=np.array(payload.tensors["norm.mean"]), var=np.array(payload.tensors["norm.var"]))
    return model, stats, FbankConfig(**arch["fbank"])


def _load_generator_for(cfg):
    """Generator (and stats source preference) from pipeline or segan paths."""
    if cfg["paths.pipeline"]:
        payload = load_checkpoint(_require_file(cfg["paths.pipeline"], "pipeline checkpoint"))
        gen, _, asr, stats, fb, _ = load_pipeline(payload)
        return gen, (asr, stats, fb)
    payload = load_checkpoint(_require_file(cfg["paths.segan"], "segan checkpoint"))
    gen, _ = load_segan(payload)
    return gen, None


# -- stages ---------------------------------------------------------------------


def stage_synth_data(cfg, run_dir):
    seed = cfg["seed"]
    matched, unmatched = default_noise_bank(seed=seed)
    manifests = {}
    for split, n in (("train", cfg["corpus.n_train"]), ("dev", cfg["corpus.n_dev"]), ("test", cfg["corpus.n_test"])):
        manifest, audio = synth_toy_corpus(n, seed=seed, split=split)
        write_corpus_audio(manifest, audio, run_dir, subdir=f"audio/clean_{split}")
        manifest.save(run_dir / f"clean_{split}.jsonl")
        manifests[split] = manifest

    corrupt_split(manifests["train"], matched, "match", seed=seed + 1, out_dir=run_dir).save(
        run_dir / "train_match.jsonl"
    )
    build_mct_dataset(manifests["train"], matched, seed=seed + 2, out_dir=run_dir).save(
        run_dir / "train_mct.jsonl"
    )
    test_match = corrupt_split(manifests["test"], matched, "match", seed=seed + 3, out_dir=run_dir)
    # distinct audio directory per condition: corrupt_split writes under
    # audio/<condition>, so rename in-manifest paths via a dedicated out dir
    test_match.save(run_dir / "test_match.jsonl")
    corrupt_split(manifests["test"], unmatched, "unmatch", seed=seed + 4, out_dir=run_dir).save(
        run_dir / "test_unmatch.jsonl"
    )
    return {"data": str(run_dir)}


def _paired_waveforms(data_dir, noisy_manifest_name):
    clean = DatasetManifest.load(Path(data_dir) / "clean_train.jsonl")
    noisy = DatasetManifest.load(Path(data_dir) / noisy_manifest_name)
    by_id = {r.id: r for r in noisy.records}
    pairs = []
    for rec in clean.records:
        if rec.id not in by_id:
            raise FileNotFoundError(f"utterance {rec.id} missing from {noisy_manifest_name}")
        pairs.append((clean.load_audio(rec), noisy.load_audio(by_id[rec.id])))
    return clean, noisy, pairs


def stage_train_segan(cfg, run_dir):
    data_dir = _require_file(cfg["data"], "data directory")
    _, _, pairs = _paired_waveforms(data_dir, "train_match.jsonl")
    if cfg["segan.n_train_utts"] > 0:
        pairs = pairs[: cfg["segan.n_train_utts"]]
    train_cfg = SeganTrainConfig(
        arch=_segan_arch(cfg),
        lambda_l1=cfg["segan.lambda_l1"],
        lr=cfg["segan.lr"],
        batch=cfg["segan.batch"],
        epochs=cfg["segan.epochs"],
        chunk_overlap_train=cfg["segan.chunk_overlap"],
        preemph=cfg["segan.preemph"],
        seed=cfg["seed"],
        ref_batch=cfg["segan.ref_batch"],
    )
    history = []
    gen, disc, history = segan_pretrain(pairs, train_cfg, log_fn=lambda row: print(f"[train-segan] {row}"))
    save_checkpoint(segan_payload(gen, disc, meta={"epochs": train_cfg.epochs, "seed": cfg["seed"]}),
                    run_dir / "segan.ckpt")
    _write_csv(run_dir / "losses.csv", ["epoch", "d_loss", "g_loss_adv", "g_loss_l1"],
               [[r["epoch"], r["d_loss"], r["g_loss_adv"], r["g_loss_l1"]] for r in history])
    return {"segan": str(run_dir / "segan.ckpt")}


def stage_train_asr(cfg, run_dir):
    data_dir = _require_file(cfg["data"], "data directory")
    condition = cfg["asr.train_condition"]
    manifest_name = {"clean": "clean_train.jsonl", "mct": "train_mct.jsonl"}.get(condition)
    if manifest_name is None:
        raise ConfigError(f"asr.train_condition must be clean or mct, got {condition!r}")
    manifest = DatasetManifest.load(Path(data_dir) / manifest_name)
    vocab = TokenVocab(manifest.vocab)
    fb = _fbank_cfg(cfg)
    items, stats = prepare_features(manifest, fb, vocab)
    model = build_asr_model(
        cfg["asr.model"], cfg["preset"], vocab, fb.dim, np.random.default_rng(cfg["seed"]),
        ctc_weight=cfg["asr.ctc_weight"], dropout=cfg["asr.dropout"],
        **({"distance_penalty": cfg["asr.distance_penalty"]} if cfg["asr.model"] == "transformer" else {}),
    )
    train_cfg = AsrTrainConfig(
        epochs=cfg["asr.epochs"], batch_utts=cfg["asr.batch_utts"], k_prime=cfg["asr.k_prime"],
        warmup_n=cfg["asr.warmup_n"], seed=cfg["seed"],
    )
    history = train_asr(model, items, train_cfg, log_fn=lambda row: print(f"[train-asr] {row}"))
    save_checkpoint(asr_payload(model, stats, fb, meta={"condition": condition, "seed": cfg["seed"]}),
                    run_dir / "asr.ckpt")
    _write_csv(run_dir / "losses.csv", ["epoch", "loss_per_token", "lr"],
               [[r["epoch"], r["loss_per_token"], r["lr"]] for r in history])
    return {"asr": str(run_dir / "asr.ckpt")}


def stage_joint_train(cfg, run_dir):
    data_dir = _require_file(cfg["data"], "data directory")
    gen, disc = load_segan(load_checkpoint(_require_file(cfg["paths.segan"], "segan checkpoint")))
    asr, stats, fb = load_asr(load_checkpoint(_require_file(cfg["paths.asr"], "asr checkpoint")))
    clean, noisy, pairs = _paired_waveforms(data_dir, "train_mct.jsonl")
    vocab = TokenVocab(clean.vocab)
    triples = [(c.samples, n.samples, vocab.encode(rec.transcript))
               for (c, n), rec in zip(pairs, clean.records)]
    joint_cfg = JointConfig(
        kappa=cfg["joint.kappa"], gamma=cfg["joint.gamma"], lambda_l1=cfg["segan.lambda_l1"],
        preemph=cfg["segan.preemph"], epochs=cfg["joint.epochs"], batch_utts=cfg["joint.batch_utts"],
        seed=cfg["seed"],
        freeze_generator=cfg["joint.freeze_generator"],
        freeze_discriminator=cfg["joint.freeze_discriminator"],
        freeze_asr=cfg["joint.freeze_asr"],
        gen_opt=OptimizerSpec("rmsprop", cfg["joint.gen_lr"]),
        disc_opt=OptimizerSpec("rmsprop", cfg["joint.disc_lr"]),
        asr_opt=OptimizerSpec("adam", cfg["joint.asr_lr"]),
    )
    trainer = JointTrainer(gen, disc, asr, stats, fb, joint_cfg)
    history = trainer.train(triples, log_fn=lambda row: print(f"[joint-train] {row}"))
    fingerprint = config_hash(cfg)
    save_checkpoint(
        pipeline_payload(gen, disc, asr, stats, fb, config_fingerprint=fingerprint, step=trainer.step_count),
        run_dir / "pipeline.ckpt",
    )
    _write_csv(run_dir / "losses.csv", ["epoch", "l_asr", "l_enh", "l_gan", "total"],
               [[r["epoch"], r["l_asr"], r["l_enh"], r["l_gan"], r["total"]] for r in history])
    return {"pipeline": str(run_dir / "pipeline.ckpt")}


def stage_enhance(cfg, run_dir):
    gen, _ = _load_generator_for(cfg)
    src = _require_file(cfg["enhance.input"], "enhance input")
    out_rows = []
    if src.suffix == ".jsonl":
        manifest = DatasetManifest.load(src)
        missing = manifest.missing_audio()
        if missing:
            raise MissingAudioError(f"missing audio files: {missing}")
        (run_dir / "audio").mkdir(exist_ok=True)
        for rec in manifest.records:
            wav = manifest.load_audio(rec)
            out = enhance_waveform(wav, gen, seed=cfg["seed"], preemph=cfg["segan.preemph"])
            save_wav(run_dir / "audio" / f"{rec.id}.wav", out)
            out_rows.append([rec.id, f"audio/{rec.id}.wav"])
        _write_csv(run_dir / "enhanced.csv", ["id", "audio"], out_rows)
    else:
        wav = load_wav(src)
        wav.id = src.stem
        out = enhance_waveform(wav, gen, seed=cfg["seed"], preemph=cfg["segan.preemph"])
        save_wav(run_dir / f"{src.stem}_enhanced.wav", out)
    return {"enhanced": str(run_dir)}


def stage_evaluate(cfg, run_dir):
    data_dir = _require_file(cfg["data"], "data directory")
    use_front_end = cfg["eval.front_end"]
    gen = None
    asr = stats = fb = None
    if cfg["paths.pipeline"]:
        gen, disc, asr, stats, fb, _ = load_pipeline(
            load_checkpoint(_require_file(cfg["paths.pipeline"], "pipeline checkpoint"))
        )
    else:
        asr, stats, fb = load_asr(load_checkpoint(_require_file(cfg["paths.asr"], "asr checkpoint")))
        if use_front_end:
            gen, _ = load_segan(load_checkpoint(_require_file(cfg["paths.segan"], "segan checkpoint")))

    manifests = {}
    for cond, name in (("clean", "clean_test.jsonl"), ("match", "test_match.jsonl"), ("unmatch", "test_unmatch.jsonl")):
        path = Path(data_dir) / name
        if path.exists():
            manifests[cond] = DatasetManifest.load(path)
    if not manifests:
        raise FileNotFoundError(f"no test manifests under {data_dir}")

    clean_refs = None
    if "clean" in manifests:
        clean_refs = {rec.id: manifests["clean"].load_audio(rec) for rec in manifests["clean"].records}

    result = evaluate_pipeline(
        asr, stats, fb, manifests, gen=gen, use_front_end=use_front_end,
        beam=cfg["eval.beam"], alpha=cfg["eval.alpha"], enhance_seed=cfg["seed"],
        clean_refs=clean_refs if use_front_end else None,
    )
    conds = result["conditions"]
    training = cfg["eval.training_label"] or cfg["asr.train_condition"]
    row = [cfg["eval.arm"], training] + [
        ("" if cond not in conds else f"{conds[cond]['cer']:.6f}") for cond in ("clean", "match", "unmatch")
    ]
    _write_csv(run_dir / "eval.csv", ["arm", "training", "clean", "match", "unmatch"], [row])
    _write_csv(run_dir / "per_utterance.csv", ["condition", "id", "hyp", "ref", "cer"],
               [[r["condition"], r["id"], r["hyp"], r["ref"], f"{r['cer']:.6f}"] for r in result["rows"]])
    if use_front_end:
        _write_csv(run_dir / "ssnr.csv", ["arm", "condition", "ssnr_db"],
                   [[cfg["eval.arm"], cond, "" if v["ssnr_db"] is None else f"{v['ssnr_db']:.4f}"]
                    for cond, v in conds.items()])
    for cond in ("clean", "match", "unmatch"):
        if cond in conds:
            print(f"[evaluate] {cfg['eval.arm']} {cond}: CER {conds[cond]['cer']:.4f}")
    return {"eval": str(run_dir / "eval.csv")}


_STAGE_FNS = {
    "synth-data": stage_synth_data,
    "train-segan": stage_train_segan,
    "train-asr": stage_train_asr,
    "joint-train": stage_joint_train,
    "enhance": stage_enhance,
    "evaluate": stage_evaluate,
}


def run(stage, cfg):
    """Execute one stage; returns (run_dir, artifact dict)."""
    if stage not in _STAGE_FNS:
        raise ConfigError(f"unknown stage {stage!r}")
    cfg = dict(cfg)
    cfg["stage"] = stage
    run_dir = Path(cfg["out"]) / f"{stage}-{config_hash(cfg)}"
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / "resolved.cfg").write_text(serialize_config(cfg), encoding="utf-8")
    artifacts = _STAGE_FNS[stage](cfg, run_dir)
    return run_dir, artifacts


def report(run_dirs, out_dir):
    """Merge evaluation CSVs across runs into one table plus plot data files."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    merged = []
    ssnr_rows = []
    expected_header = ["arm", "training", "clean", "match", "unmatch"]
    for rd in run_dirs:
        eval_path = Path(rd) / "eval.csv"
        if not eval_path.exists():
            raise FileNotFoundError(f"run directory {rd} has no eval.csv")
        header, rows = _read_csv(eval_path)
        if header != expected_header:
            raise ValueError(f"{eval_path}: incompatible schema {header} (expected {expected_header})")
        merged.extend(rows)
        ssnr_path = Path(rd) / "ssnr.csv"
        if ssnr_path.exists():
            _, srows = _read_csv(ssnr_path)
            ssnr_rows.extend(srows)
    _write_csv(out_dir / "report.csv", expected_header, merged)
    plot_rows = []
    for arm, training, *cers in merged:
        for cond, value in zip(("clean", "match", "unmatch"), cers):
            if value:
                plot_rows.append([arm, cond, value])
    _write_csv(out_dir / "plot_cer.csv", ["arm", "condition", "cer"], plot_rows)
    if ssnr_rows:
        _write_csv(out_dir / "plot_ssnr.csv", ["arm", "condition", "ssnr_db"], ssnr_rows)
    return out_dir / "report.csv"


# -- argument parsing -------------------------------------------------------------


def _build_parser():
    parser = argparse.ArgumentParser(prog="robustasr", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for stage in STAGES:
        p = sub.add_parser(stage, help=f"run the {stage} stage")
        p.add_argument("--config", help="config file (key = value lines)")
        p.add_argument("--preset", default=None, choices=("toy", "paper"))
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", default=None, help="output root for run directories")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override any config key (repeatable)")
    p = sub.add_parser("report", help="merge evaluation outputs of several runs")
    p.add_argument("run_dirs", nargs="+")
    p.add_argument("--out", default="report")
    return parser


def _resolve_from_args(args):
    overrides = {}
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        overrides[key.strip()] = value.strip()
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out is not None:
        overrides["out"] = args.out
    file_text = None
    if args.config:
        file_text = _require_file(args.config, "config file").read_text(encoding="utf-8")
    preset = args.preset or "toy"
    return resolve_config(preset=preset, file_text=file_text, overrides=overrides)


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "report":
            path = report(args.run_dirs, args.out)
            print(f"[report] wrote {path}")
            return EXIT_OK
        cfg = _resolve_from_args(args)
        run_dir, artifacts = run(args.command, cfg)
        print(f"[{args.command}] run dir: {run_dir}")
        for key, value in artifacts.items():
            print(f"[{args.command}] {key}: {value}")
        return EXIT_OK
    except ConfigError as e:
        print(f"error: invalid configuration: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (FileNotFoundError, MissingAudioError, CheckpointError) as e:
        print(f"error: missing or unusable input: {e}", file=sys.stderr)
        return EXIT_MISSING_INPUT
    except TrainingDiverged as e:
        print(f"error: training diverged: {e}", file=sys.stderr)
        return EXIT_NAN
    except Exception as e:  # pragma: no cover - defensive
        print(f"error: {e}", file=sys.stderr)
        return EXIT_OTHER


if __name__ == "__main__":
    sys.exit(main())
