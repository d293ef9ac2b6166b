"""Config resolution, run-directory provenance, stage plumbing, report merge."""

import glob
from pathlib import Path

import numpy as np
import pytest

from robustasr.cli import EXIT_CONFIG, EXIT_MISSING_INPUT, EXIT_OK, main, report, run
from robustasr.config import (
    ConfigError,
    config_hash,
    default_config,
    parse_config_text,
    resolve_config,
    serialize_config,
)


# -- config --------------------------------------------------------------


def test_defaults_carry_paper_values():
    cfg = default_config("toy")
    assert cfg["joint.kappa"] == 6.0
    assert cfg["joint.gamma"] == 3.0
    assert cfg["asr.ctc_weight"] == 0.3
    assert cfg["segan.b"] == 8
    assert cfg["segan.p"] == 4
    assert cfg["segan.preemph"] == 0.95
    paper = default_config("paper")
    assert paper["eval.beam"] == 12
    assert paper["segan.attention_layer"] == 10
    assert paper["segan.batch"] == 50
    assert paper["segan.lr"] == 2e-4


def test_unknown_key_rejected_by_name():
    with pytest.raises(ConfigError, match="segan.lambda_l2"):
        parse_config_text("segan.lambda_l2 = 5")


def test_config_file_and_overrides():
    cfg = resolve_config(
        preset="toy",
        file_text="segan.lambda_l1 = 42.5\n# comment\njoint.gamma = 0\n",
        overrides={"seed": "7"},
    )
    assert cfg["segan.lambda_l1"] == 42.5
    assert cfg["joint.gamma"] == 0.0
    assert cfg["seed"] == 7


def test_env_overrides():
    cfg = resolve_config(preset="toy", environ={"ROBUSTASR_JOINT__KAPPA": "2.5", "HOME": "/x"})
    assert cfg["joint.kappa"] == 2.5


def test_serialize_roundtrip_and_hash_stability():
    cfg = default_config("toy")
    text = serialize_config(cfg)
    again = parse_config_text(text)
    assert {k: str(v) for k, v in cfg.items()} == {k: str(v) for k, v in again.items()}
    assert config_hash(cfg) == config_hash(dict(reversed(list(cfg.items()))))
    other = dict(cfg)
    other["seed"] = 1
    assert config_hash(cfg) != config_hash(other)


def test_bad_value_rejected():
    with pytest.raises(ConfigError, match="seed"):
        parse_config_text("seed = lots")


# -- cli global behavior ------------------------------------------------------


def test_unknown_set_key_exits_with_config_code(tmp_path):
    rc = main(["synth-data", "--out", str(tmp_path), "--set", "corpus.n_frobs=3"])
    assert rc == EXIT_CONFIG


def test_missing_input_exit_code(tmp_path):
    rc = main(["train-segan", "--out", str(tmp_path), "--set", "data=/definitely/not/here"])
    assert rc == EXIT_MISSING_INPUT


def test_run_writes_resolved_config(tmp_path):
    rc = main([
        "synth-data", "--out", str(tmp_path), "--seed", "5",
        "--set", "corpus.n_train=2", "--set", "corpus.n_dev=1", "--set", "corpus.n_test=2",
    ])
    assert rc == EXIT_OK
    run_dirs = list(tmp_path.glob("synth-data-*"))
    assert len(run_dirs) == 1
    resolved = (run_dirs[0] / "resolved.cfg").read_text()
    assert "corpus.n_train = 2" in resolved
    assert "seed = 5" in resolved
    for name in ("clean_train.jsonl", "clean_test.jsonl", "train_match.jsonl",
                 "train_mct.jsonl", "test_match.jsonl", "test_unmatch.jsonl"):
        assert (run_dirs[0] / name).exists(), name


def test_report_merges_and_flags_missing(tmp_path):
    a = tmp_path / "runA"
    b = tmp_path / "runB"
    for d, arm in ((a, "clean"), (b, "joint_gan")):
        d.mkdir()
        (d / "eval.csv").write_text(
            "arm,training,clean,match,unmatch\n" f"{arm},clean,0.1,0.5,0.6\n"
        )
    out = report([a, b], tmp_path / "rep")
    text = out.read_text()
    assert "clean,clean,0.1,0.5,0.6" in text
    assert "joint_gan" in text
    plot = (tmp_path / "rep" / "plot_cer.csv").read_text()
    assert "clean,match,0.5" in plot

    with pytest.raises(FileNotFoundError, match="no eval.csv"):
        report([tmp_path / "nothing"], tmp_path / "rep2")


def test_report_rejects_incompatible_schema(tmp_path):
    d = tmp_path / "runX"
    d.mkdir()
    (d / "eval.csv").write_text("arm,cer\nx,0.5\n")
    with pytest.raises(ValueError, match="schema"):
        report([d], tmp_path / "rep")


def test_report_identical_runs_merge_identically(tmp_path):
    rows = "arm,training,clean,match,unmatch\nmct,mct,0.05,0.10,0.12\n"
    dirs = []
    for name in ("r1", "r2"):
        d = tmp_path / name
        d.mkdir()
        (d / "eval.csv").write_text(rows)
        dirs.append(d)
    out = report(dirs, tmp_path / "rep")
    lines = out.read_text().strip().splitlines()
    assert lines[1] == lines[2] == "mct,mct,0.05,0.10,0.12"
