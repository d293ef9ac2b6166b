"""Flat key-value experiment configuration with presets and provenance.

Config files are `key = value` lines with namespaced keys
(e.g. segan.lambda_l1).  Unknown keys are rejected by name.  Environment
variables override file values using the prefix ROBUSTASR_ and double
underscores for dots (ROBUSTASR_SEGAN__LAMBDA_L1=50).  The fully resolved
config is serialized alongside every run output.
"""

from __future__ import annotations

import hashlib
import os

ENV_PREFIX = "ROBUSTASR_"


class ConfigError(ValueError):
    pass


def _bool(s):
    if isinstance(s, bool):
        return s
    if str(s).lower() in ("1", "true", "yes", "on"):
        return True
    if str(s).lower() in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {s!r}")


# key -> (type constructor, toy default, paper default); None means unset
_SPEC = {
    "stage": (str, "", ""),
    "preset": (str, "toy", "paper"),
    "seed": (int, 0, 0),
    "out": (str, "runs", "runs"),
    "data": (str, "", ""),
    "paths.segan": (str, "", ""),
    "paths.asr": (str, "", ""),
    "paths.pipeline": (str, "", ""),
    "corpus.n_train": (int, 160, 2000),
    "corpus.n_dev": (int, 8, 200),
    "corpus.n_test": (int, 16, 200),
    "segan.lambda_l1": (float, 100.0, 100.0),
    "segan.lr": (float, 5e-4, 2e-4),
    "segan.batch": (int, 16, 50),
    "segan.epochs": (int, 14, 86),
    "segan.chunk_overlap": (float, 0.5, 0.5),
    "segan.b": (int, 8, 8),
    "segan.p": (int, 4, 4),
    "segan.attention_layer": (int, 3, 10),
    "segan.preemph": (float, 0.95, 0.95),
    "segan.ref_batch": (int, 4, 50),
    "segan.n_train_utts": (int, 16, 0),
    "asr.model": (str, "conformer", "conformer"),
    "asr.train_condition": (str, "clean", "clean"),
    "asr.epochs": (int, 40, 30),
    "asr.batch_utts": (int, 8, 32),
    "asr.k_prime": (float, 0.4, 10.0),
    "asr.warmup_n": (int, 400, 25000),
    "asr.ctc_weight": (float, 0.3, 0.3),
    "asr.dropout": (float, 0.0, 0.1),
    "asr.distance_penalty": (float, 0.0, 0.0),
    "fbank.with_deltas": (_bool, False, True),
    "joint.kappa": (float, 6.0, 6.0),
    "joint.gamma": (float, 3.0, 3.0),
    "joint.epochs": (int, 2, 10),
    "joint.batch_utts": (int, 4, 32),
    "joint.gen_lr": (float, 1e-4, 2e-4),
    "joint.disc_lr": (float, 1e-4, 2e-4),
    "joint.asr_lr": (float, 1e-4, 1e-4),
    "joint.freeze_generator": (_bool, False, False),
    "joint.freeze_discriminator": (_bool, False, False),
    "joint.freeze_asr": (_bool, False, False),
    "eval.beam": (int, 1, 12),
    "eval.alpha": (float, 1.0, 1.0),
    "eval.front_end": (_bool, False, False),
    "eval.arm": (str, "bare", "bare"),
    "eval.training_label": (str, "", ""),
    "enhance.input": (str, "", ""),
}

PRESETS = ("toy", "paper")


def default_config(preset="toy"):
    if preset not in PRESETS:
        raise ConfigError(f"unknown preset {preset!r} (expected one of {PRESETS})")
    idx = 1 if preset == "toy" else 2
    cfg = {key: spec[idx] for key, spec in _SPEC.items()}
    cfg["preset"] = preset
    return cfg


def _coerce(key, value):
    if key not in _SPEC:
        raise ConfigError(f"unknown config key: {key!r}")
    ctor = _SPEC[key][0]
    try:
        return ctor(value)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"bad value for {key!r}: {value!r} ({e})") from None


def parse_config_text(text):
    """key = value lines; '#' starts a comment; blank lines ignored."""
    out = {}
    for ln_no, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {ln_no}: expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in body.split("=", 1))
        out[key] = _coerce(key, value)
    return out


def env_overrides(environ=None):
    environ = os.environ if environ is None else environ
    out = {}
    for name, value in environ.items():
        if not name.startswith(ENV_PREFIX):
            continue
        key = name[len(ENV_PREFIX) :].lower().replace("__", ".")
        out[key] = _coerce(key, value)
    return out


def resolve_config(preset="toy", file_text=None, overrides=None, environ=None):
    """defaults(preset) <- file <- environment <- explicit overrides."""
    cfg = default_config(preset)
    if file_text is not None:
        file_cfg = parse_config_text(file_text)
        if file_cfg.get("preset", preset) != preset:
            cfg = default_config(file_cfg["preset"])
        cfg.update(file_cfg)
    cfg.update(env_overrides(environ))
    for key, value in (overrides or {}).items():
        cfg[key] = _coerce(key, value)
    return cfg


def serialize_config(cfg):
    lines = [f"{key} = {cfg[key]}" for key in sorted(cfg)]
    return "\n".join(lines) + "\n"


def config_hash(cfg):
    return hashlib.sha256(serialize_config(cfg).encode("utf-8")).hexdigest()[:12]
