"""Pipeline checkpoints: the three nets plus frozen feature statistics."""

from __future__ import annotations

from dataclasses import asdict

import numpy as np

from ..asr.model import AsrModel
from ..data import CheckpointPayload, check_architecture
from ..segan import Discriminator, Generator
from ..signal import FbankConfig, NormStats


def pipeline_payload(gen: Generator, disc: Discriminator, asr: AsrModel,
                     norm_stats: NormStats, fbank_cfg: FbankConfig,
                     config_fingerprint="", step=0) -> CheckpointPayload:
    tensors = {}
    for prefix, payload in (("generator", gen.to_payload()), ("discriminator", disc.to_payload()),
                            ("asr", asr.to_payload())):
        for name, arr in payload.tensors.items():
            tensors[f"{prefix}.{name}"] = arr
    tensors["norm.mean"] = norm_stats.mean
    tensors["norm.var"] = norm_stats.var
    architecture = {
        "kind": "pipeline",
        "generator": gen.architecture(),
        "discriminator": disc.architecture(),
        "asr": asr.architecture(),
        "fbank": asdict(fbank_cfg),
    }
    meta = {"config_fingerprint": config_fingerprint, "step": int(step)}
    return CheckpointPayload(architecture=architecture, tensors=tensors, meta=meta)


def _sub_payload(payload: CheckpointPayload, prefix, architecture):
    tensors = {
        name[len(prefix) + 1 :]: arr for name, arr in payload.tensors.items() if name.startswith(prefix + ".")
    }
    return CheckpointPayload(architecture=architecture, tensors=tensors, meta=payload.meta)


def load_pipeline(payload: CheckpointPayload, expected_fingerprint=None):
    """Rebuild (gen, disc, asr, norm_stats, fbank_cfg, meta) from a payload."""
    arch = payload.architecture
    if arch.get("kind") != "pipeline":
        raise ValueError("checkpoint does not hold a pipeline")
    if expected_fingerprint is not None:
        check_architecture({"config_fingerprint": expected_fingerprint},
                           {"config_fingerprint": payload.meta.get("config_fingerprint")},
                           context="pipeline resume")
    gen = Generator.from_payload(_sub_payload(payload, "generator", arch["generator"]))
    disc = Discriminator.from_payload(_sub_payload(payload, "discriminator", arch["discriminator"]))
    asr = AsrModel.from_payload(_sub_payload(payload, "asr", arch["asr"]))
    norm_stats = NormStats(mean=np.array(payload.tensors["norm.mean"]), var=np.array(payload.tensors["norm.var"]))
    fbank_cfg = FbankConfig(**arch["fbank"])
    return gen, disc, asr, norm_stats, fbank_cfg, payload.meta
