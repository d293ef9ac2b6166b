"""Synthetic corpus, parametric noise bank, manifests, checkpoint persistence."""

from .checkpoint import (
    FORMAT_VERSION,
    CheckpointError,
    CheckpointPayload,
    check_architecture,
    load_checkpoint,
    save_checkpoint,
)
from .corpus import (
    WORD_SYMBOLS,
    detect_transcript,
    render_transcript,
    symbol_pattern,
    synth_toy_corpus,
)
from .manifest import (
    DatasetManifest,
    UtteranceRecord,
    corrupt_split,
    write_corpus_audio,
)
from .noise import (
    MATCHED_FAMILIES,
    UNMATCHED_FAMILIES,
    NoiseSpec,
    default_noise_bank,
    synth_noise,
)

__all__ = [
    "FORMAT_VERSION",
    "CheckpointError",
    "CheckpointPayload",
    "check_architecture",
    "load_checkpoint",
    "save_checkpoint",
    "WORD_SYMBOLS",
    "detect_transcript",
    "render_transcript",
    "symbol_pattern",
    "synth_toy_corpus",
    "DatasetManifest",
    "UtteranceRecord",
    "corrupt_split",
    "write_corpus_audio",
    "MATCHED_FAMILIES",
    "UNMATCHED_FAMILIES",
    "NoiseSpec",
    "default_noise_bank",
    "synth_noise",
]
