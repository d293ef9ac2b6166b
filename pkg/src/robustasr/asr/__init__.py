"""Transformer/Conformer ASR: attention, blocks, losses, decoding, training."""

from .attention import (
    MultiHeadAttention,
    causal_mask,
    distance_penalty_mask,
    positional_encoding,
    scaled_dot_attention,
)
from .conformer import (
    ConformerBlock,
    ConformerConfig,
    ConformerConvModule,
    ConformerEncoder,
    SubsampleConv,
    depthwise_conv1d,
    toy_conformer_config,
)
from .decode import Hypothesis, beam_decode, greedy_decode
from .losses import CtcAlignmentError, ce_loss, ctc_loss, ctc_min_frames, joint_asr_loss
from .model import AsrModel, build_asr_model
from .train import AsrTrainConfig, TrainingDiverged, dataset_cer, prepare_features, train_asr
from .transformer import (
    FeedForward,
    TransformerConfig,
    TransformerDecoder,
    TransformerEncoder,
    ffn,
    toy_transformer_config,
)
from .vocab import TokenVocab, cer, levenshtein

__all__ = [
    "MultiHeadAttention",
    "causal_mask",
    "distance_penalty_mask",
    "positional_encoding",
    "scaled_dot_attention",
    "ConformerBlock",
    "ConformerConfig",
    "ConformerConvModule",
    "ConformerEncoder",
    "SubsampleConv",
    "depthwise_conv1d",
    "toy_conformer_config",
    "Hypothesis",
    "beam_decode",
    "greedy_decode",
    "CtcAlignmentError",
    "ce_loss",
    "ctc_loss",
    "ctc_min_frames",
    "joint_asr_loss",
    "AsrModel",
    "build_asr_model",
    "AsrTrainConfig",
    "TrainingDiverged",
    "dataset_cer",
    "prepare_features",
    "train_asr",
    "FeedForward",
    "TransformerConfig",
    "TransformerDecoder",
    "TransformerEncoder",
    "ffn",
    "toy_transformer_config",
    "TokenVocab",
    "cer",
    "levenshtein",
]
