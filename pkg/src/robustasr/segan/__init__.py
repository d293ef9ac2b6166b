"""Self-attention enhancement GAN: nets, losses, pretraining, inference."""

from .attention import SelfAttentionLayer, sa_layer_forward
from .discriminator import Discriminator
from .enhance import (
    enhance_array_graph,
    enhance_chunks_graph,
    enhance_waveform,
    preemphasized_chunks,
)
from .generator import PAPER_FILTERS, TOY_FILTERS, Generator, SeganArch, toy_arch
from .losses import d_loss, g_loss, g_loss_parts
from .train import (
    SeganTrainConfig,
    chunk_pairs,
    discriminator_accuracy,
    segan_pretrain,
    toy_train_config,
)

__all__ = [
    "SelfAttentionLayer",
    "sa_layer_forward",
    "Discriminator",
    "enhance_array_graph",
    "enhance_chunks_graph",
    "enhance_waveform",
    "preemphasized_chunks",
    "PAPER_FILTERS",
    "TOY_FILTERS",
    "Generator",
    "SeganArch",
    "toy_arch",
    "d_loss",
    "g_loss",
    "g_loss_parts",
    "SeganTrainConfig",
    "chunk_pairs",
    "discriminator_accuracy",
    "segan_pretrain",
    "toy_train_config",
]
