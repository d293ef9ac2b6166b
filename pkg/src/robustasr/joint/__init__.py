"""Joint training of enhancement, features, and recognition with a GAN guide."""

from .evaluate import MissingAudioError, evaluate_pipeline
from .mct import build_mct_dataset
from .pipeline import load_pipeline, pipeline_payload
from .trainer import JointConfig, JointTrainer, OptimizerSpec, joint_loss

__all__ = [
    "MissingAudioError",
    "evaluate_pipeline",
    "build_mct_dataset",
    "load_pipeline",
    "pipeline_payload",
    "JointConfig",
    "JointTrainer",
    "OptimizerSpec",
    "joint_loss",
]
