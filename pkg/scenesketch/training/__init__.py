"""Losses, networks, schedules, augmentation and checkpoints for sketch training."""
from scenesketch.training.augment import AugmentParams, PairedAugmenter
from scenesketch.training.checkpoint import load_checkpoint, save_checkpoint
from scenesketch.training.losses import (
    GradNormBalancer,
    clip_loss,
    gradnorm_weights,
    ratio_loss,
    simp_objective,
    sparse_loss,
)
from scenesketch.training.networks import LocNet, SimpNet, predict_offsets, predict_probabilities
from scenesketch.training.scheduler import build_schedule, default_steps, initial_factor

__all__ = [
    "AugmentParams",
    "PairedAugmenter",
    "load_checkpoint",
    "save_checkpoint",
    "GradNormBalancer",
    "clip_loss",
    "gradnorm_weights",
    "ratio_loss",
    "simp_objective",
    "sparse_loss",
    "LocNet",
    "SimpNet",
    "predict_offsets",
    "predict_probabilities",
    "build_schedule",
    "default_steps",
    "initial_factor",
]
