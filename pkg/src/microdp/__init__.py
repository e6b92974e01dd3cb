"""Micro-batch differentially private SGD with per-layer scaling, decaying
Gaussian noise, zCDP accounting, and a membership-inference harness."""

from .accounting import (
    PrivacyLedger,
    epsilon_for_schedule,
    record_step,
    schedule_rho,
    step_rho,
    to_epsilon,
)
from .attack import AttackRecord, AttackSplit, attack_scores, auc, build_attack_records, train_attack_model
from .config import ConfigError, DatasetSpec, ExperimentConfig, config_from_dict, derive_seed, load_config
from .datasets import BlobDataset, generate_blobs
from .estimators import MembershipInferenceAttack, PrivateClassifier
from .gradients import GradientSet, l2_norm, linear_combine
from .models import Mlp2, SoftmaxRegressor, build_model, model_from_json
from .pipeline import (
    DpConfig,
    NoiseStreamKey,
    ScaleProfile,
    apply_scaling,
    calibrate_scales,
    clip_by_global_norm,
    decay_multiplier,
    dpsgd_reference_step,
    edp_step,
    gaussian_noise,
    partition_batch,
    scale_and_clip,
)
from .training import accuracy, train_model

__version__ = "0.1.0"

__all__ = [
    "AttackRecord",
    "AttackSplit",
    "BlobDataset",
    "ConfigError",
    "DatasetSpec",
    "DpConfig",
    "ExperimentConfig",
    "GradientSet",
    "MembershipInferenceAttack",
    "Mlp2",
    "NoiseStreamKey",
    "PrivacyLedger",
    "PrivateClassifier",
    "ScaleProfile",
    "SoftmaxRegressor",
    "accuracy",
    "apply_scaling",
    "attack_scores",
    "auc",
    "build_attack_records",
    "build_model",
    "calibrate_scales",
    "clip_by_global_norm",
    "config_from_dict",
    "decay_multiplier",
    "derive_seed",
    "dpsgd_reference_step",
    "edp_step",
    "epsilon_for_schedule",
    "gaussian_noise",
    "generate_blobs",
    "l2_norm",
    "linear_combine",
    "load_config",
    "model_from_json",
    "partition_batch",
    "record_step",
    "scale_and_clip",
    "schedule_rho",
    "step_rho",
    "to_epsilon",
    "train_attack_model",
    "train_model",
]
