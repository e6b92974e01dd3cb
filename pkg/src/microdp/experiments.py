"""End-to-end experiment drivers emitting deterministic JSON reports.

A run report is self-verifying: its privacy section embeds the full step
history, so the reported epsilon can be recomputed by the accountant, and
its attack section embeds the seeds it was produced from.
"""

from __future__ import annotations

import json
from dataclasses import replace
from pathlib import Path

from .accounting import PrivacyLedger, to_epsilon
from .attack import AttackSplit, attack_scores, auc, build_attack_records, train_attack_model
from .config import ExperimentConfig, config_from_dict, derive_seed
from .datasets import BlobDataset, generate_blobs
from .models import build_model, model_from_json
from .training import accuracy, train_model


def build_dataset(config: ExperimentConfig) -> BlobDataset:
    spec = config.dataset
    return generate_blobs(
        seed=config.dataset_seed(),
        size=spec.size,
        classes=spec.classes,
        dimension=spec.dimension,
        spread=spec.spread,
        label_noise=spec.label_noise,
    )


def run_training(config: ExperimentConfig, threads: int = 1) -> tuple[dict, dict]:
    """Train per the config; return (report, checkpoint) dicts.

    The report is bit-identical across runs and thread counts except for
    its "timing" section. The checkpoint holds the fitted weights plus the
    dataset spec, which regenerates the exact train/test split.
    """
    dataset = build_dataset(config)
    model = build_model(
        config.model,
        classes=dataset.classes,
        features=dataset.dimension,
        seed=config.stream_seed("model-init"),
        hidden=config.hidden,
    )
    dp = config.dp_config("noise") if config.is_private else None
    result = train_model(
        model,
        dataset.x_train,
        dataset.y_train,
        optimizer=config.optimizer,
        update=config.update,
        learning_rate=config.learning_rate,
        epochs=config.epochs,
        batch_size=config.batch_size,
        dp=dp,
        scale_floor=config.scale_floor,
        shuffle_seed=config.stream_seed("shuffle"),
        threads=threads,
    )
    report = {
        "config": config.to_dict(),
        "train": {
            "final_train_accuracy": accuracy(model, dataset.x_train, dataset.y_train),
            "final_test_accuracy": accuracy(model, dataset.x_test, dataset.y_test),
            "epoch_loss": result.epoch_loss,
            "grad_evaluations": result.grad_evaluations,
            "steps": result.steps,
            "scale_profile": result.profile.as_dict() if result.profile else None,
        },
        "timing": {
            "epoch_seconds": result.epoch_seconds,
            "total_seconds": sum(result.epoch_seconds),
        },
    }
    if config.is_private:
        if config.noise_multiplier > 0:
            report["privacy"] = result.ledger.to_json(config.delta)
        else:
            report["privacy"] = {
                "rho_total": None,
                "delta": config.delta,
                "epsilon": None,
                "log10_epsilon": None,
                "steps": [],
                "note": "noise_multiplier is 0 (clipping only); no finite guarantee",
            }
    checkpoint = {"model": model.to_json(), "dataset": dataset.spec()}
    return report, checkpoint


def save_run(report: dict, checkpoint: dict, report_path: str | Path) -> tuple[Path, Path]:
    """Write the report and its sibling checkpoint; link them by filename."""
    report_path = Path(report_path)
    report_path.parent.mkdir(parents=True, exist_ok=True)
    checkpoint_name = report_path.stem + ".ckpt.json"
    report["checkpoint"] = checkpoint_name
    checkpoint_path = report_path.parent / checkpoint_name
    checkpoint_path.write_text(json.dumps(checkpoint, sort_keys=True))
    report_path.write_text(json.dumps(report, indent=2, sort_keys=True))
    return report_path, checkpoint_path


def load_report(report_path: str | Path) -> dict:
    return json.loads(Path(report_path).read_text())


def recompute_epsilon(report: dict) -> float | None:
    """Recompute the report's epsilon from its embedded step history."""
    privacy = report.get("privacy")
    if not privacy or privacy.get("epsilon") is None:
        return None
    ledger = PrivacyLedger.from_json(privacy)
    return to_epsilon(ledger.rho_from_history(), privacy["delta"])


def _train_shadow(target_config: ExperimentConfig, dataset_spec: dict, attack_master: int):
    """Shadow model: target's exact recipe on a fresh same-parameter dataset."""
    shadow_config = replace(
        target_config,
        seed=derive_seed(attack_master, "shadow"),
        dataset=replace(
            target_config.dataset,
            seed=derive_seed(attack_master, "shadow-dataset"),
        ),
    )
    shadow_dataset = generate_blobs(
        seed=shadow_config.dataset_seed(),
        size=dataset_spec["size"],
        classes=dataset_spec["classes"],
        dimension=dataset_spec["dimension"],
        spread=dataset_spec["spread"],
        label_noise=dataset_spec["label_noise"],
    )
    shadow_model = build_model(
        shadow_config.model,
        classes=shadow_dataset.classes,
        features=shadow_dataset.dimension,
        seed=shadow_config.stream_seed("model-init"),
        hidden=shadow_config.hidden,
    )
    dp = shadow_config.dp_config("noise") if shadow_config.is_private else None
    train_model(
        shadow_model,
        shadow_dataset.x_train,
        shadow_dataset.y_train,
        optimizer=shadow_config.optimizer,
        update=shadow_config.update,
        learning_rate=shadow_config.learning_rate,
        epochs=shadow_config.epochs,
        batch_size=shadow_config.batch_size,
        dp=dp,
        scale_floor=shadow_config.scale_floor,
        shuffle_seed=shadow_config.stream_seed("shuffle"),
    )
    return shadow_model, shadow_dataset


def run_attack(target_report_path: str | Path, config: ExperimentConfig) -> dict:
    """Membership inference against a finished run; returns the amended report.

    The shadow model mirrors the recipe embedded in the target's report on a
    fresh dataset with identical generator parameters; `config.seed` is the
    attack-side master seed, so repeated attacks are identical.
    """
    target_report_path = Path(target_report_path)
    if not target_report_path.exists():
        raise FileNotFoundError(f"no-target: report not found: {target_report_path}")
    report = load_report(target_report_path)
    checkpoint_name = report.get("checkpoint")
    if not checkpoint_name:
        raise FileNotFoundError(f"no-target: report {target_report_path} names no checkpoint")
    checkpoint_path = target_report_path.parent / checkpoint_name
    if not checkpoint_path.exists():
        raise FileNotFoundError(f"no-target: checkpoint not found: {checkpoint_path}")
    checkpoint = json.loads(checkpoint_path.read_text())

    target_model = model_from_json(checkpoint["model"])
    target_dataset = generate_blobs(**checkpoint["dataset"])
    target_config = config_from_dict(report["config"])

    attack_master = config.seed
    shadow_model, shadow_dataset = _train_shadow(
        target_config, checkpoint["dataset"], attack_master
    )
    shadow_records = build_attack_records(shadow_model, AttackSplit.from_dataset(shadow_dataset))
    classifier = train_attack_model(shadow_records, seed=derive_seed(attack_master, "attack"))

    target_split = AttackSplit.from_dataset(target_dataset)
    records = build_attack_records(target_model, target_split)
    scores = attack_scores(classifier, records)
    labels = [r.is_member for r in records]
    auc_value = auc(list(zip(scores.tolist(), labels)))

    report["attack"] = {
        "auc": auc_value,
        "n_member": int(sum(labels)),
        "n_non_member": int(len(labels) - sum(labels)),
        "attack_master_seed": attack_master,
        "shadow_dataset_seed": derive_seed(attack_master, "shadow-dataset"),
        "shadow_model_seed": derive_seed(attack_master, "shadow"),
        "attack_model_seed": derive_seed(attack_master, "attack"),
    }
    return report
