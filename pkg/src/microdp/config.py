"""Experiment configuration: TOML loading, validation, and seed derivation."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, replace
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .pipeline import DECAY_KINDS, DpConfig
from .training import OPTIMIZERS, UPDATE_RULES

_MAX_SEED = 2**64


class ConfigError(ValueError):
    """Invalid experiment configuration; message carries field diagnostics."""


def derive_seed(master: int, label: str) -> int:
    """Stable 64-bit sub-seed for one named random stream of a run."""
    digest = hashlib.sha256(f"{master}:{label}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


@dataclass(frozen=True)
class DatasetSpec:
    size: int
    classes: int
    dimension: int
    spread: float
    label_noise: float = 0.0
    seed: int | None = None

    def train_size(self) -> int:
        base, remainder = divmod(self.size, self.classes)
        counts = [base + (1 if c < remainder else 0) for c in range(self.classes)]
        return sum(count // 2 for count in counts)


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int
    dataset: DatasetSpec
    model: str = "softmax"
    hidden: int = 32
    optimizer: str = "sgd"
    update: str = "adam"
    learning_rate: float = 0.01
    epochs: int = 50
    batch_size: int = 256
    clip_norm: float = 1.0
    noise_multiplier: float = 0.0
    decay: str = "none"
    decay_rate: float = 0.0
    workers: int = 1
    scale_floor: float = 1e-3
    delta: float = 1e-5
    report_path: str = "report.json"

    @property
    def is_private(self) -> bool:
        return self.optimizer in ("dpsgd", "edpsgd")

    def dataset_seed(self) -> int:
        if self.dataset.seed is not None:
            return self.dataset.seed
        return derive_seed(self.seed, "dataset")

    def stream_seed(self, label: str) -> int:
        return derive_seed(self.seed, label)

    def dp_config(self, noise_seed_label: str = "noise") -> DpConfig:
        return DpConfig(
            clip_norm=self.clip_norm,
            noise_multiplier=self.noise_multiplier,
            decay=self.decay,
            decay_rate=self.decay_rate,
            workers=self.workers,
            seed=self.stream_seed(noise_seed_label),
        )

    def with_overrides(self, seed: int | None = None, report_path: str | None = None):
        cfg = self
        if seed is not None:
            cfg = replace(cfg, seed=seed)
        if report_path is not None:
            cfg = replace(cfg, report_path=report_path)
        return cfg

    def to_dict(self) -> dict:
        payload = {
            "seed": self.seed,
            "dataset": {
                "size": self.dataset.size,
                "classes": self.dataset.classes,
                "dimension": self.dataset.dimension,
                "spread": self.dataset.spread,
                "label_noise": self.dataset.label_noise,
                "seed": self.dataset_seed(),
            },
            "model": {"kind": self.model, "hidden": self.hidden},
            "train": {
                "optimizer": self.optimizer,
                "update": self.update,
                "learning_rate": self.learning_rate,
                "epochs": self.epochs,
                "batch_size": self.batch_size,
            },
            "output": {"report": self.report_path},
        }
        if self.is_private:
            payload["dp"] = {
                "clip_norm": self.clip_norm,
                "noise_multiplier": self.noise_multiplier,
                "decay": self.decay,
                "decay_rate": self.decay_rate,
                "workers": self.workers,
                "scale_floor": self.scale_floor,
            }
            payload["privacy"] = {"delta": self.delta}
        return payload


_SECTION_KEYS = {
    "dataset": {"size", "classes", "dimension", "spread", "label_noise", "seed"},
    "model": {"kind", "hidden"},
    "train": {"optimizer", "update", "learning_rate", "epochs", "batch_size"},
    "dp": {"clip_norm", "noise_multiplier", "decay", "decay_rate", "workers", "scale_floor"},
    "privacy": {"delta"},
    "output": {"report"},
}


def config_from_dict(raw: dict) -> ExperimentConfig:
    problems: list[str] = []

    for key in raw:
        if key != "seed" and key not in _SECTION_KEYS:
            problems.append(f"unknown section [{key}]")
    for section, allowed in _SECTION_KEYS.items():
        for key in raw.get(section, {}):
            if key not in allowed:
                problems.append(f"unknown key {section}.{key}")

    def pick(section: str, key: str, default=None):
        return raw.get(section, {}).get(key, default)

    seed = raw.get("seed", 0)
    if not isinstance(seed, int) or not 0 <= seed < _MAX_SEED:
        problems.append("seed must be an integer in [0, 2^64)")
        seed = 0

    ds = raw.get("dataset")
    if not isinstance(ds, dict):
        problems.append("missing [dataset] section")
        ds = {}
    size = ds.get("size", 0)
    classes = ds.get("classes", 0)
    dimension = ds.get("dimension", 0)
    spread = ds.get("spread", 1.0)
    label_noise = ds.get("label_noise", 0.0)
    if not (isinstance(classes, int) and classes >= 2):
        problems.append("dataset.classes must be an integer >= 2")
    if not (isinstance(size, int) and size >= max(classes, 2)):
        problems.append("dataset.size must be an integer >= dataset.classes")
    if not (isinstance(dimension, int) and dimension >= 1):
        problems.append("dataset.dimension must be an integer >= 1")
    if not spread > 0:
        problems.append("dataset.spread must be > 0")
    if not 0 <= label_noise < 1:
        problems.append("dataset.label_noise must be in [0, 1)")

    model = pick("model", "kind", "softmax")
    hidden = pick("model", "hidden", 32)
    if model not in ("softmax", "mlp"):
        problems.append("model.kind must be 'softmax' or 'mlp'")
    if not (isinstance(hidden, int) and hidden >= 1):
        problems.append("model.hidden must be an integer >= 1")

    optimizer = pick("train", "optimizer", "sgd")
    update = pick("train", "update", "adam")
    learning_rate = pick("train", "learning_rate", 0.01)
    epochs = pick("train", "epochs", 50)
    batch_size = pick("train", "batch_size", 256)
    if optimizer not in OPTIMIZERS:
        problems.append(f"train.optimizer must be one of {OPTIMIZERS}")
    if update not in UPDATE_RULES:
        problems.append(f"train.update must be one of {UPDATE_RULES}")
    if not learning_rate > 0:
        problems.append("train.learning_rate must be > 0")
    if not (isinstance(epochs, int) and epochs >= 1):
        problems.append("train.epochs must be an integer >= 1")
    if not (isinstance(batch_size, int) and batch_size >= 1):
        problems.append("train.batch_size must be an integer >= 1")

    clip_norm = pick("dp", "clip_norm", 1.0)
    noise_multiplier = pick("dp", "noise_multiplier", 0.0)
    decay = pick("dp", "decay", "none")
    decay_rate = pick("dp", "decay_rate", 0.0)
    workers = pick("dp", "workers", 1)
    scale_floor = pick("dp", "scale_floor", 1e-3)
    if optimizer in ("dpsgd", "edpsgd"):
        if not clip_norm > 0:
            problems.append("dp.clip_norm must be > 0")
        if noise_multiplier < 0:
            problems.append("dp.noise_multiplier must be >= 0")
        if decay not in DECAY_KINDS:
            problems.append(f"dp.decay must be one of {DECAY_KINDS}")
        if decay_rate < 0:
            problems.append("dp.decay_rate must be >= 0")
        if not (isinstance(workers, int) and workers >= 1):
            problems.append("dp.workers must be an integer >= 1")
        if not 0 < scale_floor <= 1:
            problems.append("dp.scale_floor must be in (0, 1]")
        if optimizer == "dpsgd" and decay != "none":
            problems.append("dp.decay must be 'none' for the per-example reference optimizer")
        if optimizer == "edpsgd" and isinstance(workers, int) and isinstance(batch_size, int):
            if batch_size < workers:
                problems.append("train.batch_size must be >= dp.workers")

    delta = pick("privacy", "delta", 1e-5)
    if not 0 < delta < 1:
        problems.append("privacy.delta must be in (0, 1)")

    report_path = pick("output", "report", "report.json")
    if not isinstance(report_path, str) or not report_path:
        problems.append("output.report must be a non-empty path")

    dataset_seed = ds.get("seed")
    if dataset_seed is not None and not (
        isinstance(dataset_seed, int) and 0 <= dataset_seed < _MAX_SEED
    ):
        problems.append("dataset.seed must be an integer in [0, 2^64)")
        dataset_seed = None

    if isinstance(size, int) and isinstance(classes, int) and isinstance(batch_size, int):
        if classes >= 2 and size >= classes:
            spec = DatasetSpec(size, classes, dimension, spread, label_noise, dataset_seed)
            if batch_size > spec.train_size():
                problems.append(
                    f"train.batch_size {batch_size} exceeds the training split "
                    f"size {spec.train_size()}"
                )

    if problems:
        raise ConfigError("bad-config: " + "; ".join(problems))

    return ExperimentConfig(
        seed=seed,
        dataset=DatasetSpec(
            size=size,
            classes=classes,
            dimension=dimension,
            spread=float(spread),
            label_noise=float(label_noise),
            seed=dataset_seed,
        ),
        model=model,
        hidden=hidden,
        optimizer=optimizer,
        update=update,
        learning_rate=float(learning_rate),
        epochs=epochs,
        batch_size=batch_size,
        clip_norm=float(clip_norm),
        noise_multiplier=float(noise_multiplier),
        decay=decay,
        decay_rate=float(decay_rate),
        workers=workers,
        scale_floor=float(scale_floor),
        delta=float(delta),
        report_path=report_path,
    )


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"bad-config: config file not found: {path}")
    try:
        raw = tomllib.loads(path.read_text())
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"bad-config: cannot parse {path}: {exc}") from exc
    return config_from_dict(raw)
