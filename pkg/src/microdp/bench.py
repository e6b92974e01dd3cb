"""Wall-time comparison of the three gradient pipelines on identical work."""

from __future__ import annotations

import statistics
from dataclasses import replace

from .config import ExperimentConfig
from .experiments import build_dataset
from .models import build_model
from .training import train_model

OPTIMIZER_ORDER = ("sgd", "dpsgd", "edpsgd")


def run_bench(config: ExperimentConfig, repetitions: int = 5, threads: int = 1) -> dict:
    """Median one-epoch wall time and gradient-evaluation counts per optimizer.

    Every optimizer sees the same dataset, initial weights and batch order;
    each repetition restarts from fresh weights so the timed work is
    identical. Factors are relative to plain sgd.
    """
    if repetitions < 3:
        raise ValueError(f"bad-config: repetitions must be >= 3, got {repetitions}")
    dataset = build_dataset(config)
    batches = len(dataset.x_train) // config.batch_size
    out: dict = {
        "batch_size": config.batch_size,
        "batches_per_epoch": batches,
        "workers": config.workers,
        "model": config.model,
        "repetitions": repetitions,
        "optimizers": {},
    }
    for optimizer in OPTIMIZER_ORDER:
        dp = None
        if optimizer != "sgd":
            # The per-example reference keeps its noise constant.
            base = config if optimizer == "edpsgd" else replace(config, decay="none", decay_rate=0.0)
            dp = base.dp_config("noise")
        times = []
        grad_evaluations = 0
        for _ in range(repetitions):
            model = build_model(
                config.model,
                classes=dataset.classes,
                features=dataset.dimension,
                seed=config.stream_seed("model-init"),
                hidden=config.hidden,
            )
            result = train_model(
                model,
                dataset.x_train,
                dataset.y_train,
                optimizer=optimizer,
                update=config.update,
                learning_rate=config.learning_rate,
                epochs=1,
                batch_size=config.batch_size,
                dp=dp,
                scale_floor=config.scale_floor,
                shuffle_seed=config.stream_seed("shuffle"),
                threads=threads,
            )
            times.append(result.epoch_seconds[0])
            grad_evaluations = result.grad_evaluations
        out["optimizers"][optimizer] = {
            "median_epoch_seconds": statistics.median(times),
            "epoch_seconds": times,
            "grad_evaluations": grad_evaluations,
        }
    sgd_seconds = out["optimizers"]["sgd"]["median_epoch_seconds"]
    for optimizer in OPTIMIZER_ORDER:
        entry = out["optimizers"][optimizer]
        entry["factor_vs_sgd"] = entry["median_epoch_seconds"] / sgd_seconds
    return out
