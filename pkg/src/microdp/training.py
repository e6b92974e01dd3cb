"""Training loop shared by the estimator, the experiment drivers and the bench.

The loop owns batching, the choice of gradient pipeline (plain, per-example
DP, or micro-batch DP) and the parameter update rule; models only supply
gradients. Everything is driven by explicit seeds, so a run is reproducible
bit for bit.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .accounting import PrivacyLedger
from .gradients import GradientSet, linear_combine
from .pipeline import (
    DpConfig,
    NoiseStreamKey,
    ScaleProfile,
    calibrate_scales,
    decay_multiplier,
    dpsgd_reference_step,
    edp_step,
    partition_batch,
)

OPTIMIZERS = ("sgd", "dpsgd", "edpsgd")
UPDATE_RULES = ("sgd", "adam")


class SgdUpdate:
    """Plain gradient descent: w <- w - lr * g."""

    def __init__(self, learning_rate: float):
        self.learning_rate = learning_rate

    def step(self, model, grad: GradientSet) -> None:
        for name, arr in grad.items():
            model.add_flat(name, -self.learning_rate * arr)


class AdamUpdate:
    """Adam with the standard defaults (0.9, 0.999, 1e-8)."""

    beta1 = 0.9
    beta2 = 0.999
    eps = 1e-8

    def __init__(self, learning_rate: float):
        self.learning_rate = learning_rate
        self.m: dict[str, np.ndarray] | None = None
        self.v: dict[str, np.ndarray] | None = None
        self.t = 0

    def step(self, model, grad: GradientSet) -> None:
        if self.m is None:
            self.m = {name: np.zeros_like(arr) for name, arr in grad.items()}
            self.v = {name: np.zeros_like(arr) for name, arr in grad.items()}
        self.t += 1
        bias1 = 1.0 - self.beta1**self.t
        bias2 = 1.0 - self.beta2**self.t
        for name, g in grad.items():
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            delta = (m / bias1) / (np.sqrt(v / bias2) + self.eps)
            model.add_flat(name, -self.learning_rate * delta)


def make_update_rule(kind: str, learning_rate: float):
    if kind == "sgd":
        return SgdUpdate(learning_rate)
    if kind == "adam":
        return AdamUpdate(learning_rate)
    raise ValueError(f"bad-config: update rule must be one of {UPDATE_RULES}, got {kind!r}")


@dataclass
class TrainResult:
    epoch_loss: list[float] = field(default_factory=list)
    epoch_seconds: list[float] = field(default_factory=list)
    grad_evaluations: int = 0
    steps: int = 0
    ledger: PrivacyLedger = field(default_factory=PrivacyLedger)
    profile: ScaleProfile | None = None


def train_model(
    model,
    x: np.ndarray,
    y: np.ndarray,
    *,
    optimizer: str,
    update: str = "adam",
    learning_rate: float = 0.01,
    epochs: int = 50,
    batch_size: int = 256,
    dp: DpConfig | None = None,
    scale_floor: float = 1e-3,
    shuffle_seed: int = 0,
    threads: int = 1,
) -> TrainResult:
    """Train `model` in place and return the run's bookkeeping.

    Each epoch shuffles the examples and walks floor(n / batch_size) full
    batches; a trailing partial batch is skipped that epoch (the shuffle
    rotates which examples sit in it). Epoch wall time covers only the
    gradient-and-update loop, not the epoch-end loss evaluation.
    """
    if optimizer not in OPTIMIZERS:
        raise ValueError(f"bad-config: optimizer must be one of {OPTIMIZERS}, got {optimizer!r}")
    if epochs < 1:
        raise ValueError(f"bad-config: epochs must be >= 1, got {epochs}")
    if batch_size < 1:
        raise ValueError(f"bad-config: batch_size must be >= 1, got {batch_size}")
    if not learning_rate > 0:
        raise ValueError(f"bad-config: learning_rate must be > 0, got {learning_rate}")
    n = len(x)
    if n < batch_size:
        raise ValueError(f"bad-config: batch_size {batch_size} exceeds dataset size {n}")
    if optimizer in ("dpsgd", "edpsgd") and dp is None:
        raise ValueError(f"bad-config: optimizer {optimizer!r} needs a DpConfig")
    if optimizer == "dpsgd" and dp.decay != "none":
        raise ValueError("bad-config: the per-example reference uses constant noise; set decay='none'")
    if optimizer == "edpsgd" and batch_size < dp.workers:
        raise ValueError(
            f"batch-too-small: batch of {batch_size} cannot feed {dp.workers} workers"
        )

    rule = make_update_rule(update, learning_rate)
    rng = np.random.default_rng(shuffle_seed)
    result = TrainResult()
    batches = n // batch_size

    for epoch in range(epochs):
        order = rng.permutation(n)
        tic = time.perf_counter()
        for b in range(batches):
            idx = order[b * batch_size : (b + 1) * batch_size]
            xb, yb = x[idx], y[idx]
            if optimizer == "sgd":
                grad = model.grad_mean_loss(xb, yb)
                result.grad_evaluations += 1
            elif optimizer == "dpsgd":
                per_example = model.grad_per_example(xb, yb)
                result.grad_evaluations += len(per_example)
                key = NoiseStreamKey(dp.seed, epoch, b, 0)
                grad = dpsgd_reference_step(per_example, dp.clip_norm, dp.noise_multiplier, key)
                if dp.noise_multiplier > 0:
                    result.ledger = result.ledger.record(epoch, b, dp.noise_multiplier)
            else:
                parts = partition_batch(batch_size, dp.workers)
                worker_grads = [
                    model.grad_mean_loss(xb[r.start : r.stop], yb[r.start : r.stop])
                    for r in parts
                ]
                result.grad_evaluations += dp.workers
                if result.profile is None:
                    # First-iteration calibration from the mean of the worker
                    # gradients; no extra gradient evaluation is spent.
                    first = linear_combine([(1.0 / dp.workers, g) for g in worker_grads])
                    result.profile = calibrate_scales(first, scale_floor)
                grad = edp_step(worker_grads, dp, result.profile, epoch, b, threads=threads)
                z_t = dp.noise_multiplier * decay_multiplier(dp.decay, dp.decay_rate, epoch)
                if z_t > 0:
                    result.ledger = result.ledger.record(epoch, b, z_t)
            rule.step(model, grad)
            result.steps += 1
        result.epoch_seconds.append(time.perf_counter() - tic)
        result.epoch_loss.append(model.loss(x, y))
    return result


def accuracy(model, x: np.ndarray, y: np.ndarray) -> float:
    probs = model.predict_proba(x)
    return float(np.mean(probs.argmax(axis=1) == np.asarray(y)))
