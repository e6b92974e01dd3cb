"""Privacy accounting via zero-concentrated differential privacy.

Each optimizer step with noise multiplier z is booked as the plain Gaussian
mechanism, rho = 1 / (2 z^2); steps compose additively and the budget
converts to (epsilon, delta) with epsilon = rho + 2 sqrt(rho ln(1/delta)).
No subsampling amplification is applied, so reported epsilons are a
conservative upper bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .pipeline import DpConfig, decay_multiplier


def step_rho(noise_multiplier: float) -> float:
    """zCDP budget of one Gaussian-mechanism step at the given multiplier."""
    if noise_multiplier <= 0:
        raise ValueError(
            "infinite-privacy-loss: a noiseless step has no finite zCDP budget "
            f"(noise_multiplier={noise_multiplier})"
        )
    return 1.0 / (2.0 * noise_multiplier * noise_multiplier)


def to_epsilon(rho: float, delta: float) -> float:
    """Convert an accumulated zCDP budget to epsilon at the given delta."""
    if not 0 < delta < 1:
        raise ValueError(f"invalid-delta: delta must be in (0, 1), got {delta}")
    if rho <= 0:
        raise ValueError(f"invalid-rho: rho must be > 0, got {rho}")
    return rho + 2.0 * math.sqrt(rho * math.log(1.0 / delta))


@dataclass(frozen=True)
class PrivacyLedger:
    """Accumulated zCDP budget with per-step history.

    A value type: `record` returns a new ledger, so a training run can keep
    exactly one and thread it through its loop. rho_total always equals the
    sum of per-step budgets over `steps`, recomputable via `rho_from_history`.
    """

    rho_total: float = 0.0
    steps: tuple[tuple[int, int, float], ...] = field(default_factory=tuple)

    def record(self, epoch: int, step: int, noise_multiplier: float) -> "PrivacyLedger":
        rho = step_rho(noise_multiplier)
        return PrivacyLedger(
            rho_total=self.rho_total + rho,
            steps=self.steps + ((epoch, step, noise_multiplier),),
        )

    def rho_from_history(self) -> float:
        total = 0.0
        for _, _, z in self.steps:
            total += step_rho(z)
        return total

    def epsilon(self, delta: float) -> float:
        return to_epsilon(self.rho_total, delta)

    def to_json(self, delta: float) -> dict:
        epsilon = self.epsilon(delta) if self.rho_total > 0 else None
        return {
            "rho_total": self.rho_total,
            "delta": delta,
            "epsilon": epsilon,
            "log10_epsilon": math.log10(epsilon) if epsilon else None,
            "steps": [[epoch, step, z] for epoch, step, z in self.steps],
        }

    @classmethod
    def from_json(cls, payload: dict) -> "PrivacyLedger":
        steps = tuple((int(e), int(s), float(z)) for e, s, z in payload["steps"])
        return cls(rho_total=float(payload["rho_total"]), steps=steps)


def record_step(ledger: PrivacyLedger, epoch: int, step: int, noise_multiplier: float) -> PrivacyLedger:
    """Functional alias for PrivacyLedger.record."""
    return ledger.record(epoch, step, noise_multiplier)


def schedule_rho(config: DpConfig, epochs: int, steps_per_epoch: int) -> float:
    """Total zCDP budget of a schedule with z_t = noise_multiplier * decay(epoch)."""
    if epochs < 1 or steps_per_epoch < 1:
        raise ValueError(
            f"bad-config: epochs and steps_per_epoch must be >= 1, got {epochs}, {steps_per_epoch}"
        )
    if config.noise_multiplier <= 0:
        raise ValueError(
            "infinite-privacy-loss: schedule with zero noise multiplier has no finite epsilon"
        )
    rho = 0.0
    for epoch in range(epochs):
        z_t = config.noise_multiplier * decay_multiplier(config.decay, config.decay_rate, epoch)
        rho += steps_per_epoch * step_rho(z_t)
    return rho


def epsilon_for_schedule(
    config: DpConfig, epochs: int, steps_per_epoch: int, delta: float
) -> float:
    """Total epsilon of a full training schedule under the config's decay."""
    return to_epsilon(schedule_rho(config, epochs, steps_per_epoch), delta)
