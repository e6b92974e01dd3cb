"""Micro-batch DP gradient pipeline: partition, scale, clip, noise, aggregate.

The whole pipeline is pure: every step maps immutable gradient sets to new
ones, and all randomness comes from counter-based streams keyed by
(seed, epoch, step, worker), so any degree of parallelism over the worker
loop produces bit-identical results.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .gradients import GradientSet, l2_norm, linear_combine

DECAY_KINDS = ("none", "linear", "exp")

_MAX_SEED = 2**64
_MAX_EPOCH = 2**20
_MAX_STEP = 2**24
_MAX_WORKER = 2**20


@dataclass(frozen=True)
class DpConfig:
    """Knobs of the private gradient pipeline.

    clip_norm: global L2 bound applied to each scaled micro-batch gradient.
    noise_multiplier: base ratio of noise standard deviation to clip_norm;
        zero means clipping only, no noise.
    decay: "none", "linear" (1 / (1 + rate * epoch)) or "exp"
        (exp(-rate * epoch)) schedule shrinking the multiplier per epoch.
    workers: number of parallel lanes a batch is partitioned into.
    seed: master seed for all noise streams.
    """

    clip_norm: float
    noise_multiplier: float = 0.0
    decay: str = "none"
    decay_rate: float = 0.0
    workers: int = 1
    seed: int = 0

    def __post_init__(self):
        if not self.clip_norm > 0:
            raise ValueError(f"bad-config: clip_norm must be > 0, got {self.clip_norm}")
        if self.noise_multiplier < 0:
            raise ValueError(
                f"bad-config: noise_multiplier must be >= 0, got {self.noise_multiplier}"
            )
        if self.decay not in DECAY_KINDS:
            raise ValueError(f"bad-config: decay must be one of {DECAY_KINDS}, got {self.decay!r}")
        if self.decay_rate < 0:
            raise ValueError(f"bad-config: decay_rate must be >= 0, got {self.decay_rate}")
        if self.workers < 1:
            raise ValueError(f"bad-config: workers must be >= 1, got {self.workers}")
        if not 0 <= self.seed < _MAX_SEED:
            raise ValueError("bad-config: seed must fit in 64 unsigned bits")


@dataclass(frozen=True)
class NoiseStreamKey:
    """Address of one deterministic noise stream.

    Distinct (epoch, step, worker) triples under one seed select disjoint
    Philox counter streams, so per-worker noise never shares state and is
    independent of execution order.
    """

    seed: int
    epoch: int
    step: int
    worker: int = 0

    def __post_init__(self):
        if not 0 <= self.seed < _MAX_SEED:
            raise ValueError("bad-config: seed must fit in 64 unsigned bits")
        if not 0 <= self.epoch < _MAX_EPOCH:
            raise ValueError(f"bad-config: epoch must be in [0, {_MAX_EPOCH})")
        if not 0 <= self.step < _MAX_STEP:
            raise ValueError(f"bad-config: step must be in [0, {_MAX_STEP})")
        if not 0 <= self.worker < _MAX_WORKER:
            raise ValueError(f"bad-config: worker must be in [0, {_MAX_WORKER})")

    def philox_key(self) -> int:
        """Pack the key into the 128-bit Philox key word."""
        low = (self.epoch << 44) | (self.step << 20) | self.worker
        return (self.seed << 64) | low


class ScaleProfile:
    """Per-layer scale factors in (0, 1], with the dominant layer at 1."""

    __slots__ = ("_scales",)

    def __init__(self, scales: dict[str, float]):
        for name, value in scales.items():
            if not 0 < value <= 1:
                raise ValueError(
                    f"bad-config: scale for layer {name!r} must be in (0, 1], got {value}"
                )
        self._scales = dict(scales)

    @classmethod
    def uniform(cls, layer_ids) -> "ScaleProfile":
        return cls({name: 1.0 for name in layer_ids})

    def __getitem__(self, name: str) -> float:
        return self._scales[name]

    def __contains__(self, name: str) -> bool:
        return name in self._scales

    def __len__(self) -> int:
        return len(self._scales)

    def as_dict(self) -> dict[str, float]:
        return dict(self._scales)

    def __repr__(self) -> str:
        return f"ScaleProfile({self._scales})"

    def check_covers(self, g: GradientSet) -> None:
        missing = [name for name in g.layer_ids() if name not in self._scales]
        if missing:
            raise ValueError(f"scale-coverage: profile has no scale for layers {missing}")


def partition_batch(batch_size: int, workers: int) -> list[range]:
    """Split 0..batch_size into `workers` contiguous index ranges.

    Range sizes differ by at most one, larger ranges first.
    """
    if workers < 1:
        raise ValueError(f"bad-config: workers must be >= 1, got {workers}")
    if batch_size < workers:
        raise ValueError(
            f"batch-too-small: batch of {batch_size} cannot feed {workers} workers"
        )
    base, remainder = divmod(batch_size, workers)
    ranges = []
    start = 0
    for i in range(workers):
        size = base + (1 if i < remainder else 0)
        ranges.append(range(start, start + size))
        start += size
    return ranges


def calibrate_scales(first_iteration_grads: GradientSet, floor: float = 1e-3) -> ScaleProfile:
    """Per-layer scales proportional to first-iteration layer norms.

    Normalized so the layer with the largest norm gets exactly 1; layers
    with vanishing norms are clamped at `floor` to keep the later division
    bounded.
    """
    if not 0 < floor <= 1:
        raise ValueError(f"bad-config: floor must be in (0, 1], got {floor}")
    norms = {name: math.sqrt(float(np.dot(v, v))) for name, v in first_iteration_grads.items()}
    if not norms:
        raise ValueError("empty-gradient: cannot calibrate scales from a gradient with no layers")
    largest = max(norms.values())
    if largest == 0.0:
        raise ValueError("degenerate-calibration: all layer norms are zero")
    return ScaleProfile({name: max(floor, n / largest) for name, n in norms.items()})


def apply_scaling(g: GradientSet, profile: ScaleProfile, direction: str) -> GradientSet:
    """Divide ("down") or multiply ("up") each layer by its scale factor."""
    if direction not in ("down", "up"):
        raise ValueError(f"bad-config: direction must be 'down' or 'up', got {direction!r}")
    profile.check_covers(g)
    if direction == "down":
        return GradientSet._wrap({name: arr / profile[name] for name, arr in g.items()})
    return GradientSet._wrap({name: arr * profile[name] for name, arr in g.items()})


def clip_by_global_norm(g: GradientSet, clip_norm: float) -> GradientSet:
    """Rescale g so its global L2 norm is at most clip_norm.

    A zero gradient passes through unchanged: there is nothing to clip and
    the scaling factor min(1, c / 0) is taken as 1.
    """
    if not clip_norm > 0:
        raise ValueError(f"bad-config: clip_norm must be > 0, got {clip_norm}")
    norm = l2_norm(g)
    if norm <= clip_norm:
        return g
    factor = clip_norm / norm
    clipped = g.scale(factor)
    # Rounding can leave the recomputed norm a few ulp above the bound;
    # shaving one ulp off the factor at a time makes "norm <= clip_norm"
    # hold exactly without drifting more than ~1e-16 relative.
    while l2_norm(clipped) > clip_norm:
        factor = math.nextafter(factor, 0.0)
        clipped = g.scale(factor)
    return clipped


def decay_multiplier(decay: str, rate: float, epoch: int) -> float:
    """Noise decay d(t): 1, 1/(1 + rate*t) or exp(-rate*t) at epoch t."""
    if decay not in DECAY_KINDS:
        raise ValueError(f"bad-config: decay must be one of {DECAY_KINDS}, got {decay!r}")
    if rate < 0:
        raise ValueError(f"bad-config: decay_rate must be >= 0, got {rate}")
    if epoch < 0:
        raise ValueError(f"bad-config: epoch must be >= 0, got {epoch}")
    if decay == "none":
        return 1.0
    if decay == "linear":
        return 1.0 / (1.0 + rate * epoch)
    return math.exp(-rate * epoch)


def gaussian_noise(key: NoiseStreamKey, std: float, template: GradientSet) -> GradientSet:
    """I.i.d. Normal(0, std^2) noise shaped like `template`.

    Uniform draws come from a Philox counter stream selected by `key`;
    they are mapped to normals through the inverse CDF (scipy's ndtri), so
    the output is bit-reproducible across platforms and repeated calls.
    """
    if std < 0:
        raise ValueError(f"bad-config: std must be >= 0, got {std}")
    if std == 0.0:
        return GradientSet.zeros_like(template)
    lengths = template.lengths()
    total = sum(lengths.values())
    raw = np.random.Philox(key=key.philox_key()).random_raw(total)
    # Top 53 bits, centered on the bin midpoint, give uniforms in (0, 1)
    # strictly, so ndtri never sees 0 or 1.
    uniform = ((raw >> np.uint64(11)) + 0.5) * 2.0**-53
    normal = ndtri(uniform) * std
    out = {}
    offset = 0
    for name, size in lengths.items():
        out[name] = normal[offset : offset + size]
        offset += size
    return GradientSet._wrap(out)


def scale_and_clip(g: GradientSet, profile: ScaleProfile, clip_norm: float) -> GradientSet:
    """Scale a micro-batch gradient down per layer, then clip it globally.

    This is the pipeline's internal checkpoint: the returned gradient
    always has global norm <= clip_norm.
    """
    return clip_by_global_norm(apply_scaling(g, profile, "down"), clip_norm)


def _process_worker(
    g: GradientSet,
    config: DpConfig,
    profile: ScaleProfile,
    z_t: float,
    epoch: int,
    step: int,
    worker: int,
) -> GradientSet:
    clipped = scale_and_clip(g, profile, config.clip_norm)
    restored = apply_scaling(clipped, profile, "up")
    if z_t == 0.0:
        return restored
    key = NoiseStreamKey(config.seed, epoch, step, worker)
    noise = gaussian_noise(key, config.clip_norm * z_t, restored)
    share = 1.0 / config.workers
    return GradientSet._wrap(
        {name: arr + share * noise[name] for name, arr in restored.items()}
    )


def edp_step(
    per_worker_grads: list[GradientSet],
    config: DpConfig,
    profile: ScaleProfile,
    epoch: int,
    step: int,
    threads: int = 1,
) -> GradientSet:
    """One private optimizer step over the workers' micro-batch gradients.

    Each worker gradient is scaled down per layer, clipped to the global
    bound, rescaled, and perturbed with Gaussian noise of standard
    deviation clip_norm * z_t (z_t = noise_multiplier * decay(epoch)),
    pre-divided by the worker count. The results are averaged in ascending
    worker order. Output is bit-identical for any `threads` value.
    """
    if len(per_worker_grads) != config.workers:
        raise ValueError(
            f"worker-count: got {len(per_worker_grads)} gradients for "
            f"{config.workers} workers"
        )
    z_t = config.noise_multiplier * decay_multiplier(config.decay, config.decay_rate, epoch)

    def one(item):
        worker, g = item
        return _process_worker(g, config, profile, z_t, epoch, step, worker)

    if threads > 1 and config.workers > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            processed = list(pool.map(one, enumerate(per_worker_grads)))
    else:
        processed = [one(item) for item in enumerate(per_worker_grads)]
    total = linear_combine([(1.0, g) for g in processed])
    return total.scale(1.0 / config.workers)


def dpsgd_reference_step(
    per_example_grads: list[GradientSet],
    clip_norm: float,
    noise_multiplier: float,
    key: NoiseStreamKey,
) -> GradientSet:
    """Classic per-example DP-SGD step, used as oracle and baseline.

    Clips every example gradient to clip_norm, sums them, adds one
    Normal(0, (clip_norm * noise_multiplier)^2) draw elementwise, and
    divides by the batch size.
    """
    if not per_example_grads:
        raise ValueError("empty-batch: need at least one per-example gradient")
    clipped = [clip_by_global_norm(g, clip_norm) for g in per_example_grads]
    total = linear_combine([(1.0, g) for g in clipped])
    if noise_multiplier > 0:
        noise = gaussian_noise(key, clip_norm * noise_multiplier, total)
        total = linear_combine([(1.0, total), (1.0, noise)])
    return total.scale(1.0 / len(per_example_grads))
