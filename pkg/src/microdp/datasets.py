"""Synthetic Gaussian-cluster datasets, reproducible from their spec alone."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_CENTER_SCALE = 3.0


@dataclass(frozen=True)
class BlobDataset:
    """One Gaussian cluster per class, split into disjoint train/test halves.

    `label_noise` is the fraction of training labels flipped to a random
    wrong class; test labels stay clean. Flipped labels give a non-private
    model something to memorize, which is what gives membership inference
    its signal.
    """

    x_train: np.ndarray
    y_train: np.ndarray
    x_test: np.ndarray
    y_test: np.ndarray
    classes: int
    dimension: int
    seed: int
    size: int
    spread: float
    label_noise: float

    def spec(self) -> dict:
        return {
            "seed": self.seed,
            "size": self.size,
            "classes": self.classes,
            "dimension": self.dimension,
            "spread": self.spread,
            "label_noise": self.label_noise,
        }


def generate_blobs(
    seed: int,
    size: int,
    classes: int,
    dimension: int,
    spread: float,
    label_noise: float = 0.0,
) -> BlobDataset:
    """Deterministic blob dataset: equal class counts up to remainder.

    Within each class, examples split evenly between train and test, so the
    two halves are disjoint and (for even per-class counts) balanced.
    """
    if classes < 2 or size < classes:
        raise ValueError(
            f"bad-dataset-spec: need size >= classes >= 2, got size={size}, classes={classes}"
        )
    if dimension < 1:
        raise ValueError(f"bad-dataset-spec: dimension must be >= 1, got {dimension}")
    if not spread > 0:
        raise ValueError(f"bad-dataset-spec: spread must be > 0, got {spread}")
    if not 0 <= label_noise < 1:
        raise ValueError(f"bad-dataset-spec: label_noise must be in [0, 1), got {label_noise}")

    rng = np.random.default_rng(seed)
    centers = rng.normal(0.0, _CENTER_SCALE, size=(classes, dimension))
    base, remainder = divmod(size, classes)
    counts = [base + (1 if c < remainder else 0) for c in range(classes)]

    train_x, train_y, test_x, test_y = [], [], [], []
    for c, count in enumerate(counts):
        points = centers[c] + spread * rng.normal(size=(count, dimension))
        n_train = count // 2
        train_x.append(points[:n_train])
        train_y.append(np.full(n_train, c, dtype=np.int64))
        test_x.append(points[n_train:])
        test_y.append(np.full(count - n_train, c, dtype=np.int64))

    x_train = np.concatenate(train_x)
    y_train = np.concatenate(train_y)
    x_test = np.concatenate(test_x)
    y_test = np.concatenate(test_y)

    # Shuffle both halves so batches are not class-blocked.
    train_order = rng.permutation(len(y_train))
    test_order = rng.permutation(len(y_test))
    x_train, y_train = x_train[train_order], y_train[train_order]
    x_test, y_test = x_test[test_order], y_test[test_order]

    if label_noise > 0:
        n_flip = int(round(label_noise * len(y_train)))
        flip_idx = rng.choice(len(y_train), size=n_flip, replace=False)
        offsets = rng.integers(1, classes, size=n_flip)
        y_train = y_train.copy()
        y_train[flip_idx] = (y_train[flip_idx] + offsets) % classes

    return BlobDataset(
        x_train=x_train,
        y_train=y_train,
        x_test=x_test,
        y_test=y_test,
        classes=classes,
        dimension=dimension,
        seed=seed,
        size=size,
        spread=spread,
        label_noise=label_noise,
    )
