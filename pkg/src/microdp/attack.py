"""Membership inference: sorted-posterior features, shadow-trained attack
classifier, and exact rank-statistic AUC."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, NamedTuple

import numpy as np
from scipy.stats import rankdata

from .models import SoftmaxRegressor
from .training import train_model


class AttackRecord(NamedTuple):
    """Posterior scores sorted descending, plus the membership label."""

    features: np.ndarray
    is_member: bool


@dataclass(frozen=True)
class AttackSplit:
    """Balanced member (training) and non-member (held-out) example sets."""

    member_x: np.ndarray
    non_member_x: np.ndarray

    def __post_init__(self):
        if len(self.member_x) != len(self.non_member_x):
            raise ValueError(
                f"bad-input: split must be balanced, got {len(self.member_x)} members "
                f"vs {len(self.non_member_x)} non-members"
            )
        if len(self.member_x) == 0:
            raise ValueError("bad-input: split needs at least one example per side")

    @classmethod
    def balanced(cls, member_x: np.ndarray, non_member_x: np.ndarray) -> "AttackSplit":
        """Trim the longer side's tail so both sides have equal counts."""
        n = min(len(member_x), len(non_member_x))
        return cls(member_x[:n], non_member_x[:n])

    @classmethod
    def from_dataset(cls, dataset) -> "AttackSplit":
        return cls.balanced(dataset.x_train, dataset.x_test)


def build_attack_records(model, split: AttackSplit) -> list[AttackRecord]:
    """One record per example: the model's posterior, sorted descending."""
    records = []
    for x, is_member in ((split.member_x, True), (split.non_member_x, False)):
        posteriors = model.predict_proba(x)
        features = np.sort(posteriors, axis=1)[:, ::-1]
        records.extend(AttackRecord(row.copy(), is_member) for row in features)
    return records


def train_attack_model(
    records: list[AttackRecord],
    seed: int,
    epochs: int = 400,
    learning_rate: float = 0.05,
) -> SoftmaxRegressor:
    """Binary softmax classifier over sorted-score features.

    Full-batch Adam, deterministic per seed. Class 1 is "member".
    """
    labels = {r.is_member for r in records}
    if labels != {True, False}:
        raise ValueError("degenerate-attack-data: need both member and non-member records")
    x = np.stack([r.features for r in records])
    y = np.array([1 if r.is_member else 0 for r in records], dtype=np.int64)
    classifier = SoftmaxRegressor.init(classes=2, features=x.shape[1], seed=seed)
    train_model(
        classifier,
        x,
        y,
        optimizer="sgd",
        update="adam",
        learning_rate=learning_rate,
        epochs=epochs,
        batch_size=len(x),
        shuffle_seed=seed,
    )
    return classifier


def attack_scores(classifier: SoftmaxRegressor, records: list[AttackRecord]) -> np.ndarray:
    """Member-class posterior for each record."""
    x = np.stack([r.features for r in records])
    return classifier.predict_proba(x)[:, 1]


def auc(scores: Iterable[tuple[float, bool]]) -> float:
    """Mann-Whitney AUC: P(member score > non-member score), ties as 1/2."""
    pairs = list(scores)
    values = np.array([s for s, _ in pairs], dtype=np.float64)
    members = np.array([bool(label) for _, label in pairs])
    n_member = int(members.sum())
    n_non = len(pairs) - n_member
    if n_member == 0 or n_non == 0:
        raise ValueError("degenerate-eval: need both member and non-member scores")
    ranks = rankdata(values)
    u = ranks[members].sum() - n_member * (n_member + 1) / 2.0
    return float(u / (n_member * n_non))
