"""Scikit-learn style front ends for private training and the MIA harness."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .attack import attack_scores, auc, build_attack_records, train_attack_model
from .config import derive_seed
from .models import build_model
from .pipeline import DpConfig
from .training import accuracy, train_model


class PrivateClassifier(BaseEstimator, ClassifierMixin):
    """Classifier trained with a plain, per-example DP, or micro-batch DP loop.

    Parameters mirror the training core: `optimizer` picks the gradient
    pipeline ("sgd", "dpsgd", "edpsgd"), `update` the parameter rule
    ("adam" or "sgd"). After `fit`, `ledger_` holds the composed zCDP
    budget and `epsilon_` the (epsilon, delta) guarantee, when one exists.
    """

    def __init__(
        self,
        model="softmax",
        hidden=32,
        optimizer="sgd",
        update="adam",
        learning_rate=0.01,
        epochs=50,
        batch_size=256,
        clip_norm=1.0,
        noise_multiplier=0.0,
        decay="none",
        decay_rate=0.0,
        workers=1,
        scale_floor=1e-3,
        delta=1e-5,
        seed=0,
        threads=1,
    ):
        self.model = model
        self.hidden = hidden
        self.optimizer = optimizer
        self.update = update
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.batch_size = batch_size
        self.clip_norm = clip_norm
        self.noise_multiplier = noise_multiplier
        self.decay = decay
        self.decay_rate = decay_rate
        self.workers = workers
        self.scale_floor = scale_floor
        self.delta = delta
        self.seed = seed
        self.threads = threads

    def fit(self, X, y):
        X, y = check_X_y(X, y)
        self.classes_, encoded = np.unique(y, return_inverse=True)
        if len(self.classes_) < 2:
            raise ValueError("bad-input: need at least two classes to fit")
        dp = None
        if self.optimizer in ("dpsgd", "edpsgd"):
            dp = DpConfig(
                clip_norm=self.clip_norm,
                noise_multiplier=self.noise_multiplier,
                decay=self.decay,
                decay_rate=self.decay_rate,
                workers=self.workers,
                seed=derive_seed(self.seed, "noise"),
            )
        model = build_model(
            self.model,
            classes=len(self.classes_),
            features=X.shape[1],
            seed=derive_seed(self.seed, "init"),
            hidden=self.hidden,
        )
        result = train_model(
            model,
            X,
            encoded,
            optimizer=self.optimizer,
            update=self.update,
            learning_rate=self.learning_rate,
            epochs=self.epochs,
            batch_size=min(self.batch_size, len(X)),
            dp=dp,
            scale_floor=self.scale_floor,
            shuffle_seed=derive_seed(self.seed, "shuffle"),
            threads=self.threads,
        )
        self.model_ = model
        self.ledger_ = result.ledger
        self.epsilon_ = (
            result.ledger.epsilon(self.delta) if result.ledger.rho_total > 0 else None
        )
        self.scale_profile_ = result.profile.as_dict() if result.profile else None
        self.loss_curve_ = result.epoch_loss
        self.n_features_in_ = X.shape[1]
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "model_")
        X = check_array(X)
        return self.model_.predict_proba(X)

    def predict(self, X):
        return self.classes_[self.predict_proba(X).argmax(axis=1)]

    def score(self, X, y, sample_weight=None):
        check_is_fitted(self, "model_")
        X, y = check_X_y(X, y)
        return accuracy(self.model_, X, np.searchsorted(self.classes_, y))


class MembershipInferenceAttack(BaseEstimator):
    """Shadow-model membership inference with sorted-posterior features.

    `fit` trains the attack classifier on a shadow model's member and
    non-member posteriors; `evaluate` scores the model under attack and
    returns the rank-statistic AUC.
    """

    def __init__(self, seed=0, epochs=400, learning_rate=0.05):
        self.seed = seed
        self.epochs = epochs
        self.learning_rate = learning_rate

    def fit(self, shadow_model, shadow_split):
        records = build_attack_records(shadow_model, shadow_split)
        self.classifier_ = train_attack_model(
            records,
            seed=self.seed,
            epochs=self.epochs,
            learning_rate=self.learning_rate,
        )
        return self

    def membership_scores(self, target_model, split):
        """Attack scores and membership labels for the split's examples."""
        check_is_fitted(self, "classifier_")
        records = build_attack_records(target_model, split)
        return attack_scores(self.classifier_, records), np.array(
            [r.is_member for r in records]
        )

    def evaluate(self, target_model, target_split) -> float:
        scores, labels = self.membership_scores(target_model, target_split)
        return auc(list(zip(scores.tolist(), labels.tolist())))
