import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from microdp import (
    AttackSplit,
    MembershipInferenceAttack,
    PrivateClassifier,
    generate_blobs,
)


@pytest.fixture(scope="module")
def blobs():
    return generate_blobs(seed=31, size=240, classes=3, dimension=4, spread=0.5)


class TestPrivateClassifier:
    def test_plain_fit_predict(self, blobs):
        clf = PrivateClassifier(optimizer="sgd", epochs=60, batch_size=40,
                                learning_rate=0.05, seed=0)
        clf.fit(blobs.x_train, blobs.y_train)
        assert clf.score(blobs.x_train, blobs.y_train) >= 0.95
        probs = clf.predict_proba(blobs.x_test)
        assert probs.shape == (len(blobs.x_test), 3)
        np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-9)
        assert set(clf.predict(blobs.x_test)) <= set(clf.classes_)

    def test_private_fit_exposes_ledger_and_epsilon(self, blobs):
        clf = PrivateClassifier(
            optimizer="edpsgd", epochs=5, batch_size=40, workers=4,
            clip_norm=1.0, noise_multiplier=1.0, delta=1e-5, seed=0,
        )
        clf.fit(blobs.x_train, blobs.y_train)
        assert clf.epsilon_ is not None and clf.epsilon_ > 0
        assert len(clf.ledger_.steps) == 5 * (120 // 40)
        assert clf.scale_profile_ is not None

    def test_plain_fit_has_no_privacy_claim(self, blobs):
        clf = PrivateClassifier(optimizer="sgd", epochs=2, batch_size=40, seed=0)
        clf.fit(blobs.x_train, blobs.y_train)
        assert clf.epsilon_ is None
        assert clf.ledger_.rho_total == 0.0

    def test_noise_free_private_run_has_no_finite_epsilon(self, blobs):
        clf = PrivateClassifier(
            optimizer="edpsgd", epochs=2, batch_size=40, workers=2,
            clip_norm=1.0, noise_multiplier=0.0, seed=0,
        )
        clf.fit(blobs.x_train, blobs.y_train)
        assert clf.epsilon_ is None

    def test_label_values_are_preserved(self, blobs):
        labels = np.array(["red", "green", "blue"])[blobs.y_train]
        clf = PrivateClassifier(optimizer="sgd", epochs=30, batch_size=40,
                                learning_rate=0.05, seed=0)
        clf.fit(blobs.x_train, labels)
        assert set(clf.predict(blobs.x_train)) <= {"red", "green", "blue"}

    def test_unfitted_raises(self, blobs):
        with pytest.raises(NotFittedError):
            PrivateClassifier().predict_proba(blobs.x_test)

    def test_sklearn_clone_round_trip(self):
        clf = PrivateClassifier(optimizer="edpsgd", workers=3, noise_multiplier=0.7)
        cloned = clone(clf)
        assert cloned.get_params() == clf.get_params()

    def test_deterministic_per_seed(self, blobs):
        fits = []
        for _ in range(2):
            clf = PrivateClassifier(
                optimizer="edpsgd", epochs=3, batch_size=40, workers=4,
                clip_norm=1.0, noise_multiplier=1.0, seed=12,
            )
            clf.fit(blobs.x_train, blobs.y_train)
            fits.append(clf.model_.to_json())
        assert fits[0] == fits[1]

    def test_mlp_variant(self, blobs):
        clf = PrivateClassifier(model="mlp", hidden=12, optimizer="sgd",
                                epochs=60, batch_size=40, learning_rate=0.05, seed=1)
        clf.fit(blobs.x_train, blobs.y_train)
        assert clf.score(blobs.x_train, blobs.y_train) >= 0.95


class TestMembershipInferenceAttack:
    def test_fit_and_evaluate(self, blobs):
        target = PrivateClassifier(optimizer="sgd", epochs=40, batch_size=40,
                                   learning_rate=0.05, seed=2)
        target.fit(blobs.x_train, blobs.y_train)
        shadow_data = generate_blobs(seed=99, size=240, classes=3, dimension=4, spread=0.5)
        shadow = PrivateClassifier(optimizer="sgd", epochs=40, batch_size=40,
                                   learning_rate=0.05, seed=3)
        shadow.fit(shadow_data.x_train, shadow_data.y_train)

        attack = MembershipInferenceAttack(seed=5)
        attack.fit(shadow.model_, AttackSplit.from_dataset(shadow_data))
        value = attack.evaluate(target.model_, AttackSplit.from_dataset(blobs))
        assert 0.0 <= value <= 1.0

        again = MembershipInferenceAttack(seed=5)
        again.fit(shadow.model_, AttackSplit.from_dataset(shadow_data))
        assert again.evaluate(target.model_, AttackSplit.from_dataset(blobs)) == value

    def test_untrained_target_leaks_nothing(self):
        # Random-weight targets carry no membership signal: the attack AUC
        # averaged over ten seeds sits at chance level.
        from microdp.models import Mlp2

        values = []
        for seed in range(10):
            data = generate_blobs(seed=seed, size=200, classes=3, dimension=4,
                                  spread=1.0, label_noise=0.2)
            shadow_data = generate_blobs(seed=1000 + seed, size=200, classes=3,
                                         dimension=4, spread=1.0, label_noise=0.2)
            target = Mlp2.init(3, 4, hidden=8, seed=seed)
            shadow = Mlp2.init(3, 4, hidden=8, seed=500 + seed)
            attack = MembershipInferenceAttack(seed=seed)
            attack.fit(shadow, AttackSplit.from_dataset(shadow_data))
            values.append(attack.evaluate(target, AttackSplit.from_dataset(data)))
        assert 0.45 <= float(np.mean(values)) <= 0.55

    def test_membership_scores_shape(self, blobs):
        shadow = PrivateClassifier(optimizer="sgd", epochs=10, batch_size=40, seed=3)
        shadow.fit(blobs.x_train, blobs.y_train)
        attack = MembershipInferenceAttack(seed=5)
        attack.fit(shadow.model_, AttackSplit.from_dataset(blobs))
        scores, labels = attack.membership_scores(
            shadow.model_, AttackSplit.from_dataset(blobs)
        )
        assert scores.shape == labels.shape == (240,)
        assert labels.sum() == 120
