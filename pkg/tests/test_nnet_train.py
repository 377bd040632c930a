"""Training loop: convergence, early stopping, divergence handling, replay."""

from __future__ import annotations

import numpy as np
import pytest

from vendorlens.binfmt import FormatError
from vendorlens.nnet import (
    TrainConfig,
    TrainingDiverged,
    class_weight_vector,
    load_model,
    predict,
    save_model,
    train_gradient_model,
    train_nb,
)


def separable_toy(n_per_class=10, seed=0):
    rng = np.random.default_rng(seed)
    a = rng.normal(loc=(+2.0, +2.0), scale=0.3, size=(n_per_class, 2))
    b = rng.normal(loc=(-2.0, -2.0), scale=0.3, size=(n_per_class, 2))
    X = np.vstack([a, b])
    y = np.array([0] * n_per_class + [1] * n_per_class)
    return X, y


class TestGradientTraining:
    def test_separable_toy_perfect_within_200_steps(self):
        X, y = separable_toy()
        config = TrainConfig(
            learning_rate=0.5,
            warmup_steps=0,
            batch_size=len(y),
            max_epochs=200,
            weight_decay=0.0,
            patience=0,
        )
        model = train_gradient_model("softmax", (X, y), config, n_classes=2)
        labels, _ = predict(model, X)
        assert np.array_equal(labels, y)
        assert model.meta["epochs_run"] <= 200

    def test_zero_epochs_returns_initialization(self):
        X, y = separable_toy()
        config = TrainConfig(max_epochs=0, seed=33)
        model = train_gradient_model("softmax", (X, y), config, n_classes=2)
        from vendorlens.nnet.models import SoftmaxModel

        fresh = SoftmaxModel(input_dim=2, n_classes=2, seed=33)
        for name in fresh.params:
            assert np.array_equal(model.params[name], fresh.params[name])

    def test_loss_non_increasing_first_10_full_batch_steps(self):
        X, y = separable_toy()
        config = TrainConfig(
            learning_rate=1e-3,
            warmup_steps=0,
            batch_size=len(y),  # full batch: one step per epoch
            max_epochs=10,
            weight_decay=0.0,
            patience=0,
        )
        model = train_gradient_model("softmax", (X, y), config, n_classes=2)
        history = model.meta["loss_history"]
        assert len(history) == 10
        for earlier, later in zip(history, history[1:]):
            assert later <= earlier + 1e-12

    def test_balanced_weights_raise_minority_recall(self):
        rng = np.random.default_rng(5)
        # 90/10 skew with overlapping clouds so the boundary placement matters
        major = rng.normal(loc=(0.0, 0.0), scale=1.0, size=(90, 2))
        minor = rng.normal(loc=(1.2, 1.2), scale=1.0, size=(10, 2))
        X = np.vstack([major, minor])
        y = np.array([0] * 90 + [1] * 10)
        base = dict(
            learning_rate=0.2,
            warmup_steps=0,
            batch_size=100,
            max_epochs=60,
            weight_decay=0.0,
            patience=0,
            seed=1,
        )
        uniform = train_gradient_model(
            "softmax", (X, y), TrainConfig(**base, class_weights="uniform"), 2
        )
        balanced = train_gradient_model(
            "softmax", (X, y), TrainConfig(**base, class_weights="balanced"), 2
        )
        def minority_recall(model):
            labels, _ = predict(model, X)
            return (labels[y == 1] == 1).mean()

        assert minority_recall(balanced) > minority_recall(uniform)

    def test_class_weight_vector_formula(self):
        y = np.array([0, 0, 0, 1])
        w = class_weight_vector(y, n_classes=2, mode="balanced")
        # N/(K*count_k): 4/(2*3) and 4/(2*1)
        assert w[0] == pytest.approx(4 / 6)
        assert w[1] == pytest.approx(2.0)
        assert class_weight_vector(y, 2, "uniform") is None

    def test_nan_loss_aborts_with_diagnostics(self):
        X, y = separable_toy()
        X = X.copy()
        X[0, 0] = np.nan
        config = TrainConfig(max_epochs=3, warmup_steps=0, batch_size=20, patience=0)
        with pytest.raises(TrainingDiverged) as err:
            train_gradient_model("softmax", (X, y), config, n_classes=2)
        assert err.value.step == 1
        assert err.value.lr > 0
        assert err.value.grad_norm >= 0 or np.isnan(err.value.grad_norm)
        msg = str(err.value)
        assert "step" in msg and "lr" in msg and "grad norm" in msg

    def test_deterministic_replay_bit_identical(self):
        X, y = separable_toy(seed=9)
        config = TrainConfig(max_epochs=8, batch_size=8, seed=77, patience=0)
        m1 = train_gradient_model("softmax", (X, y), config, n_classes=2)
        m2 = train_gradient_model("softmax", (X, y), config, n_classes=2)
        for name in m1.params:
            assert np.array_equal(m1.params[name], m2.params[name])

    def test_early_stopping_restores_best_params(self):
        rng = np.random.default_rng(4)
        X = rng.normal(size=(40, 3))
        y = rng.integers(0, 2, size=40)  # pure noise: val score plateaus fast
        Xv = rng.normal(size=(16, 3))
        yv = rng.integers(0, 2, size=16)
        config = TrainConfig(
            max_epochs=60, batch_size=8, patience=3, seed=2, warmup_steps=0
        )
        model = train_gradient_model(
            "softmax", (X, y), config, n_classes=2, val_data=(Xv, yv)
        )
        assert model.meta["epochs_run"] < 60  # patience fired
        assert model.meta["best_epoch"] <= model.meta["epochs_run"]
        assert model.meta["best_val_macro_f1"] is not None

    def test_label_range_validated(self):
        X, y = separable_toy()
        with pytest.raises(ValueError):
            train_gradient_model("softmax", (X, y + 5), TrainConfig(max_epochs=1), 2)

    def test_unknown_kind_rejected(self):
        X, y = separable_toy()
        with pytest.raises(ValueError):
            train_gradient_model("forest", (X, y), TrainConfig(), 2)

    def test_bigru_trains_on_ragged_sequences(self):
        rng = np.random.default_rng(6)
        seqs = [rng.normal(size=(t, 4)) for t in (3, 5, 3, 5, 4, 4)]
        # class-dependent mean shift on the tokens
        y = np.array([0, 1, 0, 1, 0, 1])
        for i, lab in enumerate(y):
            seqs[i] = seqs[i] + (2.5 if lab else -2.5)
        from vendorlens.nnet import BiGRUConfig

        config = TrainConfig(
            learning_rate=0.05, warmup_steps=0, batch_size=4, max_epochs=30,
            weight_decay=0.0, seed=3, patience=0,
        )
        model = train_gradient_model(
            "bigru",
            (seqs, y),
            config,
            n_classes=2,
            arch={"gru": BiGRUConfig(layers=1, hidden=6, dropout=0.0)},
        )
        labels, probs = predict(model, seqs)
        assert np.array_equal(labels, y)
        assert np.allclose(probs.sum(axis=1), 1.0, atol=1e-6)


class TestNaiveBayesTraining:
    def test_train_and_predict(self):
        X = np.array([[3.0, 0.0], [2.0, 0.0], [0.0, 3.0]])
        y = np.array([0, 0, 1])
        model = train_nb(X, y, n_classes=2)
        labels, probs = predict(model, X)
        assert np.array_equal(labels, y)
        assert np.allclose(probs.sum(axis=1), 1.0, atol=1e-9)
        assert model.kind == "nb"


class TestModelSerialization:
    def _trained(self):
        X, y = separable_toy()
        config = TrainConfig(max_epochs=5, batch_size=10, seed=13, patience=0)
        return train_gradient_model("softmax", (X, y), config, n_classes=2)

    def test_round_trip_bit_identical(self, tmp_path):
        model = self._trained()
        p1, p2 = tmp_path / "m1.vlmodel", tmp_path / "m2.vlmodel"
        save_model(model, p1)
        save_model(model, p2)
        assert p1.read_bytes() == p2.read_bytes()
        loaded = load_model(p1)
        assert loaded.kind == model.kind
        for name in model.params:
            assert np.array_equal(
                loaded.params[name], model.params[name].astype(np.float32)
            )
        X, _ = separable_toy()
        l1, _ = predict(loaded, X)
        l2, _ = predict(model, X)
        assert np.array_equal(l1, l2)

    def test_nb_round_trip_preserves_minus_inf_priors(self, tmp_path):
        X = np.array([[1.0, 0.0], [0.0, 1.0]])
        model = train_nb(X, np.array([0, 0]), n_classes=2)
        path = tmp_path / "nb.vlmodel"
        save_model(model, path)
        loaded = load_model(path)
        assert loaded.params["class_log_prior"][1] == -np.inf

    def test_truncated_payload_rejected_with_offset(self, tmp_path):
        model = self._trained()
        path = tmp_path / "m.vlmodel"
        save_model(model, path)
        data = path.read_bytes()
        path.write_bytes(data[:-4])
        with pytest.raises(FormatError) as err:
            load_model(path)
        assert err.value.offset == len(data) - 4
        assert "byte offset" in str(err.value)

    def test_wrong_magic_rejected(self, tmp_path):
        path = tmp_path / "m.vlmodel"
        save_model(self._trained(), path)
        data = bytearray(path.read_bytes())
        data[0] ^= 0xFF
        path.write_bytes(bytes(data))
        with pytest.raises(FormatError) as err:
            load_model(path)
        assert err.value.offset == 0
