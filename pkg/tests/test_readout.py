import hashlib
import math

import numpy as np
import pytest
from sklearn.base import clone

from ringres.readout import (
    BackpropReadout,
    ReadoutNet,
    RidgeReadout,
    SGDMomentum,
    TrainConfig,
    compute_loss,
    fit_backprop,
)
from ringres.ring import RingConfig, init_ring


def separable_toy(n=20, seed=0):
    """Two clusters split by the sign of feature 0, margin >= 1.4."""
    rng = np.random.default_rng(seed)
    half = n // 2
    X = np.vstack(
        [
            np.column_stack([rng.uniform(-1.3, -0.7, half), rng.uniform(-1, 1, half)]),
            np.column_stack([rng.uniform(0.7, 1.3, half), rng.uniform(-1, 1, half)]),
        ]
    )
    y = np.array([0] * half + [1] * half)
    return X, y


class TestLoss:
    def test_saturated_correct_logits_near_zero(self):
        logits = np.eye(4)[[0, 2, 1]] * 1000.0
        assert compute_loss(logits, np.array([0, 2, 1]), "cross_entropy") < 1e-6

    def test_uniform_logits_log_c(self):
        logits = np.zeros((5, 7))
        loss = compute_loss(logits, np.zeros(5, dtype=int), "cross_entropy")
        assert abs(loss - math.log(7)) < 1e-12

    def test_shift_invariance(self):
        rng = np.random.default_rng(0)
        logits = rng.standard_normal((6, 4))
        y = rng.integers(0, 4, size=6)
        a = compute_loss(logits, y, "cross_entropy")
        b = compute_loss(logits + 123.456, y, "cross_entropy")
        assert abs(a - b) < 1e-12

    def test_one_hot_matches_indices(self):
        rng = np.random.default_rng(1)
        logits = rng.standard_normal((6, 3))
        y = rng.integers(0, 3, size=6)
        onehot = np.eye(3)[y]
        a = compute_loss(logits, y, "cross_entropy")
        b = compute_loss(logits, onehot, "cross_entropy")
        assert abs(a - b) < 1e-14

    def test_invalid_class_index(self):
        with pytest.raises(ValueError, match="class index"):
            compute_loss(np.zeros((2, 3)), np.array([0, 3]), "cross_entropy")
        with pytest.raises(ValueError, match="class index"):
            compute_loss(np.zeros((2, 3)), np.array([-1, 0]), "cross_entropy")

    def test_mse_zero_on_match(self):
        P = np.random.default_rng(2).standard_normal((4, 3))
        assert compute_loss(P, P, "mean_squared_error") == 0.0

    def test_mse_mean_over_entries(self):
        P = np.zeros((2, 3))
        T = np.full((2, 3), 2.0)
        assert abs(compute_loss(P, T, "mean_squared_error") - 4.0) < 1e-15

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            compute_loss(np.zeros((2, 2)), np.zeros((2, 2)), "hinge")


class TestForward:
    def test_zero_input_zero_output(self):
        net = ReadoutNet(4, (6, 5), 3, seed=0)
        X = np.zeros((8, 4))
        np.testing.assert_array_equal(net.forward(X, "train"), np.zeros((8, 3)))
        np.testing.assert_array_equal(net.forward(X, "inference"), np.zeros((8, 3)))

    def test_inference_is_pure(self):
        net = ReadoutNet(4, (6,), 2, seed=1)
        X = np.random.default_rng(0).standard_normal((5, 4))
        rm_before = net.hidden[0][1].running_mean.copy()
        a = net.forward(X, "inference")
        b = net.forward(X, "inference")
        np.testing.assert_array_equal(a, b)
        np.testing.assert_array_equal(net.hidden[0][1].running_mean, rm_before)

    def test_train_updates_running_stats(self):
        net = ReadoutNet(4, (6,), 2, seed=1)
        X = np.random.default_rng(0).standard_normal((8, 4)) * 5
        net.forward(X, "train")
        assert not np.array_equal(net.hidden[0][1].running_mean, np.zeros(6))
        assert not np.array_equal(net.hidden[0][1].running_var, np.ones(6))

    def test_affine_only_net_matches_direct_product(self):
        net = ReadoutNet(5, (), 3, seed=2)
        X = np.random.default_rng(3).standard_normal((6, 5))
        want = X @ net.out.W + net.out.b
        got = net.forward(X, "inference")
        assert np.max(np.abs(got - want)) < 1e-12

    def test_train_batch_of_one_rejected(self):
        net = ReadoutNet(4, (6,), 2, seed=0)
        with pytest.raises(ValueError, match="2 rows"):
            net.forward(np.ones((1, 4)), "train")

    def test_width_mismatch_rejected(self):
        net = ReadoutNet(4, (6,), 2, seed=0)
        with pytest.raises(ValueError, match="width"):
            net.forward(np.ones((3, 5)), "inference")

    def test_invalid_mode_rejected(self):
        net = ReadoutNet(4, (6,), 2, seed=0)
        with pytest.raises(ValueError, match="mode"):
            net.forward(np.ones((3, 4)), "test")


class TestBatchNormProperty:
    def test_normalized_columns_single_layer(self):
        net = ReadoutNet(10, (16,), 2, seed=4)
        X = np.random.default_rng(5).standard_normal((32, 10)) * 10.0
        net.forward(X, "train")
        xhat = net._cache[0][0][1][0]
        assert np.max(np.abs(xhat.mean(axis=0))) < 1e-10
        assert np.max(np.abs(xhat.var(axis=0) - 1.0)) < 1e-6

    def test_normalized_columns_deeper_layer(self):
        net = ReadoutNet(10, (16, 12), 2, seed=6)
        # boost layer 1's scale so layer 2 sees high-variance inputs;
        # the eps in the variance floor is otherwise visible at 1e-6
        net.hidden[0][1].gamma[:] = 20.0
        X = np.random.default_rng(7).standard_normal((64, 10)) * 10.0
        net.forward(X, "train")
        for layer_idx in (0, 1):
            xhat = net._cache[0][layer_idx][1][0]
            assert np.max(np.abs(xhat.mean(axis=0))) < 1e-10
            assert np.max(np.abs(xhat.var(axis=0) - 1.0)) < 1e-6


def decay_penalty(net, wd):
    total = sum(np.sum(aff.W**2) for aff, _ in net.hidden)
    total += np.sum(net.out.W**2)
    return 0.5 * wd * total


def objective(net, X, T, kind, wd):
    return compute_loss(net.forward(X, "train"), T, kind) + decay_penalty(net, wd)


def finite_difference_check(kind, wd, seed, h=1e-5, tol=1e-4):
    rng = np.random.default_rng(seed)
    net = ReadoutNet(10, (8, 6), 3, seed=seed)
    X = rng.standard_normal((8, 10))
    if kind == "cross_entropy":
        T = rng.integers(0, 3, size=8)
    else:
        T = rng.standard_normal((8, 3))
    net.forward(X, "train")
    grads = net.backward(T, kind, wd)
    worst = 0.0
    for name, p in net.parameters():
        flat = p.reshape(-1)
        gflat = grads[name].reshape(-1)
        for i in range(flat.shape[0]):
            old = flat[i]
            flat[i] = old + h
            plus = objective(net, X, T, kind, wd)
            flat[i] = old - h
            minus = objective(net, X, T, kind, wd)
            flat[i] = old
            fd = (plus - minus) / (2 * h)
            rel = abs(gflat[i] - fd) / max(abs(gflat[i]), abs(fd), 1e-8)
            worst = max(worst, rel)
    assert worst < tol, f"worst relative gradient error {worst}"


class TestGradients:
    @pytest.mark.parametrize("kind", ["cross_entropy", "mean_squared_error"])
    def test_matches_finite_differences(self, kind):
        finite_difference_check(kind, wd=0.001, seed=8)

    def test_matches_finite_differences_no_decay(self):
        finite_difference_check("cross_entropy", wd=0.0, seed=9)

    def test_zero_signal_zero_gradients(self):
        net = ReadoutNet(5, (4,), 2, seed=10)
        X = np.random.default_rng(11).standard_normal((6, 5))
        out = net.forward(X, "train")
        grads = net.backward(out, "mean_squared_error", 0.0)
        for g in grads.values():
            assert np.max(np.abs(g)) < 1e-12

    def test_decay_only_gradient_is_scaled_weight(self):
        net = ReadoutNet(5, (4,), 2, seed=12)
        X = np.random.default_rng(13).standard_normal((6, 5))
        out = net.forward(X, "train")
        wd = 0.25
        grads = net.backward(out, "mean_squared_error", wd)
        np.testing.assert_array_equal(grads["out.W"], wd * net.out.W)
        np.testing.assert_array_equal(grads["hidden0.W"], wd * net.hidden[0][0].W)
        np.testing.assert_array_equal(grads["out.b"], np.zeros(2))

    def test_backward_without_train_forward_rejected(self):
        net = ReadoutNet(5, (4,), 2, seed=0)
        with pytest.raises(ValueError, match="train-mode forward"):
            net.backward(np.zeros((3, 2)), "mean_squared_error")

    def test_no_gradient_reaches_features(self):
        # grads cover parameters only; the feature matrix is untouched
        net = ReadoutNet(5, (4,), 2, seed=14)
        X = np.random.default_rng(15).standard_normal((6, 5))
        X_before = X.copy()
        net.forward(X, "train")
        grads = net.backward(np.zeros((6, 2)), "mean_squared_error", 0.001)
        np.testing.assert_array_equal(X, X_before)
        assert set(grads) == {name for name, _ in net.parameters()}


class TestSGD:
    def test_no_momentum_plain_step(self):
        p = np.array([1.0, 2.0])
        opt = SGDMomentum(learning_rate=0.1, momentum=0.0)
        opt.step([("p", p)], {"p": np.array([1.0, -1.0])})
        np.testing.assert_allclose(p, [0.9, 2.1], atol=1e-15)

    def test_two_steps_constant_gradient(self):
        lr, m = 0.1, 0.5
        p = np.array([0.0])
        g = {"p": np.array([2.0])}
        opt = SGDMomentum(learning_rate=lr, momentum=m)
        opt.step([("p", p)], g)
        opt.step([("p", p)], g)
        # v1=g, v2=m*g+g; total = -lr*g*(2+m)
        assert abs(p[0] - (-lr * 2.0 * (2 + m))) < 1e-15

    def test_zero_gradient_no_change(self):
        p = np.array([3.0, -4.0])
        opt = SGDMomentum(learning_rate=0.1, momentum=0.9)
        opt.step([("p", p)], {"p": np.zeros(2)})
        np.testing.assert_array_equal(p, [3.0, -4.0])


class TestTrainConfig:
    def test_defaults(self):
        cfg = TrainConfig()
        assert cfg.learning_rate == 0.001
        assert cfg.weight_decay == 0.001
        assert cfg.momentum == 0.01
        assert cfg.batch_size == 64
        assert cfg.epochs == 100

    @pytest.mark.parametrize(
        "overrides",
        [
            {"learning_rate": -1e-3},
            {"weight_decay": -0.1},
            {"momentum": -0.5},
            {"batch_size": 0},
            {"epochs": 0},
            {"loss": "huber"},
        ],
    )
    def test_rejects_invalid(self, overrides):
        with pytest.raises(ValueError):
            TrainConfig(**overrides)


class TestFitBackprop:
    def test_ridge_solves_toy_first(self):
        # sanity gate: the toy must be linearly separable before the
        # backprop claim below means anything
        X, y = separable_toy()
        model = RidgeReadout(alpha=0.01).fit(X, y)
        assert np.mean(model.predict(X) == y) == 1.0

    def test_reaches_full_train_accuracy_on_toy(self):
        X, y = separable_toy()
        cfg = TrainConfig(learning_rate=0.05, batch_size=20, epochs=200, seed=0)
        net = fit_backprop(X, y, (8,), cfg)
        pred = np.argmax(net.forward(X, "inference"), axis=1)
        assert np.mean(pred == y) == 1.0
        assert net.mode == "inference"

    def test_deterministic(self):
        X, y = separable_toy(seed=3)
        cfg = TrainConfig(epochs=5, batch_size=8, seed=42)
        a = fit_backprop(X, y, (6,), cfg)
        b = fit_backprop(X, y, (6,), cfg)
        for (na, pa), (nb, pb) in zip(a.parameters(), b.parameters()):
            assert na == nb
            assert np.array_equal(pa, pb)

    def test_single_step_when_batch_covers_data(self):
        X, y = separable_toy()
        cfg = TrainConfig(epochs=1, batch_size=64, seed=0)
        net = fit_backprop(X, y, (4,), cfg)
        assert net.n_steps == 1
        assert len(net.loss_history) == 1

    def test_partial_batch_kept_when_big_enough(self):
        X = np.random.default_rng(0).standard_normal((10, 3))
        y = np.arange(10) % 2
        cfg = TrainConfig(epochs=1, batch_size=8, seed=0)
        assert fit_backprop(X, y, (4,), cfg).n_steps == 2  # batches of 8 and 2

    def test_partial_batch_of_one_dropped(self):
        X = np.random.default_rng(0).standard_normal((9, 3))
        y = np.arange(9) % 2
        cfg = TrainConfig(epochs=1, batch_size=8, seed=0)
        assert fit_backprop(X, y, (4,), cfg).n_steps == 1

    def test_too_few_samples_rejected(self):
        with pytest.raises(ValueError, match="at least 2"):
            fit_backprop(np.ones((1, 3)), np.array([0]), (4,), TrainConfig())

    def test_loss_history_decreases_on_toy(self):
        X, y = separable_toy()
        cfg = TrainConfig(learning_rate=0.05, batch_size=20, epochs=50, seed=0)
        net = fit_backprop(X, y, (8,), cfg)
        assert net.loss_history[-1] < net.loss_history[0]

    def test_plateau_stops_early(self):
        # zero learning rate: loss is flat, so the plateau rule fires
        X, y = separable_toy()
        cfg = TrainConfig(learning_rate=0.0, batch_size=20, epochs=100, seed=0)
        net = fit_backprop(X, y, (4,), cfg)
        assert len(net.loss_history) < 100

    def test_one_hot_targets_accepted(self):
        X, y = separable_toy()
        cfg = TrainConfig(epochs=2, batch_size=20, seed=0)
        net = fit_backprop(X, np.eye(2)[y], (4,), cfg)
        assert net.output_dim == 2


class TestRidgeReadout:
    def test_identity_features_identity_weights(self):
        X = np.eye(3)
        model = RidgeReadout(alpha=0.0, task="regression").fit(X, np.eye(3))
        np.testing.assert_allclose(model.coef_, np.eye(3), atol=1e-10)

    def test_norm_monotone_in_alpha(self):
        rng = np.random.default_rng(20)
        X = rng.standard_normal((40, 8))
        y = rng.integers(0, 3, size=40)
        norms = [
            float(np.linalg.norm(RidgeReadout(alpha=a).fit(X, y).coef_))
            for a in (0.01, 0.1, 1.0, 10.0)
        ]
        assert all(a >= b for a, b in zip(norms, norms[1:]))

    def test_arbitrary_class_labels(self):
        X, y01 = separable_toy()
        y = np.where(y01 == 0, 3, 7)
        model = RidgeReadout(alpha=0.01).fit(X, y)
        assert set(model.predict(X)) <= {3, 7}
        assert np.mean(model.predict(X) == y) == 1.0

    def test_regression_shape_follows_targets(self):
        rng = np.random.default_rng(21)
        X = rng.standard_normal((30, 4))
        model = RidgeReadout(alpha=0.1, task="regression").fit(X, X @ rng.standard_normal(4))
        assert model.predict(X).ndim == 1
        model2 = RidgeReadout(alpha=0.1, task="regression").fit(
            X, rng.standard_normal((30, 2))
        )
        assert model2.predict(X).shape == (30, 2)

    def test_single_class_rejected(self):
        with pytest.raises(ValueError, match="2 classes"):
            RidgeReadout().fit(np.ones((5, 2)), np.zeros(5))

    def test_unknown_task_rejected(self):
        with pytest.raises(ValueError, match="task"):
            RidgeReadout(task="ranking").fit(np.ones((5, 2)), np.zeros(5))

    def test_feature_width_checked_at_predict(self):
        X, y = separable_toy()
        model = RidgeReadout(alpha=0.1).fit(X, y)
        with pytest.raises(ValueError, match="features"):
            model.predict(np.ones((3, 5)))


class TestBackpropReadout:
    def test_fit_predict_toy(self):
        X, y = separable_toy()
        model = BackpropReadout(
            hidden_sizes=(8,), learning_rate=0.05, batch_size=20, epochs=200, seed=0
        ).fit(X, y)
        assert np.mean(model.predict(X) == y) == 1.0
        np.testing.assert_array_equal(model.classes_, [0, 1])
        assert len(model.loss_history_) >= 1

    def test_deterministic(self):
        X, y = separable_toy(seed=5)
        kwargs = dict(hidden_sizes=(6,), epochs=5, batch_size=8, seed=9)
        a = BackpropReadout(**kwargs).fit(X, y).decision_function(X)
        b = BackpropReadout(**kwargs).fit(X, y).decision_function(X)
        np.testing.assert_array_equal(a, b)

    def test_regression_mode(self):
        rng = np.random.default_rng(22)
        X = rng.standard_normal((30, 4))
        y = X @ np.array([1.0, -1.0, 0.5, 0.0])
        model = BackpropReadout(
            hidden_sizes=(8,), task="regression", epochs=20, batch_size=10, seed=0
        ).fit(X, y)
        assert model.predict(X).shape == (30,)

    def test_clone_roundtrip(self):
        model = BackpropReadout(hidden_sizes=(5, 4), epochs=3, seed=2)
        assert clone(model).get_params() == model.get_params()


def ensemble_digest(ens):
    h = hashlib.sha256()
    for sub in ens.subs:
        h.update(sub.W_in.tobytes())
        h.update(sub.W_rec.tobytes())
    h.update(ens.W_shared.tobytes())
    return h.hexdigest()


class TestReservoirIsolation:
    def test_training_leaves_ensemble_untouched(self):
        ens = init_ring(
            RingConfig(n_subs=2, sub_size=8, input_dim=1, cross_talk=0.005, seed=0)
        )
        rng = np.random.default_rng(23)
        seqs = [rng.uniform(-1, 1, size=(10, 1)) for _ in range(12)]
        feats = np.stack([ens.harvest(s).ravel() for s in seqs])
        y = np.arange(12) % 2
        before = ensemble_digest(ens)
        BackpropReadout(hidden_sizes=(6,), epochs=10, batch_size=6, seed=0).fit(
            feats, y
        )
        assert ensemble_digest(ens) == before
