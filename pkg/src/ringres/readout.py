"""Readouts over harvested features: closed-form ridge and a backprop net.

The net is a stack of affine -> batch norm -> ReLU blocks with a final
affine layer, trained by minibatch SGD with classical momentum and coupled
L2 weight decay on the affine weights. Gradients never reach the features,
so the reservoir that produced them is untouched by training.

All arithmetic is float64 numpy. Batch norm uses biased batch variance
with eps=1e-5; running statistics follow an exponential moving average
with factor 0.1 and are what inference mode normalizes with.
"""

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .linalg import solve_ridge
from .validation import as_matrix

BN_EPS = 1e-5
BN_MOMENTUM = 0.1
LOSS_KINDS = ("cross_entropy", "mean_squared_error")
PLATEAU_WINDOW = 10
PLATEAU_REL_TOL = 1e-5


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.001
    weight_decay: float = 0.001
    momentum: float = 0.01
    batch_size: int = 64
    epochs: int = 100
    loss: str = "cross_entropy"
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate < 0 or self.weight_decay < 0 or self.momentum < 0:
            raise ValueError("learning_rate, weight_decay, momentum must be >= 0")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.loss not in LOSS_KINDS:
            raise ValueError(f"loss must be one of {LOSS_KINDS}, got {self.loss!r}")


def _one_hot(indices, n_classes):
    indices = np.asarray(indices)
    if indices.ndim != 1:
        raise ValueError(f"class indices must be 1-D, got shape {indices.shape}")
    if not np.issubdtype(indices.dtype, np.integer):
        if not np.all(indices == indices.astype(np.int64)):
            raise ValueError("class indices must be integers")
        indices = indices.astype(np.int64)
    if indices.size and (indices.min() < 0 or indices.max() >= n_classes):
        raise ValueError(
            f"class index out of range [0, {n_classes}): "
            f"min {indices.min()}, max {indices.max()}"
        )
    out = np.zeros((indices.shape[0], n_classes))
    out[np.arange(indices.shape[0]), indices] = 1.0
    return out


def _softmax(logits):
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _as_target_matrix(targets, kind, n_outputs):
    """Normalize targets to a (N, n_outputs) matrix for loss evaluation."""
    targets = np.asarray(targets)
    if kind == "cross_entropy":
        if targets.ndim == 1:
            return _one_hot(targets, n_outputs)
        targets = np.asarray(targets, dtype=np.float64)
        if targets.shape[1] != n_outputs:
            raise ValueError(
                f"one-hot targets have width {targets.shape[1]}, "
                f"expected {n_outputs}"
            )
        return targets
    targets = np.asarray(targets, dtype=np.float64)
    if targets.ndim == 1:
        targets = targets[:, None]
    if targets.shape[1] != n_outputs:
        raise ValueError(
            f"targets have width {targets.shape[1]}, expected {n_outputs}"
        )
    return targets


def compute_loss(predictions, targets, kind):
    """Mean loss over a batch.

    cross_entropy: mean over rows of -log softmax(logits)[true class],
    computed with the max-shift so huge logits stay finite. targets may be
    class indices or a one-hot matrix. mean_squared_error: mean of squared
    error over every entry of the batch.
    """
    predictions = as_matrix(predictions, "predictions")
    if kind not in LOSS_KINDS:
        raise ValueError(f"loss must be one of {LOSS_KINDS}, got {kind!r}")
    T = _as_target_matrix(targets, kind, predictions.shape[1])
    if T.shape[0] != predictions.shape[0]:
        raise ValueError(
            f"{predictions.shape[0]} predictions but {T.shape[0]} targets"
        )
    if kind == "cross_entropy":
        shifted = predictions - predictions.max(axis=1, keepdims=True)
        log_norm = np.log(np.exp(shifted).sum(axis=1))
        return float(np.mean(log_norm - (shifted * T).sum(axis=1)))
    return float(np.mean((predictions - T) ** 2))


def _loss_grad(predictions, T, kind):
    n, k = predictions.shape
    if kind == "cross_entropy":
        return (_softmax(predictions) - T) / n
    return 2.0 * (predictions - T) / (n * k)


class _Affine:
    def __init__(self, rng, n_in, n_out):
        limit = np.sqrt(6.0 / (n_in + n_out))
        self.W = rng.uniform(-limit, limit, size=(n_in, n_out))
        self.b = np.zeros(n_out)

    def forward(self, x):
        return x @ self.W + self.b

    def backward(self, x, dout):
        return x.T @ dout, dout.sum(axis=0), dout @ self.W.T


class _BatchNorm:
    def __init__(self, width):
        self.gamma = np.ones(width)
        self.shift = np.zeros(width)
        self.running_mean = np.zeros(width)
        self.running_var = np.ones(width)

    def forward_train(self, x):
        mu = x.mean(axis=0)
        var = x.var(axis=0)  # biased: divide by N
        ivar = 1.0 / np.sqrt(var + BN_EPS)
        xhat = (x - mu) * ivar
        self.running_mean = (1 - BN_MOMENTUM) * self.running_mean + BN_MOMENTUM * mu
        self.running_var = (1 - BN_MOMENTUM) * self.running_var + BN_MOMENTUM * var
        return self.gamma * xhat + self.shift, (xhat, ivar)

    def forward_inference(self, x):
        xhat = (x - self.running_mean) / np.sqrt(self.running_var + BN_EPS)
        return self.gamma * xhat + self.shift

    def backward(self, cache, dout):
        xhat, ivar = cache
        n = dout.shape[0]
        dgamma = (dout * xhat).sum(axis=0)
        dshift = dout.sum(axis=0)
        dxhat = dout * self.gamma
        # gradient through the batch statistics: since mu and var are
        # functions of every row, dx couples the whole batch
        dx = (ivar / n) * (
            n * dxhat - dxhat.sum(axis=0) - xhat * (dxhat * xhat).sum(axis=0)
        )
        return dgamma, dshift, dx


class ReadoutNet:
    """Affine/batch-norm/ReLU stack with a bare affine output layer.

    mode is "train" or "inference". Train-mode forward caches the batch
    for backward and updates batch-norm running statistics; inference-mode
    forward is a pure function of the parameters.
    """

    def __init__(self, input_dim, hidden_sizes, output_dim, seed=0):
        if input_dim < 1 or output_dim < 1:
            raise ValueError("input_dim and output_dim must be >= 1")
        if any(h < 1 for h in hidden_sizes):
            raise ValueError(f"hidden sizes must be >= 1, got {hidden_sizes}")
        self.input_dim = int(input_dim)
        self.hidden_sizes = tuple(int(h) for h in hidden_sizes)
        self.output_dim = int(output_dim)
        self.seed = int(seed)
        rng = np.random.default_rng(seed)
        self.hidden = []
        n_in = input_dim
        for h in self.hidden_sizes:
            self.hidden.append((_Affine(rng, n_in, h), _BatchNorm(h)))
            n_in = h
        self.out = _Affine(rng, n_in, output_dim)
        self.mode = "train"
        self._cache = None

    def parameters(self):
        """(name, array) pairs; arrays are live views updated in place."""
        params = []
        for i, (aff, bn) in enumerate(self.hidden):
            params.append((f"hidden{i}.W", aff.W))
            params.append((f"hidden{i}.b", aff.b))
            params.append((f"hidden{i}.gamma", bn.gamma))
            params.append((f"hidden{i}.shift", bn.shift))
        params.append(("out.W", self.out.W))
        params.append(("out.b", self.out.b))
        return params

    def forward(self, batch, mode=None):
        mode = self.mode if mode is None else mode
        if mode not in ("train", "inference"):
            raise ValueError(f"mode must be 'train' or 'inference', got {mode!r}")
        x = as_matrix(batch, "batch")
        if x.shape[1] != self.input_dim:
            raise ValueError(
                f"batch width {x.shape[1]} does not match input_dim "
                f"{self.input_dim}"
            )
        if mode == "train":
            if x.shape[0] < 2:
                raise ValueError(
                    "train-mode forward needs a batch of >= 2 rows "
                    "for batch statistics"
                )
            caches = []
            for aff, bn in self.hidden:
                a = aff.forward(x)
                h, bn_cache = bn.forward_train(a)
                relu_mask = h > 0
                caches.append((x, bn_cache, relu_mask))
                x = h * relu_mask
            out = self.out.forward(x)
            self._cache = (caches, x, out)
            return out
        for aff, bn in self.hidden:
            x = np.maximum(bn.forward_inference(aff.forward(x)), 0.0)
        return self.out.forward(x)

    def backward(self, targets, kind, weight_decay=0.0):
        """Gradients of loss + (wd/2)*sum ||W||^2 for the cached batch.

        Requires a preceding train-mode forward. The decay term covers
        affine weights only, never biases or batch-norm parameters.
        """
        if self._cache is None:
            raise ValueError("backward requires a train-mode forward first")
        caches, last_hidden, out = self._cache
        T = _as_target_matrix(targets, kind, self.output_dim)
        if T.shape[0] != out.shape[0]:
            raise ValueError(
                f"{out.shape[0]} cached predictions but {T.shape[0]} targets"
            )
        grads = {}
        dW, db, dx = self.out.backward(last_hidden, _loss_grad(out, T, kind))
        grads["out.W"] = dW + weight_decay * self.out.W
        grads["out.b"] = db
        for i in range(len(self.hidden) - 1, -1, -1):
            aff, bn = self.hidden[i]
            x_in, bn_cache, relu_mask = caches[i]
            dh = dx * relu_mask
            dgamma, dshift, da = bn.backward(bn_cache, dh)
            dW, db, dx = aff.backward(x_in, da)
            grads[f"hidden{i}.W"] = dW + weight_decay * aff.W
            grads[f"hidden{i}.b"] = db
            grads[f"hidden{i}.gamma"] = dgamma
            grads[f"hidden{i}.shift"] = dshift
        return grads


class SGDMomentum:
    """Classical momentum: v <- momentum*v + g; p <- p - lr*v."""

    def __init__(self, learning_rate, momentum):
        self.learning_rate = learning_rate
        self.momentum = momentum
        self.velocity = {}

    def step(self, params, grads):
        for name, p in params:
            v = self.velocity.get(name)
            if v is None:
                v = np.zeros_like(p)
            v = self.momentum * v + grads[name]
            self.velocity[name] = v
            p -= self.learning_rate * v


def fit_backprop(features, targets, hidden_sizes, cfg, n_outputs=None):
    """Train a ReadoutNet on fixed features; returns it in inference mode.

    Rows are shuffled each epoch with a permutation stream seeded by
    cfg.seed (which also seeds the weight init). The trailing partial
    minibatch is kept when it has at least 2 rows and dropped otherwise.
    Training stops early once the epoch loss improves by less than
    PLATEAU_REL_TOL relative over PLATEAU_WINDOW epochs. The returned net
    carries loss_history (mean epoch loss) and n_steps.
    """
    X = as_matrix(features, "features")
    if X.shape[0] < 2:
        raise ValueError(f"need at least 2 samples to train, got {X.shape[0]}")
    if n_outputs is None:
        t = np.asarray(targets)
        if cfg.loss == "cross_entropy":
            n_outputs = t.shape[1] if t.ndim == 2 else int(t.max()) + 1
        else:
            n_outputs = t.shape[1] if t.ndim == 2 else 1
    T = _as_target_matrix(targets, cfg.loss, n_outputs)
    if T.shape[0] != X.shape[0]:
        raise ValueError(f"{X.shape[0]} samples but {T.shape[0]} targets")

    net = ReadoutNet(X.shape[1], hidden_sizes, n_outputs, seed=cfg.seed)
    opt = SGDMomentum(cfg.learning_rate, cfg.momentum)
    rng = np.random.default_rng(cfg.seed)
    history = []
    n_steps = 0
    for _ in range(cfg.epochs):
        order = rng.permutation(X.shape[0])
        epoch_losses = []
        for start in range(0, X.shape[0], cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            if idx.shape[0] < cfg.batch_size and idx.shape[0] < 2:
                continue
            xb, tb = X[idx], T[idx]
            out = net.forward(xb, mode="train")
            epoch_losses.append(compute_loss(out, tb, cfg.loss))
            grads = net.backward(tb, cfg.loss, cfg.weight_decay)
            opt.step(net.parameters(), grads)
            n_steps += 1
        if epoch_losses:
            history.append(float(np.mean(epoch_losses)))
        if len(history) > PLATEAU_WINDOW:
            prev = history[-1 - PLATEAU_WINDOW]
            if prev - history[-1] < PLATEAU_REL_TOL * max(abs(prev), 1e-12):
                break
    net.mode = "inference"
    net.loss_history = history
    net.n_steps = n_steps
    return net


TASK_KINDS = ("classification", "regression")


def _check_task(task):
    if task not in TASK_KINDS:
        raise ValueError(f"task must be one of {TASK_KINDS}, got {task!r}")


class RidgeReadout(BaseEstimator):
    """Closed-form linear readout: y = x W, fitted by ridge regression.

    Classification one-hot encodes the labels, fits W against the
    indicator matrix, and predicts by argmax of the linear scores (ties
    break toward the lowest class index).
    """

    def __init__(self, alpha=0.1, task="classification"):
        self.alpha = alpha
        self.task = task

    def fit(self, X, y):
        _check_task(self.task)
        X = as_matrix(X, "X")
        y = np.asarray(y)
        if y.shape[0] != X.shape[0]:
            raise ValueError(f"{X.shape[0]} samples but {y.shape[0]} targets")
        if self.task == "classification":
            self.classes_, indices = np.unique(y, return_inverse=True)
            if self.classes_.shape[0] < 2:
                raise ValueError("classification needs at least 2 classes")
            Y = _one_hot(indices, self.classes_.shape[0])
        else:
            self._y_was_1d = y.ndim == 1
            Y = np.asarray(y, dtype=np.float64)
            if Y.ndim == 1:
                Y = Y[:, None]
        self.coef_ = solve_ridge(X, Y, self.alpha)
        self.n_features_in_ = X.shape[1]
        return self

    def decision_function(self, X):
        check_is_fitted(self, "coef_")
        X = as_matrix(X, "X")
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} features, expected {self.n_features_in_}"
            )
        return X @ self.coef_

    def predict(self, X):
        scores = self.decision_function(X)
        if self.task == "classification":
            return self.classes_[np.argmax(scores, axis=1)]
        return scores[:, 0] if self._y_was_1d else scores


class BackpropReadout(BaseEstimator):
    """ReadoutNet wrapped as an estimator; see fit_backprop for training."""

    def __init__(
        self,
        hidden_sizes=(256, 128),
        learning_rate=0.001,
        weight_decay=0.001,
        momentum=0.01,
        batch_size=64,
        epochs=100,
        task="classification",
        seed=0,
    ):
        self.hidden_sizes = hidden_sizes
        self.learning_rate = learning_rate
        self.weight_decay = weight_decay
        self.momentum = momentum
        self.batch_size = batch_size
        self.epochs = epochs
        self.task = task
        self.seed = seed

    def _train_config(self):
        loss = (
            "cross_entropy" if self.task == "classification"
            else "mean_squared_error"
        )
        return TrainConfig(
            learning_rate=self.learning_rate,
            weight_decay=self.weight_decay,
            momentum=self.momentum,
            batch_size=self.batch_size,
            epochs=self.epochs,
            loss=loss,
            seed=self.seed,
        )

    def fit(self, X, y):
        _check_task(self.task)
        X = as_matrix(X, "X")
        y = np.asarray(y)
        if y.shape[0] != X.shape[0]:
            raise ValueError(f"{X.shape[0]} samples but {y.shape[0]} targets")
        if self.task == "classification":
            self.classes_, indices = np.unique(y, return_inverse=True)
            if self.classes_.shape[0] < 2:
                raise ValueError("classification needs at least 2 classes")
            targets = indices
            n_outputs = self.classes_.shape[0]
        else:
            self._y_was_1d = y.ndim == 1
            targets = np.asarray(y, dtype=np.float64)
            n_outputs = 1 if targets.ndim == 1 else targets.shape[1]
        self.net_ = fit_backprop(
            X, targets, self.hidden_sizes, self._train_config(), n_outputs
        )
        self.loss_history_ = list(self.net_.loss_history)
        self.n_features_in_ = X.shape[1]
        return self

    def decision_function(self, X):
        check_is_fitted(self, "net_")
        X = as_matrix(X, "X")
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} features, expected {self.n_features_in_}"
            )
        return self.net_.forward(X, mode="inference")

    def predict(self, X):
        scores = self.decision_function(X)
        if self.task == "classification":
            return self.classes_[np.argmax(scores, axis=1)]
        return scores[:, 0] if self._y_was_1d else scores
