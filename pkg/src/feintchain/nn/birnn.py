"""Bidirectional tanh-recurrent sequence encoder.

Two independent cells read the step sequence in opposite directions; the
encoding is the concatenation of the forward cell's final state with the
backward cell's state at the first step (its own final state), length 2H.
A logistic head allows end-to-end training on binary chain labels; the
frozen encoder then serves as a fixed-dimension feature map.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ..errors import TrainingError
from .layers import ShapeError, uniform_init


class RnnCell:
    """h_t = tanh(x_t @ w_in + h_{t-1} @ w_rec + bias)."""

    def __init__(self, input_dim: int, hidden: int, rng: np.random.Generator):
        self.input_dim = input_dim
        self.hidden = hidden
        self.w_in = uniform_init(rng, (input_dim, hidden), input_dim)
        self.w_rec = uniform_init(rng, (hidden, hidden), hidden)
        self.bias = np.zeros(hidden)

    def params(self):
        return [self.w_in, self.w_rec, self.bias]

    def run(self, steps: np.ndarray) -> np.ndarray:
        """All hidden states for a (n, t, d) batch; returns (n, t, h)."""
        n, t, _ = steps.shape
        states = np.zeros((n, t, self.hidden))
        h = np.zeros((n, self.hidden))
        for i in range(t):
            h = np.tanh(steps[:, i] @ self.w_in + h @ self.w_rec + self.bias)
            states[:, i] = h
        return states

    def backward(self, steps: np.ndarray, states: np.ndarray,
                 grad_final: np.ndarray):
        """Backpropagation through time from a gradient on the final state.

        Returns (grad_steps, [grad_w_in, grad_w_rec, grad_bias]).
        """
        n, t, _ = steps.shape
        grad_w_in = np.zeros_like(self.w_in)
        grad_w_rec = np.zeros_like(self.w_rec)
        grad_bias = np.zeros_like(self.bias)
        grad_steps = np.zeros_like(steps)
        grad_h = grad_final
        for i in range(t - 1, -1, -1):
            pre = grad_h * (1.0 - states[:, i] ** 2)
            grad_w_in += steps[:, i].T @ pre
            grad_bias += pre.sum(axis=0)
            prev = states[:, i - 1] if i > 0 else np.zeros((n, self.hidden))
            grad_w_rec += prev.T @ pre
            grad_steps[:, i] = pre @ self.w_in.T
            grad_h = pre @ self.w_rec.T
        return grad_steps, [grad_w_in, grad_w_rec, grad_bias]


class BiRnnEncoder(BaseEstimator, TransformerMixin):
    """Fixed-length chain encoder with an optional logistic training head.

    ``transform`` maps (n, t, d) step batches to (n, 2 * hidden_size)
    encodings. ``fit`` trains both cells and the head with minibatch SGD on
    binary labels; deterministic given the seed.
    """

    def __init__(self, hidden_size: int = 32, epochs: int = 20,
                 learning_rate: float = 0.05, batch_size: int = 64,
                 seed: int = 0):
        self.hidden_size = hidden_size
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.seed = seed

    def initialize(self, input_dim: int) -> "BiRnnEncoder":
        """Build seeded cells without training, so the encoder can be used
        as a fixed random feature map."""
        rng = np.random.default_rng(np.random.SeedSequence([self.seed, 7]))
        self.forward_cell_ = RnnCell(input_dim, self.hidden_size, rng)
        self.backward_cell_ = RnnCell(input_dim, self.hidden_size, rng)
        self.head_w_ = uniform_init(rng, (2 * self.hidden_size,), 2 * self.hidden_size)
        self.head_b_ = 0.0
        self.input_dim_ = input_dim
        return self

    @staticmethod
    def _check_steps(X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 3 or X.shape[1] == 0:
            raise ShapeError("birnn", "(n, steps, features) with steps >= 1", X.shape)
        return X

    def _encode(self, X: np.ndarray):
        fwd = self.forward_cell_.run(X)
        bwd = self.backward_cell_.run(X[:, ::-1])
        return np.concatenate([fwd[:, -1], bwd[:, -1]], axis=1), fwd, bwd

    def fit(self, X, y):
        X = self._check_steps(X)
        y = np.asarray(y, dtype=np.float64)
        if set(np.unique(y)) - {0.0, 1.0}:
            raise ValueError("labels must be binary 0/1")
        if len(np.unique(y)) < 2:
            raise ValueError("training needs both labels present")
        self.initialize(X.shape[2])
        rng = np.random.default_rng(np.random.SeedSequence([self.seed, 8]))

        self.loss_curve_ = []
        for epoch in range(self.epochs):
            order = rng.permutation(len(X))
            total = 0.0
            for start in range(0, len(X), self.batch_size):
                batch = order[start:start + self.batch_size]
                total += self._train_batch(X[batch], y[batch]) * len(batch)
            loss = total / len(X)
            if not np.isfinite(loss):
                raise TrainingError(f"non-finite training loss at epoch {epoch}")
            self.loss_curve_.append((epoch, loss))
        return self

    def _train_batch(self, X, y) -> float:
        enc, fwd, bwd = self._encode(X)
        logits = enc @ self.head_w_ + self.head_b_
        probs = 1.0 / (1.0 + np.exp(-logits))
        eps = 1e-12
        loss = float(-(y * np.log(probs + eps)
                       + (1 - y) * np.log(1 - probs + eps)).mean())

        grad_logits = (probs - y) / len(y)
        grad_enc = grad_logits[:, None] * self.head_w_[None, :]
        grad_head_w = enc.T @ grad_logits
        grad_head_b = grad_logits.sum()

        half = self.hidden_size
        _, fwd_grads = self.forward_cell_.backward(X, fwd, grad_enc[:, :half])
        _, bwd_grads = self.backward_cell_.backward(X[:, ::-1], bwd, grad_enc[:, half:])

        lr = self.learning_rate
        for param, grad in zip(self.forward_cell_.params(), fwd_grads):
            param -= lr * grad
        for param, grad in zip(self.backward_cell_.params(), bwd_grads):
            param -= lr * grad
        self.head_w_ -= lr * grad_head_w
        self.head_b_ -= lr * grad_head_b
        return loss

    def transform(self, X) -> np.ndarray:
        check_is_fitted(self, "forward_cell_")
        return self._encode(self._check_steps(X))[0]

    def predict_proba(self, X) -> np.ndarray:
        enc = self.transform(X)
        return 1.0 / (1.0 + np.exp(-(enc @ self.head_w_ + self.head_b_)))


def encode_sequence(encoder: BiRnnEncoder, steps) -> np.ndarray:
    """Encode one step sequence to its 2H vector."""
    steps = np.asarray(steps, dtype=np.float64)
    if steps.ndim != 2 or steps.shape[0] == 0:
        raise ValueError("steps must be a non-empty (t, d) sequence")
    return encoder.transform(steps[None, :, :])[0]


def encoder_to_arrays(encoder: BiRnnEncoder) -> dict[str, np.ndarray]:
    check_is_fitted(encoder, "forward_cell_")
    arrays: dict[str, np.ndarray] = {}
    for prefix, cell in (("fwd", encoder.forward_cell_), ("bwd", encoder.backward_cell_)):
        arrays[f"{prefix}.w_in"] = cell.w_in
        arrays[f"{prefix}.w_rec"] = cell.w_rec
        arrays[f"{prefix}.bias"] = cell.bias
    arrays["head.w"] = encoder.head_w_
    arrays["head.b"] = np.array([encoder.head_b_])
    return arrays


def encoder_from_arrays(arrays: dict[str, np.ndarray],
                        hidden_size: int) -> BiRnnEncoder:
    input_dim = arrays["fwd.w_in"].shape[0]
    encoder = BiRnnEncoder(hidden_size=hidden_size).initialize(input_dim)
    for prefix, cell in (("fwd", encoder.forward_cell_), ("bwd", encoder.backward_cell_)):
        cell.w_in[...] = arrays[f"{prefix}.w_in"]
        cell.w_rec[...] = arrays[f"{prefix}.w_rec"]
        cell.bias[...] = arrays[f"{prefix}.bias"]
    encoder.head_w_[...] = arrays["head.w"]
    encoder.head_b_ = float(arrays["head.b"][0])
    return encoder
