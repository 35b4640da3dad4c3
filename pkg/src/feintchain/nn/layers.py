"""Minimal differentiable layers over numpy arrays (channels-last).

Each layer exposes ``forward(x) -> (out, cache)`` and
``backward(cache, grad_out) -> (grad_in, param_grads)`` with exact analytic
gradients, plus ``params()``/``grads -> update`` hooks for SGD. Batches are
the leading axis everywhere.
"""
from __future__ import annotations

import numpy as np

from ..errors import FeintChainError


class ShapeError(FeintChainError, ValueError):
    """Input shape does not match a layer's contract."""

    def __init__(self, layer: str, expected, got):
        super().__init__(f"{layer}: expected input shape {expected}, got {got}")


def uniform_init(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int) -> np.ndarray:
    # He-scaled uniform: keeps activation variance stable under ReLU, so
    # plain SGD escapes the initial plateau on every seed.
    scale = np.sqrt(6.0 / fan_in)
    return rng.uniform(-scale, scale, size=shape)


class Layer:
    """Base class; stateless layers leave params empty."""

    name = "layer"

    def params(self) -> list[np.ndarray]:
        return []

    def apply_grads(self, grads: list[np.ndarray], lr: float) -> None:
        for param, grad in zip(self.params(), grads):
            param -= lr * grad

    def output_shape(self, input_shape: tuple[int, ...]) -> tuple[int, ...]:
        raise NotImplementedError

    def forward(self, x: np.ndarray):
        raise NotImplementedError

    def backward(self, cache, grad_out: np.ndarray):
        raise NotImplementedError


class Conv2D(Layer):
    """3x3-style convolution, padding 1, stride 1 (shape-preserving).

    Weights are (kh, kw, c_in, filters); inputs (n, h, w, c_in).
    """

    name = "conv2d"

    def __init__(self, in_channels: int, filters: int, kernel: int = 3,
                 pad: int = 1, rng: np.random.Generator | None = None):
        self.in_channels = in_channels
        self.filters = filters
        self.kernel = kernel
        self.pad = pad
        rng = rng or np.random.default_rng(0)
        fan_in = kernel * kernel * in_channels
        self.weights = uniform_init(rng, (kernel, kernel, in_channels, filters), fan_in)
        self.bias = np.zeros(filters)
        self._gather: dict[tuple[int, int], tuple[np.ndarray, np.ndarray]] = {}

    def params(self):
        return [self.weights, self.bias]

    def output_shape(self, input_shape):
        if len(input_shape) != 3 or input_shape[2] != self.in_channels:
            raise ShapeError(self.name, f"(h, w, {self.in_channels})", input_shape)
        h, w, _ = input_shape
        k, p = self.kernel, self.pad
        return (h + 2 * p - k + 1, w + 2 * p - k + 1, self.filters)

    def _indices(self, h_out: int, w_out: int):
        key = (h_out, w_out)
        if key not in self._gather:
            k = self.kernel
            i0 = np.repeat(np.arange(k), k)
            j0 = np.tile(np.arange(k), k)
            i1 = np.repeat(np.arange(h_out), w_out)
            j1 = np.tile(np.arange(w_out), h_out)
            self._gather[key] = (i1[:, None] + i0[None, :], j1[:, None] + j0[None, :])
        return self._gather[key]

    def forward(self, x):
        h_out, w_out, _ = self.output_shape(x.shape[1:])
        n = x.shape[0]
        xp = np.pad(x, ((0, 0), (self.pad, self.pad), (self.pad, self.pad), (0, 0)))
        ii, jj = self._indices(h_out, w_out)
        cols = xp[:, ii, jj, :].reshape(n, h_out * w_out, -1)
        w_mat = self.weights.reshape(-1, self.filters)
        out = (cols @ w_mat + self.bias).reshape(n, h_out, w_out, self.filters)
        return out, (cols, x.shape)

    def backward(self, cache, grad_out):
        cols, x_shape = cache
        n, h, w, c = x_shape
        h_out, w_out = grad_out.shape[1:3]
        flat = grad_out.reshape(n, h_out * w_out, self.filters)
        w_mat = self.weights.reshape(-1, self.filters)
        grad_w = np.tensordot(cols, flat, axes=([0, 1], [0, 1])).reshape(self.weights.shape)
        grad_b = flat.sum(axis=(0, 1))
        grad_cols = (flat @ w_mat.T).reshape(n, h_out * w_out, self.kernel * self.kernel, c)
        grad_xp = np.zeros((n, h + 2 * self.pad, w + 2 * self.pad, c))
        ii, jj = self._indices(h_out, w_out)
        np.add.at(grad_xp, (slice(None), ii, jj), grad_cols)
        grad_x = grad_xp[:, self.pad:self.pad + h, self.pad:self.pad + w, :]
        return grad_x, [grad_w, grad_b]


class MaxPool2D(Layer):
    """2x2 max pooling, stride 2. Gradients route to the argmax cell only
    (first maximum on ties)."""

    name = "maxpool2d"

    def output_shape(self, input_shape):
        if len(input_shape) != 3 or input_shape[0] % 2 or input_shape[1] % 2:
            raise ShapeError(self.name, "(2i, 2j, c)", input_shape)
        h, w, c = input_shape
        return (h // 2, w // 2, c)

    def forward(self, x):
        h2, w2, c = self.output_shape(x.shape[1:])
        n = x.shape[0]
        windows = (x.reshape(n, h2, 2, w2, 2, c)
                    .transpose(0, 1, 3, 5, 2, 4)
                    .reshape(n, h2, w2, c, 4))
        arg = windows.argmax(axis=-1)
        out = np.take_along_axis(windows, arg[..., None], axis=-1)[..., 0]
        return out, (arg, x.shape)

    def backward(self, cache, grad_out):
        arg, x_shape = cache
        n, h, w, c = x_shape
        h2, w2 = h // 2, w // 2
        grad_windows = np.zeros((n, h2, w2, c, 4))
        np.put_along_axis(grad_windows, arg[..., None], grad_out[..., None], axis=-1)
        grad_x = (grad_windows.reshape(n, h2, w2, c, 2, 2)
                  .transpose(0, 1, 4, 2, 5, 3)
                  .reshape(n, h, w, c))
        return grad_x, []


class Flatten(Layer):
    name = "flatten"

    def output_shape(self, input_shape):
        return (int(np.prod(input_shape)),)

    def forward(self, x):
        return x.reshape(x.shape[0], -1), x.shape

    def backward(self, cache, grad_out):
        return grad_out.reshape(cache), []


class Dense(Layer):
    """Affine map: x @ w + b."""

    name = "dense"

    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator | None = None):
        self.in_dim = in_dim
        self.out_dim = out_dim
        rng = rng or np.random.default_rng(0)
        self.weights = uniform_init(rng, (in_dim, out_dim), in_dim)
        self.bias = np.zeros(out_dim)

    def params(self):
        return [self.weights, self.bias]

    def output_shape(self, input_shape):
        if input_shape != (self.in_dim,):
            raise ShapeError(self.name, (self.in_dim,), input_shape)
        return (self.out_dim,)

    def forward(self, x):
        if x.shape[1] != self.in_dim:
            raise ShapeError(self.name, (self.in_dim,), x.shape[1:])
        return x @ self.weights + self.bias, x

    def backward(self, cache, grad_out):
        x = cache
        return (grad_out @ self.weights.T,
                [x.T @ grad_out, grad_out.sum(axis=0)])


class Relu(Layer):
    name = "relu"

    def output_shape(self, input_shape):
        return input_shape

    def forward(self, x):
        mask = x > 0
        return x * mask, mask

    def backward(self, cache, grad_out):
        return grad_out * cache, []


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


def cross_entropy(probs: np.ndarray, targets: np.ndarray) -> float:
    """Mean negative log-likelihood; targets are class indices."""
    eps = 1e-12
    picked = probs[np.arange(len(targets)), targets]
    return float(-np.log(np.clip(picked, eps, None)).mean())
