"""The convolutional flow-feature extractor.

Architecture (channels-last), asserted against the reference shape chain at
construction time for the unscaled network:

    10x10x1 -> conv(32,3x3) -> conv(32,3x3) -> maxpool 2x2 -> conv(64,3x3)
    -> conv(64,3x3) -> flatten(1600) -> dense(512) -> softmax head

ReLU follows every convolution and the dense layer. A softmax head is
trained with minibatch SGD and kept for class-probability queries; the
512-feature dense output is the extracted representation handed to the SVM.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ..alerts import N_FLOW_FEATURES
from ..errors import TrainingError
from .layers import Conv2D, Dense, Flatten, MaxPool2D, Relu, ShapeError, \
    cross_entropy, softmax

GRID_SIDE = 10

REFERENCE_SHAPE_CHAIN = (
    (10, 10, 1),
    (10, 10, 32),
    (10, 10, 32),
    (5, 5, 32),
    (5, 5, 64),
    (5, 5, 64),
    (1600,),
    (512,),
)


def flow_to_grid(features: np.ndarray) -> np.ndarray:
    """Place 83 normalized features row-major into a 10x10x1 grid; the final
    17 cells stay zero."""
    features = np.asarray(features, dtype=np.float64)
    if features.shape != (N_FLOW_FEATURES,):
        raise ShapeError("flow_to_grid", (N_FLOW_FEATURES,), features.shape)
    grid = np.zeros(GRID_SIDE * GRID_SIDE)
    grid[:N_FLOW_FEATURES] = features
    return grid.reshape(GRID_SIDE, GRID_SIDE, 1)


def flows_to_grids(matrix: np.ndarray) -> np.ndarray:
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[1] != N_FLOW_FEATURES:
        raise ShapeError("flows_to_grids", ("n", N_FLOW_FEATURES), matrix.shape)
    grids = np.zeros((matrix.shape[0], GRID_SIDE * GRID_SIDE))
    grids[:, :N_FLOW_FEATURES] = matrix
    return grids.reshape(-1, GRID_SIDE, GRID_SIDE, 1)


def scaled_dims(filter_scale: float) -> tuple[int, int, int]:
    """(early filters, late filters, dense width) for a capacity scale."""
    if filter_scale <= 0:
        raise ValueError("filter_scale must be positive")
    f_early = max(1, round(32 * filter_scale))
    f_late = max(1, round(64 * filter_scale))
    dense = max(2, round(512 * filter_scale))
    return f_early, f_late, dense


def build_extractor_layers(filter_scale: float, rng: np.random.Generator):
    """Construct the feature stack and verify its shape chain by symbolic
    propagation. The unscaled stack must reproduce the reference chain."""
    f_early, f_late, dense = scaled_dims(filter_scale)
    layers = [
        Conv2D(1, f_early, rng=rng), Relu(),
        Conv2D(f_early, f_early, rng=rng), Relu(),
        MaxPool2D(),
        Conv2D(f_early, f_late, rng=rng), Relu(),
        Conv2D(f_late, f_late, rng=rng), Relu(),
        Flatten(),
        Dense(25 * f_late, dense, rng=rng), Relu(),
    ]
    chain = [(GRID_SIDE, GRID_SIDE, 1)]
    shape = chain[0]
    for layer in layers:
        shape = layer.output_shape(shape)
        if not isinstance(layer, Relu):
            chain.append(shape)
    if filter_scale == 1.0 and tuple(chain) != REFERENCE_SHAPE_CHAIN:
        raise ShapeError("extractor", REFERENCE_SHAPE_CHAIN, tuple(chain))
    return layers, tuple(chain)


class CnnFeatureExtractor(BaseEstimator, TransformerMixin):
    """Convolutional feature extractor with a trainable softmax head.

    ``fit`` runs minibatch SGD on cross-entropy; ``transform`` returns the
    dense-layer features; ``predict_proba`` keeps the softmax head available
    for confidence queries. Training is deterministic given the seed.
    """

    def __init__(self, filter_scale: float = 1.0, epochs: int = 10,
                 learning_rate: float = 0.05, batch_size: int = 32,
                 val_fraction: float = 0.1, seed: int = 0):
        self.filter_scale = filter_scale
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.val_fraction = val_fraction
        self.seed = seed
        # Fail fast on an inconsistent architecture; fit() rebuilds it.
        build_extractor_layers(filter_scale, np.random.default_rng(0))

    @property
    def shape_chain(self) -> tuple[tuple[int, ...], ...]:
        rng = np.random.default_rng(0)
        return build_extractor_layers(self.filter_scale, rng)[1]

    def _forward_features(self, grids, train_cache: list | None = None):
        out = grids
        for layer in self.layers_:
            out, cache = layer.forward(out)
            if train_cache is not None:
                train_cache.append(cache)
        return out

    def fit(self, X, y):
        X = np.asarray(X, dtype=np.float64)
        labels = np.asarray(y)
        self.classes_ = np.unique(labels)
        if len(self.classes_) < 2:
            raise ValueError("training needs at least two classes")
        class_index = {c: i for i, c in enumerate(self.classes_)}
        targets = np.array([class_index[c] for c in labels])

        rng = np.random.default_rng(np.random.SeedSequence([self.seed, 5]))
        self.layers_, self.shape_chain_ = build_extractor_layers(self.filter_scale, rng)
        dense_dim = self.shape_chain_[-1][0]
        self.head_ = Dense(dense_dim, len(self.classes_), rng=rng)

        n = len(X)
        order = rng.permutation(n)
        n_val = int(round(self.val_fraction * n))
        val_idx, train_idx = order[:n_val], order[n_val:]
        if len(train_idx) == 0:
            raise ValueError("validation fraction leaves no training data")
        grids = flows_to_grids(X)

        self.loss_curve_ = []
        for epoch in range(self.epochs):
            batch_order = rng.permutation(len(train_idx))
            total = 0.0
            for start in range(0, len(train_idx), self.batch_size):
                batch = train_idx[batch_order[start:start + self.batch_size]]
                loss = self._train_batch(grids[batch], targets[batch])
                total += loss * len(batch)
            train_loss = total / len(train_idx)
            if not np.isfinite(train_loss):
                raise TrainingError(f"non-finite training loss at epoch {epoch}")
            val_loss = None
            if len(val_idx):
                probs = self.predict_proba_grids(grids[val_idx])
                val_loss = cross_entropy(probs, targets[val_idx])
            self.loss_curve_.append((epoch, train_loss, val_loss))
        return self

    def _train_batch(self, grids, targets) -> float:
        caches: list = []
        feats = self._forward_features(grids, caches)
        logits, head_cache = self.head_.forward(feats)
        probs = softmax(logits)
        loss = cross_entropy(probs, targets)

        grad = probs.copy()
        grad[np.arange(len(targets)), targets] -= 1.0
        grad /= len(targets)
        grad, head_grads = self.head_.backward(head_cache, grad)
        self.head_.apply_grads(head_grads, self.learning_rate)
        for layer, cache in zip(reversed(self.layers_), reversed(caches)):
            grad, layer_grads = layer.backward(cache, grad)
            layer.apply_grads(layer_grads, self.learning_rate)
        return loss

    def transform(self, X) -> np.ndarray:
        check_is_fitted(self, "layers_")
        return self._forward_features(flows_to_grids(np.asarray(X, dtype=np.float64)))

    def predict_proba_grids(self, grids) -> np.ndarray:
        feats = self._forward_features(grids)
        return softmax(self.head_.forward(feats)[0])

    def predict_proba(self, X) -> np.ndarray:
        check_is_fitted(self, "layers_")
        return self.predict_proba_grids(flows_to_grids(np.asarray(X, dtype=np.float64)))

    def predict(self, X):
        probs = self.predict_proba(X)
        return self.classes_[probs.argmax(axis=1)]


def extractor_to_arrays(extractor: CnnFeatureExtractor) -> dict[str, np.ndarray]:
    """Flatten a fitted extractor's parameters for the binary container."""
    check_is_fitted(extractor, "layers_")
    arrays: dict[str, np.ndarray] = {}
    for i, layer in enumerate(extractor.layers_):
        for j, param in enumerate(layer.params()):
            arrays[f"layer{i:02d}.{j}"] = param
    for j, param in enumerate(extractor.head_.params()):
        arrays[f"head.{j}"] = param
    return arrays


def extractor_from_arrays(arrays: dict[str, np.ndarray], filter_scale: float,
                          classes) -> CnnFeatureExtractor:
    """Rebuild a fitted extractor from persisted parameters."""
    extractor = CnnFeatureExtractor(filter_scale=filter_scale)
    rng = np.random.default_rng(0)
    extractor.layers_, extractor.shape_chain_ = build_extractor_layers(filter_scale, rng)
    extractor.classes_ = np.asarray(classes)
    extractor.head_ = Dense(extractor.shape_chain_[-1][0], len(extractor.classes_), rng=rng)
    for i, layer in enumerate(extractor.layers_):
        for j, param in enumerate(layer.params()):
            stored = arrays[f"layer{i:02d}.{j}"]
            if stored.shape != param.shape:
                raise ShapeError("extractor", param.shape, stored.shape)
            param[...] = stored
    for j, param in enumerate(extractor.head_.params()):
        param[...] = arrays[f"head.{j}"]
    extractor.loss_curve_ = []
    return extractor
