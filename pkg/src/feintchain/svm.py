"""RBF-kernel support vector classification trained by sequential minimal
optimization.

The binary solver maintains the dual gradient and repeatedly updates a
maximal-violating pair until no pair violates the KKT conditions by more
than the tolerance. Multiclass problems are handled one-vs-rest with the
binary models arranged by descending class frequency; prediction takes the
argmax decision value in that order.
"""
from __future__ import annotations

import io
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .errors import ConvergenceError, FormatError
from .validation import check_feature_matrix, check_labels, check_positive

DEFAULT_C_GRID = (0.1, 0.5, 1.0, 5.0)
DEFAULT_GAMMA_GRID = (0.1, 0.5, 1.0, 2.0)


def rbf_kernel(u: np.ndarray, v: np.ndarray, gamma: float) -> np.ndarray:
    """k(u, v) = exp(-gamma * ||u - v||^2) for row batches u, v."""
    u = np.atleast_2d(u)
    v = np.atleast_2d(v)
    sq = (np.sum(u * u, axis=1)[:, None] + np.sum(v * v, axis=1)[None, :]
          - 2.0 * u @ v.T)
    return np.exp(-gamma * np.maximum(sq, 0.0))


class SmoSvc(BaseEstimator, ClassifierMixin):
    """Binary soft-margin SVC with an RBF kernel, solved by SMO.

    Labels must be -1/+1. ``seed`` is accepted for interface symmetry; the
    maximal-violating-pair schedule is already deterministic.
    """

    def __init__(self, C: float = 1.0, gamma: float = 1.0, tol: float = 1e-3,
                 max_iter: int = 1_000_000, seed: int = 0):
        self.C = C
        self.gamma = gamma
        self.tol = tol
        self.max_iter = max_iter
        self.seed = seed

    def fit(self, X, y):
        X = check_feature_matrix(X)
        y = check_labels(y, len(X)).astype(np.float64)
        if set(np.unique(y)) != {-1.0, 1.0}:
            raise ValueError("binary training needs both labels -1 and +1")
        check_positive(self.C, "C")
        check_positive(self.gamma, "gamma")

        n = len(X)
        kernel = rbf_kernel(X, X, self.gamma)
        alpha = np.zeros(n)
        # g_k = 1 - y_k * sum_j alpha_j y_j K_jk, the KKT violation scores.
        g = np.ones(n)
        beta_hi = np.where(y > 0, self.C, 0.0)   # upper bounds of y*alpha
        beta_lo = np.where(y > 0, 0.0, -self.C)  # lower bounds of y*alpha

        iterations = 0
        violation = 0.0
        while True:
            if iterations >= self.max_iter:
                raise ConvergenceError(
                    f"SMO did not converge within {self.max_iter} iterations "
                    f"(tol={self.tol})")
            iterations += 1
            yg = y * g
            beta = y * alpha
            up = beta < beta_hi - 1e-12
            lo = beta > beta_lo + 1e-12
            if not up.any() or not lo.any():
                violation = 0.0  # no candidate pair left: KKT satisfied
                break
            i = np.where(up)[0][np.argmax(yg[up])]
            j = np.where(lo)[0][np.argmin(yg[lo])]
            violation = yg[i] - yg[j]
            if violation <= self.tol:
                break
            quad = max(kernel[i, i] + kernel[j, j] - 2.0 * kernel[i, j], 1e-12)
            step = min(beta_hi[i] - beta[i], beta[j] - beta_lo[j], violation / quad)
            alpha[i] += y[i] * step
            alpha[j] -= y[j] * step
            g += step * y * (kernel[j] - kernel[i])

        self.kkt_violation_ = float(max(violation, 0.0))
        yg = y * g
        beta = y * alpha
        up = beta < beta_hi - 1e-12
        lo = beta > beta_lo + 1e-12
        if up.any() and lo.any():
            self.bias_ = float((yg[up].max() + yg[lo].min()) / 2.0)
        else:
            self.bias_ = 0.0

        support = alpha > 1e-12
        self.support_vectors_ = X[support]
        self.dual_coef_ = (alpha * y)[support]
        self.n_iter_ = iterations
        self.classes_ = np.array([-1.0, 1.0])
        return self

    def decision_function(self, X) -> np.ndarray:
        check_is_fitted(self, "support_vectors_")
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.support_vectors_.shape[1]:
            raise ValueError(
                f"expected (n, {self.support_vectors_.shape[1]}) inputs, got {X.shape}")
        if len(self.support_vectors_) == 0:
            return np.full(len(X), self.bias_)
        k = rbf_kernel(X, self.support_vectors_, self.gamma)
        return k @ self.dual_coef_ + self.bias_

    def predict(self, X) -> np.ndarray:
        return np.where(self.decision_function(X) > 0, 1.0, -1.0)


class MulticlassSvc(BaseEstimator, ClassifierMixin):
    """One-vs-rest arrangement of binary SMO models.

    Models are ordered by descending class frequency (ties by label);
    predictions take the class with the largest decision value, earlier
    classes winning exact ties.
    """

    def __init__(self, C: float = 1.0, gamma: float = 1.0, tol: float = 1e-3,
                 max_iter: int = 1_000_000, seed: int = 0):
        self.C = C
        self.gamma = gamma
        self.tol = tol
        self.max_iter = max_iter
        self.seed = seed

    def fit(self, X, y):
        X = check_feature_matrix(X)
        y = check_labels(y, len(X))
        labels, counts = np.unique(y, return_counts=True)
        if len(labels) < 2:
            raise ValueError("multiclass training needs at least two classes")
        order = sorted(range(len(labels)), key=lambda i: (-counts[i], str(labels[i])))
        self.classes_ = labels[order]
        self.models_ = []
        for cls in self.classes_:
            target = np.where(y == cls, 1.0, -1.0)
            model = SmoSvc(self.C, self.gamma, self.tol, self.max_iter, self.seed)
            self.models_.append(model.fit(X, target))
        return self

    def decision_values(self, X) -> np.ndarray:
        check_is_fitted(self, "models_")
        return np.stack([m.decision_function(X) for m in self.models_], axis=1)

    def predict(self, X) -> np.ndarray:
        values = self.decision_values(X)
        return self.classes_[values.argmax(axis=1)]


def stratified_folds(y, folds: int, seed: int = 0) -> np.ndarray:
    """Seeded per-class round-robin fold assignment."""
    y = np.asarray(y)
    if folds < 2:
        raise ValueError("folds must be >= 2")
    labels, counts = np.unique(y, return_counts=True)
    smallest = counts.min()
    if folds > smallest:
        raise ValueError(
            f"folds={folds} exceeds the smallest class size {smallest}")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 13]))
    assignment = np.zeros(len(y), dtype=np.int64)
    for cls in labels:
        idx = np.where(y == cls)[0]
        idx = idx[rng.permutation(len(idx))]
        assignment[idx] = np.arange(len(idx)) % folds
    return assignment


def grid_search_cv(X, y, folds: int = 5,
                   c_grid=DEFAULT_C_GRID, gamma_grid=DEFAULT_GAMMA_GRID,
                   seed: int = 0, tol: float = 1e-3) -> tuple[float, float, float]:
    """Pick (C, gamma) maximizing mean stratified CV accuracy.

    Ties resolve to the smallest C, then the smallest gamma. Returns
    (best_c, best_gamma, best_accuracy).
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if len(c_grid) == 0 or len(gamma_grid) == 0:
        raise ValueError("parameter grids must be non-empty")
    assignment = stratified_folds(y, folds, seed)

    best: tuple[float, float, float] | None = None
    for c in sorted(c_grid):
        for gamma in sorted(gamma_grid):
            scores = []
            for fold in range(folds):
                train = assignment != fold
                test = ~train
                model = MulticlassSvc(C=c, gamma=gamma, tol=tol).fit(X[train], y[train])
                scores.append(float(np.mean(model.predict(X[test]) == y[test])))
            mean_score = float(np.mean(scores))
            if best is None or mean_score > best[2]:
                best = (c, gamma, mean_score)
    return best


def save_svm(model: MulticlassSvc, path: str | Path) -> None:
    """Persist a multiclass model in a plain text format (documented in the
    README): header, then per-class blocks of bias and support rows."""
    check_is_fitted(model, "models_")
    buffer = io.StringIO()
    buffer.write("feintchain-svm 1\n")
    buffer.write(f"kernel rbf\ngamma {float(model.gamma)!r}\nC {float(model.C)!r}\n")
    buffer.write(f"classes {len(model.classes_)}\n")
    for cls, binary in zip(model.classes_, model.models_):
        buffer.write(f"class {cls}\n")
        buffer.write(f"bias {float(binary.bias_)!r}\n")
        buffer.write(f"n_sv {len(binary.support_vectors_)}\n")
        for coef, vec in zip(binary.dual_coef_, binary.support_vectors_):
            cells = " ".join(repr(float(v)) for v in vec)
            buffer.write(f"{float(coef)!r} {cells}\n")
    Path(path).write_text(buffer.getvalue(), encoding="utf-8")


def load_svm(path: str | Path) -> MulticlassSvc:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != "feintchain-svm 1":
        raise FormatError(f"{path}: not a feintchain-svm version 1 file")
    try:
        gamma = float(lines[2].split()[1])
        c_value = float(lines[3].split()[1])
        n_classes = int(lines[4].split()[1])
        model = MulticlassSvc(C=c_value, gamma=gamma)
        classes: list[str] = []
        models: list[SmoSvc] = []
        pos = 5
        for _ in range(n_classes):
            classes.append(lines[pos].split(" ", 1)[1])
            bias = float(lines[pos + 1].split()[1])
            n_sv = int(lines[pos + 2].split()[1])
            pos += 3
            coefs = np.zeros(n_sv)
            vectors = []
            for i in range(n_sv):
                cells = lines[pos + i].split()
                coefs[i] = float(cells[0])
                vectors.append([float(v) for v in cells[1:]])
            pos += n_sv
            binary = SmoSvc(C=c_value, gamma=gamma)
            binary.bias_ = bias
            binary.dual_coef_ = coefs
            binary.support_vectors_ = np.array(vectors) if vectors else np.zeros((0, 1))
            binary.classes_ = np.array([-1.0, 1.0])
            models.append(binary)
    except (IndexError, ValueError) as exc:
        raise FormatError(f"{path}: corrupt svm file: {exc}") from None
    model.classes_ = np.array(classes)
    model.models_ = models
    return model
