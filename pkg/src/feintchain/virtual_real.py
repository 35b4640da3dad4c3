"""Building the virtual/real attack library.

The flow classifier (CNN features + one-vs-rest SVM) is trained once per
seed. An attack record that every run predicts as the normal class is a
*real* attack (it slips past the classifier); one that every run classifies
correctly is a *virtual* attack (a reliable decoy). Records with mixed
outcomes enter neither library. Confidence is the mean softmax probability
of the normal class across the runs; the real list is sorted ascending by
confidence and the virtual list descending.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .alerts import FlowDataset
from .errors import FormatError
from .nn.network import CnnFeatureExtractor
from .svm import MulticlassSvc

DEFAULT_RUN_SEEDS = tuple(range(10))

_NORMAL_ALIASES = ("Normal", "BENIGN", "Benign", "normal", "benign")


class AttackKind(str, Enum):
    VIRTUAL = "VIRTUAL"
    REAL = "REAL"


@dataclass(frozen=True, eq=False)
class AtomicAttack:
    """One library entry: a source flow with its mean normal-probability."""

    source_id: str
    attack_type: str
    confidence: float
    kind: AttackKind
    features: np.ndarray | None = field(default=None, repr=False)

    def key(self) -> tuple[str, str, float, str]:
        return (self.source_id, self.attack_type, self.confidence, self.kind.value)


@dataclass
class VirtualRealLib:
    """The two confidence-ordered attack libraries."""

    real: list[AtomicAttack]
    virtual: list[AtomicAttack]
    run_count: int
    seeds: tuple[int, ...]
    normal_label: str

    def validate(self) -> None:
        real_conf = [a.confidence for a in self.real]
        virtual_conf = [a.confidence for a in self.virtual]
        if real_conf != sorted(real_conf):
            raise ValueError("real library must be sorted ascending by confidence")
        if virtual_conf != sorted(virtual_conf, reverse=True):
            raise ValueError("virtual library must be sorted descending by confidence")
        overlap = {a.source_id for a in self.real} & {a.source_id for a in self.virtual}
        if overlap:
            raise ValueError(f"records present in both libraries: {sorted(overlap)}")


class FlowClassifier(BaseEstimator, ClassifierMixin):
    """CNN feature extraction followed by a one-vs-rest SVM head."""

    def __init__(self, filter_scale: float = 0.25, epochs: int = 10,
                 learning_rate: float = 0.05, batch_size: int = 32,
                 C: float = 0.5, gamma: float = 1.0, seed: int = 0):
        self.filter_scale = filter_scale
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.C = C
        self.gamma = gamma
        self.seed = seed

    @staticmethod
    def _unit_rows(features: np.ndarray) -> np.ndarray:
        # RBF inputs are L2-normalized so the kernel width stays meaningful
        # regardless of how large the learned feature activations grow.
        norms = np.linalg.norm(features, axis=1, keepdims=True)
        norms[norms == 0] = 1.0
        return features / norms

    def fit(self, X, y):
        self.extractor_ = CnnFeatureExtractor(
            filter_scale=self.filter_scale, epochs=self.epochs,
            learning_rate=self.learning_rate, batch_size=self.batch_size,
            seed=self.seed)
        self.extractor_.fit(X, y)
        features = self._unit_rows(self.extractor_.transform(X))
        self.svm_ = MulticlassSvc(C=self.C, gamma=self.gamma, seed=self.seed)
        self.svm_.fit(features, np.asarray(y))
        self.classes_ = self.svm_.classes_
        return self

    def predict(self, X):
        check_is_fitted(self, "svm_")
        return self.svm_.predict(self._unit_rows(self.extractor_.transform(X)))

    def normal_proba(self, X, normal_label: str) -> np.ndarray:
        """Softmax probability of the normal class, from the extractor head."""
        check_is_fitted(self, "svm_")
        probs = self.extractor_.predict_proba(X)
        classes = list(self.extractor_.classes_)
        if normal_label not in classes:
            raise ValueError(f"class {normal_label!r} unknown to the classifier")
        return probs[:, classes.index(normal_label)]


def detect_normal_label(dataset: FlowDataset) -> str:
    for name in _NORMAL_ALIASES:
        if name in dataset.class_names:
            return name
    raise ValueError(
        f"dataset has no normal/benign class (classes: {list(dataset.class_names)})")


def build_virtual_real_lib(dataset: FlowDataset, classifier_params: dict | None = None,
                           seeds: tuple[int, ...] = DEFAULT_RUN_SEEDS,
                           normal_label: str | None = None) -> VirtualRealLib:
    """Train one classifier per seed and route attack records by the
    all-runs rule described in the module docstring."""
    if len(seeds) < 1:
        raise ValueError("at least one training seed is required")
    if normal_label is None:
        normal_label = detect_normal_label(dataset)
    elif normal_label not in dataset.class_names:
        raise ValueError(f"dataset has no class {normal_label!r}")
    if len(dataset.class_names) < 2:
        raise ValueError("dataset needs the normal class plus at least one attack class")

    params = dict(classifier_params or {})
    X = dataset.normalized_matrix()
    y = np.array(dataset.labels())
    attack_idx = np.where(y != normal_label)[0]

    predicted_normal = np.ones(len(attack_idx), dtype=bool)
    predicted_correct = np.ones(len(attack_idx), dtype=bool)
    normal_proba_sum = np.zeros(len(attack_idx))
    for seed in seeds:
        clf = FlowClassifier(**params, seed=seed).fit(X, y)
        preds = clf.predict(X[attack_idx])
        predicted_normal &= preds == normal_label
        predicted_correct &= preds == y[attack_idx]
        normal_proba_sum += clf.normal_proba(X[attack_idx], normal_label)

    confidence = normal_proba_sum / len(seeds)
    real: list[AtomicAttack] = []
    virtual: list[AtomicAttack] = []
    for pos, idx in enumerate(attack_idx):
        record = dataset.records[idx]
        entry = AtomicAttack(record.source_id, record.label, float(confidence[pos]),
                             AttackKind.REAL if predicted_normal[pos] else AttackKind.VIRTUAL,
                             features=X[idx])
        if predicted_normal[pos]:
            real.append(entry)
        elif predicted_correct[pos]:
            virtual.append(entry)
        # mixed outcomes fall through: excluded from both libraries

    real.sort(key=lambda a: (a.confidence, a.source_id))
    virtual.sort(key=lambda a: (-a.confidence, a.source_id))
    lib = VirtualRealLib(real, virtual, len(seeds), tuple(seeds), normal_label)
    lib.validate()
    return lib


def verify_real_lib(lib: VirtualRealLib, classifier: FlowClassifier) -> float:
    """Miss rate of a fresh classifier on the real library: the fraction it
    still predicts as normal."""
    if not lib.real:
        raise ValueError("real library is empty")
    features = [entry.features for entry in lib.real]
    if any(f is None for f in features):
        raise ValueError("library entries carry no features; reload with a dataset")
    preds = classifier.predict(np.stack(features))
    return float(np.mean(preds == lib.normal_label))


def persist_lib(lib: VirtualRealLib, path: str | Path) -> None:
    payload = {
        "version": 1,
        "run_count": lib.run_count,
        "seeds": list(lib.seeds),
        "normal_label": lib.normal_label,
        "real": [{"source_id": a.source_id, "attack_type": a.attack_type,
                  "confidence": a.confidence} for a in lib.real],
        "virtual": [{"source_id": a.source_id, "attack_type": a.attack_type,
                     "confidence": a.confidence} for a in lib.virtual],
    }
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(payload, handle, sort_keys=True, separators=(",", ":"))
        handle.write("\n")


def load_lib(path: str | Path, dataset: FlowDataset | None = None) -> VirtualRealLib:
    """Reload a persisted library; pass the source dataset to re-attach
    feature rows (needed by verify_real_lib)."""
    try:
        with open(path, encoding="utf-8") as handle:
            payload = json.load(handle)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: corrupt library file: {exc}") from None
    if not isinstance(payload, dict) or payload.get("version") != 1:
        raise FormatError(f"{path}: unsupported library version {payload.get('version')!r}")

    by_id = {}
    if dataset is not None:
        normalized = dataset.normalized_matrix()
        by_id = {rec.source_id: normalized[i] for i, rec in enumerate(dataset.records)}

    def entries(section: str, kind: AttackKind) -> list[AtomicAttack]:
        out = []
        for item in payload[section]:
            out.append(AtomicAttack(item["source_id"], item["attack_type"],
                                    float(item["confidence"]), kind,
                                    features=by_id.get(item["source_id"])))
        return out

    try:
        lib = VirtualRealLib(entries("real", AttackKind.REAL),
                             entries("virtual", AttackKind.VIRTUAL),
                             int(payload["run_count"]),
                             tuple(payload["seeds"]), payload["normal_label"])
    except KeyError as exc:
        raise FormatError(f"{path}: missing field {exc}") from None
    lib.validate()
    return lib
