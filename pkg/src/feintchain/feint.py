"""Feint attack chain construction and detection.

A feint chain hides real attacks (entries the classifier misses) inside the
causal order of a mined attack sequence; a normal chain is the mined
sequence alone. Chains are fixed length: shorter ones pad with a null
event, longer ones keep their causal prefix. The detector encodes chains
with the bidirectional recurrent encoder and classifies the encodings with
an RBF SVM; detectors can be combined by accuracy-weighted voting.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .clustering import AttackSequence, AttackSequenceSet
from .errors import FormatError
from .nn.birnn import BiRnnEncoder
from .similarity import STAGE_MAX, StageMap, default_stage_map, stage_of
from .svm import SmoSvc
from .virtual_real import AttackKind, VirtualRealLib

DEFAULT_CHAIN_LEN = 20

# Reference insertion histogram: number of chains per real-attack count.
DEFAULT_INSERTION_HISTOGRAM: dict[int, int] = {
    1: 3371, 2: 3248, 3: 1811, 4: 672, 5: 200, 6: 50, 7: 11, 8: 1,
}


class ChainLabel(IntEnum):
    NORMAL = 0
    FEINT = 1


@dataclass(frozen=True)
class ChainEvent:
    """One atomic event of a chain. ``is_real`` is bookkeeping metadata and
    never enters the feature embedding."""

    attack_type: str
    stage: int
    confidence: float
    is_real: bool = False
    source_id: str | None = None


@dataclass(frozen=True)
class AttackChain:
    """Fixed-length event list with its label and insertion positions."""

    events: tuple[ChainEvent | None, ...]  # None entries are padding
    label: ChainLabel
    insertions: tuple[int, ...] = ()

    def __post_init__(self):
        real_positions = tuple(i for i, e in enumerate(self.events)
                               if e is not None and e.is_real)
        if (self.label is ChainLabel.FEINT) != (len(self.insertions) >= 1):
            raise ValueError("label FEINT iff at least one insertion")
        if real_positions != self.insertions:
            raise ValueError(
                f"insertions {self.insertions} disagree with real events {real_positions}")

    def n_events(self) -> int:
        return sum(1 for e in self.events if e is not None)


def _base_events(base: AttackSequence, stage_map: StageMap,
                 virtual_confidence: dict[str, float]) -> list[ChainEvent]:
    if not base.alerts:
        raise ValueError("base sequence must be non-empty")
    return [
        ChainEvent(a.attack_type, stage_of(a.attack_type, stage_map),
                   virtual_confidence.get(a.attack_type, 0.0), False, None)
        for a in base.alerts
    ]


def virtual_confidence_by_type(lib: VirtualRealLib) -> dict[str, float]:
    """Mean virtual-library confidence per attack type (decoy strength of
    each alert type; types absent from the library score 0)."""
    sums: dict[str, float] = {}
    counts: dict[str, int] = {}
    for entry in lib.virtual:
        sums[entry.attack_type] = sums.get(entry.attack_type, 0.0) + entry.confidence
        counts[entry.attack_type] = counts.get(entry.attack_type, 0) + 1
    return {t: sums[t] / counts[t] for t in sums}


def _draw_real_attacks(lib: VirtualRealLib, n_real: int,
                       rng: np.random.Generator) -> list:
    """Sample distinct real-library entries, biased toward the head of the
    ascending-confidence order (the best-hidden attacks) with seeded jitter."""
    n_pool = len(lib.real)
    if n_real > n_pool:
        raise ValueError(f"real library holds {n_pool} entries, need {n_real}")
    ranks = np.arange(n_pool)
    weights = np.exp(-3.0 * ranks / max(n_pool, 1))
    weights /= weights.sum()
    picks = rng.choice(n_pool, size=n_real, replace=False, p=weights)
    return [lib.real[i] for i in picks]


def build_feint_chain(base: AttackSequence, lib: VirtualRealLib, n_real: int,
                      seed: int = 0, chain_len: int = DEFAULT_CHAIN_LEN,
                      stage_map: StageMap | None = None,
                      virtual_confidence: dict[str, float] | None = None) -> AttackChain:
    """Insert ``n_real`` real attacks at distinct random positions of a base
    sequence, preserving the base's causal order, then pad/truncate to the
    chain length."""
    if n_real < 1:
        raise ValueError("a feint chain needs at least one real attack")
    stage_map = stage_map or default_stage_map()
    if virtual_confidence is None:
        virtual_confidence = virtual_confidence_by_type(lib)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 17]))

    events = _base_events(base, stage_map, virtual_confidence)
    if n_real >= chain_len:
        raise ValueError(f"n_real={n_real} leaves no room in a chain of {chain_len}")
    # Keep the causal prefix of the base so every real attack survives the
    # fixed-length cut.
    max_base = chain_len - n_real
    if len(events) > max_base:
        events = events[:max_base]

    total = len(events) + n_real
    reals = _draw_real_attacks(lib, n_real, rng)
    positions = np.sort(rng.choice(total, size=n_real, replace=False))

    merged: list[ChainEvent | None] = []
    base_iter = iter(events)
    real_iter = iter(reals)
    position_set = set(int(p) for p in positions)
    for slot in range(total):
        if slot in position_set:
            entry = next(real_iter)
            merged.append(ChainEvent(entry.attack_type,
                                     stage_of(entry.attack_type, stage_map),
                                     entry.confidence, True, entry.source_id))
        else:
            merged.append(next(base_iter))
    merged.extend([None] * (chain_len - total))
    return AttackChain(tuple(merged), ChainLabel.FEINT,
                       tuple(int(p) for p in positions))


def build_normal_chain(base: AttackSequence, chain_len: int = DEFAULT_CHAIN_LEN,
                       stage_map: StageMap | None = None,
                       virtual_confidence: dict[str, float] | None = None) -> AttackChain:
    """A non-feint chain: the base events alone, padded/truncated."""
    stage_map = stage_map or default_stage_map()
    events = _base_events(base, stage_map, virtual_confidence or {})
    events = events[:chain_len]
    padded = tuple(events) + (None,) * (chain_len - len(events))
    return AttackChain(padded, ChainLabel.NORMAL, ())


def scale_histogram(histogram: dict[int, int], scale: float) -> dict[int, int]:
    """Floor-scale bucket counts, keeping nonzero buckets at >= 1."""
    if scale <= 0:
        raise ValueError("scale must be positive")
    out: dict[int, int] = {}
    for n_real, count in sorted(histogram.items()):
        if count < 0:
            raise ValueError("histogram counts must be >= 0")
        if count > 0:
            out[n_real] = max(1, math.floor(count * scale))
        else:
            out[n_real] = 0
    return out


@dataclass
class FeintLib:
    """Labelled chain corpus with a stratified 8:2 train/test split."""

    chains: list[AttackChain]
    train_indices: list[int]
    test_indices: list[int]
    histogram: dict[int, int]
    chain_len: int = DEFAULT_CHAIN_LEN

    def split_ratio_gap(self) -> float:
        """Absolute difference between train and test feint fractions."""
        def frac(indices):
            labels = [int(self.chains[i].label) for i in indices]
            return sum(labels) / len(labels) if labels else 0.0
        return abs(frac(self.train_indices) - frac(self.test_indices))


def _stratified_split(labels: list[int], ratio: float,
                      rng: np.random.Generator) -> tuple[list[int], list[int]]:
    train: list[int] = []
    test: list[int] = []
    for value in sorted(set(labels)):
        idx = [i for i, lab in enumerate(labels) if lab == value]
        idx = [idx[i] for i in rng.permutation(len(idx))]
        n_train = int(round(ratio * len(idx)))
        train.extend(idx[:n_train])
        test.extend(idx[n_train:])
    return sorted(train), sorted(test)


def build_feint_lib(sequences: AttackSequenceSet, lib: VirtualRealLib,
                    histogram: dict[int, int] | None = None, scale: float = 1.0,
                    seed: int = 0, chain_len: int = DEFAULT_CHAIN_LEN,
                    stage_map: StageMap | None = None) -> FeintLib:
    """Generate feint chains per the (scaled) insertion histogram plus an
    equal number of normal chains, with a stratified 8:2 split."""
    bases = [s for s in sequences.sequences if s.alerts]
    if not bases:
        raise ValueError("no base sequences available for chain construction")
    stage_map = stage_map or default_stage_map()
    counts = scale_histogram(histogram or DEFAULT_INSERTION_HISTOGRAM, scale)
    confidence = virtual_confidence_by_type(lib)

    chains: list[AttackChain] = []
    serial = 0
    for n_real, count in sorted(counts.items()):
        for _ in range(count):
            base = bases[serial % len(bases)]
            chains.append(build_feint_chain(base, lib, n_real,
                                            seed=seed * 1_000_003 + serial,
                                            chain_len=chain_len, stage_map=stage_map,
                                            virtual_confidence=confidence))
            serial += 1
    n_feint = len(chains)
    for i in range(n_feint):
        chains.append(build_normal_chain(bases[i % len(bases)], chain_len,
                                         stage_map, confidence))

    labels = [int(c.label) for c in chains]
    rng = np.random.default_rng(np.random.SeedSequence([seed, 23]))
    train_idx, test_idx = _stratified_split(labels, 0.8, rng)
    return FeintLib(chains, train_idx, test_idx, counts, chain_len)


class ChainEmbedder:
    """Turns chain events into feature vectors: a one-hot attack-type block,
    the normalized stage, and the confidence. Null (padding) events embed to
    the zero vector; the real/virtual flag is deliberately not a feature."""

    def __init__(self, vocab: tuple[str, ...], block_size: int = 24):
        if len(vocab) > block_size:
            raise ValueError(
                f"type vocabulary ({len(vocab)}) exceeds the one-hot block "
                f"size ({block_size}); raise block_size")
        self.vocab = tuple(vocab)
        self.block_size = block_size
        self._index = {t: i for i, t in enumerate(self.vocab)}

    @property
    def dim(self) -> int:
        return self.block_size + 2

    def embed_event(self, event: ChainEvent | None) -> np.ndarray:
        vec = np.zeros(self.dim)
        if event is None:
            return vec
        idx = self._index.get(event.attack_type)
        if idx is None:
            raise ValueError(f"attack type {event.attack_type!r} not in vocabulary")
        vec[idx] = 1.0
        vec[self.block_size] = event.stage / STAGE_MAX
        vec[self.block_size + 1] = event.confidence
        return vec

    def embed_chain(self, chain: AttackChain) -> np.ndarray:
        return np.stack([self.embed_event(e) for e in chain.events])

    def embed_chains(self, chains: list[AttackChain]) -> np.ndarray:
        return np.stack([self.embed_chain(c) for c in chains])


def chain_vocabulary(chains: list[AttackChain]) -> tuple[str, ...]:
    types = {e.attack_type for c in chains for e in c.events if e is not None}
    return tuple(sorted(types))


class FeintDetector(BaseEstimator, ClassifierMixin):
    """Bi-RNN encoder + RBF SVM over chain encodings.

    ``fit`` trains the encoder end-to-end with its logistic head on a 90%
    slice of the training chains, freezes it, then fits the SVM on the
    encodings; the held-out 10% provides the validation accuracy used as
    this detector's ensemble voting weight.
    """

    def __init__(self, hidden_size: int = 32, C: float = 0.5, gamma: float = 1.0,
                 epochs: int = 20, learning_rate: float = 0.05,
                 batch_size: int = 64, block_size: int = 24, seed: int = 0):
        self.hidden_size = hidden_size
        self.C = C
        self.gamma = gamma
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.block_size = block_size
        self.seed = seed

    def fit(self, chains: list[AttackChain], y=None,
            vocab: tuple[str, ...] | None = None):
        labels = np.array([int(c.label) for c in chains] if y is None
                          else [int(v) for v in y])
        if len(set(labels.tolist())) < 2:
            raise ValueError("training needs both chain labels present")
        lengths = {len(c.events) for c in chains}
        if len(lengths) != 1:
            raise ValueError(f"chains have mixed lengths: {sorted(lengths)}")
        self.chain_len_ = lengths.pop()

        self.embedder_ = ChainEmbedder(vocab or chain_vocabulary(chains),
                                       self.block_size)
        X = self.embedder_.embed_chains(chains)

        rng = np.random.default_rng(np.random.SeedSequence([self.seed, 31]))
        order = rng.permutation(len(chains))
        n_val = max(1, int(round(0.1 * len(chains)))) if len(chains) >= 10 else 0
        val_idx, fit_idx = order[:n_val], order[n_val:]

        self.encoder_ = BiRnnEncoder(hidden_size=self.hidden_size,
                                     epochs=self.epochs,
                                     learning_rate=self.learning_rate,
                                     batch_size=self.batch_size, seed=self.seed)
        self.encoder_.fit(X[fit_idx], labels[fit_idx])
        encodings = self.encoder_.transform(X[fit_idx])
        self.svm_ = SmoSvc(C=self.C, gamma=self.gamma, seed=self.seed)
        self.svm_.fit(encodings, np.where(labels[fit_idx] == 1, 1.0, -1.0))

        if n_val:
            preds = [self.predict_embedded(X[i])[0] for i in val_idx]
            self.validation_accuracy_ = float(
                np.mean([int(p) == labels[i] for p, i in zip(preds, val_idx)]))
        else:
            self.validation_accuracy_ = 1.0
        self.classes_ = np.array([ChainLabel.NORMAL, ChainLabel.FEINT])
        return self

    def predict_embedded(self, steps: np.ndarray) -> tuple[ChainLabel, float]:
        encoding = self.encoder_.transform(steps[None])
        value = float(self.svm_.decision_function(encoding)[0])
        return (ChainLabel.FEINT if value > 0 else ChainLabel.NORMAL, value)

    def predict_chain(self, chain: AttackChain) -> tuple[ChainLabel, float]:
        check_is_fitted(self, "svm_")
        if len(chain.events) != self.chain_len_:
            raise ValueError(
                f"chain length {len(chain.events)} does not match detector "
                f"length {self.chain_len_}")
        return self.predict_embedded(self.embedder_.embed_chain(chain))

    def predict(self, chains: list[AttackChain]) -> np.ndarray:
        return np.array([int(self.predict_chain(c)[0]) for c in chains])


def detect(detector: FeintDetector, chain: AttackChain) -> tuple[ChainLabel, float]:
    """Label one chain; returns (label, SVM decision value)."""
    return detector.predict_chain(chain)


def ensemble_detect(detectors: list[FeintDetector], chain: AttackChain,
                    weights: list[float] | None = None) -> ChainLabel:
    """Weighted majority vote over an odd number of detectors. Weights
    default to each detector's validation accuracy."""
    if not detectors:
        raise ValueError("at least one detector is required")
    if len(detectors) % 2 == 0:
        raise ValueError("the voting ensemble needs an odd detector count")
    if weights is None:
        weights = [d.validation_accuracy_ for d in detectors]
    if len(weights) != len(detectors):
        raise ValueError("one weight per detector is required")
    tally = {ChainLabel.NORMAL: 0.0, ChainLabel.FEINT: 0.0}
    for detector, weight in zip(detectors, weights):
        label, _ = detector.predict_chain(chain)
        tally[label] += weight
    return ChainLabel.FEINT if tally[ChainLabel.FEINT] > tally[ChainLabel.NORMAL] \
        else ChainLabel.NORMAL


def train_detector(lib: FeintLib, hidden_size: int = 32, C: float = 0.5,
                   gamma: float = 1.0, epochs: int = 20,
                   learning_rate: float = 0.05, batch_size: int = 64,
                   block_size: int = 24, seed: int = 0) -> FeintDetector:
    """Fit a detector on the library's training split with a vocabulary
    covering the whole library."""
    train_chains = [lib.chains[i] for i in lib.train_indices]
    detector = FeintDetector(hidden_size=hidden_size, C=C, gamma=gamma,
                             epochs=epochs, learning_rate=learning_rate,
                             batch_size=batch_size, block_size=block_size,
                             seed=seed)
    return detector.fit(train_chains, vocab=chain_vocabulary(lib.chains))


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------


def _event_to_dict(event: ChainEvent | None) -> dict | None:
    if event is None:
        return None
    return {"type": event.attack_type, "stage": event.stage,
            "confidence": event.confidence, "real": event.is_real,
            "source_id": event.source_id}


def _event_from_dict(data: dict | None) -> ChainEvent | None:
    if data is None:
        return None
    return ChainEvent(data["type"], int(data["stage"]), float(data["confidence"]),
                      bool(data["real"]), data.get("source_id"))


def save_feint_lib(lib: FeintLib, path: str | Path) -> None:
    payload = {
        "version": 1,
        "chain_len": lib.chain_len,
        "histogram": {str(k): v for k, v in sorted(lib.histogram.items())},
        "train_indices": lib.train_indices,
        "test_indices": lib.test_indices,
        "chains": [
            {"label": int(c.label), "insertions": list(c.insertions),
             "events": [_event_to_dict(e) for e in c.events]}
            for c in lib.chains
        ],
    }
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(payload, handle, sort_keys=True, separators=(",", ":"))
        handle.write("\n")


def load_feint_lib(path: str | Path) -> FeintLib:
    try:
        with open(path, encoding="utf-8") as handle:
            payload = json.load(handle)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: corrupt feint library: {exc}") from None
    if not isinstance(payload, dict) or payload.get("version") != 1:
        raise FormatError(f"{path}: unsupported feint library version")
    chains = []
    for item in payload["chains"]:
        chains.append(AttackChain(
            tuple(_event_from_dict(e) for e in item["events"]),
            ChainLabel(int(item["label"])),
            tuple(item["insertions"])))
    return FeintLib(chains, list(payload["train_indices"]),
                    list(payload["test_indices"]),
                    {int(k): v for k, v in payload["histogram"].items()},
                    int(payload["chain_len"]))
