"""Fuzzy clustering of alerts into attack sequences.

Alerts are scanned in time order. For each alert every existing sequence is
considered: a sequence is admissible when the incoming alert's kill-chain
stage is at most one stage behind the sequence's most recent alert. The
membership degree of the alert in an admissible sequence is the maximum
total similarity against any member; if the best membership over all
admissible sequences reaches the threshold the alert joins that sequence
(earliest-created sequence on ties), otherwise it opens a new one.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin

from .alerts import RawAlert
from .similarity import (
    SimilarityConfig,
    alert_similarity,
    common_prefix_bits,
    event_similarity_by_stage,
    stage_of,
)


@dataclass
class AttackSequence:
    """Time-ordered alerts attributed to one attacking process."""

    id: int
    alerts: list[RawAlert]
    indices: list[int]  # positions in the clustering input

    def validate(self) -> None:
        if not self.alerts:
            raise ValueError("attack sequences must be non-empty")
        stamps = [a.timestamp for a in self.alerts]
        if stamps != sorted(stamps):
            raise ValueError("sequence alerts must be sorted by timestamp")


@dataclass
class AttackSequenceSet:
    """A partition of the clustered alerts into attack sequences."""

    sequences: list[AttackSequence]

    def __len__(self) -> int:
        return len(self.sequences)

    def labels(self, n_alerts: int) -> np.ndarray:
        """Per-alert sequence ids, aligned with the clustering input order."""
        labels = np.full(n_alerts, -1, dtype=np.int64)
        for seq in self.sequences:
            for idx in seq.indices:
                labels[idx] = seq.id
        return labels


@dataclass(frozen=True)
class AttackPattern:
    """A stage trace shared by one or more sequences."""

    stages: tuple[tuple[str, int], ...]  # (attack_type, stage) items
    support: int


def membership(alert: RawAlert, sequence: AttackSequence,
               config: SimilarityConfig) -> float:
    """Maximum total similarity between the alert and any sequence member."""
    if not sequence.alerts:
        raise ValueError("membership against an empty sequence is undefined")
    return max(alert_similarity(alert, member, config) for member in sequence.alerts)


def fuzzy_cluster(alerts: list[RawAlert], threshold: float = 0.6,
                  config: SimilarityConfig | None = None) -> AttackSequenceSet:
    """Partition alerts into attack sequences by thresholded membership.

    Alerts are processed in timestamp order (sorted internally if needed).
    The returned sequences cover every input alert exactly once.
    """
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"threshold must be in [0, 1]: {threshold}")
    if config is None:
        config = SimilarityConfig()

    order = sorted(range(len(alerts)), key=lambda i: alerts[i].timestamp)

    # Cached per-alert views keep the O(n * sequences * members) inner loop
    # in plain float arithmetic. The expression mirrors alert_similarity
    # term for term so both paths produce identical values.
    stage_map = config.stage_map
    w = config.weights
    w_event, w_ip, w_port, w_time = w.event, w.ip, w.port, w.time
    tau = config.time_scale
    absent = config.absent_port_similarity
    exp = math.exp

    cached = []
    for i in order:
        a = alerts[i]
        cached.append((stage_of(a.attack_type, stage_map), a.s_ip, a.d_ip,
                       a.d_port, a.timestamp))

    sequences: list[AttackSequence] = []
    members_cache: list[list[tuple]] = []  # cached views per sequence
    latest_stage: list[int] = []

    for pos, i in enumerate(order):
        view = cached[pos]
        stage_a, s_ip_a, d_ip_a, d_port_a, ts_a = view

        best = -1.0
        best_seq = -1
        for seq_idx in range(len(sequences)):
            if stage_a - latest_stage[seq_idx] < -1:
                continue  # stage gate: alert regressed too far behind this sequence
            r = 0.0
            for stage_b, s_ip_b, d_ip_b, d_port_b, ts_b in members_cache[seq_idx]:
                sim = (w_event * event_similarity_by_stage(stage_a, stage_b)
                       + w_ip * (max(common_prefix_bits(s_ip_a, d_ip_b),
                                     common_prefix_bits(s_ip_a, s_ip_b),
                                     common_prefix_bits(d_ip_a, d_ip_b)) / 32.0)
                       + w_port * (absent if d_port_a is None or d_port_b is None
                                   else 1.0 - abs(d_port_a - d_port_b) / 65535.0)
                       + w_time * exp(-abs(ts_a - ts_b) / tau))
                if sim > r:
                    r = sim
            if r > best:  # strict: earliest-created sequence wins ties
                best = r
                best_seq = seq_idx

        if best_seq >= 0 and best >= threshold:
            seq = sequences[best_seq]
            seq.alerts.append(alerts[i])
            seq.indices.append(i)
            members_cache[best_seq].append(view)
            latest_stage[best_seq] = stage_a
        else:
            sequences.append(AttackSequence(len(sequences), [alerts[i]], [i]))
            members_cache.append([view])
            latest_stage.append(stage_a)

    return AttackSequenceSet(sequences)


def prune_singletons(sequence_set: AttackSequenceSet) -> AttackSequenceSet:
    """Keep only multi-stage sequences (length >= 2), order preserved."""
    return AttackSequenceSet([s for s in sequence_set.sequences if len(s.alerts) >= 2])


def extract_patterns(sequence_set: AttackSequenceSet, stage_map) -> list[AttackPattern]:
    """Collapse each sequence to its (attack_type, stage) trace and merge
    identical traces, most supported first.

    Only consecutive duplicates collapse, so revisited stages survive.
    """
    supports: dict[tuple, int] = {}
    for seq in sequence_set.sequences:
        trace: list[tuple[str, int]] = []
        for alert in seq.alerts:
            item = (alert.attack_type, stage_of(alert.attack_type, stage_map))
            if not trace or trace[-1] != item:
                trace.append(item)
        key = tuple(trace)
        supports[key] = supports.get(key, 0) + 1
    patterns = [AttackPattern(stages, count) for stages, count in supports.items()]
    patterns.sort(key=lambda p: -p.support)  # stable: ties keep first-seen order
    return patterns


class FuzzyClusterer(BaseEstimator, ClusterMixin):
    """Estimator wrapper around :func:`fuzzy_cluster`.

    ``fit`` accepts a list of :class:`RawAlert`; ``labels_`` holds the
    sequence id of each input alert and ``sequences_`` the recovered
    :class:`AttackSequence` objects.
    """

    def __init__(self, threshold: float = 0.6, config: SimilarityConfig | None = None):
        self.threshold = threshold
        self.config = config

    def fit(self, X, y=None):
        alerts = list(X)
        self.sequence_set_ = fuzzy_cluster(alerts, self.threshold, self.config)
        self.sequences_ = self.sequence_set_.sequences
        self.labels_ = self.sequence_set_.labels(len(alerts))
        return self


def sequences_to_dict(sequence_set: AttackSequenceSet, stage_map) -> dict:
    return {
        "version": 1,
        "sequences": [
            {
                "id": seq.id,
                "alert_indices": list(seq.indices),
                "stages": [stage_of(a.attack_type, stage_map) for a in seq.alerts],
                "attack_types": [a.attack_type for a in seq.alerts],
            }
            for seq in sequence_set.sequences
        ],
    }


def save_sequences(sequence_set: AttackSequenceSet, stage_map, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(sequences_to_dict(sequence_set, stage_map), handle,
                  sort_keys=True, separators=(",", ":"))
        handle.write("\n")


def load_sequence_indices(path: str | Path) -> list[list[int]]:
    """Member alert indices per sequence, as persisted by save_sequences."""
    with open(path, encoding="utf-8") as handle:
        data = json.load(handle)
    return [list(entry["alert_indices"]) for entry in data["sequences"]]


def format_patterns_table(patterns: list[AttackPattern]) -> str:
    """Human-readable support table for extracted patterns."""
    lines = [f"{'support':>7}  trace"]
    for pattern in patterns:
        trace = " -> ".join(f"{name} [{stage}]" for name, stage in pattern.stages)
        lines.append(f"{pattern.support:>7}  {trace}")
    return "\n".join(lines) + "\n"
