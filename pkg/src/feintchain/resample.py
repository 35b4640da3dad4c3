"""Imbalance-aware resampling: random downsampling and SMOTE oversampling.

Synthetic minority records are linear interpolations between a minority
sample and one of its k nearest same-class neighbors; a single gap in (0, 1)
is applied across all attributes so every synthetic point lies on the
segment between its parents. Base samples are cycled round-robin and each
synthetic record draws from its own counter-based random stream, so results
do not depend on evaluation order.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .alerts import FlowDataset, FlowRecord


@dataclass(frozen=True)
class ResamplePlan:
    """Per-class target counts plus SMOTE parameters."""

    targets: dict[str, int]
    k: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"k must be >= 1: {self.k}")
        for name, target in self.targets.items():
            if target < 0:
                raise ValueError(f"target for {name!r} must be >= 0: {target}")
        object.__setattr__(self, "targets", dict(self.targets))


def random_downsample(dataset: FlowDataset, cls: str, target: int,
                      seed: int = 0) -> FlowDataset:
    """Keep a uniform without-replacement sample of one class.

    Other classes are untouched; surviving records keep their dataset order.
    """
    indices = [i for i, rec in enumerate(dataset.records) if rec.label == cls]
    if target > len(indices):
        raise ValueError(
            f"downsample target {target} exceeds {cls!r} count {len(indices)}")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 29]))
    keep = set(rng.choice(len(indices), size=target, replace=False).tolist())
    drop = {indices[i] for i in range(len(indices)) if i not in keep}
    return FlowDataset.from_records(
        [rec for i, rec in enumerate(dataset.records) if i not in drop])


def knn_same_class(record: FlowRecord, dataset: FlowDataset, k: int) -> list[FlowRecord]:
    """The k nearest same-class records by Euclidean distance over the
    dataset's normalized features, excluding the query itself.

    Distance ties break in dataset order.
    """
    members = [i for i, rec in enumerate(dataset.records)
               if rec.label == record.label and rec is not record]
    if len(members) < k:
        raise ValueError(
            f"class {record.label!r} has only {len(members)} other members, need {k}")
    normalized = dataset.normalized_matrix()
    query = _normalize_row(record.features, dataset.normalization)
    dists = np.linalg.norm(normalized[members] - query, axis=1)
    order = np.argsort(dists, kind="stable")[:k]
    return [dataset.records[members[i]] for i in order]


def _normalize_row(features: np.ndarray, normalization: np.ndarray) -> np.ndarray:
    lo = normalization[:, 0]
    span = normalization[:, 1] - lo
    out = np.zeros_like(features)
    nonconst = span > 0
    out[nonconst] = (features[nonconst] - lo[nonconst]) / span[nonconst]
    return out


def interpolate(base: np.ndarray, neighbor: np.ndarray, gap: float) -> np.ndarray:
    """The synthetic-sample rule: base + gap * (neighbor - base)."""
    return base + gap * (neighbor - base)


def smote(dataset: FlowDataset, cls: str, target: int, k: int = 5,
          seed: int = 0) -> FlowDataset:
    """Oversample one class to ``target`` records by neighbor interpolation.

    Deterministic given the seed: synthetic record ``i`` uses base sample
    ``i mod n`` and an independent random stream keyed by (seed, i).
    """
    members = [i for i, rec in enumerate(dataset.records) if rec.label == cls]
    current = len(members)
    if current == 0:
        raise ValueError(f"class {cls!r} not present in dataset")
    if target < current:
        raise ValueError(f"SMOTE target {target} below current count {current}")
    if current < k + 1:
        raise ValueError(f"class {cls!r} needs at least {k + 1} members for k={k}")

    # Neighbor lists are fixed for the dataset, so compute them once per base.
    neighbor_cache: dict[int, list[FlowRecord]] = {}
    synthetic: list[FlowRecord] = []
    n_new = target - current
    next_id = len(dataset.records)
    for i in range(n_new):
        base_idx = members[i % current]
        base = dataset.records[base_idx]
        if base_idx not in neighbor_cache:
            neighbor_cache[base_idx] = knn_same_class(base, dataset, k)
        rng = np.random.default_rng(np.random.SeedSequence([seed, i]))
        neighbor = neighbor_cache[base_idx][rng.integers(k)]
        gap = rng.random()
        features = interpolate(base.features, neighbor.features, gap)
        synthetic.append(FlowRecord(features, cls, f"syn{next_id + i}"))

    return FlowDataset.from_records([*dataset.records, *synthetic])


def apply_plan(dataset: FlowDataset, plan: ResamplePlan) -> FlowDataset:
    """Downsample majorities then SMOTE minorities until per-class counts
    match the plan's targets exactly. Classes without a target are left
    alone."""
    counts = dataset.class_counts()
    unknown = [name for name in plan.targets if name not in counts]
    if unknown:
        raise ValueError(f"plan targets unknown classes: {unknown}")
    result = dataset
    for name in result.class_names:
        target = plan.targets.get(name)
        if target is not None and target < counts[name]:
            result = random_downsample(result, name, target, plan.seed)
    for name in result.class_names:
        target = plan.targets.get(name)
        if target is not None and target > result.class_counts()[name]:
            result = smote(result, name, target, plan.k, plan.seed)
    return result
