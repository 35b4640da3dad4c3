"""Attribute similarity kernels between IDS alerts.

Four kernels (attack event stage, IP prefix, destination port, time) are
combined into a weighted total in [0, 1]. Attack events are placed on the
seven-stage kill chain by a pattern map from signature names to stage
indices.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Mapping

from .alerts import RawAlert

STAGE_MIN = 1
STAGE_MAX = 7

PORT_SPAN = 65535.0


@dataclass(frozen=True)
class StageMap:
    """Maps signature names to kill-chain stage indices (1..7).

    A pattern matches a signature either exactly or as a prefix; the longest
    matching pattern wins. Unmapped signatures fall back to stage 1 and are
    flagged as unmapped.
    """

    patterns: Mapping[str, int]

    def __post_init__(self):
        for pattern, stage in self.patterns.items():
            if not isinstance(stage, int) or not STAGE_MIN <= stage <= STAGE_MAX:
                raise ValueError(
                    f"stage for pattern {pattern!r} must be an integer in "
                    f"[{STAGE_MIN}, {STAGE_MAX}], got {stage!r}"
                )
        object.__setattr__(self, "patterns", dict(self.patterns))

    def lookup(self, attack_type: str) -> tuple[int, bool]:
        """Return (stage, mapped). Unmapped types give (1, False)."""
        best_len = -1
        best_stage = STAGE_MIN
        for pattern, stage in self.patterns.items():
            if len(pattern) > best_len and attack_type.startswith(pattern):
                best_len = len(pattern)
                best_stage = stage
        return (best_stage, best_len >= 0)

    @classmethod
    def from_file(cls, path: str | Path) -> "StageMap":
        with open(path, encoding="utf-8") as handle:
            data = json.load(handle)
        return cls(patterns={k: int(v) for k, v in data["patterns"].items()})


def default_stage_map() -> StageMap:
    """The packaged seven-stage map keyed by signature name prefixes."""
    text = resources.files("feintchain.data").joinpath("stage_map.json").read_text("utf-8")
    data = json.loads(text)
    return StageMap(patterns={k: int(v) for k, v in data["patterns"].items()})


def stage_of(attack_type: str, stage_map: StageMap) -> int:
    """Kill-chain stage of a signature; unmapped types map to stage 1."""
    return stage_map.lookup(attack_type)[0]


@dataclass(frozen=True)
class SimilarityWeights:
    """Non-negative kernel weights that must sum to 1."""

    event: float = 0.35
    ip: float = 0.30
    port: float = 0.10
    time: float = 0.25

    def __post_init__(self):
        values = (self.event, self.ip, self.port, self.time)
        if any(w < 0 for w in values):
            raise ValueError(f"weights must be non-negative: {values}")
        if abs(sum(values) - 1.0) > 1e-9:
            raise ValueError(f"weights must sum to 1 (got {sum(values)!r})")


@dataclass(frozen=True)
class SimilarityConfig:
    """Everything the total similarity needs: weights, stage map, time scale.

    ``time_scale`` is the number of seconds worth one time-decay unit;
    ``time_scale=1`` reproduces the plain exp(-|dt|) decay.
    """

    weights: SimilarityWeights = field(default_factory=SimilarityWeights)
    stage_map: StageMap = field(default_factory=default_stage_map)
    time_scale: float = 60.0
    absent_port_similarity: float = 1.0

    def __post_init__(self):
        if not self.time_scale > 0:
            raise ValueError(f"time_scale must be positive: {self.time_scale}")
        if not 0.0 <= self.absent_port_similarity <= 1.0:
            raise ValueError("absent_port_similarity must be in [0, 1]")


def event_similarity_by_stage(stage_a: int, stage_b: int) -> float:
    """Stage-difference kernel: 1 for a same/next-stage pair, exponential
    falloff when the first alert is more than one stage ahead, 0 when it is
    behind."""
    delta = stage_a - stage_b
    if delta in (0, 1):
        return 1.0
    if delta > 1:
        return math.exp(-(delta - 1.5))
    return 0.0


def event_similarity(a: RawAlert, b: RawAlert, stage_map: StageMap) -> float:
    return event_similarity_by_stage(stage_of(a.attack_type, stage_map),
                                     stage_of(b.attack_type, stage_map))


def common_prefix_bits(ip1: int, ip2: int) -> int:
    """Number of equal leading bits of two 32-bit addresses (0..32)."""
    diff = (ip1 ^ ip2) & 0xFFFFFFFF
    return 32 - diff.bit_length()


def ip_similarity(a: RawAlert, b: RawAlert) -> float:
    """Best shared prefix, in bits / 32, over the three address pairings
    (a.src vs b.dst, a.src vs b.src, a.dst vs b.dst)."""
    best = max(common_prefix_bits(a.s_ip, b.d_ip),
               common_prefix_bits(a.s_ip, b.s_ip),
               common_prefix_bits(a.d_ip, b.d_ip))
    return best / 32.0


def port_similarity(a: RawAlert, b: RawAlert, absent: float = 1.0) -> float:
    """Normalized closeness of destination ports; pairs with an absent port
    (ICMP) score the configured default."""
    if a.d_port is None or b.d_port is None:
        return absent
    return 1.0 - abs(a.d_port - b.d_port) / PORT_SPAN


def time_similarity(a: RawAlert, b: RawAlert, time_scale: float = 60.0) -> float:
    """Exponential decay in the absolute timestamp gap, in time_scale units."""
    if not time_scale > 0:
        raise ValueError(f"time_scale must be positive: {time_scale}")
    return math.exp(-abs(a.timestamp - b.timestamp) / time_scale)


def alert_similarity(a: RawAlert, b: RawAlert, config: SimilarityConfig) -> float:
    """Weighted total similarity of two alerts, in [0, 1]."""
    w = config.weights
    return (w.event * event_similarity(a, b, config.stage_map)
            + w.ip * ip_similarity(a, b)
            + w.port * port_similarity(a, b, config.absent_port_similarity)
            + w.time * time_similarity(a, b, config.time_scale))
