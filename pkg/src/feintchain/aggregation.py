"""Five-tuple alert aggregation.

Near-duplicate alerts are merged by four matching modes over the five-tuple
(attack_type, s_ip, d_ip, s_port, d_port):

* A — the full five-tuple is equal (the same event alerted repeatedly);
* B — all but the destination port are equal (a port scan of one host);
* C — attack type and source are equal and the destinations share a network
  segment (a segment sweep);
* D — the attack types differ but both endpoints match (a springboard
  relation).

Modes A-C merge records; mode D only records a cross-reference link, so
distinct attack stages stay distinct for downstream sequence mining.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from enum import Enum

from .alerts import RawAlert, alert_from_dict, alert_to_dict


class MergeMode(str, Enum):
    A = "A"
    B = "B"
    C = "C"
    D = "D"
    NONE = "NONE"


@dataclass
class AggregatedAlert:
    """A merged alert group. The representative is the earliest member."""

    representative: RawAlert
    count: int
    first_seen: float
    last_seen: float
    mode: MergeMode
    links: tuple[int, ...] = ()  # output indices of D-related aggregates

    def validate(self) -> None:
        if self.count < 1:
            raise ValueError("count must be >= 1")
        if self.count == 1 and self.mode is not MergeMode.NONE:
            raise ValueError("singleton aggregates must carry mode NONE")
        if not self.first_seen <= self.representative.timestamp <= self.last_seen:
            raise ValueError("representative timestamp must lie in [first_seen, last_seen]")


@dataclass(frozen=True)
class AggregationReport:
    raw_count: int
    output_count: int
    rate: float


def aggregation_rate(raw_count: int, output_count: int) -> float:
    """Fraction of raw alerts removed by aggregation; 0 for an empty input."""
    if raw_count < 0 or output_count < 0:
        raise ValueError("counts must be non-negative")
    if output_count > raw_count:
        raise ValueError(f"output_count {output_count} exceeds raw_count {raw_count}")
    if raw_count == 0:
        return 0.0
    return (raw_count - output_count) / raw_count


def _same_segment(ip1: int, ip2: int, prefix_len: int) -> bool:
    shift = 32 - prefix_len
    return (ip1 >> shift) == (ip2 >> shift)


def match_mode(a: RawAlert, b: RawAlert, window: float = math.inf,
               segment_prefix: int = 24) -> MergeMode:
    """First matching mode in precedence order A > B > C > D, else NONE.

    Callers must only compare alerts within the time window.
    """
    if abs(a.timestamp - b.timestamp) > window:
        raise ValueError("alerts compared outside the aggregation window")
    if a.attack_type == b.attack_type:
        if a.s_ip == b.s_ip:
            if a.d_ip == b.d_ip and a.s_port == b.s_port:
                if a.d_port == b.d_port:
                    return MergeMode.A
                return MergeMode.B
            if _same_segment(a.d_ip, b.d_ip, segment_prefix):
                return MergeMode.C
    elif a.s_ip == b.s_ip and a.d_ip == b.d_ip:
        return MergeMode.D
    return MergeMode.NONE


def aggregate(alerts: list[RawAlert], window: float = 60.0,
              segment_prefix: int = 24) -> tuple[list[AggregatedAlert], AggregationReport]:
    """Single left-to-right aggregation pass over a time-sorted stream.

    Each alert merges into the most recent open aggregate whose
    representative matches under modes A-C within the window; otherwise it
    opens a new aggregate, cross-linked to the most recent mode-D match if
    one exists. Output is ordered by first_seen and member counts sum to the
    raw input size.
    """
    ordered = sorted(alerts, key=lambda a: a.timestamp)
    result: list[AggregatedAlert] = []
    open_idx: deque[int] = deque()  # indices into result, oldest first

    for alert in ordered:
        horizon = alert.timestamp - window
        while open_idx and result[open_idx[0]].representative.timestamp < horizon:
            open_idx.popleft()

        merged = False
        d_link: int | None = None
        for idx in reversed(open_idx):
            agg = result[idx]
            mode = match_mode(alert, agg.representative, window, segment_prefix)
            if mode in (MergeMode.A, MergeMode.B, MergeMode.C):
                agg.count += 1
                agg.last_seen = max(agg.last_seen, alert.timestamp)
                agg.mode = mode
                merged = True
                break
            if mode is MergeMode.D and d_link is None:
                d_link = idx
        if not merged:
            links = (d_link,) if d_link is not None else ()
            result.append(AggregatedAlert(alert, 1, alert.timestamp, alert.timestamp,
                                          MergeMode.NONE, links))
            open_idx.append(len(result) - 1)

    report = AggregationReport(len(ordered), len(result),
                               aggregation_rate(len(ordered), len(result)))
    return result, report


def aggregate_to_dict(agg: AggregatedAlert) -> dict:
    return {
        "representative": alert_to_dict(agg.representative),
        "count": agg.count,
        "first_seen": agg.first_seen,
        "last_seen": agg.last_seen,
        "mode": agg.mode.value,
        "links": list(agg.links),
    }


def aggregate_from_dict(data: dict) -> AggregatedAlert:
    return AggregatedAlert(
        representative=alert_from_dict(data["representative"]),
        count=int(data["count"]),
        first_seen=float(data["first_seen"]),
        last_seen=float(data["last_seen"]),
        mode=MergeMode(data["mode"]),
        links=tuple(data.get("links", ())),
    )
