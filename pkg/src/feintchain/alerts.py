"""Alert and flow data model: fast-alert log parsing and flow CSV ingestion.

The fast-alert grammar handled here is one alert per line:

    MM/DD-HH:MM:SS.ffffff [**] [gid:sid:rev] <msg> [**] \
    [Classification: <text>] [Priority: <int>] {<PROTO>} \
    <ip>[:<port>] -> <ip>[:<port>]

Timestamps carry no year; a configurable base year (default 2000) is
assumed and all times are UTC. Only IPv4 endpoints are supported.
"""
from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import ParseError, SchemaError

N_FLOW_FEATURES = 83

DEFAULT_BASE_YEAR = 2000


class Protocol(str, Enum):
    TCP = "TCP"
    UDP = "UDP"
    ICMP = "ICMP"
    OTHER = "OTHER"


def parse_ip(text: str) -> int:
    """Dotted-quad IPv4 string to an unsigned 32-bit integer."""
    parts = text.split(".")
    if len(parts) != 4:
        raise ValueError(f"not an IPv4 address: {text!r}")
    value = 0
    for part in parts:
        if not part.isdigit():
            raise ValueError(f"not an IPv4 address: {text!r}")
        octet = int(part)
        if octet > 255:
            raise ValueError(f"IPv4 octet out of range: {text!r}")
        value = (value << 8) | octet
    return value


def format_ip(value: int) -> str:
    return f"{(value >> 24) & 0xFF}.{(value >> 16) & 0xFF}.{(value >> 8) & 0xFF}.{value & 0xFF}"


@dataclass(frozen=True)
class RawAlert:
    """One IDS alert: the nine fields carried by a fast-alert line.

    Ports are ``None`` exactly when the protocol is ICMP.
    """

    timestamp: float
    protocol: Protocol
    s_ip: int
    d_ip: int
    s_port: int | None
    d_port: int | None
    attack_type: str
    classification: str
    priority: int

    def __post_init__(self):
        if not math.isfinite(self.timestamp) or self.timestamp < 0:
            raise ValueError(f"timestamp must be finite and non-negative: {self.timestamp}")
        if not 0 <= self.s_ip <= 0xFFFFFFFF or not 0 <= self.d_ip <= 0xFFFFFFFF:
            raise ValueError("IP addresses must be unsigned 32-bit integers")
        ports_absent = self.s_port is None and self.d_port is None
        if (self.protocol is Protocol.ICMP) != ports_absent:
            raise ValueError("ports must be absent if and only if the protocol is ICMP")
        for port in (self.s_port, self.d_port):
            if port is not None and not 0 <= port <= 65535:
                raise ValueError(f"port out of range: {port}")
        if self.priority < 1:
            raise ValueError(f"priority must be >= 1: {self.priority}")


@dataclass(frozen=True)
class LineWarning:
    """A skipped log line: where it was and why parsing failed."""

    line_no: int
    offset: int
    reason: str


_TS_RE = re.compile(r"(\d{2})/(\d{2})-(\d{2}):(\d{2}):(\d{2})\.(\d{6})")
_SIG_RE = re.compile(r"\[(\d+):(\d+):(\d+)\] ")
_CLASSIFICATION_RE = re.compile(r"\[Classification: ([^\]]*)\] ")
_PRIORITY_RE = re.compile(r"\[Priority: (\d+)\] ")
_PROTO_RE = re.compile(r"\{([A-Za-z0-9-]+)\} ")
_SEPARATOR = " [**] "


def _fail(line: str, reason: str, pos: int, line_no: int | None) -> ParseError:
    # Offsets are reported in bytes so they can index the raw log file.
    return ParseError(reason, len(line[:pos].encode("utf-8")), line_no)


def _parse_endpoint(text: str, line: str, pos: int, line_no: int | None, side: str):
    if text.count(":") > 1:
        raise _fail(line, f"IPv6 {side} endpoint is not supported", pos, line_no)
    ip_text, _, port_text = text.partition(":")
    try:
        ip = parse_ip(ip_text)
    except ValueError:
        raise _fail(line, f"malformed {side} address", pos, line_no) from None
    port = None
    if port_text:
        if not port_text.isdigit() or int(port_text) > 65535:
            raise _fail(line, f"malformed {side} port", pos + len(ip_text) + 1, line_no)
        port = int(port_text)
    return ip, port


def parse_fast_alert(line: str, base_year: int = DEFAULT_BASE_YEAR,
                     line_no: int | None = None) -> RawAlert:
    """Parse one fast-alert line into a :class:`RawAlert`.

    Raises :class:`ParseError` naming the malformed component and its byte
    offset within the line.
    """
    pos = 0
    m = _TS_RE.match(line, pos)
    if m is None:
        raise _fail(line, "malformed or missing timestamp", pos, line_no)
    try:
        mon, day, hh, mm, ss, us = (int(g) for g in m.groups())
        stamp = datetime(base_year, mon, day, hh, mm, ss, us, tzinfo=timezone.utc).timestamp()
    except ValueError:
        raise _fail(line, "timestamp fields out of range", pos, line_no) from None
    pos = m.end()

    if not line.startswith(_SEPARATOR, pos):
        raise _fail(line, "missing [**] delimiter after timestamp", pos, line_no)
    pos += len(_SEPARATOR)

    m = _SIG_RE.match(line, pos)
    if m is None:
        raise _fail(line, "malformed or missing signature id", pos, line_no)
    pos = m.end()

    end = line.find(_SEPARATOR, pos)
    if end < 0:
        raise _fail(line, "missing [**] delimiter after message", pos, line_no)
    attack_type = line[pos:end]
    if not attack_type:
        raise _fail(line, "empty alert message", pos, line_no)
    pos = end + len(_SEPARATOR)

    m = _CLASSIFICATION_RE.match(line, pos)
    if m is None:
        raise _fail(line, "malformed or missing classification", pos, line_no)
    classification = m.group(1)
    pos = m.end()

    m = _PRIORITY_RE.match(line, pos)
    if m is None:
        raise _fail(line, "malformed or missing priority", pos, line_no)
    priority = int(m.group(1))
    if priority < 1:
        raise _fail(line, "priority must be >= 1", pos, line_no)
    pos = m.end()

    m = _PROTO_RE.match(line, pos)
    if m is None:
        raise _fail(line, "malformed or missing protocol", pos, line_no)
    proto_text = m.group(1).upper()
    protocol = Protocol(proto_text) if proto_text in ("TCP", "UDP", "ICMP") else Protocol.OTHER
    pos = m.end()

    rest = line[pos:].rstrip()
    src_text, sep, dst_text = rest.partition(" -> ")
    if not sep or not src_text or not dst_text:
        raise _fail(line, "malformed or missing endpoints", pos, line_no)
    s_ip, s_port = _parse_endpoint(src_text, line, pos, line_no, "source")
    d_ip, d_port = _parse_endpoint(dst_text, line, pos + len(src_text) + 4, line_no, "destination")

    if protocol is Protocol.ICMP:
        if s_port is not None or d_port is not None:
            raise _fail(line, "ICMP endpoints must not carry ports", pos, line_no)
    elif s_port is None or d_port is None:
        raise _fail(line, f"missing port for {protocol.value} endpoint", pos, line_no)

    return RawAlert(stamp, protocol, s_ip, d_ip, s_port, d_port,
                    attack_type, classification, priority)


def format_fast_alert(alert: RawAlert, sig: tuple[int, int, int] = (1, 0, 0)) -> str:
    """Render an alert back to fast-alert text (inverse of the parser)."""
    dt = datetime.fromtimestamp(alert.timestamp, tz=timezone.utc)
    stamp = f"{dt:%m/%d-%H:%M:%S}.{dt.microsecond:06d}"
    src = format_ip(alert.s_ip) + (f":{alert.s_port}" if alert.s_port is not None else "")
    dst = format_ip(alert.d_ip) + (f":{alert.d_port}" if alert.d_port is not None else "")
    return (f"{stamp} [**] [{sig[0]}:{sig[1]}:{sig[2]}] {alert.attack_type} [**] "
            f"[Classification: {alert.classification}] [Priority: {alert.priority}] "
            f"{{{alert.protocol.value}}} {src} -> {dst}")


def load_alert_log(path: str | Path,
                   base_year: int = DEFAULT_BASE_YEAR) -> tuple[list[RawAlert], list[LineWarning]]:
    """Read a fast-alert log; malformed lines are reported, not fatal.

    Returns the alerts in file order together with a skipped-line report.
    Empty lines are ignored silently.
    """
    alerts: list[RawAlert] = []
    skipped: list[LineWarning] = []
    with open(path, encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            try:
                alerts.append(parse_fast_alert(line, base_year=base_year, line_no=line_no))
            except ParseError as exc:
                skipped.append(LineWarning(line_no, exc.offset, exc.reason))
    return alerts, skipped


def alert_to_dict(alert: RawAlert) -> dict:
    return {
        "timestamp": alert.timestamp,
        "protocol": alert.protocol.value,
        "s_ip": format_ip(alert.s_ip),
        "d_ip": format_ip(alert.d_ip),
        "s_port": alert.s_port,
        "d_port": alert.d_port,
        "attack_type": alert.attack_type,
        "classification": alert.classification,
        "priority": alert.priority,
    }


def alert_from_dict(data: dict) -> RawAlert:
    return RawAlert(
        timestamp=float(data["timestamp"]),
        protocol=Protocol(data["protocol"]),
        s_ip=parse_ip(data["s_ip"]),
        d_ip=parse_ip(data["d_ip"]),
        s_port=data["s_port"],
        d_port=data["d_port"],
        attack_type=data["attack_type"],
        classification=data["classification"],
        priority=int(data["priority"]),
    )


@dataclass(frozen=True, eq=False)
class FlowRecord:
    """One statistical flow: 83 feature values plus a class label."""

    features: np.ndarray
    label: str
    source_id: str

    def __post_init__(self):
        feats = np.asarray(self.features, dtype=np.float64)
        if feats.shape != (N_FLOW_FEATURES,):
            raise ValueError(f"expected {N_FLOW_FEATURES} features, got shape {feats.shape}")
        if not np.all(np.isfinite(feats)):
            raise ValueError("flow features must be finite after sanitization")
        object.__setattr__(self, "features", feats)


@dataclass(frozen=True, eq=False)
class FlowDataset:
    """A labelled flow collection with per-feature (min, max) normalization."""

    records: tuple[FlowRecord, ...]
    class_names: tuple[str, ...]
    normalization: np.ndarray  # shape (83, 2): per-feature (min, max)

    @classmethod
    def from_records(cls, records: list[FlowRecord] | tuple[FlowRecord, ...]) -> "FlowDataset":
        records = tuple(records)
        class_names: list[str] = []
        for rec in records:
            if rec.label not in class_names:
                class_names.append(rec.label)
        if records:
            matrix = np.stack([rec.features for rec in records])
            norm = np.stack([matrix.min(axis=0), matrix.max(axis=0)], axis=1)
        else:
            norm = np.zeros((N_FLOW_FEATURES, 2))
        return cls(records, tuple(class_names), norm)

    def __len__(self) -> int:
        return len(self.records)

    def feature_matrix(self) -> np.ndarray:
        if not self.records:
            return np.zeros((0, N_FLOW_FEATURES))
        return np.stack([rec.features for rec in self.records])

    def labels(self) -> list[str]:
        return [rec.label for rec in self.records]

    def class_counts(self) -> dict[str, int]:
        counts = {name: 0 for name in self.class_names}
        for rec in self.records:
            counts[rec.label] += 1
        return counts

    def normalized_matrix(self) -> np.ndarray:
        """Min-max normalized features; constant columns map to zero."""
        matrix = self.feature_matrix()
        lo = self.normalization[:, 0]
        span = self.normalization[:, 1] - lo
        out = np.zeros_like(matrix)
        nonconst = span > 0
        out[:, nonconst] = (matrix[:, nonconst] - lo[nonconst]) / span[nonconst]
        return out

    def subset(self, indices) -> "FlowDataset":
        return FlowDataset.from_records([self.records[i] for i in indices])


@dataclass(frozen=True)
class FlowSchema:
    """Column map for flow CSV files: 83 feature columns plus one label column."""

    feature_columns: tuple[str, ...]
    label_column: str

    def __post_init__(self):
        if len(self.feature_columns) != N_FLOW_FEATURES:
            raise SchemaError(
                f"schema must name exactly {N_FLOW_FEATURES} feature columns, "
                f"got {len(self.feature_columns)}"
            )


def _sanitize_columns(matrix: np.ndarray) -> np.ndarray:
    """Replace non-finite cells: NaN -> 0, +inf -> column max, -inf -> column min.

    Column extremes are taken over the finite values; a column with no finite
    values sanitizes to zero.
    """
    out = matrix.copy()
    for col in range(out.shape[1]):
        column = out[:, col]
        finite = np.isfinite(column)
        if not finite.all():
            hi = column[finite].max() if finite.any() else 0.0
            lo = column[finite].min() if finite.any() else 0.0
            column[np.isnan(column)] = 0.0
            column[np.isposinf(column)] = hi
            column[np.isneginf(column)] = lo
    return out


def load_flow_csv(path: str | Path, schema: FlowSchema | None = None) -> FlowDataset:
    """Load a flow-feature CSV (header row, 83 numeric columns, final `Label`).

    Without an explicit schema every column except the last is treated as a
    feature. Non-finite values are sanitized before the dataset is built.
    """
    with open(path, encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file (missing header row)") from None
        rows = [row for row in reader if row]

    if schema is None:
        if len(header) != N_FLOW_FEATURES + 1:
            raise SchemaError(
                f"{path}: expected {N_FLOW_FEATURES + 1} columns "
                f"({N_FLOW_FEATURES} features + label), got {len(header)}"
            )
        feature_idx = list(range(N_FLOW_FEATURES))
        label_idx = N_FLOW_FEATURES
    else:
        positions = {name: i for i, name in enumerate(header)}
        missing = [c for c in (*schema.feature_columns, schema.label_column)
                   if c not in positions]
        if missing:
            raise SchemaError(f"{path}: columns missing from header: {missing}")
        feature_idx = [positions[c] for c in schema.feature_columns]
        label_idx = positions[schema.label_column]

    if not rows:
        raise SchemaError(f"{path}: no data rows")

    values = np.empty((len(rows), N_FLOW_FEATURES))
    labels = []
    for i, row in enumerate(rows):
        if len(row) != len(header):
            raise SchemaError(f"{path}: row {i + 2} has {len(row)} cells, expected {len(header)}")
        try:
            values[i] = [float(row[j]) for j in feature_idx]
        except ValueError as exc:
            raise SchemaError(f"{path}: row {i + 2}: {exc}") from None
        labels.append(row[label_idx])

    values = _sanitize_columns(values)
    records = [FlowRecord(values[i], labels[i], str(i)) for i in range(len(rows))]
    return FlowDataset.from_records(records)


def write_flow_csv(dataset: FlowDataset, path: str | Path,
                   feature_names: tuple[str, ...] | None = None,
                   label_column: str = "Label") -> None:
    """Write a dataset back out in the flow CSV format."""
    if feature_names is None:
        feature_names = tuple(f"f{i:02d}" for i in range(N_FLOW_FEATURES))
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow([*feature_names, label_column])
        for rec in dataset.records:
            writer.writerow([repr(float(v)) for v in rec.features] + [rec.label])
