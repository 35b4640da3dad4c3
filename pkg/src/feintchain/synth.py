"""Deterministic synthetic scenario generation.

Two generators provide the desk-scale stand-ins for packet-capture replay:

* :func:`generate_alert_log` interleaves multi-process attack scripts (the
  five-phase DDoS-style template by default) with background noise alerts
  and returns the fast-alert text plus a per-line ground-truth process map.
* :func:`generate_flow_dataset` draws 83-feature flow records from per-class
  Gaussian bumps with designed geometry: well-separated attack classes plus
  one "hard" class sitting inside the normal cloud.

Everything is a pure function of its spec; a fixed seed gives byte-identical
output.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np

from .alerts import N_FLOW_FEATURES, FlowDataset, FlowRecord, Protocol, RawAlert, \
    format_fast_alert, parse_ip

_EPOCH_2000 = datetime(2000, 1, 5, 0, 0, tzinfo=timezone.utc).timestamp()


@dataclass(frozen=True)
class AttackPhase:
    """One scripted step of a multi-stage attack."""

    attack_type: str
    protocol: Protocol
    d_port: int | None
    classification: str
    priority: int


# The classic five-phase DDoS intrusion script: sweep, service probe,
# overflow exploit, remote-shell install, DDoS launch.
LLDOS_PHASES: tuple[AttackPhase, ...] = (
    AttackPhase("ICMP PING", Protocol.ICMP, None, "Misc activity", 3),
    AttackPhase("RPC sadmind UDP PING", Protocol.UDP, 32773, "Attempted Recon", 2),
    AttackPhase("RPC sadmind UDP NETMGT_PROC_SERVICE CLIENT_DOMAIN overflow attempt",
                Protocol.UDP, 32773, "Attempted Administrator Privilege Gain", 1),
    AttackPhase("RSERVICES rsh root", Protocol.TCP, 514, "Potentially Bad Traffic", 2),
    AttackPhase("DDOS mstream handler to agent", Protocol.TCP, 6723,
                "Attempted Denial of Service", 2),
)

NOISE_POOL: tuple[AttackPhase, ...] = (
    AttackPhase("SNMP request udp", Protocol.UDP, 161, "Attempted Information Leak", 2),
    AttackPhase("BAD-TRAFFIC loopback traffic", Protocol.TCP, 80, "Potentially Bad Traffic", 2),
    AttackPhase("FTP Bad login", Protocol.TCP, 21, "Potentially Bad Traffic", 2),
    AttackPhase("TELNET Bad Login", Protocol.TCP, 23, "Potentially Bad Traffic", 2),
)

# First octets are chosen so noise endpoints (64..79 / 96..111) share at most
# one leading bit with any attacker or target, keeping cross-entity IP
# similarity too low for accidental cluster joins.
ATTACKER_OCTETS = (202, 61, 137, 24, 155, 49, 178, 9, 141, 56, 199, 183)
TARGET_OCTETS = (172, 10, 192, 45, 147, 33, 209, 18, 164, 51, 186, 29)


@dataclass(frozen=True)
class ScenarioSpec:
    """Layout of a synthetic alert scenario.

    Noise placement "gaps" drops noise into quiet spans at least
    ``noise_margin`` seconds away from every attack burst (this is what the
    clustering ground-truth fixtures rely on); "poisson" draws seeded
    exponential inter-arrivals at ``noise_rate`` alerts/second instead.
    """

    phases: tuple[AttackPhase, ...] = LLDOS_PHASES
    processes: int = 2
    alerts_per_phase: int = 3
    intra_gap: float = 5.0
    phase_gap: float = 90.0
    process_offset: float = 180.0
    noise_alerts: int = 8
    noise_placement: str = "gaps"
    noise_rate: float = 0.01
    noise_margin: float = 45.0
    start_time: float = _EPOCH_2000
    seed: int = 0

    def __post_init__(self):
        if not self.phases:
            raise ValueError("scenario needs at least one phase")
        if self.processes < 1:
            raise ValueError("processes must be >= 1")
        if self.processes > len(ATTACKER_OCTETS):
            raise ValueError(f"host pool supports at most {len(ATTACKER_OCTETS)} processes")
        if self.noise_placement not in ("gaps", "poisson"):
            raise ValueError(f"unknown noise placement {self.noise_placement!r}")


def _attacker_ip(proc: int) -> int:
    return parse_ip(f"{ATTACKER_OCTETS[proc]}.77.162.213")


def _target_ip(proc: int, phase: int, alert: int) -> int:
    return parse_ip(f"{TARGET_OCTETS[proc]}.16.{110 + phase}.{10 + alert}")


def _phase_alert(phase: AttackPhase, ts: float, s_ip: int, d_ip: int,
                 s_port: int | None) -> RawAlert:
    if phase.protocol is Protocol.ICMP:
        s_port = d_port = None
    else:
        d_port = phase.d_port
        if s_port is None:
            s_port = 1042
    return RawAlert(ts, phase.protocol, s_ip, d_ip, s_port, d_port,
                    phase.attack_type, phase.classification, phase.priority)


def generate_alert_log(spec: ScenarioSpec) -> tuple[str, list[str]]:
    """Emit a fast-alert log plus the hidden process id of every line.

    Attack lines carry ids ``p<k>``; each noise alert is its own ground-truth
    singleton ``n<k>``.
    """
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed, 11]))
    events: list[tuple[float, int, str, RawAlert]] = []
    serial = 0

    burst_span = (spec.alerts_per_phase - 1) * spec.intra_gap
    phase_stride = burst_span + spec.phase_gap
    bursts: list[tuple[float, float]] = []

    for proc in range(spec.processes):
        s_ip = _attacker_ip(proc)
        s_port = 1042 + proc
        proc_start = spec.start_time + proc * spec.process_offset
        for phase_idx, phase in enumerate(spec.phases):
            t0 = proc_start + phase_idx * phase_stride
            bursts.append((t0, t0 + burst_span))
            for k in range(spec.alerts_per_phase):
                ts = t0 + k * spec.intra_gap
                alert = _phase_alert(phase, ts, s_ip, _target_ip(proc, phase_idx, k), s_port)
                events.append((ts, serial, f"p{proc}", alert))
                serial += 1

    bursts.sort()
    noise_times = _noise_times(spec, bursts, rng)
    for n_idx, ts in enumerate(noise_times):
        phase = NOISE_POOL[n_idx % len(NOISE_POOL)]
        s_ip = parse_ip(f"{64 + n_idx % 16}.{3 + n_idx}.7.9")
        d_ip = parse_ip(f"{96 + n_idx % 16}.{5 + n_idx}.8.6")
        alert = _phase_alert(phase, ts, s_ip, d_ip, 4000 + 17 * n_idx)
        events.append((ts, serial, f"n{n_idx}", alert))
        serial += 1

    events.sort(key=lambda e: (e[0], e[1]))
    lines = [format_fast_alert(alert) for _, _, _, alert in events]
    truth = [pid for _, _, pid, _ in events]
    return "\n".join(lines) + "\n", truth


def _noise_times(spec: ScenarioSpec, bursts: list[tuple[float, float]],
                 rng: np.random.Generator) -> list[float]:
    if spec.noise_alerts <= 0 and spec.noise_placement == "gaps":
        return []
    first = bursts[0][0]
    last = bursts[-1][1]
    if spec.noise_placement == "poisson":
        times = []
        t = first - 2 * spec.noise_margin
        while t < last + 2 * spec.noise_margin:
            t += rng.exponential(1.0 / spec.noise_rate)
            times.append(t)
        return times

    # "gaps": midpoints of quiet spans wide enough to keep noise at least
    # noise_margin away from any attack alert, then leading/trailing tails.
    times: list[float] = []
    for (_, end), (start, _) in zip(bursts, bursts[1:]):
        if start - end >= 2 * spec.noise_margin and len(times) < spec.noise_alerts:
            times.append((end + start) / 2.0)
    step = max(2 * spec.noise_margin, 120.0)
    k = 1
    while len(times) < spec.noise_alerts:
        times.append(first - k * step)
        if len(times) < spec.noise_alerts:
            times.append(last + k * step)
        k += 1
    return sorted(times[:spec.noise_alerts])


# ---------------------------------------------------------------------------
# Pipeline benchmark log
# ---------------------------------------------------------------------------

_BENCH_RAW = 17169
_BENCH_AGGREGATES = 3222
_BENCH_MULTI = 195
_BENCH_NOISE = 749
_BENCH_MULTI_ALERTS = _BENCH_AGGREGATES - _BENCH_NOISE  # 2473

_TEMPLATE_SUPPORTS = (60, 30, 24, 20, 16, 15, 12, 10, 8)


def _benchmark_templates() -> list[tuple[AttackPhase, ...]]:
    p = LLDOS_PHASES
    snmp = NOISE_POOL[0]
    ftp = NOISE_POOL[2]
    query = AttackPhase("RPC sadmind query with root credentials attempt UDP",
                        Protocol.UDP, 32773, "Attempted Recon", 2)
    return [
        p,                      # full five-phase chain
        (p[0], p[1]),           # sweep + service probe
        (p[1], p[2]),           # probe + overflow
        (p[2], p[3]),           # overflow + shell
        (p[3], p[4]),           # shell + DDoS launch
        (p[0], snmp),           # two-pronged reconnaissance
        (ftp, p[3]),            # brute-force login + shell
        (p[0], query),          # sweep + credentialed query
        (p[0], p[1], p[2]),     # three-phase intrusion
    ]


def generate_benchmark_log(seed: int = 20) -> tuple[str, list[str]]:
    """A 17169-line log whose pipeline footprint matches the reference
    counts: 3222 aggregates, 944 sequences, 195 multi-stage, 9 patterns.

    Construction: 944 "lanes", one hour apart, each owning two /16 networks
    so no two lanes can merge or cluster together. 195 lanes replay one of
    nine stage-trace templates (element repeats target fresh /24s so
    aggregation keeps them apart); 749 lanes hold one noise alert. Every
    lane slot is then inflated with exact five-tuple duplicates inside the
    aggregation window until the raw line count is reached.
    """
    rng = np.random.default_rng(np.random.SeedSequence([seed, 3]))
    templates = _benchmark_templates()

    lane_templates: list[int] = []
    for t_idx, support in enumerate(_TEMPLATE_SUPPORTS):
        lane_templates.extend([t_idx] * support)

    base_len = sum(len(templates[t]) for t in lane_templates)
    extra_alerts = _BENCH_MULTI_ALERTS - base_len
    if extra_alerts < 0:
        raise ValueError("template bases exceed the multi-stage alert budget")
    lane_extra = rng.multinomial(extra_alerts, np.full(_BENCH_MULTI, 1.0 / _BENCH_MULTI))

    # Expand each lane: repeat template elements consecutively so the trace
    # (and hence the pattern) is unchanged after duplicate collapsing.
    lane_phases: list[list[AttackPhase]] = []
    for lane, t_idx in enumerate(lane_templates):
        template = templates[t_idx]
        repeats = np.ones(len(template), dtype=np.int64)
        repeats += rng.multinomial(int(lane_extra[lane]),
                                   np.full(len(template), 1.0 / len(template)))
        expanded: list[AttackPhase] = []
        for phase, reps in zip(template, repeats):
            expanded.extend([phase] * int(reps))
        lane_phases.append(expanded)

    for n_idx in range(_BENCH_NOISE):
        lane_phases.append([NOISE_POOL[n_idx % len(NOISE_POOL)]])

    order = rng.permutation(len(lane_phases))
    slots: list[RawAlert] = []
    lane_of_slot: list[int] = []
    for hour, lane in enumerate(order):
        s_idx, d_idx = 2 * int(lane), 2 * int(lane) + 1
        s_ip = parse_ip(f"{1 + s_idx // 256}.{s_idx % 256}.3.7")
        lane_start = _EPOCH_2000 + hour * 3600.0
        for slot, phase in enumerate(lane_phases[lane]):
            d_ip = parse_ip(f"{1 + d_idx // 256}.{d_idx % 256}.{slot}.10")
            alert = _phase_alert(phase, lane_start + 30.0 * slot, s_ip, d_ip,
                                 2000 + int(lane) % 30000)
            slots.append(alert)
            lane_of_slot.append(int(lane))

    assert len(slots) == _BENCH_AGGREGATES

    copies = rng.multinomial(_BENCH_RAW - _BENCH_AGGREGATES,
                             np.full(len(slots), 1.0 / len(slots)))
    events: list[tuple[float, int, str, RawAlert]] = []
    serial = 0
    for slot_idx, alert in enumerate(slots):
        pid = f"lane{lane_of_slot[slot_idx]}"
        events.append((alert.timestamp, serial, pid, alert))
        serial += 1
        for c in range(int(copies[slot_idx])):
            # Duplicates stay within the aggregation window of the original.
            dup = RawAlert(alert.timestamp + 1.0 + (c % 50), alert.protocol,
                           alert.s_ip, alert.d_ip, alert.s_port, alert.d_port,
                           alert.attack_type, alert.classification, alert.priority)
            events.append((dup.timestamp, serial, pid, dup))
            serial += 1

    events.sort(key=lambda e: (e[0], e[1]))
    lines = [format_fast_alert(alert) for _, _, _, alert in events]
    truth = [pid for _, _, pid, _ in events]
    return "\n".join(lines) + "\n", truth


# ---------------------------------------------------------------------------
# Flow datasets
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FlowClassSpec:
    """One generated flow class: its label, size, and geometric role."""

    name: str
    count: int
    kind: str = "separable"  # "normal" | "separable" | "hard"

    def __post_init__(self):
        if self.count < 0:
            raise ValueError("count must be >= 0")
        if self.kind not in ("normal", "separable", "hard"):
            raise ValueError(f"unknown class kind {self.kind!r}")


@dataclass(frozen=True)
class FlowSpec:
    """Geometry of a synthetic flow dataset.

    Separable class means sit ``separation`` standard deviations from the
    normal mean along distinct feature axes; hard class means sit within
    ``hard_offset`` standard deviations of it.
    """

    classes: tuple[FlowClassSpec, ...]
    sigma: float = 0.05
    separation: float = 12.0
    hard_offset: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if not self.classes:
            raise ValueError("flow spec needs at least one class")
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")

    def class_means(self) -> dict[str, np.ndarray]:
        """The designed class means (same stream the generator uses).

        Each separable class is displaced across its own 16-feature block,
        which keeps the prescribed total separation while spreading the
        signal over enough input cells for a convolutional learner.
        """
        rng = np.random.default_rng(np.random.SeedSequence([self.seed, 0]))
        base = rng.uniform(0.3, 0.7, N_FLOW_FEATURES)
        block = 16
        per_axis = self.separation * self.sigma / np.sqrt(block)
        means: dict[str, np.ndarray] = {}
        slot = 0
        for cls in self.classes:
            if cls.kind == "normal":
                means[cls.name] = base.copy()
            elif cls.kind == "separable":
                mean = base.copy()
                start = (slot * block) % (N_FLOW_FEATURES - block)
                mean[start:start + block] += per_axis
                slot += 1
                means[cls.name] = mean
            else:  # hard: inside the normal cloud
                mean = base.copy()
                mean[-1] += self.hard_offset * self.sigma
                means[cls.name] = mean
        return means


def generate_flow_dataset(spec: FlowSpec) -> FlowDataset:
    """Draw the dataset described by the spec; deterministic under its seed."""
    means = spec.class_means()
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed, 1]))
    records: list[FlowRecord] = []
    for cls in spec.classes:
        samples = means[cls.name] + spec.sigma * rng.standard_normal(
            (cls.count, N_FLOW_FEATURES))
        for row in samples:
            records.append(FlowRecord(row, cls.name, str(len(records))))
    return FlowDataset.from_records(records)


def overlap_flow_spec(seed: int = 0, n_normal: int = 240, n_attack: int = 60,
                      n_hard: int = 24) -> FlowSpec:
    """The standard virtual/real test geometry: two clean attack classes and
    one class hidden inside the Normal cloud."""
    return FlowSpec(
        classes=(
            FlowClassSpec("Normal", n_normal, "normal"),
            FlowClassSpec("AttackA", n_attack, "separable"),
            FlowClassSpec("AttackB", n_attack, "separable"),
            FlowClassSpec("Stealth", n_hard, "hard"),
        ),
        seed=seed,
    )
