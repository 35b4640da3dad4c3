import math

import numpy as np
import pytest

from feintchain.alerts import Protocol, RawAlert, parse_ip
from feintchain.similarity import (
    SimilarityConfig,
    SimilarityWeights,
    StageMap,
    alert_similarity,
    common_prefix_bits,
    default_stage_map,
    event_similarity,
    event_similarity_by_stage,
    ip_similarity,
    port_similarity,
    stage_of,
    time_similarity,
)


def make_alert(ts=0.0, proto=Protocol.TCP, s_ip="1.2.3.4", d_ip="5.6.7.8",
               s_port=1000, d_port=80, attack_type="SCAN probe", priority=2):
    if proto is Protocol.ICMP:
        s_port = d_port = None
    return RawAlert(ts, proto, parse_ip(s_ip), parse_ip(d_ip), s_port, d_port,
                    attack_type, "test", priority)


def prefix_bits_oracle(ip1: int, ip2: int) -> int:
    # Bit-by-bit loop from the most significant bit.
    for bit in range(32):
        mask = 1 << (31 - bit)
        if (ip1 & mask) != (ip2 & mask):
            return bit
    return 32


class TestStageMap:
    def test_known_signatures(self):
        stage_map = default_stage_map()
        assert stage_of("ICMP PING", stage_map) == 1
        assert stage_of("RSERVICES rsh root", stage_map) == 6
        assert stage_of(
            "RPC sadmind UDP NETMGT_PROC_SERVICE CLIENT_DOMAIN overflow attempt",
            stage_map) == 4
        assert stage_of("DDOS mstream handler to agent", stage_map) == 7

    def test_unmapped_flagged(self):
        stage, mapped = default_stage_map().lookup("mystery signature")
        assert stage == 1 and mapped is False

    def test_longest_match_wins(self):
        stage_map = StageMap({"RPC": 1, "RPC sadmind UDP PING": 2})
        assert stage_of("RPC sadmind UDP PING variant", stage_map) == 2
        assert stage_of("RPC other", stage_map) == 1

    def test_stage_bounds_enforced(self):
        with pytest.raises(ValueError):
            StageMap({"X": 0})
        with pytest.raises(ValueError):
            StageMap({"X": 8})

    def test_from_file(self, tmp_path):
        path = tmp_path / "map.json"
        path.write_text('{"patterns": {"FOO": 3}}', encoding="utf-8")
        assert stage_of("FOO bar", StageMap.from_file(path)) == 3


class TestEventSimilarity:
    def test_same_or_next_stage(self):
        assert event_similarity_by_stage(2, 2) == 1.0
        assert event_similarity_by_stage(3, 2) == 1.0

    def test_two_stages_ahead_exact(self):
        assert abs(event_similarity_by_stage(3, 1) - math.exp(-0.5)) < 1e-12

    def test_regression_scores_zero(self):
        assert event_similarity_by_stage(1, 2) == 0.0

    def test_non_increasing_beyond_one(self):
        values = [event_similarity_by_stage(1 + d, 1) for d in range(1, 7)]
        assert all(a >= b for a, b in zip(values, values[1:]))

    def test_alert_level_uses_stage_map(self):
        stage_map = default_stage_map()
        a = make_alert(attack_type="RPC sadmind UDP PING")   # stage 2
        b = make_alert(attack_type="ICMP PING", proto=Protocol.ICMP)  # stage 1
        assert event_similarity(a, b, stage_map) == 1.0
        assert event_similarity(b, a, stage_map) == 0.0  # order-sensitive


class TestPrefixBits:
    def test_identical(self):
        assert common_prefix_bits(parse_ip("9.9.9.9"), parse_ip("9.9.9.9")) == 32

    def test_reference_pair(self):
        a, b = parse_ip("172.16.112.10"), parse_ip("172.16.112.50")
        assert common_prefix_bits(a, b) == prefix_bits_oracle(a, b) == 26

    def test_first_bit_differs(self):
        assert common_prefix_bits(parse_ip("0.0.0.0"), parse_ip("128.0.0.0")) == 0

    def test_oracle_agreement_10k(self):
        rng = np.random.default_rng(7)
        pairs = rng.integers(0, 2**32, size=(10_000, 2))
        for ip1, ip2 in pairs:
            assert common_prefix_bits(int(ip1), int(ip2)) == \
                prefix_bits_oracle(int(ip1), int(ip2))

    def test_self_is_32_random(self):
        rng = np.random.default_rng(8)
        for ip in rng.integers(0, 2**32, size=100):
            assert common_prefix_bits(int(ip), int(ip)) == 32


class TestIpSimilarity:
    def test_shared_source(self):
        a = make_alert(s_ip="10.0.0.1", d_ip="99.0.0.1")
        b = make_alert(s_ip="10.0.0.1", d_ip="180.0.0.1")
        assert ip_similarity(a, b) == 1.0

    def test_shared_segment_exact(self):
        # All three pairings share exactly 24 bits.
        a = make_alert(s_ip="1.2.3.1", d_ip="1.2.3.2")
        b = make_alert(s_ip="1.2.3.128", d_ip="1.2.3.129")
        pairs = [(a.s_ip, b.d_ip), (a.s_ip, b.s_ip), (a.d_ip, b.d_ip)]
        assert max(prefix_bits_oracle(u, v) for u, v in pairs) == 24
        assert ip_similarity(a, b) == 24 / 32

    def test_disjoint(self):
        a = make_alert(s_ip="0.0.0.1", d_ip="0.0.0.2")
        b = make_alert(s_ip="128.0.0.1", d_ip="128.0.0.2")
        assert ip_similarity(a, b) == 0.0


class TestPortSimilarity:
    def test_equal_ports(self):
        a = make_alert(d_port=6723)
        b = make_alert(d_port=6723)
        assert port_similarity(a, b) == 1.0

    def test_extreme_ports(self):
        assert port_similarity(make_alert(d_port=0), make_alert(d_port=65535)) == 0.0

    def test_absent_port_default(self):
        icmp = make_alert(proto=Protocol.ICMP)
        assert port_similarity(icmp, make_alert(d_port=80)) == 1.0
        assert port_similarity(icmp, make_alert(d_port=80), absent=0.25) == 0.25


class TestTimeSimilarity:
    def test_zero_gap(self):
        assert time_similarity(make_alert(ts=5.0), make_alert(ts=5.0), 60.0) == 1.0

    def test_one_unit_gap(self):
        value = time_similarity(make_alert(ts=60.0), make_alert(ts=0.0), 60.0)
        assert abs(value - math.exp(-1)) < 1e-12

    def test_ten_unit_gap(self):
        value = time_similarity(make_alert(ts=600.0), make_alert(ts=0.0), 60.0)
        assert abs(value - math.exp(-10)) < 1e-15

    def test_unit_scale_reproduces_plain_decay(self):
        value = time_similarity(make_alert(ts=2.0), make_alert(ts=0.0), 1.0)
        assert abs(value - math.exp(-2)) < 1e-12

    def test_invalid_scale(self):
        with pytest.raises(ValueError):
            time_similarity(make_alert(), make_alert(), 0.0)


class TestTotalSimilarity:
    def test_identical_alert_scores_one(self):
        config = SimilarityConfig()
        a = make_alert(attack_type="ICMP PING", proto=Protocol.ICMP)
        assert abs(alert_similarity(a, a, config) - 1.0) < 1e-12

    def test_all_kernels_zero(self):
        config = SimilarityConfig()
        # event: stage regression; ip: disjoint; port: extremes; time: underflow
        a = make_alert(ts=0.0, s_ip="0.0.0.1", d_ip="0.0.0.2", d_port=0,
                       attack_type="ICMP PING")
        b = make_alert(ts=1e9, s_ip="128.0.0.1", d_ip="128.0.0.2", d_port=65535,
                       attack_type="RSERVICES rsh root")
        assert alert_similarity(a, b, config) == 0.0

    def test_weighted_arithmetic(self):
        # kernels (1, 0.75, 1, e^-1) with equal weights
        config = SimilarityConfig(weights=SimilarityWeights(0.25, 0.25, 0.25, 0.25))
        a = make_alert(ts=60.0, s_ip="1.2.3.1", d_ip="1.2.3.2", d_port=80,
                       attack_type="ICMP PING")
        b = make_alert(ts=0.0, s_ip="1.2.3.128", d_ip="1.2.3.129", d_port=80,
                       attack_type="ICMP PING")
        expected = 0.25 * (1 + 0.75 + 1 + math.exp(-1))
        assert abs(alert_similarity(a, b, config) - expected) < 1e-12
        assert abs(expected - 0.77947) < 5e-6

    def test_range_property_random(self):
        config = SimilarityConfig()
        rng = np.random.default_rng(11)
        types = ["ICMP PING", "RPC sadmind UDP PING", "RSERVICES rsh root",
                 "DDOS mstream handler to agent", "unmapped thing"]
        protos = [Protocol.TCP, Protocol.UDP, Protocol.ICMP]

        def random_alert():
            proto = protos[rng.integers(3)]
            port = None if proto is Protocol.ICMP else int(rng.integers(0, 65536))
            return RawAlert(float(rng.uniform(0, 1e6)), proto,
                            int(rng.integers(0, 2**32)), int(rng.integers(0, 2**32)),
                            port, port, types[rng.integers(len(types))], "c", 1)

        for _ in range(2000):
            a, b = random_alert(), random_alert()
            for value in (event_similarity(a, b, config.stage_map),
                          ip_similarity(a, b), port_similarity(a, b),
                          time_similarity(a, b, config.time_scale),
                          alert_similarity(a, b, config)):
                assert 0.0 <= value <= 1.0

    def test_symmetry_and_asymmetry(self):
        config = SimilarityConfig()
        a = make_alert(ts=0.0, s_ip="40.1.1.1", d_ip="200.1.1.1", d_port=80,
                       attack_type="ICMP PING")
        b = make_alert(ts=90.0, s_ip="200.1.1.1", d_ip="40.9.9.9", d_port=90,
                       attack_type="RSERVICES rsh root")
        assert port_similarity(a, b) == port_similarity(b, a)
        assert time_similarity(a, b, 60.0) == time_similarity(b, a, 60.0)
        assert common_prefix_bits(a.s_ip, b.s_ip) == common_prefix_bits(b.s_ip, a.s_ip)
        # order sensitivity is by construction
        assert event_similarity(a, b, config.stage_map) != \
            event_similarity(b, a, config.stage_map)
        assert ip_similarity(a, b) != ip_similarity(b, a)


class TestWeights:
    def test_must_sum_to_one(self):
        with pytest.raises(ValueError):
            SimilarityWeights(0.5, 0.5, 0.5, 0.5)

    def test_non_negative(self):
        with pytest.raises(ValueError):
            SimilarityWeights(-0.1, 0.6, 0.25, 0.25)

    def test_defaults_valid(self):
        w = SimilarityWeights()
        assert abs(w.event + w.ip + w.port + w.time - 1.0) < 1e-12

    def test_config_validates_time_scale(self):
        with pytest.raises(ValueError):
            SimilarityConfig(time_scale=0.0)
