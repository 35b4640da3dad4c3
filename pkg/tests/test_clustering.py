from collections import defaultdict

import numpy as np
import pytest

from feintchain.alerts import Protocol, RawAlert, parse_ip
from feintchain.clustering import (
    AttackSequence,
    AttackSequenceSet,
    FuzzyClusterer,
    extract_patterns,
    format_patterns_table,
    fuzzy_cluster,
    load_sequence_indices,
    membership,
    prune_singletons,
    save_sequences,
)
from feintchain.similarity import SimilarityConfig, alert_similarity, default_stage_map


def alert(ts=0.0, attack_type="ICMP PING", s_ip="10.0.0.1", d_ip="20.0.0.1",
          d_port=None, proto=Protocol.ICMP):
    s_port = None if proto is Protocol.ICMP else 1000
    d_port = None if proto is Protocol.ICMP else d_port
    return RawAlert(ts, proto, parse_ip(s_ip), parse_ip(d_ip), s_port, d_port,
                    attack_type, "test", 2)


class TestMembership:
    def test_member_of_sequence_scores_one(self):
        config = SimilarityConfig()
        a = alert()
        seq = AttackSequence(0, [a, alert(ts=50.0)], [0, 1])
        assert membership(a, seq, config) == 1.0

    def test_singleton_equals_pairwise(self):
        config = SimilarityConfig()
        a, b = alert(ts=0.0), alert(ts=30.0, s_ip="11.0.0.1")
        seq = AttackSequence(0, [b], [0])
        assert membership(a, seq, config) == alert_similarity(a, b, config)

    def test_max_over_members(self):
        config = SimilarityConfig()
        query = alert(ts=0.0)
        near = alert(ts=10.0, s_ip="10.0.0.1")
        far = alert(ts=5000.0, s_ip="200.9.9.9", d_ip="90.1.1.1")
        seq = AttackSequence(0, [near, far], [0, 1])
        sims = [alert_similarity(query, member, config) for member in (near, far)]
        assert membership(query, seq, config) == max(sims)

    def test_empty_sequence_rejected(self):
        with pytest.raises(ValueError):
            membership(alert(), AttackSequence(0, [], []), SimilarityConfig())


class TestFuzzyCluster:
    def test_single_alert(self):
        result = fuzzy_cluster([alert()], 0.6)
        assert len(result) == 1
        assert result.sequences[0].indices == [0]

    def test_threshold_validated(self):
        with pytest.raises(ValueError):
            fuzzy_cluster([alert()], 1.5)

    def test_two_process_ground_truth(self, two_process_scenario):
        alerts, truth = two_process_scenario
        assert len(alerts) <= 50
        result = fuzzy_cluster(alerts, 0.6)
        recovered = sorted(frozenset(s.indices) for s in result.sequences)
        expected_groups = defaultdict(set)
        for i, pid in enumerate(truth):
            expected_groups[pid].add(i)
        expected = sorted(frozenset(v) for v in expected_groups.values())
        assert recovered == expected

    def test_benchmark_sequence_count(self, benchmark_sequences):
        assert len(benchmark_sequences) == 944

    def test_partition_property_random(self):
        rng = np.random.default_rng(19)
        types = ["ICMP PING", "RPC sadmind UDP PING", "RSERVICES rsh root"]
        alerts = [
            alert(ts=float(rng.uniform(0, 2000)),
                  attack_type=types[rng.integers(3)],
                  s_ip=f"{rng.integers(1, 200)}.0.0.1",
                  proto=Protocol.ICMP)
            for _ in range(120)
        ]
        result = fuzzy_cluster(alerts, 0.6)
        counted = sorted(i for seq in result.sequences for i in seq.indices)
        assert counted == list(range(120))
        for seq in result.sequences:
            seq.validate()

    def test_threshold_monotonicity(self):
        rng = np.random.default_rng(23)
        alerts = [
            alert(ts=float(rng.uniform(0, 600)),
                  attack_type="ICMP PING",
                  s_ip=f"{rng.integers(1, 40)}.0.0.1")
            for _ in range(80)
        ]
        counts = [len(fuzzy_cluster(alerts, lam)) for lam in (0.0, 0.3, 0.6, 0.9, 1.0)]
        assert counts == sorted(counts)

    def test_extreme_thresholds(self):
        rng = np.random.default_rng(29)
        alerts = [
            alert(ts=float(i * 7), attack_type="ICMP PING",
                  s_ip=f"{int(v)}.1.2.3")
            for i, v in enumerate(rng.integers(1, 250, size=30))
        ]
        assert len(fuzzy_cluster(alerts, 0.0)) == 1  # same stage: gate admits all
        assert len(fuzzy_cluster(alerts, 1.0)) == 30  # generic inputs never tie at 1

    def test_determinism(self, two_process_scenario):
        alerts, _ = two_process_scenario
        first = fuzzy_cluster(alerts, 0.6)
        second = fuzzy_cluster(alerts, 0.6)
        assert [s.indices for s in first.sequences] == \
            [s.indices for s in second.sequences]

    def test_tie_prefers_earlier_sequence(self):
        # a and b are too dissimilar to merge; c ties between them exactly.
        a = alert(ts=0.0, proto=Protocol.TCP, d_port=0,
                  s_ip="128.0.0.1", d_ip="128.0.0.1")
        b = alert(ts=2000.0, proto=Protocol.TCP, d_port=65535,
                  s_ip="192.0.0.1", d_ip="192.0.0.1")
        c = alert(ts=1000.0, proto=Protocol.ICMP,
                  s_ip="64.0.0.1", d_ip="64.0.0.1")
        config = SimilarityConfig()
        seq_a = AttackSequence(0, [a], [0])
        seq_b = AttackSequence(1, [b], [1])
        assert membership(c, seq_a, config) == membership(c, seq_b, config)
        result = fuzzy_cluster([a, b, c], threshold=0.4, config=config)
        labels = result.labels(3)
        assert labels[0] == labels[2]  # joined the earlier sequence
        assert labels[1] != labels[0]

    def test_stage_gate_skips_regressed_sequences(self):
        # Sequence reaches stage 7; a stage-1 alert from the same host must
        # not join it (gate), even though the similarity would be high.
        late = alert(ts=0.0, attack_type="DDOS mstream handler to agent",
                     proto=Protocol.TCP, d_port=6723)
        early = alert(ts=10.0, attack_type="ICMP PING")
        result = fuzzy_cluster([late, early], 0.3)
        assert len(result) == 2


class TestEstimator:
    def test_fit_predict_labels(self, two_process_scenario):
        alerts, truth = two_process_scenario
        clusterer = FuzzyClusterer(threshold=0.6)
        labels = clusterer.fit_predict(alerts)
        assert len(labels) == len(alerts)
        assert len(clusterer.sequences_) == len(set(labels.tolist()))

    def test_get_params_round_trip(self):
        clusterer = FuzzyClusterer(threshold=0.7)
        params = clusterer.get_params()
        assert params["threshold"] == 0.7
        clone = FuzzyClusterer(**params)
        assert clone.threshold == 0.7


class TestPruneSingletons:
    def test_all_singletons(self):
        result = fuzzy_cluster([alert(ts=0.0, s_ip="1.0.0.1"),
                                alert(ts=5000.0, s_ip="130.0.0.1")], 0.9)
        assert len(prune_singletons(result)) == 0

    def test_benchmark_multi_stage_count(self, benchmark_sequences):
        assert len(prune_singletons(benchmark_sequences)) == 195

    def test_mixed_lengths(self):
        seqs = fuzzy_cluster([alert(ts=float(i)) for i in range(3)], 0.6)
        assert [len(s.alerts) for s in prune_singletons(seqs).sequences] == [3]


class TestExtractPatterns:
    def test_identical_sequences_merge(self):
        stage_map = default_stage_map()
        seq1 = AttackSequence(0, [alert(ts=0.0), alert(
            ts=1.0, attack_type="RPC sadmind UDP PING", proto=Protocol.UDP, d_port=32773)], [0, 1])
        seq2 = AttackSequence(1, [alert(ts=10.0), alert(
            ts=11.0, attack_type="RPC sadmind UDP PING", proto=Protocol.UDP, d_port=32773)], [2, 3])
        patterns = extract_patterns(AttackSequenceSet([seq1, seq2]), stage_map)
        assert len(patterns) == 1
        assert patterns[0].support == 2

    def test_benchmark_pattern_count(self, benchmark_sequences):
        patterns = extract_patterns(prune_singletons(benchmark_sequences),
                                    default_stage_map())
        assert len(patterns) == 9
        assert [p.support for p in patterns] == [60, 30, 24, 20, 16, 15, 12, 10, 8]
        assert sum(p.support for p in patterns) == 195

    def test_consecutive_duplicates_collapse(self):
        stage_map = default_stage_map()
        seq = AttackSequence(0, [alert(ts=float(i)) for i in range(4)], list(range(4)))
        patterns = extract_patterns(AttackSequenceSet([seq]), stage_map)
        assert patterns[0].stages == (("ICMP PING", 1),)

    def test_revisited_stage_preserved(self):
        stage_map = default_stage_map()
        events = [alert(ts=0.0),
                  alert(ts=1.0, attack_type="RPC sadmind UDP PING",
                        proto=Protocol.UDP, d_port=32773),
                  alert(ts=2.0)]
        seq = AttackSequence(0, events, [0, 1, 2])
        patterns = extract_patterns(AttackSequenceSet([seq]), stage_map)
        assert len(patterns[0].stages) == 3  # the ICMP revisit survives


def test_sequence_serialization_round_trip(tmp_path, two_process_scenario):
    alerts, _ = two_process_scenario
    result = fuzzy_cluster(alerts, 0.6)
    path = tmp_path / "sequences.json"
    save_sequences(result, default_stage_map(), path)
    groups = load_sequence_indices(path)
    assert groups == [list(s.indices) for s in result.sequences]


def test_patterns_table_renders(benchmark_sequences):
    patterns = extract_patterns(prune_singletons(benchmark_sequences),
                                default_stage_map())
    table = format_patterns_table(patterns)
    assert "support" in table and "ICMP PING [1]" in table
