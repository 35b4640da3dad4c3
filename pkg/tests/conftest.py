"""Shared fixtures. The expensive ones (benchmark log, ten-run library,
scale-0.2 chain corpus) are session-scoped and reused by the module tests
and the acceptance suite."""
from __future__ import annotations

import numpy as np
import pytest

from feintchain.aggregation import aggregate
from feintchain.alerts import parse_fast_alert
from feintchain.clustering import fuzzy_cluster, prune_singletons
from feintchain.feint import build_feint_lib, train_detector
from feintchain.synth import ScenarioSpec, generate_alert_log, \
    generate_benchmark_log, generate_flow_dataset, overlap_flow_spec
from feintchain.virtual_real import build_virtual_real_lib

VRLIB_PARAMS = {"filter_scale": 0.25, "epochs": 10, "learning_rate": 0.05,
                "batch_size": 32, "C": 0.5, "gamma": 1.0}


@pytest.fixture(scope="session")
def benchmark_log():
    text, truth = generate_benchmark_log()
    return text, truth


@pytest.fixture(scope="session")
def benchmark_alerts(benchmark_log):
    text, _ = benchmark_log
    return [parse_fast_alert(line) for line in text.splitlines()]


@pytest.fixture(scope="session")
def benchmark_aggregation(benchmark_alerts):
    return aggregate(benchmark_alerts)


@pytest.fixture(scope="session")
def benchmark_sequences(benchmark_aggregation):
    aggregates, _ = benchmark_aggregation
    return fuzzy_cluster([a.representative for a in aggregates], 0.6)


@pytest.fixture(scope="session")
def two_process_scenario():
    spec = ScenarioSpec()
    text, truth = generate_alert_log(spec)
    alerts = [parse_fast_alert(line) for line in text.splitlines()]
    return alerts, truth


@pytest.fixture(scope="session")
def overlap_dataset():
    return generate_flow_dataset(overlap_flow_spec())


@pytest.fixture(scope="session")
def overlap_vrlib(overlap_dataset):
    return build_virtual_real_lib(overlap_dataset, VRLIB_PARAMS)


@pytest.fixture(scope="session")
def base_sequences():
    text, _ = generate_alert_log(ScenarioSpec(processes=6, noise_alerts=10))
    alerts = [parse_fast_alert(line) for line in text.splitlines()]
    representatives = [a.representative for a in aggregate(alerts)[0]]
    return prune_singletons(fuzzy_cluster(representatives, 0.6))


@pytest.fixture(scope="session")
def feint_corpus(base_sequences, overlap_vrlib):
    """The scale-0.2 chain corpus with a trained detector."""
    lib = build_feint_lib(base_sequences, overlap_vrlib, scale=0.2, seed=0)
    detector = train_detector(lib, epochs=20, seed=0)
    return lib, detector
