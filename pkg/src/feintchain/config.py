"""Pipeline configuration: a single JSON file drives every CLI stage.

The resolved configuration is hashed (SHA-256 over canonical JSON) and the
hash is stamped into every artifact manifest, so a provenance chain can be
verified end to end. Validation collects every violation rather than
stopping at the first.
"""
from __future__ import annotations

import copy
import hashlib
import json
from pathlib import Path

from .errors import ConfigError

DEFAULT_CONFIG: dict = {
    "seed": 0,
    "base_year": 2000,
    "paths": {
        "alert_log": "alerts.log",
        "flow_csv": "flows.csv",
        "stage_map": None,
    },
    "aggregation": {"window": 60.0, "segment_prefix": 24},
    "similarity": {
        "weights": {"event": 0.35, "ip": 0.30, "port": 0.10, "time": 0.25},
        "time_scale": 60.0,
        "absent_port_similarity": 1.0,
    },
    "clustering": {"threshold": 0.6},
    "resample": {"targets": {}, "k": 5},
    "extractor": {
        "filter_scale": 0.25,
        "epochs": 10,
        "learning_rate": 0.05,
        "batch_size": 32,
        "val_fraction": 0.1,
    },
    "svm": {"C": 0.5, "gamma": 1.0, "folds": 3,
            "c_grid": [0.5], "gamma_grid": [1.0]},
    "vrlib": {"seeds": [0, 1, 2, 3, 4, 5, 6, 7, 8, 9]},
    "feint": {
        "chain_len": 20,
        "scale": 0.05,
        "histogram": None,
        "hidden_size": 32,
        "epochs": 20,
        "learning_rate": 0.05,
        "batch_size": 64,
        "block_size": 24,
        "C": 0.5,
        "gamma": 1.0,
    },
    "synth": {
        "processes": 6,
        "noise_alerts": 10,
        "alerts_per_phase": 3,
        "flow": {"normal": 240, "attack": 60, "hard": 24},
    },
}


def _merge(base: dict, override: dict, path: str, violations: list[str]) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if key not in base:
            violations.append(f"unknown key {path}{key}")
            continue
        if isinstance(base[key], dict) and isinstance(value, dict) \
                and key not in ("targets", "histogram", "weights", "flow"):
            out[key] = _merge(base[key], value, f"{path}{key}.", violations)
        else:
            out[key] = copy.deepcopy(value)
    return out


def load_config(path: str | Path | None = None, overrides: dict | None = None) -> dict:
    """Merge the built-in defaults with a JSON file and ad-hoc overrides.

    Raises :class:`ConfigError` listing every unknown key or invalid value.
    """
    violations: list[str] = []
    config = copy.deepcopy(DEFAULT_CONFIG)
    if path is not None:
        with open(path, encoding="utf-8") as handle:
            data = json.load(handle)
        if not isinstance(data, dict):
            raise ConfigError([f"{path}: top level must be a JSON object"])
        config = _merge(config, data, "", violations)
    if overrides:
        config = _merge(config, overrides, "", violations)
    violations.extend(validate_config(config))
    if violations:
        raise ConfigError(violations)
    return config


def validate_config(config: dict) -> list[str]:
    """All numeric-range and structural violations, empty when valid."""
    bad: list[str] = []

    def check(cond: bool, message: str) -> None:
        if not cond:
            bad.append(message)

    agg = config["aggregation"]
    check(agg["window"] > 0, "aggregation.window must be > 0")
    check(1 <= agg["segment_prefix"] <= 32, "aggregation.segment_prefix must be in [1, 32]")

    sim = config["similarity"]
    weights = sim["weights"]
    check(set(weights) == {"event", "ip", "port", "time"},
          "similarity.weights must name event/ip/port/time")
    if set(weights) == {"event", "ip", "port", "time"}:
        check(all(v >= 0 for v in weights.values()),
              "similarity.weights must be non-negative")
        check(abs(sum(weights.values()) - 1.0) <= 1e-9,
              "similarity.weights must sum to 1")
    check(sim["time_scale"] > 0, "similarity.time_scale must be > 0")
    check(0 <= sim["absent_port_similarity"] <= 1,
          "similarity.absent_port_similarity must be in [0, 1]")

    check(0 <= config["clustering"]["threshold"] <= 1,
          "clustering.threshold must be in [0, 1]")

    res = config["resample"]
    check(res["k"] >= 1, "resample.k must be >= 1")
    check(all(v >= 0 for v in res["targets"].values()),
          "resample.targets must be non-negative")

    ext = config["extractor"]
    check(ext["filter_scale"] > 0, "extractor.filter_scale must be > 0")
    check(ext["epochs"] >= 0, "extractor.epochs must be >= 0")
    check(ext["batch_size"] >= 1, "extractor.batch_size must be >= 1")
    check(0 <= ext["val_fraction"] < 1, "extractor.val_fraction must be in [0, 1)")

    svm = config["svm"]
    check(svm["C"] > 0, "svm.C must be > 0")
    check(svm["gamma"] > 0, "svm.gamma must be > 0")
    check(svm["folds"] >= 2, "svm.folds must be >= 2")
    check(len(svm["c_grid"]) > 0, "svm.c_grid must be non-empty")
    check(len(svm["gamma_grid"]) > 0, "svm.gamma_grid must be non-empty")

    check(len(config["vrlib"]["seeds"]) >= 1, "vrlib.seeds must list at least one seed")

    feint = config["feint"]
    check(feint["chain_len"] >= 2, "feint.chain_len must be >= 2")
    check(feint["scale"] > 0, "feint.scale must be > 0")
    check(feint["hidden_size"] >= 1, "feint.hidden_size must be >= 1")
    check(feint["block_size"] >= 1, "feint.block_size must be >= 1")
    if feint["histogram"] is not None:
        check(all(int(k) >= 1 and v >= 0 for k, v in feint["histogram"].items()),
              "feint.histogram keys must be >= 1 with counts >= 0")

    synth = config["synth"]
    check(synth["processes"] >= 1, "synth.processes must be >= 1")
    check(synth["noise_alerts"] >= 0, "synth.noise_alerts must be >= 0")
    check(synth["alerts_per_phase"] >= 1, "synth.alerts_per_phase must be >= 1")
    flow = synth["flow"]
    check(all(flow.get(k, 0) >= 1 for k in ("normal", "attack", "hard")),
          "synth.flow sizes must be >= 1")
    return bad


def config_hash(config: dict) -> str:
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def check_paths_exist(config: dict, out_dir: Path) -> list[str]:
    """Referenced input files that are missing, resolved against out_dir."""
    missing = []
    stage_map = config["paths"]["stage_map"]
    if stage_map is not None and not resolve_path(stage_map, out_dir).exists():
        missing.append(f"paths.stage_map: {stage_map} does not exist")
    return missing


def resolve_path(path: str, out_dir: Path) -> Path:
    p = Path(path)
    return p if p.is_absolute() else out_dir / p
