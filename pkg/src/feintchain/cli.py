"""Command-line pipeline driver.

Each subcommand reads the artifacts of earlier stages from the output
directory, writes its own artifact plus a ``<artifact>.manifest.json``
sidecar carrying the producing config hash, seed and package version, and
exits non-zero with a machine-readable JSON error report on failure.
``run-all`` executes the full stage order; ``synth`` generates the inputs.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .aggregation import aggregate, aggregate_from_dict, aggregate_to_dict
from .alerts import alert_from_dict, alert_to_dict, load_alert_log, load_flow_csv, \
    write_flow_csv
from .clustering import AttackSequence, AttackSequenceSet, extract_patterns, \
    format_patterns_table, fuzzy_cluster, load_sequence_indices, prune_singletons, \
    save_sequences
from .config import check_paths_exist, config_hash, load_config, resolve_path
from .errors import ConfigError, FeintChainError, PrerequisiteError
from .feint import ChainEmbedder, ChainLabel, FeintDetector, build_feint_lib, \
    load_feint_lib, save_feint_lib, train_detector
from .metrics import DetectionCounts, accuracy_rate, completeness, confusion, \
    confusion_to_csv, format_confusion_table
from .nn.birnn import encoder_from_arrays, encoder_to_arrays
from .nn.io import load_arrays, save_arrays
from .nn.network import CnnFeatureExtractor, extractor_to_arrays
from .resample import ResamplePlan, apply_plan
from .similarity import SimilarityConfig, SimilarityWeights, StageMap, \
    default_stage_map
from .svm import load_svm, save_svm
from .synth import FlowClassSpec, FlowSpec, ScenarioSpec, generate_alert_log, \
    generate_flow_dataset
from .virtual_real import build_virtual_real_lib, load_lib, persist_lib

log = logging.getLogger("feintchain")

# artifact file -> producing command
ARTIFACT_PRODUCERS = {
    "alerts.log": "synth",
    "flows.csv": "synth",
    "alerts.jsonl": "parse",
    "aggregates.jsonl": "aggregate",
    "sequences.json": "cluster",
    "patterns.txt": "cluster",
    "flows_resampled.csv": "resample",
    "extractor.fnn": "train-extractor",
    "vrlib.json": "build-vrlib",
    "feintlib.json": "build-feintlib",
    "detector.json": "train-detector",
    "predictions.csv": "detect",
}

RUN_ALL_ORDER = ("parse", "aggregate", "cluster", "resample", "train-extractor",
                 "build-vrlib", "build-feintlib", "train-detector", "detect",
                 "evaluate")


class Stage:
    """Shared state for one command invocation."""

    def __init__(self, args):
        overrides = {}
        if args.seed is not None:
            overrides["seed"] = args.seed
        if args.scale is not None:
            overrides["feint"] = {"scale": args.scale}
        self.config = load_config(args.config, overrides)
        self.out = Path(args.out)
        self.out.mkdir(parents=True, exist_ok=True)
        missing = check_paths_exist(self.config, self.out)
        if missing:
            raise ConfigError(missing)
        self.hash = config_hash(self.config)
        self.seed = self.config["seed"]

    def path(self, name: str) -> Path:
        return self.out / name

    def require(self, command: str, *names: str) -> None:
        producers = sorted({ARTIFACT_PRODUCERS[n] for n in names
                            if not self.path(n).exists()})
        if producers:
            raise PrerequisiteError(command, producers)

    def manifest(self, artifact: str, command: str, inputs: list[str]) -> None:
        payload = {
            "artifact": artifact,
            "command": command,
            "config_hash": self.hash,
            "seed": self.seed,
            "version": __version__,
            "inputs": sorted(inputs),
        }
        with open(self.path(artifact + ".manifest.json"), "w", encoding="utf-8") as fh:
            json.dump(payload, fh, sort_keys=True, separators=(",", ":"))
            fh.write("\n")

    def write_json(self, name: str, payload, command: str, inputs: list[str]) -> None:
        with open(self.path(name), "w", encoding="utf-8") as fh:
            json.dump(payload, fh, sort_keys=True, separators=(",", ":"))
            fh.write("\n")
        self.manifest(name, command, inputs)

    def similarity_config(self) -> SimilarityConfig:
        sim = self.config["similarity"]
        stage_map_path = self.config["paths"]["stage_map"]
        stage_map = (StageMap.from_file(resolve_path(stage_map_path, self.out))
                     if stage_map_path else default_stage_map())
        weights = SimilarityWeights(**sim["weights"])
        return SimilarityConfig(weights=weights, stage_map=stage_map,
                                time_scale=sim["time_scale"],
                                absent_port_similarity=sim["absent_port_similarity"])


def cmd_synth(stage: Stage) -> None:
    synth_cfg = stage.config["synth"]
    spec = ScenarioSpec(processes=synth_cfg["processes"],
                        alerts_per_phase=synth_cfg["alerts_per_phase"],
                        noise_alerts=synth_cfg["noise_alerts"],
                        seed=stage.seed)
    text, truth = generate_alert_log(spec)
    log_path = resolve_path(stage.config["paths"]["alert_log"], stage.out)
    log_path.write_text(text, encoding="utf-8")
    stage.manifest(log_path.name, "synth", [])
    stage.write_json("ground_truth.json", {"process_ids": truth}, "synth", [])

    flow_cfg = synth_cfg["flow"]
    flow_spec = FlowSpec(
        classes=(
            FlowClassSpec("Normal", flow_cfg["normal"], "normal"),
            FlowClassSpec("AttackA", flow_cfg["attack"], "separable"),
            FlowClassSpec("AttackB", flow_cfg["attack"], "separable"),
            FlowClassSpec("Stealth", flow_cfg["hard"], "hard"),
        ),
        seed=stage.seed,
    )
    dataset = generate_flow_dataset(flow_spec)
    flow_path = resolve_path(stage.config["paths"]["flow_csv"], stage.out)
    write_flow_csv(dataset, flow_path)
    stage.manifest(flow_path.name, "synth", [])
    log.info("synth: %d alert lines, %d flow records", len(truth), len(dataset))


def cmd_parse(stage: Stage) -> None:
    log_path = resolve_path(stage.config["paths"]["alert_log"], stage.out)
    if not log_path.exists():
        raise PrerequisiteError("parse", ["synth"])
    alerts, skipped = load_alert_log(log_path, stage.config["base_year"])
    with open(stage.path("alerts.jsonl"), "w", encoding="utf-8") as fh:
        for alert in alerts:
            json.dump(alert_to_dict(alert), fh, sort_keys=True, separators=(",", ":"))
            fh.write("\n")
    stage.manifest("alerts.jsonl", "parse", [log_path.name])
    stage.write_json("parse_report.json",
                     {"alerts": len(alerts),
                      "skipped": [{"line": w.line_no, "offset": w.offset,
                                   "reason": w.reason} for w in skipped]},
                     "parse", [log_path.name])
    log.info("parse: %d alerts, %d skipped", len(alerts), len(skipped))


def _read_jsonl(path: Path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def cmd_aggregate(stage: Stage) -> None:
    stage.require("aggregate", "alerts.jsonl")
    alerts = [alert_from_dict(d) for d in _read_jsonl(stage.path("alerts.jsonl"))]
    agg_cfg = stage.config["aggregation"]
    aggregates, report = aggregate(alerts, agg_cfg["window"], agg_cfg["segment_prefix"])
    with open(stage.path("aggregates.jsonl"), "w", encoding="utf-8") as fh:
        for agg in aggregates:
            json.dump(aggregate_to_dict(agg), fh, sort_keys=True, separators=(",", ":"))
            fh.write("\n")
    stage.manifest("aggregates.jsonl", "aggregate", ["alerts.jsonl"])
    stage.write_json("aggregation_report.json",
                     {"raw_count": report.raw_count,
                      "output_count": report.output_count,
                      "rate": report.rate},
                     "aggregate", ["alerts.jsonl"])
    log.info("aggregate: %d -> %d (rate %.4f)", report.raw_count,
             report.output_count, report.rate)


def cmd_cluster(stage: Stage) -> None:
    stage.require("cluster", "aggregates.jsonl")
    aggregates = [aggregate_from_dict(d) for d in _read_jsonl(stage.path("aggregates.jsonl"))]
    representatives = [a.representative for a in aggregates]
    sim_config = stage.similarity_config()
    sequence_set = fuzzy_cluster(representatives,
                                 stage.config["clustering"]["threshold"], sim_config)
    save_sequences(sequence_set, sim_config.stage_map, stage.path("sequences.json"))
    stage.manifest("sequences.json", "cluster", ["aggregates.jsonl"])
    patterns = extract_patterns(prune_singletons(sequence_set), sim_config.stage_map)
    stage.path("patterns.txt").write_text(format_patterns_table(patterns), "utf-8")
    stage.manifest("patterns.txt", "cluster", ["aggregates.jsonl"])
    log.info("cluster: %d sequences, %d patterns", len(sequence_set), len(patterns))


def cmd_resample(stage: Stage) -> None:
    flow_path = resolve_path(stage.config["paths"]["flow_csv"], stage.out)
    if not flow_path.exists():
        raise PrerequisiteError("resample", ["synth"])
    dataset = load_flow_csv(flow_path)
    res_cfg = stage.config["resample"]
    plan = ResamplePlan(targets=res_cfg["targets"], k=res_cfg["k"], seed=stage.seed)
    resampled = apply_plan(dataset, plan)
    write_flow_csv(resampled, stage.path("flows_resampled.csv"))
    stage.manifest("flows_resampled.csv", "resample", [flow_path.name])
    log.info("resample: %d -> %d records", len(dataset), len(resampled))


def _extractor_params(stage: Stage) -> dict:
    ext = stage.config["extractor"]
    return {"filter_scale": ext["filter_scale"], "epochs": ext["epochs"],
            "learning_rate": ext["learning_rate"], "batch_size": ext["batch_size"],
            "val_fraction": ext["val_fraction"]}


def cmd_train_extractor(stage: Stage) -> None:
    stage.require("train-extractor", "flows_resampled.csv")
    dataset = load_flow_csv(stage.path("flows_resampled.csv"))
    extractor = CnnFeatureExtractor(**_extractor_params(stage), seed=stage.seed)
    extractor.fit(dataset.normalized_matrix(), np.array(dataset.labels()))
    save_arrays(stage.path("extractor.fnn"), extractor_to_arrays(extractor))
    stage.manifest("extractor.fnn", "train-extractor", ["flows_resampled.csv"])
    stage.write_json("extractor_meta.json",
                     {"filter_scale": extractor.filter_scale,
                      "classes": [str(c) for c in extractor.classes_]},
                     "train-extractor", ["flows_resampled.csv"])
    with open(stage.path("extractor_loss.csv"), "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "train_loss", "val_loss"])
        for epoch, train, val in extractor.loss_curve_:
            writer.writerow([epoch, repr(train), "" if val is None else repr(val)])
    stage.manifest("extractor_loss.csv", "train-extractor", ["flows_resampled.csv"])
    log.info("train-extractor: %d epochs", len(extractor.loss_curve_))


def cmd_build_vrlib(stage: Stage) -> None:
    stage.require("build-vrlib", "flows_resampled.csv")
    dataset = load_flow_csv(stage.path("flows_resampled.csv"))
    svm_cfg = stage.config["svm"]
    params = {**_extractor_params(stage), "C": svm_cfg["C"], "gamma": svm_cfg["gamma"]}
    params.pop("val_fraction")
    lib = build_virtual_real_lib(dataset, params,
                                 seeds=tuple(stage.config["vrlib"]["seeds"]))
    persist_lib(lib, stage.path("vrlib.json"))
    stage.manifest("vrlib.json", "build-vrlib", ["flows_resampled.csv"])
    log.info("build-vrlib: %d real, %d virtual", len(lib.real), len(lib.virtual))


def cmd_build_feintlib(stage: Stage) -> None:
    stage.require("build-feintlib", "sequences.json", "aggregates.jsonl",
                  "vrlib.json", "flows_resampled.csv")
    aggregates = [aggregate_from_dict(d) for d in _read_jsonl(stage.path("aggregates.jsonl"))]
    representatives = [a.representative for a in aggregates]
    groups = load_sequence_indices(stage.path("sequences.json"))
    sequences = AttackSequenceSet([
        AttackSequence(i, [representatives[j] for j in idx], list(idx))
        for i, idx in enumerate(groups)
    ])
    dataset = load_flow_csv(stage.path("flows_resampled.csv"))
    lib = load_lib(stage.path("vrlib.json"), dataset)
    feint_cfg = stage.config["feint"]
    histogram = feint_cfg["histogram"]
    if histogram is not None:
        histogram = {int(k): int(v) for k, v in histogram.items()}
    feint_lib = build_feint_lib(prune_singletons(sequences), lib,
                                histogram=histogram, scale=feint_cfg["scale"],
                                seed=stage.seed, chain_len=feint_cfg["chain_len"],
                                stage_map=stage.similarity_config().stage_map)
    save_feint_lib(feint_lib, stage.path("feintlib.json"))
    stage.manifest("feintlib.json", "build-feintlib",
                   ["sequences.json", "aggregates.jsonl", "vrlib.json"])
    log.info("build-feintlib: %d chains (train %d / test %d)",
             len(feint_lib.chains), len(feint_lib.train_indices),
             len(feint_lib.test_indices))


def cmd_train_detector(stage: Stage) -> None:
    stage.require("train-detector", "feintlib.json")
    lib = load_feint_lib(stage.path("feintlib.json"))
    feint_cfg = stage.config["feint"]
    detector = train_detector(
        lib, hidden_size=feint_cfg["hidden_size"], C=feint_cfg["C"],
        gamma=feint_cfg["gamma"], epochs=feint_cfg["epochs"],
        learning_rate=feint_cfg["learning_rate"],
        batch_size=feint_cfg["batch_size"], block_size=feint_cfg["block_size"],
        seed=stage.seed)
    save_arrays(stage.path("detector_encoder.fnn"), encoder_to_arrays(detector.encoder_))
    stage.manifest("detector_encoder.fnn", "train-detector", ["feintlib.json"])
    svm_wrapper = _binary_as_multiclass(detector)
    save_svm(svm_wrapper, stage.path("detector_svm.txt"))
    stage.manifest("detector_svm.txt", "train-detector", ["feintlib.json"])
    stage.write_json("detector.json",
                     {"chain_len": detector.chain_len_,
                      "hidden_size": detector.hidden_size,
                      "block_size": detector.block_size,
                      "vocab": list(detector.embedder_.vocab),
                      "validation_accuracy": detector.validation_accuracy_,
                      "encoder_file": "detector_encoder.fnn",
                      "svm_file": "detector_svm.txt"},
                     "train-detector", ["feintlib.json"])
    log.info("train-detector: validation accuracy %.3f", detector.validation_accuracy_)


def _binary_as_multiclass(detector: FeintDetector):
    from .svm import MulticlassSvc
    wrapper = MulticlassSvc(C=detector.svm_.C, gamma=detector.svm_.gamma)
    wrapper.classes_ = np.array(["FEINT"])
    wrapper.models_ = [detector.svm_]
    return wrapper


def _load_detector(stage: Stage) -> FeintDetector:
    meta = json.loads(stage.path("detector.json").read_text("utf-8"))
    detector = FeintDetector(hidden_size=meta["hidden_size"],
                             block_size=meta["block_size"])
    detector.encoder_ = encoder_from_arrays(
        load_arrays(stage.path(meta["encoder_file"])), meta["hidden_size"])
    detector.svm_ = load_svm(stage.path(meta["svm_file"])).models_[0]
    detector.embedder_ = ChainEmbedder(tuple(meta["vocab"]), meta["block_size"])
    detector.chain_len_ = meta["chain_len"]
    detector.validation_accuracy_ = meta["validation_accuracy"]
    detector.classes_ = np.array([ChainLabel.NORMAL, ChainLabel.FEINT])
    return detector


def cmd_detect(stage: Stage) -> None:
    stage.require("detect", "detector.json", "feintlib.json")
    lib = load_feint_lib(stage.path("feintlib.json"))
    detector = _load_detector(stage)
    with open(stage.path("predictions.csv"), "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["chain_index", "actual", "predicted", "decision"])
        for idx in lib.test_indices:
            label, value = detector.predict_chain(lib.chains[idx])
            writer.writerow([idx, int(lib.chains[idx].label), int(label), repr(value)])
    stage.manifest("predictions.csv", "detect", ["detector.json", "feintlib.json"])
    log.info("detect: %d test chains scored", len(lib.test_indices))


def cmd_evaluate(stage: Stage) -> None:
    stage.require("evaluate", "predictions.csv")
    with open(stage.path("predictions.csv"), encoding="utf-8", newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise FeintChainError("predictions.csv holds no rows")
    name = {0: "normal", 1: "feint"}
    actual = [name[int(r["actual"])] for r in rows]
    predicted = [name[int(r["predicted"])] for r in rows]
    matrix = confusion(actual, predicted, ("normal", "feint"))

    true_feints = sum(1 for a in actual if a == "feint")
    reported = sum(1 for p in predicted if p == "feint")
    correct = sum(1 for a, p in zip(actual, predicted) if a == p == "feint")
    counts = DetectionCounts(true_feints, reported, correct)
    payload = {
        "n_test": len(rows),
        "accuracy": matrix.accuracy,
        "completeness": completeness(counts) if counts.total else None,
        "accuracy_rate": accuracy_rate(counts) if counts.identified else None,
        "per_class": {c: {"precision": matrix.precision[c],
                          "recall": matrix.recall[c]} for c in matrix.classes},
    }
    stage.write_json("evaluation.json", payload, "evaluate", ["predictions.csv"])
    stage.path("confusion.csv").write_text(confusion_to_csv(matrix), "utf-8")
    stage.manifest("confusion.csv", "evaluate", ["predictions.csv"])
    stage.path("confusion.txt").write_text(format_confusion_table(matrix), "utf-8")
    stage.manifest("confusion.txt", "evaluate", ["predictions.csv"])
    log.info("evaluate: accuracy %.4f over %d chains", matrix.accuracy, len(rows))


COMMANDS = {
    "synth": cmd_synth,
    "parse": cmd_parse,
    "aggregate": cmd_aggregate,
    "cluster": cmd_cluster,
    "resample": cmd_resample,
    "train-extractor": cmd_train_extractor,
    "build-vrlib": cmd_build_vrlib,
    "build-feintlib": cmd_build_feintlib,
    "train-detector": cmd_train_detector,
    "detect": cmd_detect,
    "evaluate": cmd_evaluate,
}


def cmd_run_all(stage: Stage) -> None:
    for name in RUN_ALL_ORDER:
        log.info("run-all: %s", name)
        COMMANDS[name](stage)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="feintchain",
        description="Mine multi-stage attack chains from IDS alerts and "
                    "detect feint-attack chains.")
    parser.add_argument("--config", type=Path, default=None,
                        help="JSON pipeline configuration (defaults built in)")
    parser.add_argument("--out", type=Path, default=Path("artifacts"),
                        help="artifact directory (default: ./artifacts)")
    parser.add_argument("--seed", type=int, default=None, help="override the global seed")
    parser.add_argument("--scale", type=float, default=None,
                        help="override the feint-library scale factor")
    parser.add_argument("--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in (*COMMANDS, "run-all"):
        sub.add_parser(name)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        stage = Stage(args)
        if args.command == "run-all":
            cmd_run_all(stage)
        else:
            COMMANDS[args.command](stage)
    except ConfigError as exc:
        _report_error("config", str(exc), violations=exc.violations)
        return 2
    except PrerequisiteError as exc:
        _report_error("prerequisite", str(exc), missing=exc.missing)
        return 3
    except FeintChainError as exc:
        _report_error(type(exc).__name__, str(exc))
        return 1
    return 0


def _report_error(kind: str, message: str, **extra) -> None:
    payload = {"error": kind, "message": message, **extra}
    print(json.dumps(payload, sort_keys=True), file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
