"""Multi-stage attack mining from IDS alerts and feint-attack chain detection.

The pipeline: parse fast-alert logs, aggregate near-duplicate alerts,
cluster alerts into attack sequences by attribute similarity, balance a
flow dataset, train a convolutional feature extractor with an SVM head,
split attacks into virtual (reliably detected) and real (missed) libraries,
weave real attacks into mined chains, and detect the resulting feint chains
with a bidirectional recurrent encoder plus an RBF SVM.
"""

__version__ = "0.1.0"

from .aggregation import AggregatedAlert, AggregationReport, MergeMode, \
    aggregate, aggregation_rate, match_mode
from .alerts import FlowDataset, FlowRecord, FlowSchema, LineWarning, Protocol, \
    RawAlert, format_fast_alert, load_alert_log, load_flow_csv, \
    parse_fast_alert, write_flow_csv
from .clustering import AttackPattern, AttackSequence, AttackSequenceSet, \
    FuzzyClusterer, extract_patterns, fuzzy_cluster, membership, prune_singletons
from .feint import AttackChain, ChainEvent, ChainLabel, FeintDetector, FeintLib, \
    build_feint_chain, build_feint_lib, build_normal_chain, detect, \
    ensemble_detect, load_feint_lib, save_feint_lib, train_detector
from .metrics import ConfusionMatrix, DetectionCounts, accuracy_rate, \
    completeness, confusion
from .nn import BiRnnEncoder, CnnFeatureExtractor
from .resample import ResamplePlan, apply_plan, knn_same_class, \
    random_downsample, smote
from .similarity import SimilarityConfig, SimilarityWeights, StageMap, \
    alert_similarity, common_prefix_bits, default_stage_map, event_similarity, \
    ip_similarity, port_similarity, stage_of, time_similarity
from .svm import MulticlassSvc, SmoSvc, grid_search_cv
from .synth import FlowClassSpec, FlowSpec, ScenarioSpec, generate_alert_log, \
    generate_benchmark_log, generate_flow_dataset, overlap_flow_spec
from .virtual_real import AtomicAttack, AttackKind, FlowClassifier, \
    VirtualRealLib, build_virtual_real_lib, load_lib, persist_lib, verify_real_lib

__all__ = [name for name in dir() if not name.startswith("_")]
