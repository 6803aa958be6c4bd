"""Temporal link prediction on concept co-occurrence networks.

Pipeline: day-stamped edge lists -> temporal snapshots -> balanced labeled
pair sets -> enclosing-subgraph extraction with double-radius labels -> a
from-scratch subgraph classifier (GCN stack, sort pooling, 1-D convs) -> AUC
reports, plus a 15-feature baseline and activation exports.
"""

from .graph_store import (GraphSnapshot, TemporalGraph, ingest_edge_list, snapshot,
                          year_cutoff_day)
from .dataset_builder import (LabeledPair, SplitSpec, classify_pair, label_pair,
                              make_split, sample_training_pairs)
from .subgraph_extractor import (EnclosingSubgraph, SubgraphTensors, build_tensors,
                                 compute_drnl_labels, drnl_label,
                                 extract_enclosing_subgraph)
from .dgcnn_model import (ArchitectureConfig, ModelParams, TrainConfig, build_model,
                          forward, load_checkpoint, predict_pairs, save_checkpoint,
                          train)
from .baseline_model import (BaselineConfig, baseline_predict, baseline_train,
                             compute_pair_features)
from .eval_metrics import EvalReport, auc, evaluate

__all__ = [
    "GraphSnapshot", "TemporalGraph", "ingest_edge_list", "snapshot",
    "year_cutoff_day", "LabeledPair", "SplitSpec", "classify_pair", "label_pair",
    "make_split", "sample_training_pairs", "EnclosingSubgraph", "SubgraphTensors",
    "build_tensors", "compute_drnl_labels", "drnl_label",
    "extract_enclosing_subgraph", "ArchitectureConfig", "ModelParams",
    "TrainConfig", "build_model", "forward", "load_checkpoint", "predict_pairs",
    "save_checkpoint", "train", "BaselineConfig", "baseline_predict",
    "baseline_train", "compute_pair_features", "EvalReport", "auc", "evaluate",
]

__version__ = "0.1.0"
