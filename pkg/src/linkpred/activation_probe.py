"""Capture and export sort-pooling activations for trained models.

The sort-pooling output has a fixed size and a consistent row order, which
makes it the natural layer to compare across examples; exports are plain
text so external embedding/heatmap tools can consume them directly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset_builder import LabeledPair
from .dgcnn_model import ModelParams, extract_pair_tensors, forward_with_capture, predict_pairs
from .graph_store import GraphSnapshot
from .subgraph_extractor import SubgraphTensors


@dataclass(frozen=True)
class ExampleMeta:
    u: int
    v: int
    label: int
    pair_type: int
    seed: int


@dataclass
class TopExamples:
    """Per-label index lists into the scored pair list, best first."""

    label1: list[int]
    label0: list[int]
    shortfall: dict[int, int]  # label -> how many short of the request


def select_top_examples(model: ModelParams, pairs: list[LabeledPair],
                        snapshot: GraphSnapshot, n_per_label: int,
                        seed: int = 0) -> TopExamples:
    """Best-predicted pairs per label: highest scores for label 1, lowest for
    label 0; ties broken by pair index."""
    scores = predict_pairs(model, snapshot, pairs, seed=seed)
    labels = np.array([p.label for p in pairs])
    indices = np.arange(len(pairs))

    def pick(label, sign):
        idx = indices[labels == label]
        order = np.lexsort((idx, sign * scores[idx]))
        return idx[order][:n_per_label].tolist()

    label1 = pick(1, -1.0)  # descending score
    label0 = pick(0, +1.0)  # ascending score
    shortfall = {}
    for label, got in ((1, len(label1)), (0, len(label0))):
        if got < n_per_label:
            shortfall[label] = n_per_label - got
    return TopExamples(label1=label1, label0=label0, shortfall=shortfall)


def capture_sortpool_activations(model: ModelParams,
                                 tensors: SubgraphTensors) -> np.ndarray:
    """The exact k x sum(c_i) matrix the forward pass produces for this input."""
    _, activations = forward_with_capture(model, tensors)
    return activations


def collect_activations(model: ModelParams, snapshot: GraphSnapshot,
                        pairs: list[LabeledPair], indices: list[int],
                        seed: int = 0) -> tuple[list[np.ndarray], list[ExampleMeta]]:
    """Extract (with the per-pair seed convention) and capture for each index."""
    matrices, metadata = [], []
    for i in indices:
        pair = pairs[i]
        pair_seed = seed ^ i
        tensors = extract_pair_tensors(model.config, snapshot, pair.u, pair.v,
                                       seed=pair_seed)
        matrices.append(capture_sortpool_activations(model, tensors))
        metadata.append(ExampleMeta(u=pair.u, v=pair.v, label=pair.label,
                                    pair_type=pair.pair_type, seed=pair_seed))
    return matrices, metadata


_HEADER = "pair\tlabel\tpair_type\tseed"


def export_activations(matrices: list[np.ndarray], metadata: list[ExampleMeta], path):
    """One text file: a header row, then per example a metadata row followed
    by the k x C activation rows; blocks separated by blank lines.

    Values are written with 17 significant digits so a parse round-trip is
    lossless.
    """
    if len(matrices) != len(metadata):
        raise ValueError("matrices and metadata must be aligned")
    with open(path, "w", encoding="ascii") as fh:
        fh.write(_HEADER + "\n")
        for mat, meta in zip(matrices, metadata):
            fh.write(f"{meta.u},{meta.v}\t{meta.label}\t{meta.pair_type}\t{meta.seed}\n")
            for row in mat:
                fh.write("\t".join(f"{x:.17g}" for x in row) + "\n")
            fh.write("\n")


def export_activations_flat(matrices: list[np.ndarray], metadata: list[ExampleMeta], path):
    """Embedding-tool variant: one line per example, metadata columns first,
    then the k*C activation values flattened row-major."""
    if len(matrices) != len(metadata):
        raise ValueError("matrices and metadata must be aligned")
    with open(path, "w", encoding="ascii") as fh:
        fh.write(_HEADER + "\tactivations...\n")
        for mat, meta in zip(matrices, metadata):
            flat = "\t".join(f"{x:.17g}" for x in mat.reshape(-1))
            fh.write(f"{meta.u},{meta.v}\t{meta.label}\t{meta.pair_type}\t{meta.seed}\t{flat}\n")


def parse_activations(path) -> tuple[list[np.ndarray], list[ExampleMeta]]:
    """Inverse of export_activations."""
    with open(path, "r", encoding="ascii") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != _HEADER:
        raise ValueError(f"{path}: missing activation export header")
    matrices, metadata = [], []
    block: list[str] = []
    for line in lines[1:] + [""]:
        if line:
            block.append(line)
            continue
        if not block:
            continue
        pair_s, label_s, type_s, seed_s = block[0].split("\t")
        u_s, v_s = pair_s.split(",")
        metadata.append(ExampleMeta(u=int(u_s), v=int(v_s), label=int(label_s),
                                    pair_type=int(type_s), seed=int(seed_s)))
        matrices.append(np.array([[float(x) for x in row.split("\t")]
                                  for row in block[1:]], dtype=np.float64))
        block = []
    return matrices, metadata
