"""Feature-engineering baseline: 15 temporal topology metrics per pair and a
small fully connected network.

Per pair (u, v) and snapshot years Y, Y-1, Y-2 the features are the weighted
degrees of u and v (event multiplicities count), the distinct-neighbor counts
of u and v, and the shared-neighbor count, each over the three years.
Isolated-isolated pairs never reach the network: they are excluded from
training and scored 0 at inference.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import neural_engine as ne
from .graph_store import GraphSnapshot

NUM_FEATURES = 15

FEATURE_NAMES = tuple(
    f"{kind}_{end}_y{off}"
    for off in (0, 1, 2)
    for kind, end in (("wdeg", "u"), ("wdeg", "v"))
) + tuple(
    f"{kind}_{end}_y{off}"
    for off in (0, 1, 2)
    for kind, end in (("nbrs", "u"), ("nbrs", "v"))
) + tuple(f"shared_y{off}" for off in (0, 1, 2))


def compute_pair_features(snapshots: list[GraphSnapshot], u: int, v: int) -> np.ndarray:
    """The 15 metrics for snapshots ordered [Y, Y-1, Y-2] (descending cutoffs)."""
    if len(snapshots) != 3:
        raise ValueError("need snapshots for the current and previous two years")
    if not (snapshots[0].cutoff_day >= snapshots[1].cutoff_day >= snapshots[2].cutoff_day):
        raise ValueError("snapshots must have descending cutoffs [Y, Y-1, Y-2]")
    weighted = [(s.weighted_degree(u), s.weighted_degree(v)) for s in snapshots]
    distinct = [(s.degree(u), s.degree(v)) for s in snapshots]
    shared = [len(s.common_neighbors(u, v)) for s in snapshots]
    values = [x for pair in weighted for x in pair]
    values += [x for pair in distinct for x in pair]
    values += shared
    return np.array(values, dtype=np.float64)


def compute_feature_matrix(snapshots: list[GraphSnapshot], pairs) -> np.ndarray:
    rows = []
    for p in pairs:
        u, v = (p.u, p.v) if hasattr(p, "u") else (int(p[0]), int(p[1]))
        rows.append(compute_pair_features(snapshots, u, v))
    return np.vstack(rows) if rows else np.zeros((0, NUM_FEATURES))


def save_feature_matrix(features: np.ndarray, labels, path):
    """Inspection text form: 15 tab-separated reals + label per line."""
    with open(path, "w", encoding="ascii") as fh:
        for row, label in zip(features, labels):
            fh.write("\t".join(f"{x:.12g}" for x in row) + f"\t{int(label)}\n")


@dataclass(frozen=True)
class BaselineConfig:
    hidden_units: int = 64
    learning_rate: float = 1e-3
    epochs: int = 30
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


@dataclass
class BaselineParams:
    config: BaselineConfig
    feature_mean: np.ndarray
    feature_scale: np.ndarray
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray

    def named_parameters(self):
        return [("dense.0.weight", self.w1), ("dense.0.bias", self.b1),
                ("dense.1.weight", self.w2), ("dense.1.bias", self.b2)]


def _is_type2_row(row: np.ndarray) -> bool:
    # both current-year weighted degrees zero <=> both endpoints isolated
    return row[0] == 0.0 and row[1] == 0.0


def baseline_train(features: np.ndarray, labels,
                   config: BaselineConfig = BaselineConfig()) -> BaselineParams:
    """Train the 2-layer network on standardized features.

    Isolated-isolated rows are dropped before training; constant feature
    columns keep scale 1 so standardization is a no-op for them.
    """
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if features.ndim != 2 or features.shape[1] != NUM_FEATURES:
        raise ValueError(f"feature matrix must be (n, {NUM_FEATURES})")
    if len(features) != len(labels):
        raise ValueError("features and labels must be aligned")
    keep = ~np.array([_is_type2_row(r) for r in features])
    features, labels = features[keep], labels[keep]
    if len(features) == 0 or labels.min() == labels.max():
        raise ValueError("refusing to train on a single-class or empty set")

    mean = features.mean(axis=0)
    std = features.std(axis=0)
    scale = np.where(std > 0, std, 1.0)
    x = (features - mean) / scale

    rng = np.random.default_rng(config.seed)
    hidden = config.hidden_units
    params = BaselineParams(
        config=config, feature_mean=mean, feature_scale=scale,
        w1=ne.glorot_uniform(rng, (NUM_FEATURES, hidden), NUM_FEATURES, hidden),
        b1=np.zeros(hidden), w2=ne.glorot_uniform(rng, (hidden, 1), hidden, 1),
        b2=np.zeros(1))

    opt = ne.OptimizerState.for_params([a for _, a in params.named_parameters()],
                                       learning_rate=config.learning_rate,
                                       beta1=config.beta1, beta2=config.beta2,
                                       eps=config.eps)
    for _ in range(config.epochs):
        for idx in rng.permutation(len(x)):
            nodes = [ne.Node(a, name=n) for n, a in params.named_parameters()]
            hid = ne.dense_forward(x[idx], nodes[0], nodes[1], activation="relu",
                                   name="dense.0")
            out = ne.dense_forward(hid, nodes[2], nodes[3], activation="sigmoid",
                                   name="dense.1")
            loss = ne.bce_loss(out, int(labels[idx]))
            ne.backward(loss)
            grads = [n.grad if n.grad is not None else np.zeros_like(n.value)
                     for n in nodes]
            ne.nadam_step(nodes, grads, opt)
    return params


def baseline_scores(params: BaselineParams, features: np.ndarray) -> np.ndarray:
    """Network scores for standardized rows (no type handling)."""
    x = (np.asarray(features, dtype=np.float64) - params.feature_mean) / params.feature_scale
    h = np.maximum(x @ params.w1 + params.b1, 0.0)
    z = h @ params.w2 + params.b2
    return (1.0 / (1.0 + np.exp(-z))).reshape(-1)


def baseline_predict(params: BaselineParams, features: np.ndarray) -> np.ndarray:
    """Scores in (0, 1), except isolated-isolated pairs which get exactly 0."""
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[1] != NUM_FEATURES:
        raise ValueError(f"feature matrix must be (n, {NUM_FEATURES})")
    scores = baseline_scores(params, features)
    for i, row in enumerate(features):
        if _is_type2_row(row):
            scores[i] = 0.0
    return scores


# ---------------------------------------------------------------------------
# checkpointing (same container as the main model, different header tag)


def save_baseline(params: BaselineParams, path):
    from .dgcnn_model import write_container

    c = params.config
    lines = ["model baseline",
             f"hidden_units {c.hidden_units}",
             f"learning_rate {c.learning_rate!r}",
             f"epochs {c.epochs}",
             f"seed {c.seed}",
             f"beta1 {c.beta1!r}", f"beta2 {c.beta2!r}", f"eps {c.eps!r}"]
    arrays = [params.feature_mean, params.feature_scale,
              params.w1, params.b1, params.w2, params.b2]
    names = ["feature_mean", "feature_scale", "dense.0.weight", "dense.0.bias",
             "dense.1.weight", "dense.1.bias"]
    lines += [f"tensor {n} " + "x".join(str(d) for d in a.shape)
              for n, a in zip(names, arrays)]
    write_container(path, lines, arrays)


def load_baseline(path) -> BaselineParams:
    from .dgcnn_model import CheckpointError, read_container

    lines, data = read_container(path)
    fields = {}
    tensor_specs = []
    for line in lines:
        tag, _, rest = line.partition(" ")
        if tag == "tensor":
            name, _, shape_s = rest.partition(" ")
            tensor_specs.append((name, tuple(int(d) for d in shape_s.split("x"))))
        else:
            fields[tag] = rest
    if fields.get("model") != "baseline":
        raise CheckpointError(f"{path}: not a baseline checkpoint")
    config = BaselineConfig(hidden_units=int(fields["hidden_units"]),
                            learning_rate=float(fields["learning_rate"]),
                            epochs=int(fields["epochs"]), seed=int(fields["seed"]),
                            beta1=float(fields["beta1"]), beta2=float(fields["beta2"]),
                            eps=float(fields["eps"]))
    total = sum(int(np.prod(s)) for _, s in tensor_specs)
    if data.size != total:
        raise CheckpointError(f"{path}: payload holds {data.size} values, header says {total}")
    arrays = {}
    offset = 0
    for name, shape in tensor_specs:
        count = int(np.prod(shape))
        arrays[name] = data[offset:offset + count].reshape(shape).copy()
        offset += count
    try:
        return BaselineParams(config=config,
                              feature_mean=arrays["feature_mean"],
                              feature_scale=arrays["feature_scale"],
                              w1=arrays["dense.0.weight"], b1=arrays["dense.0.bias"],
                              w2=arrays["dense.1.weight"], b2=arrays["dense.1.bias"])
    except KeyError as exc:
        raise CheckpointError(f"{path}: missing tensor {exc}") from None
