"""Subgraph classifier: stacked GCN layers, sort pooling, a 1-D conv stack
and dense head, trained one example at a time with NAdam on cross-entropy.

The sort key is the final single-channel GCN output; the first conv layer
uses kernel = stride = total GCN channel count, so each step consumes one
node's concatenated representation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import neural_engine as ne
from .dataset_builder import LabeledPair, classify_pair
from .eval_metrics import UndefinedAUCError, auc
from .graph_store import GraphSnapshot
from .subgraph_extractor import SubgraphTensors, build_tensors, extract_enclosing_subgraph

CHECKPOINT_MAGIC = b"DGCNNCKP"
CHECKPOINT_VERSION = 1


class CheckpointError(ValueError):
    """Unreadable or inconsistent checkpoint file."""


@dataclass(frozen=True)
class ArchitectureConfig:
    gcn_channels: tuple = (128, 128, 128, 128, 1)
    sort_k: int = 200
    conv_stack: tuple = (64, 128, "maxpool", 128, 64)  # ints are conv filters
    dense_sizes: tuple = (256, 128, 1)
    l_max: int = 10
    h: int = 1
    keep_fraction: float = 0.35
    conv_kernel: int = 5
    pool_window: int = 2
    type2_zero: bool = False  # score isolated-isolated pairs as 0 without the net

    @property
    def feature_width(self) -> int:
        return self.l_max + 1

    @property
    def concat_channels(self) -> int:
        return int(sum(self.gcn_channels))

    def validate(self):
        if len(self.gcn_channels) < 1 or self.gcn_channels[-1] != 1:
            raise ValueError("last GCN layer must have exactly 1 channel (the sort key)")
        if any(int(c) < 1 for c in self.gcn_channels):
            raise ValueError("GCN channel counts must be positive")
        if self.sort_k < 1:
            raise ValueError("sort_k must be >= 1")
        if not self.conv_stack or not isinstance(self.conv_stack[0], int):
            raise ValueError("conv_stack must start with a conv filter count")
        for entry in self.conv_stack:
            if not (entry == "maxpool" or (isinstance(entry, int) and entry >= 1)):
                raise ValueError(f"bad conv_stack entry {entry!r}")
        if len(self.dense_sizes) < 1 or self.dense_sizes[-1] != 1:
            raise ValueError("last dense layer must have 1 unit")
        if self.l_max < 1 or self.h < 1:
            raise ValueError("l_max and h must be >= 1")
        if not 0 < self.keep_fraction <= 1:
            raise ValueError("keep_fraction must be in (0, 1]")
        self.conv_layout()  # raises if the stack shrinks below a kernel

    def conv_layout(self) -> list[tuple]:
        """Resolved conv stack: [('conv', kernel, stride, c_in, c_out) | ('pool',)]
        with the running sequence length validated at each step."""
        layout = []
        length = self.sort_k
        channels = 1
        first = True
        for entry in self.conv_stack:
            if entry == "maxpool":
                if length < self.pool_window:
                    raise ValueError(f"sequence length {length} shorter than pool window")
                layout.append(("pool",))
                length = (length - self.pool_window) // self.pool_window + 1
            else:
                kernel = self.concat_channels if first else self.conv_kernel
                stride = self.concat_channels if first else 1
                in_len = self.sort_k * self.concat_channels if first else length
                if in_len < kernel:
                    raise ValueError(f"sequence length {in_len} shorter than kernel {kernel}")
                layout.append(("conv", kernel, stride, channels, int(entry)))
                length = (in_len - kernel) // stride + 1
                channels = int(entry)
                first = False
        return layout

    def flat_size(self) -> int:
        length = None
        channels = 1
        for item in self.conv_layout():
            if item[0] == "pool":
                length = (length - self.pool_window) // self.pool_window + 1
            else:
                _, kernel, stride, _, c_out = item
                in_len = self.sort_k * self.concat_channels if length is None else length
                length = (in_len - kernel) // stride + 1
                channels = c_out
        return length * channels


@dataclass
class ModelParams:
    """All trainable tensors plus the architecture they belong to."""

    config: ArchitectureConfig
    seed: int
    gcn_weights: list = field(default_factory=list)
    conv_kernels: list = field(default_factory=list)
    conv_biases: list = field(default_factory=list)
    dense_weights: list = field(default_factory=list)
    dense_biases: list = field(default_factory=list)

    def named_parameters(self) -> list[tuple[str, np.ndarray]]:
        out = [(f"gcn.{i}.weight", w) for i, w in enumerate(self.gcn_weights)]
        for i, (k, b) in enumerate(zip(self.conv_kernels, self.conv_biases)):
            out.append((f"conv.{i}.kernel", k))
            out.append((f"conv.{i}.bias", b))
        for i, (w, b) in enumerate(zip(self.dense_weights, self.dense_biases)):
            out.append((f"dense.{i}.weight", w))
            out.append((f"dense.{i}.bias", b))
        return out

    def copy(self) -> "ModelParams":
        return ModelParams(config=self.config, seed=self.seed,
                           gcn_weights=[w.copy() for w in self.gcn_weights],
                           conv_kernels=[k.copy() for k in self.conv_kernels],
                           conv_biases=[b.copy() for b in self.conv_biases],
                           dense_weights=[w.copy() for w in self.dense_weights],
                           dense_biases=[b.copy() for b in self.dense_biases])


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-5
    batch_size: int = 1  # single-example updates are part of the method
    epochs: int = 50
    patience: int = 5
    validation_fraction: float = 0.1
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def validate(self):
        if self.batch_size != 1:
            raise ValueError("batch_size is fixed at 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not 0 <= self.validation_fraction < 1:
            raise ValueError("validation_fraction must be in [0, 1)")


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    mean_loss: float
    val_auc: float  # nan when no validation split or AUC undefined


def build_model(config: ArchitectureConfig, seed: int) -> ModelParams:
    """Glorot-uniform initialized parameters for the given architecture."""
    config.validate()
    rng = np.random.default_rng(seed)
    model = ModelParams(config=config, seed=seed)
    c_in = config.feature_width
    for c_out in config.gcn_channels:
        model.gcn_weights.append(ne.glorot_uniform(rng, (c_in, c_out), c_in, c_out))
        c_in = c_out
    for item in config.conv_layout():
        if item[0] != "conv":
            continue
        _, kernel, _, ch_in, ch_out = item
        model.conv_kernels.append(
            ne.glorot_uniform(rng, (kernel, ch_in, ch_out), kernel * ch_in, kernel * ch_out))
        model.conv_biases.append(np.zeros(ch_out, dtype=np.float64))
    d_in = config.flat_size()
    for d_out in config.dense_sizes:
        model.dense_weights.append(ne.glorot_uniform(rng, (d_in, d_out), d_in, d_out))
        model.dense_biases.append(np.zeros(d_out, dtype=np.float64))
        d_in = d_out
    return model


def _forward_graph(config: ArchitectureConfig, gcn_ws, conv_ks, conv_bs,
                   dense_ws, dense_bs, tensors: SubgraphTensors):
    """Build the forward computation; parameters may be arrays or Nodes.

    Returns (probability node, sort-pooling output node).
    """
    x = tensors.feature_matrix
    a = tensors.norm_adjacency
    if x.shape[0] == 0:
        raise ValueError("subgraph has no nodes")
    if x.shape[1] != config.feature_width:
        raise ValueError(
            f"feature width {x.shape[1]} != l_max + 1 = {config.feature_width}")

    outs = []
    h = x
    for i, w in enumerate(gcn_ws):
        h = ne.gcn_forward(a, h, w, name=f"gcn.{i}")
        outs.append(h)
    h_concat = ne.concat_cols(outs, name="gcn_concat")
    sort_key = outs[-1].value[:, 0]
    sp = ne.sort_pooling(h_concat, sort_key, config.sort_k)

    seq = ne.reshape(sp, (config.sort_k * config.concat_channels, 1), name="flatten_sp")
    ci = 0
    for item in config.conv_layout():
        if item[0] == "pool":
            seq = ne.maxpool1d(seq, config.pool_window, config.pool_window,
                               name=f"maxpool.{ci}")
        else:
            _, kernel, stride, _, _ = item
            seq = ne.conv1d_forward(seq, conv_ks[ci], conv_bs[ci], stride=stride,
                                    activation="relu", name=f"conv.{ci}")
            ci += 1

    vec = ne.reshape(seq, (-1,), name="flatten_conv")
    for i, (w, b) in enumerate(zip(dense_ws, dense_bs)):
        act = "sigmoid" if i == len(dense_ws) - 1 else "relu"
        vec = ne.dense_forward(vec, w, b, activation=act, name=f"dense.{i}")
    return vec, sp


def forward(model: ModelParams, tensors: SubgraphTensors) -> float:
    p, _ = _forward_graph(model.config, model.gcn_weights, model.conv_kernels,
                          model.conv_biases, model.dense_weights,
                          model.dense_biases, tensors)
    return float(p.value.reshape(()))


def forward_with_capture(model: ModelParams,
                         tensors: SubgraphTensors) -> tuple[float, np.ndarray]:
    """Forward pass that also returns the sort-pooling output (k x sum(c_i))."""
    p, sp = _forward_graph(model.config, model.gcn_weights, model.conv_kernels,
                           model.conv_biases, model.dense_weights,
                           model.dense_biases, tensors)
    return float(p.value.reshape(())), sp.value.copy()


def extract_pair_tensors(model_config: ArchitectureConfig, snapshot: GraphSnapshot,
                         u: int, v: int, seed: int) -> SubgraphTensors:
    sub = extract_enclosing_subgraph(snapshot, u, v, h=model_config.h,
                                     keep_fraction=model_config.keep_fraction,
                                     seed=seed, l_max=model_config.l_max)
    return build_tensors(sub, l_max=model_config.l_max)


def train(model: ModelParams, pairs: list[LabeledPair], input_snapshot: GraphSnapshot,
          config: TrainConfig) -> tuple[ModelParams, list[EpochStats]]:
    """Shuffled single-example NAdam updates; returns the best-validation
    parameters (final parameters when no validation split is configured).

    Subgraphs are extracted once up front with per-pair seeds config.seed ^ i.
    """
    config.validate()
    model.config.validate()
    if not pairs:
        raise ValueError("no training pairs")
    labels = np.array([p.label for p in pairs], dtype=np.int64)
    if labels.min() == labels.max():
        raise ValueError("refusing to train on a single-class pair set")

    tensors = [extract_pair_tensors(model.config, input_snapshot, p.u, p.v,
                                    seed=config.seed ^ i)
               for i, p in enumerate(pairs)]

    rng = np.random.default_rng(config.seed)
    perm = rng.permutation(len(pairs))
    n_val = int(round(config.validation_fraction * len(pairs)))
    val_idx, train_idx = perm[:n_val], perm[n_val:]
    if len(train_idx) == 0:
        raise ValueError("validation split leaves no training pairs")

    opt = ne.OptimizerState.for_params([arr for _, arr in model.named_parameters()],
                                       learning_rate=config.learning_rate,
                                       beta1=config.beta1, beta2=config.beta2,
                                       eps=config.eps)
    history: list[EpochStats] = []
    best: ModelParams | None = None
    best_auc = -np.inf
    since_best = 0
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(train_idx)
        losses = []
        for idx in order:
            nodes = [ne.Node(arr, name=name)
                     for name, arr in model.named_parameters()]
            n_gcn = len(model.gcn_weights)
            n_conv = len(model.conv_kernels)
            gcn_ns = nodes[:n_gcn]
            conv_ns = nodes[n_gcn:n_gcn + 2 * n_conv]
            dense_ns = nodes[n_gcn + 2 * n_conv:]
            p, _ = _forward_graph(model.config, gcn_ns, conv_ns[0::2], conv_ns[1::2],
                                  dense_ns[0::2], dense_ns[1::2], tensors[idx])
            loss = ne.bce_loss(p, pairs[idx].label)
            ne.backward(loss)
            grads = [n.grad if n.grad is not None else np.zeros_like(n.value)
                     for n in nodes]
            ne.nadam_step(nodes, grads, opt)
            losses.append(float(loss.value))
        val_auc = float("nan")
        if len(val_idx):
            val_scores = [forward(model, tensors[i]) for i in val_idx]
            try:
                val_auc = auc(val_scores, labels[val_idx])
            except UndefinedAUCError:
                val_auc = float("nan")
        history.append(EpochStats(epoch=epoch, mean_loss=float(np.mean(losses)),
                                  val_auc=val_auc))
        if not math.isnan(val_auc):
            if val_auc > best_auc:
                best_auc = val_auc
                best = model.copy()
                since_best = 0
            else:
                since_best += 1
                if since_best >= config.patience:
                    break
    return (best if best is not None else model.copy()), history


def predict_pairs(model: ModelParams, snapshot: GraphSnapshot, pairs,
                  seed: int = 0, workers: int = 1) -> np.ndarray:
    """One probability per pair, extraction seeded as seed ^ pair index."""
    items = [(p.u, p.v) if isinstance(p, LabeledPair) else (int(p[0]), int(p[1]))
             for p in pairs]
    if workers > 1:
        return _predict_parallel(model, snapshot, items, seed, workers)
    return np.array([_score_pair(model, snapshot, u, v, seed ^ i)
                     for i, (u, v) in enumerate(items)])


def _score_pair(model: ModelParams, snapshot: GraphSnapshot, u: int, v: int,
                pair_seed: int) -> float:
    if model.config.type2_zero and classify_pair(snapshot, u, v) == 2:
        return 0.0
    tensors = extract_pair_tensors(model.config, snapshot, u, v, seed=pair_seed)
    return forward(model, tensors)


_WORKER_STATE: dict = {}


def _predict_init(model, snapshot, seed):
    _WORKER_STATE["model"] = model
    _WORKER_STATE["snapshot"] = snapshot
    _WORKER_STATE["seed"] = seed


def _predict_one(arg):
    i, u, v = arg
    return _score_pair(_WORKER_STATE["model"], _WORKER_STATE["snapshot"],
                       u, v, _WORKER_STATE["seed"] ^ i)


def _predict_parallel(model, snapshot, items, seed, workers) -> np.ndarray:
    import multiprocessing as mp

    ctx = mp.get_context("fork") if "fork" in mp.get_all_start_methods() else mp.get_context()
    with ctx.Pool(processes=workers, initializer=_predict_init,
                  initargs=(model, snapshot, seed)) as pool:
        scores = pool.map(_predict_one, [(i, u, v) for i, (u, v) in enumerate(items)],
                          chunksize=max(1, len(items) // (4 * workers) or 1))
    return np.array(scores)


# ---------------------------------------------------------------------------
# checkpoints


def _config_header_lines(config: ArchitectureConfig) -> list[str]:
    return [
        "gcn_channels " + ",".join(str(c) for c in config.gcn_channels),
        f"sort_k {config.sort_k}",
        "conv_stack " + ",".join(str(e) for e in config.conv_stack),
        "dense_sizes " + ",".join(str(c) for c in config.dense_sizes),
        f"l_max {config.l_max}",
        f"h {config.h}",
        f"keep_fraction {config.keep_fraction!r}",
        f"conv_kernel {config.conv_kernel}",
        f"pool_window {config.pool_window}",
        f"type2_zero {int(config.type2_zero)}",
    ]


def _parse_config_header(fields: dict) -> ArchitectureConfig:
    def int_tuple(s):
        return tuple(int(v) for v in s.split(","))

    try:
        conv_stack = tuple("maxpool" if e == "maxpool" else int(e)
                           for e in fields["conv_stack"].split(","))
        return ArchitectureConfig(
            gcn_channels=int_tuple(fields["gcn_channels"]),
            sort_k=int(fields["sort_k"]),
            conv_stack=conv_stack,
            dense_sizes=int_tuple(fields["dense_sizes"]),
            l_max=int(fields["l_max"]),
            h=int(fields["h"]),
            keep_fraction=float(fields["keep_fraction"]),
            conv_kernel=int(fields["conv_kernel"]),
            pool_window=int(fields["pool_window"]),
            type2_zero=bool(int(fields["type2_zero"])),
        )
    except (KeyError, ValueError) as exc:
        raise CheckpointError(f"bad checkpoint config header: {exc}") from None


def write_container(path, header_lines: list[str], arrays: list[np.ndarray]):
    """Shared binary container: magic, u16 version, u32 header length, UTF-8
    header text, then raw little-endian float64 in header order."""
    header = "\n".join(header_lines) + "\n"
    blob = header.encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(np.uint16(CHECKPOINT_VERSION).astype("<u2").tobytes())
        fh.write(np.uint32(len(blob)).astype("<u4").tobytes())
        fh.write(blob)
        for arr in arrays:
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def read_container(path) -> tuple[list[str], np.ndarray]:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 14 or blob[:8] != CHECKPOINT_MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint (bad magic)")
    version = int(np.frombuffer(blob[8:10], dtype="<u2")[0])
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
    header_len = int(np.frombuffer(blob[10:14], dtype="<u4")[0])
    if len(blob) < 14 + header_len:
        raise CheckpointError(f"{path}: truncated checkpoint header")
    header = blob[14:14 + header_len].decode("utf-8")
    payload = blob[14 + header_len:]
    if len(payload) % 8:
        raise CheckpointError(f"{path}: corrupt payload length")
    data = np.frombuffer(payload, dtype="<f8")
    return header.splitlines(), data


def save_checkpoint(model: ModelParams, path):
    named = model.named_parameters()
    lines = ["model dgcnn", f"seed {model.seed}"]
    lines += _config_header_lines(model.config)
    lines += [f"tensor {name} " + "x".join(str(d) for d in arr.shape)
              for name, arr in named]
    write_container(path, lines, [arr for _, arr in named])


def load_checkpoint(path, expect_config: ArchitectureConfig | None = None) -> ModelParams:
    lines, data = read_container(path)
    fields: dict[str, str] = {}
    tensor_specs: list[tuple[str, tuple[int, ...]]] = []
    for line in lines:
        if not line.strip():
            continue
        tag, _, rest = line.partition(" ")
        if tag == "tensor":
            name, _, shape_s = rest.partition(" ")
            try:
                shape = tuple(int(d) for d in shape_s.split("x"))
            except ValueError:
                raise CheckpointError(f"{path}: bad tensor shape {shape_s!r}") from None
            tensor_specs.append((name, shape))
        else:
            fields[tag] = rest
    if fields.get("model") != "dgcnn":
        raise CheckpointError(f"{path}: not a dgcnn checkpoint")
    config = _parse_config_header(fields)
    if expect_config is not None and config != expect_config:
        raise CheckpointError(
            f"{path}: checkpoint config does not match the expected config "
            f"(e.g. stored sort_k={config.sort_k}, expected {expect_config.sort_k})")

    reference = build_model(config, seed=int(fields.get("seed", "0")))
    expected = reference.named_parameters()
    if [n for n, _ in expected] != [n for n, _ in tensor_specs]:
        raise CheckpointError(f"{path}: tensor list does not match the architecture")
    for (name, arr), (_, shape) in zip(expected, tensor_specs):
        if arr.shape != shape:
            raise CheckpointError(
                f"{path}: tensor {name} has shape {shape}, architecture wants {arr.shape}")
    total = sum(int(np.prod(s)) for _, s in tensor_specs)
    if data.size != total:
        raise CheckpointError(f"{path}: payload holds {data.size} values, header says {total}")
    offset = 0
    for name, arr in expected:
        count = arr.size
        arr[...] = data[offset:offset + count].reshape(arr.shape)
        offset += count
    return reference


def save_history(history: list[EpochStats], path):
    """History file: epoch, mean loss, validation AUC per line."""
    with open(path, "w", encoding="ascii") as fh:
        for h in history:
            fh.write(f"{h.epoch}\t{h.mean_loss:.12g}\t{h.val_auc:.12g}\n")
