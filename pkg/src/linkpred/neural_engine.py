"""Minimal dense tensor kernel with reverse-mode gradients.

Exactly the operator set the subgraph classifier needs: graph-convolution
propagation, sort pooling, 1-D convolution, max pooling, dense layers, the
usual activations, binary cross-entropy and the NAdam update.  Values are
64-bit numpy arrays; every op checks its output for NaN/Inf and aborts with
the op name if it finds one.

A forward pass builds a graph of `Node` objects (the computation record);
`backward(loss)` walks it in reverse topological order and accumulates
gradients on every leaf, in particular on layer parameters.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

BCE_EPS = 1e-7


class NonFiniteError(FloatingPointError):
    """A NaN or Inf appeared; the message names the producing op."""


def _check_finite(value: np.ndarray, name: str):
    if not np.isfinite(value).all():
        raise NonFiniteError(f"non-finite value produced by op '{name}'")


class Node:
    """One tensor in a recorded computation.

    `parents` lists upstream Nodes, `_backward(grad)` routes the incoming
    gradient to them.  Leaves (parameters, inputs) have no parents and simply
    accumulate into `.grad`.
    """

    __slots__ = ("value", "grad", "parents", "_backward", "name")

    def __init__(self, value, parents=(), backward=None, name="leaf"):
        self.value = np.asarray(value, dtype=np.float64)
        _check_finite(self.value, name)
        self.grad = None
        self.parents = tuple(parents)
        self._backward = backward
        self.name = name

    def accumulate(self, grad):
        if self.grad is None:
            self.grad = np.zeros_like(self.value)
        self.grad += grad


def _value(x):
    return x.value if isinstance(x, Node) else np.asarray(x, dtype=np.float64)


def backward(loss: Node):
    """Reverse-mode sweep from a scalar loss over the recorded forward pass.

    Populates `.grad` on every Node reachable from `loss`; read parameter
    gradients off the parameter Nodes afterwards.
    """
    if not isinstance(loss, Node):
        raise ValueError("backward needs the Node returned by a forward pass")
    if loss.value.size != 1:
        raise ValueError("backward expects a scalar loss")
    order = []
    seen = set()
    stack = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if isinstance(p, Node) and id(p) not in seen:
                stack.append((p, False))
    loss.accumulate(np.ones_like(loss.value))
    for node in reversed(order):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)


def zero_grads(params):
    for p in params:
        p.grad = None


# ---------------------------------------------------------------------------
# primitive ops


def matmul(a, b, name="matmul") -> Node:
    """a @ b for a 2-D right operand; the left may be 1-D (a row vector)."""
    av, bv = _value(a), _value(b)
    if bv.ndim != 2 or av.ndim not in (1, 2):
        raise ValueError(f"{name}: unsupported operand ranks {av.ndim} @ {bv.ndim}")
    out_value = av @ bv

    def back(g):
        if isinstance(a, Node):
            a.accumulate(g @ bv.T)
        if isinstance(b, Node):
            b.accumulate(np.outer(av, g) if av.ndim == 1 else av.T @ g)

    return Node(out_value, parents=[p for p in (a, b) if isinstance(p, Node)],
                backward=back, name=name)


def add(a, b, name="add") -> Node:
    """Elementwise add; b may broadcast (bias over rows)."""
    av, bv = _value(a), _value(b)
    out_value = av + bv

    def back(g):
        if isinstance(a, Node):
            a.accumulate(_unbroadcast(g, av.shape))
        if isinstance(b, Node):
            b.accumulate(_unbroadcast(g, bv.shape))

    return Node(out_value, parents=[p for p in (a, b) if isinstance(p, Node)],
                backward=back, name=name)


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def tanh(a, name="tanh") -> Node:
    out_value = np.tanh(_value(a))

    def back(g):
        if isinstance(a, Node):
            a.accumulate(g * (1.0 - out_value ** 2))

    return Node(out_value, parents=[a] if isinstance(a, Node) else [],
                backward=back, name=name)


def relu(a, name="relu") -> Node:
    av = _value(a)
    out_value = np.maximum(av, 0.0)

    def back(g):
        if isinstance(a, Node):
            a.accumulate(g * (av > 0.0))

    return Node(out_value, parents=[a] if isinstance(a, Node) else [],
                backward=back, name=name)


def sigmoid(a, name="sigmoid") -> Node:
    out_value = 1.0 / (1.0 + np.exp(-_value(a)))

    def back(g):
        if isinstance(a, Node):
            a.accumulate(g * out_value * (1.0 - out_value))

    return Node(out_value, parents=[a] if isinstance(a, Node) else [],
                backward=back, name=name)


def identity(a, name="linear") -> Node:
    def back(g):
        if isinstance(a, Node):
            a.accumulate(g)

    return Node(_value(a), parents=[a] if isinstance(a, Node) else [],
                backward=back, name=name)


ACTIVATIONS = {"relu": relu, "tanh": tanh, "sigmoid": sigmoid, "linear": identity}


def concat_cols(nodes, name="concat") -> Node:
    values = [_value(n) for n in nodes]
    widths = [v.shape[1] for v in values]
    out_value = np.concatenate(values, axis=1)
    offsets = np.cumsum([0] + widths)

    def back(g):
        for node, lo, hi in zip(nodes, offsets[:-1], offsets[1:]):
            if isinstance(node, Node):
                node.accumulate(g[:, lo:hi])

    return Node(out_value, parents=[n for n in nodes if isinstance(n, Node)],
                backward=back, name=name)


def reshape(a, shape, name="reshape") -> Node:
    av = _value(a)
    out_value = av.reshape(shape)

    def back(g):
        if isinstance(a, Node):
            a.accumulate(g.reshape(av.shape))

    return Node(out_value, parents=[a] if isinstance(a, Node) else [],
                backward=back, name=name)


# ---------------------------------------------------------------------------
# layers


def gcn_forward(norm_adjacency, h, w, name="gcn") -> Node:
    """tanh(A_norm @ H @ W); the propagation rule carries no bias term."""
    return tanh(matmul(matmul(norm_adjacency, h, name=f"{name}.prop"), w,
                       name=f"{name}.mix"), name=name)


def sort_pooling(h_concat, sort_key, k: int, name="sort_pooling") -> Node:
    """Order rows by sort_key descending (ties: original index ascending),
    truncate to k rows or zero-pad up to k rows.

    The permutation is treated as a constant of the forward pass; gradients
    flow to the retained rows only.
    """
    hv = _value(h_concat)
    key = np.asarray(sort_key, dtype=np.float64).reshape(-1)
    n, c = hv.shape
    if len(key) != n:
        raise ValueError("sort_key length must match the node count")
    if k < 1:
        raise ValueError("k must be >= 1")
    order = np.argsort(-key, kind="stable")
    kept = order[:min(n, k)]
    out_value = np.zeros((k, c), dtype=np.float64)
    out_value[:len(kept)] = hv[kept]

    def back(g):
        if isinstance(h_concat, Node):
            gh = np.zeros_like(hv)
            gh[kept] = g[:len(kept)]
            h_concat.accumulate(gh)

    return Node(out_value, parents=[h_concat] if isinstance(h_concat, Node) else [],
                backward=back, name=name)


def conv1d_forward(x, kernel, bias, stride: int, activation="relu",
                   name="conv1d") -> Node:
    """Valid 1-D convolution over an (L, c_in) sequence.

    kernel has shape (s, c_in, c_out); output length is (L - s)//stride + 1.
    """
    xv = _value(x)
    kv, bv = _value(kernel), _value(bias)
    length, c_in = xv.shape
    s, kc_in, c_out = kv.shape
    if kc_in != c_in:
        raise ValueError(f"{name}: kernel expects {kc_in} channels, input has {c_in}")
    if length < s:
        raise ValueError(f"{name}: input length {length} shorter than kernel {s}")
    t = (length - s) // stride + 1
    idx = stride * np.arange(t)[:, None] + np.arange(s)[None, :]  # (t, s)
    windows = xv[idx].reshape(t, s * c_in)
    kmat = kv.reshape(s * c_in, c_out)
    pre = windows @ kmat + bv

    pre_node = Node(pre, name=f"{name}.pre")

    def back_pre(g):
        if isinstance(kernel, Node):
            kernel.accumulate((windows.T @ g).reshape(s, c_in, c_out))
        if isinstance(bias, Node):
            bias.accumulate(g.sum(axis=0))
        if isinstance(x, Node):
            gw = (g @ kmat.T).reshape(t, s, c_in)
            gx = np.zeros_like(xv)
            np.add.at(gx, idx, gw)
            x.accumulate(gx)

    pre_node.parents = tuple(p for p in (x, kernel, bias) if isinstance(p, Node))
    pre_node._backward = back_pre
    return ACTIVATIONS[activation](pre_node, name=name)


def maxpool1d(x, window: int, stride: int, name="maxpool1d") -> Node:
    """Per-window channel-wise max; gradient routes to the first argmax."""
    xv = _value(x)
    length = xv.shape[0]
    if length < window:
        raise ValueError(f"{name}: input length {length} shorter than window {window}")
    t = (length - window) // stride + 1
    idx = stride * np.arange(t)[:, None] + np.arange(window)[None, :]
    windows = xv[idx]  # (t, window, c)
    arg = windows.argmax(axis=1)  # first max on ties
    out_value = np.take_along_axis(windows, arg[:, None, :], axis=1)[:, 0, :]

    def back(g):
        if isinstance(x, Node):
            gx = np.zeros_like(xv)
            rows = idx[np.arange(t)[:, None], arg]  # (t, c) input positions
            cols = np.broadcast_to(np.arange(xv.shape[1]), rows.shape)
            np.add.at(gx, (rows.ravel(), cols.ravel()), g.ravel())
            x.accumulate(gx)

    return Node(out_value, parents=[x] if isinstance(x, Node) else [],
                backward=back, name=name)


def dense_forward(x, w, b, activation="linear", name="dense") -> Node:
    """activation(x @ W + b) for a 1-D input vector."""
    return ACTIVATIONS[activation](add(matmul(x, w, name=f"{name}.mm"), b,
                                       name=f"{name}.bias"), name=name)


def bce_value_and_grad(p: float, y: int) -> tuple[float, float]:
    """Binary cross-entropy of a single probability, and dL/dp.

    p is clamped to [BCE_EPS, 1 - BCE_EPS] before the logs.
    """
    pc = min(max(float(p), BCE_EPS), 1.0 - BCE_EPS)
    loss = -(y * np.log(pc) + (1 - y) * np.log(1.0 - pc))
    grad = (pc - y) / (pc * (1.0 - pc))
    return float(loss), float(grad)


def bce_loss(p, y: int, name="bce") -> Node:
    """Tape op for binary cross-entropy against a 0/1 label."""
    pv = float(np.asarray(_value(p)).reshape(()))
    loss, grad = bce_value_and_grad(pv, y)

    def back(g):
        if isinstance(p, Node):
            p.accumulate(np.full_like(p.value, g * grad))

    return Node(np.float64(loss), parents=[p] if isinstance(p, Node) else [],
                backward=back, name=name)


# ---------------------------------------------------------------------------
# optimizer


@dataclass
class OptimizerState:
    """NAdam accumulators over a fixed parameter list."""

    learning_rate: float = 1e-5
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    @classmethod
    def for_params(cls, params, learning_rate=1e-5, beta1=0.9, beta2=0.999,
                   eps=1e-8) -> "OptimizerState":
        return cls(learning_rate=learning_rate, beta1=beta1, beta2=beta2, eps=eps,
                   m=[np.zeros_like(_value(p)) for p in params],
                   v=[np.zeros_like(_value(p)) for p in params])


def nadam_step(params, grads, state: OptimizerState):
    """One NAdam update, in place on the parameter values.

    m <- b1 m + (1-b1) g ;  v <- b2 v + (1-b2) g^2
    theta <- theta - lr * (b1 m_hat + (1-b1) g / (1-b1^t)) / (sqrt(v_hat) + eps)
    with m_hat = m/(1-b1^t), v_hat = v/(1-b2^t), t incremented before use.
    """
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ValueError("params, grads and optimizer state must align")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    bc1 = 1.0 - b1 ** state.t
    bc2 = 1.0 - b2 ** state.t
    for i, (p, g) in enumerate(zip(params, grads)):
        target = p.value if isinstance(p, Node) else p
        if g.shape != target.shape:
            raise ValueError(f"gradient shape {g.shape} != parameter shape {target.shape}")
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * g
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g
        m_hat = state.m[i] / bc1
        v_hat = state.v[i] / bc2
        update = (b1 * m_hat + (1.0 - b1) * g / bc1) / (np.sqrt(v_hat) + state.eps)
        target -= state.learning_rate * update


def glorot_uniform(rng: np.random.Generator, shape, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape).astype(np.float64)
