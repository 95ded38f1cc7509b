"""The influence regressor: GraphSAGE(LSTM) x2 -> Transformer -> FC head.

Architecture is frozen: 10 input features -> two SAGE layers with LSTM
neighbor aggregation (10->32, 32->32), a 2-encoder/2-decoder Transformer at
model dim 32 with 4 heads and feedforward width 64, dropout 0.1, and a
32->16->1 fully connected head. The same node-embedding sequence feeds the
encoder and the decoder (non-autoregressive, no causal mask, no positional
encoding: scores must not depend on node ids).
"""

from __future__ import annotations

import json
import struct
import warnings
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from . import autodiff as ad
from .autodiff import AdamState, Tape, Tensor, adam_step
from .features import FEATURE_NAMES, FeatureMatrix, feature_matrix
from .graph import Graph, gen_ba, gen_er, gen_ws
from .propagation import SingularThresholdError, epidemic_threshold, sir_label
from .rng import derive_seed, substream

D_IN = 10
D_MODEL = 32
HEADS = 4
D_FF = 64
N_ENCODERS = 2
N_DECODERS = 2
HEAD_HIDDEN = 16
DROPOUT_RATE = 0.1
MAX_SEQUENCE = 2000

CHECKPOINT_MAGIC = b"GNNT1\n"


class CheckpointError(RuntimeError):
    """Raised on malformed, mismatched or truncated checkpoint files."""


def _attention_shapes(prefix: str) -> list[tuple[str, tuple[int, ...]]]:
    shapes = []
    for proj in ("q", "k", "v", "o"):
        shapes.append((f"{prefix}.w{proj}", (D_MODEL, D_MODEL)))
        shapes.append((f"{prefix}.b{proj}", (D_MODEL,)))
    return shapes


def _sage_shapes(prefix: str, d_in: int, d_out: int) -> list[tuple[str, tuple[int, ...]]]:
    # LSTM aggregator keeps the layer input width; combine maps [self || agg]
    return [
        (f"{prefix}.lstm_wx", (d_in, 4 * d_in)),
        (f"{prefix}.lstm_wh", (d_in, 4 * d_in)),
        (f"{prefix}.lstm_b", (4 * d_in,)),
        (f"{prefix}.w", (2 * d_in, d_out)),
        (f"{prefix}.b", (d_out,)),
    ]


def _ff_and_norm_shapes(prefix: str, norms: int) -> list[tuple[str, tuple[int, ...]]]:
    shapes = [
        (f"{prefix}.ff_w1", (D_MODEL, D_FF)),
        (f"{prefix}.ff_b1", (D_FF,)),
        (f"{prefix}.ff_w2", (D_FF, D_MODEL)),
        (f"{prefix}.ff_b2", (D_MODEL,)),
    ]
    for i in range(1, norms + 1):
        shapes.append((f"{prefix}.ln{i}_g", (D_MODEL,)))
        shapes.append((f"{prefix}.ln{i}_b", (D_MODEL,)))
    return shapes


def param_manifest() -> list[tuple[str, tuple[int, ...]]]:
    """Frozen (name, shape) list defining checkpoint layout and load checks."""
    shapes: list[tuple[str, tuple[int, ...]]] = []
    shapes += _sage_shapes("sage1", D_IN, D_MODEL)
    shapes += _sage_shapes("sage2", D_MODEL, D_MODEL)
    for i in range(N_ENCODERS):
        shapes += _attention_shapes(f"enc{i}.attn")
        shapes += _ff_and_norm_shapes(f"enc{i}", norms=2)
    for i in range(N_DECODERS):
        shapes += _attention_shapes(f"dec{i}.self_attn")
        shapes += _attention_shapes(f"dec{i}.cross_attn")
        shapes += _ff_and_norm_shapes(f"dec{i}", norms=3)
    shapes += [
        ("head.w1", (D_MODEL, HEAD_HIDDEN)),
        ("head.b1", (HEAD_HIDDEN,)),
        ("head.w2", (HEAD_HIDDEN, 1)),
        ("head.b2", (1,)),
    ]
    return shapes


PARAM_COUNT = sum(int(np.prod(shape)) for _, shape in param_manifest())


def init_params(master_seed: int) -> dict[str, np.ndarray]:
    """Deterministic Xavier-uniform init; norms start at identity."""
    stream = substream(derive_seed(master_seed, "weight-init"), 0, 0)
    params: dict[str, np.ndarray] = {}
    for name, shape in param_manifest():
        if name.endswith("_g"):
            params[name] = np.ones(shape)
        elif len(shape) == 1:
            params[name] = np.zeros(shape)
            if name.endswith("lstm_b"):
                hidden = shape[0] // 4
                params[name][hidden : 2 * hidden] = 1.0  # open forget gates early
        else:
            bound = np.sqrt(6.0 / (shape[0] + shape[1]))
            params[name] = stream.uniform(-bound, bound, size=shape)
    return params


def validate_params(params: dict[str, np.ndarray]) -> None:
    expected = param_manifest()
    names = [n for n, _ in expected]
    if list(params.keys()) != names:
        raise CheckpointError("parameter shape mismatch: manifest names differ")
    for name, shape in expected:
        if params[name].shape != shape:
            raise CheckpointError(
                f"parameter shape mismatch: {name} is {params[name].shape}, expected {shape}"
            )


class _RunContext:
    """Per-forward bookkeeping for mode and keyed dropout/permutation streams."""

    def __init__(
        self,
        mode: str,
        master_seed: int = 0,
        step: int = 0,
        dropout_rate: float = DROPOUT_RATE,
    ):
        if mode not in ("train", "eval"):
            raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
        self.mode = mode
        self.master_seed = master_seed
        self.step = step
        self.dropout_rate = dropout_rate
        self._dropout_sites = 0
        self._sage_layers = 0

    def dropout(self, t: Tensor) -> Tensor:
        if self.mode == "eval" or self.dropout_rate == 0.0:
            return t
        stream = substream(derive_seed(self.master_seed, "dropout"), self.step, self._dropout_sites)
        self._dropout_sites += 1
        return ad.dropout(t, self.dropout_rate, "train", stream)

    def neighbor_orders(self, g: Graph) -> list[np.ndarray]:
        """Per-node neighbor sequences: shuffled in train mode, ascending in eval."""
        layer = self._sage_layers
        self._sage_layers += 1
        if self.mode == "eval":
            return [g.neighbors_of(v) for v in range(g.num_nodes)]
        stream = substream(derive_seed(self.master_seed, "neighbor-perm"), self.step, layer)
        orders = []
        for v in range(g.num_nodes):
            nbrs = g.neighbors_of(v)
            orders.append(nbrs[stream.permutation(nbrs.size)] if nbrs.size else nbrs)
        return orders


def sage_lstm_layer(
    g: Graph,
    h: Tensor,
    pt: dict[str, Tensor],
    prefix: str,
    ctx: _RunContext,
) -> Tensor:
    """GraphSAGE layer with LSTM neighbor aggregation.

    Each node's neighbor embeddings run through the LSTM as a sequence; the
    final hidden state is the aggregate and output is
    relu(W [h_v || agg_v] + b). Nodes are processed in same-degree batches so
    the LSTM steps over (batch, d) matrices; zero-degree nodes aggregate to
    zeros.
    """
    if h.shape[0] != g.num_nodes:
        raise ValueError(f"feature rows {h.shape[0]} != num_nodes {g.num_nodes}")
    d_in = h.shape[1]
    wx, wh, b = pt[f"{prefix}.lstm_wx"], pt[f"{prefix}.lstm_wh"], pt[f"{prefix}.lstm_b"]
    orders = ctx.neighbor_orders(g)
    degs = g.degrees
    parts: list[Tensor] = []
    node_order: list[int] = []
    zero_nodes = np.flatnonzero(degs == 0)
    if zero_nodes.size:
        parts.append(Tensor(np.zeros((zero_nodes.size, d_in))))
        node_order.extend(int(v) for v in zero_nodes)
    for d in np.unique(degs[degs > 0]):
        nodes_d = np.flatnonzero(degs == d)
        seq = np.stack([orders[int(v)] for v in nodes_d])  # (batch, d)
        hid = Tensor(np.zeros((nodes_d.size, d_in)))
        cell = Tensor(np.zeros((nodes_d.size, d_in)))
        for t in range(int(d)):
            xt = ad.gather_rows(h, seq[:, t])
            hid, cell = ad.lstm_cell(xt, hid, cell, wx, wh, b)
        parts.append(hid)
        node_order.extend(int(v) for v in nodes_d)
    stacked = ad.concat(parts, axis=0) if len(parts) > 1 else parts[0]
    position = np.empty(g.num_nodes, dtype=np.int64)
    position[np.array(node_order)] = np.arange(g.num_nodes)
    agg = ad.gather_rows(stacked, position)
    combined = ad.concat([h, agg], axis=1)
    return ad.relu(ad.add(ad.matmul(combined, pt[f"{prefix}.w"]), pt[f"{prefix}.b"]))


def _attention_params(pt: dict[str, Tensor], prefix: str) -> dict[str, Tensor]:
    return {
        "wq": pt[f"{prefix}.wq"], "bq": pt[f"{prefix}.bq"],
        "wk": pt[f"{prefix}.wk"], "bk": pt[f"{prefix}.bk"],
        "wv": pt[f"{prefix}.wv"], "bv": pt[f"{prefix}.bv"],
        "wo": pt[f"{prefix}.wo"], "bo": pt[f"{prefix}.bo"],
    }


def _feed_forward(x: Tensor, pt: dict[str, Tensor], prefix: str) -> Tensor:
    hidden = ad.relu(ad.add(ad.matmul(x, pt[f"{prefix}.ff_w1"]), pt[f"{prefix}.ff_b1"]))
    return ad.add(ad.matmul(hidden, pt[f"{prefix}.ff_w2"]), pt[f"{prefix}.ff_b2"])


def _encoder_layer(x: Tensor, pt: dict[str, Tensor], prefix: str, ctx: _RunContext) -> Tensor:
    attn = ad.multi_head_attention(x, x, x, HEADS, _attention_params(pt, f"{prefix}.attn"))
    x = ad.layer_norm(ad.add(x, ctx.dropout(attn)), pt[f"{prefix}.ln1_g"], pt[f"{prefix}.ln1_b"])
    ff = _feed_forward(x, pt, prefix)
    return ad.layer_norm(ad.add(x, ctx.dropout(ff)), pt[f"{prefix}.ln2_g"], pt[f"{prefix}.ln2_b"])


def _decoder_layer(
    y: Tensor, memory: Tensor, pt: dict[str, Tensor], prefix: str, ctx: _RunContext
) -> Tensor:
    self_attn = ad.multi_head_attention(y, y, y, HEADS, _attention_params(pt, f"{prefix}.self_attn"))
    y = ad.layer_norm(ad.add(y, ctx.dropout(self_attn)), pt[f"{prefix}.ln1_g"], pt[f"{prefix}.ln1_b"])
    cross = ad.multi_head_attention(
        y, memory, memory, HEADS, _attention_params(pt, f"{prefix}.cross_attn")
    )
    y = ad.layer_norm(ad.add(y, ctx.dropout(cross)), pt[f"{prefix}.ln2_g"], pt[f"{prefix}.ln2_b"])
    ff = _feed_forward(y, pt, prefix)
    return ad.layer_norm(ad.add(y, ctx.dropout(ff)), pt[f"{prefix}.ln3_g"], pt[f"{prefix}.ln3_b"])


def _transformer_and_head(h: Tensor, pt: dict[str, Tensor], ctx: _RunContext) -> Tensor:
    memory = h
    for i in range(N_ENCODERS):
        memory = _encoder_layer(memory, pt, f"enc{i}", ctx)
    out = h  # decoder consumes the same node sequence it regresses on
    for i in range(N_DECODERS):
        out = _decoder_layer(out, memory, pt, f"dec{i}", ctx)
    hidden = ad.relu(ad.add(ad.matmul(out, pt["head.w1"]), pt["head.b1"]))
    return ad.add(ad.matmul(hidden, pt["head.w2"]), pt["head.b2"])


def forward_tensor(
    g: Graph,
    x_values: np.ndarray,
    pt: dict[str, Tensor],
    ctx: _RunContext,
) -> Tensor:
    """Differentiable full forward pass; returns (N, 1) scores.

    Graphs longer than MAX_SEQUENCE are scored through windowed attention
    (the SAGE stage always sees the whole graph); training rejects them.
    """
    if x_values.shape != (g.num_nodes, D_IN):
        raise ValueError(f"feature matrix {x_values.shape} != ({g.num_nodes}, {D_IN})")
    h = Tensor(x_values)
    h = sage_lstm_layer(g, h, pt, "sage1", ctx)
    h = sage_lstm_layer(g, h, pt, "sage2", ctx)
    n = g.num_nodes
    if n <= MAX_SEQUENCE:
        return _transformer_and_head(h, pt, ctx)
    if ctx.mode == "train":
        raise ValueError(f"training caps at {MAX_SEQUENCE}-node sequences, got {n}")
    chunks = []
    for lo in range(0, n, MAX_SEQUENCE):
        hi = min(lo + MAX_SEQUENCE, n)
        chunks.append(_transformer_and_head(ad.slice_axis(h, 0, lo, hi), pt, ctx))
    return ad.concat(chunks, axis=0)


def _require_features(x: FeatureMatrix | np.ndarray) -> np.ndarray:
    if isinstance(x, FeatureMatrix):
        if tuple(x.feature_names) != FEATURE_NAMES:
            raise CheckpointError("feature schema mismatch: unexpected feature names")
        return x.values
    return np.asarray(x, dtype=np.float64)


def gnnt_forward(
    g: Graph,
    x: FeatureMatrix | np.ndarray,
    params: dict[str, np.ndarray],
    mode: str = "eval",
    master_seed: int = 0,
    step: int = 0,
    dropout_rate: float = DROPOUT_RATE,
) -> np.ndarray:
    """Influence scores for every node, shape (N, 1). Eval mode is deterministic."""
    validate_params(params)
    pt = {k: Tensor(v) for k, v in params.items()}
    ctx = _RunContext(mode, master_seed, step, dropout_rate)
    return forward_tensor(g, _require_features(x), pt, ctx).data.copy()


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------


@dataclass
class Checkpoint:
    """Weights plus the frozen feature schema and training metadata."""

    params: dict[str, np.ndarray]
    feature_names: tuple[str, ...] = FEATURE_NAMES
    metadata: dict = field(default_factory=dict)


def save_checkpoint(ckpt: Checkpoint, path: str) -> None:
    validate_params(ckpt.params)
    manifest = [[name, list(shape)] for name, shape in param_manifest()]
    header = json.dumps(
        {
            "manifest": manifest,
            "feature_names": list(ckpt.feature_names),
            "metadata": ckpt.metadata,
        },
        sort_keys=True,
    ).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        for name, _ in param_manifest():
            fh.write(np.ascontiguousarray(ckpt.params[name], dtype="<f4").tobytes())


def load_checkpoint(path: str) -> Checkpoint:
    with open(path, "rb") as fh:
        blob = fh.read()
    if not blob.startswith(CHECKPOINT_MAGIC):
        raise CheckpointError(f"bad magic in {path}")
    offset = len(CHECKPOINT_MAGIC)
    if len(blob) < offset + 4:
        raise CheckpointError(f"truncated checkpoint {path}: missing header length")
    (header_len,) = struct.unpack_from("<I", blob, offset)
    offset += 4
    if len(blob) < offset + header_len:
        raise CheckpointError(f"truncated checkpoint {path}: incomplete header")
    header = json.loads(blob[offset : offset + header_len].decode("utf-8"))
    offset += header_len
    expected = [[name, list(shape)] for name, shape in param_manifest()]
    if header.get("feature_names") != list(FEATURE_NAMES):
        raise CheckpointError("feature schema mismatch: checkpoint lists different features")
    if header.get("manifest") != expected:
        raise CheckpointError("parameter shape mismatch: checkpoint manifest differs")
    params: dict[str, np.ndarray] = {}
    for name, shape in param_manifest():
        count = int(np.prod(shape))
        nbytes = count * 4
        if len(blob) < offset + nbytes:
            raise CheckpointError(f"truncated checkpoint {path}: weights end at {name}")
        params[name] = (
            np.frombuffer(blob, dtype="<f4", count=count, offset=offset)
            .astype(np.float64)
            .reshape(shape)
        )
        offset += nbytes
    if offset != len(blob):
        raise CheckpointError(f"trailing bytes after weights in {path}")
    return Checkpoint(params=params, feature_names=FEATURE_NAMES, metadata=header.get("metadata", {}))


# ---------------------------------------------------------------------------
# Pre-training
# ---------------------------------------------------------------------------


@dataclass
class TrainConfig:
    """Pre-training recipe: synthetic dataset spec plus optimizer settings."""

    master_seed: int
    learning_rate: float = 1e-3
    epochs: int = 200
    num_graphs: int = 20
    size_min: int = 100
    size_max: int = 300
    families: tuple[str, ...] = ("er", "ba", "ws")
    label_runs: int = 1000
    label_workers: int = 1

    def __post_init__(self) -> None:
        if self.learning_rate <= 0 or self.epochs < 0 or self.num_graphs < 1:
            raise ValueError("learning_rate must be positive, epochs >= 0, num_graphs >= 1")
        if not (1 <= self.size_min <= self.size_max <= MAX_SEQUENCE):
            raise ValueError(f"sizes must satisfy 1 <= min <= max <= {MAX_SEQUENCE}")


def synthesize_graph(config: TrainConfig, index: int) -> Graph:
    """Deterministic synthetic network for one dataset slot."""
    family = config.families[index % len(config.families)]
    stream = substream(derive_seed(config.master_seed, "dataset"), index, 0)
    n = int(stream.integers(config.size_min, config.size_max + 1))
    gseed = int(stream.integers(0, 1 << 63))
    if family == "er":
        mean_degree = stream.uniform(4.0, 10.0)
        return gen_er(n, min(mean_degree / (n - 1), 1.0), seed=gseed)
    if family == "ba":
        return gen_ba(n, int(stream.integers(2, 5)), seed=gseed)
    if family == "ws":
        return gen_ws(n, 2 * int(stream.integers(2, 5)), stream.uniform(0.05, 0.3), seed=gseed)
    raise ValueError(f"unknown synthetic family {family!r}")


def build_pretrain_dataset(
    config: TrainConfig,
) -> list[tuple[Graph, FeatureMatrix, np.ndarray]]:
    """Synthetic graphs with features and normalized SIR labels.

    Labels are infected fractions (mean outbreak size / N). Graphs whose
    epidemic threshold is singular are skipped with a warning.
    """
    dataset = []
    for i in range(config.num_graphs):
        g = synthesize_graph(config, i)
        try:
            beta = epidemic_threshold(g)
        except SingularThresholdError:
            warnings.warn(f"dataset graph {i}: singular epidemic threshold, skipping")
            continue
        labels = sir_label(
            g,
            range(g.num_nodes),
            beta_th=beta.beta_th,
            runs=config.label_runs,
            master_seed=derive_seed(config.master_seed, f"pretrain-labels-{i}"),
            workers=config.label_workers,
        )
        targets = (labels.mean_infected / g.num_nodes).reshape(-1, 1)
        dataset.append((g, feature_matrix(g), targets))
    if not dataset:
        raise ValueError("dataset spec produced no usable graphs")
    return dataset


def train_steps(
    params: dict[str, np.ndarray],
    dataset: list[tuple[Graph, FeatureMatrix, np.ndarray]],
    epochs: int,
    learning_rate: float,
    master_seed: int,
    labeled_ids: np.ndarray | None = None,
) -> list[float]:
    """Adam/MSE loop over full-graph batches, one graph per step.

    ``labeled_ids`` restricts the loss to those rows (fine-tuning); None
    trains on every node. Returns per-epoch mean losses.
    """
    state = AdamState()
    step = 0
    history: list[float] = []
    for _ in range(epochs):
        epoch_losses = []
        for g, fm, targets in dataset:
            pt = {k: Tensor(v, requires_grad=True) for k, v in params.items()}
            ctx = _RunContext("train", master_seed, step)
            with Tape() as tape:
                pred = forward_tensor(g, fm.values, pt, ctx)
                if labeled_ids is not None:
                    pred = ad.gather_rows(pred, labeled_ids)
                    target_t = Tensor(targets[labeled_ids])
                else:
                    target_t = Tensor(targets)
                loss = ad.mse_loss(pred, target_t)
                tape.backward(loss)
            grads = {k: (t.grad if t.grad is not None else np.zeros_like(t.data)) for k, t in pt.items()}
            adam_step(params, grads, state, lr=learning_rate)
            epoch_losses.append(float(loss.data))
            step += 1
        history.append(float(np.mean(epoch_losses)))
    return history


def pretrain(config: TrainConfig, dataset=None) -> Checkpoint:
    """Pre-train on synthetic networks; returns a checkpoint with loss history.

    ``dataset`` may inject a pre-built (graph, features, targets) list, e.g.
    to reuse cached labels; by default it is synthesized from the config.
    """
    if dataset is None:
        dataset = build_pretrain_dataset(config)
    params = init_params(config.master_seed)
    history = train_steps(
        params, dataset, config.epochs, config.learning_rate, config.master_seed
    )
    metadata = {
        "kind": "gnnt",
        "master_seed": config.master_seed,
        "epochs": config.epochs,
        "learning_rate": config.learning_rate,
        "num_graphs": len(dataset),
        "size_range": [config.size_min, config.size_max],
        "families": list(config.families),
        "label_runs": config.label_runs,
        "loss_history": history,
        "final_loss": history[-1] if history else None,
    }
    return Checkpoint(params=params, metadata=metadata)
