"""The clone-detection network and its serialization.

Per input graph: a linear embedding, then T rounds of two attention
blocks (8 sigmoided-and-concatenated heads, then 6 summed heads under
one sigmoid) feeding an LSTM-style update whose gates read only the
current input. All round outputs are concatenated (width 500 by
default) and soft-attention pooling produces one 128-wide graph vector.
The EU variant runs one branch over the merged edge set; EA runs
separate data and control branches and sums their node features. Both
Siamese sides reference the same parameter objects.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields

import numpy as np

from . import autodiff as ad
from .autodiff import ParamStore, Value
from .dataflow import Pdg
from .graphcore import EmptyGraph, adjacency_matrix, encode_node_features


class LengthMismatch(Exception):
    pass


class ModelFileError(Exception):
    pass


@dataclass(frozen=True)
class ModelConfig:
    d_in: int = 18
    d_hidden: int = 100
    heads_block1: int = 8
    head_dim_block1: int = 16
    heads_block2: int = 6
    out_dim_block2: int = 100
    lstm_hidden: int = 100
    rounds: int = 4
    graph_dim: int = 128
    classifier_hidden: int = 64
    variant: str = "ea"
    no_lstm: bool = False
    no_jk: bool = False
    pool: str = "soft"
    leaky_slope: float = 0.02
    symmetrize: bool = False

    def validate(self) -> None:
        if self.variant not in ("eu", "ea"):
            raise ValueError(f"variant must be 'eu' or 'ea', got {self.variant!r}")
        if self.pool not in ("soft", "gap"):
            raise ValueError(f"pool must be 'soft' or 'gap', got {self.pool!r}")
        if self.rounds < 1:
            raise ValueError("rounds must be >= 1")
        if self.lstm_hidden != self.d_hidden:
            # the round-t output re-enters attention block 1 at round t+1
            raise ValueError("lstm_hidden must equal d_hidden")
        if self.out_dim_block2 != self.d_hidden:
            raise ValueError("out_dim_block2 must equal d_hidden")
        if min(self.d_in, self.d_hidden, self.heads_block1,
               self.head_dim_block1, self.heads_block2, self.graph_dim,
               self.classifier_hidden) < 1:
            raise ValueError("all dimensions must be >= 1")

    @property
    def block1_width(self) -> int:
        return self.heads_block1 * self.head_dim_block1

    @property
    def node_width(self) -> int:
        """Width of the per-node feature fed to pooling."""
        if self.no_jk:
            return self.d_hidden
        return self.d_hidden * (self.rounds + 1)

    @property
    def branch_names(self) -> tuple[str, ...]:
        return ("data", "control") if self.variant == "ea" else ("main",)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, raw: dict) -> "ModelConfig":
        known = {f.name: f for f in fields(cls)}
        unknown = sorted(set(raw) - set(known))
        if unknown:
            raise ModelFileError(f"unknown config keys: {', '.join(unknown)}")
        cfg = cls(**raw)
        try:
            cfg.validate()
        except ValueError as exc:
            raise ModelFileError(str(exc)) from None
        return cfg


def param_shapes(cfg: ModelConfig) -> list[tuple[str, int, int, str]]:
    """Declared parameter layout: (name, rows, cols, init class), where
    the init class is weight (Kaiming), bias (zeros) or cell (normal)."""
    shapes: list[tuple[str, int, int, str]] = [
        ("embed.W", cfg.d_in, cfg.d_hidden, "weight"),
        ("embed.b", 1, cfg.d_hidden, "bias"),
    ]
    for branch in cfg.branch_names:
        for k in range(cfg.heads_block1):
            shapes.append((f"{branch}.attn1.{k}.W", cfg.d_hidden,
                           cfg.head_dim_block1, "weight"))
            shapes.append((f"{branch}.attn1.{k}.a", 2 * cfg.head_dim_block1,
                           1, "weight"))
        for k in range(cfg.heads_block2):
            shapes.append((f"{branch}.attn2.{k}.W", cfg.block1_width,
                           cfg.out_dim_block2, "weight"))
            shapes.append((f"{branch}.attn2.{k}.a", 2 * cfg.out_dim_block2,
                           1, "weight"))
        if cfg.no_lstm:
            shapes.append((f"{branch}.project.W", cfg.out_dim_block2,
                           cfg.d_hidden, "weight"))
        else:
            for gate in ("Wi", "Wf", "Wo", "Wc"):
                shapes.append((f"{branch}.lstm.{gate}", cfg.out_dim_block2,
                               cfg.lstm_hidden, "weight"))
            shapes.append((f"{branch}.lstm.C0", 1, cfg.lstm_hidden, "cell"))
    if cfg.pool == "soft":
        shapes.append(("pool.gate.W", cfg.node_width, cfg.graph_dim, "weight"))
        shapes.append(("pool.gate.b", 1, cfg.graph_dim, "bias"))
    shapes.append(("pool.value.W", cfg.node_width, cfg.graph_dim, "weight"))
    shapes.append(("pool.value.b", 1, cfg.graph_dim, "bias"))
    shapes.append(("clf.W1", 2 * cfg.graph_dim, cfg.classifier_hidden, "weight"))
    shapes.append(("clf.b1", 1, cfg.classifier_hidden, "bias"))
    shapes.append(("clf.W2", cfg.classifier_hidden, 1, "weight"))
    shapes.append(("clf.b2", 1, 1, "bias"))
    return shapes


class GraphTensors:
    """Per-graph constants reused across forward passes: the one-hot
    feature matrix, attention masks and a column of ones.

    A mask row i marks the aggregation neighborhood N(i) = in-neighbors
    of i plus i itself, so it is the (self-looped) adjacency transposed.
    """

    __slots__ = ("num_nodes", "x", "masks", "ones", "index")

    def __init__(self, pdg: Pdg):
        x = encode_node_features(pdg)
        self.num_nodes = x.shape[0]
        self.x = ad.constant(x)
        self.masks = {
            "control": adjacency_matrix(pdg, "control", self_loops=True).T.copy(),
            "data": adjacency_matrix(pdg, "data", self_loops=True).T.copy(),
            "union": adjacency_matrix(pdg, "both", self_loops=True).T.copy(),
        }
        self.ones = ad.constant(np.ones((self.num_nodes, 1)))
        order = sorted(n.id for n in pdg.nodes)
        self.index = {nid: row for row, nid in enumerate(order)}


def linear_embed(x: Value, params: ParamStore) -> Value:
    return ad.add(ad.matmul(x, params["embed.W"]), params["embed.b"])


def attention_head(mask: np.ndarray, h: Value, wk: Value, ak: Value,
                   slope: float, ones: Value) -> tuple[Value, Value]:
    """One attention head: scores e_ij = LeakyReLU(akT [z_i || z_j]) for
    j in N(i), row-softmaxed to alpha, output row i = sum_j alpha_ij z_j."""
    z = ad.matmul(h, wk)
    d = z.cols
    a1 = ad.row_slice(ak, 0, d)
    a2 = ad.row_slice(ak, d, 2 * d)
    s1 = ad.matmul(z, a1)
    s2 = ad.matmul(z, a2)
    # E_ij = s1_i + s2_j, assembled with rank-1 products
    e = ad.add(ad.matmul(s1, ad.transpose(ones)),
               ad.matmul(ones, ad.transpose(s2)))
    alpha = ad.masked_row_softmax(ad.leaky_relu(e, slope), mask)
    return ad.matmul(alpha, z), alpha


def attention_block1(mask: np.ndarray, h: Value, params: ParamStore,
                     branch: str, cfg: ModelConfig, ones: Value,
                     attn_sink: list | None = None) -> Value:
    """Multi-head block: sigmoid per head, heads concatenated."""
    outs = []
    alphas = []
    for k in range(cfg.heads_block1):
        head, alpha = attention_head(
            mask, h, params[f"{branch}.attn1.{k}.W"],
            params[f"{branch}.attn1.{k}.a"], cfg.leaky_slope, ones)
        outs.append(ad.sigmoid(head))
        alphas.append(alpha)
    if attn_sink is not None:
        attn_sink.append(alphas)
    return ad.concat_cols(outs)


def attention_block2(mask: np.ndarray, h: Value, params: ParamStore,
                     branch: str, cfg: ModelConfig, ones: Value,
                     attn_sink: list | None = None) -> Value:
    """Second block: heads summed, one sigmoid over the sum."""
    total: Value | None = None
    betas = []
    for k in range(cfg.heads_block2):
        head, beta = attention_head(
            mask, h, params[f"{branch}.attn2.{k}.W"],
            params[f"{branch}.attn2.{k}.a"], cfg.leaky_slope, ones)
        total = head if total is None else ad.add(total, head)
        betas.append(beta)
    if attn_sink is not None:
        attn_sink.append(betas)
    return ad.sigmoid(total)


def lstm_step(h_in: Value, cell: Value, params: ParamStore,
              branch: str) -> tuple[Value, Value]:
    """Gated update; every gate reads only the current input h_in (no
    recurrent weight on the previous hidden state)."""
    i = ad.sigmoid(ad.matmul(h_in, params[f"{branch}.lstm.Wi"]))
    f = ad.sigmoid(ad.matmul(h_in, params[f"{branch}.lstm.Wf"]))
    o = ad.sigmoid(ad.matmul(h_in, params[f"{branch}.lstm.Wo"]))
    c_tilde = ad.tanh(ad.matmul(h_in, params[f"{branch}.lstm.Wc"]))
    new_cell = ad.add(ad.hadamard(f, cell), ad.hadamard(i, c_tilde))
    return ad.hadamard(o, ad.tanh(new_cell)), new_cell


def compute_node_features(h0: Value, mask: np.ndarray, params: ParamStore,
                          branch: str, cfg: ModelConfig, ones: Value,
                          attn_sink: dict | None = None) -> Value:
    """T propagation rounds; the result concatenates every round's
    output after h0 (or is just the last round's output under no_jk)."""
    reps = [h0]
    h = h0
    cell: Value | None = None
    if not cfg.no_lstm:
        # one trainable 1 x hidden row broadcast to every node keeps the
        # initial cell permutation-invariant
        cell = ad.matmul(ones, params[f"{branch}.lstm.C0"])
    sink1 = [] if attn_sink is not None else None
    sink2 = [] if attn_sink is not None else None
    for _ in range(cfg.rounds):
        h1 = attention_block1(mask, h, params, branch, cfg, ones, sink1)
        h2 = attention_block2(mask, h1, params, branch, cfg, ones, sink2)
        if cfg.no_lstm:
            h = ad.matmul(h2, params[f"{branch}.project.W"])
        else:
            h, cell = lstm_step(h2, cell, params, branch)
        reps.append(h)
    if attn_sink is not None:
        attn_sink[branch] = {"block1": sink1, "block2": sink2}
    if cfg.no_jk:
        return reps[-1]
    return ad.concat_cols(reps)


def graph_pooling(h_f: Value, params: ParamStore, cfg: ModelConfig) -> Value:
    """Graph readout: gated sum (soft) or mean (gap) of per-node values."""
    if h_f.rows < 1:
        raise EmptyGraph("cannot pool an empty graph")
    values = ad.add(ad.matmul(h_f, params["pool.value.W"]),
                    params["pool.value.b"])
    if cfg.pool == "gap":
        return ad.scale(ad.sum_rows(values), 1.0 / h_f.rows)
    gates = ad.sigmoid(ad.add(ad.matmul(h_f, params["pool.gate.W"]),
                              params["pool.gate.b"]))
    return ad.sum_rows(ad.hadamard(gates, values))


def compute_graph_features(gt: GraphTensors, params: ParamStore,
                           cfg: ModelConfig,
                           attn_sink: dict | None = None) -> Value:
    h0 = linear_embed(gt.x, params)
    if cfg.variant == "ea":
        h_data = compute_node_features(h0, gt.masks["data"], params, "data",
                                       cfg, gt.ones, attn_sink)
        h_control = compute_node_features(h0, gt.masks["control"], params,
                                          "control", cfg, gt.ones, attn_sink)
        h_final = ad.add(h_data, h_control)
    else:
        h_final = compute_node_features(h0, gt.masks["union"], params,
                                        "main", cfg, gt.ones, attn_sink)
    return graph_pooling(h_final, params, cfg)


def siamese_similarity(g1: Value, g2: Value, params: ParamStore,
                       cfg: ModelConfig) -> Value:
    def head(a: Value, b: Value) -> Value:
        r = ad.concat_cols([a, b])
        r = ad.leaky_relu(ad.add(ad.matmul(r, params["clf.W1"]),
                                 params["clf.b1"]), cfg.leaky_slope)
        return ad.sigmoid(ad.add(ad.matmul(r, params["clf.W2"]),
                                 params["clf.b2"]))

    if cfg.symmetrize:
        return ad.scale(ad.add(head(g1, g2), head(g2, g1)), 0.5)
    return head(g1, g2)


def pair_score(gt1: GraphTensors, gt2: GraphTensors, params: ParamStore,
               cfg: ModelConfig) -> Value:
    g1 = compute_graph_features(gt1, params, cfg)
    g2 = compute_graph_features(gt2, params, cfg)
    return siamese_similarity(g1, g2, params, cfg)


def bce_loss(scores: list[Value], labels: list[int]) -> Value:
    """Mean binary cross-entropy; scores are clamped to
    [1e-7, 1 - 1e-7] before the logs."""
    if len(scores) != len(labels):
        raise LengthMismatch(f"{len(scores)} scores vs {len(labels)} labels")
    if not scores:
        raise LengthMismatch("empty batch")
    n = len(scores)
    p = ad.clamp(ad.concat_cols(scores), 1e-7, 1.0 - 1e-7)
    y = ad.constant(np.array([[float(v) for v in labels]]))
    one = ad.constant(np.ones((1, n)))
    pos = ad.hadamard(y, ad.log(p))
    neg = ad.hadamard(ad.add(one, ad.scale(y, -1.0)),
                      ad.log(ad.add(one, ad.scale(p, -1.0))))
    total = ad.sum_rows(ad.transpose(ad.add(pos, neg)))
    return ad.scale(total, -1.0 / n)


# --- attention export --------------------------------------------------------

def attention_scores(pdg: Pdg, params: ParamStore,
                     cfg: ModelConfig) -> list[dict]:
    """Per-edge aggregated attention: for edge j -> i, the mean of
    alpha_ij over block-1 heads and rounds, and of beta_ij over block-2
    heads and rounds, taken from the branch that sees the edge."""
    gt = GraphTensors(pdg)
    sink: dict = {}
    with ad.no_grad():
        compute_graph_features(gt, params, cfg, attn_sink=sink)

    def mean_at(branch: str, block: str, row: int, col: int) -> float:
        rounds = sink[branch][block]
        vals = [alpha.data[row, col] for heads in rounds for alpha in heads]
        return float(np.mean(vals))

    edges = sorted(
        [(s, d, "control") for (s, d) in pdg.control_edges]
        + [(s, d, "data") for (s, d, _) in pdg.data_edges]
    )
    out = []
    for src, dst, kind in edges:
        if cfg.variant == "ea":
            branch = "control" if kind == "control" else "data"
        else:
            branch = "main"
        row, col = gt.index[dst], gt.index[src]
        out.append({
            "src": src,
            "dst": dst,
            "kind": kind,
            "attn_block1": mean_at(branch, "block1", row, col),
            "attn_block2": mean_at(branch, "block2", row, col),
        })
    return out


# --- model file --------------------------------------------------------------

def _canon_json(obj) -> str:
    """Canonical JSON: sorted keys, compact separators, floats with 17
    significant digits (exact float64 round-trip)."""
    if isinstance(obj, dict):
        inner = ",".join(
            f"{_canon_json(str(k))}:{_canon_json(v)}"
            for k, v in sorted(obj.items())
        )
        return "{" + inner + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ",".join(_canon_json(v) for v in obj) + "]"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return format(obj, ".17g")
    if isinstance(obj, str):
        import json

        return json.dumps(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def serialize_model(params: ParamStore, cfg: ModelConfig,
                    threshold: float) -> str:
    doc = {
        "config": cfg.to_dict(),
        "threshold": float(threshold),
        "params": {
            name: {
                "rows": p.rows,
                "cols": p.cols,
                "data": [float(v) for v in p.data.ravel()],
            }
            for name, p in params.items()
        },
    }
    return _canon_json(doc)


def deserialize_model(text: str) -> tuple[ModelConfig, float, ParamStore]:
    import json

    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFileError(f"not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ModelFileError("model file must be a JSON object")
    for key in ("config", "threshold", "params"):
        if key not in doc:
            raise ModelFileError(f"missing key {key!r}")
    cfg = ModelConfig.from_dict(doc["config"])
    threshold = doc["threshold"]
    if not isinstance(threshold, (int, float)) or isinstance(threshold, bool):
        raise ModelFileError("threshold must be a number")
    raw = doc["params"]
    if not isinstance(raw, dict):
        raise ModelFileError("params must be an object")
    expected = param_shapes(cfg)
    missing = [n for n, _, _, _ in expected if n not in raw]
    extra = sorted(set(raw) - {n for n, _, _, _ in expected})
    if missing or extra:
        raise ModelFileError(
            f"parameter set mismatch: missing {missing}, unexpected {extra}"
        )
    params = ParamStore()
    for name, rows, cols, _ in expected:
        entry = raw[name]
        if (not isinstance(entry, dict)
                or entry.get("rows") != rows or entry.get("cols") != cols
                or not isinstance(entry.get("data"), list)
                or len(entry["data"]) != rows * cols):
            raise ModelFileError(f"parameter {name!r} malformed or wrong shape")
        data = np.array(entry["data"], dtype=np.float64).reshape(rows, cols)
        params.add(name, data)
    return cfg, float(threshold), params
