"""Initialization, Adam, the training loop, threshold moving and metrics.

Training is fully deterministic for a (seed, dataset, config) triple:
one seeded generator drives initialization and every epoch's shuffle,
and gradients are reduced in fixed pair order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import ParamStore
from .dataflow import build_pdg
from .ir import lower_source
from .model import (GraphTensors, ModelConfig, bce_loss, compute_node_features,
                    graph_pooling, linear_embed, pair_score, param_shapes,
                    siamese_similarity)


class EmptyDataset(Exception):
    pass


class SingleClass(Exception):
    pass


DEFAULT_GRID = (0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.0002
    batch_size: int = 50
    epochs: int = 300
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    threshold_grid: tuple[float, ...] = DEFAULT_GRID
    train_frac: float = 0.7
    val_frac: float = 0.15
    early_stop_patience: int = 10

    def validate(self) -> None:
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        grid = self.threshold_grid
        if not grid or any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("threshold_grid must be strictly increasing")
        if grid[0] < 0 or grid[-1] > 1:
            raise ValueError("threshold_grid must lie within [0, 1]")
        if not (0 < self.train_frac <= 1) or self.val_frac < 0 \
                or self.train_frac + self.val_frac > 1:
            raise ValueError("invalid split fractions")


@dataclass(frozen=True)
class EvalReport:
    precision: float
    recall: float
    f1: float
    auc: float | None
    threshold: float
    tp: int
    fp: int
    tn: int
    fn: int


def kaiming_uniform_init(rows: int, cols: int, slope: float,
                         rng: np.random.Generator) -> np.ndarray:
    """Uniform(-bound, bound) with bound = gain * sqrt(3 / fan_in),
    gain = sqrt(2 / (1 + slope^2)), fan_in = rows."""
    gain = np.sqrt(2.0 / (1.0 + slope * slope))
    bound = gain * np.sqrt(3.0 / rows)
    return rng.uniform(-bound, bound, size=(rows, cols))


def init_params(cfg: ModelConfig, rng) -> ParamStore:
    """Fresh parameters: Kaiming-uniform weights, zero biases, and the
    initial LSTM cell row ~ N(0, 0.01)."""
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    store = ParamStore()
    for name, rows, cols, kind in param_shapes(cfg):
        if kind == "weight":
            data = kaiming_uniform_init(rows, cols, cfg.leaky_slope, rng)
        elif kind == "bias":
            data = np.zeros((rows, cols))
        elif kind == "cell":
            data = rng.normal(0.0, 0.1, size=(rows, cols))
        else:
            raise ValueError(f"unknown init class {kind!r}")
        store.add(name, data)
    return store


class AdamState:
    def __init__(self, params: ParamStore):
        self.m = {name: np.zeros_like(p.data) for name, p in params.items()}
        self.v = {name: np.zeros_like(p.data) for name, p in params.items()}
        self.t = 0


def adam_step(params: ParamStore, grads: dict[str, np.ndarray],
              state: AdamState, cfg: TrainConfig) -> None:
    """Standard bias-corrected Adam update, in place."""
    state.t += 1
    b1, b2 = cfg.beta1, cfg.beta2
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.data.shape:
            raise ad.ShapeError(f"{p.data.shape}", f"{g.shape}")
        state.m[name] = b1 * state.m[name] + (1 - b1) * g
        state.v[name] = b2 * state.v[name] + (1 - b2) * g * g
        m_hat = state.m[name] / (1 - b1 ** state.t)
        v_hat = state.v[name] / (1 - b2 ** state.t)
        p.data -= cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.eps)


# --- metrics -----------------------------------------------------------------

def threshold_moving(scores: list[float], labels: list[int],
                     grid: tuple[float, ...] = DEFAULT_GRID) -> float:
    """Grid value maximizing F1 of (score >= eps -> clone); ties break
    toward the smallest eps."""
    if not scores:
        raise EmptyDataset("threshold moving needs a nonempty validation set")
    best_eps = grid[0]
    best_f1 = -1.0
    for eps in grid:
        f1 = evaluate(scores, labels, eps).f1
        if f1 > best_f1:
            best_f1 = f1
            best_eps = eps
    return best_eps


def evaluate(scores: list[float], labels: list[int],
             threshold: float) -> EvalReport:
    """Confusion counts and P/R/F1 at the threshold; AUC is included
    when both classes are present."""
    if not scores:
        raise EmptyDataset("cannot evaluate an empty score set")
    if len(scores) != len(labels):
        raise EmptyDataset("scores and labels differ in length")
    tp = fp = tn = fn = 0
    for s, y in zip(scores, labels):
        predicted = s >= threshold
        if predicted and y == 1:
            tp += 1
        elif predicted and y == 0:
            fp += 1
        elif not predicted and y == 0:
            tn += 1
        else:
            fn += 1
    precision = tp / (tp + fp) if tp + fp > 0 else 0.0
    recall = tp / (tp + fn) if tp + fn > 0 else 0.0
    f1 = (2 * precision * recall / (precision + recall)
          if precision + recall > 0 else 0.0)
    auc = None
    if 0 < sum(labels) < len(labels):
        auc = roc_auc(scores, labels)
    return EvalReport(precision, recall, f1, auc, threshold, tp, fp, tn, fn)


def roc_auc(scores: list[float], labels: list[int]) -> float:
    """AUC via average ranks, which equals pairwise concordance with 0.5
    credit for tied scores."""
    n_pos = sum(1 for y in labels if y == 1)
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClass("AUC needs both classes present")
    order = sorted(range(len(scores)), key=lambda i: scores[i])
    ranks = [0.0] * len(scores)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and scores[order[j + 1]] == scores[order[i]]:
            j += 1
        avg_rank = (i + j) / 2.0 + 1.0  # 1-based, averaged over the tie group
        for k in range(i, j + 1):
            ranks[order[k]] = avg_rank
        i = j + 1
    rank_sum = sum(r for r, y in zip(ranks, labels) if y == 1)
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def roc_points(scores: list[float], labels: list[int]
               ) -> list[tuple[float, float, float]]:
    """(threshold, tpr, fpr) rows, thresholds descending from 1.0 to 0.0
    through every distinct score; classification rule score >= t."""
    n_pos = sum(1 for y in labels if y == 1)
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClass("ROC needs both classes present")
    thresholds = sorted({1.0, 0.0, *scores}, reverse=True)
    rows = []
    for t in thresholds:
        tp = sum(1 for s, y in zip(scores, labels) if s >= t and y == 1)
        fp = sum(1 for s, y in zip(scores, labels) if s >= t and y == 0)
        rows.append((t, tp / n_pos, fp / n_neg))
    return rows


def roc_csv(points: list[tuple[float, float, float]]) -> str:
    lines = ["threshold,tpr,fpr"]
    for t, tpr, fpr in points:
        lines.append(f"{t:.17g},{tpr:.17g},{fpr:.17g}")
    return "\n".join(lines) + "\n"


# --- dataset plumbing --------------------------------------------------------

@dataclass
class PreparedPair:
    """A pair ready for the model: graph tensors plus the clone label."""

    a: GraphTensors
    b: GraphTensors
    label: int


def prepare_pair(source_a: str, source_b: str, label: int) -> PreparedPair:
    gt_a = GraphTensors(build_pdg(lower_source(source_a)))
    gt_b = GraphTensors(build_pdg(lower_source(source_b)))
    return PreparedPair(gt_a, gt_b, int(label))


def split_indices(n: int, seed: int,
                  fracs: tuple[float, float] = (0.7, 0.15)
                  ) -> tuple[list[int], list[int], list[int]]:
    """Deterministic train/val/test index split by seeded shuffle; the
    test share is the remainder."""
    order = list(np.random.default_rng(seed).permutation(n))
    n_train = int(n * fracs[0])
    n_val = int(n * fracs[1])
    train = sorted(int(i) for i in order[:n_train])
    val = sorted(int(i) for i in order[n_train:n_train + n_val])
    test = sorted(int(i) for i in order[n_train + n_val:])
    return train, val, test


# cap on stacked nodes per forward: bounds the n^2 attention masks
_STACK_NODE_LIMIT = 256


class _GraphStack:
    """Several graphs stacked block-diagonally so one forward covers them
    all. Attention masks are zero across graph boundaries, so every
    per-graph value matches a separate forward; only Python op overhead
    is amortized."""

    __slots__ = ("x", "masks", "ones", "spans")

    def __init__(self, graphs: list[GraphTensors]):
        sizes = [g.x.rows for g in graphs]
        total = sum(sizes)
        self.masks = {}
        for kind in ("control", "data", "union"):
            m = np.zeros((total, total))
            at = 0
            for g, n in zip(graphs, sizes):
                m[at:at + n, at:at + n] = g.masks[kind]
                at += n
            self.masks[kind] = m
        self.x = ad.constant(np.vstack([g.x.data for g in graphs]))
        self.ones = ad.constant(np.ones((total, 1)))
        self.spans = []
        at = 0
        for n in sizes:
            self.spans.append((at, at + n))
            at += n


def _stacked_scores(batch: list[PreparedPair], params: ParamStore,
                    cfg: ModelConfig) -> list:
    stack = _GraphStack([g for p in batch for g in (p.a, p.b)])
    h0 = linear_embed(stack.x, params)
    if cfg.variant == "ea":
        h_final = ad.add(
            compute_node_features(h0, stack.masks["data"], params, "data",
                                  cfg, stack.ones),
            compute_node_features(h0, stack.masks["control"], params,
                                  "control", cfg, stack.ones))
    else:
        h_final = compute_node_features(h0, stack.masks["union"], params,
                                        "main", cfg, stack.ones)
    embeds = [graph_pooling(ad.row_slice(h_final, s, e), params, cfg)
              for s, e in stack.spans]
    return [siamese_similarity(embeds[2 * j], embeds[2 * j + 1], params, cfg)
            for j in range(len(batch))]


def batch_scores(batch: list[PreparedPair], params: ParamStore,
                 cfg: ModelConfig) -> list:
    """Scores for a batch of pairs, computed over node-capped graph
    stacks; equivalent to pair_score on each pair."""
    out = []
    chunk: list[PreparedPair] = []
    chunk_nodes = 0
    for p in batch:
        n = p.a.x.rows + p.b.x.rows
        if chunk and chunk_nodes + n > _STACK_NODE_LIMIT:
            out.extend(_stacked_scores(chunk, params, cfg))
            chunk, chunk_nodes = [], 0
        chunk.append(p)
        chunk_nodes += n
    if chunk:
        out.extend(_stacked_scores(chunk, params, cfg))
    return out


def eval_scores(pairs: list[PreparedPair], params: ParamStore,
                cfg: ModelConfig) -> list[float]:
    with ad.no_grad():
        return [float(s.data[0, 0])
                for s in batch_scores(pairs, params, cfg)]


@dataclass
class TrainResult:
    params: ParamStore
    model_cfg: ModelConfig
    threshold: float
    history: list[tuple[int, float, float]] = field(default_factory=list)
    split: tuple[list[int], list[int], list[int]] = ([], [], [])
    epochs_run: int = 0


def history_csv(history: list[tuple[int, float, float]]) -> str:
    lines = ["epoch,loss,val_f1"]
    for epoch, loss, val_f1 in history:
        lines.append(f"{epoch},{loss:.17g},{val_f1:.17g}")
    return "\n".join(lines) + "\n"


def train(dataset: list[PreparedPair], cfg: TrainConfig,
          model_cfg: ModelConfig,
          split: tuple[list[int], list[int], list[int]] | None = None
          ) -> TrainResult:
    """Mini-batch Adam training with per-epoch validation F1.

    The split defaults to a seeded shuffle with cfg's fractions. When
    the validation share is empty (overfit runs), the training split
    stands in for validation and threshold selection. Stops early once
    validation F1 has been 1.0 for early_stop_patience consecutive
    epochs.
    """
    cfg.validate()
    model_cfg.validate()
    if not dataset:
        raise EmptyDataset("no training pairs")
    if split is None:
        split = split_indices(len(dataset), cfg.seed,
                              (cfg.train_frac, cfg.val_frac))
    train_idx, val_idx, _ = split
    train_set = [dataset[i] for i in train_idx]
    if not train_set:
        raise EmptyDataset("training split is empty")
    val_set = [dataset[i] for i in val_idx] if val_idx else train_set
    val_labels = [p.label for p in val_set]

    rng = np.random.default_rng(cfg.seed)
    params = init_params(model_cfg, rng)
    state = AdamState(params)
    history: list[tuple[int, float, float]] = []
    streak = 0
    epochs_run = 0
    for epoch in range(1, cfg.epochs + 1):
        epochs_run = epoch
        order = [int(i) for i in rng.permutation(len(train_set))]
        loss_sum = 0.0
        for start in range(0, len(order), cfg.batch_size):
            batch = [train_set[i] for i in order[start:start + cfg.batch_size]]
            params.zero_grads()
            scores = batch_scores(batch, params, model_cfg)
            loss = bce_loss(scores, [p.label for p in batch])
            grads = ad.backward(loss, params)
            adam_step(params, grads, state, cfg)
            loss_sum += float(loss.data[0, 0]) * len(batch)
        epoch_loss = loss_sum / len(order)
        val_scores = eval_scores(val_set, params, model_cfg)
        eps = threshold_moving(val_scores, val_labels, cfg.threshold_grid)
        val_f1 = evaluate(val_scores, val_labels, eps).f1
        history.append((epoch, epoch_loss, val_f1))
        streak = streak + 1 if val_f1 >= 1.0 else 0
        if streak >= cfg.early_stop_patience:
            break
    final_scores = eval_scores(val_set, params, model_cfg)
    threshold = threshold_moving(final_scores, val_labels, cfg.threshold_grid)
    return TrainResult(params, model_cfg, threshold, history, split,
                       epochs_run)
