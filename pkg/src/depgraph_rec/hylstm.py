"""HyLSTM sequence model and its multi-path extension.

HyLSTM is a stacked vanilla LSTM with two parallel output heads: the target
head scores only the final hidden state (the recommendation), while the step
head scores every intermediate hidden state against the next token. The
hybrid loss interpolates the two with weight alpha; alpha=1 degenerates to
the token-level baseline, alpha=0 to the sequence-level baseline.

The multi-path model runs one shared HyLSTM over up to `budget` dependence
paths, mean-pools their final hidden states, and classifies the pooled
vector with the target head.
"""

from __future__ import annotations

import os
import time
from dataclasses import dataclass, field

import numpy as np

from .corpus import PAD, UNK, SequenceRecord
from .errors import (ConfigError, EmptyPathSet, EmptySequence, NaNError,
                     ShapeError)
from . import nn
from .nn import (AdamState, DenseParams, LstmLayerParams, adam_step,
                 clip_global_norm, lstm_backward, lstm_forward, sgd_step,
                 softmax)

LOSS_MODES = ("hybrid", "token_level", "sequence_level")


@dataclass
class TrainConfig:
    hidden: int = 256
    layers: int = 2
    lr: float = 0.001
    batch: int = 1024
    epochs: int = 10
    alpha: float = 0.5
    loss_mode: str = "hybrid"
    clip_norm: float = 5.0
    optimizer: str = "adam"  # "sgd" selectable for ablation
    seed: int = 0
    checkpoint_dir: str | None = None

    def validate(self) -> None:
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError("alpha must be in [0, 1]")
        if self.loss_mode not in LOSS_MODES:
            raise ConfigError(f"loss_mode must be one of {LOSS_MODES}")
        if self.hidden < 1 or self.layers < 1 or self.epochs < 0:
            raise ConfigError("hidden, layers must be >= 1 and epochs >= 0")
        if self.lr <= 0 or self.batch < 1:
            raise ConfigError("lr must be positive and batch >= 1")
        if self.optimizer not in ("adam", "sgd"):
            raise ConfigError("optimizer must be 'adam' or 'sgd'")


@dataclass
class PathSetExample:
    """One recommendation instance: 1..budget encoded paths plus the target."""
    paths: tuple[tuple[int, ...], ...]
    label: int
    group_key: str = ""


@dataclass
class TrainReport:
    epoch_losses: list[float] = field(default_factory=list)
    epoch_target_losses: list[float] = field(default_factory=list)
    epoch_step_losses: list[float] = field(default_factory=list)
    wall_time: float = 0.0
    seed: int = 0
    final_checkpoint_path: str | None = None


class HyLstmModel:
    def __init__(self, emb: np.ndarray, lstm: list[LstmLayerParams],
                 head_target: DenseParams, head_steps: DenseParams,
                 loss_mode: str = "hybrid", alpha: float = 0.5,
                 vocab_hash: str = "", emb_init: str = "random"):
        if not 0.0 <= alpha <= 1.0:
            raise ConfigError("alpha must be in [0, 1]")
        self.emb = emb
        self.lstm = lstm
        self.head_target = head_target
        self.head_steps = head_steps
        self.loss_mode = loss_mode
        self.alpha = alpha
        self.vocab_hash = vocab_hash
        self.emb_init = emb_init

    @property
    def vocab_size(self) -> int:
        return self.emb.shape[0]

    @property
    def dim(self) -> int:
        return self.emb.shape[1]

    @classmethod
    def init(cls, vocab_size: int, dim: int, hidden: int, layers: int,
             seed: int = 0, emb_init: np.ndarray | None = None,
             loss_mode: str = "hybrid", alpha: float = 0.5,
             vocab_hash: str = "") -> "HyLstmModel":
        rng = np.random.default_rng(seed)
        if emb_init is not None:
            if emb_init.shape != (vocab_size, dim):
                raise ShapeError(f"embedding init shape {emb_init.shape} != "
                                 f"({vocab_size}, {dim})")
            emb = emb_init.astype(nn.DTYPE).copy()
            provenance = "pretrained"
        else:
            emb = rng.uniform(-0.5 / dim, 0.5 / dim, size=(vocab_size, dim))
            provenance = "random"
        lstm = []
        d_in = dim
        for _ in range(layers):
            lstm.append(LstmLayerParams.init(rng, d_in, hidden))
            d_in = hidden
        head_target = DenseParams.init(rng, hidden, vocab_size)
        head_steps = DenseParams.init(rng, hidden, vocab_size)
        return cls(emb, lstm, head_target, head_steps, loss_mode, alpha,
                   vocab_hash, provenance)

    def params(self) -> dict[str, np.ndarray]:
        out = {"emb": self.emb, "w1": self.head_target.w, "b1": self.head_target.b,
               "w2": self.head_steps.w, "b2": self.head_steps.b}
        for i, p in enumerate(self.lstm):
            out[f"lstm{i}.w_x"] = p.w_x
            out[f"lstm{i}.w_h"] = p.w_h
            out[f"lstm{i}.b"] = p.b
        return out

    def save(self, path) -> None:
        manifest = {"loss_mode": self.loss_mode, "alpha": self.alpha,
                    "vocab_hash": self.vocab_hash, "emb_init": self.emb_init,
                    "layers": len(self.lstm),
                    "hidden": self.lstm[0].hidden_size,
                    "dim": self.dim, "vocab_size": self.vocab_size}
        nn.save_checkpoint(path, self.params(), manifest)

    @classmethod
    def load(cls, path) -> "HyLstmModel":
        blocks, manifest = nn.load_checkpoint(path)
        layers = int(manifest.get("layers", 1))
        lstm = [LstmLayerParams(blocks[f"lstm{i}.w_x"], blocks[f"lstm{i}.w_h"],
                                blocks[f"lstm{i}.b"]) for i in range(layers)]
        return cls(blocks["emb"], lstm,
                   DenseParams(blocks["w1"], blocks["b1"]),
                   DenseParams(blocks["w2"], blocks["b2"]),
                   manifest.get("loss_mode", "hybrid"),
                   float(manifest.get("alpha", 0.5)),
                   manifest.get("vocab_hash", ""),
                   manifest.get("emb_init", "random"))


def hylstm_forward(model: HyLstmModel, tokens) :
    """Forward one sequence. Returns (o, s, h_final):
    o = target-head distribution, s = (n, V) per-step distributions,
    h_final = top-layer hidden state at the last timestep."""
    ids = np.asarray(tokens, dtype=np.intp)
    if ids.ndim != 1 or ids.size == 0:
        raise EmptySequence("token sequence must be non-empty")
    x = model.emb[ids][:, None, :]
    h_top, _ = lstm_forward(model.lstm, x)
    h = h_top[:, 0, :]                     # (n, hidden)
    s = softmax(h @ model.head_steps.w + model.head_steps.b)
    o = softmax(h[-1] @ model.head_target.w + model.head_target.b)
    return o, s, h[-1]


def hybrid_loss(o: np.ndarray, s: np.ndarray, step_targets, target: int,
                alpha: float) -> float:
    """alpha-weighted interpolation of the target cross entropy and the mean
    per-step cross entropy. alpha=1 keeps only the target term, alpha=0 only
    the mean step term."""
    if not 0.0 <= alpha <= 1.0:
        raise ConfigError("alpha must be in [0, 1]")
    s = np.atleast_2d(np.asarray(s, dtype=float))
    step_targets = list(step_targets)
    if s.shape[0] != len(step_targets):
        raise ShapeError("one step target per step distribution required")
    target_term = -np.log(o[target])
    step_term = -np.mean([np.log(s[i][t]) for i, t in enumerate(step_targets)])
    return float(alpha * target_term + (1.0 - alpha) * step_term)


def step_targets_for(tokens, label: int) -> tuple[int, ...]:
    """Next-token targets: position j is scored against token j+1; the last
    position is scored against the recommendation target."""
    toks = list(tokens)
    return tuple(toks[1:] + [label])


def multi_forward(model: HyLstmModel, paths) -> np.ndarray:
    """Mean-pool the final hidden states of 1..k paths and classify the
    pooled vector with the target head. k=1 reduces exactly to the
    single-path target distribution."""
    paths = list(paths)
    if not paths:
        raise EmptyPathSet("need at least one path")
    finals = []
    for p in paths:
        ids = np.asarray(p, dtype=np.intp)
        if ids.size == 0:
            raise EmptySequence("paths must be non-empty")
        x = model.emb[ids][:, None, :]
        h_top, _ = lstm_forward(model.lstm, x)
        finals.append(h_top[-1, 0, :])
    pooled = np.mean(finals, axis=0)
    return softmax(pooled @ model.head_target.w + model.head_target.b)


def recommend(model: HyLstmModel, tokens_or_paths, k: int = 1,
              multi: bool = False) -> list[int]:
    """Top-k token ids by output probability; PAD/UNK excluded, ties broken
    by ascending token id. Sequence-level models read the final step head."""
    if multi:
        probs = multi_forward(model, tokens_or_paths)
    else:
        o, s, _ = hylstm_forward(model, tokens_or_paths)
        probs = s[-1] if model.loss_mode == "sequence_level" else o
    order = sorted((i for i in range(len(probs)) if i not in (PAD, UNK)),
                   key=lambda i: (-probs[i], i))
    return order[:k]


# --- training engine --------------------------------------------------------

def _zero_grads(model: HyLstmModel) -> dict[str, np.ndarray]:
    return {k: np.zeros_like(v) for k, v in model.params().items()}


def loss_and_grads(model: HyLstmModel, examples: list[PathSetExample],
                   mode: str, alpha: float):
    """Mean loss over a batch of examples and exact gradients.

    mode: "hybrid" | "token_level" | "sequence_level" | "multi".
    token_level and multi share the target-head-only loss (multi pools over
    k paths; token_level is the k=1 case). hybrid/sequence_level additionally
    (or exclusively) score every step with the step head.
    """
    if mode == "token_level" or mode == "multi":
        a = 1.0
    elif mode == "sequence_level":
        a = 0.0
    else:
        a = alpha
    n_ex = len(examples)
    if n_ex == 0:
        raise ConfigError("empty batch")

    flat: list[tuple[int, tuple[int, ...]]] = []
    for ei, ex in enumerate(examples):
        if not ex.paths:
            raise EmptyPathSet(f"example {ei} has no paths")
        for p in ex.paths:
            if len(p) == 0:
                raise EmptySequence(f"example {ei} contains an empty path")
            flat.append((ei, p))
    groups: dict[int, list[int]] = {}
    for fi, (_, p) in enumerate(flat):
        groups.setdefault(len(p), []).append(fi)

    grads = _zero_grads(model)
    fwd = {}  # group length -> (ids, cache, h_top)
    finals = [None] * len(flat)
    step_loss_total = 0.0

    w2, b2 = model.head_steps.w, model.head_steps.b
    for length, fidxs in groups.items():
        ids = np.array([flat[fi][1] for fi in fidxs], dtype=np.intp)  # (B, L)
        x = model.emb[ids].transpose(1, 0, 2)                         # (L, B, d)
        h_top, cache = lstm_forward(model.lstm, x)
        fwd[length] = (fidxs, ids, cache, h_top)
        for j, fi in enumerate(fidxs):
            finals[fi] = h_top[-1, j, :]

    # target head over pooled final hidden states
    pooled = np.empty((n_ex, model.lstm[-1].hidden_size))
    k_paths = np.empty(n_ex)
    path_of_ex: dict[int, list[int]] = {}
    for fi, (ei, _) in enumerate(flat):
        path_of_ex.setdefault(ei, []).append(fi)
    for ei in range(n_ex):
        vecs = [finals[fi] for fi in path_of_ex[ei]]
        pooled[ei] = np.mean(vecs, axis=0)
        k_paths[ei] = len(vecs)

    w1, b1 = model.head_target.w, model.head_target.b
    logits1 = pooled @ w1 + b1
    probs1 = softmax(logits1)
    labels = np.array([ex.label for ex in examples])
    target_losses = -np.log(probs1[np.arange(n_ex), labels])
    target_loss = float(np.mean(target_losses))

    d_final = [np.zeros_like(finals[0]) for _ in range(len(flat))]
    if a > 0.0:
        d_logits1 = probs1.copy()
        d_logits1[np.arange(n_ex), labels] -= 1.0
        d_logits1 *= a / n_ex
        grads["w1"] += pooled.T @ d_logits1
        grads["b1"] += d_logits1.sum(axis=0)
        d_pooled = d_logits1 @ w1.T
        for ei in range(n_ex):
            share = d_pooled[ei] / k_paths[ei]
            for fi in path_of_ex[ei]:
                d_final[fi] += share

    use_steps = a < 1.0 and mode in ("hybrid", "sequence_level")
    for length, (fidxs, ids, cache, h_top) in fwd.items():
        L, B, _ = h_top.shape
        d_h_top = np.zeros_like(h_top)
        if use_steps:
            logits2 = h_top @ w2 + b2                     # (L, B, V)
            probs2 = softmax(logits2)
            tgt = np.empty((L, B), dtype=np.intp)
            for j, fi in enumerate(fidxs):
                ei, p = flat[fi]
                tgt[:, j] = step_targets_for(p, examples[ei].label)
            li, bi = np.meshgrid(np.arange(L), np.arange(B), indexing="ij")
            picked = probs2[li, bi, tgt]
            step_loss_total += float(-np.log(picked).sum() / length)
            d_logits2 = probs2
            d_logits2[li, bi, tgt] -= 1.0
            d_logits2 *= (1.0 - a) / (length * n_ex)
            grads["w2"] += np.einsum("lbh,lbv->hv", h_top, d_logits2)
            grads["b2"] += d_logits2.sum(axis=(0, 1))
            d_h_top += d_logits2 @ w2.T
        for j, fi in enumerate(fidxs):
            d_h_top[-1, j, :] += d_final[fi]
        layer_grads, d_x = lstm_backward(model.lstm, cache, d_h_top)
        for i, (d_w_x, d_w_h, d_b) in enumerate(layer_grads):
            grads[f"lstm{i}.w_x"] += d_w_x
            grads[f"lstm{i}.w_h"] += d_w_h
            grads[f"lstm{i}.b"] += d_b
        np.add.at(grads["emb"], ids.T, d_x)

    step_loss = step_loss_total / n_ex if use_steps else 0.0
    total = a * target_loss + (1.0 - a) * step_loss if use_steps else \
        (a * target_loss if a > 0 else 0.0)
    if mode in ("token_level", "multi"):
        total = target_loss
    return {"total": total, "target": target_loss, "step": step_loss}, grads


def _train(model: HyLstmModel, examples: list[PathSetExample], cfg: TrainConfig,
           mode: str) -> TrainReport:
    cfg.validate()
    if not examples:
        raise ConfigError("no training examples")
    rng = np.random.default_rng(cfg.seed)
    state = AdamState()
    report = TrainReport(seed=cfg.seed)
    t0 = time.perf_counter()
    idx = np.arange(len(examples))
    for epoch in range(cfg.epochs):
        rng.shuffle(idx)
        sums = {"total": 0.0, "target": 0.0, "step": 0.0}
        n_batches = 0
        for start in range(0, len(idx), cfg.batch):
            batch = [examples[i] for i in idx[start:start + cfg.batch]]
            losses, grads = loss_and_grads(model, batch, mode, cfg.alpha)
            if not np.isfinite(losses["total"]):
                raise NaNError(f"loss became non-finite at epoch {epoch}")
            clip_global_norm(grads, cfg.clip_norm)
            if cfg.optimizer == "adam":
                adam_step(model.params(), grads, state, cfg.lr)
            else:
                sgd_step(model.params(), grads, cfg.lr)
            for k in sums:
                sums[k] += losses[k]
            n_batches += 1
        report.epoch_losses.append(sums["total"] / n_batches)
        report.epoch_target_losses.append(sums["target"] / n_batches)
        report.epoch_step_losses.append(sums["step"] / n_batches)
        if cfg.checkpoint_dir:
            os.makedirs(cfg.checkpoint_dir, exist_ok=True)
            path = f"{cfg.checkpoint_dir}/epoch{epoch:03d}.ckpt"
            model.save(path)
            report.final_checkpoint_path = path
    report.wall_time = time.perf_counter() - t0
    return report


def train_single_path(model: HyLstmModel, records: list[SequenceRecord],
                      cfg: TrainConfig) -> TrainReport:
    """Train on single dependence paths with the configured loss mode."""
    examples = [PathSetExample((r.tokens,), r.label, r.group_key)
                for r in records]
    model.loss_mode = cfg.loss_mode
    model.alpha = cfg.alpha
    return _train(model, examples, cfg, cfg.loss_mode)


def train_multi_hylstm(model: HyLstmModel, examples: list[PathSetExample],
                       cfg: TrainConfig) -> TrainReport:
    """Jointly fine-tune the shared LSTM, both heads and the embedding on
    path sets; the loss is the cross entropy of the pooled prediction."""
    return _train(model, examples, cfg, "multi")
