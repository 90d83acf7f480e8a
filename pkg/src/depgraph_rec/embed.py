"""Skip-gram embeddings with negative sampling over any corpus mode
(bytecode token streams, slices, or dependence paths).

Training is plain SGD with a linearly decaying learning rate; the noise
distribution is the unigram distribution raised to 0.75. Input vectors are
the embedding; output (context) vectors exist only during training.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .corpus import PAD, UNK, Vocabulary
from .errors import ConfigError, NaNError, UnknownToken

NOISE_POWER = 0.75


@dataclass
class SkipGramConfig:
    dim: int = 300
    window: int = 5
    negatives: int = 100
    batch: int = 1024        # pairs between learning-rate refreshes
    epochs: int = 10
    lr: float = 0.025
    min_lr_frac: float = 1e-4
    subsample_threshold: float = 0.0  # token-level; 0 disables
    seed: int = 0

    def validate(self) -> None:
        if self.dim < 1 or self.window < 1 or self.negatives < 1:
            raise ConfigError("dim, window and negatives must all be >= 1")
        if self.epochs < 1 or self.batch < 1 or self.lr <= 0:
            raise ConfigError("epochs, batch and lr must be positive")


@dataclass
class EmbeddingTable:
    vocab: Vocabulary
    in_vecs: np.ndarray   # (V, d)
    out_vecs: np.ndarray  # (V, d)
    mode: str = "dep_path"
    epoch_losses: list[float] = field(default_factory=list)

    @property
    def dim(self) -> int:
        return self.in_vecs.shape[1]

    def vector(self, token: str) -> np.ndarray:
        i = self.vocab.token_to_id.get(token)
        if i is None or i in (PAD, UNK):
            raise UnknownToken(f"token not embedded: {token!r}")
        return self.in_vecs[i]

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            f.write(f"dim={self.dim} vocab={self.vocab.size} "
                    f"mode={self.mode} version=1\n")
            for i, tok in enumerate(self.vocab.id_to_token):
                floats = "\t".join(repr(float(x)) for x in self.in_vecs[i])
                f.write(f"{tok}\t{floats}\n")

    @classmethod
    def load(cls, path) -> "EmbeddingTable":
        with open(path, encoding="utf-8") as f:
            header = dict(kv.split("=") for kv in f.readline().split())
            dim, mode = int(header["dim"]), header.get("mode", "dep_path")
            tokens, rows = [], []
            for line in f:
                parts = line.rstrip("\n").split("\t")
                tokens.append(parts[0])
                rows.append([float(x) for x in parts[1:]])
        in_vecs = np.array(rows, dtype=np.float64)
        if in_vecs.shape[1] != dim:
            raise ConfigError(f"{path}: header dim {dim} != row width {in_vecs.shape[1]}")
        vocab = Vocabulary({t: i for i, t in enumerate(tokens)}, tokens,
                           {t: 0 for t in tokens})
        return cls(vocab, in_vecs, np.zeros_like(in_vecs), mode)


def ns_pair_loss_and_grads(v_c: np.ndarray, u_o: np.ndarray, u_negs: np.ndarray):
    """Negative-sampling loss for one (center, context) pair with k noise
    vectors: -log sigma(u_o.v_c) - sum log sigma(-u_n.v_c).

    Returns (loss, d_v_c, d_u_o, d_u_negs).
    """
    pos = 1.0 / (1.0 + np.exp(-u_o @ v_c))
    neg = 1.0 / (1.0 + np.exp(-(u_negs @ v_c)))
    eps = 1e-12
    loss = -math.log(pos + eps) - float(np.log(1 - neg + eps).sum())
    d_pos = pos - 1.0          # d loss / d (u_o . v_c)
    d_neg = neg                # d loss / d (u_n . v_c)
    d_v_c = d_pos * u_o + d_neg @ u_negs
    d_u_o = d_pos * v_c
    d_u_negs = d_neg[:, None] * v_c[None, :]
    return loss, d_v_c, d_u_o, d_u_negs


def _noise_cdf(vocab: Vocabulary) -> np.ndarray:
    w = np.zeros(vocab.size)
    for tok, i in vocab.token_to_id.items():
        if i != PAD:
            w[i] = max(vocab.counts.get(tok, 0), 1) ** NOISE_POWER
    w[PAD] = 0.0
    cdf = np.cumsum(w)
    return cdf / cdf[-1]


def train_skipgram(sequences: list[tuple[int, ...]], vocab: Vocabulary,
                   config: SkipGramConfig, mode: str = "dep_path") -> EmbeddingTable:
    """Train skip-gram NS embeddings on encoded token sequences.

    Deterministic under config.seed (single-threaded).
    """
    config.validate()
    rng = np.random.default_rng(config.seed)
    V, d = vocab.size, config.dim
    in_vecs = rng.uniform(-0.5 / d, 0.5 / d, size=(V, d))
    out_vecs = np.zeros((V, d))
    cdf = _noise_cdf(vocab)

    total = sum(len(s) for s in sequences)
    if total == 0:
        raise ConfigError("empty corpus")
    keep_prob = np.ones(V)
    if config.subsample_threshold > 0:
        freqs = np.array([max(vocab.counts.get(t, 0), 0) for t in vocab.id_to_token],
                         dtype=np.float64)
        freqs /= max(freqs.sum(), 1.0)
        with np.errstate(divide="ignore"):
            keep_prob = np.minimum(1.0, np.sqrt(config.subsample_threshold / freqs))
        keep_prob[~np.isfinite(keep_prob)] = 1.0

    table = EmbeddingTable(vocab, in_vecs, out_vecs, mode)
    pairs_total_est = max(total * 2 * config.window * config.epochs, 1)
    pairs_done = 0
    lr = config.lr
    for _ in range(config.epochs):
        epoch_loss, epoch_pairs = 0.0, 0
        for seq in sequences:
            ids = [i for i in seq
                   if i != PAD and (keep_prob[i] >= 1.0 or rng.random() < keep_prob[i])]
            for pos, center in enumerate(ids):
                lo = max(0, pos - config.window)
                hi = min(len(ids), pos + config.window + 1)
                for ctx_pos in range(lo, hi):
                    if ctx_pos == pos:
                        continue
                    ctx = ids[ctx_pos]
                    negs = np.searchsorted(cdf, rng.random(config.negatives))
                    loss, d_v, d_uo, d_un = ns_pair_loss_and_grads(
                        in_vecs[center], out_vecs[ctx], out_vecs[negs])
                    in_vecs[center] -= lr * d_v
                    out_vecs[ctx] -= lr * d_uo
                    # scatter-add handles repeated negative ids
                    np.add.at(out_vecs, negs, -lr * d_un)
                    epoch_loss += loss
                    epoch_pairs += 1
                    pairs_done += 1
                    if pairs_done % config.batch == 0:
                        frac = 1.0 - pairs_done / pairs_total_est
                        lr = config.lr * max(frac, config.min_lr_frac)
        if not np.all(np.isfinite(in_vecs)) or not np.all(np.isfinite(out_vecs)):
            raise NaNError("embedding diverged to non-finite values")
        table.epoch_losses.append(epoch_loss / max(epoch_pairs, 1))
    return table


def nearest_neighbors(table: EmbeddingTable, token: str,
                      k: int) -> list[tuple[str, float]]:
    """Top-k neighbors by cosine over input vectors; excludes the query and
    the PAD/UNK specials; ties broken by token id."""
    qid = table.vocab.token_to_id.get(token)
    if qid is None or qid in (PAD, UNK):
        raise UnknownToken(f"unknown token {token!r}")
    q = table.in_vecs[qid]
    norms = np.linalg.norm(table.in_vecs, axis=1)
    qn = np.linalg.norm(q)
    with np.errstate(invalid="ignore", divide="ignore"):
        cos = (table.in_vecs @ q) / (norms * qn)
    cos = np.nan_to_num(cos, nan=-1.0)
    cands = [(float(cos[i]), i) for i in range(table.vocab.size)
             if i not in (PAD, UNK, qid)]
    cands.sort(key=lambda t: (-t[0], t[1]))
    return [(table.vocab.id_to_token[i], c) for c, i in cands[:k]]


def cosine(table: EmbeddingTable, a: str, b: str) -> float:
    va, vb = table.vector(a), table.vector(b)
    return float(va @ vb / (np.linalg.norm(va) * np.linalg.norm(vb)))
