"""Corpus and dataset management: record IO, vocabulary with per-category
frequency thresholds, sequence-level subsampling, group-aware splits, and the
next-token set index behind the in-set accuracy metric.

Corpus file: one record per line, tab separated:
    origin_tag <TAB> group_key <TAB> tok tok tok <TAB> label
Vocabulary file: one `token<TAB>id<TAB>count` per line.
"""

from __future__ import annotations

import hashlib
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyVocabulary, FormatError, ValidationError

PAD, UNK = 0, 1
PAD_TOKEN, UNK_TOKEN = "<pad>", "<unk>"

ORIGIN_TAGS = ("bytecode", "slice", "dep_path")

DEFAULT_API_MIN_FREQ = 5       # retained iff count strictly exceeds this
DEFAULT_CONST_MIN_FREQ = 100


@dataclass(frozen=True)
class CorpusRow:
    """Raw-token record as stored on disk."""
    origin: str
    group_key: str
    tokens: tuple[str, ...]
    label: str


@dataclass(frozen=True)
class SequenceRecord:
    """Encoded record: token ids plus the target id."""
    tokens: tuple[int, ...]
    label: int
    origin: str = "dep_path"
    group_key: str = ""


def is_constant_token(token: str) -> bool:
    return token.startswith('"')


@dataclass
class Vocabulary:
    token_to_id: dict[str, int]
    id_to_token: list[str]
    counts: dict[str, int]

    @property
    def size(self) -> int:
        return len(self.id_to_token)

    def encode_token(self, token: str) -> int:
        return self.token_to_id.get(token, UNK)

    def encode(self, tokens) -> tuple[int, ...]:
        return tuple(self.encode_token(t) for t in tokens)

    def decode(self, ids) -> tuple[str, ...]:
        return tuple(self.id_to_token[i] for i in ids)

    def content_hash(self) -> str:
        h = hashlib.sha256()
        for tok in self.id_to_token:
            h.update(tok.encode("utf-8") + b"\n")
        return h.hexdigest()[:16]

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            for i, tok in enumerate(self.id_to_token):
                f.write(f"{tok}\t{i}\t{self.counts.get(tok, 0)}\n")

    @classmethod
    def load(cls, path) -> "Vocabulary":
        id_to_token, counts = [], {}
        with open(path, encoding="utf-8") as f:
            for line in f:
                tok, i, c = line.rstrip("\n").split("\t")
                assert int(i) == len(id_to_token)
                id_to_token.append(tok)
                counts[tok] = int(c)
        return cls({t: i for i, t in enumerate(id_to_token)}, id_to_token, counts)


def build_vocabulary(rows, api_min_freq: int = DEFAULT_API_MIN_FREQ,
                     const_min_freq: int = DEFAULT_CONST_MIN_FREQ,
                     reserved_constants: tuple[str, ...] = ()) -> Vocabulary:
    """Count tokens (sequence tokens and labels) and retain those whose count
    strictly exceeds the threshold for their category. Reserved constants are
    always retained."""
    counts: Counter[str] = Counter()
    for row in rows:
        counts.update(row.tokens)
        counts[row.label] += 1
    retained = []
    for tok, c in counts.items():
        if is_constant_token(tok):
            if c > const_min_freq or tok in reserved_constants:
                retained.append(tok)
        elif c > api_min_freq:
            retained.append(tok)
    if not retained:
        raise EmptyVocabulary("no token survives the frequency thresholds")
    retained.sort(key=lambda t: (-counts[t], t))
    id_to_token = [PAD_TOKEN, UNK_TOKEN] + retained
    vocab_counts = {t: counts.get(t, 0) for t in id_to_token}
    return Vocabulary({t: i for i, t in enumerate(id_to_token)},
                      id_to_token, vocab_counts)


def encode_rows(rows, vocab: Vocabulary, max_len: int = 10) -> list[SequenceRecord]:
    out = []
    for row in rows:
        toks = vocab.encode(row.tokens[-max_len:])
        if not toks:
            continue
        out.append(SequenceRecord(tokens=toks, label=vocab.encode_token(row.label),
                                  origin=row.origin, group_key=row.group_key))
    return out


def subsample_keep_prob(count: int, total: int, threshold: float) -> float:
    """word2vec-style keep probability applied at sequence granularity."""
    if threshold <= 0 or count <= 0:
        return 1.0
    f = count / total
    return min(1.0, math.sqrt(threshold / f))


def subsample_paths(rows: list[CorpusRow], total_target: int,
                    seed: int = 0) -> list[CorpusRow]:
    """Shrink duplicated sequences toward total_target records while keeping
    every distinct sequence at least once. The per-duplicate keep probability
    follows the word2vec subsampling rule with a threshold solved by bisection
    so the expected total matches the target."""
    total = len(rows)
    if total_target > total:
        raise ValidationError("total_target exceeds current record count")
    key = lambda r: (r.tokens, r.label)
    counts = Counter(key(r) for r in rows)
    if total_target == total or len(counts) == total:
        return list(rows)  # nothing to shrink / every sequence unique

    def expected(th: float) -> float:
        return sum(1 + (c - 1) * subsample_keep_prob(c, total, th)
                   for c in counts.values())

    lo, hi = 0.0, 1.0
    if expected(hi) < total_target:
        th = hi
    else:
        for _ in range(80):
            mid = (lo + hi) / 2
            if expected(mid) < total_target:
                lo = mid
            else:
                hi = mid
        th = hi
    rng = np.random.default_rng(seed)
    seen: set = set()
    kept = []
    for row in rows:
        k = key(row)
        if k not in seen:
            seen.add(k)
            kept.append(row)
        elif rng.random() < subsample_keep_prob(counts[k], total, th):
            kept.append(row)
    return kept


def split_dataset(records, train_frac: float, seed: int = 0):
    """Partition records by group_key; all records of a group land on the
    same side. Deterministic under seed."""
    if not 0 < train_frac < 1:
        raise ValidationError("train_frac must be in (0, 1)")
    groups = sorted({r.group_key for r in records})
    rng = np.random.default_rng(seed)
    rng.shuffle(groups)
    n_train = int(round(train_frac * len(groups)))
    n_train = max(1, min(n_train, len(groups) - 1)) if len(groups) > 1 else len(groups)
    train_keys = set(groups[:n_train])
    train = [r for r in records if r.group_key in train_keys]
    test = [r for r in records if r.group_key not in train_keys]
    return train, test


class NextSetIndex:
    """Exact input sequence -> set of next-token ids observed in training."""

    def __init__(self):
        self._index: dict[tuple[int, ...], set[int]] = defaultdict(set)

    def add(self, tokens: tuple[int, ...], label: int) -> None:
        self._index[tuple(tokens)].add(label)

    def get(self, tokens) -> set[int] | None:
        return self._index.get(tuple(tokens))

    def __contains__(self, tokens) -> bool:
        return tuple(tokens) in self._index

    def __len__(self) -> int:
        return len(self._index)

    @property
    def keys(self):
        return self._index.keys()


def build_next_set_index(records) -> NextSetIndex:
    idx = NextSetIndex()
    for r in records:
        idx.add(r.tokens, r.label)
    return idx


# --- corpus file IO ---------------------------------------------------------

def write_corpus(rows, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for row in rows:
            f.write(format_row(row) + "\n")


def format_row(row: CorpusRow) -> str:
    for tok in (*row.tokens, row.label):
        if "\t" in tok or "\n" in tok or " " in tok:
            raise FormatError(f"token contains reserved separator: {tok!r}")
    return "\t".join((row.origin, row.group_key, " ".join(row.tokens), row.label))


def parse_row(line: str) -> CorpusRow:
    parts = line.rstrip("\n").split("\t")
    if len(parts) != 4:
        raise FormatError(f"corpus row needs 4 tab-separated fields: {line!r}")
    origin, group, toks, label = parts
    if origin not in ORIGIN_TAGS:
        raise FormatError(f"unknown origin tag {origin!r}")
    return CorpusRow(origin, group, tuple(toks.split()), label)


def read_corpus(path) -> list[CorpusRow]:
    rows = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            if line.strip():
                rows.append(parse_row(line))
    return rows
