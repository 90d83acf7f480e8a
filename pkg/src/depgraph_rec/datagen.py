"""Deterministic synthetic-corpus and random-graph generators.

Two structured dataset families drive the comparative experiments:

* low_freq_variant — a high-frequency pattern (prefix_hi, suffix...) -> hi
  target coexists with a rare variant (prefix_lo, same suffix) -> different
  target, so the decisive token sits at the far end of the input.
* similar_api — each instance carries two ambiguous paths drawn from a shared
  pool plus (with some probability) one decisive path whose first token
  determines which of two near-identical targets is correct. Instances come
  in balanced label twins sharing the same ambiguous paths, so no single
  ambiguous path carries any label information.

Plus connected random DAGs used as oracle fodder for the path-selection
equivalence tests.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .adg import AdgEdge, AdgNode, ApiDependenceGraph
from .corpus import CorpusRow
from .errors import ConfigError


@dataclass
class ChallengeSpec:
    kind: str = "low_freq_variant"     # or "similar_api"
    vocab_size: int = 40               # target count of distinct tokens
    n_high: int = 900
    n_low: int = 100
    suffix_len: int = 8
    decisive_rate: float = 1.0         # similar_api only
    n_examples: int = 600              # similar_api instances (made even)
    ambiguous_pool: int = 6            # distinct ambiguous paths
    ambiguous_len: int = 4
    n_distractors: int = 200           # filler records (low_freq_variant)
    seed: int = 0

    def validate(self) -> None:
        if self.kind not in ("low_freq_variant", "similar_api"):
            raise ConfigError(f"unknown challenge kind {self.kind!r}")
        if self.n_high < 1 or self.suffix_len < 1 or self.vocab_size < 8:
            raise ConfigError("counts must be positive and vocab_size >= 8")
        if self.n_low > self.n_high:
            raise ConfigError("n_low must not exceed n_high")
        if not 0.0 <= self.decisive_rate <= 1.0:
            raise ConfigError("decisive_rate must be in [0, 1]")


def _api(name: str) -> str:
    return f"{name}()"


VARIANT_PREFIX = _api("Ctx.setupRare")
COMMON_PREFIX = _api("Ctx.setupCommon")
VARIANT_TARGET = _api("Target.rare")
COMMON_TARGET = _api("Target.common")

SIMILAR_TARGETS = (_api("Out.encodeA"), _api("Out.encodeB"))
DECISIVE_TOKENS = (_api("Src.fromA"), _api("Src.fromB"))


def gen_low_freq_variant(spec: ChallengeSpec) -> list[CorpusRow]:
    """n_high copies of (common prefix, shared suffix) -> common target and
    n_low copies of (rare prefix, same suffix) -> rare target, plus random
    distractor sequences. Group keys are distinct per record."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    suffix = tuple(_api(f"Step.s{i}") for i in range(spec.suffix_len))
    rows = []
    for _ in range(spec.n_high):
        rows.append(CorpusRow("dep_path", "", (COMMON_PREFIX,) + suffix,
                              COMMON_TARGET))
    for _ in range(spec.n_low):
        rows.append(CorpusRow("dep_path", "", (VARIANT_PREFIX,) + suffix,
                              VARIANT_TARGET))
    pool_size = max(spec.vocab_size - spec.suffix_len - 4, 4)
    pool = [_api(f"Lib.f{i}") for i in range(pool_size)]
    for _ in range(spec.n_distractors):
        length = int(rng.integers(3, spec.suffix_len + 2))
        toks = tuple(pool[i] for i in rng.integers(0, pool_size, size=length))
        label = pool[int(rng.integers(0, pool_size))]
        rows.append(CorpusRow("dep_path", "", toks, label))
    order = rng.permutation(len(rows))
    return [CorpusRow(r.origin, f"g{i}", r.tokens, r.label)
            for i, r in enumerate(rows[j] for j in order)]


def is_variant_row(row: CorpusRow) -> bool:
    return row.tokens and row.tokens[0] == VARIANT_PREFIX


@dataclass(frozen=True)
class MultiPathInstance:
    group_key: str
    paths: tuple[tuple[str, ...], ...]
    label: str


def gen_similar_api(spec: ChallengeSpec) -> list[MultiPathInstance]:
    """Balanced label twins: each twin pair shares its two ambiguous paths;
    only the decisive path's first token separates the two targets. With
    probability 1 - decisive_rate the decisive path is withheld, making the
    instance provably ambiguous."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    pool_tokens = [_api(f"Mix.m{i}") for i in range(max(spec.vocab_size - 8, 6))]
    pool = []
    for _ in range(spec.ambiguous_pool):
        pool.append(tuple(
            pool_tokens[i] for i in
            rng.integers(0, len(pool_tokens), size=spec.ambiguous_len)))
    filler = tuple(_api(f"Wrap.w{i}") for i in range(2))
    out = []
    n_pairs = max(spec.n_examples // 2, 1)
    for pair in range(n_pairs):
        p1 = pool[int(rng.integers(0, len(pool)))]
        p2 = pool[int(rng.integers(0, len(pool)))]
        decisive = rng.random() < spec.decisive_rate
        for side in (0, 1):
            label = SIMILAR_TARGETS[side]
            paths = [p1, p2]
            if decisive:
                paths.append((DECISIVE_TOKENS[side],) + filler)
            out.append(MultiPathInstance(f"pair{pair}_{side}",
                                         tuple(paths), label))
    return out


def instances_to_rows(instances: list[MultiPathInstance]) -> list[CorpusRow]:
    """Flatten path-set instances to corpus rows (one row per path, shared
    group key); loaders regroup rows by group key."""
    rows = []
    for inst in instances:
        for p in inst.paths:
            rows.append(CorpusRow("dep_path", inst.group_key, p, inst.label))
    return rows


def rows_to_instances(rows: list[CorpusRow]) -> list[MultiPathInstance]:
    grouped: dict[str, list[CorpusRow]] = {}
    order: list[str] = []
    for r in rows:
        if r.group_key not in grouped:
            grouped[r.group_key] = []
            order.append(r.group_key)
        grouped[r.group_key].append(r)
    return [MultiPathInstance(g, tuple(r.tokens for r in grouped[g]),
                              grouped[g][0].label) for g in order]


def gen_random_dags(count: int, max_nodes: int, seed: int = 0,
                    ) -> list[ApiDependenceGraph]:
    """Connected random DAGs with a unique sink designated as sc. Every
    non-sink node gets at least one forward edge, so all nodes reach the
    sink; edges carry random flow variables, nodes random control tags."""
    if max_nodes < 2:
        raise ConfigError("max_nodes must be >= 2")
    rng = np.random.default_rng(seed)
    flow_pool = ("$r1", "$r2", "$r3")
    cd_pool = ("", "L1", "L2")
    graphs = []
    for gi in range(count):
        n = int(rng.integers(2, max_nodes + 1))
        sink = n - 1
        nodes = [AdgNode(i, _api(f"Api.f{i}"),
                         cd_pool[int(rng.integers(0, len(cd_pool)))])
                 for i in range(n)]
        edges = {}
        for i in range(n - 1):
            j = int(rng.integers(i + 1, n))
            edges[(i, j)] = frozenset(
                {flow_pool[int(rng.integers(0, len(flow_pool)))]})
        extra = int(rng.integers(0, n))
        for _ in range(extra):
            i = int(rng.integers(0, n - 1))
            j = int(rng.integers(i + 1, n))
            edges.setdefault((i, j), frozenset(
                {flow_pool[int(rng.integers(0, len(flow_pool)))]}))
        edge_list = [AdgEdge(s, d, fv) for (s, d), fv in sorted(edges.items())]
        graphs.append(ApiDependenceGraph(nodes=nodes, edges=edge_list,
                                         sc=sink, graph_id=f"dag{gi}"))
    return graphs
