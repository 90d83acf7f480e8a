"""API dependence graphs: construction from slices, path extraction, and
budget-limited multi-path selection.

Nodes are the API calls and constant loads of a slice; every other statement
is merged away, leaving direct data-dependence edges between the surviving
nodes. Edges carry the flow-in variables they deliver; nodes carry the
control-dependence label of their source statement. The slicing criterion is
the unique sink.
"""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass, field

from .errors import CycleError, ValidationError
from .ir import canonicalize_signature
from .slicer import ProgramSlice
from .ir import StatementKind

DEFAULT_MAX_LEN = 10
DEFAULT_PATH_BUDGET = 5


@dataclass(frozen=True)
class AdgNode:
    id: int
    token: str  # canonical API signature or constant literal
    control_dep: str = ""


@dataclass(frozen=True)
class AdgEdge:
    src: int
    dst: int
    flow_vars: frozenset[str]


@dataclass
class ApiDependenceGraph:
    nodes: list[AdgNode]
    edges: list[AdgEdge]
    sc: int
    graph_id: str = ""
    _preds: dict[int, list[AdgEdge]] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.validate()
        self._preds = {n.id: [] for n in self.nodes}
        for e in self.edges:
            self._preds[e.dst].append(e)
        for lst in self._preds.values():
            lst.sort(key=lambda e: e.src)

    def validate(self) -> None:
        ids = [n.id for n in self.nodes]
        if len(set(ids)) != len(ids):
            raise ValidationError("duplicate node ids")
        idset = set(ids)
        for e in self.edges:
            if e.src == e.dst:
                raise ValidationError(f"self loop at node {e.src}")
            if e.src not in idset or e.dst not in idset:
                raise ValidationError(f"edge {e.src}->{e.dst} references unknown node")
            if not e.flow_vars:
                raise ValidationError(f"edge {e.src}->{e.dst} carries no flow variables")
        if self.sc not in idset:
            raise ValidationError("sc is not a node")
        if any(e.src == self.sc for e in self.edges):
            raise ValidationError("sc must have no outgoing edges")
        # acyclicity via Kahn's algorithm
        indeg = {i: 0 for i in idset}
        for e in self.edges:
            indeg[e.dst] += 1
        q = deque(i for i, d in indeg.items() if d == 0)
        seen = 0
        succs: dict[int, list[int]] = {i: [] for i in idset}
        for e in self.edges:
            succs[e.src].append(e.dst)
        while q:
            seen += 1
            for j in succs[q.popleft()]:
                indeg[j] -= 1
                if indeg[j] == 0:
                    q.append(j)
        if seen != len(idset):
            raise CycleError("dependence graph contains a directed cycle")
        # every non-sc node must reach sc
        back: dict[int, set[int]] = {i: set() for i in idset}
        for e in self.edges:
            back[e.dst].add(e.src)
        reach = {self.sc}
        stack = [self.sc]
        while stack:
            for p in back[stack.pop()]:
                if p not in reach:
                    reach.add(p)
                    stack.append(p)
        if reach != idset:
            missing = sorted(idset - reach)
            raise ValidationError(f"nodes {missing} have no path to sc")

    def node(self, node_id: int) -> AdgNode:
        return next(n for n in self.nodes if n.id == node_id)

    def predecessors(self, node_id: int) -> list[AdgEdge]:
        """Incoming edges, sorted by source id."""
        return self._preds[node_id]

    def token_of(self, node_id: int) -> str:
        return self.node(node_id).token


@dataclass(frozen=True)
class DependencePath:
    """Forward token sequence t0..t(n-1) ending at the recommendation target."""
    tokens: tuple[str, ...]
    label: str
    node_ids: tuple[int, ...] = ()  # forward order incl. sc, when graph-derived


_NODE_KINDS = (StatementKind.API_CALL, StatementKind.CONST_LOAD)


def build_adg(slice_: ProgramSlice, graph_id: str = "") -> ApiDependenceGraph:
    """Merge non-API statements out of a slice, leaving API/constant nodes
    connected by direct data-dependence edges."""
    if not slice_.statements:
        raise ValidationError("empty slice")
    # provenance: variable -> set of node ids whose values feed it
    prov: dict[str, set[int]] = {}
    nodes: list[AdgNode] = []
    edge_vars: dict[tuple[int, int], set[str]] = {}
    node_id_of_pos: dict[int, int] = {}

    for pos, (_, stmt) in enumerate(slice_.statements):
        if stmt.kind in _NODE_KINDS:
            nid = len(nodes)
            token = stmt.api if stmt.kind is StatementKind.API_CALL else stmt.constant
            nodes.append(AdgNode(nid, canonicalize_signature(token).text,
                                 stmt.control_dep))
            node_id_of_pos[pos] = nid
            for u in sorted(stmt.uses):
                for src in sorted(prov.get(u, ())):
                    if src != nid:
                        edge_vars.setdefault((src, nid), set()).add(u)
            for d in stmt.defs:
                prov[d] = {nid}
        else:
            incoming: set[int] = set()
            for u in stmt.uses:
                incoming |= prov.get(u, set())
            for d in stmt.defs:
                prov[d] = set(incoming)

    crit_pos = len(slice_.statements) - 1
    if crit_pos not in node_id_of_pos:
        raise ValidationError("slice criterion is not an API call")
    sc = node_id_of_pos[crit_pos]

    # prune nodes that cannot reach sc
    back: dict[int, set[int]] = {n.id: set() for n in nodes}
    for (src, dst) in edge_vars:
        back[dst].add(src)
    keep = {sc}
    stack = [sc]
    while stack:
        for p in back[stack.pop()]:
            if p not in keep:
                keep.add(p)
                stack.append(p)
    remap = {old: new for new, old in enumerate(sorted(keep))}
    nodes = [AdgNode(remap[n.id], n.token, n.control_dep)
             for n in nodes if n.id in keep]
    edges = [AdgEdge(remap[s], remap[d], frozenset(vs))
             for (s, d), vs in sorted(edge_vars.items()) if s in keep and d in keep]
    return ApiDependenceGraph(nodes=nodes, edges=edges, sc=remap[sc],
                              graph_id=graph_id)


def _to_path(graph: ApiDependenceGraph, backward_ids: list[int],
             max_len: int) -> DependencePath:
    """backward_ids starts at sc and walks toward sources."""
    forward = tuple(reversed(backward_ids))
    tokens = tuple(graph.token_of(i) for i in forward[:-1])
    return DependencePath(tokens=tokens[-max_len:],
                          label=graph.token_of(graph.sc),
                          node_ids=forward)


def extract_all_paths(graph: ApiDependenceGraph,
                      max_len: int = DEFAULT_MAX_LEN,
                      max_paths: int = 10_000) -> list[DependencePath]:
    """Every maximal backward path from sc to a source node, deterministic
    DFS order by ascending predecessor id, truncated to the last max_len
    tokens before the label."""
    if max_len < 1:
        raise ValidationError("max_len must be >= 1")
    out: list[DependencePath] = []

    def dfs(trail: list[int]) -> None:
        if len(out) >= max_paths:
            return
        preds = graph.predecessors(trail[-1])
        if not preds:
            if len(trail) > 1:
                out.append(_to_path(graph, trail, max_len))
            return
        for e in preds:
            dfs(trail + [e.src])
            if len(out) >= max_paths:
                return

    dfs([graph.sc])
    return out


def _random_walk_complete(graph: ApiDependenceGraph, prefix: list[int],
                          rng: random.Random) -> list[int]:
    trail = list(prefix)
    while True:
        preds = graph.predecessors(trail[-1])
        if not preds:
            return trail
        trail.append(rng.choice(preds).src)


def pick_a_path(graph: ApiDependenceGraph, prefix_node_ids: list[int],
                rng_seed: int, max_len: int = DEFAULT_MAX_LEN) -> DependencePath:
    """Complete a backward prefix (starting at sc) to a source node by a
    seeded random walk over predecessors."""
    if not prefix_node_ids or prefix_node_ids[0] != graph.sc:
        raise ValidationError("prefix must start at sc")
    for a, b in zip(prefix_node_ids, prefix_node_ids[1:]):
        if all(e.src != b for e in graph.predecessors(a)):
            raise ValidationError(f"prefix edge {b}->{a} not in graph")
    trail = _random_walk_complete(graph, list(prefix_node_ids),
                                  random.Random(rng_seed))
    return _to_path(graph, trail, max_len)


def _branch_classes(graph: ApiDependenceGraph, node_id: int):
    """Group a node's incoming edges by (flow_vars, predecessor control_dep);
    representative = lowest source id. Returns list in ascending-source order."""
    seen: dict[tuple[frozenset[str], str], AdgEdge] = {}
    for e in graph.predecessors(node_id):
        key = (e.flow_vars, graph.node(e.src).control_dep)
        if key not in seen:
            seen[key] = e
    return list(seen.values())


def select_paths(graph: ApiDependenceGraph, budget: int = DEFAULT_PATH_BUDGET,
                 rng_seed: int = 0, max_len: int = DEFAULT_MAX_LEN,
                 return_trace: bool = False):
    """Breadth-first backward traversal from sc that accepts, at every
    dequeued node, one predecessor per distinct (flow-in variable set,
    control dependence) class; each accepted branch point is completed to a
    full path by a seeded random walk. Stops once `budget` paths are chosen.

    With return_trace=True also returns the accepted branch points as
    (parent node id, flow_vars, predecessor control_dep) triples.
    """
    if budget < 1:
        raise ValidationError("budget must be >= 1")
    rng = random.Random(rng_seed)
    paths: list[DependencePath] = []
    trace: list[tuple[int, frozenset[str], str]] = []
    queue: deque[tuple[int, list[int]]] = deque([(graph.sc, [graph.sc])])
    while queue and len(paths) < budget:
        node_id, spine = queue.popleft()
        for e in _branch_classes(graph, node_id):
            prefix = spine + [e.src]
            trail = _random_walk_complete(graph, prefix, rng)
            paths.append(_to_path(graph, trail, max_len))
            trace.append((node_id, e.flow_vars, graph.node(e.src).control_dep))
            queue.append((e.src, prefix))
            if len(paths) == budget:
                break
    if return_trace:
        return paths, trace
    return paths


# --- graph file format ------------------------------------------------------
# graph <id>
# node <id> <token> <control_dep|->
# edge <src> <dst> <var,var,...>
# sc <id>
# end

def serialize_adg(graph: ApiDependenceGraph) -> str:
    lines = [f"graph {graph.graph_id or '-'}"]
    for n in sorted(graph.nodes, key=lambda n: n.id):
        lines.append(f"node {n.id} {n.token} {n.control_dep or '-'}")
    for e in sorted(graph.edges, key=lambda e: (e.src, e.dst)):
        lines.append(f"edge {e.src} {e.dst} {','.join(sorted(e.flow_vars))}")
    lines.append(f"sc {graph.sc}")
    lines.append("end")
    return "\n".join(lines) + "\n"


def parse_adgs(text: str) -> list[ApiDependenceGraph]:
    graphs = []
    gid, nodes, edges, sc = "", [], [], None
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if parts[0] == "graph":
            gid, nodes, edges, sc = ("" if parts[1] == "-" else parts[1]), [], [], None
        elif parts[0] == "node":
            cd = "" if parts[3] == "-" else parts[3]
            nodes.append(AdgNode(int(parts[1]), parts[2], cd))
        elif parts[0] == "edge":
            edges.append(AdgEdge(int(parts[1]), int(parts[2]),
                                 frozenset(parts[3].split(","))))
        elif parts[0] == "sc":
            sc = int(parts[1])
        elif parts[0] == "end":
            if sc is None:
                raise ValidationError("graph record missing sc")
            graphs.append(ApiDependenceGraph(nodes=nodes, edges=edges, sc=sc,
                                             graph_id=gid))
        else:
            raise ValidationError(f"unknown graph record line: {line!r}")
    return graphs


def serialize_adgs(graphs: list[ApiDependenceGraph]) -> str:
    return "".join(serialize_adg(g) for g in graphs)


def to_dot(graph: ApiDependenceGraph) -> str:
    """Debug dump in DOT-compatible text."""
    lines = ["digraph adg {"]
    for n in graph.nodes:
        shape = "doublecircle" if n.id == graph.sc else "box"
        cd = f"\\n@{n.control_dep}" if n.control_dep else ""
        lines.append(f'  n{n.id} [label="{n.token}{cd}" shape={shape}];')
    for e in graph.edges:
        lines.append(f'  n{e.src} -> n{e.dst} [label="{",".join(sorted(e.flow_vars))}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
