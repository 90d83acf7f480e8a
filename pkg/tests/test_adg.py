"""API dependence graphs: construction, validation, path extraction and
budget-limited selection."""

import pytest

from depgraph_rec.adg import (AdgEdge, AdgNode, ApiDependenceGraph, build_adg,
                              extract_all_paths, parse_adgs, pick_a_path,
                              select_paths, serialize_adg, serialize_adgs,
                              to_dot)
from depgraph_rec.errors import CycleError, ValidationError
from depgraph_rec.ir import parse_program
from depgraph_rec.slicer import SliceCriterion, backward_slice

from oracles import selection_trace_oracle


def diamond():
    nodes = [AdgNode(0, "A.a()"), AdgNode(1, "B.b()"), AdgNode(2, "C.c()"),
             AdgNode(3, "D.d()")]
    edges = [AdgEdge(0, 1, frozenset({"$x"})), AdgEdge(0, 2, frozenset({"$y"})),
             AdgEdge(1, 3, frozenset({"$u"})), AdgEdge(2, 3, frozenset({"$v"}))]
    return ApiDependenceGraph(nodes=nodes, edges=edges, sc=3, graph_id="dia")


def two_variable_sink():
    """Two producers of the same variable plus one producer of another,
    all feeding the sink — one representative per variable class."""
    nodes = [AdgNode(8, "P.one()"), AdgNode(10, "P.two()"),
             AdgNode(13, "Q.other()"), AdgNode(11, "S.sink()")]
    edges = [AdgEdge(8, 11, frozenset({"$r1"})),
             AdgEdge(10, 11, frozenset({"$r1"})),
             AdgEdge(13, 11, frozenset({"$r2"}))]
    return ApiDependenceGraph(nodes=nodes, edges=edges, sc=11)


# --- construction from slices -----------------------------------------------

def test_build_merges_assignments():
    prog = parse_program(
        "func main() {\n"
        '  const s = "k"\n'
        "  api a = A.make(String) s\n"
        "  assign b = a\n"
        "  api B.use(T) b\n"
        "}\n")
    g = build_adg(backward_slice(prog, SliceCriterion("main", 3, frozenset({"b"}))))
    assert [n.token for n in g.nodes] == ['"k"', "A.make(String)", "B.use(T)"]
    assert g.sc == 2
    assert {(e.src, e.dst, e.flow_vars) for e in g.edges} == {
        (0, 1, frozenset({"s"})),
        (1, 2, frozenset({"b"})),  # assignment merged away, provenance kept
    }


def test_build_prunes_nodes_without_flow_to_sink():
    # the branch guard's producer is in the slice (control dependence) but
    # delivers no value to the criterion, so it has no place in the graph
    prog = parse_program(
        "func main() {\n"
        "  api g = Guard.check()\n"
        "  branch L0 g\n"
        "  const v = 1\n"
        "  api A.f(int) v @L0\n"
        "}\n")
    g = build_adg(backward_slice(prog, SliceCriterion("main", 3, frozenset({"v"}))))
    assert [n.token for n in g.nodes] == ['"1"', "A.f(int)"]
    assert g.node(g.sc).control_dep == "L0"
    assert [(e.src, e.dst) for e in g.edges] == [(0, 1)]


def test_build_control_tags_survive():
    prog = parse_program(
        "func main() {\n"
        "  const c = 1\n"
        "  branch L0 c\n"
        "  const v = 2 @L0\n"
        "  api A.f(int) v @L0\n"
        "}\n")
    g = build_adg(backward_slice(prog, SliceCriterion("main", 3, frozenset({"v"}))))
    tags = {n.token: n.control_dep for n in g.nodes}
    assert tags['"2"'] == "L0" and tags["A.f(int)"] == "L0"


# --- validation --------------------------------------------------------------

def test_validate_rejects_bad_graphs():
    n = [AdgNode(0, "A()"), AdgNode(1, "B()")]
    e01 = AdgEdge(0, 1, frozenset({"$v"}))
    with pytest.raises(ValidationError):   # duplicate id
        ApiDependenceGraph(nodes=[AdgNode(0, "A()"), AdgNode(0, "B()")],
                           edges=[], sc=0)
    with pytest.raises(ValidationError):   # self loop
        ApiDependenceGraph(nodes=n, edges=[AdgEdge(1, 1, frozenset({"$v"}))], sc=1)
    with pytest.raises(ValidationError):   # empty flow vars
        ApiDependenceGraph(nodes=n, edges=[AdgEdge(0, 1, frozenset())], sc=1)
    with pytest.raises(ValidationError):   # unknown endpoint
        ApiDependenceGraph(nodes=n, edges=[AdgEdge(0, 7, frozenset({"$v"}))], sc=1)
    with pytest.raises(ValidationError):   # sc has an outgoing edge
        ApiDependenceGraph(nodes=n, edges=[e01], sc=0)
    with pytest.raises(ValidationError):   # node 0 cannot reach sc
        ApiDependenceGraph(nodes=n, edges=[], sc=1)
    with pytest.raises(CycleError):
        ApiDependenceGraph(
            nodes=[AdgNode(0, "A()"), AdgNode(1, "B()"), AdgNode(2, "C()")],
            edges=[AdgEdge(0, 1, frozenset({"$v"})),
                   AdgEdge(1, 0, frozenset({"$v"})),
                   AdgEdge(1, 2, frozenset({"$v"}))], sc=2)


# --- path extraction ---------------------------------------------------------

def test_extract_all_paths_diamond():
    paths = extract_all_paths(diamond())
    assert [p.tokens for p in paths] == [("A.a()", "B.b()"), ("A.a()", "C.c()")]
    assert all(p.label == "D.d()" for p in paths)
    assert [p.node_ids for p in paths] == [(0, 1, 3), (0, 2, 3)]


def test_extract_truncates_to_last_tokens():
    paths = extract_all_paths(diamond(), max_len=1)
    assert [p.tokens for p in paths] == [("B.b()",), ("C.c()",)]
    # node ids keep the full walk even when tokens are truncated
    assert paths[0].node_ids == (0, 1, 3)


def test_extract_respects_max_paths():
    assert len(extract_all_paths(diamond(), max_paths=1)) == 1


# --- path selection ----------------------------------------------------------

def test_select_one_representative_per_variable_class():
    g = two_variable_sink()
    paths, trace = select_paths(g, return_trace=True)
    first_hops = {t[1] for t in trace if t[0] == 11}
    # one of the two $r1 producers plus the $r2 producer
    chosen = {p.node_ids[0] for p in paths}
    assert chosen & {8, 10} and 13 in chosen
    assert first_hops == {frozenset({"$r1"}), frozenset({"$r2"})}
    assert len(paths) == 2


def test_select_budget_limits_output():
    g = diamond()
    assert len(select_paths(g, budget=1)) == 1
    assert len(select_paths(g, budget=2)) == 2
    with pytest.raises(ValidationError):
        select_paths(g, budget=0)


def test_select_is_deterministic():
    g = diamond()
    assert select_paths(g, rng_seed=3) == select_paths(g, rng_seed=3)


def test_select_trace_matches_oracle_on_small_graphs():
    for g in (diamond(), two_variable_sink()):
        for budget in (1, 2, 3, 5):
            _, trace = select_paths(g, budget=budget, return_trace=True)
            assert trace == selection_trace_oracle(g, budget)


def test_selected_paths_are_edge_connected():
    g = diamond()
    for p in select_paths(g):
        assert p.node_ids[-1] == g.sc
        for a, b in zip(p.node_ids, p.node_ids[1:]):
            assert any(e.src == a and e.dst == b for e in g.edges)


def test_pick_a_path_completes_prefix():
    g = diamond()
    p = pick_a_path(g, [3, 1], rng_seed=0)
    assert p.node_ids == (0, 1, 3)
    with pytest.raises(ValidationError):
        pick_a_path(g, [1], rng_seed=0)        # must start at sc
    with pytest.raises(ValidationError):
        pick_a_path(g, [3, 0], rng_seed=0)     # 0 -> 3 is not an edge


# --- file format -------------------------------------------------------------

def test_graph_file_round_trip():
    text = serialize_adgs([diamond(), two_variable_sink()])
    parsed = parse_adgs(text)
    assert len(parsed) == 2
    assert serialize_adgs(parsed) == text
    assert parsed[0].graph_id == "dia" and parsed[1].graph_id == ""
    assert parsed[0].edges == diamond().edges


def test_graph_file_errors():
    with pytest.raises(ValidationError):
        parse_adgs("graph g\nnode 0 A() -\nend\n")   # missing sc
    with pytest.raises(ValidationError):
        parse_adgs("wibble\n")


def test_to_dot_mentions_every_node_and_edge():
    g = diamond()
    dot = to_dot(g)
    for n in g.nodes:
        assert f"n{n.id}" in dot
    assert dot.count("->") == len(g.edges)


def test_serialize_single_graph_has_terminator():
    assert serialize_adg(diamond()).endswith("end\n")
