"""Independent reference implementations used to cross-check the package.

Everything here is deliberately written from first principles — plain loops,
no imports from the modules under test beyond their data containers — so a
bug in the package cannot silently cancel out in the tests.
"""

from __future__ import annotations

import numpy as np


# --- finite differences -----------------------------------------------------

def numeric_grad(f, arr: np.ndarray, eps: float) -> np.ndarray:
    """Central finite-difference gradient of scalar f with respect to arr,
    perturbing one entry at a time in place."""
    g = np.zeros_like(arr, dtype=np.float64)
    flat = arr.reshape(-1)
    gf = g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        up = f()
        flat[i] = orig - eps
        down = f()
        flat[i] = orig
        gf[i] = (up - down) / (2.0 * eps)
    return g


def block_rel_err(numeric: np.ndarray, analytic: np.ndarray) -> float:
    """Relative error between two gradient blocks as a norm ratio:
    ||num - ana|| / max(||num||, ||ana||). Returns 0 when both vanish."""
    diff = float(np.linalg.norm(numeric - analytic))
    scale = max(float(np.linalg.norm(numeric)), float(np.linalg.norm(analytic)))
    return diff / scale if scale > 0 else diff


def elementwise_rel_err(numeric: np.ndarray, analytic: np.ndarray,
                        floor: float = 1e-4) -> float:
    """Max per-entry |num - ana| / max(|num|, |ana|, floor). The floor keeps
    finite-difference noise at near-zero entries from dominating."""
    denom = np.maximum(np.maximum(np.abs(numeric), np.abs(analytic)), floor)
    return float(np.max(np.abs(numeric - analytic) / denom))


# --- straight-line LSTM recurrence ------------------------------------------

def lstm_reference(w_x: np.ndarray, w_h: np.ndarray, b: np.ndarray,
                   xs: np.ndarray) -> np.ndarray:
    """One LSTM layer over a single sequence (T, d), written as the textbook
    per-gate recurrence with explicit weight slices. Gate blocks are laid out
    [input, forget, cell, output]. Returns hidden states (T, h)."""
    h_sz = w_h.shape[0]
    sig = lambda v: 1.0 / (1.0 + np.exp(-v))
    wx_i, wx_f, wx_g, wx_o = (w_x[:, k * h_sz:(k + 1) * h_sz] for k in range(4))
    wh_i, wh_f, wh_g, wh_o = (w_h[:, k * h_sz:(k + 1) * h_sz] for k in range(4))
    b_i, b_f, b_g, b_o = (b[k * h_sz:(k + 1) * h_sz] for k in range(4))
    h = np.zeros(h_sz)
    c = np.zeros(h_sz)
    out = []
    for x in xs:
        i = sig(x @ wx_i + h @ wh_i + b_i)
        f = sig(x @ wx_f + h @ wh_f + b_f)
        g = np.tanh(x @ wx_g + h @ wh_g + b_g)
        o = sig(x @ wx_o + h @ wh_o + b_o)
        c = f * c + i * g
        h = o * np.tanh(c)
        out.append(h.copy())
    return np.array(out)


# --- path selection ---------------------------------------------------------

def selection_trace_oracle(graph, budget: int):
    """Literal transcription of the budget-limited branch-covering selection:
    breadth-first backward from sc; at every dequeued node accept one incoming
    edge per distinct (flow-variable set, predecessor control tag) class,
    represented by the lowest source id; enqueue each accepted predecessor;
    stop after `budget` acceptances.

    Works directly off graph.nodes / graph.edges. Returns the acceptance
    trace as (parent node id, flow_vars, predecessor control tag) triples.
    """
    cd = {n.id: n.control_dep for n in graph.nodes}
    incoming: dict[int, list] = {n.id: [] for n in graph.nodes}
    for e in graph.edges:
        incoming[e.dst].append(e)
    for lst in incoming.values():
        lst.sort(key=lambda e: e.src)

    trace = []
    queue = [graph.sc]
    while queue and len(trace) < budget:
        node = queue.pop(0)
        seen_classes = set()
        for e in incoming[node]:
            key = (e.flow_vars, cd[e.src])
            if key in seen_classes:
                continue
            seen_classes.add(key)
            trace.append((node, e.flow_vars, cd[e.src]))
            queue.append(e.src)
            if len(trace) == budget:
                break
    return trace


def enumerate_backward_paths(graph) -> list[tuple[int, ...]]:
    """All maximal backward node-id paths from sc to a source (no incoming
    edges), as forward tuples ending at sc. Brute force."""
    incoming: dict[int, list[int]] = {n.id: [] for n in graph.nodes}
    for e in graph.edges:
        incoming[e.dst].append(e.src)
    out = []

    def walk(trail):
        preds = sorted(incoming[trail[-1]])
        if not preds:
            if len(trail) > 1:
                out.append(tuple(reversed(trail)))
            return
        for p in preds:
            walk(trail + [p])

    walk([graph.sc])
    return out


def edge_set(graph) -> set[tuple[int, int]]:
    return {(e.src, e.dst) for e in graph.edges}


# --- Bayes-optimal accuracy -------------------------------------------------

def bayes_best_accuracy(pairs) -> float:
    """Upper bound on top-1 accuracy for any predictor that sees only the
    input: sum over distinct inputs of the majority label count, divided by
    the total. pairs = iterable of (input_key, label)."""
    from collections import Counter, defaultdict
    by_input: dict = defaultdict(Counter)
    total = 0
    for key, label in pairs:
        by_input[key][label] += 1
        total += 1
    best = sum(max(c.values()) for c in by_input.values())
    return best / total if total else 0.0
