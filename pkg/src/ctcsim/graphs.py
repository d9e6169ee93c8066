"""Framed causal graphs, diagrams over them, and their evaluation."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import networkx as nx
import numpy as np
from networkx.algorithms.isomorphism import MultiDiGraphMatcher

from .dctc import (
    DMixMorphism,
    ElementaryMorphism,
    ProbeConfig,
    max_pairwise_deviation,
    simplify_dmix,
    widen,
)
from .pctc import MixSymMorphism, equiv_mixsym, mixsym_lift, pctc_superop
from .qcore import (
    QChannel,
    compose_all,
    identity_channel,
    lift,
    permutation_channel,
)

MAX_CYCLES = 10 ** 4


class GraphError(ValueError):
    pass


class NotCVLocal(GraphError):
    def __init__(self, cycle):
        super().__init__(f"graph is not CV-local: cycle through {list(cycle.nodes)} meets the "
                         "rest of the graph at more than one node")
        self.cycle = cycle


@dataclass(frozen=True)
class Violation:
    kind: str
    where: str
    detail: str = ""

    def __str__(self) -> str:
        return f"{self.kind} at {self.where}: {self.detail}" if self.detail else f"{self.kind} at {self.where}"


# ---------------------------------------------------------------------------
# the graph type
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class FramedCausalGraph:
    """Directed multigraph with ordered boundary and per-node edge orders.

    Edges are identified by their index in ``edges``. When ``in_order`` or
    ``out_order`` is omitted for a node, its edges are ordered by index.
    """

    nodes: tuple
    edges: tuple
    inputs: tuple = ()
    outputs: tuple = ()
    in_order: Mapping = field(default_factory=dict)
    out_order: Mapping = field(default_factory=dict)

    def __post_init__(self):
        nodes = tuple(self.nodes)
        edges = tuple((s, d) for s, d in self.edges)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "inputs", tuple(self.inputs))
        object.__setattr__(self, "outputs", tuple(self.outputs))
        if len(set(nodes)) != len(nodes):
            raise GraphError("duplicate node names")
        known = set(nodes)
        for i, (s, d) in enumerate(edges):
            if s not in known or d not in known:
                raise GraphError(f"edge {i} ({s} -> {d}) uses an unknown node")
        ins = {v: [] for v in nodes}
        outs = {v: [] for v in nodes}
        for i, (s, d) in enumerate(edges):
            outs[s].append(i)
            ins[d].append(i)
        io = {v: tuple(self.in_order.get(v, ins[v])) for v in nodes}
        oo = {v: tuple(self.out_order.get(v, outs[v])) for v in nodes}
        object.__setattr__(self, "in_order", io)
        object.__setattr__(self, "out_order", oo)
        object.__setattr__(self, "_ins", {v: tuple(x) for v, x in ins.items()})
        object.__setattr__(self, "_outs", {v: tuple(x) for v, x in outs.items()})

    # -- queries -----------------------------------------------------------
    @property
    def internal(self) -> tuple:
        b = set(self.inputs) | set(self.outputs)
        return tuple(v for v in self.nodes if v not in b)

    def degree(self, v) -> int:
        return len(self._ins[v]) + len(self._outs[v])

    def in_edges(self, v) -> tuple:
        return self.in_order[v]

    def out_edges(self, v) -> tuple:
        return self.out_order[v]

    def to_networkx(self) -> nx.MultiDiGraph:
        g = nx.MultiDiGraph()
        for v in self.nodes:
            g.add_node(v, role=self.role(v))
        for i, (s, d) in enumerate(self.edges):
            g.add_edge(s, d, key=i, frame=(self.out_order[s].index(i), self.in_order[d].index(i)))
        return g

    def role(self, v) -> tuple:
        if v in self.inputs:
            return ("in", self.inputs.index(v))
        if v in self.outputs:
            return ("out", self.outputs.index(v))
        return ("node",)

    def is_acyclic(self) -> bool:
        return nx.is_directed_acyclic_graph(self.to_networkx())

    def topological_order(self) -> list:
        pos = {v: i for i, v in enumerate(self.nodes)}
        dg = nx.DiGraph()
        dg.add_nodes_from(self.nodes)
        dg.add_edges_from(self.edges)
        return list(nx.lexicographical_topological_sort(dg, key=pos.__getitem__))

    # -- serialisation -----------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "nodes": list(self.nodes),
            "edges": [[s, d] for s, d in self.edges],
            "inputs": list(self.inputs),
            "outputs": list(self.outputs),
            "in_order": {v: list(self.in_order[v]) for v in self.nodes if self.in_order[v]},
            "out_order": {v: list(self.out_order[v]) for v in self.nodes if self.out_order[v]},
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "FramedCausalGraph":
        return cls(tuple(data["nodes"]), tuple(tuple(e) for e in data["edges"]),
                   tuple(data.get("inputs", ())), tuple(data.get("outputs", ())),
                   {k: tuple(v) for k, v in data.get("in_order", {}).items()},
                   {k: tuple(v) for k, v in data.get("out_order", {}).items()})

    def __repr__(self) -> str:
        return (f"FramedCausalGraph({len(self.nodes)} nodes, {len(self.edges)} edges, "
                f"{len(self.inputs)} -> {len(self.outputs)})")


def validate(g: FramedCausalGraph) -> list[Violation]:
    """All invariant violations of ``g``; an empty list means the graph is valid."""
    out: list[Violation] = []
    for i, (s, d) in enumerate(g.edges):
        if s == d:
            out.append(Violation("self-loop", f"edge {i}", f"{s} -> {s}"))
    succ: dict = {v: set() for v in g.nodes}
    for s, d in g.edges:
        succ[s].add(d)
    for x in g.nodes:
        for y in succ[x]:
            for z in succ[y]:
                if z != x and z in succ[x]:
                    out.append(Violation("transitivity", f"{x} -> {y} -> {z}",
                                         f"chord {x} -> {z}"))
    for v in g.inputs:
        if v not in g._ins:
            out.append(Violation("unknown boundary node", str(v)))
            continue
        if g._ins[v]:
            out.append(Violation("input arity", str(v), "input has incoming edges"))
        if len(g._outs[v]) != 1:
            out.append(Violation("input arity", str(v),
                                 f"{len(g._outs[v])} outgoing edges, expected 1"))
    for v in g.outputs:
        if v not in g._ins:
            out.append(Violation("unknown boundary node", str(v)))
            continue
        if g._outs[v]:
            out.append(Violation("output arity", str(v), "output has outgoing edges"))
        if len(g._ins[v]) != 1:
            out.append(Violation("output arity", str(v),
                                 f"{len(g._ins[v])} incoming edges, expected 1"))
    if set(g.inputs) & set(g.outputs):
        out.append(Violation("boundary overlap", str(sorted(set(g.inputs) & set(g.outputs)))))
    if len(set(g.inputs)) != len(g.inputs) or len(set(g.outputs)) != len(g.outputs):
        out.append(Violation("boundary order", "inputs/outputs", "repeated node"))
    for v in g.nodes:
        if sorted(g.in_order[v]) != sorted(g._ins[v]):
            out.append(Violation("framing", str(v), "in_order does not list the incoming edges"))
        if sorted(g.out_order[v]) != sorted(g._outs[v]):
            out.append(Violation("framing", str(v), "out_order does not list the outgoing edges"))
    return out


def is_valid(g: FramedCausalGraph) -> bool:
    return not validate(g)


# ---------------------------------------------------------------------------
# causal sets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CausalSet:
    elements: tuple
    leq: frozenset

    def __post_init__(self):
        object.__setattr__(self, "elements", tuple(self.elements))
        rel = set(self.leq) | {(x, x) for x in self.elements}
        object.__setattr__(self, "leq", frozenset(rel))

    def is_partial_order(self) -> bool:
        r = self.leq
        for x, y in r:
            if x != y and (y, x) in r:
                return False
            for y2, z in r:
                if y2 == y and (x, z) not in r:
                    return False
        return True

    def __eq__(self, other) -> bool:
        return (isinstance(other, CausalSet) and set(self.elements) == set(other.elements)
                and self.leq == other.leq)

    def __hash__(self) -> int:
        return hash((frozenset(self.elements), self.leq))


def causal_set_to_graph(c: CausalSet) -> FramedCausalGraph:
    """Covering relation of the order, as a graph with no boundary."""
    dg = nx.DiGraph()
    dg.add_nodes_from(c.elements)
    dg.add_edges_from((x, y) for x, y in c.leq if x != y)
    red = nx.transitive_reduction(dg)
    pos = {v: i for i, v in enumerate(c.elements)}
    edges = sorted(red.edges(), key=lambda e: (pos[e[0]], pos[e[1]]))
    return FramedCausalGraph(c.elements, tuple(edges))


def graph_to_causal_set(g: FramedCausalGraph) -> CausalSet:
    if not g.is_acyclic():
        raise GraphError("a causal set needs an acyclic graph")
    dg = nx.DiGraph()
    dg.add_nodes_from(g.nodes)
    dg.add_edges_from(g.edges)
    clo = nx.transitive_closure_dag(dg)
    return CausalSet(g.nodes, frozenset(clo.edges()))


# ---------------------------------------------------------------------------
# monoidal structure
# ---------------------------------------------------------------------------

def identity_graph(n: int) -> FramedCausalGraph:
    ins = tuple(f"i{k}" for k in range(n))
    outs = tuple(f"o{k}" for k in range(n))
    return FramedCausalGraph(ins + outs, tuple(zip(ins, outs)), ins, outs)


def symmetry_graph(n: int, m: int) -> FramedCausalGraph:
    """Swap of the first ``n`` wires past the next ``m``."""
    ins = tuple(f"i{k}" for k in range(n + m))
    outs = tuple(f"o{k}" for k in range(n + m))
    # wire a (0 <= a < n) ends at output m + a; wire n + b ends at output b
    target = [m + a for a in range(n)] + list(range(m))
    edges = tuple((ins[k], outs[target[k]]) for k in range(n + m))
    return FramedCausalGraph(ins + outs, edges, ins, outs)


def _renamed(g: FramedCausalGraph, prefix: str) -> dict:
    return {v: f"{prefix}{v}" for v in g.nodes}


def tensor_graphs(g: FramedCausalGraph, h: FramedCausalGraph) -> FramedCausalGraph:
    """Side-by-side union; boundary orders are ``g`` first, then ``h``."""
    rg, rh = _renamed(g, "a."), _renamed(h, "b.")
    off = len(g.edges)
    nodes = tuple(rg[v] for v in g.nodes) + tuple(rh[v] for v in h.nodes)
    edges = tuple((rg[s], rg[d]) for s, d in g.edges) + tuple((rh[s], rh[d]) for s, d in h.edges)
    io = {rg[v]: g.in_order[v] for v in g.nodes}
    io.update({rh[v]: tuple(e + off for e in h.in_order[v]) for v in h.nodes})
    oo = {rg[v]: g.out_order[v] for v in g.nodes}
    oo.update({rh[v]: tuple(e + off for e in h.out_order[v]) for v in h.nodes})
    return FramedCausalGraph(nodes, edges,
                             tuple(rg[v] for v in g.inputs) + tuple(rh[v] for v in h.inputs),
                             tuple(rg[v] for v in g.outputs) + tuple(rh[v] for v in h.outputs),
                             io, oo)


def compose_graphs(h: FramedCausalGraph, g: FramedCausalGraph) -> FramedCausalGraph:
    """``h`` after ``g``: glue the outputs of ``g`` to the inputs of ``h``.

    Edges inside ``g`` not ending at an output, edges inside ``h`` not starting
    at an input, and one bridging edge ``x -> y`` for every ``x -> b`` in ``g``
    and ``b -> y`` in ``h`` through a glued boundary position ``b``. Bridging
    edges take the frame positions of the edges they replace.
    """
    if len(g.outputs) != len(h.inputs):
        raise GraphError(f"cannot compose: {len(g.outputs)} outputs vs {len(h.inputs)} inputs")
    rg, rh = _renamed(g, "a."), _renamed(h, "b.")
    g_out, h_in = set(g.outputs), set(h.inputs)
    nodes = tuple(rg[v] for v in g.nodes if v not in g_out)
    nodes += tuple(rh[v] for v in h.nodes if v not in h_in)
    edges: list = []
    gmap: dict = {}
    hmap: dict = {}
    for i, (s, d) in enumerate(g.edges):
        if d not in g_out:
            gmap[i] = len(edges)
            edges.append((rg[s], rg[d]))
    for i, (s, d) in enumerate(h.edges):
        if s not in h_in:
            hmap[i] = len(edges)
            edges.append((rh[s], rh[d]))
    for b, (ob, ib) in enumerate(zip(g.outputs, h.inputs)):
        (eg,) = g._ins[ob]
        (eh,) = h._outs[ib]
        idx = len(edges)
        edges.append((rg[g.edges[eg][0]], rh[h.edges[eh][1]]))
        gmap[eg] = idx
        hmap[eh] = idx
    io, oo = {}, {}
    for v in g.nodes:
        if v in g_out:
            continue
        io[rg[v]] = tuple(gmap[e] for e in g.in_order[v])
        oo[rg[v]] = tuple(gmap[e] for e in g.out_order[v])
    for v in h.nodes:
        if v in h_in:
            continue
        io[rh[v]] = tuple(hmap[e] for e in h.in_order[v])
        oo[rh[v]] = tuple(hmap[e] for e in h.out_order[v])
    return FramedCausalGraph(nodes, tuple(edges), tuple(rg[v] for v in g.inputs),
                             tuple(rh[v] for v in h.outputs), io, oo)


def _iso_node_match(a, b) -> bool:
    return a["role"] == b["role"]


def _iso_edge_match(a, b) -> bool:
    return sorted(x["frame"] for x in a.values()) == sorted(x["frame"] for x in b.values())


def find_isomorphism(g: FramedCausalGraph, h: FramedCausalGraph) -> dict | None:
    """Frame-preserving node bijection ``g -> h``, or None."""
    if (len(g.nodes), len(g.edges), len(g.inputs), len(g.outputs)) != \
            (len(h.nodes), len(h.edges), len(h.inputs), len(h.outputs)):
        return None
    m = MultiDiGraphMatcher(g.to_networkx(), h.to_networkx(),
                            node_match=_iso_node_match, edge_match=_iso_edge_match)
    for iso in m.isomorphisms_iter():
        return dict(iso)
    return None


def isomorphic(g: FramedCausalGraph, h: FramedCausalGraph) -> bool:
    return find_isomorphism(g, h) is not None


# ---------------------------------------------------------------------------
# cycles and CV-locality
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Cycle:
    nodes: tuple
    edges: tuple

    def __len__(self) -> int:
        return len(self.edges)


def enumerate_simple_cycles(g: FramedCausalGraph, limit: int = MAX_CYCLES) -> list[Cycle]:
    """Every simple directed cycle, parallel edges giving distinct cycles."""
    dg = nx.DiGraph()
    dg.add_nodes_from(g.nodes)
    par: dict = {}
    for i, (s, d) in enumerate(g.edges):
        dg.add_edge(s, d)
        par.setdefault((s, d), []).append(i)
    pos = {v: i for i, v in enumerate(g.nodes)}
    out: list[Cycle] = []
    for cyc in nx.simple_cycles(dg):
        k = min(range(len(cyc)), key=lambda j: pos[cyc[j]])
        cyc = cyc[k:] + cyc[:k]
        hops = [par[(cyc[j], cyc[(j + 1) % len(cyc)])] for j in range(len(cyc))]
        for choice in itertools.product(*hops):
            out.append(Cycle(tuple(cyc), tuple(choice)))
            if len(out) > limit:
                raise GraphError(f"more than {limit} simple cycles")
    out.sort(key=lambda c: (tuple(pos[v] for v in c.nodes), c.edges))
    return out


@dataclass(frozen=True)
class LocalityReport:
    local: bool
    interaction: tuple
    offending: Cycle | None = None

    def __bool__(self) -> bool:
        return self.local


def is_cv_local(g: FramedCausalGraph, cycles: list[Cycle] | None = None) -> LocalityReport:
    """Every simple cycle meets at most one node of degree above two.

    ``interaction`` lists, per cycle, its high-degree node (None for a loop that
    is disconnected from the rest of the graph).
    """
    cycles = enumerate_simple_cycles(g) if cycles is None else cycles
    inter = []
    for c in cycles:
        high = [v for v in c.nodes if g.degree(v) > 2]
        if len(high) > 1:
            return LocalityReport(False, tuple(inter), c)
        inter.append(high[0] if high else None)
    return LocalityReport(True, tuple(inter))


# ---------------------------------------------------------------------------
# cutting
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Pairing:
    output: str
    input: str
    edge: int


@dataclass(frozen=True, eq=False)
class CutResult:
    cr_graph: FramedCausalGraph
    pairings: tuple          # ((group key, (Pairing, ...)), ...)
    cut_edges: tuple         # original edge index per cut, in pairing order
    edge_origin: tuple       # cr edge index -> original edge index
    n_inputs: int            # boundary size before cutting
    n_outputs: int

    @property
    def groups(self) -> dict:
        return dict(self.pairings)


def _cycle_key(g, c: Cycle):
    return min(c.edges, key=lambda i: (str(g.edges[i][0]), str(g.edges[i][1]), i))


def _groups(g: FramedCausalGraph, cycles, report) -> list:
    """Cycles grouped by interaction node in first-appearance order."""
    keyed: dict = {}
    for c, v in zip(cycles, report.interaction):
        key = v if v is not None else min(c.nodes, key=str)
        keyed.setdefault(key, []).append(c)
    return list(keyed.items())


def all_cut_plans(g: FramedCausalGraph) -> list[tuple]:
    cycles = enumerate_simple_cycles(g)
    return [tuple(p) for p in itertools.product(*[c.edges for c in cycles])]


def _feedback_edges(g: FramedCausalGraph, plan) -> list[int]:
    """Cut edges for an arbitrary graph: the plan first, then greedy choices."""
    cut = list(plan or ())
    while True:
        rest = FramedCausalGraph(g.nodes, [e for i, e in enumerate(g.edges) if i not in cut])
        idx = [i for i in range(len(g.edges)) if i not in cut]
        cycles = enumerate_simple_cycles(rest)
        if not cycles:
            return cut
        cut.append(idx[_cycle_key(rest, cycles[0])])


def cut_open(g: FramedCausalGraph, plan: Sequence[int] | None = None,
             require_local: bool = True) -> CutResult:
    """Cut one edge per cycle; each cut edge becomes a fresh output and input pair.

    ``plan`` lists one edge index per cycle (cycles in the order of
    :func:`enumerate_simple_cycles`); the default cuts the lexicographically
    smallest edge of each cycle.
    """
    cycles = enumerate_simple_cycles(g)
    report = is_cv_local(g, cycles)
    if require_local:
        if not report:
            raise NotCVLocal(report.offending)
        if plan is None:
            plan = [_cycle_key(g, c) for c in cycles]
        plan = list(plan)
        if len(plan) != len(cycles):
            raise GraphError(f"plan has {len(plan)} edges for {len(cycles)} cycles")
        for e, c in zip(plan, cycles):
            if e not in c.edges:
                raise GraphError(f"edge {e} is not on cycle {list(c.nodes)}")
        grouped = _groups(g, cycles, report)
        order: list = []
        for key, cs in grouped:
            order.append((key, [plan[cycles.index(c)] for c in cs]))
    else:
        cut = _feedback_edges(g, plan)
        order = [(f"loop{k}", [e]) for k, e in enumerate(cut)]
    edges = list(g.edges)
    origin = list(range(len(edges)))
    io = {v: list(g.in_order[v]) for v in g.nodes}
    oo = {v: list(g.out_order[v]) for v in g.nodes}
    nodes = list(g.nodes)
    new_in, new_out = [], []
    pairings = []
    cut_edges = []
    n = 0
    for key, es in order:
        group = []
        for e in es:
            s, d = g.edges[e]
            out_node, in_node = f"cut{n}.out", f"cut{n}.in"
            n += 1
            nodes += [out_node, in_node]
            edges[e] = (s, out_node)
            io[out_node] = [e]
            oo[out_node] = []
            new_idx = len(edges)
            edges.append((in_node, d))
            origin.append(e)
            io[d] = [new_idx if x == e else x for x in io[d]]
            oo[in_node] = [new_idx]
            io[in_node] = []
            new_in.append(in_node)
            new_out.append(out_node)
            group.append(Pairing(out_node, in_node, e))
            cut_edges.append(e)
        pairings.append((key, tuple(group)))
    cr = FramedCausalGraph(tuple(nodes), tuple(edges), g.inputs + tuple(new_in),
                           g.outputs + tuple(new_out),
                           {v: tuple(x) for v, x in io.items()},
                           {v: tuple(x) for v, x in oo.items()})
    return CutResult(cr, tuple(pairings), tuple(cut_edges), tuple(origin),
                     len(g.inputs), len(g.outputs))


def reglue(cut: CutResult) -> FramedCausalGraph:
    """Undo :func:`cut_open` by joining every pairing back into one edge."""
    g = cut.cr_graph
    drop = set()
    edges = list(g.edges)
    io = {v: list(g.in_order[v]) for v in g.nodes}
    oo = {v: list(g.out_order[v]) for v in g.nodes}
    removed_edges = set()
    for _, group in cut.pairings:
        for p in group:
            (e_out,) = g._ins[p.output]
            (e_in,) = g._outs[p.input]
            s, d = edges[e_out][0], edges[e_in][1]
            edges[e_out] = (s, d)
            io[d] = [e_out if x == e_in else x for x in io[d]]
            removed_edges.add(e_in)
            drop |= {p.output, p.input}
    keep = [i for i in range(len(edges)) if i not in removed_edges]
    remap = {old: new for new, old in enumerate(keep)}
    nodes = tuple(v for v in g.nodes if v not in drop)
    return FramedCausalGraph(
        nodes, tuple(edges[i] for i in keep),
        tuple(v for v in g.inputs if v not in drop),
        tuple(v for v in g.outputs if v not in drop),
        {v: tuple(remap[x] for x in io[v]) for v in nodes},
        {v: tuple(remap[x] for x in oo[v]) for v in nodes})


# ---------------------------------------------------------------------------
# diagrams
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Diagram:
    """A graph with a dimension list per edge and a channel per internal node."""

    graph: FramedCausalGraph
    alpha: tuple
    beta: Mapping

    def __post_init__(self):
        alpha = tuple(tuple(int(x) for x in a) for a in self.alpha)
        if len(alpha) != len(self.graph.edges):
            raise GraphError(f"{len(alpha)} edge types for {len(self.graph.edges)} edges")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", dict(self.beta))
        problems = check_diagram(self)
        if problems:
            raise GraphError("; ".join(problems))

    def wire_dims(self, edges: Iterable[int]) -> tuple:
        return tuple(d for e in edges for d in self.alpha[e])

    @property
    def in_dims(self) -> tuple:
        return self.wire_dims(self.graph.out_order[v][0] for v in self.graph.inputs)

    @property
    def out_dims(self) -> tuple:
        return self.wire_dims(self.graph.in_order[v][0] for v in self.graph.outputs)


def check_diagram(d: Diagram) -> list[str]:
    g = d.graph
    out = [str(v) for v in validate(g)]
    for v in g.internal:
        ch = d.beta.get(v)
        if ch is None:
            out.append(f"node {v!r} has no channel")
            continue
        want_in = d.wire_dims(g.in_order[v])
        want_out = d.wire_dims(g.out_order[v])
        if ch.in_dims != want_in or ch.out_dims != want_out:
            out.append(f"node {v!r}: channel is {list(ch.in_dims)} -> {list(ch.out_dims)}, "
                       f"edges need {list(want_in)} -> {list(want_out)}")
    return out


def _move_to_front(live: list, dims_of, front: Sequence[int]) -> tuple[QChannel | None, list]:
    rest = [e for e in live if e not in front]
    new = list(front) + rest
    if new == live:
        return None, live
    perm = []
    for e in new:
        perm.append(live.index(e))
    # subsystem-level permutation: expand each wire into its dims
    starts, k = [], 0
    for e in live:
        starts.append(k)
        k += len(dims_of(e))
    sub = [starts[p] + j for p in perm for j in range(len(dims_of(live[p])))]
    dims = tuple(x for e in live for x in dims_of(e))
    return permutation_channel(dims, sub), new


class _Bundle:
    """Ordered list of live wires threaded through a topological sweep."""

    def __init__(self, d: Diagram, start: list):
        self.d = d
        self.live = list(start)
        self.steps: list = []   # (channel, cv_dims, label, dims of untouched wires)

    def dims(self, wires=None) -> tuple:
        return self.d.wire_dims(self.live if wires is None else wires)

    def route(self, front: Sequence[int]):
        ch, self.live = _move_to_front(self.live, lambda e: self.d.alpha[e], front)
        if ch is not None:
            self.steps.append((ch, (), None, ()))

    def apply(self, phi: QChannel, front: Sequence[int], back: Sequence[int],
              cv_dims=(), label=None):
        self.route(front)
        rest = self.live[len(front):]
        self.steps.append((phi, tuple(cv_dims), label, self.dims(rest)))
        self.live = list(back) + rest

    def finish(self, order: Sequence[int]):
        self.route(order)


def _input_wires(g: FramedCausalGraph) -> list:
    return [g.out_order[v][0] for v in g.inputs]


def _output_wires(g: FramedCausalGraph) -> list:
    return [g.in_order[v][0] for v in g.outputs]


def _sweep(d: Diagram) -> _Bundle:
    g = d.graph
    if not g.is_acyclic():
        raise GraphError("CR evaluation needs an acyclic graph")
    b = _Bundle(d, _input_wires(g))
    boundary = set(g.inputs) | set(g.outputs)
    for v in g.topological_order():
        if v in boundary:
            continue
        b.apply(d.beta[v], g.in_order[v], g.out_order[v], label=v)
    b.finish(_output_wires(g))
    return b


def _bundle_channels(b: _Bundle) -> list[QChannel]:
    return [lift(phi, rest) if rest else phi for phi, _, _, rest in b.steps]


def eval_cr_diagram(d: Diagram) -> QChannel:
    """Channel of an acyclic diagram, from the input order to the output order."""
    chans = _bundle_channels(_sweep(d))
    if not chans:
        return identity_channel(d.in_dims)
    return compose_all(chans)


def subdiagram(d: Diagram, members: Sequence, in_edges: Sequence[int],
               out_edges: Sequence[int]) -> Diagram:
    """Restrict ``d`` to ``members``, opening the listed boundary edges in order."""
    g = d.graph
    mem = set(members)
    nodes = list(members)
    edges, alpha = [], []
    remap: dict = {}
    inputs, outputs = [], []
    io: dict = {}
    oo: dict = {}
    for k, e in enumerate(in_edges):
        node = f"in{k}"
        nodes.append(node)
        inputs.append(node)
        remap[("in", e)] = len(edges)
        edges.append((node, g.edges[e][1]))
        alpha.append(d.alpha[e])
        oo[node] = (remap[("in", e)],)
    for e, (s, t) in enumerate(g.edges):
        if s in mem and t in mem:
            remap[("mid", e)] = len(edges)
            edges.append((s, t))
            alpha.append(d.alpha[e])
    for k, e in enumerate(out_edges):
        node = f"out{k}"
        nodes.append(node)
        outputs.append(node)
        remap[("out", e)] = len(edges)
        edges.append((g.edges[e][0], node))
        alpha.append(d.alpha[e])
        io[node] = (remap[("out", e)],)
    for v in members:
        io[v] = tuple(remap.get(("mid", e), remap.get(("in", e))) for e in g.in_order[v])
        oo[v] = tuple(remap.get(("mid", e), remap.get(("out", e))) for e in g.out_order[v])
        if None in io[v] or None in oo[v]:
            raise GraphError(f"node {v!r} has an edge that is neither internal nor listed")
    sub = FramedCausalGraph(tuple(nodes), tuple(edges), tuple(inputs), tuple(outputs), io, oo)
    return Diagram(sub, tuple(alpha), {v: d.beta[v] for v in members})


@dataclass(frozen=True, eq=False)
class Evaluation:
    """Result of :func:`eval_diagram` with bookkeeping for reports."""

    morphism: object
    cut: CutResult | None
    interaction_nodes: tuple = ()   # labels of the non-trivial DMix steps, in order


def _cut_diagram(d: Diagram, cut: CutResult) -> Diagram:
    alpha = tuple(d.alpha[o] for o in cut.edge_origin)
    return Diagram(cut.cr_graph, alpha, d.beta)


def eval_diagram(d: Diagram, model: str = "dctc", plan: Sequence[int] | None = None,
                 experimental: bool = False, details: bool = False):
    """Morphism of a diagram under ``model`` ("dctc" or "pctc").

    D-CTC: every interaction node together with the nodes on its cycles is
    evaluated as one elementary morphism whose CV system is the bundle of cut
    wires; the resulting quotient graph is acyclic and becomes a DMix sequence.
    P-CTC: the whole cut-open diagram is evaluated and all cut wire pairs are
    traced out at once, followed by renormalisation.
    """
    if model not in ("dctc", "pctc"):
        raise ValueError(f"unknown model {model!r}")
    g = d.graph
    if model == "pctc":
        cycles = enumerate_simple_cycles(g)
        local = is_cv_local(g, cycles)
        if not local and not experimental:
            raise NotCVLocal(local.offending)
        cut = cut_open(g, plan, require_local=bool(local))
        cd = _cut_diagram(d, cut)
        phi = eval_cr_diagram(cd)
        cv = d.wire_dims(cut.cut_edges)
        m = mixsym_lift(pctc_superop(phi, cv) if cv else phi)
        return Evaluation(m, cut) if details else m
    cut = cut_open(g, plan)
    m, labels = _eval_dctc(d, cut)
    return Evaluation(m, cut, labels) if details else m


def _eval_dctc(d: Diagram, cut: CutResult) -> tuple[DMixMorphism, tuple]:
    g = d.graph
    cycles = enumerate_simple_cycles(g)
    report = is_cv_local(g, cycles)
    clusters = []
    unit_of = {}
    for key, cs in _groups(g, cycles, report):
        members = [key] + sorted({v for c in cs for v in c.nodes if v != key},
                                 key=g.nodes.index)
        clusters.append((key, members, cs))
        for v in members:
            unit_of[v] = key
    boundary = set(g.inputs) | set(g.outputs)
    for v in g.internal:
        unit_of.setdefault(v, v)
    # quotient DAG over units
    q = nx.DiGraph()
    pos = {v: i for i, v in enumerate(g.nodes)}
    units = []
    for v in g.nodes:
        if v in boundary:
            continue
        u = unit_of[v]
        if u not in q:
            q.add_node(u)
            units.append(u)
    cyc_edges = {e for c in cycles for e in c.edges}
    for i, (s, t) in enumerate(g.edges):
        if i in cyc_edges or s in boundary or t in boundary:
            continue
        if unit_of[s] != unit_of[t]:
            q.add_edge(unit_of[s], unit_of[t])
    order = list(nx.lexicographical_topological_sort(q, key=lambda u: pos[u]))
    cd = _cut_diagram(d, cut)
    cg = cd.graph
    # original edge index -> cut-graph edge index for the non-cut copy
    b = _Bundle(d, _input_wires(g))
    info = {key: (members, cs) for key, members, cs in clusters}
    labels = []
    for u in order:
        if u not in info:
            b.apply(d.beta[u], g.in_order[u], g.out_order[u], label=u)
            continue
        members, cs = info[u]
        mem = set(members)
        h = [e for v in members for e in g.in_order[v] if e not in cyc_edges]
        k = [e for v in members for e in g.out_order[v] if e not in cyc_edges]
        group = cut.groups[u]
        # in the cut graph the surviving copy of each edge keeps its index
        c_in = [len(g.edges) + cut.cut_edges.index(p.edge) for p in group]
        c_out = [p.edge for p in group]
        sub = subdiagram(cd, members, h + c_in, k + c_out)
        phi = eval_cr_diagram(sub)
        cv = d.wire_dims(p.edge for p in group)
        b.apply(phi, h, k, cv_dims=cv, label=u)
        labels.append(u)
        assert all(cg.edges[e][1] in mem for e in c_in)
    b.finish(_output_wires(g))
    steps = []
    for phi, cv, _, rest in b.steps:
        e = ElementaryMorphism(phi, cv)
        steps.append(widen(e, (), rest) if rest else e)
    if not steps:
        return DMixMorphism.identity(d.in_dims), ()
    m = simplify_dmix(DMixMorphism(tuple(steps), d.in_dims, d.out_dims))
    return m, tuple(labels)


def evaluate_all_plans(d: Diagram, model: str = "dctc") -> list:
    return [eval_diagram(d, model, plan) for plan in all_cut_plans(d.graph)]


def cut_invariance(d: Diagram, model: str = "dctc", config: ProbeConfig = ProbeConfig(),
                   experimental: bool = False) -> tuple[list, float]:
    """Evaluate every cut plan; return the plans and the largest pairwise deviation.

    D-CTC morphisms are compared on the probe states of ``config``; Mix_sym
    morphisms by the largest entry of their Choi difference.
    """
    plans = all_cut_plans(d.graph)
    ms = [eval_diagram(d, model, p, experimental=experimental) for p in plans]
    if model == "dctc":
        return plans, max_pairwise_deviation(ms, config)
    worst = 0.0
    for i in range(len(ms)):
        for j in range(i + 1, len(ms)):
            worst = max(worst, equiv_mixsym(ms[i], ms[j]))
    return plans, worst


def embed_channel_as_mixsym(phi: QChannel) -> MixSymMorphism:
    return mixsym_lift(phi)


def wire_permutation_matrix(d: Diagram, order: Sequence[int]) -> np.ndarray:
    """Matrix of the permutation taking the input wires into ``order``."""
    ch, _ = _move_to_front(_input_wires(d.graph), lambda e: d.alpha[e], order)
    if ch is None:
        return np.eye(int(np.prod(d.in_dims)))
    return ch.kraus[0]
