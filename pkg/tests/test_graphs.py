
import numpy as np
import pytest

from ctcsim.dctc import ProbeConfig, embed, equiv_dmix, eval_dmix
from ctcsim.graphs import (
    CausalSet,
    Diagram,
    FramedCausalGraph,
    GraphError,
    NotCVLocal,
    all_cut_plans,
    causal_set_to_graph,
    compose_graphs,
    cut_invariance,
    cut_open,
    enumerate_simple_cycles,
    eval_cr_diagram,
    eval_diagram,
    find_isomorphism,
    graph_to_causal_set,
    identity_graph,
    is_cv_local,
    is_valid,
    isomorphic,
    reglue,
    symmetry_graph,
    tensor_graphs,
    validate,
)
from ctcsim.pctc import equiv_mixsym, mixsym_lift, pctc_run
from ctcsim.qcore import (
    DensityMatrix,
    QChannel,
    identity_channel,
    make_gate,
)

from oracles import (
    naive_apply,
    random_kraus,
    random_local_diagram,
    random_order_relation,
    random_state,
)


def build(spec):
    g = FramedCausalGraph(spec["nodes"], spec["edges"], spec["inputs"], spec["outputs"],
                          spec["in_order"], spec["out_order"])
    beta = {v: QChannel(tuple(k), i, o) for v, (k, i, o) in spec["beta"].items()}
    return Diagram(g, spec["alpha"], beta)


def kinds(g):
    return sorted({v.kind for v in validate(g)})


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------

def test_valid_line_graph():
    g = FramedCausalGraph(("i", "a", "b", "o"), (("i", "a"), ("a", "b"), ("b", "o")), ("i",), ("o",))
    assert is_valid(g)
    assert g.is_acyclic()
    assert g.topological_order() == ["i", "a", "b", "o"]
    assert g.degree("a") == 2


def test_self_loop_and_transitivity_are_rejected():
    g = FramedCausalGraph(("a",), (("a", "a"),))
    assert kinds(g) == ["self-loop"]
    tri = FramedCausalGraph(("x", "y", "z"), (("x", "y"), ("y", "z"), ("x", "z")))
    assert kinds(tri) == ["transitivity"]


def test_cycles_are_allowed_and_parallel_edges_too():
    g = FramedCausalGraph(("a", "b"), (("a", "b"), ("b", "a"), ("a", "b")))
    assert is_valid(g)
    assert not g.is_acyclic()


def test_boundary_violations():
    g = FramedCausalGraph(("i", "a", "o"), (("a", "i"), ("i", "o"), ("a", "o")), ("i",), ("o",))
    assert "input arity" in kinds(g) and "output arity" in kinds(g)
    both = FramedCausalGraph(("x",), (), ("x",), ("x",))
    assert "boundary overlap" in kinds(both)
    dup = FramedCausalGraph(("i", "o"), (("i", "o"),), ("i", "i"), ("o",))
    assert "boundary order" in kinds(dup)


def test_framing_must_list_the_edges():
    g = FramedCausalGraph(("a", "b"), (("a", "b"), ("a", "b")), in_order={"b": (0,)})
    assert kinds(g) == ["framing"]


def test_graph_construction_errors():
    with pytest.raises(GraphError):
        FramedCausalGraph(("a", "a"), ())
    with pytest.raises(GraphError):
        FramedCausalGraph(("a",), (("a", "b"),))


def test_serialisation_round_trip():
    g = FramedCausalGraph(("i", "a", "b", "o"), (("i", "a"), ("a", "b"), ("b", "a"), ("a", "b"), ("b", "o")),
                          ("i",), ("o",), in_order={"a": (2, 0)}, out_order={"a": (3, 1)})
    h = FramedCausalGraph.from_dict(g.to_dict())
    assert h.nodes == g.nodes and h.edges == g.edges
    assert h.in_order == g.in_order and h.out_order == g.out_order


# ---------------------------------------------------------------------------
# causal sets
# ---------------------------------------------------------------------------

def random_poset(rng, n):
    names, pairs = random_order_relation(rng, n)
    return CausalSet(names, pairs)


@pytest.mark.parametrize("seed", range(30))
def test_causal_set_round_trip(seed):
    rng = np.random.default_rng(seed)
    c = random_poset(rng, int(rng.integers(1, 9)))
    assert c.is_partial_order()
    g = causal_set_to_graph(c)
    assert is_valid(g)
    assert graph_to_causal_set(g) == c


def test_cover_graph_has_no_chords():
    c = CausalSet(("a", "b", "c"), frozenset({("a", "b"), ("b", "c"), ("a", "c")}))
    g = causal_set_to_graph(c)
    assert set(g.edges) == {("a", "b"), ("b", "c")}


def test_graph_to_causal_set_rejects_cycles():
    g = FramedCausalGraph(("a", "b"), (("a", "b"), ("b", "a")))
    with pytest.raises(GraphError):
        graph_to_causal_set(g)


def test_non_order_is_detected():
    c = CausalSet(("a", "b"), frozenset({("a", "b"), ("b", "a")}))
    assert not c.is_partial_order()


# ---------------------------------------------------------------------------
# monoidal structure and isomorphism
# ---------------------------------------------------------------------------

def test_identity_and_symmetry_graphs():
    assert is_valid(identity_graph(3))
    s = symmetry_graph(1, 2)
    assert is_valid(s)
    # wire 0 ends at output 2
    assert ("i0", "o2") in s.edges and ("i1", "o0") in s.edges


def test_tensor_and_compose():
    g = FramedCausalGraph(("i", "v", "o"), (("i", "v"), ("v", "o")), ("i",), ("o",))
    t = tensor_graphs(g, identity_graph(1))
    assert len(t.inputs) == 2 and is_valid(t)
    c = compose_graphs(g, g)
    assert len(c.nodes) == 4 and is_valid(c)
    assert isomorphic(compose_graphs(identity_graph(1), g), g)
    with pytest.raises(GraphError):
        compose_graphs(g, identity_graph(2))


def test_symmetry_squares_to_identity_up_to_isomorphism():
    s = symmetry_graph(1, 1)
    assert isomorphic(compose_graphs(s, s), identity_graph(2))
    assert not isomorphic(s, identity_graph(2))


def test_isomorphism_respects_framing():
    a = FramedCausalGraph(("i0", "i1", "v", "o"), (("i0", "v"), ("i1", "v"), ("v", "o")),
                          ("i0", "i1"), ("o",))
    b = FramedCausalGraph(("i0", "i1", "v", "o"), (("i0", "v"), ("i1", "v"), ("v", "o")),
                          ("i0", "i1"), ("o",), in_order={"v": (1, 0)})
    assert isomorphic(a, a)
    assert find_isomorphism(a, a)["v"] == "v"
    assert not isomorphic(a, b)


# ---------------------------------------------------------------------------
# cycles and locality
# ---------------------------------------------------------------------------

def brute_force_cycles(g):
    """Edge-index cycles found by extending every path from its smallest node."""
    pos = {v: i for i, v in enumerate(g.nodes)}
    found = set()
    for start in g.nodes:
        stack = [(start, (), (start,))]
        while stack:
            v, es, seen = stack.pop()
            for i, (s, d) in enumerate(g.edges):
                if s != v:
                    continue
                if d == start:
                    found.add(es + (i,))
                elif d not in seen and pos[d] > pos[start]:
                    stack.append((d, es + (i,), seen + (d,)))
    return found


@pytest.mark.parametrize("seed", range(10))
def test_cycle_enumeration_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 6))
    nodes = tuple(f"n{k}" for k in range(n))
    edges = []
    for _ in range(int(rng.integers(1, 3 * n))):
        a, b = rng.choice(n, size=2, replace=False)
        edges.append((nodes[a], nodes[b]))
    g = FramedCausalGraph(nodes, tuple(edges))
    got = {c.edges for c in enumerate_simple_cycles(g)}
    assert got == brute_force_cycles(g)


def test_locality_single_interaction():
    g = FramedCausalGraph(("i", "v", "c", "o"), (("i", "v"), ("c", "v"), ("v", "o"), ("v", "c")),
                          ("i",), ("o",))
    rep = is_cv_local(g)
    assert rep.local and rep.interaction == ("v",)


def test_locality_fails_with_two_interaction_nodes():
    g = FramedCausalGraph(("i", "a", "b", "o"), (("i", "a"), ("a", "b"), ("b", "a"), ("b", "o")),
                          ("i",), ("o",))
    rep = is_cv_local(g)
    assert not rep.local and set(rep.offending.nodes) == {"a", "b"}
    with pytest.raises(NotCVLocal):
        cut_open(g)


def test_acyclic_graph_is_trivially_local():
    g = identity_graph(2)
    assert is_cv_local(g).local
    assert enumerate_simple_cycles(g) == []
    cut = cut_open(g)
    assert cut.pairings == () and cut.cr_graph.edges == g.edges


@pytest.mark.parametrize("seed", range(8))
def test_cut_then_reglue_restores_graph(seed):
    d = build(random_local_diagram(np.random.default_rng(seed)))
    g = d.graph
    for plan in all_cut_plans(g)[:4]:
        cut = cut_open(g, plan)
        assert cut.cr_graph.is_acyclic() and is_valid(cut.cr_graph)
        assert len(cut.cr_graph.inputs) == len(g.inputs) + len(plan)
        back = reglue(cut)
        assert isomorphic(back, g)
        assert back.edges == g.edges


def test_plan_errors():
    g = FramedCausalGraph(("i", "v", "c", "o"), (("i", "v"), ("c", "v"), ("v", "o"), ("v", "c")),
                          ("i",), ("o",))
    with pytest.raises(GraphError):
        cut_open(g, [0])
    with pytest.raises(GraphError):
        cut_open(g, [1, 3])
    assert sorted(all_cut_plans(g)) == [(1,), (3,)]


# ---------------------------------------------------------------------------
# diagrams
# ---------------------------------------------------------------------------

def two_wire_circuit(rng):
    """i0 -> h -> cx, i1 -> cx, cx -> (r, o1), r -> o0 with a random channel r."""
    g = FramedCausalGraph(
        ("i0", "i1", "h", "cx", "r", "o0", "o1"),
        (("i0", "h"), ("h", "cx"), ("i1", "cx"), ("cx", "r"), ("cx", "o1"), ("r", "o0")),
        ("i0", "i1"), ("o0", "o1"))
    rk = random_kraus(2, 3, 2, rng)
    beta = {"h": make_gate("hadamard"), "cx": make_gate("cnot"),
            "r": QChannel(tuple(rk), (2,), (3,))}
    alpha = [(2,)] * 5 + [(3,)]
    return Diagram(g, alpha, beta), rk


def test_eval_cr_diagram_matches_matrix_product():
    rng = np.random.default_rng(0)
    d, rk = two_wire_circuit(rng)
    ch = eval_cr_diagram(d)
    assert ch.in_dims == (2, 2) and ch.out_dims == (3, 2)
    h = make_gate("hadamard").kraus[0]
    cx = make_gate("cnot").kraus[0]
    front = cx @ np.kron(h, np.eye(2))
    ks = [np.kron(k, np.eye(2)) @ front for k in rk]
    rho = random_state(4, rng)
    assert np.allclose(ch(rho), naive_apply(ks, rho))


def test_wire_crossing_is_routed():
    g = FramedCausalGraph(("i0", "i1", "a", "o0", "o1"),
                          (("i0", "a"), ("i1", "o0"), ("a", "o1")), ("i0", "i1"), ("o0", "o1"))
    x = make_gate("pauli_x")
    d = Diagram(g, [(2,), (3,), (2,)], {"a": x})
    ch = eval_cr_diagram(d)
    assert ch.in_dims == (2, 3) and ch.out_dims == (3, 2)
    a, b = random_state(2, np.random.default_rng(1)), random_state(3, np.random.default_rng(2))
    xm = x.kraus[0]
    assert np.allclose(ch(np.kron(a, b)), np.kron(b, xm @ a @ xm))


def test_diagram_type_errors():
    g = FramedCausalGraph(("i", "v", "o"), (("i", "v"), ("v", "o")), ("i",), ("o",))
    with pytest.raises(GraphError, match="'v'"):
        Diagram(g, [(2,), (2,)], {"v": make_gate("cnot")})
    with pytest.raises(GraphError, match="no channel"):
        Diagram(g, [(2,), (2,)], {})
    with pytest.raises(GraphError):
        Diagram(g, [(2,)], {"v": make_gate("pauli_x")})


def test_vanishing_for_acyclic_diagrams():
    rng = np.random.default_rng(3)
    d, _ = two_wire_circuit(rng)
    ch = eval_cr_diagram(d)
    m_d = eval_diagram(d, "dctc")
    m_p = eval_diagram(d, "pctc")
    assert equiv_dmix(m_d, embed(ch)).deviation < 1e-10
    assert equiv_mixsym(m_p, mixsym_lift(ch)) < 1e-10
    rho = DensityMatrix(random_state(4, rng), (2, 2))
    a = eval_dmix(m_d, rho).matrix
    b = pctc_run(m_p, rho).state.matrix
    assert np.allclose(a, b, atol=1e-9)


def test_loop_diagram_matches_elementary_closure():
    from ctcsim.dctc import xi_dctc
    from ctcsim.pctc import xi_pctc
    rng = np.random.default_rng(4)
    ks = random_kraus(4, 4, 2, rng)
    phi = QChannel(tuple(ks), (2, 2), (2, 2))
    g = FramedCausalGraph(("i", "v", "c", "o"), (("i", "v"), ("c", "v"), ("v", "o"), ("v", "c")),
                          ("i",), ("o",))
    d = Diagram(g, [(2,)] * 4, {"v": phi, "c": identity_channel((2,))})
    assert equiv_dmix(eval_diagram(d, "dctc"), xi_dctc(phi, (2,))).deviation < 1e-9
    assert equiv_mixsym(eval_diagram(d, "pctc"), xi_pctc(phi, (2,))) < 1e-10


def test_dctc_refuses_non_local_graph_and_pctc_needs_flag():
    g = FramedCausalGraph(("i", "a", "b", "o"), (("i", "a"), ("a", "b"), ("b", "a"), ("b", "o")),
                          ("i",), ("o",), out_order={"b": (3, 2)})
    a = QChannel(tuple(random_kraus(4, 2, 2, np.random.default_rng(5))), (2, 2), (2,))
    b = QChannel(tuple(random_kraus(2, 4, 1, np.random.default_rng(6))), (2,), (2, 2))
    d = Diagram(g, [(2,)] * 4, {"a": a, "b": b})
    with pytest.raises(NotCVLocal):
        eval_diagram(d, "dctc")
    with pytest.raises(NotCVLocal):
        eval_diagram(d, "pctc")
    m = eval_diagram(d, "pctc", experimental=True)
    assert m.in_dims == (2,) and m.out_dims == (2,)


@pytest.mark.parametrize("seed", range(4))
def test_cut_invariance_on_random_local_diagrams(seed):
    d = build(random_local_diagram(np.random.default_rng(1000 + seed), n_layers=1))
    for model in ("dctc", "pctc"):
        plans, worst = cut_invariance(d, model, ProbeConfig(count=3))
        assert len(plans) >= 1
        assert worst <= 1e-6


def test_details_report_interaction_nodes():
    d = build(random_local_diagram(np.random.default_rng(7), n_wires=1, n_layers=2))
    ev = eval_diagram(d, "dctc", details=True)
    assert set(ev.interaction_nodes) == {"v0", "v1"}
    assert ev.cut is not None and len(ev.cut.cut_edges) >= 2
