"""JSON scenario files: parsing, type checking and serialisation."""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .graphs import Diagram, FramedCausalGraph, GraphError, check_diagram
from .qcore import (
    GATE_NAMES,
    DensityMatrix,
    QChannel,
    _prod,
    compose_all,
    make_gate,
    permutation_channel,
    tensor_all,
)

VERSION = "ctcsim/1"
MODELS = ("dctc", "pctc")


class ScenarioError(ValueError):
    """Parse or type-check failure; ``where`` is a dotted path into the document."""

    def __init__(self, where: str, message: str):
        super().__init__(f"{where}: {message}" if where else message)
        self.where = where


@dataclass
class ScenarioFile:
    name: str
    systems: dict
    graph: dict
    edge_types: list
    assignments: dict
    model: str
    input_state: Any
    options: dict = field(default_factory=dict)
    version: str = VERSION

    def to_dict(self) -> dict:
        return {
            "version": self.version,
            "name": self.name,
            "model": self.model,
            "systems": self.systems,
            "graph": self.graph,
            "edge_types": self.edge_types,
            "assignments": self.assignments,
            "input_state": self.input_state,
            "options": self.options,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=False) + "\n"

    # -- building ----------------------------------------------------------
    def edge_dims(self) -> tuple:
        return tuple(_resolve_type(t, self.systems, f"edge_types[{i}]")
                     for i, t in enumerate(self.edge_types))

    def build_graph(self) -> FramedCausalGraph:
        try:
            return FramedCausalGraph.from_dict(self.graph)
        except (GraphError, KeyError, TypeError, ValueError) as exc:
            raise ScenarioError("graph", str(exc)) from None

    def build_diagram(self) -> Diagram:
        g = self.build_graph()
        alpha = self.edge_dims()
        if len(alpha) != len(g.edges):
            raise ScenarioError("edge_types", f"{len(alpha)} entries for {len(g.edges)} edges")
        beta = {}
        for v in g.internal:
            if v not in self.assignments:
                raise ScenarioError(f"assignments.{v}", "missing channel for internal node")
            beta[v] = parse_channel(self.assignments[v], self.systems, f"assignments.{v}")
        for v in self.assignments:
            if v not in g.internal:
                raise ScenarioError(f"assignments.{v}", "not an internal node of the graph")
        # type check before constructing, so errors name the node
        g_alpha = tuple(tuple(a) for a in alpha)
        for v in g.internal:
            want_in = tuple(d for e in g.in_order[v] for d in g_alpha[e])
            want_out = tuple(d for e in g.out_order[v] for d in g_alpha[e])
            ch = beta[v]
            if ch.in_dims != want_in or ch.out_dims != want_out:
                raise ScenarioError(
                    f"assignments.{v}",
                    f"node {v!r} has type {list(ch.in_dims)} -> {list(ch.out_dims)} but its "
                    f"edges need {list(want_in)} -> {list(want_out)}")
        try:
            return Diagram(g, alpha, beta)
        except GraphError as exc:
            raise ScenarioError("graph", str(exc)) from None

    def build_state(self, diagram: Diagram | None = None) -> DensityMatrix:
        rho = parse_state(self.input_state, self.systems, "input_state")
        if diagram is not None:
            want = diagram.in_dims
            if tuple(rho.dims[:len(want)]) != want:
                raise ScenarioError("input_state", f"state dims {list(rho.dims)} do not start "
                                    f"with the diagram input dims {list(want)}")
        return rho


def _resolve_type(t, systems: dict, where: str) -> tuple:
    if isinstance(t, str):
        if t not in systems:
            raise ScenarioError(where, f"unknown system {t!r}")
        t = systems[t]
    if isinstance(t, int):
        t = [t]
    if not isinstance(t, list) or not all(isinstance(x, int) and x >= 1 for x in t):
        raise ScenarioError(where, f"expected a system name, dimension or list of dimensions, got {t!r}")
    return tuple(t)


def _matrix(data, where: str) -> np.ndarray:
    try:
        arr = np.asarray(data, dtype=float)
    except (TypeError, ValueError):
        raise ScenarioError(where, "matrix entries must be [re, im] pairs") from None
    if arr.ndim != 3 or arr.shape[-1] != 2:
        raise ScenarioError(where, f"expected rows of [re, im] pairs, got shape {list(arr.shape)}")
    return arr[..., 0] + 1j * arr[..., 1]


def _vector(data, where: str) -> np.ndarray:
    try:
        arr = np.asarray(data, dtype=float)
    except (TypeError, ValueError):
        raise ScenarioError(where, "vector entries must be [re, im] pairs") from None
    if arr.ndim != 2 or arr.shape[-1] != 2:
        raise ScenarioError(where, "expected a list of [re, im] pairs")
    return arr[:, 0] + 1j * arr[:, 1]


def _dims(data, systems, where) -> tuple:
    if isinstance(data, list) and all(isinstance(x, (str, int)) for x in data) and any(
            isinstance(x, str) for x in data):
        return tuple(d for i, x in enumerate(data) for d in _resolve_type(x, systems, f"{where}[{i}]"))
    return _resolve_type(data, systems, where)


def parse_channel(expr, systems: dict, where: str = "channel") -> QChannel:
    """Channel expression: gate name, ``gate``, ``kraus``, ``unitary``, ``seq``, ``ten``, ``perm``."""
    if isinstance(expr, str):
        if expr not in GATE_NAMES:
            raise ScenarioError(where, f"unknown gate {expr!r}")
        try:
            return make_gate(expr)
        except (ValueError, KeyError) as exc:
            raise ScenarioError(where, str(exc)) from None
    if not isinstance(expr, dict) or len(expr) == 0:
        raise ScenarioError(where, f"expected a channel expression, got {expr!r}")
    if "gate" in expr:
        name = expr["gate"]
        if name not in GATE_NAMES:
            raise ScenarioError(f"{where}.gate", f"unknown gate {name!r}")
        args = list(expr.get("args", []))
        params = dict(expr.get("params", {}))
        if name == "prepare":
            if "state" not in expr:
                raise ScenarioError(where, "prepare needs a 'state'")
            args = [parse_state(expr["state"], systems, f"{where}.state")]
        try:
            return make_gate(name, *args, **params)
        except (ValueError, TypeError, KeyError) as exc:
            raise ScenarioError(where, str(exc)) from None
    if "kraus" in expr:
        ks = [_matrix(k, f"{where}.kraus[{i}]") for i, k in enumerate(expr["kraus"])]
        if not ks:
            raise ScenarioError(f"{where}.kraus", "empty Kraus list")
        in_dims = _dims(expr.get("in", [ks[0].shape[1]]), systems, f"{where}.in")
        out_dims = _dims(expr.get("out", [ks[0].shape[0]]), systems, f"{where}.out")
        try:
            return QChannel(tuple(ks), in_dims, out_dims, tp=bool(expr.get("tp", True)))
        except ValueError as exc:
            raise ScenarioError(where, str(exc)) from None
    if "unitary" in expr:
        u = _matrix(expr["unitary"], f"{where}.unitary")
        dims = _dims(expr.get("dims", [u.shape[0]]), systems, f"{where}.dims")
        try:
            return QChannel((u,), dims, dims, tp=True)
        except ValueError as exc:
            raise ScenarioError(where, str(exc)) from None
    if "seq" in expr:
        parts = [parse_channel(e, systems, f"{where}.seq[{i}]") for i, e in enumerate(expr["seq"])]
        if not parts:
            raise ScenarioError(f"{where}.seq", "empty sequence")
        for i in range(1, len(parts)):
            if parts[i].in_dims != parts[i - 1].out_dims:
                raise ScenarioError(f"{where}.seq[{i}]",
                                    f"expects {list(parts[i].in_dims)}, previous step gives "
                                    f"{list(parts[i - 1].out_dims)}")
        return compose_all(parts)
    if "ten" in expr:
        parts = [parse_channel(e, systems, f"{where}.ten[{i}]") for i, e in enumerate(expr["ten"])]
        if not parts:
            raise ScenarioError(f"{where}.ten", "empty tensor product")
        return tensor_all(parts)
    if "perm" in expr:
        perm = expr["perm"]
        dims = _dims(expr.get("dims", [2] * len(perm)), systems, f"{where}.dims")
        if sorted(perm) != list(range(len(dims))):
            raise ScenarioError(f"{where}.perm", f"{perm} is not a permutation of {len(dims)} wires")
        return permutation_channel(dims, perm)
    raise ScenarioError(where, f"unrecognised channel expression keys {sorted(expr)}")


def parse_state(expr, systems: dict, where: str = "state") -> DensityMatrix:
    """State expression: ``"0"``, ``"1"``, ``"+"``, ``"-"``, ``"bell"``, ``basis``, ``ket``,
    ``matrix``, ``mixed`` or ``tensor``."""
    from .qcore import ket_minus, ket_plus
    named = {
        "0": lambda: DensityMatrix.basis(0, (2,)),
        "1": lambda: DensityMatrix.basis(1, (2,)),
        "+": ket_plus,
        "-": ket_minus,
        "bell": lambda: DensityMatrix.maximally_entangled(2),
    }
    try:
        if isinstance(expr, str):
            if expr not in named:
                raise ScenarioError(where, f"unknown named state {expr!r}")
            return named[expr]()
        if not isinstance(expr, dict):
            raise ScenarioError(where, f"expected a state expression, got {expr!r}")
        if "basis" in expr:
            dims = _dims(expr.get("dims", [2]), systems, f"{where}.dims")
            idx = expr["basis"]
            return DensityMatrix.basis(tuple(idx) if isinstance(idx, list) else int(idx), dims)
        if "ket" in expr:
            v = _vector(expr["ket"], f"{where}.ket")
            dims = _dims(expr.get("dims", [len(v)]), systems, f"{where}.dims")
            return DensityMatrix.from_ket(v, dims)
        if "matrix" in expr:
            m = _matrix(expr["matrix"], f"{where}.matrix")
            dims = _dims(expr.get("dims", [m.shape[0]]), systems, f"{where}.dims")
            return DensityMatrix(m, dims)
        if "mixed" in expr:
            return DensityMatrix.maximally_mixed(_dims(expr["mixed"], systems, f"{where}.mixed"))
        if "tensor" in expr:
            parts = [parse_state(e, systems, f"{where}.tensor[{i}]")
                     for i, e in enumerate(expr["tensor"])]
            m = np.ones((1, 1), dtype=complex)
            dims: tuple = ()
            for p in parts:
                m = np.kron(m, p.matrix)
                dims += p.dims
            return DensityMatrix(m, dims)
    except ScenarioError:
        raise
    except (ValueError, TypeError, IndexError) as exc:
        raise ScenarioError(where, str(exc)) from None
    raise ScenarioError(where, f"unrecognised state expression keys {sorted(expr)}")


_REQUIRED = ("graph", "edge_types", "assignments", "input_state")


def from_dict(data: dict) -> ScenarioFile:
    if not isinstance(data, dict):
        raise ScenarioError("", "scenario file must be a JSON object")
    version = data.get("version", VERSION)
    if version != VERSION:
        raise ScenarioError("version", f"unsupported version {version!r}, expected {VERSION!r}")
    for key in _REQUIRED:
        if key not in data:
            raise ScenarioError(key, "missing required field")
    model = data.get("model", "dctc")
    if model not in MODELS:
        raise ScenarioError("model", f"expected one of {list(MODELS)}, got {model!r}")
    systems = data.get("systems", {})
    if not isinstance(systems, dict):
        raise ScenarioError("systems", "expected an object mapping names to dimensions")
    for k, v in systems.items():
        _resolve_type(v, {}, f"systems.{k}")
    if not isinstance(data["edge_types"], list):
        raise ScenarioError("edge_types", "expected a list")
    if not isinstance(data["assignments"], dict):
        raise ScenarioError("assignments", "expected an object")
    options = data.get("options", {})
    if not isinstance(options, dict):
        raise ScenarioError("options", "expected an object")
    return ScenarioFile(
        name=str(data.get("name", "scenario")),
        systems=copy.deepcopy(systems),
        graph=copy.deepcopy(data["graph"]),
        edge_types=copy.deepcopy(data["edge_types"]),
        assignments=copy.deepcopy(data["assignments"]),
        model=model,
        input_state=copy.deepcopy(data["input_state"]),
        options=copy.deepcopy(options),
        version=version,
    )


def parse_scenario(text: str) -> ScenarioFile:
    """Parse and fully validate a scenario document."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"line {exc.lineno} column {exc.colno}", exc.msg) from None
    sf = from_dict(data)
    d = sf.build_diagram()
    sf.build_state(d)
    return sf


# ---------------------------------------------------------------------------
# export
# ---------------------------------------------------------------------------

def _pairs(m: np.ndarray) -> list:
    m = np.asarray(m, dtype=complex)
    return [[[_num(z.real), _num(z.imag)] for z in row] for row in m]


def _num(x: float) -> float:
    x = float(np.round(x, 15))
    return 0.0 if x == 0 else x


def channel_literal(ch: QChannel) -> dict:
    return {"kraus": [_pairs(k) for k in ch.kraus], "in": list(ch.in_dims),
            "out": list(ch.out_dims)}


def state_literal(rho: DensityMatrix) -> dict:
    return {"matrix": _pairs(rho.matrix), "dims": list(rho.dims)}


def diagram_to_file(d: Diagram, rho: DensityMatrix, model: str = "dctc",
                    name: str = "scenario", options: dict | None = None) -> ScenarioFile:
    return ScenarioFile(
        name=name,
        systems={},
        graph=d.graph.to_dict(),
        edge_types=[list(a) for a in d.alpha],
        assignments={v: channel_literal(d.beta[v]) for v in d.graph.internal},
        model=model,
        input_state=state_literal(rho),
        options=dict(options or {}),
    )


def type_errors(sf: ScenarioFile) -> list[str]:
    """Diagram-level problems as messages (empty when the file is well typed)."""
    try:
        d = sf.build_diagram()
    except ScenarioError as exc:
        return [str(exc)]
    return check_diagram(d)


def dims_product(dims) -> int:
    return _prod(dims)
