"""Worked examples: constructors, expected outcomes and helper analyses."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dctc import eval_dmix
from .graphs import Diagram, FramedCausalGraph, eval_diagram
from .pctc import pctc_run
from .qcore import (
    SIC_BLOCH,
    DensityMatrix,
    QChannel,
    channel_from_unitary,
    compose_all,
    controlled,
    dephase_z,
    discard,
    fidelity,
    identity_channel,
    ket_minus,
    ket_plus,
    make_gate,
    partial_trace,
    permutation_channel,
    prepare,
    sic_povm_qubit,
    swap_matrix,
    tensor,
    tensor_all,
    trace_distance,
)

X = np.array([[0, 1], [1, 0]], dtype=complex)
H = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)
I2 = np.eye(2, dtype=complex)
NON_NORMALIZABLE = "non-normalizable"


def zero() -> DensityMatrix:
    return DensityMatrix.basis(0, (2,))


def one() -> DensityMatrix:
    return DensityMatrix.basis(1, (2,))


def mixed(d: int = 2) -> DensityMatrix:
    return DensityMatrix.maximally_mixed((d,))


NAMED_STATES = {"0": zero, "1": one, "+": ket_plus, "-": ket_minus}


# ---------------------------------------------------------------------------
# diagram builders
# ---------------------------------------------------------------------------

def loop_diagram(phi: QChannel, h: Sequence[Sequence[int]], k: Sequence[Sequence[int]],
                 cv: Sequence[Sequence[int]], passthrough: Sequence[Sequence[int]] = ()) -> Diagram:
    """One interaction node ``v`` running ``phi``, one loop ``v -> c_j -> v`` per CV wire.

    ``h``, ``k`` and ``cv`` list the dimensions of each wire. Extra
    ``passthrough`` wires go straight from an input to an output after the others.
    """
    nh, nk, nc = len(h), len(k), len(cv)
    ins = [f"i{j}" for j in range(nh + len(passthrough))]
    outs = [f"o{j}" for j in range(nk + len(passthrough))]
    cvs = [f"c{j}" for j in range(nc)]
    edges, alpha = [], []
    for j in range(nh):
        edges.append((ins[j], "v"))
        alpha.append(tuple(h[j]))
    for j in range(nc):
        edges.append((cvs[j], "v"))
        alpha.append(tuple(cv[j]))
    for j in range(nk):
        edges.append(("v", outs[j]))
        alpha.append(tuple(k[j]))
    for j in range(nc):
        edges.append(("v", cvs[j]))
        alpha.append(tuple(cv[j]))
    for j, dims in enumerate(passthrough):
        edges.append((ins[nh + j], outs[nk + j]))
        alpha.append(tuple(dims))
    nodes = tuple(ins) + ("v",) + tuple(cvs) + tuple(outs)
    g = FramedCausalGraph(nodes, tuple(edges), tuple(ins), tuple(outs))
    beta = {"v": phi}
    for j in range(nc):
        beta[cvs[j]] = identity_channel(tuple(cv[j]))
    return Diagram(g, tuple(alpha), beta)


def cnot_target_loop() -> np.ndarray:
    """CNOT on (CR, CV) controlled by the CV qubit."""
    sw = swap_matrix()
    return sw @ controlled(X) @ sw


def grandfather_unitary() -> np.ndarray:
    return swap_matrix() @ cnot_target_loop()


def nonlinearity_unitary() -> np.ndarray:
    """Grandfather with the colours of the CNOT exchanged: the CR qubit controls."""
    return swap_matrix() @ controlled(X)


# ---------------------------------------------------------------------------
# the scenario record
# ---------------------------------------------------------------------------

@dataclass
class RunItem:
    label: str
    output: DensityMatrix | None
    expected: object = None
    deviation: float | None = None
    probability: float | None = None
    fixed_points: list = field(default_factory=list)

    @property
    def ok(self) -> bool | None:
        if self.expected is None:
            return None
        if isinstance(self.expected, str):
            return self.output is None
        return self.deviation is not None and self.deviation <= 1e-8


@dataclass
class Scenario:
    name: str
    diagram: Diagram
    model: str
    inputs: list                # [(label, DensityMatrix)]
    expected: dict = field(default_factory=dict)      # label -> DensityMatrix | NON_NORMALIZABLE
    provenance: dict = field(default_factory=dict)    # label -> note
    notes: str = ""

    def morphism(self, model: str | None = None, plan=None, details: bool = False):
        return eval_diagram(self.diagram, model or self.model, plan, details=details)

    def run(self, model: str | None = None, plan=None) -> list[RunItem]:
        model = model or self.model
        ev = self.morphism(model, plan, details=True)
        out = []
        for label, rho in self.inputs:
            exp = self.expected.get(label) if model == self.model else None
            if model == "dctc":
                trace: list = []
                res = eval_dmix(ev.morphism, rho, trace)
                item = RunItem(label, res, exp, probability=1.0, fixed_points=trace)
            else:
                r = pctc_run(ev.morphism, rho)
                item = RunItem(label, r.state, exp, probability=r.probability)
            if isinstance(exp, DensityMatrix) and item.output is not None:
                item.deviation = trace_distance(item.output, exp)
            out.append(item)
        return out


# ---------------------------------------------------------------------------
# scenarios
# ---------------------------------------------------------------------------

def grandfather(model: str = "dctc") -> Scenario:
    """CNOT from the loop qubit onto the CR qubit, then a swap.

    With input ``|1>`` the loop sees a NOT gate and the only fixed point is
    ``I/2``. The output is the loop register after the CNOT, so Z-basis inputs
    give ``I/2`` while ``|+>`` and ``|->`` both come out as ``|+>``.
    Under post-selection the map is ``rho -> E rho E^dag`` with
    ``E = Tr_C U = sqrt(2) |+><0|``.
    """
    phi = channel_from_unitary(grandfather_unitary(), (2, 2))
    d = loop_diagram(phi, [(2,)], [(2,)], [(2,)])
    inputs = [("0", zero()), ("1", one()), ("+", ket_plus()), ("-", ket_minus())]
    if model == "dctc":
        expected = {"0": mixed(), "1": mixed(), "+": ket_plus(), "-": ket_plus()}
        prov = {"0": "reference", "1": "reference",
                "+": "derived: |+> is fixed by the NOT gate and passes through",
                "-": "derived: the loop settles on |->, phase kickback turns it into |+>"}
    else:
        expected = {"0": ket_plus(), "1": NON_NORMALIZABLE, "+": ket_plus(), "-": ket_plus()}
        prov = {k: "derived: E = sqrt(2)|+><0|" for k in expected}
    return Scenario("grandfather", d, model, inputs, expected, prov)


def bell_pair() -> DensityMatrix:
    return DensityMatrix.maximally_entangled(2)


def entanglement_breaking() -> Scenario:
    """The grandfather loop on one half of a bipartite state, identity on the other.

    The loop settles on ``tau = (rho_A + X rho_A X) / 2``. The output is a
    product state exactly when that ``tau`` is diagonal, which covers Bell
    inputs; a real X-coherence in ``rho_A`` leaves the halves correlated.
    """
    phi = channel_from_unitary(grandfather_unitary(), (2, 2))
    d = loop_diagram(phi, [(2,)], [(2,)], [(2,)], passthrough=[(2,)])
    inputs = [("bell", bell_pair()),
              ("product", DensityMatrix(np.kron(one().matrix, ket_plus().matrix), (2, 2)))]
    expected = {"bell": DensityMatrix.maximally_mixed((2, 2)),
                "product": DensityMatrix(np.kron(mixed().matrix, ket_plus().matrix), (2, 2))}
    return Scenario("entanglement_breaking", d, "dctc", inputs, expected,
                    {"bell": "reference", "product": "derived"})


def nonlinearity_input(eps: float) -> DensityMatrix:
    return DensityMatrix(np.diag([1 - eps / 2, eps / 2]).astype(complex), (2,))


def nonlinearity_expected(eps: float) -> DensityMatrix:
    p1 = eps * (1 - eps / 2)
    return DensityMatrix(np.diag([1 - p1, p1]).astype(complex), (2,))


def nonlinearity(eps: float = 0.5) -> Scenario:
    """The loop copies the CR input, so the output is ``Z``-parity of two copies."""
    if not 0 <= eps <= 1:
        raise ValueError("eps must lie in [0, 1]")
    phi = channel_from_unitary(nonlinearity_unitary(), (2, 2))
    d = loop_diagram(phi, [(2,)], [(2,)], [(2,)])
    inputs = [("0", zero()), ("1", one()), ("rho_eps", nonlinearity_input(eps))]
    expected = {"0": zero(), "1": zero(), "rho_eps": nonlinearity_expected(eps)}
    return Scenario("nonlinearity", d, "dctc", inputs, expected,
                    {"0": "reference", "1": "reference", "rho_eps": "reference"}, notes=f"eps={eps}")


def discontinuity_phi() -> QChannel:
    """Controlled swap (control a, swapping b with the loop), then dephasing on the loop."""
    cswap = channel_from_unitary(make_gate("cswap").kraus[0], (2, 2, 2))
    return compose_all([cswap, tensor(identity_channel((2, 2)), dephase_z(2))])


def discontinuity(eps: float = 0.0, rho: DensityMatrix | None = None) -> Scenario:
    rho = zero() if rho is None else rho
    d = loop_diagram(discontinuity_phi(), [(2,), (2,)], [(2,), (2,)], [(2,)])
    ctrl = np.diag([1 - eps, eps]).astype(complex)
    inp = DensityMatrix(np.kron(ctrl, rho.matrix), (2, 2))
    return Scenario("discontinuity", d, "dctc", [("input", inp)], {},
                    {"tau": "reference: dephase_z(rho) for eps > 0, I/2 at eps = 0"},
                    notes=f"eps={eps}")


def discontinuity_tau(eps: float, rho: DensityMatrix | None = None) -> DensityMatrix:
    """The loop state chosen by the solver for the discontinuity scenario."""
    sc = discontinuity(eps, rho)
    (item,) = sc.run()
    return item.fixed_points[0].state


# -- discrimination ---------------------------------------------------------

def discrimination_unitaries() -> list[np.ndarray]:
    sw = swap_matrix()
    u00 = sw
    u01 = np.kron(X, X)
    u10 = np.kron(X @ H, I2)
    u11 = np.kron(X, H) @ sw
    return [u00, u01, u10, u11]


def discrimination_phi() -> QChannel:
    """``(psi, ancilla) (x) (loop pair) -> (outcome pair) (x) (loop pair)``.

    The CR pair and loop pair are swapped, the new loop pair is acted on by
    ``U_ij`` controlled on the new CR pair ``ij``, and the CR pair is dephased.
    """
    blocks = discrimination_unitaries()
    ctrl = np.zeros((16, 16), dtype=complex)
    for ij, u in enumerate(blocks):
        p = np.zeros((4, 4))
        p[ij, ij] = 1
        ctrl += np.kron(p, u)
    swap_pairs = permutation_channel((2, 2, 2, 2), (2, 3, 0, 1)).kraus[0]
    u = ctrl @ swap_pairs
    return compose_all([channel_from_unitary(u, (2, 2, 2, 2)),
                        tensor_all([dephase_z(2), dephase_z(2), identity_channel((2, 2))])])


def chi_phi() -> QChannel:
    """Discrimination interaction with the ``|0>`` ancilla prepared inside."""
    prep = tensor_all([identity_channel((2,)), prepare(zero()), identity_channel((2, 2))])
    return compose_all([prep, discrimination_phi()])


DISCRIMINATION_TABLE = {"0": "00", "1": "01", "+": "10", "-": "11"}


def discrimination(which: str = "0") -> Scenario:
    if which not in NAMED_STATES:
        raise ValueError(f"which must be one of {sorted(NAMED_STATES)}")
    d = loop_diagram(chi_phi(), [(2,)], [(2,), (2,)], [(2, 2)])
    bits = DISCRIMINATION_TABLE[which]
    expected = DensityMatrix.basis(int(bits, 2), (2, 2))
    return Scenario("discrimination", d, "dctc", [(which, NAMED_STATES[which]())],
                    {which: expected}, {which: "reference"})


def readout(rho: DensityMatrix, systems: Sequence[int] | None = None) -> dict:
    """Outcome distribution of a Z-basis readout of ``systems`` (default all)."""
    keep = range(len(rho.dims)) if systems is None else systems
    red = partial_trace(rho, keep) if systems is not None else rho
    p = np.clip(np.real(np.diag(red.matrix)), 0, None)
    n = len(red.dims)
    out = {}
    for idx, val in enumerate(p):
        digits = np.unravel_index(idx, red.dims) if n else ()
        out["".join(str(int(x)) for x in digits)] = float(val)
    return out


# -- linearity trap ---------------------------------------------------------

def alice_measurement(i: int) -> QChannel:
    """Measurement of Alice's qubit in the Z (i = 0) or X (i = 1) basis, outcome kept."""
    u = channel_from_unitary(np.linalg.matrix_power(H, i), (2,))
    return compose_all([u, dephase_z(2)])


def linearity_trap(i: int = 0) -> Scenario:
    """Alice measures her half of a Bell pair; Bob runs the discriminator on his.

    Wires: input 0 is Alice's qubit, input 1 Bob's; outputs are Alice's outcome
    then Bob's two outcome bits.
    """
    nodes = ("iA", "iB", "a", "v", "c", "oA", "oB0", "oB1")
    edges = (("iA", "a"), ("iB", "v"), ("c", "v"), ("a", "oA"), ("v", "oB0"), ("v", "oB1"),
             ("v", "c"))
    alpha = ((2,), (2,), (2, 2), (2,), (2,), (2,), (2, 2))
    g = FramedCausalGraph(nodes, edges, ("iA", "iB"), ("oA", "oB0", "oB1"),
                          {"v": (1, 2)}, {"v": (4, 5, 6)})
    beta = {"a": alice_measurement(i), "v": chi_phi(), "c": identity_channel((2, 2))}
    d = Diagram(g, alpha, beta)
    return Scenario("linearity_trap", d, "dctc", [("bell", bell_pair())], {},
                    {"bob": "reference: independent of i"}, notes=f"i={i}")


def bob_distribution(out: DensityMatrix) -> dict:
    return readout(out, [1, 2])


def chi_output(rho_b: DensityMatrix) -> DensityMatrix:
    """Bob's two outcome bits when the discriminator runs on ``rho_b`` alone."""
    sc = loop_diagram(chi_phi(), [(2,)], [(2,), (2,)], [(2, 2)])
    m = eval_diagram(sc, "dctc")
    return eval_dmix(m, rho_b)


def branch_sum(i: int, state: DensityMatrix | None = None) -> DensityMatrix:
    """The fallacious evaluation: condition on Alice's outcome, then average Bob's results."""
    state = bell_pair() if state is None else state
    basis = [np.linalg.matrix_power(H, i) @ np.eye(2)[a] for a in range(2)]
    total = np.zeros((4, 4), dtype=complex)
    for vec in basis:
        proj = np.kron(np.outer(vec, vec.conj()), I2)
        post = proj @ state.matrix @ proj
        p = np.trace(post).real
        if p <= 1e-15:
            continue
        rho_b = partial_trace(DensityMatrix(post / p, (2, 2)), [1])
        total += p * chi_output(rho_b).matrix
    return DensityMatrix(total, (2, 2))


@dataclass
class TrapAnalysis:
    correct: dict            # i -> Bob's output state (two qubits)
    branch: dict             # i -> branch-sum state
    signalling: float        # deviation of Bob's correct output across i
    branch_gap: float        # min over i of distance(branch-sum, correct)


def linearity_trap_analysis(state: DensityMatrix | None = None) -> TrapAnalysis:
    state = bell_pair() if state is None else state
    correct, branch = {}, {}
    for i in (0, 1):
        sc = linearity_trap(i)
        m = eval_diagram(sc.diagram, "dctc")
        out = eval_dmix(m, state)
        correct[i] = partial_trace(out, [1, 2])
        branch[i] = branch_sum(i, state)
    sig = trace_distance(correct[0], correct[1])
    gap = min(trace_distance(correct[i], branch[i]) for i in (0, 1))
    return TrapAnalysis(correct, branch, sig, gap)


# -- cloning ----------------------------------------------------------------

def cloner_cnot_phi(n: int) -> QChannel:
    """``in (x) c_1..c_n -> a_1..a_n (x) c'_1..c'_n``.

    Registers ``a_k`` start in ``|0>`` and receive a CNOT from ``c_k``; then
    ``c'_1 = in``, ``c'_{k+1} = c_k`` and ``c_n`` is discarded.
    """
    if n < 1:
        raise ValueError("need at least one copy")
    # layout after preparing registers: in, c_1..c_n, a_1..a_n
    prep = tensor_all([identity_channel((2,) * (n + 1))] + [prepare(zero())] * n)
    dims = (2,) * (2 * n + 1)
    u = np.eye(2 ** (2 * n + 1), dtype=complex)
    cn = controlled(X)
    for k in range(n):
        # bring c_k and a_k to the front, apply CNOT, put them back
        src, dst = 1 + k, 1 + n + k
        perm = [src, dst] + [j for j in range(2 * n + 1) if j not in (src, dst)]
        p = permutation_channel(dims, perm).kraus[0]
        u = p.conj().T @ np.kron(cn, np.eye(2 ** (2 * n - 1))) @ p @ u
    circuit = channel_from_unitary(u, dims)
    # reorder to a_1..a_n, in, c_1..c_{n-1}, c_n and drop c_n
    order = list(range(n + 1, 2 * n + 1)) + list(range(0, n + 1))
    reorder = permutation_channel(dims, order)
    drop = tensor(identity_channel((2,) * (2 * n)), discard((2,)))
    return compose_all([prep, circuit, reorder, drop])


def cloner_cnot(n: int = 3, rho: DensityMatrix | None = None) -> Scenario:
    rho = ket_plus() if rho is None else rho
    phi = cloner_cnot_phi(n)
    d = loop_diagram(phi, [(2,)], [(2,)] * n, [(2,)] * n)
    dz = DensityMatrix(dephase_z(2)(rho.matrix), (2,))
    expected = _power(dz, n)
    return Scenario("cloner_cnot", d, "dctc", [("rho", rho)], {"rho": expected},
                    {"rho": "reference: n copies of the dephased input"}, notes=f"n={n}")


def _power(rho: DensityMatrix, n: int) -> DensityMatrix:
    m = np.ones((1, 1), dtype=complex)
    for _ in range(n):
        m = np.kron(m, rho.matrix)
    return DensityMatrix(m, tuple(rho.dims) * n)


def cloner_sic_phi(n: int) -> QChannel:
    """As :func:`cloner_cnot_phi` with the input first measured by the SIC channel."""
    if n < 1:
        raise ValueError("need at least one copy")
    dims = (4,) * (2 * n + 1)
    sic = tensor(sic_povm_qubit(), identity_channel((4,) * n))
    prep = tensor_all([identity_channel((4,) * (n + 1))]
                      + [prepare(DensityMatrix.basis(0, (4,)))] * n)
    u = np.eye(4 ** (2 * n + 1), dtype=complex)
    cn = make_gate("generalized_cnot", 4).kraus[0]
    for k in range(n):
        src, dst = 1 + k, 1 + n + k
        perm = [src, dst] + [j for j in range(2 * n + 1) if j not in (src, dst)]
        p = permutation_channel(dims, perm).kraus[0]
        u = p.conj().T @ np.kron(cn, np.eye(4 ** (2 * n - 1))) @ p @ u
    order = list(range(n + 1, 2 * n + 1)) + list(range(0, n + 1))
    return compose_all([sic, prep, channel_from_unitary(u, dims),
                        permutation_channel(dims, order),
                        tensor(identity_channel((4,) * (2 * n)), discard((4,)))])


def cloner_sic(n: int = 2, rho: DensityMatrix | None = None) -> Scenario:
    rho = ket_plus() if rho is None else rho
    d = loop_diagram(cloner_sic_phi(n), [(2,)], [(4,)] * n, [(4,)] * n)
    p = sic_probabilities(rho)
    single = DensityMatrix(np.diag(p).astype(complex), (4,))
    return Scenario("cloner_sic", d, "dctc", [("rho", rho)], {"rho": _power(single, n)},
                    {"rho": "derived: n independent SIC outcomes"}, notes=f"n={n}")


def sic_probabilities(rho: DensityMatrix) -> np.ndarray:
    out = sic_povm_qubit()(rho.matrix)
    return np.clip(np.real(np.diag(out)), 0, None)


def bloch_vector(rho: DensityMatrix) -> np.ndarray:
    m = rho.matrix
    return np.array([2 * m[0, 1].real, -2 * m[0, 1].imag, (m[0, 0] - m[1, 1]).real])


def state_from_bloch(r: np.ndarray) -> DensityMatrix:
    r = np.asarray(r, dtype=float)
    n = np.linalg.norm(r)
    if n > 1:
        r = r / n
    sx = X
    sy = np.array([[0, -1j], [1j, 0]])
    sz = np.diag([1, -1]).astype(complex)
    return DensityMatrix((I2 + r[0] * sx + r[1] * sy + r[2] * sz) / 2, (2,))


def sic_estimate(counts: np.ndarray) -> DensityMatrix:
    """Linear inversion ``r = 3 sum_x f_x n_x``, projected into the Bloch ball."""
    f = np.asarray(counts, dtype=float)
    f = f / f.sum()
    return state_from_bloch(3 * (f @ SIC_BLOCH))


def sic_tomography_fidelity(n: int, rho: DensityMatrix | None = None, seed: int = 0,
                            repetitions: int = 200) -> float:
    """Mean fidelity of the SIC estimate from ``n`` clone registers.

    The registers are independent and identically distributed (checked exactly
    by the engine for small ``n``), so their joint outcome is sampled directly.
    """
    rho = ket_plus() if rho is None else rho
    p = sic_probabilities(rho)
    rng = np.random.default_rng(np.random.SeedSequence([seed, n]))
    counts = rng.multinomial(n, p / p.sum(), size=repetitions)
    return float(np.mean([fidelity(rho, sic_estimate(c)) for c in counts]))


SCENARIOS = {
    "grandfather": grandfather,
    "entanglement_breaking": entanglement_breaking,
    "nonlinearity": nonlinearity,
    "discontinuity": discontinuity,
    "discrimination": discrimination,
    "linearity_trap": linearity_trap,
    "cloner_cnot": cloner_cnot,
    "cloner_sic": cloner_sic,
}

