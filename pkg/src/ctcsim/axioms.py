"""Randomised checks of the time-travel axioms against either loop model."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import dctc, pctc
from .qcore import (
    DensityMatrix,
    QChannel,
    _prod,
    channel_from_unitary,
    compose,
    controlled,
    identity_channel,
    lift,
    swap_matrix,
    tensor,
    trace_distance_matrices,
    ptrace,
)

DEFAULT_TOL = 1e-6
MODELS = ("dctc", "pctc")
AXIOMS = ("naturality", "strength", "sliding", "vanishing", "yanking", "terminality")

EXPECTED = {
    ("yanking", "dctc"): "fail",
    ("terminality", "pctc"): "fail",
}


# ---------------------------------------------------------------------------
# random objects
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RandomChannelSpec:
    in_dims: tuple
    out_dims: tuple
    kraus_rank: int = 1
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "in_dims", tuple(self.in_dims))
        object.__setattr__(self, "out_dims", tuple(self.out_dims))
        if self.kraus_rank < 1:
            raise ValueError("kraus_rank must be at least 1")


def random_cptp(spec: RandomChannelSpec, rng: np.random.Generator | None = None) -> QChannel:
    """Kraus blocks of a Haar-like random isometry ``C^d_in -> C^(rank * d_out)``.

    The rank is raised to ``ceil(d_in / d_out)`` when it is too small for an isometry.
    """
    rng = np.random.default_rng(spec.seed) if rng is None else rng
    din, dout, r = _prod(spec.in_dims), _prod(spec.out_dims), spec.kraus_rank
    # the isometry needs at least din rows
    r = max(r, -(-din // dout))
    z = rng.normal(size=(r * dout, din)) + 1j * rng.normal(size=(r * dout, din))
    q, rr = np.linalg.qr(z)
    q = q * (np.diag(rr) / np.abs(np.diag(rr)))  # fix column phases
    ks = tuple(q[j * dout:(j + 1) * dout] for j in range(r))
    ch = QChannel(ks, spec.in_dims, spec.out_dims, tp=True)
    return ch


def random_pure(dims: Sequence[int], rng: np.random.Generator) -> DensityMatrix:
    d = _prod(dims)
    v = rng.normal(size=d) + 1j * rng.normal(size=d)
    v /= np.linalg.norm(v)
    return DensityMatrix(np.outer(v, v.conj()), tuple(dims))


def random_density(dims: Sequence[int], rng: np.random.Generator, rank: int | None = None) -> DensityMatrix:
    d = _prod(dims)
    r = d if rank is None else rank
    g = rng.normal(size=(d, r)) + 1j * rng.normal(size=(d, r))
    m = g @ g.conj().T
    return DensityMatrix(m / np.trace(m).real, tuple(dims))


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, trial]))


def max_entangled_probe(dims: Sequence[int]) -> DensityMatrix:
    d = _prod(dims)
    v = np.eye(d).reshape(-1) / math.sqrt(d)
    return DensityMatrix(np.outer(v, v), tuple(dims) + (d,))


def probes_for(dims: Sequence[int], rng: np.random.Generator, count: int = 3) -> list[DensityMatrix]:
    """The maximally entangled probe and ``count`` random pure states with an ancilla."""
    d = _prod(dims)
    out = [max_entangled_probe(dims)]
    out += [random_pure(tuple(dims) + (d,), rng) for _ in range(count)]
    return out


# ---------------------------------------------------------------------------
# the two models behind one interface
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Model:
    name: str
    close: Callable
    embed: Callable
    compose: Callable
    tensor: Callable
    run: Callable


def _dctc_run(m, rho):
    return dctc.eval_dmix(m, rho)


def _pctc_run(m, rho):
    return pctc.pctc_run(m, rho).state


DCTC = Model("dctc", dctc.xi_dctc, dctc.embed, dctc.compose_dmix, dctc.tensor_dmix, _dctc_run)
PCTC = Model("pctc", pctc.xi_pctc, pctc.mixsym_lift, pctc.mixsym_compose, pctc.mixsym_tensor,
             _pctc_run)


def get_model(name) -> Model:
    if isinstance(name, Model):
        return name
    try:
        return {"dctc": DCTC, "pctc": PCTC}[name]
    except KeyError:
        raise ValueError(f"unknown model {name!r}; expected one of {MODELS}") from None


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------

@dataclass
class AxiomReport:
    axiom: str
    model: str
    trials: int
    max_deviation: float
    tolerance: float
    failures: list = field(default_factory=list)   # (trial seed label, deviation)
    skipped: list = field(default_factory=list)    # trials with a zero-probability outcome
    witness: dict = field(default_factory=dict)

    @property
    def verdict(self) -> str:
        return "pass" if self.max_deviation <= self.tolerance else "fail"

    @property
    def expected(self) -> str:
        return EXPECTED.get((self.axiom, self.model), "pass")

    @property
    def as_expected(self) -> bool:
        return self.verdict == self.expected

    def label(self) -> str:
        v = self.verdict
        return f"{v} (expected)" if v == self.expected else f"{v} (UNEXPECTED)"

    def as_dict(self) -> dict:
        return {
            "axiom": self.axiom,
            "model": self.model,
            "trials": self.trials,
            "max_deviation": self.max_deviation,
            "tolerance": self.tolerance,
            "verdict": self.verdict,
            "expected": self.expected,
            "label": self.label(),
            "failures": [[s, d] for s, d in sorted(self.failures)],
            "skipped": sorted(self.skipped),
            "witness": self.witness,
        }


class _Tally:
    def __init__(self, axiom, model, tol):
        self.report = AxiomReport(axiom, model.name, 0, 0.0, tol)

    def trial(self, label, pairs):
        """Record one trial; ``pairs`` yields (lhs state or None, rhs state or None)."""
        r = self.report
        r.trials += 1
        worst = 0.0
        for a, b in pairs:
            if a is None or b is None:
                if a is None and b is None:
                    continue
                r.skipped.append(label)
                return 0.0
            worst = max(worst, trace_distance_matrices(a.matrix, b.matrix))
        r.max_deviation = max(r.max_deviation, worst)
        if worst > r.tolerance:
            r.failures.append((label, worst))
        return worst


def _dims_for(dims: Sequence[int], t: int) -> int:
    return int(dims[t % len(dims)])


def _rank(rng) -> int:
    return int(rng.integers(1, 3))


def _compare(model: Model, m1, m2, probes) -> list:
    return [(model.run(m1, p), model.run(m2, p)) for p in probes]


# ---------------------------------------------------------------------------
# the axioms
# ---------------------------------------------------------------------------

def check_naturality(model="dctc", trials: int = 50, dims: Sequence[int] = (2, 3),
                     seed: int = 0, tol: float = DEFAULT_TOL, probes: int = 3) -> AxiomReport:
    """Pre- and post-processing on the CR wires commutes with closing the loop."""
    model = get_model(model)
    tally = _Tally("naturality", model, tol)
    for t in range(trials):
        rng = trial_rng(seed, t)
        d = _dims_for(dims, t)
        h, k, c = (d,), (d,), (2,)
        phi = random_cptp(RandomChannelSpec(h + c, k + c, _rank(rng)), rng)
        a = random_cptp(RandomChannelSpec(h, h, _rank(rng)), rng)
        b = random_cptp(RandomChannelSpec(k, k, _rank(rng)), rng)
        inner = compose(lift(b, c), compose(phi, lift(a, c)))
        lhs = model.close(inner, c)
        rhs = model.compose(model.embed(b), model.compose(model.close(phi, c), model.embed(a)))
        tally.trial(t, _compare(model, lhs, rhs, probes_for(h, rng, probes)))
    return tally.report


def check_strength(model="dctc", trials: int = 50, dims: Sequence[int] = (2, 3),
                   seed: int = 0, tol: float = DEFAULT_TOL, probes: int = 3) -> AxiomReport:
    """A channel running beside the loop can be pulled out of it."""
    model = get_model(model)
    tally = _Tally("strength", model, tol)
    for t in range(trials):
        rng = trial_rng(seed, t)
        d = _dims_for(dims, t)
        h, c, e = (d,), (2,), (2,)
        phi = random_cptp(RandomChannelSpec(h + c, h + c, _rank(rng)), rng)
        psi = random_cptp(RandomChannelSpec(e, e, _rank(rng)), rng)
        lhs = model.close(tensor(psi, phi), c)
        rhs = model.tensor(model.embed(psi), model.close(phi, c))
        tally.trial(t, _compare(model, lhs, rhs, probes_for(e + h, rng, probes)))
    return tally.report


def check_sliding(model="dctc", trials: int = 50, dims: Sequence[int] = (2, 3),
                  seed: int = 0, tol: float = DEFAULT_TOL, probes: int = 3) -> AxiomReport:
    """A channel on the loop may slide from its output end to its input end.

    ``phi: H (x) C' -> K (x) C`` and ``g: C -> C'`` with ``C`` and ``C'`` of
    different dimension.
    """
    model = get_model(model)
    tally = _Tally("sliding", model, tol)
    for t in range(trials):
        rng = trial_rng(seed, t)
        d = _dims_for(dims, t)
        h = (2,)
        c = (d,)
        c2 = (5 - d,) if d in (2, 3) else (d + 1,)
        phi = random_cptp(RandomChannelSpec(h + c2, h + c, _rank(rng)), rng)
        g = random_cptp(RandomChannelSpec(c, c2, _rank(rng)), rng)
        lhs = model.close(compose(_id_tensor(h, g), phi), c2)
        rhs = model.close(compose(phi, _id_tensor(h, g)), c)
        tally.trial(t, _compare(model, lhs, rhs, probes_for(h, rng, probes)))
    return tally.report


def _id_tensor(h, g: QChannel) -> QChannel:
    return tensor(identity_channel(h), g)


def check_vanishing(model="dctc", trials: int = 20, dims: Sequence[int] = (2, 3),
                    seed: int = 0, tol: float = DEFAULT_TOL, probes: int = 3) -> AxiomReport:
    """Closing a loop on the trivial system changes nothing."""
    model = get_model(model)
    tally = _Tally("vanishing", model, tol)
    for t in range(trials):
        rng = trial_rng(seed, t)
        d = _dims_for(dims, t)
        h = (d,)
        f = random_cptp(RandomChannelSpec(h, h, _rank(rng)), rng)
        lhs = model.close(f, ())
        rhs = model.embed(f)
        tally.trial(t, _compare(model, lhs, rhs, probes_for(h, rng, probes)))
    return tally.report


def check_yanking(model="dctc", dims: Sequence[int] = (2, 3), trials: int = 10,
                  seed: int = 0, tol: float | None = None, probes: int = 3) -> AxiomReport:
    """Closing a swap should give the identity; the Bell-probe deviation is recorded."""
    model = get_model(model)
    tol = (1e-9 if model.name == "pctc" else DEFAULT_TOL) if tol is None else tol
    tally = _Tally("yanking", model, tol)
    bell = {}
    local = 0.0
    for t in range(trials):
        rng = trial_rng(seed, t)
        d = _dims_for(dims, t)
        sw = channel_from_unitary(swap_matrix(d), (d, d))
        lhs = model.close(sw, (d,))
        rhs = model.embed(identity_channel((d,)))
        ps = probes_for((d,), rng, probes)
        tally.trial(t, _compare(model, lhs, rhs, ps))
        if str(d) not in bell:
            a, b = model.run(lhs, ps[0]), model.run(rhs, ps[0])
            bell[str(d)] = trace_distance_matrices(a.matrix, b.matrix)
        # the same comparison without an ancilla
        single = random_density((d,), rng)
        a, b = model.run(lhs, single), model.run(rhs, single)
        local = max(local, trace_distance_matrices(a.matrix, b.matrix))
    tally.report.witness = {"bell_probe_deviation": bell, "single_system_deviation": local}
    return tally.report


def grandfather_unitary() -> np.ndarray:
    """CNOT controlled by the loop qubit onto the CR qubit, then a swap."""
    x = np.array([[0, 1], [1, 0]], dtype=complex)
    sw = swap_matrix()
    cnot_loop_control = sw @ controlled(x) @ sw
    return sw @ cnot_loop_control


def check_terminality(model="dctc", trials: int = 100, dims: Sequence[int] = (2, 3),
                      seed: int = 0, tol: float = 1e-8, probes: int = 3) -> AxiomReport:
    """Discarding the output of a loop process equals discarding its input.

    For P-CTC the first trial is the grandfather process, which witnesses the
    failure on the maximally entangled probe.
    """
    model = get_model(model)
    tally = _Tally("terminality", model, tol)
    for t in range(trials):
        rng = trial_rng(seed, t)
        d = _dims_for(dims, t)
        if model.name == "pctc" and t == 0:
            h = k = c = (2,)
            phi = channel_from_unitary(grandfather_unitary(), (2, 2))
        else:
            h = (d,)
            k = (int(rng.integers(2, 4)),)
            c = (2,)
            phi = random_cptp(RandomChannelSpec(h + c, k + c, _rank(rng)), rng)
        m = model.close(phi, c)
        pairs = []
        for p in probes_for(h, rng, probes):
            out = model.run(m, p)
            anc = DensityMatrix(ptrace(p.matrix, p.dims, [1]), p.dims[1:])
            if out is None:
                pairs.append((None, anc))
                continue
            got = DensityMatrix(ptrace(out.matrix, out.dims, [1]), out.dims[1:])
            pairs.append((got, anc))
        dev = tally.trial(t, pairs)
        if model.name == "pctc" and t == 0:
            tally.report.witness = {"grandfather_deviation": dev}
    return tally.report


CHECKS = {
    "naturality": check_naturality,
    "strength": check_strength,
    "sliding": check_sliding,
    "vanishing": check_vanishing,
    "yanking": check_yanking,
    "terminality": check_terminality,
}


def run_suite(model="dctc", trials: int = 50, dims: Sequence[int] = (2, 3),
              seed: int = 0, tol: float = DEFAULT_TOL, probes: int = 3) -> list[AxiomReport]:
    model = get_model(model)
    out = []
    for name in AXIOMS:
        fn = CHECKS[name]
        if name == "yanking":
            out.append(fn(model, dims=dims, seed=seed, probes=probes))
        elif name == "terminality":
            out.append(fn(model, trials=trials, dims=dims, seed=seed, probes=probes))
        else:
            out.append(fn(model, trials=trials, dims=dims, seed=seed, tol=tol, probes=probes))
    return out
