"""Deutsch's fixed-point semantics and the DMix category."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .qcore import (
    CPTP_TOL,
    DensityMatrix,
    DimensionError,
    QChannel,
    _prod,
    apply_kraus_leading,
    identity_channel,
    is_cptp,
    lift,
    permutation_matrix,
    ptrace,
    tensor,
    trace_distance_matrices,
    von_neumann_entropy,
)

LAZY_TOL = 1e-11
LAZY_MAX_ITER = 10 ** 6
EIG_ONE_TOL = 1e-9
SUPPORT_TOL = 1e-9
GRAD_TOL = 1e-9
ENTROPY_STEP_TOL = 1e-12
MIN_EIG = 1e-12
MAX_ITER = 10 ** 4
RESIDUAL_TOL = 1e-8


class SolverError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# elementary morphisms
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ElementaryMorphism:
    """A CPTP interaction ``phi: H (x) C -> K (x) C`` with its CV system ``C`` last."""

    phi: QChannel
    cv_dims: tuple = ()

    def __post_init__(self):
        cv = tuple(int(d) for d in self.cv_dims)
        object.__setattr__(self, "cv_dims", cv)
        n = len(cv)
        if not is_cptp(self.phi, CPTP_TOL):
            raise ValueError("elementary morphisms need a CPTP interaction")
        if n and (self.phi.in_dims[-n:] != cv or self.phi.out_dims[-n:] != cv):
            raise DimensionError(
                f"CV dims {list(cv)} must end both {list(self.phi.in_dims)} and "
                f"{list(self.phi.out_dims)}")

    @property
    def h_dims(self) -> tuple:
        n = len(self.cv_dims)
        return self.phi.in_dims[:len(self.phi.in_dims) - n]

    @property
    def k_dims(self) -> tuple:
        n = len(self.cv_dims)
        return self.phi.out_dims[:len(self.phi.out_dims) - n]

    @property
    def c(self) -> int:
        return _prod(self.cv_dims)

    @property
    def trivial(self) -> bool:
        return self.c == 1


def induced_cv_channel(e: ElementaryMorphism, rho: DensityMatrix) -> QChannel:
    """``sigma -> Tr_{K,E}[(phi (x) id_E)(rho (x) sigma)]`` as a channel on the CV system."""
    h = e.h_dims
    if tuple(rho.dims[:len(h)]) != h:
        raise DimensionError(f"state {list(rho.dims)} does not start with H dims {list(h)}")
    rho_h = ptrace(rho.matrix, rho.dims, range(len(h))) if len(rho.dims) > len(h) else rho.matrix
    dh, dk, c = _prod(h), _prod(e.k_dims), e.c
    vals, vecs = np.linalg.eigh((rho_h + rho_h.conj().T) / 2)
    ks = []
    for lam, v in zip(vals, vecs.T):
        if lam <= 1e-15:
            continue
        # (I_{H} -> |v> (x) I_C) embedding, then project K onto basis vector k
        emb = np.kron(v.reshape(dh, 1), np.eye(c)) * math.sqrt(lam)
        for kop in e.phi.kraus:
            m = (kop @ emb).reshape(dk, c, c)
            ks.extend(m[j] for j in range(dk))
    ch = QChannel(tuple(ks), e.cv_dims, e.cv_dims, tp=False).simplify()
    return QChannel(ch.kraus, e.cv_dims, e.cv_dims, tp=True)


# ---------------------------------------------------------------------------
# fixed points
# ---------------------------------------------------------------------------

def _vec_to_mat(v: np.ndarray, c: int) -> np.ndarray:
    return v.reshape(c, c)


def lazy_fixed_point(t: QChannel, tol: float = LAZY_TOL,
                     max_iter: int = LAZY_MAX_ITER) -> DensityMatrix:
    """Maximal-support fixed state of ``t`` as the limit of ``rho -> (rho + t(rho)) / 2``.

    The lazy map is iterated by repeated squaring of its superoperator, so after
    ``k`` rounds the state equals ``2**k`` plain lazy steps from ``I/c``.
    """
    return _lazy_fixed_point(t, tol, max_iter)[0]


def _lazy_fixed_point(t: QChannel, tol: float, max_iter: int) -> tuple[DensityMatrix, int]:
    c = t.d_in
    if t.d_out != c:
        raise DimensionError("fixed points need a channel from a system to itself")
    start = (np.eye(c) / c).reshape(-1)
    lazy = (np.eye(c * c) + t.supermatrix) / 2
    power = lazy
    steps = 1
    state = start
    while True:
        state = power @ start
        m = _vec_to_mat(state, c)
        m = (m + m.conj().T) / 2
        m = m / np.trace(m).real
        if trace_distance_matrices(m, t(m)) <= tol:
            break
        if steps >= max_iter:
            break
        power = power @ power
        steps *= 2
    # polish with plain lazy steps; squaring can leave round-off behind
    for _ in range(50):
        nxt = (m + t(m)) / 2
        nxt = (nxt + nxt.conj().T) / 2
        nxt = nxt / np.trace(nxt).real
        steps += 1
        if trace_distance_matrices(nxt, m) < 1e-15:
            m = nxt
            break
        m = nxt
    if trace_distance_matrices(m, t(m)) > tol:
        raise SolverError(f"lazy iteration did not converge after {steps} steps")
    vals, vecs = np.linalg.eigh(m)
    vals = np.clip(vals, 0, None)
    m = (vecs * vals) @ vecs.conj().T
    m = m / np.trace(m).real
    return DensityMatrix(m, t.in_dims), steps


def _hermitian_basis(c: int) -> list[np.ndarray]:
    """Orthonormal (Hilbert-Schmidt) real basis of c x c Hermitian matrices."""
    basis = []
    for i in range(c):
        m = np.zeros((c, c), dtype=complex)
        m[i, i] = 1
        basis.append(m)
    for i in range(c):
        for j in range(i + 1, c):
            m = np.zeros((c, c), dtype=complex)
            m[i, j] = m[j, i] = 1 / math.sqrt(2)
            basis.append(m)
            m = np.zeros((c, c), dtype=complex)
            m[i, j] = -1j / math.sqrt(2)
            m[j, i] = 1j / math.sqrt(2)
            basis.append(m)
    return basis


@dataclass(frozen=True, eq=False)
class FixedPointSpace:
    dim: int
    anchor: DensityMatrix
    directions: tuple
    support: np.ndarray = field(repr=False)
    lazy_steps: int = 0

    @property
    def n_directions(self) -> int:
        return len(self.directions)

    def point(self, x: Sequence[float]) -> np.ndarray:
        m = self.anchor.matrix.copy()
        for xi, d in zip(x, self.directions):
            m = m + xi * d
        return m


def fixed_point_space(t: QChannel) -> FixedPointSpace:
    c = t.d_in
    anchor, steps = _lazy_fixed_point(t, LAZY_TOL, LAZY_MAX_ITER)
    vals, vecs = np.linalg.eigh(anchor.matrix)
    support = vecs[:, vals > SUPPORT_TOL * max(1.0, vals[-1])]
    if c == 1:
        return FixedPointSpace(c, anchor, (), support, steps)
    basis = _hermitian_basis(c)
    # real matrix of t in the Hermitian basis
    images = [t(b) for b in basis]
    real_t = np.array([[np.real(np.vdot(basis[a], images[b])) for b in range(len(basis))]
                       for a in range(len(basis))])
    _, s, wh = np.linalg.svd(real_t - np.eye(len(basis)))
    null = wh[s <= EIG_ONE_TOL]
    fixed = [sum(coef * b for coef, b in zip(row, basis)) for row in null]
    # traceless combinations of the fixed Hermitian operators
    traces = np.array([np.trace(f).real for f in fixed])
    if len(fixed) == 0:
        return FixedPointSpace(c, anchor, (), support, steps)
    _, _, vt = np.linalg.svd(traces.reshape(1, -1))
    rank = 1 if np.linalg.norm(traces) > 1e-12 else 0
    combos = vt[rank:]
    proj = support @ support.conj().T
    dirs: list[np.ndarray] = []
    for row in combos:
        d = sum(coef * f for coef, f in zip(row, fixed))
        d = proj @ d @ proj
        d = (d + d.conj().T) / 2
        d = d - np.trace(d).real / max(support.shape[1], 1) * proj
        for prev in dirs:
            d = d - np.real(np.vdot(prev, d)) * prev
        norm = np.linalg.norm(d)
        if norm > 1e-7:
            dirs.append(d / norm)
    return FixedPointSpace(c, anchor, tuple(dirs), support, steps)


@dataclass(frozen=True)
class SolverDiagnostics:
    iterations: int
    residual: float
    entropy: float
    boundary: bool
    converged: bool
    gradient_norm: float
    lazy_steps: int = 0
    n_directions: int = 0

    def as_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "residual": self.residual,
            "entropy": self.entropy,
            "boundary": self.boundary,
            "converged": self.converged,
            "gradient_norm": self.gradient_norm,
            "lazy_steps": self.lazy_steps,
            "fixed_space_directions": self.n_directions,
        }


@dataclass(frozen=True, eq=False)
class FixedPointResult:
    state: DensityMatrix
    diagnostics: SolverDiagnostics


def _entropy_bits(vals: np.ndarray) -> float:
    v = vals[vals > 0]
    return float(-np.sum(v * np.log2(v)))


def solve_max_entropy(t: QChannel, start: Sequence[float] | None = None,
                      space: FixedPointSpace | None = None) -> FixedPointResult:
    """Maximise the von Neumann entropy over the fixed states of ``t``.

    Ascent runs on the support of the maximal-support anchor, in coordinates of
    the traceless fixed directions. Steps are Newton-preconditioned (the entropy
    Hessian comes from the divided differences of ``log``) and halved while the
    iterate leaves the positive cone or loses entropy.
    """
    space = space or fixed_point_space(t)
    v = space.support
    r = v.shape[1]
    a = v.conj().T @ space.anchor.matrix @ v
    dirs = [v.conj().T @ d @ v for d in space.directions]
    n = len(dirs)
    x = np.zeros(n) if start is None else np.array(start, dtype=float)

    def restricted(xv):
        m = a.copy()
        for xi, d in zip(xv, dirs):
            m = m + xi * d
        return (m + m.conj().T) / 2

    iterations = 0
    gnorm = 0.0
    converged = n == 0
    m = restricted(x)
    vals, vecs = np.linalg.eigh(m)
    if vals[0] < MIN_EIG:
        if start is None:
            raise SolverError("anchor is not positive definite on its support")
        x = np.zeros(n)
        m = restricted(x)
        vals, vecs = np.linalg.eigh(m)
    ent = _entropy_bits(vals)
    while n and iterations < MAX_ITER:
        iterations += 1
        logs = np.log(vals)
        rot = [vecs.conj().T @ d @ vecs for d in dirs]
        grad = np.array([-np.sum(np.diag(rd).real * logs) for rd in rot]) / math.log(2)
        gnorm = float(np.linalg.norm(grad))
        if gnorm <= GRAD_TOL:
            converged = True
            break
        diff = vals[:, None] - vals[None, :]
        close = np.abs(diff) < 1e-14
        safe = np.where(close, 1.0, diff)
        gamma = np.where(close, 1.0 / vals[:, None] + 0 * diff, (logs[:, None] - logs[None, :]) / safe)
        hess = np.empty((n, n))
        for j in range(n):
            gj = gamma * rot[j]
            for i in range(j, n):
                hess[i, j] = hess[j, i] = -np.sum(rot[i].conj() * gj).real / math.log(2)
        try:
            step = np.linalg.solve(-hess, grad)
        except np.linalg.LinAlgError:
            step = grad
        if np.dot(step, grad) <= 0:
            step = grad
        t_len = 1.0
        accepted = False
        for _ in range(60):
            x_new = x + t_len * step
            m_new = restricted(x_new)
            vals_new, vecs_new = np.linalg.eigh(m_new)
            if vals_new[0] >= MIN_EIG:
                ent_new = _entropy_bits(vals_new)
                if ent_new >= ent - 1e-15:
                    accepted = True
                    break
            t_len /= 2
        if not accepted:
            break
        gain = ent_new - ent
        x, vals, vecs, ent = x_new, vals_new, vecs_new, ent_new
        if gain <= ENTROPY_STEP_TOL and t_len == 1.0:
            # full Newton step with negligible gain: at the optimum to working precision
            converged = True
            break
    full = v @ restricted(x) @ v.conj().T
    full = (full + full.conj().T) / 2
    w, u = np.linalg.eigh(full)
    full = (u * np.clip(w, 0, None)) @ u.conj().T
    full = full / np.trace(full).real
    residual = trace_distance_matrices(full, t(full))
    boundary = bool(vals[0] < 1e-9) if r else False
    diag = SolverDiagnostics(iterations, float(residual), von_neumann_entropy(full), boundary,
                             converged and residual <= RESIDUAL_TOL, gnorm, space.lazy_steps, n)
    return FixedPointResult(DensityMatrix(full, t.in_dims), diag)


def max_entropy_fixed_point(t: QChannel) -> DensityMatrix:
    return solve_max_entropy(t).state


# ---------------------------------------------------------------------------
# the D-CTC super-operator
# ---------------------------------------------------------------------------

def _close_with(e: ElementaryMorphism, rho: DensityMatrix, tau: np.ndarray) -> DensityMatrix:
    """``Tr_C[(phi (x) id_E)(rho (x) tau)]`` with the CV wire moved next to ``H``."""
    h, k = e.h_dims, e.k_dims
    anc = tuple(rho.dims[len(h):])
    dh, dk, c, de = _prod(h), _prod(k), e.c, _prod(anc)
    # rho on H.E  (x) tau on C  ->  H.C.E
    joint = np.kron(rho.matrix, tau).reshape(dh, de, c, dh, de, c)
    joint = joint.transpose(0, 2, 1, 3, 5, 4).reshape(dh * c * de, dh * c * de)
    out = apply_kraus_leading(e.phi.kraus, joint, de)
    out = out.reshape(dk, c, de, dk, c, de)
    out = np.einsum("acbdce->abde", out).reshape(dk * de, dk * de)
    out = (out + out.conj().T) / 2
    out = out / np.trace(out).real
    return DensityMatrix(out, k + anc)


def dctc_apply(e: ElementaryMorphism, rho: DensityMatrix,
               with_diagnostics: bool = False):
    if e.trivial:
        out = _close_with(e, rho, np.ones((1, 1)))
        if with_diagnostics:
            diag = SolverDiagnostics(0, 0.0, 0.0, False, True, 0.0)
            return out, FixedPointResult(DensityMatrix.scalar(), diag)
        return out
    t = induced_cv_channel(e, rho)
    fp = solve_max_entropy(t)
    out = _close_with(e, rho, fp.state.matrix)
    return (out, fp) if with_diagnostics else out


# ---------------------------------------------------------------------------
# DMix morphisms
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DMixMorphism:
    """Finite sequence of elementary morphisms; equality is extensional (``equiv_dmix``)."""

    steps: tuple
    in_dims: tuple
    out_dims: tuple

    def __post_init__(self):
        steps = tuple(self.steps)
        object.__setattr__(self, "steps", steps)
        object.__setattr__(self, "in_dims", tuple(self.in_dims))
        object.__setattr__(self, "out_dims", tuple(self.out_dims))
        cur = self.in_dims
        for s in steps:
            if s.h_dims != cur:
                raise DimensionError(f"step expects {list(s.h_dims)}, chain carries {list(cur)}")
            cur = s.k_dims
        if cur != self.out_dims:
            raise DimensionError(f"chain ends with {list(cur)}, declared {list(self.out_dims)}")

    @classmethod
    def identity(cls, dims: Sequence[int]) -> "DMixMorphism":
        return cls((), tuple(dims), tuple(dims))

    @classmethod
    def from_steps(cls, steps: Sequence[ElementaryMorphism]) -> "DMixMorphism":
        return cls(tuple(steps), steps[0].h_dims, steps[-1].k_dims)

    def __len__(self) -> int:
        return len(self.steps)

    def __repr__(self) -> str:
        cvs = [list(s.cv_dims) for s in self.steps]
        return f"DMixMorphism({list(self.in_dims)} -> {list(self.out_dims)}, cv={cvs})"


def embed(f: QChannel) -> DMixMorphism:
    if not is_cptp(f):
        raise ValueError("only CPTP maps embed into DMix")
    return DMixMorphism((ElementaryMorphism(f, ()),), f.in_dims, f.out_dims)


def xi_dctc(phi: QChannel, cv_dims: Sequence[int]) -> DMixMorphism:
    """Close the trailing CV wires of ``phi`` with a Deutsch loop."""
    e = ElementaryMorphism(phi, tuple(cv_dims))
    return DMixMorphism((e,), e.h_dims, e.k_dims)


def compose_dmix(g: DMixMorphism, f: DMixMorphism) -> DMixMorphism:
    """``g`` after ``f``: concatenation of step lists."""
    if f.out_dims != g.in_dims:
        raise DimensionError(f"cannot compose: {list(f.out_dims)} vs {list(g.in_dims)}")
    return DMixMorphism(f.steps + g.steps, f.in_dims, g.out_dims)


def widen(e: ElementaryMorphism, before: tuple, after: tuple) -> ElementaryMorphism:
    """Elementary morphism acting as ``id_before (x) e (x) id_after`` with CV kept last."""
    h, k, cv = e.h_dims, e.k_dims, e.cv_dims
    nb, na, nh, nk, nc = len(before), len(after), len(h), len(k), len(cv)
    # phi (x) id_(before+after) on  H C B A, then reorder
    core = lift(e.phi, before + after)
    in_layout = h + cv + before + after
    # wanted input order: B H A C ; map positions in core's input layout
    want_in = (list(range(nh + nc, nh + nc + nb)) + list(range(nh))
               + list(range(nh + nc + nb, nh + nc + nb + na)) + list(range(nh, nh + nc)))
    p_in = permutation_matrix(in_layout, want_in)  # core layout -> wanted layout
    out_layout = k + cv + before + after
    want_out = (list(range(nk + nc, nk + nc + nb)) + list(range(nk))
                + list(range(nk + nc + nb, nk + nc + nb + na)) + list(range(nk, nk + nc)))
    p_out = permutation_matrix(out_layout, want_out)
    ks = tuple(p_out @ kop @ p_in.T for kop in core.kraus)
    new_in = before + h + after + cv
    new_out = before + k + after + cv
    return ElementaryMorphism(QChannel(ks, new_in, new_out, tp=True), cv)


def tensor_dmix(f: DMixMorphism, g: DMixMorphism) -> DMixMorphism:
    """Parallel composition with one loop per factor step.

    Each step of ``f`` is widened by ``id`` on the domain of ``g`` and then each
    step of ``g`` by ``id`` on the codomain of ``f``. Loops stay separate, which
    makes the interchange law hold (a shared loop would not satisfy it).
    """
    steps = [widen(s, (), g.in_dims) for s in f.steps]
    steps += [widen(s, f.out_dims, ()) for s in g.steps]
    return DMixMorphism(tuple(steps), f.in_dims + g.in_dims, f.out_dims + g.out_dims)


def tensor_dmix_shared(f: ElementaryMorphism, g: ElementaryMorphism) -> ElementaryMorphism:
    """Single elementary morphism with the two CV systems merged into one loop.

    Kept for comparison with :func:`tensor_dmix`; it breaks interchange.
    """
    hf, kf, cf = f.h_dims, f.k_dims, f.cv_dims
    hg, kg, cg = g.h_dims, g.k_dims, g.cv_dims
    core = tensor(f.phi, g.phi)  # Hf Cf Hg Cg -> Kf Cf Kg Cg
    a, b, c_, d = len(hf), len(cf), len(hg), len(cg)
    in_layout = hf + cf + hg + cg
    want_in = (list(range(a)) + list(range(a + b, a + b + c_)) + list(range(a, a + b))
               + list(range(a + b + c_, a + b + c_ + d)))
    a2, c2 = len(kf), len(kg)
    out_layout = kf + cf + kg + cg
    want_out = (list(range(a2)) + list(range(a2 + b, a2 + b + c2)) + list(range(a2, a2 + b))
                + list(range(a2 + b + c2, a2 + b + c2 + d)))
    p_in = permutation_matrix(in_layout, want_in)
    p_out = permutation_matrix(out_layout, want_out)
    ks = tuple(p_out @ kop @ p_in.T for kop in core.kraus)
    return ElementaryMorphism(QChannel(ks, hf + hg + cf + cg, kf + kg + cf + cg), cf + cg)


def eval_dmix(m: DMixMorphism, rho: DensityMatrix, trace: list | None = None) -> DensityMatrix:
    """Run each step with Deutsch's prescription, threading the ancilla suffix."""
    n = len(m.in_dims)
    if tuple(rho.dims[:n]) != m.in_dims:
        raise DimensionError(f"state {list(rho.dims)} does not start with {list(m.in_dims)}")
    cur = rho
    for s in m.steps:
        out, fp = dctc_apply(s, cur, with_diagnostics=True)
        if trace is not None and not s.trivial:
            trace.append(fp)
        cur = out
    return cur


def simplify_dmix(m: DMixMorphism) -> DMixMorphism:
    """Merge runs of trivial-CV steps into single embedded channels."""
    from .qcore import compose
    steps: list[ElementaryMorphism] = []
    for s in m.steps:
        if s.trivial and steps and steps[-1].trivial:
            merged = compose(s.phi, steps[-1].phi)
            steps[-1] = ElementaryMorphism(QChannel(merged.kraus, merged.in_dims, merged.out_dims),
                                           ())
        else:
            steps.append(s)
    return DMixMorphism(tuple(steps), m.in_dims, m.out_dims)


# ---------------------------------------------------------------------------
# equivalence oracle
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ProbeConfig:
    count: int = 20
    tol: float = 1e-7
    seed: int = 0


def probe_states(in_dims: Sequence[int], config: ProbeConfig = ProbeConfig()) -> list[DensityMatrix]:
    in_dims = tuple(in_dims)
    d = _prod(in_dims)
    probes = []
    v = np.eye(d).reshape(-1) / math.sqrt(d)
    probes.append(DensityMatrix(np.outer(v, v), in_dims + (d,)))
    for i in range(d):
        probes.append(DensityMatrix.basis(i, in_dims) if in_dims else DensityMatrix.scalar())
    rng = np.random.default_rng(config.seed)
    for _ in range(config.count):
        w = rng.normal(size=d * d) + 1j * rng.normal(size=d * d)
        w /= np.linalg.norm(w)
        probes.append(DensityMatrix(np.outer(w, w.conj()), in_dims + (d,)))
    return probes


@dataclass(frozen=True)
class Equivalence:
    equal: bool
    deviation: float

    def __bool__(self) -> bool:
        return self.equal


def equiv_dmix(m1: DMixMorphism, m2: DMixMorphism,
               config: ProbeConfig = ProbeConfig()) -> Equivalence:
    """Approximate extensional equality on a seeded family of entangled probes."""
    if m1.in_dims != m2.in_dims or m1.out_dims != m2.out_dims:
        raise DimensionError("morphisms have different types")
    worst = 0.0
    for p in probe_states(m1.in_dims, config):
        a, b = eval_dmix(m1, p), eval_dmix(m2, p)
        worst = max(worst, trace_distance_matrices(a.matrix, b.matrix))
    return Equivalence(worst <= config.tol, worst)


def max_pairwise_deviation(ms: Sequence[DMixMorphism],
                           config: ProbeConfig = ProbeConfig()) -> float:
    """Largest probe deviation over all pairs, evaluating each morphism once."""
    if len(ms) < 2:
        return 0.0
    probes = probe_states(ms[0].in_dims, config)
    outs = [[eval_dmix(m, p).matrix for p in probes] for m in ms]
    worst = 0.0
    for i in range(len(ms)):
        for j in range(i + 1, len(ms)):
            for a, b in zip(outs[i], outs[j]):
                worst = max(worst, trace_distance_matrices(a, b))
    return worst


def identity_elementary(dims: Sequence[int]) -> ElementaryMorphism:
    return ElementaryMorphism(identity_channel(tuple(dims)), ())
