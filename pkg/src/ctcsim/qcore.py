"""Dense density matrices, Kraus-form channels and the gate/spider library.

Conventions
-----------
* Operators act on column vectors; composite systems use ``np.kron`` order,
  so the first entry of a dimension list is the most significant index.
* Superoperators use row-major vectorisation: ``vec(A X B) = (A kron B^T) vec(X)``,
  hence a Kraus set ``{K}`` linearises to ``sum_K K kron conj(K)``.
* Entropies are in bits.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property, reduce
from typing import Iterable, Sequence

import numpy as np

HERMITIAN_TOL = 1e-10
PSD_TOL = 1e-10
TRACE_TOL = 1e-10
CPTP_TOL = 1e-9

Dims = tuple[int, ...]


class DimensionError(ValueError):
    """Raised when subsystem dimensions do not line up."""


class InvalidStateError(ValueError):
    """Raised when a matrix is not a normalised density matrix."""


def _prod(dims: Iterable[int]) -> int:
    return int(reduce(lambda a, b: a * b, dims, 1))


def _as_dims(dims: Iterable[int]) -> Dims:
    out = tuple(int(d) for d in dims)
    if any(d < 1 for d in out):
        raise DimensionError(f"subsystem dimensions must be >= 1, got {out}")
    return out


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


# ---------------------------------------------------------------------------
# raw-array helpers
# ---------------------------------------------------------------------------

def ptrace(mat: np.ndarray, dims: Sequence[int], keep: Sequence[int]) -> np.ndarray:
    """Partial trace of a square operator on ``dims``, keeping ``keep`` in original order."""
    dims = list(dims)
    n = len(dims)
    keep = sorted(set(keep))
    for k in keep:
        if not 0 <= k < n:
            raise DimensionError(f"subsystem index {k} out of range for {n} systems")
    if len(keep) == n:
        return np.asarray(mat)
    t = np.asarray(mat).reshape(dims + dims)
    traced = [i for i in range(n) if i not in keep]
    # einsum with explicit labels: row labels 0..n-1, column labels n..2n-1
    row = list(range(n))
    col = [n + i for i in range(n)]
    for i in traced:
        col[i] = row[i]
    out_labels = [row[i] for i in keep] + [col[i] for i in keep]
    res = np.einsum(t, row + col, out_labels)
    d = _prod(dims[i] for i in keep)
    return res.reshape(d, d)


def permute_operator(mat: np.ndarray, dims: Sequence[int], perm: Sequence[int]) -> np.ndarray:
    """Reorder subsystems so that new subsystem ``k`` is old subsystem ``perm[k]``."""
    dims = list(dims)
    n = len(dims)
    perm = list(perm)
    if sorted(perm) != list(range(n)):
        raise DimensionError(f"{perm} is not a permutation of {n} subsystems")
    t = np.asarray(mat).reshape(dims + dims)
    t = t.transpose(perm + [n + p for p in perm])
    d = _prod(dims)
    return t.reshape(d, d)


def permutation_matrix(dims: Sequence[int], perm: Sequence[int]) -> np.ndarray:
    """Unitary ``P`` with ``P (x_0 kron ... ) = x_perm[0] kron ...``."""
    dims = list(dims)
    n = len(dims)
    perm = list(perm)
    if sorted(perm) != list(range(n)):
        raise DimensionError(f"{perm} is not a permutation of {n} subsystems")
    d = _prod(dims)
    eye = np.eye(d).reshape(dims + [d])
    # column j of P is the permuted basis vector; transpose the row multi-index
    return eye.transpose(perm + [n]).reshape(d, d)


def apply_kraus(kraus: Sequence[np.ndarray], mat: np.ndarray) -> np.ndarray:
    return sum(k @ mat @ k.conj().T for k in kraus)


def apply_kraus_leading(kraus: Sequence[np.ndarray], mat: np.ndarray, d_rest: int) -> np.ndarray:
    """Apply ``Phi kron id_rest`` where ``Phi`` acts on the leading factor."""
    if d_rest == 1:
        return apply_kraus(kraus, mat)
    d_in = kraus[0].shape[1]
    d_out = kraus[0].shape[0]
    t = np.asarray(mat).reshape(d_in, d_rest, d_in, d_rest)
    out = np.zeros((d_out, d_rest, d_out, d_rest), dtype=complex)
    for k in kraus:
        out += np.einsum("ai,irjs,bj->arbs", k, t, k.conj(), optimize=True)
    return out.reshape(d_out * d_rest, d_out * d_rest)


def trace_distance_matrices(a: np.ndarray, b: np.ndarray) -> float:
    diff = np.asarray(a) - np.asarray(b)
    diff = (diff + diff.conj().T) / 2
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(diff))))


# ---------------------------------------------------------------------------
# states
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Normalised Hermitian PSD operator with an explicit subsystem split."""

    matrix: np.ndarray
    dims: Dims = field(default=())

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise InvalidStateError(f"density matrix must be square, got shape {m.shape}")
        dims = _as_dims(self.dims) if self.dims else (m.shape[0],) if m.shape[0] > 1 else ()
        if _prod(dims) != m.shape[0]:
            raise DimensionError(f"dims {dims} do not match matrix side {m.shape[0]}")
        if not np.all(np.isfinite(m)):
            raise InvalidStateError("density matrix has non-finite entries")
        if np.max(np.abs(m - m.conj().T), initial=0.0) > HERMITIAN_TOL:
            raise InvalidStateError("density matrix is not Hermitian")
        if abs(np.trace(m) - 1) > TRACE_TOL:
            raise InvalidStateError(f"density matrix has trace {np.trace(m).real:.3e}, not 1")
        if np.linalg.eigvalsh((m + m.conj().T) / 2)[0] < -PSD_TOL:
            raise InvalidStateError("density matrix is not positive semidefinite")
        object.__setattr__(self, "matrix", _frozen(m))
        object.__setattr__(self, "dims", dims)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def __repr__(self) -> str:
        return f"DensityMatrix(dims={list(self.dims)})"

    # constructors -----------------------------------------------------------

    @classmethod
    def from_ket(cls, ket: Sequence[complex], dims: Sequence[int] | None = None) -> "DensityMatrix":
        v = np.asarray(ket, dtype=complex).reshape(-1)
        v = v / np.linalg.norm(v)
        return cls(np.outer(v, v.conj()), tuple(dims) if dims is not None else (len(v),))

    @classmethod
    def basis(cls, index: int | Sequence[int], dims: Sequence[int]) -> "DensityMatrix":
        dims = _as_dims(dims)
        if isinstance(index, (int, np.integer)):
            flat = int(index)
        else:
            flat = int(np.ravel_multi_index(tuple(index), dims))
        d = _prod(dims)
        m = np.zeros((d, d), dtype=complex)
        m[flat, flat] = 1
        return cls(m, dims)

    @classmethod
    def maximally_mixed(cls, dims: Sequence[int]) -> "DensityMatrix":
        dims = _as_dims(dims)
        d = _prod(dims)
        return cls(np.eye(d) / d, dims)

    @classmethod
    def maximally_entangled(cls, d: int) -> "DensityMatrix":
        """The normalised cup ``(1/d) sum_ij |ii><jj|`` on ``[d, d]``."""
        v = np.eye(d).reshape(-1) / math.sqrt(d)
        return cls(np.outer(v, v), (d, d))

    @classmethod
    def scalar(cls) -> "DensityMatrix":
        return cls(np.ones((1, 1)), ())


def bell_state() -> DensityMatrix:
    return DensityMatrix.maximally_entangled(2)


def ket_plus() -> DensityMatrix:
    return DensityMatrix.from_ket([1, 1])


def ket_minus() -> DensityMatrix:
    return DensityMatrix.from_ket([1, -1])


# ---------------------------------------------------------------------------
# channels
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class QChannel:
    """Completely positive map in Kraus form.

    ``tp`` records the intent that the map is trace preserving; it is checked on
    construction. Maps with ``tp=False`` may be arbitrary CP maps.
    """

    kraus: tuple
    in_dims: Dims
    out_dims: Dims
    tp: bool = True

    def __post_init__(self):
        in_dims = _as_dims(self.in_dims)
        out_dims = _as_dims(self.out_dims)
        din, dout = _prod(in_dims), _prod(out_dims)
        ks = tuple(_frozen(k) for k in self.kraus)
        if not ks:
            raise ValueError("a channel needs at least one Kraus operator")
        for k in ks:
            if k.shape != (dout, din):
                raise DimensionError(f"Kraus operator shape {k.shape} != ({dout}, {din})")
            if not np.all(np.isfinite(k)):
                raise ValueError("Kraus operator has non-finite entries")
        object.__setattr__(self, "kraus", ks)
        object.__setattr__(self, "in_dims", in_dims)
        object.__setattr__(self, "out_dims", out_dims)
        gram = self.gram
        if np.max(np.abs(gram - gram.conj().T), initial=0.0) > HERMITIAN_TOL:
            raise ValueError("sum of K^dag K is not Hermitian")
        if self.tp and np.max(np.abs(gram - np.eye(din)), initial=0.0) > CPTP_TOL:
            raise ValueError("channel flagged trace preserving but sum K^dag K != I")

    @property
    def d_in(self) -> int:
        return _prod(self.in_dims)

    @property
    def d_out(self) -> int:
        return _prod(self.out_dims)

    @cached_property
    def gram(self) -> np.ndarray:
        return sum(k.conj().T @ k for k in self.kraus)

    @cached_property
    def supermatrix(self) -> np.ndarray:
        return sum(np.kron(k, k.conj()) for k in self.kraus)

    def __call__(self, mat: np.ndarray) -> np.ndarray:
        return apply_kraus(self.kraus, mat)

    def __repr__(self) -> str:
        return (f"QChannel({list(self.in_dims)} -> {list(self.out_dims)}, "
                f"{len(self.kraus)} Kraus, tp={self.tp})")

    def choi(self) -> np.ndarray:
        """``sum_K vec(K) vec(K)^dag`` with row-major ``vec`` (output index major)."""
        vs = np.array([k.reshape(-1) for k in self.kraus])
        return vs.T @ vs.conj()

    def simplify(self, tol: float = 1e-13) -> "QChannel":
        """Return an equivalent channel with a minimal Kraus set."""
        if len(self.kraus) <= 1:
            return self
        if len(self.kraus) <= 4:
            return self
        # thin SVD of the stacked vec(K) rows; the Choi matrix is V^T conj(V)
        stacked = np.array([k.reshape(-1) for k in self.kraus])
        _, s, wh = np.linalg.svd(stacked, full_matrices=False)
        keep = s > math.sqrt(tol) * max(1.0, s[0])
        ks = [s[i] * wh[i].reshape(self.d_out, self.d_in) for i in np.nonzero(keep)[0]]
        if not ks:
            ks = [np.zeros((self.d_out, self.d_in))]
        return _rebuild(ks, self.in_dims, self.out_dims, self.tp)

    def scaled(self, factor: float) -> "QChannel":
        s = math.sqrt(factor)
        return QChannel(tuple(s * k for k in self.kraus), self.in_dims, self.out_dims, tp=False)


def _rebuild(kraus, in_dims, out_dims, tp) -> QChannel:
    ch = QChannel(tuple(kraus), in_dims, out_dims, tp=False)
    if tp and is_cptp(ch, CPTP_TOL):
        return QChannel(ch.kraus, in_dims, out_dims, tp=True)
    return ch


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def tensor(a, b):
    """Kronecker product of two states or two channels."""
    if isinstance(a, DensityMatrix) and isinstance(b, DensityMatrix):
        return DensityMatrix(np.kron(a.matrix, b.matrix), a.dims + b.dims)
    if isinstance(a, QChannel) and isinstance(b, QChannel):
        ks = [np.kron(x, y) for x in a.kraus for y in b.kraus]
        return QChannel(tuple(ks), a.in_dims + b.in_dims, a.out_dims + b.out_dims,
                        tp=a.tp and b.tp)
    raise TypeError(f"cannot tensor {type(a).__name__} with {type(b).__name__}")


def tensor_all(items: Sequence):
    return reduce(tensor, items)


def partial_trace(rho: DensityMatrix, keep: Iterable[int]) -> DensityMatrix:
    keep = sorted(set(keep))
    m = ptrace(rho.matrix, rho.dims, keep)
    return DensityMatrix(_hermitize(m), tuple(rho.dims[i] for i in keep))


def permute_systems(rho: DensityMatrix, perm: Sequence[int]) -> DensityMatrix:
    m = permute_operator(rho.matrix, rho.dims, perm)
    return DensityMatrix(m, tuple(rho.dims[p] for p in perm))


def _hermitize(m: np.ndarray) -> np.ndarray:
    return (m + m.conj().T) / 2


def apply_channel(phi: QChannel, rho: DensityMatrix) -> DensityMatrix:
    if phi.in_dims != rho.dims:
        raise DimensionError(f"channel expects {list(phi.in_dims)}, state has {list(rho.dims)}")
    out = _hermitize(phi(rho.matrix))
    if phi.tp:
        out = out / np.trace(out).real
    return DensityMatrix(out, phi.out_dims)


def apply_on_leading(phi: QChannel, rho: DensityMatrix) -> DensityMatrix:
    """Apply ``phi kron id`` to a state whose leading subsystems match ``phi.in_dims``."""
    n = len(phi.in_dims)
    if tuple(rho.dims[:n]) != phi.in_dims:
        raise DimensionError(
            f"channel expects leading {list(phi.in_dims)}, state has {list(rho.dims)}")
    rest = rho.dims[n:]
    out = _hermitize(apply_kraus_leading(phi.kraus, rho.matrix, _prod(rest)))
    if phi.tp:
        out = out / np.trace(out).real
    return DensityMatrix(out, phi.out_dims + rest)


def compose(g: QChannel, f: QChannel) -> QChannel:
    """``g`` after ``f``."""
    if f.out_dims != g.in_dims:
        if _prod(f.out_dims) != _prod(g.in_dims):
            raise DimensionError(f"cannot compose {g!r} after {f!r}")
        raise DimensionError(
            f"dimension lists differ: {list(f.out_dims)} vs {list(g.in_dims)}")
    ks = [kg @ kf for kg in g.kraus for kf in f.kraus]
    return _rebuild(ks, f.in_dims, g.out_dims, f.tp and g.tp).simplify()


def compose_all(channels: Sequence[QChannel]) -> QChannel:
    """Compose in application order: ``channels[0]`` acts first."""
    out = channels[0]
    for ch in channels[1:]:
        out = compose(ch, out)
    return out


def identity_channel(dims: Sequence[int]) -> QChannel:
    dims = _as_dims(dims)
    return QChannel((np.eye(_prod(dims)),), dims, dims)


def channel_from_unitary(u: np.ndarray, dims: Sequence[int] | None = None,
                         out_dims: Sequence[int] | None = None) -> QChannel:
    u = np.asarray(u, dtype=complex)
    in_dims = tuple(dims) if dims is not None else (u.shape[1],)
    out_dims = tuple(out_dims) if out_dims is not None else (
        in_dims if u.shape[0] == u.shape[1] else (u.shape[0],))
    tp = bool(np.allclose(u.conj().T @ u, np.eye(u.shape[1]), atol=CPTP_TOL))
    return QChannel((u,), in_dims, out_dims, tp=tp)


def permutation_channel(dims: Sequence[int], perm: Sequence[int]) -> QChannel:
    dims = _as_dims(dims)
    p = permutation_matrix(dims, perm)
    return QChannel((p,), dims, tuple(dims[i] for i in perm))


def lift(phi: QChannel, rest_dims: Sequence[int]) -> QChannel:
    """``phi kron id_rest``."""
    rest_dims = tuple(rest_dims)
    if not rest_dims or _prod(rest_dims) == 1:
        return QChannel(phi.kraus, phi.in_dims + rest_dims, phi.out_dims + rest_dims, phi.tp)
    return tensor(phi, identity_channel(rest_dims))


def partial_trace_channel(phi: QChannel, keep: Iterable[int]) -> QChannel:
    """Discard the output subsystems not listed in ``keep``."""
    keep = sorted(set(keep))
    n = len(phi.out_dims)
    for k in keep:
        if not 0 <= k < n:
            raise DimensionError(f"output index {k} out of range")
    traced = [i for i in range(n) if i not in keep]
    if not traced:
        return phi
    perm = keep + traced
    p = permutation_matrix(phi.out_dims, perm)
    dk = _prod(phi.out_dims[i] for i in keep)
    dt = _prod(phi.out_dims[i] for i in traced)
    ks = []
    for k in phi.kraus:
        pk = (p @ k).reshape(dk, dt, -1)
        ks.extend(pk[:, j, :] for j in range(dt))
    out = tuple(phi.out_dims[i] for i in keep)
    return _rebuild(ks, phi.in_dims, out, phi.tp).simplify()


def as_supermatrix(phi: QChannel) -> np.ndarray:
    return phi.supermatrix


def is_cptp(phi: QChannel, tol: float = CPTP_TOL) -> bool:
    return bool(np.max(np.abs(phi.gram - np.eye(phi.d_in)), initial=0.0) <= tol)


def von_neumann_entropy(rho: DensityMatrix | np.ndarray) -> float:
    m = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho)
    vals = np.linalg.eigvalsh(_hermitize(m))
    vals = vals[vals > 1e-15]
    return float(max(0.0, -np.sum(vals * np.log2(vals))))


def trace_distance(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    if rho.dims != sigma.dims:
        raise DimensionError(f"dims differ: {list(rho.dims)} vs {list(sigma.dims)}")
    return trace_distance_matrices(rho.matrix, sigma.matrix)


def fidelity(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    """Uhlmann fidelity ``||sqrt(rho) sqrt(sigma)||_1^2``."""
    def psd_sqrt(m):
        vals, vecs = np.linalg.eigh(_hermitize(m))
        # round-off eigenvalues near zero would otherwise contribute ~1e-8 after the root
        vals = np.where(vals > 1e-14, vals, 0.0)
        return (vecs * np.sqrt(vals)) @ vecs.conj().T
    sv = np.linalg.svd(psd_sqrt(rho.matrix) @ psd_sqrt(sigma.matrix), compute_uv=False)
    return float(np.sum(sv) ** 2)


# ---------------------------------------------------------------------------
# gates and spiders
# ---------------------------------------------------------------------------

_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Z = np.array([[1, 0], [0, -1]], dtype=complex)
_H = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)
_PLUS = np.array([1, 1], dtype=complex) / math.sqrt(2)
_MINUS = np.array([1, -1], dtype=complex) / math.sqrt(2)

# tetrahedral Bloch vectors of the qubit SIC-POVM
SIC_BLOCH = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]]) / math.sqrt(3)


def sic_effects() -> list[np.ndarray]:
    effects = []
    for n in SIC_BLOCH:
        proj = (np.eye(2) + n[0] * _X + n[1] * np.array([[0, -1j], [1j, 0]]) + n[2] * _Z) / 2
        effects.append(proj / 2)
    return effects


def _spider_map(n_in: int, n_out: int, phase: float, b0: np.ndarray, b1: np.ndarray) -> np.ndarray:
    def kron_pow(v, n):
        return reduce(np.kron, [v] * n, np.ones(1, dtype=complex))
    ket0, ket1 = kron_pow(b0, n_out), kron_pow(b1, n_out)
    bra0, bra1 = kron_pow(b0, n_in).conj(), kron_pow(b1, n_in).conj()
    return np.outer(ket0, bra0) + np.exp(1j * phase) * np.outer(ket1, bra1)


def z_spider_matrix(n_in: int, n_out: int, phase: float = 0.0) -> np.ndarray:
    return _spider_map(n_in, n_out, phase, np.array([1, 0], dtype=complex),
                       np.array([0, 1], dtype=complex))


def x_spider_matrix(n_in: int, n_out: int, phase: float = 0.0) -> np.ndarray:
    # gray dots carry sqrt(2)^(n_in + n_out - 2) so that the Z-copy/X-merge
    # composite is exactly CNOT and the phase-0/pi states are |0>, |1>
    scale = math.sqrt(2) ** (n_in + n_out - 2)
    return scale * _spider_map(n_in, n_out, phase, _PLUS, _MINUS)


def _from_matrix(m: np.ndarray, n_in: int, n_out: int) -> QChannel:
    return _rebuild((m,), (2,) * n_in, (2,) * n_out, True)


def controlled(u: np.ndarray, d_control: int = 2, active: int = 1) -> np.ndarray:
    d = u.shape[0]
    out = np.zeros((d_control * d, d_control * d), dtype=complex)
    for c in range(d_control):
        block = u if c == active else np.eye(d)
        out[c * d:(c + 1) * d, c * d:(c + 1) * d] = block
    return out


def swap_matrix(d1: int = 2, d2: int | None = None) -> np.ndarray:
    d2 = d1 if d2 is None else d2
    return permutation_matrix((d1, d2), (1, 0))


def dephase_z(d: int = 2) -> QChannel:
    ks = []
    for i in range(d):
        k = np.zeros((d, d), dtype=complex)
        k[i, i] = 1
        ks.append(k)
    return QChannel(tuple(ks), (d,), (d,))


def discard(dims: int | Sequence[int] = 2) -> QChannel:
    dims = (dims,) if isinstance(dims, (int, np.integer)) else tuple(dims)
    d = _prod(dims)
    ks = [np.eye(d)[i:i + 1, :] for i in range(d)]
    return QChannel(tuple(ks), dims, ())


def prepare(rho: DensityMatrix) -> QChannel:
    vals, vecs = np.linalg.eigh(rho.matrix)
    ks = [math.sqrt(v) * vecs[:, [i]] for i, v in enumerate(vals) if v > 1e-15]
    return QChannel(tuple(ks), (), rho.dims)


def sic_povm_qubit() -> QChannel:
    """Measure-and-record: ``rho -> sum_x Tr[M_x rho] |x><x|`` into a 4-level register."""
    ks = []
    for x, n in enumerate(SIC_BLOCH):
        # M_x = |psi_x><psi_x| / 2; Kraus |x><psi_x| / sqrt(2)
        vals, vecs = np.linalg.eigh(sic_effects()[x] * 2)
        psi = vecs[:, -1]
        k = np.zeros((4, 2), dtype=complex)
        k[x, :] = psi.conj() / math.sqrt(2)
        ks.append(k)
    return QChannel(tuple(ks), (2,), (4,))


def unitary_channel(u: np.ndarray, dims: Sequence[int]) -> QChannel:
    return channel_from_unitary(u, dims)


GATE_NAMES = ("identity", "cnot", "swap", "cswap", "hadamard", "pauli_x", "pauli_z",
              "z_spider", "x_spider", "dephase_z", "discard", "prepare", "sic_povm_qubit",
              "generalized_cnot")


def make_gate(name: str, *args, **params) -> QChannel:
    """Build a named channel from the gate vocabulary.

    Spiders take ``n_in``, ``n_out`` and ``phase``; ``dephase_z``/``discard``/
    ``identity``/``swap`` take a dimension; ``prepare`` takes a state.
    """
    if name == "identity":
        d = args[0] if args else params.get("d", 2)
        return identity_channel(d if not isinstance(d, int) else (d,))
    if name == "cnot":
        return _from_matrix(controlled(_X), 2, 2)
    if name == "generalized_cnot":
        d = args[0] if args else params.get("d", 2)
        # |c, t> -> |c, t + c mod d>
        m = np.zeros((d * d, d * d))
        for c in range(d):
            for t in range(d):
                m[c * d + (t + c) % d, c * d + t] = 1
        return QChannel((m,), (d, d), (d, d))
    if name == "swap":
        d = args[0] if args else params.get("d", 2)
        return QChannel((swap_matrix(d),), (d, d), (d, d))
    if name == "cswap":
        return _from_matrix(controlled(swap_matrix(2)), 3, 3)
    if name == "hadamard":
        return _from_matrix(_H, 1, 1)
    if name == "pauli_x":
        return _from_matrix(_X, 1, 1)
    if name == "pauli_z":
        return _from_matrix(_Z, 1, 1)
    if name in ("z_spider", "x_spider"):
        n_in = int(args[0]) if len(args) > 0 else int(params.get("n_in", 1))
        n_out = int(args[1]) if len(args) > 1 else int(params.get("n_out", 1))
        phase = float(args[2]) if len(args) > 2 else float(params.get("phase", 0.0))
        if n_in < 0 or n_out < 0 or n_in + n_out == 0:
            raise ValueError(f"invalid spider arity ({n_in}, {n_out})")
        build = z_spider_matrix if name == "z_spider" else x_spider_matrix
        return _from_matrix(build(n_in, n_out, phase), n_in, n_out)
    if name == "dephase_z":
        return dephase_z(args[0] if args else params.get("d", 2))
    if name == "discard":
        return discard(args[0] if args else params.get("d", 2))
    if name == "prepare":
        rho = args[0] if args else params["rho"]
        return prepare(rho)
    if name == "sic_povm_qubit":
        return sic_povm_qubit()
    raise ValueError(f"unknown gate {name!r}")
