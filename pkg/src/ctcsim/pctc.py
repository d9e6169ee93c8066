"""Post-selected loop closure and the category of normalised CP maps."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dctc import ElementaryMorphism
from .qcore import (
    DensityMatrix,
    DimensionError,
    QChannel,
    _prod,
    apply_kraus_leading,
    compose,
    tensor,
)

ZERO_TOL = 1e-12
NORMALIZATION_TOL = 1e-9


class NonNormalizable(Exception):
    """The post-selection succeeds with probability zero."""

    def __init__(self, probability: float):
        super().__init__(f"post-selection probability {probability:.3e} is zero")
        self.probability = probability


def _split(e) -> tuple[QChannel, tuple]:
    if isinstance(e, ElementaryMorphism):
        return e.phi, e.cv_dims
    phi, cv = e
    return phi, tuple(cv)


def pctc_superop(e, cv_dims=None) -> QChannel:
    """Partial trace of a CP map over its trailing CV wires.

    Each Kraus operator ``K`` contributes ``Tr_C K``; for a unitary ``U`` this is
    the map ``rho -> E rho E^dag`` with ``E = Tr_C U``.

    ``e`` is an :class:`ElementaryMorphism`, or a ``QChannel`` together with
    ``cv_dims``. The result is CP and in general not trace preserving.
    """
    if cv_dims is None:
        phi, cv = _split(e)
    else:
        phi, cv = e, tuple(cv_dims)
    n = len(cv)
    if n and (phi.in_dims[-n:] != cv or phi.out_dims[-n:] != cv):
        raise DimensionError("CV dims must be a suffix of both sides")
    h = phi.in_dims[:len(phi.in_dims) - n]
    k = phi.out_dims[:len(phi.out_dims) - n]
    dh, dk, c = _prod(h), _prod(k), _prod(cv)
    ks = []
    for kop in phi.kraus:
        blocks = kop.reshape(dk, c, dh, c)
        # trace over the CV index inside each Kraus operator
        ks.append(np.einsum("aibi->ab", blocks))
    out = QChannel(tuple(ks), h, k, tp=False)
    return out.simplify()


def _trace_of_mixed(f: QChannel) -> float:
    d = f.d_in
    return float(np.trace(f.gram).real) / d if d else 0.0


@dataclass(frozen=True, eq=False)
class MixSymMorphism:
    """A CP map with ``Tr f(I/d) = 1``, or the zero morphism when ``map`` is None."""

    map: QChannel | None
    in_dims: tuple
    out_dims: tuple

    def __post_init__(self):
        object.__setattr__(self, "in_dims", tuple(self.in_dims))
        object.__setattr__(self, "out_dims", tuple(self.out_dims))
        if self.map is not None:
            if self.map.in_dims != self.in_dims or self.map.out_dims != self.out_dims:
                raise DimensionError("map dims disagree with declared dims")
            t = _trace_of_mixed(self.map)
            if abs(t - 1) > NORMALIZATION_TOL:
                raise ValueError(f"Tr f(I/d) = {t}, expected 1")

    @classmethod
    def zero(cls, in_dims, out_dims) -> "MixSymMorphism":
        return cls(None, in_dims, out_dims)

    @property
    def is_zero(self) -> bool:
        return self.map is None

    def normalization(self) -> float:
        return 0.0 if self.map is None else _trace_of_mixed(self.map)

    def __repr__(self) -> str:
        tag = "zero" if self.is_zero else f"{len(self.map.kraus)} Kraus"
        return f"MixSymMorphism({list(self.in_dims)} -> {list(self.out_dims)}, {tag})"


def mixsym_lift(f: QChannel) -> MixSymMorphism:
    t = _trace_of_mixed(f)
    if t <= ZERO_TOL:
        return MixSymMorphism.zero(f.in_dims, f.out_dims)
    return MixSymMorphism(f.scaled(1 / t), f.in_dims, f.out_dims)


def mixsym_compose(f: MixSymMorphism, g: MixSymMorphism) -> MixSymMorphism:
    """``f`` after ``g``, renormalised on the maximally mixed input of ``g``."""
    if g.out_dims != f.in_dims:
        raise DimensionError(f"cannot compose {list(g.out_dims)} into {list(f.in_dims)}")
    if f.is_zero or g.is_zero:
        return MixSymMorphism.zero(g.in_dims, f.out_dims)
    return mixsym_lift(compose(f.map, g.map))


def mixsym_tensor(f: MixSymMorphism, g: MixSymMorphism) -> MixSymMorphism:
    if f.is_zero or g.is_zero:
        return MixSymMorphism.zero(f.in_dims + g.in_dims, f.out_dims + g.out_dims)
    return mixsym_lift(tensor(f.map, g.map))


@dataclass(frozen=True, eq=False)
class PctcResult:
    state: DensityMatrix | None
    probability: float

    @property
    def normalizable(self) -> bool:
        return self.state is not None


def apply_cp(f: QChannel, rho: DensityMatrix) -> tuple[np.ndarray, float]:
    """Apply a CP map on the leading systems of ``rho``; returns (unnormalised, trace)."""
    n = len(f.in_dims)
    if tuple(rho.dims[:n]) != f.in_dims:
        raise DimensionError(f"state {list(rho.dims)} does not start with {list(f.in_dims)}")
    d_rest = _prod(rho.dims[n:])
    out = apply_kraus_leading(f.kraus, rho.matrix, d_rest)
    return out, float(np.trace(out).real)


def pctc_run(f, rho: DensityMatrix, cv_dims=None) -> PctcResult:
    """Like :func:`pctc_apply` but reports the outcome instead of raising."""
    if isinstance(f, MixSymMorphism):
        if f.is_zero:
            return PctcResult(None, 0.0)
        cp = f.map
    elif isinstance(f, QChannel) and cv_dims is None:
        cp = f
    else:
        cp = pctc_superop(f, cv_dims)
    out, p = apply_cp(cp, rho)
    if p <= ZERO_TOL:
        return PctcResult(None, p)
    out = (out + out.conj().T) / (2 * p)
    dims = cp.out_dims + tuple(rho.dims[len(cp.in_dims):])
    return PctcResult(DensityMatrix(out, dims), p)


def pctc_apply(f, rho: DensityMatrix, cv_dims=None) -> DensityMatrix:
    """Close the CV loop by post-selection and renormalise; raises NonNormalizable."""
    res = pctc_run(f, rho, cv_dims)
    if res.state is None:
        raise NonNormalizable(res.probability)
    return res.state


def xi_pctc(phi: QChannel, cv_dims) -> MixSymMorphism:
    return mixsym_lift(pctc_superop(phi, cv_dims))


def equiv_mixsym(a: MixSymMorphism, b: MixSymMorphism) -> float:
    """Max entrywise distance between the Choi matrices (0 when both are zero)."""
    if a.in_dims != b.in_dims or a.out_dims != b.out_dims:
        raise DimensionError("morphisms have different types")
    if a.is_zero and b.is_zero:
        return 0.0
    if a.is_zero or b.is_zero:
        other = b if a.is_zero else a
        return float(np.abs(other.map.choi()).max())
    return float(np.abs(a.map.choi() - b.map.choi()).max())
