import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ctcsim.dctc import ElementaryMorphism
from ctcsim.pctc import (
    MixSymMorphism,
    NonNormalizable,
    equiv_mixsym,
    mixsym_compose,
    mixsym_lift,
    mixsym_tensor,
    pctc_apply,
    pctc_run,
    pctc_superop,
    xi_pctc,
)
from ctcsim.qcore import (
    DensityMatrix,
    DimensionError,
    QChannel,
    channel_from_unitary,
    identity_channel,
    ket_minus,
    ket_plus,
    make_gate,
)

from oracles import (
    haar_unitary,
    naive_apply,
    postselected_operator,
    random_kraus,
    random_state,
)


def cp(ks, din, dout):
    return QChannel(tuple(ks), (din,), (dout,), tp=False)


def random_mixsym(rng, din, dout, rank=2):
    return mixsym_lift(QChannel(tuple(random_kraus(din, dout, rank, rng)), (din,), (dout,)))


def test_superop_of_unitary_is_traced_operator():
    rng = np.random.default_rng(0)
    for dh, c in [(2, 2), (2, 3), (3, 2)]:
        u = haar_unitary(dh * c, rng)
        f = pctc_superop(channel_from_unitary(u, (dh, c)), (c,))
        e = postselected_operator(u, dh, dh, c)
        rho = random_state(dh, rng)
        assert np.allclose(f(rho), e @ rho @ e.conj().T)


def test_superop_traces_inside_each_kraus_operator():
    rng = np.random.default_rng(1)
    ks = random_kraus(4, 6, 3, rng)
    phi = QChannel(tuple(ks), (2, 2), (3, 2))
    f = pctc_superop(ElementaryMorphism(phi, (2,)))
    es = [postselected_operator(k, 2, 3, 2) for k in ks]
    rho = random_state(2, rng)
    assert np.allclose(f(rho), naive_apply(es, rho))
    with pytest.raises(DimensionError):
        pctc_superop(phi, (3,))


def test_swap_loop_is_identity():
    f = xi_pctc(make_gate("swap", 3), (3,))
    assert equiv_mixsym(f, mixsym_lift(identity_channel((3,)))) < 1e-12
    rho = DensityMatrix.maximally_entangled(3)
    assert np.allclose(pctc_apply(f, rho).matrix, rho.matrix)


def test_lift_normalises_on_maximally_mixed_input():
    rng = np.random.default_rng(2)
    f = cp([0.3 * k for k in random_kraus(3, 2, 2, rng)], 3, 2)
    m = mixsym_lift(f)
    assert m.normalization() == pytest.approx(1.0, abs=1e-12)
    out = m.map(np.eye(3) / 3)
    assert np.trace(out).real == pytest.approx(1.0)


def test_zero_morphism_below_threshold():
    f = cp([np.zeros((2, 2))], 2, 2)
    assert mixsym_lift(f).is_zero
    tiny = cp([1e-7 * np.eye(2)], 2, 2)
    assert mixsym_lift(tiny).is_zero
    assert not mixsym_lift(cp([1e-5 * np.eye(2)], 2, 2)).is_zero
    with pytest.raises(ValueError):
        MixSymMorphism(cp([2 * np.eye(2)], 2, 2), (2,), (2,))


def test_orthogonal_postselections_compose_to_zero():
    p0 = mixsym_lift(cp([np.diag([1.0, 0.0])], 2, 2))
    p1 = mixsym_lift(cp([np.diag([0.0, 1.0])], 2, 2))
    assert mixsym_compose(p1, p0).is_zero
    assert mixsym_compose(p0, p0).normalization() == pytest.approx(1.0)
    z = MixSymMorphism.zero((2,), (2,))
    assert mixsym_compose(z, p0).is_zero and mixsym_tensor(p0, z).is_zero
    assert equiv_mixsym(z, z) == 0.0
    assert equiv_mixsym(z, p0) == pytest.approx(np.abs(p0.map.choi()).max())


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2 ** 20))
def test_composition_is_associative(seed):
    rng = np.random.default_rng(seed)
    f, g, h = (random_mixsym(rng, 2, 2, rank=int(rng.integers(1, 3))) for _ in range(3))
    a = mixsym_compose(f, mixsym_compose(g, h))
    b = mixsym_compose(mixsym_compose(f, g), h)
    assert a.normalization() == pytest.approx(1.0, abs=1e-9)
    assert equiv_mixsym(a, b) < 1e-9


def test_tensor_is_kron():
    rng = np.random.default_rng(3)
    f, g = random_mixsym(rng, 2, 2), random_mixsym(rng, 3, 2)
    fg = mixsym_tensor(f, g)
    a, b = random_state(2, rng), random_state(3, rng)
    assert np.allclose(fg.map(np.kron(a, b)), np.kron(f.map(a), g.map(b)))
    assert fg.normalization() == pytest.approx(1.0)


def test_compose_type_check():
    rng = np.random.default_rng(4)
    with pytest.raises(DimensionError):
        mixsym_compose(random_mixsym(rng, 2, 2), random_mixsym(rng, 2, 3))
    with pytest.raises(DimensionError):
        equiv_mixsym(random_mixsym(rng, 2, 2), random_mixsym(rng, 2, 3))


def grandfather_phi():
    # CNOT with the loop qubit as control, then a swap
    return channel_from_unitary(make_gate("cnot").kraus[0] @ make_gate("swap").kraus[0], (2, 2))


def test_grandfather_postselected_operator():
    f = pctc_superop(grandfather_phi(), (2,))
    e = f.kraus[0] if len(f.kraus) == 1 else None
    assert e is not None
    plus = np.array([1, 1]) / math.sqrt(2)
    want = math.sqrt(2) * np.outer(plus, [1, 0])
    assert np.allclose(np.abs(e), np.abs(want))
    assert np.allclose(e @ e.conj().T, want @ want.conj().T)


def test_grandfather_runs():
    f = xi_pctc(grandfather_phi(), (2,))
    r0 = pctc_run(f, DensityMatrix.basis(0, (2,)))
    assert np.allclose(r0.state.matrix, ket_plus().matrix)
    assert r0.probability == pytest.approx(2.0)
    r1 = pctc_run(f, DensityMatrix.basis(1, (2,)))
    assert not r1.normalizable and r1.probability == pytest.approx(0.0)
    with pytest.raises(NonNormalizable):
        pctc_apply(f, DensityMatrix.basis(1, (2,)))
    rm = pctc_run(f, ket_minus())
    assert np.allclose(rm.state.matrix, ket_plus().matrix)


def test_pctc_is_linear_up_to_normalisation():
    rng = np.random.default_rng(5)
    u = haar_unitary(4, rng)
    f = xi_pctc(channel_from_unitary(u, (2, 2)), (2,))
    a, b = random_state(2, rng), random_state(2, rng)
    ra, rb = pctc_run(f, DensityMatrix(a)), pctc_run(f, DensityMatrix(b))
    mix = pctc_run(f, DensityMatrix(0.3 * a + 0.7 * b))
    want = 0.3 * ra.probability * ra.state.matrix + 0.7 * rb.probability * rb.state.matrix
    assert np.allclose(mix.probability * mix.state.matrix, want)


def test_run_carries_ancilla_and_checks_dims():
    rng = np.random.default_rng(6)
    f = random_mixsym(rng, 2, 3)
    rho = DensityMatrix(random_state(4, rng), (2, 2))
    out = pctc_run(f, rho)
    assert out.state.dims == (3, 2)
    with pytest.raises(DimensionError):
        pctc_run(f, DensityMatrix.maximally_mixed((3,)))
    assert pctc_run(MixSymMorphism.zero((2,), (2,)), DensityMatrix.basis(0, (2,))).state is None


def test_non_terminality_witness():
    # discarding the grandfather's output is not the discard map: the branch
    # weights depend on the input
    f = xi_pctc(grandfather_phi(), (2,))
    weights = [pctc_run(f, s).probability for s in
               (DensityMatrix.basis(0, (2,)), DensityMatrix.basis(1, (2,)))]
    assert abs(weights[0] - weights[1]) > 0.1
