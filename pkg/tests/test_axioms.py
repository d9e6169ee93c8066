import numpy as np
import pytest

from ctcsim import axioms
from ctcsim.axioms import (
    AXIOMS,
    RandomChannelSpec,
    check_naturality,
    check_sliding,
    check_strength,
    check_terminality,
    check_vanishing,
    check_yanking,
    get_model,
    probes_for,
    random_cptp,
    run_suite,
    trial_rng,
)
from ctcsim.qcore import is_cptp

FAST = dict(trials=6, dims=(2, 3), seed=11)


def test_random_cptp_is_cptp_and_seeded():
    for din, dout, r in [(2, 2, 1), (4, 2, 1), (3, 5, 2), (6, 2, 3)]:
        spec = RandomChannelSpec((din,), (dout,), r, seed=3)
        ch = random_cptp(spec)
        assert is_cptp(ch)
        assert len(ch.kraus) >= -(-din // dout)
        again = random_cptp(spec)
        assert np.allclose(ch.kraus[0], again.kraus[0])
    with pytest.raises(ValueError):
        RandomChannelSpec((2,), (2,), 0)


def test_trial_rng_streams_are_independent():
    a = trial_rng(0, 0).normal(size=4)
    b = trial_rng(0, 1).normal(size=4)
    assert not np.allclose(a, b)
    assert np.allclose(a, trial_rng(0, 0).normal(size=4))


def test_probes_include_maximally_entangled_state():
    ps = probes_for((3,), np.random.default_rng(0), count=2)
    assert len(ps) == 3
    assert ps[0].dims == (3, 3)
    assert np.isclose(ps[0].matrix[0, 4], 1 / 3)


def test_get_model():
    assert get_model("dctc").name == "dctc"
    assert get_model(get_model("pctc")).name == "pctc"
    with pytest.raises(ValueError):
        get_model("qm")


@pytest.mark.parametrize("model", ["dctc", "pctc"])
@pytest.mark.parametrize("check", [check_naturality, check_strength, check_sliding, check_vanishing])
def test_structural_axioms_hold(model, check):
    rep = check(model, **FAST)
    assert rep.verdict == "pass", rep.as_dict()
    assert rep.max_deviation <= 1e-6
    assert rep.trials == FAST["trials"]


def test_yanking_witness_values():
    # a D-CTC swap loop sends the maximally entangled probe to I/d (x) I/d,
    # at trace distance 1 - 1/d^2 from the probe
    rep = check_yanking("dctc", dims=(2, 3), trials=4)
    assert rep.verdict == "fail" and rep.as_expected
    bell = rep.witness["bell_probe_deviation"]
    assert bell["2"] == pytest.approx(0.75, abs=1e-9)
    assert bell["3"] == pytest.approx(8 / 9, abs=1e-9)
    # on a single system the loop is the identity
    assert rep.witness["single_system_deviation"] < 1e-9
    p = check_yanking("pctc", dims=(2, 3), trials=4)
    assert p.verdict == "pass" and p.max_deviation <= 1e-9


def test_terminality_split():
    d = check_terminality("dctc", trials=10, dims=(2, 3), seed=5)
    assert d.verdict == "pass" and d.max_deviation <= 1e-8
    p = check_terminality("pctc", trials=3, dims=(2, 3), seed=5)
    assert p.verdict == "fail" and p.label() == "fail (expected)"
    assert p.witness["grandfather_deviation"] > 0.1


def test_suite_is_deterministic_and_labelled():
    a = run_suite("dctc", trials=3, dims=(2,), seed=4)
    b = run_suite("dctc", trials=3, dims=(2,), seed=4)
    assert [r.axiom for r in a] == list(AXIOMS)
    assert [r.as_dict() for r in a] == [r.as_dict() for r in b]
    assert all(r.as_expected for r in a)
    labels = {r.axiom: r.label() for r in a}
    assert labels["yanking"] == "fail (expected)"
    assert labels["naturality"] == "pass (expected)"


def test_unexpected_verdict_is_flagged():
    rep = check_vanishing("dctc", trials=2, dims=(2,), tol=-1.0)
    assert rep.verdict == "fail"
    assert not rep.as_expected
    assert rep.label() == "fail (UNEXPECTED)"
    assert rep.as_dict()["failures"]


def test_expected_table():
    assert axioms.EXPECTED[("yanking", "dctc")] == "fail"
    assert axioms.EXPECTED[("terminality", "pctc")] == "fail"
    assert ("yanking", "pctc") not in axioms.EXPECTED
