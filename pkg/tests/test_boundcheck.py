import json

import numpy as np
import pytest

from qnetcode import boundcheck as bc
from qnetcode import protocols as pr
from qnetcode.infotheory import eta, solve_eta_inverse
from qnetcode.netmodel import NetworkError, run_protocol
from qnetcode.protocols import BranchResult, ProtocolResult
from qnetcode.qcore import RegisterLayout, bell_state, random_density, tensor_all

NO_ENTANGLEMENT = ("baseline", "measure-all", "trivial")


@pytest.fixture(scope="module")
def traces():
    return {name: pr.REFERENCE_TRACES[name]() for name in pr.REFERENCE_TRACES}


@pytest.fixture(scope="module")
def reports(traces):
    return {name: bc.audit_chain(t) for name, t in traces.items()}


def test_thresholds():
    fe_max, favg_max = bc.fidelity_thresholds()
    assert fe_max == pytest.approx(0.9256, abs=5e-4)
    assert favg_max == pytest.approx(0.9504, abs=5e-4)
    assert bc.fidelity_thresholds() == (fe_max, favg_max)
    assert solve_eta_inverse(1.0) < fe_max


@pytest.mark.parametrize("name", NO_ENTANGLEMENT)
def test_chain_holds(reports, name):
    rep = reports[name]
    assert rep.applicable and rep.holds
    ids = [e.id for e in rep.entries]
    assert ids[:3] == ["4-16-2", "4-16-3", "4-16-4"]
    assert ids[3] in ("4-16-5", "4-16-6")
    assert ids[4:] == ["4-16-7", "final"]
    assert abs(rep.entry("4-16-4").slack) <= 1e-9
    assert rep.independence == pytest.approx(0, abs=1e-9)


def test_bottleneck_kind_selects_entry(reports):
    assert reports["baseline"].entries[3].id == "4-16-5"
    assert reports["measure-all"].entries[3].id == "4-16-6"


def test_trivial_zero_information(reports):
    rep = reports["trivial"]
    for id_ in ("4-16-2", "4-16-3", "4-16-7"):
        assert rep.entry(id_).lhs == pytest.approx(0, abs=1e-12)
    assert rep.extras["I(R1R2:E1E2F)"] == pytest.approx(0, abs=1e-12)


def test_baseline_side_fidelities(reports):
    ex = reports["baseline"].extras
    assert ex["fe1"] == pytest.approx(1, abs=1e-10)
    assert ex["fe2"] == pytest.approx(0.25, abs=1e-10)


def test_entangled_refused(reports):
    rep = reports["entangled"]
    assert not rep.applicable and rep.entries == ()
    assert "prior entanglement" in rep.warning
    assert rep.extras["I(R1E1:R2E2)"] == pytest.approx(2, abs=1e-9)


def test_missing_cut():
    prog = pr.trivial_program()
    from dataclasses import replace

    stripped = replace(prog, steps=tuple(s for s in prog.steps if getattr(s, "name", "") != "after_F"))
    init = tensor_all(bell_state(("R1", "A1")), bell_state(("R2", "A2")))
    with pytest.raises(NetworkError):
        bc.audit_chain(run_protocol(stripped, init))


def test_chain_entry_semantics():
    assert bc.ChainEntry("x", 1.0, 1.0 - 5e-10).holds
    assert not bc.ChainEntry("x", 1.0, 1.0 - 2e-9).holds
    assert bc.ChainEntry("x", 1.0, 1.0 + 5e-10, equality=True).holds
    assert not bc.ChainEntry("x", 1.0, 1.1, equality=True).holds


def test_verify_bound_baseline(traces):
    res = pr.haar_average("baseline", trials=500, seed=1)
    assert bc.verify_bound_on_protocol(res, traces["baseline"])
    assert bc.twirled_entropy_sum(traces["baseline"]) >= 1


def test_verify_bound_measure_all(traces):
    res = pr.haar_average("measure-all", trials=500, seed=1)
    assert bc.verify_bound_on_protocol(res, traces["measure-all"])


def test_verify_bound_catches_identity_claim(traces):
    perfect = ProtocolResult("identity", (BranchResult(0, {}, 1.0, 1.0, 1.0),), 1.0, 1.0)
    assert perfect.average == 1.0
    assert not bc.verify_bound_on_protocol(perfect, traces["baseline"])


def test_verify_bound_entangled_not_applicable(traces):
    res = pr.entangled_protocol(pr.preset_state("zero"), pr.preset_state("zero"))
    with pytest.raises(bc.NotApplicableError):
        bc.verify_bound_on_protocol(res, traces["entangled"])


def test_side_channels_baseline(traces):
    k1, k2 = bc.side_channels(traces["baseline"])
    rho = np.array([[0.3, 0.2j], [-0.2j, 0.7]])
    assert np.allclose(k1(rho), rho, atol=1e-9)
    # B2 prepares a fixed vector whatever the input
    assert np.allclose(k2(rho), k2(np.eye(2) / 2), atol=1e-9)


def test_auxiliary_identity(rng):
    for _ in range(50):
        rho = random_density(rng, RegisterLayout.qubits("k", "x", "y"), rank=int(rng.integers(1, 9)))
        lhs, rhs = bc.auxiliary_identity(rho, ["k"], ["x"])
        assert lhs == pytest.approx(rhs, abs=1e-9)
        from qnetcode.infotheory import entropy

        assert rhs <= entropy(rho, ["x"]) + 1e-9


def test_eta_concave_on_branch(rng):
    for _ in range(100):
        a, b = rng.uniform(0.25, 1, size=2)
        assert eta((a + b) / 2) >= (eta(a) + eta(b)) / 2 - 1e-12


def test_report_exports(reports):
    rep = reports["baseline"]
    obj = json.loads(bc.dumps(rep))
    assert obj["protocol"] == "baseline" and obj["applicable"]
    assert [e["id"] for e in obj["entries"]] == [e.id for e in rep.entries]
    assert set(obj["thresholds"]) == {"fe_max", "favg_max"}
    table = bc.report_to_table(rep).splitlines()
    assert table[0].split() == ["inequality", "lhs", "rhs", "slack", "verdict"]
    assert len(table) == len(rep.entries) + 1
    assert all(line.split()[-1] in ("holds", "equal") for line in table[1:])
