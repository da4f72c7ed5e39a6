import json

import numpy as np
import pytest

from qnetcode import cli
from qnetcode import protocols as pr
from qnetcode.netmodel import CapacityError
from qnetcode.protocols import BranchResult, ProtocolResult
from qnetcode.qcore import PureState, RegisterLayout, bell_state, ket, state_to_json


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def _write_state(tmp_path, name, state):
    path = tmp_path / name
    path.write_text(json.dumps(state_to_json(state)))
    return str(path)


def test_simulate_entangled(capsys):
    code, out, _ = run(capsys, "simulate", "--protocol", "entangled", "--psi1", "plus", "--psi2", "zero", "--mode", "enumerate")
    assert code == 0
    assert "branches: 16" in out
    rows = [l for l in out.splitlines() if l.strip() and l.split()[0].isdigit()]
    assert len(rows) == 16
    assert all(r.split()[2] == "1" and r.split()[3] == "1" for r in rows)
    assert "resources:" in out and "prior_ebits=2" in out


def test_simulate_classical_xor(capsys):
    code, out, _ = run(capsys, "simulate", "--protocol", "classical-xor", "--x1", "1", "--x2", "0", "--format", "json")
    assert code == 0
    obj = json.loads(out)
    assert (obj["b1"], obj["b2"]) == (1, 0)


def test_simulate_classical_xor_needs_bits(capsys):
    code, _, err = run(capsys, "simulate", "--protocol", "classical-xor")
    assert code == 2 and "x1" in err


def test_unknown_protocol(capsys):
    with pytest.raises(SystemExit) as info:
        cli.main(["simulate", "--protocol", "teleport-everything"])
    assert info.value.code == 2


def test_unknown_preset(capsys):
    code, _, err = run(capsys, "simulate", "--protocol", "entangled", "--psi1", "sideways")
    assert code == 2 and "sideways" in err


def test_network_violation_exit(capsys, monkeypatch):
    def boom(*a, **k):
        raise CapacityError("F", "3 classical bits", "two bits maximum")

    monkeypatch.setattr(pr, "entangled_protocol", boom)
    code, _, err = run(capsys, "simulate", "--protocol", "entangled")
    assert code == 3 and "F" in err


def test_simulate_joint_presets(capsys):
    for phi in ("bell-ref", "bell-cross"):
        code, out, _ = run(capsys, "simulate", "--protocol", "entangled-joint", "--phi", phi, "--format", "json")
        assert code == 0
        obj = json.loads(out)
        assert all(abs(b["fidelity_1"] - 1) <= 1e-9 for b in obj["branches"])


def test_simulate_joint_file(capsys, tmp_path):
    path = _write_state(tmp_path, "phi.json", bell_state(("a", "b")))
    code, out, _ = run(capsys, "simulate", "--protocol", "entangled-joint", "--phi", path, "--format", "json")
    assert code == 0 and json.loads(out)["average"] == pytest.approx(1)


def test_simulate_csv(capsys):
    code, out, _ = run(capsys, "simulate", "--protocol", "entangled", "--format", "csv")
    assert code == 0
    assert out.splitlines()[0] == ",".join(pr.CSV_COLUMNS)
    assert len(out.splitlines()) == 17


def test_simulate_trials(capsys):
    code, out, _ = run(capsys, "simulate", "--protocol", "measure-all", "--trials", "50", "--seed", "3", "--format", "json")
    assert code == 0 and len(json.loads(out)["branches"]) == 50


def test_thresholds_only(capsys):
    code, out, _ = run(capsys, "boundcheck", "--thresholds-only")
    assert code == 0
    vals = dict(line.split() for line in out.splitlines())
    assert float(vals["fe_max"]) == pytest.approx(0.9256, abs=5e-4)
    assert float(vals["favg_max"]) == pytest.approx(0.9504, abs=5e-4)


def test_boundcheck_baseline(capsys):
    code, out, _ = run(capsys, "boundcheck", "--protocol", "baseline")
    assert code == 0
    assert "all hold" in out
    line = [l for l in out.splitlines() if l.startswith("favg ")][0]
    favg = float(line.split()[1])
    assert favg <= 0.9504
    assert "4-16-4" in out and "VIOLATED" not in out


def test_boundcheck_entangled(capsys):
    code, out, _ = run(capsys, "boundcheck", "--protocol", "entangled")
    assert code == 0
    assert "NOT APPLICABLE" in out and "I(R1E1:R2E2)=2" in out


def test_boundcheck_violation_exit(capsys, monkeypatch):
    perfect = ProtocolResult("baseline", (BranchResult(0, {}, 1.0, 1.0, 1.0),), 1.0, 1.0)
    monkeypatch.setattr(pr, "haar_average", lambda *a, **k: perfect)
    code, out, _ = run(capsys, "boundcheck", "--protocol", "baseline", "--trials", "1")
    assert code == 4 and "VIOLATION" in out


def test_boundcheck_json(capsys):
    code, out, _ = run(capsys, "boundcheck", "--protocol", "trivial", "--trials", "20", "--format", "json")
    assert code == 0
    obj = json.loads(out)
    assert obj["bound_holds"] and obj["average_fidelity"] <= 0.9504


def test_boundcheck_needs_protocol(capsys):
    code, _, _ = run(capsys, "boundcheck")
    assert code == 2


def test_info_bell(capsys, tmp_path):
    path = _write_state(tmp_path, "bell.json", bell_state(("A", "B")))
    code, out, _ = run(capsys, "info", path, "--groups", "A;B", "--format", "json")
    assert code == 0
    obj = json.loads(out)
    assert obj["H(A)"] == pytest.approx(1) and obj["I(A:B)"] == pytest.approx(2)


def test_info_product(capsys, tmp_path):
    path = _write_state(tmp_path, "prod.json", ket("01", ["A", "B"]))
    code, out, _ = run(capsys, "info", path, "--groups", "A;B")
    assert code == 0
    assert "I(A:B)  0" in out


def test_info_ghz(capsys, tmp_path):
    ghz = PureState(RegisterLayout.qubits("q0", "q1", "q2"), np.array([1, 0, 0, 0, 0, 0, 0, 1]) / np.sqrt(2))
    path = _write_state(tmp_path, "ghz.json", ghz)
    code, out, _ = run(capsys, "info", path, "--groups", "q0;q1", "--given", "q2", "--format", "json")
    assert code == 0
    assert json.loads(out)["I(q0:q1|q2)"] == pytest.approx(1, abs=1e-12)


def test_info_malformed(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    code, _, _ = run(capsys, "info", str(bad))
    assert code == 2
    missing = tmp_path / "missing.json"
    code, _, _ = run(capsys, "info", str(missing))
    assert code == 2
    path = _write_state(tmp_path, "bell.json", bell_state(("A", "B")))
    code, _, _ = run(capsys, "info", path, "--groups", "A;Z")
    assert code == 2


def test_byte_identical_output(capsys, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for path in (a, b):
        code, _, _ = run(capsys, "simulate", "--protocol", "baseline", "--trials", "30", "--seed", "9", "--format", "json", "--output", str(path))
        assert code == 0
    assert a.read_bytes() == b.read_bytes()


def test_qnet_seed_env(capsys, monkeypatch):
    monkeypatch.setenv("QNET_SEED", "42")
    _, from_env, _ = run(capsys, "simulate", "--protocol", "baseline", "--psi1", "haar:1", "--psi2", "haar:2", "--format", "json")
    _, explicit, _ = run(capsys, "simulate", "--protocol", "baseline", "--psi1", "haar:1", "--psi2", "haar:2", "--seed", "42", "--format", "json")
    _, other, _ = run(capsys, "simulate", "--protocol", "baseline", "--psi1", "haar:1", "--psi2", "haar:2", "--seed", "43", "--format", "json")
    assert from_env == explicit
    assert from_env != other
    monkeypatch.setenv("QNET_SEED", "x")
    code, _, _ = run(capsys, "simulate", "--protocol", "baseline")
    assert code == 2
