"""One test per acceptance criterion; each records a PASS/FAIL line for the summary."""

import itertools
import time

import numpy as np
import pytest

from qnetcode import boundcheck as bc
from qnetcode import protocols as pr
from qnetcode.infotheory import (
    average_fidelity_from_fe,
    check_chain_rule,
    check_imai_sum,
    check_monotonicity,
    check_quantum_fano,
    check_transmission_convexity,
    check_twirl,
    entanglement_fidelity,
    monte_carlo_average_fidelity,
    random_channel,
    solve_eta_inverse,
)
from qnetcode.netmodel import audit_independence
from qnetcode.qcore import PureState, RegisterLayout, bell_state, haar_state, random_density

from oracles import entropy_bits, marginal

TOL = 1e-9
INSTANCES = 200


def test_criterion_1_crossed_transmission(criterion):
    rng = np.random.default_rng(1)
    lay = RegisterLayout.qubits("q")
    start = time.perf_counter()
    worst, branches = 1.0, set()
    for _ in range(100):
        res = pr.entangled_protocol(haar_state(rng, lay), haar_state(rng, lay), mode="enumerate")
        worst = min(worst, res.min_fidelity)
        branches.add(len(res.branches))
    elapsed = time.perf_counter() - start
    ok = worst >= 1 - 1e-9 and branches == {16} and elapsed < 30
    criterion(1, "crossed transmission is perfect", ok, f"min fidelity {worst:.12f}, {elapsed:.1f} s")
    assert branches == {16}
    assert worst >= 1 - 1e-9
    assert elapsed < 30


def test_criterion_2_phase_cancellation(criterion):
    bell_ref = PureState(RegisterLayout.qubits("A1", "A2", "R"), np.array([1, 0, 0, 0, 0, 1, 0, 0]) / np.sqrt(2))
    cases = {"A1-R Bell": bell_ref, "A1-A2 Bell": bell_state(("A1", "A2"))}
    worst = {}
    for name, phi in cases.items():
        res = pr.entangled_protocol_joint(phi)
        assert len(res.branches) == 16
        worst[name] = min(b.fidelity_1 for b in res.branches)
    ok = all(w >= 1 - TOL for w in worst.values())
    criterion(2, "joint input recovered on every branch", ok, ", ".join(f"{k}: {v:.12f}" for k, v in worst.items()))
    assert ok


def test_criterion_3_thresholds(criterion):
    fe_max = solve_eta_inverse(0.5)
    favg_max = average_fidelity_from_fe(fe_max)
    ok = abs(fe_max - 0.9256) <= 5e-4 and abs(favg_max - 0.9504) <= 5e-4
    criterion(3, "fidelity thresholds", ok, f"fe_max {fe_max:.5f}, favg_max {favg_max:.5f}")
    assert ok


def test_criterion_4_classical_xor(criterion):
    failures = []
    for x1, x2 in itertools.product((0, 1), repeat=2):
        (b1, b2), trace = pr.classical_xor_protocol(x1, x2, return_trace=True)
        widest = max(len(m.bits) for m in trace.messages)
        if (b1, b2) != (x1, x2) or widest > 1:
            failures.append((x1, x2, b1, b2, widest))
    criterion(4, "classical XOR code", not failures, f"failures {failures}" if failures else "4/4 inputs, 1 bit per edge")
    assert not failures


@pytest.fixture(scope="module")
def baseline_audit():
    traces = pr.baseline_reference_traces()
    return traces, bc.audit_chain(traces)


def test_criterion_5a_chain_audit(criterion, baseline_audit):
    traces, report = baseline_audit
    value, independent = audit_independence(traces)
    eq = report.entry("4-16-4")
    chain_ok = report.applicable and all(e.slack >= -TOL for e in report.entries if not e.equality)
    ok = chain_ok and abs(eq.lhs - eq.rhs) <= TOL and independent and abs(value) <= TOL
    worst = min(e.slack for e in report.entries if not e.equality)
    criterion("5a", "baseline chain audit and independence", ok, f"min slack {worst:.3g}, I = {value:.3g}")
    assert ok


def test_criterion_5b_baseline_average(criterion, baseline_audit):
    traces, _ = baseline_audit
    res = pr.haar_average("baseline", trials=10_000, seed=0)
    _, favg_max = bc.fidelity_thresholds()
    near = abs(res.average - 5 / 6) <= 0.01
    below = res.average <= favg_max
    criterion(
        "5b",
        "baseline average fidelity 5/6 +- 0.01 and below the bound",
        near and below,
        f"measured {res.average:.4f} (f1 {res.fidelity_1:.4f}, f2 {res.fidelity_2:.4f}), bound {favg_max:.4f}",
    )
    assert below
    assert bc.verify_bound_on_protocol(res, traces)
    assert near, f"baseline average {res.average:.4f} is not 5/6 +- 0.01"


def _random_tripartite(rng):
    # three registers with total dimension <= 16
    dims = [(2, 2, 2), (2, 2, 4), (2, 4, 2), (4, 2, 2), (2, 2, 3), (3, 2, 2)][rng.integers(6)]
    lay = RegisterLayout(tuple(zip(("a", "b", "c"), dims)))
    return random_density(rng, lay, rank=int(rng.integers(1, lay.dim + 1))), dims


def _oracle_mi(m, dims, x, y):
    return entropy_bits(marginal(m, dims, x)) + entropy_bits(marginal(m, dims, y)) - entropy_bits(marginal(m, dims, sorted(x + y)))


def test_criterion_6_property_suites(criterion):
    rng = np.random.default_rng(6)
    violations = dict.fromkeys(("P1", "P2", "P3", "P4", "P5", "P6"), 0)
    for _ in range(INSTANCES):
        rho, dims = _random_tripartite(rng)
        m = rho.matrix
        p1 = check_monotonicity(rho, "a", "b", "c")
        if p1.lhs > p1.rhs + TOL or abs(p1.rhs - _oracle_mi(m, dims, [0], [1, 2])) > TOL:
            violations["P1"] += 1
        p2 = check_imai_sum(rho, "a", "b", "c")
        oracle2 = _oracle_mi(m, dims, [0], [1]) + _oracle_mi(m, dims, [0], [2])
        if p2.lhs > p2.rhs + TOL or abs(p2.lhs - oracle2) > TOL:
            violations["P2"] += 1
        p3 = check_chain_rule(rho, "a", "b", "c")
        if abs(p3.lhs - p3.rhs) > TOL:
            violations["P3"] += 1

        k1, k2 = random_channel(rng), random_channel(rng)
        p4 = check_transmission_convexity(k1, k2, float(rng.uniform()))
        if p4.lhs > p4.rhs + TOL:
            violations["P4"] += 1
        p5 = check_quantum_fano(k1)
        if p5.lhs > p5.rhs + TOL:
            violations["P5"] += 1
        same, lower = check_twirl(k2)
        if abs(same.lhs - same.rhs) > 1e-10 or lower.lhs > lower.rhs + TOL:
            violations["P6"] += 1
    ok = not any(violations.values())
    criterion(6, f"property suites P1-P6 over {INSTANCES} instances each", ok, f"violations {violations}")
    assert ok, violations


def test_criterion_7_average_fidelity_relation(criterion):
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(20):
        k = random_channel(rng)
        mc = monte_carlo_average_fidelity(k, rng, 10_000)
        worst = max(worst, abs(mc - (1 + 2 * entanglement_fidelity(k)) / 3))
    ok = worst < 0.01
    criterion(7, "Monte Carlo average fidelity = (1+2 fe)/3", ok, f"max deviation {worst:.4f}")
    assert ok
