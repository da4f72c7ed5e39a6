"""Network codes for the butterfly.

* ``classical_xor_protocol``: the classical XOR relay.
* ``entangled_protocol``: crossed qubit transmission using two Bell pairs
  shared by the senders, Bell measurements, and XOR of the outcomes relayed
  through the bottleneck.
* ``baseline_route_and_estimate``: no prior entanglement; one input is
  routed through the bottleneck, the other is measured.
* ``measure_all_protocol``: no prior entanglement; both inputs are measured
  and the outcomes are relayed classically.

Each quantum protocol also has a ``*_reference_traces`` builder that runs it
with every input maximally entangled with a reference qubit (``R1``, ``R2``)
in branch-enumeration mode; these traces feed the entropy audits.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .infotheory import entropy
from .qcore import (
    DensityOperator,
    DimensionError,
    PureState,
    RegisterLayout,
    as_density,
    bell_state,
    fidelity,
    haar_state,
    haar_unitary,
    ket,
    partial_trace,
    pauli_correction,
    qubit,
    tensor_all,
)
from .netmodel import (
    AFTER_A,
    AFTER_F,
    REFERENCE_NODE,
    BasisMeasure,
    BellMeasure,
    Capacity,
    Compute,
    Cut,
    ExecutionTrace,
    Prepare,
    Program,
    SendBits,
    SendQubit,
    TraceSet,
    Unitary,
    as_trace_set,
    build_butterfly,
    run_protocol,
)

Q, C = Capacity.ONE_QUBIT, Capacity.TWO_CBITS

PROTOCOL_NAMES = ("classical-xor", "entangled", "entangled-joint", "baseline", "measure-all", "trivial")


@dataclass(frozen=True)
class BranchResult:
    index: int
    outcomes: Mapping[str, tuple[int, ...]]
    probability: float
    fidelity_1: float
    fidelity_2: float

    @property
    def average(self) -> float:
        return (self.fidelity_1 + self.fidelity_2) / 2


@dataclass(frozen=True)
class ProtocolResult:
    protocol: str
    branches: tuple[BranchResult, ...]
    fidelity_1: float
    fidelity_2: float
    traces: TraceSet | None = None
    resources: Mapping[str, str] = field(default_factory=dict)

    @property
    def average(self) -> float:
        return (self.fidelity_1 + self.fidelity_2) / 2

    @property
    def min_fidelity(self) -> float:
        return min(min(b.fidelity_1, b.fidelity_2) for b in self.branches)


def _weighted(protocol, branches, traces=None, resources=None) -> ProtocolResult:
    w = np.array([b.probability for b in branches])
    w = w / w.sum()
    f1 = float(np.dot(w, [b.fidelity_1 for b in branches]))
    f2 = float(np.dot(w, [b.fidelity_2 for b in branches]))
    return ProtocolResult(protocol, tuple(branches), f1, f2, traces, resources or {})


def resource_ledger(trace: ExecutionTrace | TraceSet) -> dict[str, str]:
    """What each channel carried in the first branch, e.g. ``{"E1": "1 qubit"}``."""
    br = as_trace_set(trace).branches[0]
    out = {}
    for m in br.messages:
        out[m.channel] = "1 qubit" if m.kind == "quantum" else f"{len(m.bits)} cbits"
    return out


def prior_ebits(program: Program, initial_state, senders=("A1", "A2"), inputs=("A1", "A2")) -> float:
    """Entropy of the first sender's auxiliary registers: ebits shared before the run."""
    rho = as_density(initial_state)
    aux = [r for r in rho.layout.names if program.placement.get(r) == senders[0] and r not in inputs]
    return entropy(rho, aux) if aux else 0.0


# ---------------------------------------------------------------------------
# Classical XOR


def classical_xor_program(x1: int, x2: int) -> Program:
    topo = build_butterfly(C)
    steps = (
        SendBits("A1", "D1", "x1"),
        SendBits("A1", "E1", "x1"),
        SendBits("A2", "D2", "x2"),
        SendBits("A2", "E2", "x2"),
        Cut(AFTER_A),
        Compute("C1", "s", lambda m: (m["x1"][0] ^ m["x2"][0],)),
        SendBits("C1", "F", "s"),
        Cut(AFTER_F),
        SendBits("C2", "G1", "s"),
        SendBits("C2", "G2", "s"),
        Compute("B1", "out", lambda m: (m["s"][0] ^ m["x2"][0],)),
        Compute("B2", "out", lambda m: (m["s"][0] ^ m["x1"][0],)),
    )
    memory = {"A1": {"x1": (int(x1) & 1,)}, "A2": {"x2": (int(x2) & 1,)}}
    return Program("classical-xor", topo, {}, steps, memory=memory)


def classical_xor_protocol(x1: int, x2: int, return_trace: bool = False):
    """B1 recovers x1 and B2 recovers x2 with one bit on every channel."""
    trace = run_protocol(classical_xor_program(x1, x2), None, mode="sample", rng=0)
    outs = [r for r in trace.steps if r.kind == "compute" and r.detail["label"] == "out"]
    by_node = {r.node: r.detail["bits"][0] for r in outs}
    result = (by_node["B1"], by_node["B2"])
    return (result, trace) if return_trace else result


# ---------------------------------------------------------------------------
# Prior-entanglement protocol

ENTANGLED_TOPOLOGY = {"D1": C, "D2": C, "E1": Q, "E2": Q, "F": C, "G1": C, "G2": C}


def _inv_correction(label):
    return lambda m: pauli_correction(m[label]).conj().T


def _xor_correction(m):
    return pauli_correction(m["S"])


def entangled_program() -> Program:
    """Two Bell pairs (A11,A21), (A12,A22); A1 and A2 teleport crosswise.

    B1 ends up holding register ``A21`` (sent by A2 on E2) and B2 holds
    ``A12`` (sent by A1 on E1).
    """
    topo = build_butterfly(ENTANGLED_TOPOLOGY)
    placement = {
        "A1": "A1", "A11": "A1", "A12": "A1",
        "A2": "A2", "A21": "A2", "A22": "A2",
        "R1": REFERENCE_NODE, "R2": REFERENCE_NODE, "R": REFERENCE_NODE,
    }
    steps = (
        BellMeasure("A1", ("A1", "A11"), "X1"),
        BellMeasure("A2", ("A2", "A22"), "X2"),
        Unitary("A1", ("A12",), _inv_correction("X1"), "U(X1)^-1"),
        Unitary("A2", ("A21",), _inv_correction("X2"), "U(X2)^-1"),
        SendQubit("A1", "E1", "A12"),
        SendBits("A1", "D1", "X1"),
        SendQubit("A2", "E2", "A21"),
        SendBits("A2", "D2", "X2"),
        Cut(AFTER_A),
        Compute("C1", "S", lambda m: tuple(a ^ b for a, b in zip(m["X1"], m["X2"]))),
        SendBits("C1", "F", "S"),
        Cut(AFTER_F),
        SendBits("C2", "G1", "S"),
        SendBits("C2", "G2", "S"),
        Unitary("B1", ("A21",), _xor_correction, "U(X1+X2)"),
        Unitary("B2", ("A12",), _xor_correction, "U(X1+X2)"),
    )
    return Program("entangled", topo, placement, steps, outputs={"B1": "A21", "B2": "A12"})


def _prior_pairs() -> PureState:
    return tensor_all(bell_state(("A11", "A21")), bell_state(("A12", "A22")))


def _single_qubit(psi, name: str) -> PureState:
    if isinstance(psi, DensityOperator):
        from .qcore import to_pure

        psi = to_pure(psi)
    if psi.layout.dim != 2 or len(psi.layout) != 1:
        raise DimensionError("input must be a single qubit")
    return PureState(RegisterLayout.qubits(name), psi.amplitudes)


def entangled_protocol(psi1, psi2, mode: str = "enumerate", seed: int = 0) -> ProtocolResult:
    """Send qubit ``psi1`` A1->B1 and ``psi2`` A2->B2 crosswise."""
    p1, p2 = _single_qubit(psi1, "A1"), _single_qubit(psi2, "A2")
    program = entangled_program()
    init = tensor_all(p1, p2, _prior_pairs())
    run = as_trace_set(run_protocol(program, init, mode=mode, rng=seed))
    branches = []
    for k, br in enumerate(run):
        f1 = fidelity(p1, partial_trace(br.final_state, ["A21"]))
        f2 = fidelity(p2, partial_trace(br.final_state, ["A12"]))
        branches.append(BranchResult(k, br.outcomes, br.probability, f1, f2))
    res = resource_ledger(run)
    res["prior_ebits"] = f"{prior_ebits(program, init):.6g}"
    return _weighted("entangled", branches, run, res)


def entangled_protocol_joint(phi: PureState, mode: str = "enumerate", seed: int = 0) -> ProtocolResult:
    """Run the crossed protocol on a joint input over (input1, input2[, reference]).

    The registers of ``phi`` are taken positionally: the first two are the
    qubits at A1 and A2, an optional third (dimension <= 4) is a reference
    that the protocol never touches. Per branch, ``fidelity_1`` is the
    overlap of the final (B1, B2, reference) state with ``phi`` and
    ``fidelity_2`` repeats it, so the average is that overlap.
    """
    if isinstance(phi, DensityOperator):
        from .qcore import to_pure

        phi = to_pure(phi)
    dims = phi.layout.dims
    if len(dims) not in (2, 3) or dims[:2] != (2, 2) or (len(dims) == 3 and dims[2] > 4):
        raise DimensionError(f"joint input must be (qubit, qubit[, reference<=4]); got dims {dims}")
    names = ["A1", "A2", "R"][: len(dims)]
    phi_named = PureState(RegisterLayout(tuple(zip(names, dims))), phi.amplitudes)
    program = entangled_program()
    init = tensor_all(phi_named, _prior_pairs())
    run = as_trace_set(run_protocol(program, init, mode=mode, rng=seed))
    out_names = ["A21", "A12", "R"][: len(dims)]
    branches = []
    for k, br in enumerate(run):
        final = partial_trace(br.final_state, out_names).reorder(out_names)
        f = fidelity(phi_named, final)
        branches.append(BranchResult(k, br.outcomes, br.probability, f, f))
    return _weighted("entangled-joint", branches, run, resource_ledger(run))


def entangled_reference_traces() -> TraceSet:
    """Entangled protocol with R1, R2 maximally entangled with the inputs."""
    init = tensor_all(bell_state(("R1", "A1")), bell_state(("R2", "A2")), _prior_pairs())
    return run_protocol(entangled_program(), init, mode="enumerate")


# ---------------------------------------------------------------------------
# No-entanglement protocols

BASELINE_TOPOLOGY = {"D1": Q, "D2": C, "E1": C, "E2": C, "F": Q, "G1": Q, "G2": C}
MEASURE_ALL_TOPOLOGY = dict.fromkeys(ENTANGLED_TOPOLOGY, C)


def baseline_program(basis: np.ndarray) -> Program:
    """Route input 1 through the bottleneck; measure input 2 in ``basis``.

    The outcome can only leave A2 on D2 (to C1, where the bottleneck is
    already taken by the routed qubit) or E2 (to B1), so B2 never learns
    it and prepares the first basis vector.
    """
    topo = build_butterfly(BASELINE_TOPOLOGY)
    basis = np.asarray(basis, dtype=complex)
    placement = {"A1": "A1", "A2": "A2", "R1": REFERENCE_NODE, "R2": REFERENCE_NODE}
    steps = (
        SendQubit("A1", "D1", "A1"),
        BasisMeasure("A2", "A2", basis, "M2"),
        SendBits("A2", "E2", "M2"),
        Cut(AFTER_A),
        SendQubit("C1", "F", "A1"),
        Cut(AFTER_F),
        SendQubit("C2", "G1", "A1"),
        Prepare("B2", "OUT2", basis[:, 0]),
    )
    return Program("baseline", topo, placement, steps, outputs={"B1": "A1", "B2": "OUT2"})


def measure_all_program(basis1: np.ndarray, basis2: np.ndarray) -> Program:
    """Both senders measure; F carries both outcome bits; receivers reprepare."""
    topo = build_butterfly(MEASURE_ALL_TOPOLOGY)
    b1, b2 = np.asarray(basis1, dtype=complex), np.asarray(basis2, dtype=complex)
    placement = {"A1": "A1", "A2": "A2", "R1": REFERENCE_NODE, "R2": REFERENCE_NODE}
    steps = (
        BasisMeasure("A1", "A1", b1, "M1"),
        SendBits("A1", "D1", "M1"),
        BasisMeasure("A2", "A2", b2, "M2"),
        SendBits("A2", "D2", "M2"),
        Cut(AFTER_A),
        Compute("C1", "M12", lambda m: m["M1"] + m["M2"]),
        SendBits("C1", "F", "M12"),
        Cut(AFTER_F),
        Compute("C2", "M1", lambda m: m["M12"][:1]),
        Compute("C2", "M2", lambda m: m["M12"][1:]),
        SendBits("C2", "G1", "M1"),
        SendBits("C2", "G2", "M2"),
        Prepare("B1", "OUT1", lambda m: b1[:, m["M1"][0]]),
        Prepare("B2", "OUT2", lambda m: b2[:, m["M2"][0]]),
    )
    return Program("measure-all", topo, placement, steps, outputs={"B1": "OUT1", "B2": "OUT2"})


def trivial_program() -> Program:
    """Nothing is sent; receivers output |0>."""
    topo = build_butterfly(C)
    placement = {"A1": "A1", "A2": "A2", "R1": REFERENCE_NODE, "R2": REFERENCE_NODE}
    zero = np.array([1, 0], dtype=complex)
    steps = (Cut(AFTER_A), Cut(AFTER_F), Prepare("B1", "OUT1", zero), Prepare("B2", "OUT2", zero))
    return Program("trivial", topo, placement, steps, outputs={"B1": "OUT1", "B2": "OUT2"})


def _run_pair(program: Program, psi1, psi2, mode, seed, name) -> ProtocolResult:
    p1, p2 = _single_qubit(psi1, "A1"), _single_qubit(psi2, "A2")
    init = tensor_all(p1, p2)
    run = as_trace_set(run_protocol(program, init, mode=mode, rng=seed))
    o1, o2 = program.outputs["B1"], program.outputs["B2"]
    branches = []
    for k, br in enumerate(run):
        f1 = fidelity(p1, partial_trace(br.final_state, [o1]))
        f2 = fidelity(p2, partial_trace(br.final_state, [o2]))
        branches.append(BranchResult(k, br.outcomes, br.probability, f1, f2))
    return _weighted(name, branches, run, resource_ledger(run))


def _basis(rng: np.random.Generator | None, basis) -> np.ndarray:
    if basis is not None:
        return np.asarray(basis, dtype=complex)
    return haar_unitary(rng, 2)


def baseline_route_and_estimate(psi1, psi2, seed: int = 0, basis=None, mode: str = "enumerate") -> ProtocolResult:
    """Single run of the no-entanglement baseline; the basis is Haar-random from ``seed`` unless given."""
    rng = np.random.default_rng(seed)
    b = _basis(rng, basis)
    return _run_pair(baseline_program(b), psi1, psi2, mode, rng, "baseline")


def measure_all_protocol(psi1, psi2, seed: int = 0, bases=None, mode: str = "enumerate") -> ProtocolResult:
    rng = np.random.default_rng(seed)
    b1, b2 = (_basis(rng, None), _basis(rng, None)) if bases is None else bases
    return _run_pair(measure_all_program(b1, b2), psi1, psi2, mode, rng, "measure-all")


def trivial_protocol(psi1, psi2) -> ProtocolResult:
    return _run_pair(trivial_program(), psi1, psi2, "enumerate", 0, "trivial")


def haar_average(protocol: str, trials: int = 10_000, seed: int = 0) -> ProtocolResult:
    """Monte Carlo over Haar-random input pairs, bases and measurement outcomes.

    Each trial is one sampled run; branches of the returned result are the
    trials, equally weighted.
    """
    runners = {
        "baseline": lambda a, b, r: baseline_route_and_estimate(a, b, seed=r, mode="sample"),
        "measure-all": lambda a, b, r: measure_all_protocol(a, b, seed=r, mode="sample"),
        "entangled": lambda a, b, r: entangled_protocol(a, b, mode="sample", seed=r),
        "trivial": lambda a, b, r: trivial_protocol(a, b),
    }
    if protocol not in runners:
        raise ValueError(f"no Haar-average runner for {protocol!r}")
    rng = np.random.default_rng(seed)
    lay = RegisterLayout.qubits("q")
    branches = []
    resources = {}
    for t in range(trials):
        a, b = haar_state(rng, lay), haar_state(rng, lay)
        sub = int(rng.integers(2**63 - 1))
        res = runners[protocol](a, b, sub)
        br = res.branches[0]
        branches.append(BranchResult(t, br.outcomes, 1.0, br.fidelity_1, br.fidelity_2))
        resources = res.resources
    return _weighted(protocol, branches, None, resources)


def baseline_reference_traces(basis=None, seed: int = 0) -> TraceSet:
    b = _basis(np.random.default_rng(seed), basis)
    init = tensor_all(bell_state(("R1", "A1")), bell_state(("R2", "A2")))
    return run_protocol(baseline_program(b), init, mode="enumerate")


def measure_all_reference_traces(bases=None, seed: int = 0) -> TraceSet:
    rng = np.random.default_rng(seed)
    b1, b2 = (_basis(rng, None), _basis(rng, None)) if bases is None else bases
    init = tensor_all(bell_state(("R1", "A1")), bell_state(("R2", "A2")))
    return run_protocol(measure_all_program(b1, b2), init, mode="enumerate")


def trivial_reference_traces() -> TraceSet:
    init = tensor_all(bell_state(("R1", "A1")), bell_state(("R2", "A2")))
    return run_protocol(trivial_program(), init, mode="enumerate")


REFERENCE_TRACES = {
    "entangled": entangled_reference_traces,
    "baseline": baseline_reference_traces,
    "measure-all": measure_all_reference_traces,
    "trivial": trivial_reference_traces,
}


# ---------------------------------------------------------------------------
# Presets and export


def preset_state(spec: str, name: str = "q") -> PureState:
    """``zero``, ``one``, ``plus``, ``minus`` or ``haar:SEED``."""
    lay = RegisterLayout.qubits(name)
    fixed = {
        "zero": [1, 0],
        "one": [0, 1],
        "plus": [1, 1],
        "minus": [1, -1],
    }
    if spec in fixed:
        return qubit(fixed[spec], name)
    if spec.startswith("haar:"):
        seed = int(spec.split(":", 1)[1])
        return haar_state(np.random.default_rng(seed), lay)
    raise ValueError(f"unknown state preset {spec!r}")


CSV_COLUMNS = ("protocol", "branch", "probability", "fidelity_1", "fidelity_2", "average")


def result_to_csv(result: ProtocolResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for b in result.branches:
        w.writerow([result.protocol, b.index, repr(b.probability), repr(b.fidelity_1), repr(b.fidelity_2), repr(b.average)])
    return buf.getvalue()


def result_to_json(result: ProtocolResult) -> dict:
    return {
        "protocol": result.protocol,
        "fidelity_1": result.fidelity_1,
        "fidelity_2": result.fidelity_2,
        "average": result.average,
        "resources": dict(result.resources),
        "branches": [
            {
                "branch": b.index,
                "outcomes": {k: list(v) for k, v in b.outcomes.items()},
                "probability": b.probability,
                "fidelity_1": b.fidelity_1,
                "fidelity_2": b.fidelity_2,
            }
            for b in result.branches
        ],
    }
