"""Butterfly topology and a step-by-step executor for network programs.

A program is an ordered list of steps, each performed by one node. Quantum
data lives in one global :class:`~qnetcode.qcore.DensityOperator`; classical
data lives in per-node memories keyed by label. Measurements either sample
one outcome or fork the run into weighted branches.
"""

from __future__ import annotations

import copy
import enum
import json
from dataclasses import dataclass, field
from graphlib import CycleError, TopologicalSorter
from typing import Any, Callable, Iterable, Mapping, Sequence, Union

import numpy as np

from .infotheory import mutual_information
from .qcore import (
    ALL_BELL_OUTCOMES,
    BELL_VECTORS,
    DensityOperator,
    EIG_CUTOFF,
    QCoreError,
    RegisterLayout,
    apply_on,
    as_density,
    project_out,
    state_to_json,
    tensor_product,
)

REFERENCE_NODE = "REF"
BUTTERFLY_NODES = ("A1", "A2", "C1", "C2", "B1", "B2")
BUTTERFLY_EDGES = {
    "D1": ("A1", "C1"),
    "D2": ("A2", "C1"),
    "E1": ("A1", "B2"),
    "E2": ("A2", "B1"),
    "F": ("C1", "C2"),
    "G1": ("C2", "B1"),
    "G2": ("C2", "B2"),
}


class NetworkError(QCoreError):
    pass


class TopologyError(NetworkError):
    pass


class CapacityError(NetworkError):
    def __init__(self, channel: str, payload: str, reason: str):
        super().__init__(f"channel {channel}: cannot carry {payload} ({reason})")
        self.channel = channel
        self.payload = payload


class LocalityError(NetworkError):
    pass


class ScheduleError(NetworkError):
    pass


class Capacity(enum.Enum):
    ONE_QUBIT = "one_qubit"
    TWO_CBITS = "two_cbits"


@dataclass(frozen=True)
class ChannelSpec:
    name: str
    src: str
    dst: str
    capacity: Capacity


@dataclass(frozen=True)
class Topology:
    nodes: tuple[str, ...]
    edges: tuple[ChannelSpec, ...]

    def __post_init__(self):
        names = [e.name for e in self.edges]
        if len(set(names)) != len(names):
            raise TopologyError(f"duplicate channel names in {names}")
        for e in self.edges:
            if e.src not in self.nodes or e.dst not in self.nodes:
                raise TopologyError(f"channel {e.name} joins unknown nodes {e.src}->{e.dst}")
        try:
            order = tuple(TopologicalSorter(self._predecessors()).static_order())
        except CycleError as exc:
            raise TopologyError(f"topology has a directed cycle: {exc.args[1]}") from None
        object.__setattr__(self, "_order", order)

    def _predecessors(self) -> dict[str, set[str]]:
        preds: dict[str, set[str]] = {n: set() for n in self.nodes}
        for e in self.edges:
            preds[e.dst].add(e.src)
        return preds

    def channel(self, name: str) -> ChannelSpec:
        for e in self.edges:
            if e.name == name:
                return e
        raise TopologyError(f"no channel named {name!r}")

    def topological_order(self) -> tuple[str, ...]:
        return self._order

    def rank(self, node: str) -> int:
        """Length of the longest path reaching ``node``."""
        preds = self._predecessors()
        ranks: dict[str, int] = {}
        for n in self._order:
            ranks[n] = max((ranks[p] + 1 for p in preds[n]), default=0)
        return ranks[node]

    def is_valid_order(self, order: Sequence[str]) -> bool:
        pos = {n: i for i, n in enumerate(order)}
        return set(order) == set(self.nodes) and all(pos[e.src] < pos[e.dst] for e in self.edges)


def build_butterfly(capacities: Mapping[str, Capacity] | Capacity) -> Topology:
    """The 6-node, 7-channel butterfly with one capacity tag per channel."""
    if isinstance(capacities, Capacity):
        capacities = {name: capacities for name in BUTTERFLY_EDGES}
    missing = set(BUTTERFLY_EDGES) - set(capacities)
    extra = set(capacities) - set(BUTTERFLY_EDGES)
    if missing or extra:
        raise TopologyError(f"butterfly channels mismatch: missing={sorted(missing)} extra={sorted(extra)}")
    edges = tuple(ChannelSpec(n, s, d, Capacity(capacities[n])) for n, (s, d) in BUTTERFLY_EDGES.items())
    return Topology(BUTTERFLY_NODES, edges)


# ---------------------------------------------------------------------------
# Program steps

Memory = dict[str, tuple[int, ...]]
MatrixSpec = Union[np.ndarray, Callable[[Memory], np.ndarray]]


@dataclass(frozen=True)
class Unitary:
    node: str
    targets: tuple[str, ...]
    matrix: MatrixSpec
    label: str = ""


@dataclass(frozen=True)
class BellMeasure:
    node: str
    pair: tuple[str, str]
    label: str


@dataclass(frozen=True)
class BasisMeasure:
    """Measure one register in the orthonormal basis given by the columns of ``basis``."""

    node: str
    target: str
    basis: MatrixSpec
    label: str


@dataclass(frozen=True)
class Prepare:
    node: str
    register: str
    vector: MatrixSpec


@dataclass(frozen=True)
class Compute:
    node: str
    label: str
    fn: Callable[[Memory], Sequence[int]]


@dataclass(frozen=True)
class SendQubit:
    node: str
    channel: str
    register: str


@dataclass(frozen=True)
class SendBits:
    node: str
    channel: str
    label: str
    store_as: str | None = None


@dataclass(frozen=True)
class Cut:
    name: str
    node: str | None = None


Step = Union[Unitary, BellMeasure, BasisMeasure, Prepare, Compute, SendQubit, SendBits, Cut]


@dataclass(frozen=True)
class Program:
    """A protocol: where each register starts, what each node does, which register each receiver outputs."""

    name: str
    topology: Topology
    placement: Mapping[str, str]
    steps: tuple[Step, ...]
    outputs: Mapping[str, str] = field(default_factory=dict)
    memory: Mapping[str, Memory] = field(default_factory=dict)


# ---------------------------------------------------------------------------
# Traces


@dataclass(frozen=True)
class Message:
    channel: str
    kind: str  # "quantum" | "classical"
    register: str | None = None
    bits: tuple[int, ...] | None = None
    step: int = -1


@dataclass(frozen=True)
class StepRecord:
    index: int
    node: str | None
    kind: str
    detail: Mapping[str, Any]


@dataclass(frozen=True)
class Snapshot:
    state: DensityOperator | None
    messages: tuple[Message, ...]
    last_touch: Mapping[str, int]


@dataclass(frozen=True)
class ExecutionTrace:
    protocol: str
    initial_state: DensityOperator | None
    steps: tuple[StepRecord, ...]
    outcomes: Mapping[str, tuple[int, ...]]
    probability: float
    cuts: Mapping[str, Snapshot]
    final_state: DensityOperator | None
    outputs: Mapping[str, str]
    messages: tuple[Message, ...]

    def channel_use(self) -> dict[str, Message]:
        return {m.channel: m for m in self.messages}


@dataclass(frozen=True)
class TraceSet:
    """All measurement branches of one run, with Born weights."""

    protocol: str
    branches: tuple[ExecutionTrace, ...]

    @property
    def probabilities(self) -> np.ndarray:
        return np.array([b.probability for b in self.branches])

    @property
    def total_probability(self) -> float:
        return float(self.probabilities.sum())

    def __len__(self) -> int:
        return len(self.branches)

    def __iter__(self):
        return iter(self.branches)


def as_trace_set(trace: ExecutionTrace | TraceSet) -> TraceSet:
    if isinstance(trace, TraceSet):
        return trace
    return TraceSet(trace.protocol, (trace,))


# ---------------------------------------------------------------------------
# Executor


@dataclass
class _Branch:
    state: DensityOperator | None
    memory: dict[str, dict[str, tuple[int, ...]]]
    location: dict[str, str]
    probability: float
    records: list[StepRecord]
    outcomes: dict[str, tuple[int, ...]]
    messages: list[Message]
    cuts: dict[str, Snapshot]
    last_touch: dict[str, int]

    def fork(self) -> "_Branch":
        return _Branch(
            self.state,
            copy.deepcopy(self.memory),
            dict(self.location),
            self.probability,
            list(self.records),
            dict(self.outcomes),
            list(self.messages),
            dict(self.cuts),
            dict(self.last_touch),
        )


def _resolve(spec: MatrixSpec, mem: Memory) -> np.ndarray:
    return np.asarray(spec(mem) if callable(spec) else spec, dtype=complex)


def _check_local(br: _Branch, node: str, registers: Iterable[str]) -> None:
    for r in registers:
        where = br.location.get(r)
        if where is None:
            raise LocalityError(f"{node} refers to register {r!r}, which does not exist")
        if where != node:
            raise LocalityError(f"{node} cannot operate on register {r!r}: it is at {where}")


def _validate_schedule(program: Program) -> None:
    topo = program.topology
    last = -1
    for i, step in enumerate(program.steps):
        if step.node is None:
            continue
        if step.node not in topo.nodes:
            raise ScheduleError(f"step {i}: unknown node {step.node!r}")
        r = topo.rank(step.node)
        if r < last:
            raise ScheduleError(f"step {i}: node {step.node} acts after a later-round node")
        last = r


def run_protocol(
    program: Program,
    initial_state,
    mode: str = "enumerate",
    rng: np.random.Generator | int | None = None,
) -> ExecutionTrace | TraceSet:
    """Execute ``program`` from ``initial_state``.

    ``mode="sample"`` draws each measurement outcome from ``rng`` and returns
    one :class:`ExecutionTrace`; ``mode="enumerate"`` keeps every branch of
    nonzero probability and returns a :class:`TraceSet`.
    """
    if mode not in ("sample", "enumerate"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "sample" and not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(0 if rng is None else rng)
    rho0 = None if initial_state is None else as_density(initial_state)
    names = () if rho0 is None else rho0.layout.names
    for reg in names:
        if reg not in program.placement:
            raise LocalityError(f"register {reg!r} has no initial location")
    _validate_schedule(program)

    mem = {n: dict(program.memory.get(n, {})) for n in program.topology.nodes}
    location = {r: program.placement[r] for r in names}
    branches = [_Branch(rho0, mem, location, 1.0, [], {}, [], {}, {r: -1 for r in location})]
    used: set[str] = set()

    for i, step in enumerate(program.steps):
        if isinstance(step, (SendQubit, SendBits)):
            if step.channel in used:
                raise CapacityError(step.channel, "a second message", "each channel is used once per run")
            used.add(step.channel)
        nxt: list[_Branch] = []
        for br in branches:
            nxt.extend(_execute(program, step, i, br, mode, rng))
        branches = nxt

    traces = []
    for br in branches:
        final_snap = Snapshot(br.state, tuple(br.messages), dict(br.last_touch))
        cuts = dict(br.cuts)
        cuts["final"] = final_snap
        traces.append(
            ExecutionTrace(
                protocol=program.name,
                initial_state=rho0,
                steps=tuple(br.records),
                outcomes=dict(br.outcomes),
                probability=br.probability,
                cuts=cuts,
                final_state=br.state,
                outputs=dict(program.outputs),
                messages=tuple(br.messages),
            )
        )
    if mode == "sample":
        return traces[0]
    return TraceSet(program.name, tuple(traces))


def _execute(program: Program, step: Step, i: int, br: _Branch, mode: str, rng) -> list[_Branch]:
    topo = program.topology
    if isinstance(step, Cut):
        br.cuts[step.name] = Snapshot(br.state, tuple(br.messages), dict(br.last_touch))
        br.records.append(StepRecord(i, None, "cut", {"name": step.name}))
        return [br]

    node = step.node
    mem = br.memory[node]

    if isinstance(step, Unitary):
        _check_local(br, node, step.targets)
        u = _resolve(step.matrix, mem)
        br.state = apply_on(br.state, u, step.targets)
        for t in step.targets:
            br.last_touch[t] = i
        br.records.append(StepRecord(i, node, "unitary", {"targets": list(step.targets), "label": step.label}))
        return [br]

    if isinstance(step, Prepare):
        if step.register in br.location:
            raise LocalityError(f"register {step.register!r} already exists")
        v = _resolve(step.vector, mem).ravel()
        v = v / np.linalg.norm(v)
        new = DensityOperator.unchecked(RegisterLayout(((step.register, v.size),)), np.outer(v, v.conj()))
        br.state = new if br.state is None else tensor_product(br.state, new)
        br.location[step.register] = node
        br.last_touch[step.register] = i
        br.records.append(StepRecord(i, node, "prepare", {"register": step.register}))
        return [br]

    if isinstance(step, Compute):
        bits = tuple(int(b) & 1 for b in step.fn(mem))
        mem[step.label] = bits
        br.records.append(StepRecord(i, node, "compute", {"label": step.label, "bits": list(bits)}))
        return [br]

    if isinstance(step, (BellMeasure, BasisMeasure)):
        if isinstance(step, BellMeasure):
            targets = list(step.pair)
            options = [(o.bits, BELL_VECTORS[o.bits]) for o in ALL_BELL_OUTCOMES]
            kind = "bell_measurement"
        else:
            targets = [step.target]
            basis = _resolve(step.basis, mem)
            options = [((k,), basis[:, k]) for k in range(basis.shape[1])]
            kind = "basis_measurement"
        _check_local(br, node, targets)
        results = []
        for bits, vec in options:
            p, post = project_out(br.state, vec, targets)
            results.append((bits, p, post))
        if mode == "sample":
            probs = np.array([max(p, 0.0) for _, p, _ in results])
            k = rng.choice(len(results), p=probs / probs.sum())
            chosen = [results[k]]
        else:
            chosen = [r for r in results if r[1] > EIG_CUTOFF]
        out = []
        for bits, p, post in chosen:
            b = br.fork() if len(chosen) > 1 else br
            b.state = post
            for t in targets:
                del b.location[t]
                b.last_touch.pop(t, None)
            b.probability *= p
            b.memory[node][step.label] = bits
            b.outcomes[step.label] = bits
            b.records.append(
                StepRecord(i, node, kind, {"targets": targets, "label": step.label, "outcome": list(bits), "probability": p})
            )
            out.append(b)
        return out

    if isinstance(step, SendQubit):
        ch = topo.channel(step.channel)
        if ch.src != node:
            raise LocalityError(f"{node} cannot send on {ch.name}, which leaves {ch.src}")
        if ch.capacity is not Capacity.ONE_QUBIT:
            raise CapacityError(ch.name, f"qubit register {step.register!r}", "channel carries classical bits only")
        _check_local(br, node, [step.register])
        dim = br.state.layout.dims[br.state.layout.index(step.register)]
        if dim != 2:
            raise CapacityError(ch.name, f"register {step.register!r} of dimension {dim}", "one qubit maximum")
        br.location[step.register] = ch.dst
        msg = Message(ch.name, "quantum", register=step.register, step=i)
        br.messages.append(msg)
        br.records.append(StepRecord(i, node, "send", {"channel": ch.name, "register": step.register}))
        return [br]

    if isinstance(step, SendBits):
        ch = topo.channel(step.channel)
        if ch.src != node:
            raise LocalityError(f"{node} cannot send on {ch.name}, which leaves {ch.src}")
        if step.label not in mem:
            raise LocalityError(f"{node} has no classical value {step.label!r}")
        bits = tuple(mem[step.label])
        if ch.capacity is not Capacity.TWO_CBITS:
            raise CapacityError(ch.name, f"{len(bits)} classical bits", "channel carries one qubit only")
        if len(bits) > 2:
            raise CapacityError(ch.name, f"{len(bits)} classical bits", "two bits maximum")
        br.memory[ch.dst][step.store_as or step.label] = bits
        msg = Message(ch.name, "classical", bits=bits, step=i)
        br.messages.append(msg)
        br.records.append(StepRecord(i, node, "send", {"channel": ch.name, "bits": list(bits)}))
        return [br]

    raise TypeError(f"unknown step {step!r}")


# ---------------------------------------------------------------------------
# Classical-quantum states at cuts


def _channel_register(snap: Snapshot, channel: str, require_untouched: bool):
    for m in snap.messages:
        if m.channel != channel:
            continue
        if m.kind == "classical":
            return ("classical", m.bits)
        present = snap.state is not None and m.register in snap.state.layout
        if not present:
            raise NetworkError(f"content of {channel} (register {m.register!r}) no longer exists at this cut")
        if require_untouched and snap.last_touch.get(m.register, -1) > m.step:
            raise NetworkError(f"content of {channel} (register {m.register!r}) was modified after sending")
        return ("quantum", m.register)
    return ("empty", None)


def cut_state(
    trace: ExecutionTrace | TraceSet,
    cut: str,
    labels: Sequence[str],
    channels: Iterable[str] = (),
    require_untouched: bool = True,
) -> DensityOperator:
    """Branch-averaged classical-quantum state at ``cut`` on ``labels``.

    Labels that name a channel in ``channels`` stand for what was sent on it:
    the transmitted register, a classical register holding the message bits,
    or a trivial one-dimensional register if the channel was unused. Other
    labels are register names. Classical records distinguish branches, so
    branches are summed with their weights.
    """
    ts = as_trace_set(trace)
    channels = set(channels)
    total = None
    layout = None
    weights = ts.probabilities
    norm = weights.sum()
    for br, w in zip(ts.branches, weights):
        if cut not in br.cuts:
            raise NetworkError(f"trace has no cut named {cut!r}")
        snap = br.cuts[cut]
        quantum: list[tuple[str, str]] = []
        parts: list[tuple[str, Any]] = []
        for lab in labels:
            if lab in channels:
                kind, val = _channel_register(snap, lab, require_untouched)
                if kind == "quantum":
                    quantum.append((lab, val))
                    parts.append(("q", lab))
                elif kind == "classical":
                    parts.append(("c", (lab, val)))
                else:
                    parts.append(("c", (lab, None)))
            else:
                if snap.state is None or lab not in snap.state.layout:
                    raise NetworkError(f"register {lab!r} is not present at cut {cut!r}")
                quantum.append((lab, lab))
                parts.append(("q", lab))
        m, lay = _assemble(snap.state, quantum, parts)
        if total is None:
            total, layout = w * m, lay
        else:
            if lay != layout:
                raise NetworkError(f"branches disagree on the register structure at cut {cut!r}")
            total = total + w * m
    return DensityOperator.unchecked(layout, total / norm)


def _assemble(state, quantum, parts):
    from .qcore import partial_trace

    if quantum:
        regs = [r for _, r in quantum]
        rho_q = partial_trace(state, regs).reorder(regs).relabel({r: lab for lab, r in quantum})
    else:
        rho_q = None
    # Build in label order: quantum factors come from rho_q, classical are basis projectors.
    q_layout = rho_q.layout if rho_q is not None else RegisterLayout(())
    factors = []
    for kind, val in parts:
        if kind == "c":
            lab, bits = val
            if bits is None:
                factors.append(DensityOperator.unchecked(RegisterLayout(((lab, 1),)), np.ones((1, 1))))
            else:
                d = 2 ** max(len(bits), 1)
                e = np.zeros((d, d))
                idx = int("".join(map(str, bits)), 2) if bits else 0
                e[idx, idx] = 1.0
                factors.append(DensityOperator.unchecked(RegisterLayout(((lab, d),)), e))
    classical = factors[0] if factors else None
    for f in factors[1:]:
        classical = tensor_product(classical, f)
    if rho_q is None:
        full = classical
    elif classical is None:
        full = rho_q
    else:
        full = tensor_product(rho_q, classical)
    order = [val if kind == "q" else val[0] for kind, val in parts]
    full = full.reorder(order)
    return full.matrix, full.layout


# ---------------------------------------------------------------------------
# Audits


AFTER_A = "after_A"
AFTER_F = "after_F"
CHANNEL_NAMES = tuple(BUTTERFLY_EDGES)


def audit_independence(trace: ExecutionTrace | TraceSet, cut: str = AFTER_A) -> tuple[float, bool]:
    """I(R1 E1 D1 : R2 E2 D2) just after the senders transmit."""
    labels = ["R1", "E1", "D1", "R2", "E2", "D2"]
    rho = cut_state(trace, cut, labels, CHANNEL_NAMES)
    value = mutual_information(rho, ["R1", "E1", "D1"], ["R2", "E2", "D2"])
    return value, value <= 1e-9


# ---------------------------------------------------------------------------
# Export


def trace_to_json(trace: ExecutionTrace | TraceSet, include_state: bool = False) -> dict:
    ts = as_trace_set(trace)
    out = {"protocol": ts.protocol, "branches": []}
    for k, br in enumerate(ts.branches):
        entry = {
            "branch": k,
            "probability": br.probability,
            "outcomes": {lab: list(b) for lab, b in br.outcomes.items()},
            "steps": [{"index": s.index, "node": s.node, "kind": s.kind, **_jsonable(s.detail)} for s in br.steps],
            "messages": [
                {"channel": m.channel, "kind": m.kind, "register": m.register, "bits": None if m.bits is None else list(m.bits)}
                for m in br.messages
            ],
        }
        if include_state and br.final_state is not None:
            entry["final_state"] = state_to_json(br.final_state)
        out["branches"].append(entry)
    return out


def _jsonable(d: Mapping[str, Any]) -> dict:
    return json.loads(json.dumps(dict(d), default=float))
