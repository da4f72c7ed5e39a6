"""Entropy audit of a butterfly run against the no-prior-entanglement bound.

The audit evaluates, on the states a run actually produces, each step of the
argument that bounds the average fidelity of any protocol whose senders
share no entanglement:

========  ===============================================================
id        checked relation
========  ===============================================================
4-16-2    I(R1:E1) + I(R1:B1) <= 2 H(R1)
4-16-3    I(R2:E2) + I(R2:B2) <= 2 H(R2)
4-16-4    I(R1R2:E1E2) - I(R1:E1) - I(R2:E2)
          == -I(R1:R2) - I(E1:E2) + I(R1E1:R2E2)
4-16-5    I(R1R2:F|E1E2) <= 2 H(F)                  (quantum F)
4-16-6    I(R1R2:F|E1E2) <= H(F)                    (classical F)
4-16-7    I(R1R2:B1B2) <= 2 + 2H(R1) - I(R1:B1) + 2H(R2) - I(R2:B2)
final     1/2 <= eta((fe1 + fe2)/2)
========  ===============================================================

Cuts used: ``after_A`` (senders done), ``after_F`` (bottleneck used) and
``final``. ``B1``/``B2`` denote the output registers named by the program.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .infotheory import (
    channel_from_choi,
    check_imai_sum,
    conditional_mutual_information,
    entanglement_fidelity,
    entropy,
    entropy_exchange,
    eta,
    pauli_twirl,
    solve_eta_inverse,
    average_fidelity_from_fe,
    mutual_information,
)
from .netmodel import (
    AFTER_A,
    AFTER_F,
    CHANNEL_NAMES,
    ExecutionTrace,
    NetworkError,
    TraceSet,
    as_trace_set,
    audit_independence,
    cut_state,
)
from .qcore import purify

SLACK = 1e-9
EQ_TOL = 1e-9
BOTTLENECK_BITS = 2.0


class NotApplicableError(NetworkError):
    """The run shares prior entanglement between the senders."""


@dataclass(frozen=True)
class ChainEntry:
    id: str
    lhs: float
    rhs: float
    equality: bool = False
    note: str = ""

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs

    @property
    def holds(self) -> bool:
        if self.equality:
            return abs(self.slack) <= EQ_TOL
        return self.slack >= -SLACK


@dataclass(frozen=True)
class ChainReport:
    protocol: str
    entries: tuple[ChainEntry, ...]
    thresholds: tuple[float, float]
    independence: float
    applicable: bool = True
    warning: str = ""
    extras: dict = field(default_factory=dict)

    @property
    def holds(self) -> bool:
        return all(e.holds for e in self.entries)

    def entry(self, id_: str) -> ChainEntry:
        for e in self.entries:
            if e.id == id_:
                return e
        raise KeyError(id_)


def fidelity_thresholds() -> tuple[float, float]:
    """Largest mean entanglement fidelity and mean average fidelity allowed without prior entanglement."""
    fe_max = solve_eta_inverse(0.5)
    return fe_max, average_fidelity_from_fe(fe_max)


def _mi_raw(rho, a, b) -> float:
    # Unclamped, so sums of these reproduce entropy identities to rounding.
    a, b = list(a), list(b)
    return entropy(rho, a) + entropy(rho, b) - entropy(rho, a + b)


def _f_kind(ts: TraceSet) -> str:
    use = ts.branches[0].channel_use().get("F")
    return "unused" if use is None else use.kind


def side_states(trace: ExecutionTrace | TraceSet):
    """Branch-averaged (R_i, output_i) states at the final cut, relabelled to (R_i, B_i)."""
    ts = as_trace_set(trace)
    outs = ts.branches[0].outputs
    rho = cut_state(ts, "final", ["R1", "R2", outs["B1"], outs["B2"]])
    rho = rho.relabel({outs["B1"]: "B1", outs["B2"]: "B2"})
    return rho


def side_channels(trace: ExecutionTrace | TraceSet):
    """Induced channels A_i -> B_i recovered from the (R_i, B_i) marginals."""
    rho = side_states(trace)
    from .qcore import partial_trace

    return tuple(channel_from_choi(partial_trace(rho, [f"R{i}", f"B{i}"])) for i in (1, 2))


def audit_chain(trace: ExecutionTrace | TraceSet) -> ChainReport:
    """Evaluate every relation of the bound on the states of ``trace``.

    ``trace`` must come from a run whose inputs are maximally entangled with
    reference qubits ``R1``, ``R2`` and which declares the ``after_A`` and
    ``after_F`` cuts. Runs with prior entanglement between the senders get a
    report with ``applicable=False`` and no entries.
    """
    ts = as_trace_set(trace)
    for br in ts.branches:
        for cut in (AFTER_A, AFTER_F, "final"):
            if cut not in br.cuts:
                raise NetworkError(f"trace lacks the {cut!r} cut")
    thresholds = fidelity_thresholds()
    value, independent = audit_independence(ts)
    if not independent:
        pre = cut_state(ts, AFTER_A, ["R1", "E1", "R2", "E2"], CHANNEL_NAMES)
        i_re = mutual_information(pre, ["R1", "E1"], ["R2", "E2"])
        warning = (
            f"prior entanglement: I(R1E1D1:R2E2D2)={value:.6g}, I(R1E1:R2E2)={i_re:.6g}; "
            "the bound does not apply"
        )
        return ChainReport(ts.protocol, (), thresholds, value, False, warning, {"I(R1E1:R2E2)": i_re})

    outs = ts.branches[0].outputs
    o1, o2 = outs["B1"], outs["B2"]
    entries = []

    # P2 on the joint (R_i, E_i, B_i) state at the end of the run.
    try:
        fin = cut_state(ts, "final", ["R1", "R2", o1, o2, "E1", "E2"], CHANNEL_NAMES)
        fin = fin.relabel({o1: "B1", o2: "B2"})
        for i, id_ in ((1, "4-16-2"), (2, "4-16-3")):
            chk = check_imai_sum(fin, f"R{i}", f"E{i}", f"B{i}")
            entries.append(ChainEntry(id_, chk.lhs, chk.rhs))
        fin_q = fin
    except NetworkError:
        # E_i content was consumed downstream: combine the two marginals.
        f_cut = cut_state(ts, AFTER_F, ["R1", "R2", "E1", "E2"], CHANNEL_NAMES)
        fin_q = side_states(ts)
        for i, id_ in ((1, "4-16-2"), (2, "4-16-3")):
            lhs = mutual_information(f_cut, f"R{i}", f"E{i}") + mutual_information(fin_q, f"R{i}", f"B{i}")
            entries.append(ChainEntry(id_, lhs, 2 * entropy(fin_q, f"R{i}"), note="marginal form"))

    fc = cut_state(ts, AFTER_F, ["R1", "R2", "E1", "E2", "F"], CHANNEL_NAMES)
    r, e = ["R1", "R2"], ["E1", "E2"]
    lhs4 = _mi_raw(fc, r, e) - _mi_raw(fc, ["R1"], ["E1"]) - _mi_raw(fc, ["R2"], ["E2"])
    rhs4 = -_mi_raw(fc, ["R1"], ["R2"]) - _mi_raw(fc, ["E1"], ["E2"]) + _mi_raw(fc, ["R1", "E1"], ["R2", "E2"])
    entries.append(ChainEntry("4-16-4", lhs4, rhs4, equality=True))

    cmi = conditional_mutual_information(fc, r, ["F"], e)
    h_f = entropy(fc, ["F"])
    if _f_kind(ts) == "quantum":
        entries.append(ChainEntry("4-16-5", cmi, 2 * h_f, note="quantum F"))
    else:
        entries.append(ChainEntry("4-16-6", cmi, h_f, note="classical F"))

    i_rb = mutual_information(fin_q, r, ["B1", "B2"])
    rhs7 = BOTTLENECK_BITS
    for i in (1, 2):
        rhs7 += 2 * entropy(fin_q, f"R{i}") - mutual_information(fin_q, f"R{i}", f"B{i}")
    entries.append(ChainEntry("4-16-7", i_rb, rhs7))

    k1, k2 = side_channels(ts)
    fe1, fe2 = entanglement_fidelity(k1), entanglement_fidelity(k2)
    entries.append(ChainEntry("final", 0.5, eta((fe1 + fe2) / 2), note=f"fe1={fe1:.6g} fe2={fe2:.6g}"))

    extras = {"fe1": fe1, "fe2": fe2, "I(R1R2:E1E2F)": mutual_information(fc, r, e + ["F"])}
    return ChainReport(ts.protocol, tuple(entries), thresholds, value, True, "", extras)


def twirled_entropy_sum(trace: ExecutionTrace | TraceSet) -> float:
    """H_TW(R1 B1) + H_TW(R2 B2) for the Pauli-twirled per-side channels."""
    return sum(entropy_exchange(pauli_twirl(k)) for k in side_channels(trace))


def verify_bound_on_protocol(result, trace: ExecutionTrace | TraceSet) -> bool:
    """True when ``result`` respects the average-fidelity bound and the trace the twirled-entropy bound.

    Raises :class:`NotApplicableError` for runs with prior entanglement.
    """
    value, independent = audit_independence(trace)
    if not independent:
        raise NotApplicableError(f"senders share entanglement (I(R1E1D1:R2E2D2)={value:.6g})")
    _, favg_max = fidelity_thresholds()
    within = result.average <= favg_max + 1e-6
    return bool(within and twirled_entropy_sum(trace) >= 1 - SLACK)


def auxiliary_identity(rho, keep, extra, aux: str = "H") -> tuple[float, float]:
    """Both sides of H(K) - H(K X) = H(X H) - H(H), with H purifying K X.

    Returns ``(lhs, rhs)``; they agree for any state, and rhs <= H(X).
    """
    keep, extra = list(keep), list(extra)
    from .qcore import partial_trace

    psi = purify(partial_trace(rho, keep + extra), aux).density()
    lhs = entropy(psi, keep) - entropy(psi, keep + extra)
    rhs = entropy(psi, extra + [aux]) - entropy(psi, [aux])
    return lhs, rhs


# ---------------------------------------------------------------------------
# Export


def report_to_json(report: ChainReport) -> dict:
    return {
        "protocol": report.protocol,
        "applicable": report.applicable,
        "warning": report.warning,
        "independence": report.independence,
        "thresholds": {"fe_max": report.thresholds[0], "favg_max": report.thresholds[1]},
        "entries": [
            {"id": e.id, "lhs": e.lhs, "rhs": e.rhs, "slack": e.slack, "holds": e.holds, "equality": e.equality, "note": e.note}
            for e in report.entries
        ],
        "extras": {k: float(v) for k, v in report.extras.items()},
    }


def _g(x: float) -> str:
    s = f"{x:.6g}"
    return "0" if s == "-0" else s


def report_to_table(report: ChainReport) -> str:
    rows = [("inequality", "lhs", "rhs", "slack", "verdict")]
    for e in report.entries:
        verdict = ("equal" if e.holds else "NOT EQUAL") if e.equality else ("holds" if e.holds else "VIOLATED")
        rows.append((e.id, _g(e.lhs), _g(e.rhs), _g(e.slack), verdict))
    widths = [max(len(r[k]) for r in rows) for k in range(5)]
    lines = ["  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip() for row in rows]
    return "\n".join(lines)


def dumps(report: ChainReport) -> str:
    return json.dumps(report_to_json(report), indent=2, sort_keys=True)
