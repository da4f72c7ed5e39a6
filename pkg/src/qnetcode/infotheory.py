"""Entropies, mutual informations and qubit-channel functionals.

All logarithms are base 2. Register groups are given as iterables of
register names; an empty group contributes zero entropy.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np
from scipy.optimize import bisect

from .qcore import (
    EIG_CUTOFF,
    PAULIS,
    DensityOperator,
    DimensionError,
    QCoreError,
    RegisterLayout,
    allclose,
    as_density,
    bell_state,
    haar_unitary,
    matrix_from_json,
    matrix_to_json,
    partial_trace,
)

SLACK = 1e-9


class GroupOverlapError(QCoreError):
    pass


def _as_group(g) -> tuple[str, ...]:
    if isinstance(g, str):
        return (g,)
    return tuple(g)


def _disjoint(*groups) -> list[tuple[str, ...]]:
    gs = [_as_group(g) for g in groups]
    seen: set[str] = set()
    for g in gs:
        if seen & set(g):
            raise GroupOverlapError(f"register groups overlap on {sorted(seen & set(g))}")
        seen |= set(g)
    return gs


# ---------------------------------------------------------------------------
# Entropies


def entropy_of_spectrum(eigs) -> float:
    p = np.asarray(eigs, dtype=float)
    p = p[p > EIG_CUTOFF]
    return float(max(-np.sum(p * np.log2(p)), 0.0))


def von_neumann_entropy(rho) -> float:
    """Entropy in bits; eigenvalues below 1e-12 count as zero."""
    return entropy_of_spectrum(np.linalg.eigvalsh(as_density(rho).matrix))


def entropy(rho, group: Iterable[str] = None) -> float:
    """H of the marginal on ``group`` (whole state if ``None``)."""
    rho = as_density(rho)
    if group is None:
        return von_neumann_entropy(rho)
    group = _as_group(group)
    if not group:
        return 0.0
    return von_neumann_entropy(partial_trace(rho, group))


def mutual_information(rho, group_a, group_b) -> float:
    """I(A:B) = H(A) + H(B) - H(AB)."""
    a, b = _disjoint(group_a, group_b)
    if not a or not b:
        raise GroupOverlapError("mutual information needs two nonempty groups")
    val = entropy(rho, a) + entropy(rho, b) - entropy(rho, a + b)
    return max(val, 0.0) if val > -SLACK else val


def conditional_mutual_information(rho, group_a, group_b, group_c) -> float:
    """I(A:B|C) = H(AC) + H(BC) - H(ABC) - H(C)."""
    a, b, c = _disjoint(group_a, group_b, group_c)
    val = entropy(rho, a + c) + entropy(rho, b + c) - entropy(rho, a + b + c) - entropy(rho, c)
    return max(val, 0.0) if val > -SLACK else val


# ---------------------------------------------------------------------------
# Channels


@dataclass(frozen=True)
class KrausChannel:
    input_dim: int
    output_dim: int
    kraus_ops: tuple

    def __post_init__(self):
        ops = tuple(np.array(k, dtype=complex) for k in self.kraus_ops)
        for k in ops:
            if k.shape != (self.output_dim, self.input_dim):
                raise DimensionError(f"Kraus operator of shape {k.shape}, expected {(self.output_dim, self.input_dim)}")
            k.setflags(write=False)
        total = sum(k.conj().T @ k for k in ops)
        if not allclose(total, np.eye(self.input_dim), atol=1e-9):
            raise QCoreError("Kraus operators are not trace preserving")
        object.__setattr__(self, "kraus_ops", ops)

    @classmethod
    def from_ops(cls, ops: Sequence) -> "KrausChannel":
        ops = [np.asarray(k, dtype=complex) for k in ops]
        return cls(ops[0].shape[1], ops[0].shape[0], tuple(ops))

    @classmethod
    def identity(cls, dim: int = 2) -> "KrausChannel":
        return cls(dim, dim, (np.eye(dim),))

    @classmethod
    def unitary(cls, u) -> "KrausChannel":
        u = np.asarray(u, dtype=complex)
        return cls(u.shape[1], u.shape[0], (u,))

    def __call__(self, matrix) -> np.ndarray:
        m = np.asarray(matrix, dtype=complex)
        return sum(k @ m @ k.conj().T for k in self.kraus_ops)

    def compose(self, other: "KrausChannel") -> "KrausChannel":
        """``self`` after ``other``."""
        return KrausChannel(other.input_dim, self.output_dim, tuple(a @ b for a in self.kraus_ops for b in other.kraus_ops))

    def choi_state(self, ref: str = "R", out: str = "B") -> DensityOperator:
        """(kappa x id) applied to the maximally entangled input, on registers (ref, out)."""
        d = self.input_dim
        m = np.zeros((d * self.output_dim, d * self.output_dim), dtype=complex)
        for i in range(d):
            for j in range(d):
                eij = np.zeros((d, d))
                eij[i, j] = 1.0
                m += np.kron(eij, self(eij)) / d
        layout = RegisterLayout(((ref, d), (out, self.output_dim)))
        return DensityOperator.unchecked(layout, m)

    def to_json(self) -> dict:
        return {
            "input_dim": self.input_dim,
            "output_dim": self.output_dim,
            "kraus": [matrix_to_json(k) for k in self.kraus_ops],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "KrausChannel":
        din, dout = int(obj["input_dim"]), int(obj["output_dim"])
        return cls(din, dout, tuple(matrix_from_json(k, dout, din) for k in obj["kraus"]))


def depolarizing_channel(p: float) -> KrausChannel:
    """rho -> (1-p) rho + p I/2 on a qubit."""
    w = [1 - 3 * p / 4, p / 4, p / 4, p / 4]
    return KrausChannel(2, 2, tuple(np.sqrt(wi) * P for wi, P in zip(w, PAULIS)))


def pauli_channel(probs: Sequence[float]) -> KrausChannel:
    return KrausChannel(2, 2, tuple(np.sqrt(p) * P for p, P in zip(probs, PAULIS) if p > 0))


def mix_channels(k1: KrausChannel, k2: KrausChannel, lam: float) -> KrausChannel:
    """Convex combination lam*k1 + (1-lam)*k2."""
    ops = tuple(np.sqrt(lam) * k for k in k1.kraus_ops) + tuple(np.sqrt(1 - lam) * k for k in k2.kraus_ops)
    return KrausChannel(k1.input_dim, k1.output_dim, ops)


def random_channel(rng: np.random.Generator, dim: int = 2, env_dim: int = 4) -> KrausChannel:
    """Stinespring channel: Haar unitary on system x environment, environment traced."""
    u = haar_unitary(rng, dim * env_dim).reshape(dim, env_dim, dim, env_dim)
    ops = tuple(u[:, k, :, 0] for k in range(env_dim))
    return KrausChannel(dim, dim, ops)


def channel_from_choi(choi: DensityOperator, tol: float = EIG_CUTOFF) -> KrausChannel:
    """Recover Kraus operators from a normalised Choi state on (reference, output)."""
    din, dout = choi.layout.dims
    w, v = np.linalg.eigh(choi.matrix * din)
    ops = []
    for lam, vec in zip(w, v.T):
        if lam > tol:
            ops.append(np.sqrt(lam) * vec.reshape(din, dout).T)
    ops = _complete(ops, din)
    return KrausChannel(din, dout, tuple(ops))


def _complete(ops, din):
    # Rescale away the rounding from dropped eigenvalues so completeness holds.
    total = sum(k.conj().T @ k for k in ops)
    w, v = np.linalg.eigh(total)
    inv_sqrt = v @ np.diag(1 / np.sqrt(w)) @ v.conj().T
    return [k @ inv_sqrt for k in ops]


# ---------------------------------------------------------------------------
# Fidelities


def _check_qubit(kappa: KrausChannel) -> None:
    if kappa.input_dim != 2 or kappa.output_dim != 2:
        raise DimensionError(f"expected a qubit channel, got {kappa.input_dim}->{kappa.output_dim}")


def entanglement_fidelity(kappa: KrausChannel) -> float:
    """<Phi+| (kappa x id)(Phi+) |Phi+>."""
    _check_qubit(kappa)
    phi = bell_state(("R", "B")).amplitudes
    val = np.vdot(phi, kappa.choi_state().matrix @ phi).real
    return float(min(max(val, 0.0), 1.0))


def entanglement_fidelity_trace_form(kappa: KrausChannel) -> float:
    """Closed form sum_K |Tr K|^2 / d^2."""
    d = kappa.input_dim
    return float(sum(abs(np.trace(k)) ** 2 for k in kappa.kraus_ops) / d**2)


def average_fidelity_from_fe(f_e: float) -> float:
    """Haar-average fidelity (1 + 2 f_e)/3 of a qubit channel."""
    if not (-1e-12 <= f_e <= 1 + 1e-12):
        raise ValueError(f"entanglement fidelity {f_e} outside [0, 1]")
    return (1 + 2 * f_e) / 3


class FidelityReport(NamedTuple):
    entanglement_fidelity: float
    average_fidelity: float


def fidelity_report(kappa: KrausChannel) -> FidelityReport:
    fe = entanglement_fidelity(kappa)
    return FidelityReport(fe, average_fidelity_from_fe(fe))


def monte_carlo_average_fidelity(kappa: KrausChannel, rng: np.random.Generator, samples: int = 10_000) -> float:
    """Mean of <psi|kappa(psi)|psi> over Haar-random pure inputs."""
    d = kappa.input_dim
    v = rng.standard_normal((samples, d)) + 1j * rng.standard_normal((samples, d))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    total = np.zeros(samples)
    for k in kappa.kraus_ops:
        amp = np.einsum("si,ij,sj->s", v.conj(), k, v)
        total += np.abs(amp) ** 2
    return float(total.mean())


# ---------------------------------------------------------------------------
# eta and its inverse


def eta(x: float) -> float:
    """-x log2 x - (1-x) log2((1-x)/3), with eta(1) = 0."""
    if not (0 < x <= 1):
        raise ValueError(f"eta is defined on (0, 1], got {x}")
    if x == 1:
        return 0.0
    return float(-x * np.log2(x) - (1 - x) * np.log2((1 - x) / 3))


def solve_eta_inverse(target: float, xtol: float = 1e-9) -> float:
    """Root of eta(x) = target on the decreasing branch [1/4, 1]."""
    if not (0 <= target <= 2):
        raise ValueError(f"eta takes values in [0, 2], got {target}")
    if target == 0:
        return 1.0
    if target == 2:
        return 0.25
    return float(bisect(lambda x: eta(x) - target, 0.25, 1.0, xtol=xtol))


# ---------------------------------------------------------------------------
# Transmission information and twirling


def transmission_information(kappa: KrausChannel) -> float:
    """I(B:R) on kappa applied to half of a maximally entangled state."""
    return mutual_information(kappa.choi_state(), "R", "B")


def entropy_exchange(kappa: KrausChannel) -> float:
    """H(RB) of the Choi state."""
    return von_neumann_entropy(kappa.choi_state())


def pauli_twirl(kappa: KrausChannel) -> KrausChannel:
    """(1/4) sum_P P^dag kappa(P . P^dag) P; always a Pauli channel."""
    _check_qubit(kappa)
    ops = tuple(0.5 * P.conj().T @ k @ P for P in PAULIS for k in kappa.kraus_ops)
    return KrausChannel(2, 2, ops)


def haar_twirl(kappa: KrausChannel, rng: np.random.Generator, samples: int = 256) -> KrausChannel:
    """Finite-sample approximation of the SU(2) twirl, for comparison only."""
    _check_qubit(kappa)
    ops = []
    for _ in range(samples):
        u = haar_unitary(rng, 2)
        ops.extend(u.conj().T @ k @ u / np.sqrt(samples) for k in kappa.kraus_ops)
    return KrausChannel(2, 2, tuple(ops))


def pauli_transfer_matrix(kappa: KrausChannel) -> np.ndarray:
    """R_ij = Tr(P_i kappa(P_j)) / 2."""
    return np.array([[np.trace(Pi @ kappa(Pj)).real / 2 for Pj in PAULIS] for Pi in PAULIS])


# ---------------------------------------------------------------------------
# Property checks


class InequalityCheck(NamedTuple):
    lhs: float
    rhs: float
    holds: bool


def check_imai_sum(rho, group_r, group_a, group_b) -> InequalityCheck:
    """I(R:A) + I(R:B) <= 2 H(R)."""
    r, a, b = _disjoint(group_r, group_a, group_b)
    lhs = (mutual_information(rho, r, a) if a else 0.0) + (mutual_information(rho, r, b) if b else 0.0)
    rhs = 2 * entropy(rho, r)
    return InequalityCheck(lhs, rhs, lhs <= rhs + SLACK)


def check_quantum_fano(kappa: KrausChannel) -> InequalityCheck:
    """Entropy exchange H(RB) against eta(f_e)."""
    _check_qubit(kappa)
    h = entropy_exchange(kappa)
    fe = entanglement_fidelity(kappa)
    bound = eta(fe) if fe > 0 else float("inf")
    return InequalityCheck(h, bound, h <= bound + SLACK)


def check_monotonicity(rho, group_a, group_b, group_c) -> InequalityCheck:
    """I(A:B) <= I(A:BC)."""
    a, b, c = _disjoint(group_a, group_b, group_c)
    return _leq(mutual_information(rho, a, b), mutual_information(rho, a, b + c))


def check_chain_rule(rho, group_a, group_b, group_c, atol: float = 1e-10) -> InequalityCheck:
    """I(A:BC) = I(A:B|C) + I(A:C), reported as an equality."""
    a, b, c = _disjoint(group_a, group_b, group_c)
    lhs = mutual_information(rho, a, b + c)
    rhs = conditional_mutual_information(rho, a, b, c) + mutual_information(rho, a, c)
    return InequalityCheck(lhs, rhs, abs(lhs - rhs) <= atol)


def check_transmission_convexity(k1: KrausChannel, k2: KrausChannel, lam: float = 0.5) -> InequalityCheck:
    """I(lam k1 + (1-lam) k2) <= lam I(k1) + (1-lam) I(k2)."""
    lhs = transmission_information(mix_channels(k1, k2, lam))
    rhs = lam * transmission_information(k1) + (1 - lam) * transmission_information(k2)
    return InequalityCheck(lhs, rhs, lhs <= rhs + SLACK)


def check_twirl(kappa: KrausChannel) -> tuple[InequalityCheck, InequalityCheck]:
    """f_e unchanged by twirling; transmission information not increased."""
    tw = pauli_twirl(kappa)
    fe, fe_tw = entanglement_fidelity(kappa), entanglement_fidelity(tw)
    same = InequalityCheck(fe, fe_tw, abs(fe - fe_tw) <= 1e-10)
    return same, _leq(transmission_information(tw), transmission_information(kappa))


def _leq(lhs: float, rhs: float) -> InequalityCheck:
    return InequalityCheck(lhs, rhs, lhs <= rhs + SLACK)
