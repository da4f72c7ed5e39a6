"""Dense states and operators over named registers.

Every register is a tensor factor with a name and a dimension. Tensor index
ordering is big-endian over the declared register order, so ``|01>`` on
registers ``(a, b)`` means ``a=0, b=1``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np

ATOL = 1e-10
PSD_FLOOR = -1e-9
EIG_CUTOFF = 1e-12


class QCoreError(ValueError):
    """Base class for invalid operations on states and operators."""


class LayoutError(QCoreError):
    pass


class DimensionError(QCoreError):
    pass


class NotUnitaryError(QCoreError):
    pass


class InvalidStateError(QCoreError):
    pass


class ZeroProbabilityError(QCoreError):
    def __init__(self, outcome, probability: float):
        super().__init__(f"outcome {outcome} has probability {probability:.3e}")
        self.outcome = outcome
        self.probability = probability


def allclose(a, b, atol: float = ATOL) -> bool:
    """Entrywise comparison of complex matrices at absolute tolerance ``atol``."""
    a = np.asarray(a)
    b = np.asarray(b)
    return a.shape == b.shape and bool(np.allclose(a, b, rtol=0.0, atol=atol))


def _frozen(arr) -> np.ndarray:
    out = np.array(arr, dtype=complex)
    out.setflags(write=False)
    return out


# ---------------------------------------------------------------------------
# Layout


@dataclass(frozen=True)
class RegisterLayout:
    """Ordered named subsystems.

    >>> RegisterLayout.qubits("R1", "A1").dim
    4
    """

    registers: tuple[tuple[str, int], ...]

    def __post_init__(self):
        regs = tuple((str(n), int(d)) for n, d in self.registers)
        object.__setattr__(self, "registers", regs)
        names = [n for n, _ in regs]
        if len(set(names)) != len(names):
            raise LayoutError(f"duplicate register names in {names}")
        for n, d in regs:
            if d < 1:
                raise LayoutError(f"register {n!r} has dimension {d}")

    @classmethod
    def qubits(cls, *names: str) -> "RegisterLayout":
        return cls(tuple((n, 2) for n in names))

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self.registers)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(d for _, d in self.registers)

    @property
    def dim(self) -> int:
        return int(np.prod(self.dims, dtype=np.int64)) if self.registers else 1

    def __contains__(self, name) -> bool:
        return name in self.names

    def __len__(self) -> int:
        return len(self.registers)

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise LayoutError(f"unknown register {name!r}; have {self.names}") from None

    def dim_of(self, names: Iterable[str]) -> int:
        return int(np.prod([self.dims[self.index(n)] for n in names], dtype=np.int64))

    def concat(self, other: "RegisterLayout") -> "RegisterLayout":
        clash = set(self.names) & set(other.names)
        if clash:
            raise LayoutError(f"register name collision: {sorted(clash)}")
        return RegisterLayout(self.registers + other.registers)

    def select(self, names: Iterable[str]) -> "RegisterLayout":
        """Sub-layout holding ``names`` in this layout's order."""
        keep = set(names)
        for n in keep:
            self.index(n)
        return RegisterLayout(tuple(r for r in self.registers if r[0] in keep))

    def without(self, names: Iterable[str]) -> "RegisterLayout":
        drop = set(names)
        for n in drop:
            self.index(n)
        return RegisterLayout(tuple(r for r in self.registers if r[0] not in drop))


# ---------------------------------------------------------------------------
# States


@dataclass(frozen=True)
class DensityOperator:
    layout: RegisterLayout
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = _frozen(self.matrix)
        d = self.layout.dim
        if m.shape != (d, d):
            raise DimensionError(f"matrix shape {m.shape} does not match layout dim {d}")
        if not allclose(m, m.conj().T):
            raise InvalidStateError("density matrix is not Hermitian")
        tr = np.trace(m).real
        if abs(tr - 1.0) > ATOL:
            raise InvalidStateError(f"trace is {tr!r}, expected 1")
        if np.linalg.eigvalsh(m).min() < PSD_FLOOR:
            raise InvalidStateError("density matrix has a negative eigenvalue")
        object.__setattr__(self, "matrix", m)

    @classmethod
    def unchecked(cls, layout: RegisterLayout, matrix) -> "DensityOperator":
        """Wrap a matrix already known to be a state (skips the eigen check).

        Hermiticity is restored by symmetrisation and the trace is renormalised;
        only internal code paths that preserve positivity should use this.
        """
        m = np.asarray(matrix, dtype=complex)
        m = 0.5 * (m + m.conj().T)
        m = m / np.trace(m).real
        obj = object.__new__(cls)
        object.__setattr__(obj, "layout", layout)
        object.__setattr__(obj, "matrix", _frozen(m))
        return obj

    @property
    def dim(self) -> int:
        return self.layout.dim

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)

    def is_pure(self, atol: float = 1e-9) -> bool:
        return abs(np.trace(self.matrix @ self.matrix).real - 1.0) < atol

    def reorder(self, names: Sequence[str]) -> "DensityOperator":
        """Same state with registers permuted into ``names`` order."""
        names = list(names)
        if sorted(names) != sorted(self.layout.names):
            raise LayoutError(f"reorder needs a permutation of {self.layout.names}")
        perm = [self.layout.index(n) for n in names]
        n = len(perm)
        t = self.matrix.reshape(self.layout.dims * 2)
        t = t.transpose(perm + [p + n for p in perm])
        new = RegisterLayout(tuple(self.layout.registers[p] for p in perm))
        return DensityOperator.unchecked(new, t.reshape(new.dim, new.dim))

    def relabel(self, mapping: dict[str, str]) -> "DensityOperator":
        regs = tuple((mapping.get(n, n), d) for n, d in self.layout.registers)
        return DensityOperator.unchecked(RegisterLayout(regs), self.matrix)


@dataclass(frozen=True)
class PureState:
    layout: RegisterLayout
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = _frozen(np.ravel(self.amplitudes))
        if v.shape != (self.layout.dim,):
            raise DimensionError(f"{v.size} amplitudes for layout dim {self.layout.dim}")
        nrm = np.linalg.norm(v)
        if abs(nrm - 1.0) > ATOL:
            raise InvalidStateError(f"state norm is {nrm!r}, expected 1")
        object.__setattr__(self, "amplitudes", v)

    @classmethod
    def normalized(cls, layout: RegisterLayout, amplitudes) -> "PureState":
        v = np.asarray(amplitudes, dtype=complex).ravel()
        return cls(layout, v / np.linalg.norm(v))

    def density(self) -> DensityOperator:
        v = self.amplitudes
        return DensityOperator.unchecked(self.layout, np.outer(v, v.conj()))

    def relabel(self, mapping: dict[str, str]) -> "PureState":
        regs = tuple((mapping.get(n, n), d) for n, d in self.layout.registers)
        return PureState(RegisterLayout(regs), self.amplitudes)


def as_density(state: DensityOperator | PureState) -> DensityOperator:
    return state.density() if isinstance(state, PureState) else state


# ---------------------------------------------------------------------------
# Named states and gates

I2 = _frozen(np.eye(2))
X = _frozen([[0, 1], [1, 0]])
Y = _frozen([[0, -1j], [1j, 0]])
Z = _frozen([[1, 0], [0, -1]])
H = _frozen(np.array([[1, 1], [1, -1]]) / np.sqrt(2))
CNOT = _frozen([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]])
PAULIS = (I2, X, Y, Z)

_S = 1 / np.sqrt(2)
# Indexed by BellOutcome(x, z): x flips the phase, z flips the bit.
BELL_VECTORS = {
    (0, 0): _frozen([_S, 0, 0, _S]),  # Phi+
    (1, 0): _frozen([_S, 0, 0, -_S]),  # Phi-
    (0, 1): _frozen([0, _S, _S, 0]),  # Psi+
    (1, 1): _frozen([0, _S, -_S, 0]),  # Psi-
}


def ket(bits: str, names: Sequence[str] | None = None) -> PureState:
    """Computational basis state of qubits, e.g. ``ket("01")``."""
    names = list(names) if names is not None else [f"q{i}" for i in range(len(bits))]
    if len(names) != len(bits):
        raise LayoutError("one register name per bit required")
    v = np.zeros(2 ** len(bits), dtype=complex)
    v[int(bits, 2) if bits else 0] = 1.0
    return PureState(RegisterLayout.qubits(*names), v)


def qubit(amplitudes, name: str = "q0") -> PureState:
    return PureState.normalized(RegisterLayout.qubits(name), amplitudes)


def bell_state(names: Sequence[str] = ("q0", "q1"), outcome=(0, 0)) -> PureState:
    return PureState(RegisterLayout.qubits(*names), BELL_VECTORS[tuple(outcome)])


def maximally_mixed(layout: RegisterLayout) -> DensityOperator:
    return DensityOperator(layout, np.eye(layout.dim) / layout.dim)


def haar_state(rng: np.random.Generator, layout: RegisterLayout) -> PureState:
    """Haar-random pure state from a normalised complex Gaussian vector."""
    v = rng.standard_normal(layout.dim) + 1j * rng.standard_normal(layout.dim)
    return PureState.normalized(layout, v)


def haar_unitary(rng: np.random.Generator, dim: int) -> np.ndarray:
    from scipy.stats import unitary_group

    return unitary_group.rvs(dim, random_state=rng)


def random_density(rng: np.random.Generator, layout: RegisterLayout, rank: int | None = None) -> DensityOperator:
    """Random mixed state as the marginal of a Haar pure state (rank ``rank``)."""
    rank = layout.dim if rank is None else rank
    g = rng.standard_normal((layout.dim, rank)) + 1j * rng.standard_normal((layout.dim, rank))
    m = g @ g.conj().T
    return DensityOperator.unchecked(layout, m)


# ---------------------------------------------------------------------------
# Operations


def tensor_product(a, b):
    """Kronecker product of two states with disjoint register names."""
    layout = a.layout.concat(b.layout)
    if isinstance(a, PureState) and isinstance(b, PureState):
        return PureState(layout, np.kron(a.amplitudes, b.amplitudes))
    if isinstance(a, PureState) or isinstance(b, PureState):
        a, b = as_density(a), as_density(b)
    return DensityOperator.unchecked(layout, np.kron(a.matrix, b.matrix))


def tensor_all(*states):
    out = states[0]
    for s in states[1:]:
        out = tensor_product(out, s)
    return out


def _reduced(matrix: np.ndarray, dims: Sequence[int], keep_idx: Sequence[int]) -> np.ndarray:
    n = len(dims)
    keep_idx = list(keep_idx)
    traced = [i for i in range(n) if i not in keep_idx]
    t = matrix.reshape(tuple(dims) * 2)
    t = t.transpose(keep_idx + traced + [i + n for i in keep_idx] + [i + n for i in traced])
    dk = int(np.prod([dims[i] for i in keep_idx], dtype=np.int64))
    dt = int(np.prod([dims[i] for i in traced], dtype=np.int64))
    return np.einsum("ajbj->ab", t.reshape(dk, dt, dk, dt))


def partial_trace(rho, keep: Iterable[str]) -> DensityOperator:
    """Marginal on ``keep``; the kept registers stay in their original order."""
    rho = as_density(rho)
    keep = set(keep)
    if not keep:
        raise LayoutError("keep must name at least one register")
    for n in keep:
        rho.layout.index(n)
    idx = [i for i, n in enumerate(rho.layout.names) if n in keep]
    sub = RegisterLayout(tuple(rho.layout.registers[i] for i in idx))
    if len(idx) == len(rho.layout):
        return rho
    return DensityOperator.unchecked(sub, _reduced(rho.matrix, rho.layout.dims, idx))


def _check_unitary(u: np.ndarray) -> None:
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise DimensionError(f"operator of shape {u.shape} is not square")
    if not allclose(u.conj().T @ u, np.eye(u.shape[0])):
        raise NotUnitaryError("operator is not unitary within 1e-10")


def _left_apply(t: np.ndarray, op: np.ndarray, axes: list[int], dims) -> np.ndarray:
    """Contract ``op`` (shape out x in) into tensor ``t`` along ``axes``."""
    k = len(axes)
    rest = [i for i in range(t.ndim) if i not in axes]
    moved = t.transpose(axes + rest)
    shp = moved.shape
    din = int(np.prod(shp[:k], dtype=np.int64))
    out = op @ moved.reshape(din, -1)
    out = out.reshape(tuple(dims) + shp[k:])
    inv = np.argsort(axes + rest)
    return out.transpose(inv)


def embed_operator(layout: RegisterLayout, op: np.ndarray, targets: Sequence[str]) -> np.ndarray:
    """Full-space matrix of ``op`` acting on ``targets``, identity elsewhere."""
    dims = list(layout.dims)
    eye = np.eye(layout.dim, dtype=complex).reshape(dims + [layout.dim])
    axes = [layout.index(n) for n in targets]
    out = _left_apply(eye, np.asarray(op, dtype=complex), axes, [dims[a] for a in axes])
    return out.reshape(layout.dim, layout.dim)


def apply_on(state, u, targets: Sequence[str]) -> DensityOperator:
    """Conjugate ``state`` by unitary ``u`` placed on ``targets``."""
    rho = as_density(state)
    u = np.asarray(u, dtype=complex)
    targets = list(targets)
    if len(set(targets)) != len(targets):
        raise LayoutError(f"repeated target in {targets}")
    expected = rho.layout.dim_of(targets)
    if u.shape != (expected, expected):
        raise DimensionError(f"operator shape {u.shape} does not fit targets of dim {expected}")
    _check_unitary(u)
    return DensityOperator.unchecked(rho.layout, _sandwich(rho, u, u, targets))


def _sandwich(rho: DensityOperator, left: np.ndarray, right: np.ndarray, targets: Sequence[str]) -> np.ndarray:
    layout = rho.layout
    axes = [layout.index(n) for n in targets]
    dims = list(layout.dims)
    n = len(dims)
    tdims = [dims[a] for a in axes]
    t = rho.matrix.reshape(dims * 2)
    t = _left_apply(t, left, axes, tdims)
    t = _left_apply(t, right.conj(), [a + n for a in axes], tdims)
    return t.reshape(layout.dim, layout.dim)


def apply_kraus(state, kraus_ops: Sequence[np.ndarray], targets: Sequence[str]) -> DensityOperator:
    """Apply a dimension-preserving channel given by Kraus operators on ``targets``."""
    rho = as_density(state)
    total = np.zeros_like(rho.matrix)
    for k in kraus_ops:
        total = total + _sandwich(rho, np.asarray(k, dtype=complex), np.asarray(k, dtype=complex), targets)
    return DensityOperator.unchecked(rho.layout, total)


def project_out(rho: DensityOperator, vector: np.ndarray, targets: Sequence[str]) -> tuple[float, DensityOperator | None]:
    """Project ``targets`` onto ``vector`` and remove them from the layout.

    Returns the Born probability and the renormalised post-measurement state
    on the remaining registers (``None`` when nothing remains or p == 0).
    """
    layout = rho.layout
    targets = list(targets)
    axes = [layout.index(n) for n in targets]
    dims = list(layout.dims)
    n = len(dims)
    rest = [i for i in range(n) if i not in axes]
    bra = np.asarray(vector, dtype=complex).conj().reshape(1, -1)
    t = rho.matrix.reshape(dims * 2)
    t = t.transpose(axes + rest + [a + n for a in axes] + [r + n for r in rest])
    dt = int(np.prod([dims[a] for a in axes], dtype=np.int64))
    dr = int(np.prod([dims[r] for r in rest], dtype=np.int64))
    t = t.reshape(dt, dr, dt, dr)
    m = np.einsum("i,iajb,j->ab", bra.ravel(), t, bra.ravel().conj())
    p = float(np.trace(m).real)
    if not rest:
        return p, None
    if p <= 0:
        return max(p, 0.0), None
    return p, DensityOperator.unchecked(layout.without(targets), m / p)


class BellOutcome(NamedTuple):
    """Bell measurement result: (0,0)=Phi+, (1,0)=Phi-, (0,1)=Psi+, (1,1)=Psi-."""

    x: int
    z: int

    def __xor__(self, other) -> "BellOutcome":
        return BellOutcome(self.x ^ other[0], self.z ^ other[1])

    @property
    def bits(self) -> tuple[int, int]:
        return (self.x, self.z)


ALL_BELL_OUTCOMES = tuple(BellOutcome(x, z) for x in (0, 1) for z in (0, 1))


def pauli_correction(outcome) -> np.ndarray:
    """Teleportation recovery unitary: I, Z, X, Z@X for (0,0), (1,0), (0,1), (1,1)."""
    x, z = outcome
    u = np.eye(2, dtype=complex)
    if z:
        u = X @ u
    if x:
        u = Z @ u
    return u


def bell_branches(state, pair: Sequence[str]) -> list[tuple[BellOutcome, DensityOperator | None, float]]:
    """All four Bell-measurement branches with their Born weights."""
    rho = as_density(state)
    for name in pair:
        if rho.layout.dims[rho.layout.index(name)] != 2:
            raise DimensionError(f"Bell measurement needs qubits; {name!r} is not one")
    out = []
    for o in ALL_BELL_OUTCOMES:
        p, post = project_out(rho, BELL_VECTORS[o.bits], pair)
        out.append((o, post, p))
    return out


def bell_measurement(state, pair: Sequence[str], rng: np.random.Generator | None = None, outcome=None):
    """Measure ``pair`` in the Bell basis.

    Either samples with ``rng`` or forces ``outcome``. Returns
    ``(outcome, post_state, probability)``; the measured registers are removed.
    """
    branches = bell_branches(state, pair)
    if outcome is not None:
        outcome = BellOutcome(*outcome)
        for o, post, p in branches:
            if o == outcome:
                if p < EIG_CUTOFF:
                    raise ZeroProbabilityError(outcome, p)
                return o, post, p
    if rng is None:
        raise ValueError("either rng or outcome is required")
    probs = np.array([max(p, 0.0) for _, _, p in branches])
    k = rng.choice(4, p=probs / probs.sum())
    return branches[k][0], branches[k][1], branches[k][2]


def purify(rho, aux_name: str = "H") -> PureState:
    """Purification of ``rho`` with an auxiliary register of dimension rank(rho)."""
    rho = as_density(rho)
    if aux_name in rho.layout:
        raise LayoutError(f"auxiliary name {aux_name!r} already in layout")
    w, v = np.linalg.eigh(rho.matrix)
    sel = w > EIG_CUTOFF
    w, v = w[sel], v[:, sel]
    rank = max(int(sel.sum()), 1)
    # |psi> = sum_k sqrt(w_k) |v_k> |k>
    amps = (v * np.sqrt(w)).reshape(rho.dim, rank)
    layout = rho.layout.concat(RegisterLayout(((aux_name, rank),)))
    return PureState.normalized(layout, amps.ravel())


def fidelity(psi: PureState, rho) -> float:
    """Overlap <psi|rho|psi> of a pure reference with a state of equal dimension."""
    rho = as_density(rho)
    v = psi.amplitudes
    if v.shape[0] != rho.dim:
        raise DimensionError(f"pure state dim {v.shape[0]} vs state dim {rho.dim}")
    val = np.vdot(v, rho.matrix @ v)
    if abs(val.imag) > 1e-12:
        raise InvalidStateError(f"fidelity has imaginary part {val.imag!r}")
    return float(min(max(val.real, 0.0), 1.0))


# ---------------------------------------------------------------------------
# JSON


def matrix_to_json(m) -> list[list[float]]:
    return [[float(c.real), float(c.imag)] for c in np.asarray(m, dtype=complex).ravel()]


def matrix_from_json(entries, rows: int, cols: int | None = None) -> np.ndarray:
    cols = rows if cols is None else cols
    arr = np.array([complex(re, im) for re, im in entries], dtype=complex)
    if arr.size != rows * cols:
        raise DimensionError(f"{arr.size} entries for a {rows}x{cols} matrix")
    return arr.reshape(rows, cols)


def state_to_json(state) -> dict:
    state_layout = [[n, d] for n, d in state.layout.registers]
    if isinstance(state, PureState):
        return {"layout": state_layout, "amplitudes": matrix_to_json(state.amplitudes)}
    return {"layout": state_layout, "matrix": matrix_to_json(state.matrix)}


def state_from_json(obj) -> DensityOperator | PureState:
    if isinstance(obj, str):
        obj = json.loads(obj)
    try:
        layout = RegisterLayout(tuple((n, d) for n, d in obj["layout"]))
        if "amplitudes" in obj:
            return PureState(layout, matrix_from_json(obj["amplitudes"], layout.dim, 1).ravel())
        return DensityOperator(layout, matrix_from_json(obj["matrix"], layout.dim))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, QCoreError):
            raise
        raise InvalidStateError(f"malformed state JSON: {exc}") from exc


def to_pure(state, atol: float = 1e-9) -> PureState:
    """Pure state behind a rank-one density operator (phase fixed arbitrarily)."""
    if isinstance(state, PureState):
        return state
    w, v = np.linalg.eigh(state.matrix)
    if abs(w[-1] - 1.0) > atol:
        raise InvalidStateError("state is not pure")
    return PureState.normalized(state.layout, v[:, -1])
