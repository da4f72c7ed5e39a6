"""Reference computations written directly in numpy, independent of qnetcode."""

import numpy as np


def marginal(rho, dims, keep):
    """Partial trace by explicit index loops over the traced subsystems."""
    n = len(dims)
    rho = np.asarray(rho).reshape(list(dims) * 2)
    traced = [i for i in range(n) if i not in keep]
    letters = "abcdefghijklmnop"
    row = [letters[i] for i in range(n)]
    col = [letters[i] if i in traced else letters[i].upper() for i in range(n)]
    out = "".join(letters[i] for i in keep) + "".join(letters[i].upper() for i in keep)
    m = np.einsum("".join(row) + "".join(col) + "->" + out, rho)
    d = int(np.prod([dims[i] for i in keep]))
    return m.reshape(d, d)


def entropy_bits(rho):
    w = np.linalg.eigvalsh(rho)
    w = w[w > 1e-12]
    return float(-(w * np.log2(w)).sum())


def outer(v):
    v = np.asarray(v, dtype=complex)
    return np.outer(v, v.conj())


def random_ket(rng, d):
    v = rng.normal(size=d) + 1j * rng.normal(size=d)
    return v / np.linalg.norm(v)


def bell_projectors():
    s = 1 / np.sqrt(2)
    return {
        (0, 0): outer([s, 0, 0, s]),
        (1, 0): outer([s, 0, 0, -s]),
        (0, 1): outer([0, s, s, 0]),
        (1, 1): outer([0, s, -s, 0]),
    }


def choi_by_kron(kraus):
    """(kappa x id)(Phi+) with the channel on the first factor, built with np.kron."""
    s = 1 / np.sqrt(2)
    phi = outer([s, 0, 0, s])
    return sum(np.kron(k, np.eye(2)) @ phi @ np.kron(k, np.eye(2)).conj().T for k in kraus)
