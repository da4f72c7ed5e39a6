"""
Teleporting one qubit with a shared Bell pair
=============================================

Alice holds an unknown qubit and half of a Bell pair. She measures her two
qubits in the Bell basis and sends the two outcome bits; Bob applies the
matching Pauli correction to his half.
"""
import numpy as np

from qnetcode.qcore import (
    RegisterLayout,
    apply_on,
    bell_measurement,
    bell_state,
    fidelity,
    haar_state,
    partial_trace,
    pauli_correction,
    tensor_product,
)

rng = np.random.default_rng(1)
psi = haar_state(rng, RegisterLayout.qubits("in"))
state = tensor_product(psi, bell_state(("alice", "bob"))).density()

# Every Bell outcome is equally likely, and each one is fixed by a Pauli.
for outcome in [(0, 0), (1, 0), (0, 1), (1, 1)]:
    _, post, p = bell_measurement(state, ("in", "alice"), outcome=outcome)
    bob = apply_on(post, pauli_correction(outcome), ["bob"])
    f = fidelity(psi.relabel({"in": "bob"}), partial_trace(bob, ["bob"]))
    print(f"outcome {outcome}  p = {p:.3f}  fidelity after correction = {f:.12f}")
