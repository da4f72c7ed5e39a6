"""
Crossing two qubits through the butterfly
=========================================

Without help, the butterfly's middle channel F can carry only one of two
crossing qubits. Two Bell pairs shared between the senders change that:
each sender teleports with its own pair, forwards the other half of the
partner's pair on its side channel E_i, and only the XOR of the two Bell
outcomes has to cross F.
"""
import numpy as np

from qnetcode import protocols as pr
from qnetcode.qcore import RegisterLayout, haar_state

rng = np.random.default_rng(3)
lay = RegisterLayout.qubits("q")
psi1, psi2 = haar_state(rng, lay), haar_state(rng, lay)

res = pr.entangled_protocol(psi1, psi2, mode="enumerate")
print(f"{len(res.branches)} measurement branches")
print(f"worst branch fidelity: {res.min_fidelity:.12f}")
print("what each channel carried:", res.resources)

# The classical version of the same idea: XOR at C1, one bit per edge.
for x1 in (0, 1):
    for x2 in (0, 1):
        print((x1, x2), "->", pr.classical_xor_protocol(x1, x2))

# Inputs entangled with each other survive too, branch by branch.
from qnetcode.qcore import bell_state

joint = pr.entangled_protocol_joint(bell_state(("A1", "A2")))
print("Bell pair across the senders, min fidelity:", round(joint.min_fidelity, 12))

# Without prior entanglement, routing psi1 through F leaves B2 guessing.
base = pr.haar_average("baseline", trials=2000, seed=0)
print(f"no-entanglement baseline: f1 = {base.fidelity_1:.3f}  f2 = {base.fidelity_2:.3f}")
