"""
Entropies, channels and fidelities
==================================

A short tour of the information-theory helpers: entropies of small states,
the entanglement fidelity of a channel, its transmission information, and
what twirling does to both.
"""
import numpy as np

from qnetcode.infotheory import (
    KrausChannel,
    conditional_mutual_information,
    depolarizing_channel,
    entanglement_fidelity,
    eta,
    fidelity_report,
    monte_carlo_average_fidelity,
    mutual_information,
    pauli_twirl,
    random_channel,
    transmission_information,
)
from qnetcode.qcore import PureState, RegisterLayout, Z, bell_state

print("I(a:b) of a Bell pair:", mutual_information(bell_state(("a", "b")), "a", "b"))
ghz = PureState(RegisterLayout.qubits("q0", "q1", "q2"), np.array([1, 0, 0, 0, 0, 0, 0, 1]) / np.sqrt(2))
print("I(q0:q1|q2) of GHZ:", conditional_mutual_information(ghz, "q0", "q1", "q2"))

# Phase flip with probability 0.3 keeps f_e = 0.7.
flip = KrausChannel.from_ops([np.sqrt(0.7) * np.eye(2), np.sqrt(0.3) * Z])
print("phase flip:", fidelity_report(flip))

rng = np.random.default_rng(0)
k = random_channel(rng)
tw = pauli_twirl(k)
print(f"random channel  f_e = {entanglement_fidelity(k):.6f}  I = {transmission_information(k):.4f}")
print(f"after twirling  f_e = {entanglement_fidelity(tw):.6f}  I = {transmission_information(tw):.4f}")
print(f"(1+2 f_e)/3 = {(1 + 2 * entanglement_fidelity(k)) / 3:.4f}   Monte Carlo = {monte_carlo_average_fidelity(k, rng, 20000):.4f}")

for p in (0.0, 0.5, 1.0):
    fe = entanglement_fidelity(depolarizing_channel(p))
    print(f"depolarizing p={p}: f_e = {fe:.3f}  eta(f_e) = {eta(fe):.3f}")
