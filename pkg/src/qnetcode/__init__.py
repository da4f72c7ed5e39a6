"""Quantum network coding on the butterfly network.

Modules
-------
qcore       states, unitaries, Bell measurement, partial trace, purification
infotheory  entropies, mutual informations, qubit-channel functionals
netmodel    butterfly topology and the branching protocol executor
protocols   classical XOR, prior-entanglement and no-entanglement codes
boundcheck  entropy audit of a run against the no-entanglement bound
cli         ``qnet`` command line
"""

from .qcore import (
    BellOutcome,
    DensityOperator,
    PureState,
    RegisterLayout,
    apply_on,
    bell_measurement,
    fidelity,
    partial_trace,
    pauli_correction,
    purify,
    tensor_product,
)
from .infotheory import (
    KrausChannel,
    average_fidelity_from_fe,
    conditional_mutual_information,
    entanglement_fidelity,
    eta,
    mutual_information,
    pauli_twirl,
    solve_eta_inverse,
    transmission_information,
    von_neumann_entropy,
)
from .netmodel import Capacity, audit_independence, build_butterfly, run_protocol
from .protocols import (
    baseline_route_and_estimate,
    classical_xor_protocol,
    entangled_protocol,
    entangled_protocol_joint,
)
from .boundcheck import audit_chain, fidelity_thresholds, verify_bound_on_protocol

__version__ = "0.1.0"
