"""
Auditing the no-entanglement bound
==================================

Any butterfly protocol whose senders share no entanglement keeps the mean
entanglement fidelity below eta^{-1}(1/2) ~ 0.9256, i.e. average fidelity
below ~ 0.9504. The audit below evaluates every step of that argument on
the states a concrete run produces, and refuses to apply it to the
entanglement-assisted protocol.
"""
from qnetcode import boundcheck as bc
from qnetcode import protocols as pr

fe_max, favg_max = bc.fidelity_thresholds()
print(f"fe_max = {fe_max:.5f}   favg_max = {favg_max:.5f}\n")

for name in ("baseline", "measure-all", "trivial", "entangled"):
    report = bc.audit_chain(pr.REFERENCE_TRACES[name]())
    print(f"== {name}")
    if not report.applicable:
        print(report.warning, "\n")
        continue
    print(bc.report_to_table(report))
    print(f"twirled entropy sum: {bc.twirled_entropy_sum(pr.REFERENCE_TRACES[name]()):.4f}\n")
