"""Output error of the classical and quantum constructions as the copy number grows."""

import numpy as np

from catalytic import apply_protocol, build_classical_catalyst
from catalytic.quantum import apply_quantum_protocol, build_quantum_catalyst
from catalytic.statekit import random_unitary

p, p_prime = [0.9, 0.1], [0.7, 0.3]
print("classical (0.9, 0.1) -> (0.7, 0.3)")
for n in (2, 4, 6, 8):
    cat, perm = build_classical_catalyst(p, p_prime, n=n)
    _, report = apply_protocol(p, cat, perm)
    print(f"  n={n}: distance={report.output_distance:.3e}  residual={report.catalyst_invariance_residual:.1e}")

u, v = random_unitary(2, 1), random_unitary(2, 2)
rho = u @ np.diag([0.85, 0.15]) @ u.conj().T
rho_prime = v @ np.diag([0.6, 0.4]) @ v.conj().T
print("quantum, rotated eigenbases")
for n in (2, 3, 4):
    cat = build_quantum_catalyst(rho, rho_prime, n=n)
    _, report = apply_quantum_protocol(rho, cat)
    print(f"  n={n}: distance={report.output_distance:.3e}  residual={report.catalyst_invariance_residual:.1e}")
