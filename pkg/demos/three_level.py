"""Build a catalyst for a pair of three-level states that neither majorizes the other."""

import numpy as np

from catalytic import apply_protocol, build_classical_catalyst, majorizes
from catalytic.statekit import shannon_entropy

p = np.array([0.5, 0.5, 0.0])
p_prime = np.array([2 / 3, 1 / 6, 1 / 6])

print(f"p majorizes p': {majorizes(p, p_prime)}, p' majorizes p: {majorizes(p_prime, p)}")
print(f"entropy gap: {shannon_entropy(p_prime) - shannon_entropy(p):.6f} nats")

for n in (1, 2, 3, 4):
    cat, perm = build_classical_catalyst(p, p_prime, n=n)
    _, report = apply_protocol(p, cat, perm)
    print(
        f"n={n}: catalyst dim={cat.q.size:5d}  residual={report.catalyst_invariance_residual:.1e}"
        f"  distance={report.output_distance:.4f}  certified={report.epsilon_certified:.4f}"
        f"  I(S:C)={report.mutual_information:.4f}"
    )
