"""Work extractable from a qutrit by one catalytic transition."""

import numpy as np

from catalytic.thermo import Hamiltonian, ergotropy, work_report

h = Hamiltonian.diagonal([0.0, 1.0, 2.0])
rho = np.diag([0.5, 0.5, 0.0])
report = work_report(rho, h, samples=500, seed=0)
print(f"ergotropy:       {ergotropy(rho, h):.6f}")
print(f"catalytic work:  {report['catalytic_work']:.6f}")
print(f"passive: {report['passive']}, completely passive: {report['completely_passive']}")
print(f"largest sampled violation: {report['monte_carlo']['max_violation']:.1e}")
