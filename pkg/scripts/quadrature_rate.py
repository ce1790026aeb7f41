"""Quadrature discrepancy against the dense fractional inverse as k shrinks."""
import math

import numpy as np

from sincfem.experiments import fit_rate
from sincfem.fem import assemble, build_mesh
from sincfem.quadrature import build_grid, quadrature_discrepancy

ks = np.array([0.5, 0.45, 0.4, 0.35, 0.3, 0.25, 0.2])
fem = assemble(build_mesh(1, 32), 0.5)
for beta in (0.25, 0.5, 0.75):
    d = np.array([quadrature_discrepancy(fem, beta, k) for k in ks])
    fit = fit_rate(list(zip(ks, d)), against="inverse")
    C = d * np.exp(math.pi ** 2 / (2 * ks))
    print(f"beta={beta}: slope {fit.rate:.3f} (-pi^2/2 = {-math.pi ** 2 / 2:.3f}), "
          f"C in [{C.min():.3g}, {C.max():.3g}]")
    for k, v in zip(ks, d):
        print(f"    k={k:.2f} nodes={build_grid(beta, k).node_count:4d} discrepancy={v:.3e}")
