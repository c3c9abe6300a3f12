"""
Loop equation residuals
=======================

Integrating by parts against the Gibbs density gives, for any smooth h,

    E[ sum_{j<k} (h(z_j) - h(z_k)) / (z_j - z_k) + beta^-1 sum dh(z_j) - N sum h(z_j) dV(z_j) ] = 0.

Each bracket is estimated from a chain with batch-means error bars.  For
h(z) = z and V = |z|^2 the identity fixes E sum |z_j|^2 = (N - 1)/2 + 1/beta.
"""

import numpy as np

from coulombgas import (ChainConfig, GasParams, TestFunction, build_h, constant_field, identity_field,
                        loop_residual, make_quadratic, run_chain, solve_equilibrium_radial)

V = make_quadratic()
eq = solve_equilibrium_radial(V)
fields = [constant_field(1.0), identity_field(), build_h(TestFunction((0.2, 0.1), 0.8), V)]

for beta in (0.5, 2.0):
    batch = run_chain(GasParams(16, beta, V),
                      ChainConfig(steps=30000, burn_in=1000, thinning=5, seed=2, algorithm="gradient"),
                      equilibrium=eq)
    for h in fields:
        rep = loop_residual(batch, h)
        print(f"beta={beta:<4} h={h.label:<18} residual {rep.estimate:.3f}  |res|/se {rep.z_score:.2f}")
    s = np.sum(batch.configs**2, axis=(1, 2))
    print(f"           E sum|z|^2 = {s.mean():.3f}, predicted {(16 - 1) / 2 + 1 / beta:.3f}")
