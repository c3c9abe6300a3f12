"""
Rigidity of linear statistics
=============================

For a fixed smooth f, the variance of ``X_f = sum f(z_j) - N int f dmu_V``
stays bounded for the gas while it grows linearly in N for independent
points drawn from the same density.
"""

from coulombgas import (ChainConfig, GasParams, TestFunction, make_quadratic, rigidity_scan, run_chain,
                        solve_equilibrium_radial)

V = make_quadratic()
eq = solve_equilibrium_radial(V)
f = TestFunction((0.0, 0.0), 1.0)

batches = [run_chain(GasParams(N, 1.0, V), ChainConfig(steps=20000, burn_in=1000, thinning=5, seed=3),
                     equilibrium=eq, path=f"chain/{N}") for N in (16, 32, 64, 128)]
rep = rigidity_scan(batches, f, eq, null_draws=4000, seed=3)

print(f"{'N':>5} {'Var gas':>9} {'Var iid':>9}")
for row in rep.rows:
    print(f"{row['N']:>5} {row['gas_var']:9.4f} {row['null_var']:9.4f}")
print(f"log-log slopes: gas {rep.gas_slope:.3f}, independent points {rep.null_slope:.3f}")
