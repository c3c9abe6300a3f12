"""
Equilibrium measures on a grid
==============================

The macroscopic density of the gas is the equilibrium measure of the
confining potential.  For radial potentials it has a closed form; in general
it is the Laplacian of the solution of an obstacle problem.
"""

import numpy as np

from coulombgas import (DiscreteCharge, GridSpec, add_external_charges, euler_lagrange_residual, make_quadratic,
                        make_radial, solve_equilibrium_radial, solve_obstacle)

# V = |z|^2: uniform density 1/pi on the unit disk
quad = make_quadratic()
rad = solve_equilibrium_radial(quad)
print(f"radial:   R = {rad.R:.6f}, F = {rad.F:.6f}")

eq = solve_obstacle(quad, GridSpec((0.0, 0.0), 2.0, 128))
print(f"obstacle: R = {eq.support_radius():.6f}, F = {eq.F:.6f}, "
      f"PSOR sweeps = {eq.residuals['sweeps']}")

# V = |z|^4: density 4|z|^2/pi on the disk of radius 2^(-1/4)
quartic = solve_equilibrium_radial(make_radial([0.0, 1.0]))
print(f"quartic:  R = {quartic.R:.6f} (2^-1/4 = {2 ** -0.25:.6f}), "
      f"density at r=0.3: {quartic.density_radial(0.3):.6f} (4 r^2/pi = {4 * 0.09 / np.pi:.6f})")

###############################################################################
# A point charge outside the droplet breaks the symmetry.  Only the obstacle
# solver applies; the Euler-Lagrange residual shows U + V/2 is flat on the
# support and larger outside it.

pushed = add_external_charges(quad, [DiscreteCharge((1.6, 0.0), 1.0)], scale=0.5)
eq2 = solve_obstacle(pushed, GridSpec((0.0, 0.0), 2.0, 128))
el = euler_lagrange_residual(eq2, pushed)
x = eq2.grid.points()[..., 0]
centroid = np.sum(x * eq2.measure.cell_mass)
print(f"charged:  mass = {eq2.measure.mass:.9f}, centroid x = {centroid:+.4f}")
print(f"          EL on support {el.on_support_max:.2e}, off-support min slack {el.off_support_min:+.2e}")
