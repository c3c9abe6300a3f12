"""Two-dimensional Coulomb gas (one-component plasma) toolkit.

Equilibrium measures of logarithmic energy problems, Monte Carlo sampling of
the Gibbs measure ``exp(-beta H)`` and observables probing local density,
rigidity and the loop equation.
"""

from .equilibrium import (BoxTooSmallError, EquilibriumResult, NonConvergenceError,
                          PreconditionError, RadialEquilibrium, energy_functional,
                          euler_lagrange_residual, perturb_equilibrium,
                          perturbation_energy_identity, restriction_potential, solve_equilibrium_radial,
                          solve_obstacle)
from .grid import GridField, GridMeasure, GridSpec, log_potential_of_measure
from .kernel import CoincidentPointsError, log_kernel, smoothed_log, smoothed_log_derivatives
from .observables import (batch_means_se, build_h, constant_field, count_in_disk, equilibrium_mass_in_disk,
                          identity_field, kostlan_count_distribution, kostlan_mean_count, kv_identity_check,
                          linear_statistic, local_law_report, loop_residual, rigidity_scan)
from .potential import (DiscreteCharge, Disk, Potential, add_external_charges, check_growth,
                        exclude_disk, make_quadratic, make_radial, restrict_hard_wall)
from .rng import stream
from .sampler import (ChainConfig, GasParams, SampleBatch, conditional_potential,
                      energy_decomposition_check, energy_delta_move, ginibre_radii_sample,
                      grad_energy, iid_null_sample, read_batch, run_chain, total_energy, write_batch)
from .testfunctions import TestFunction, make_bump

__version__ = "0.1.0"
