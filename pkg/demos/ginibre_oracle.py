"""
The exactly solvable case as a sampler check
============================================

At beta = 1 and V = |z|^2 the squared radii satisfy ``N |z_k|^2 ~ Gamma(k)``,
independently.  Counts in centred disks therefore have an exact law, which
we compare with a Metropolis chain.
"""

import numpy as np

from coulombgas import (ChainConfig, GasParams, batch_means_se, count_in_disk, ginibre_radii_sample,
                        kostlan_count_distribution, make_quadratic, run_chain, solve_equilibrium_radial)

N, r = 32, 0.5
V = make_quadratic()
eq = solve_equilibrium_radial(V)

law = kostlan_count_distribution(N, r)
k = np.arange(law.size)
mean, var = law @ k, law @ k**2 - (law @ k) ** 2
print(f"exact count in B(0, {r}): mean {mean:.4f}, variance {var:.4f} (a Poisson count would have variance {mean:.4f})")

radii = ginibre_radii_sample(N, seed := 1, size=20000)
c = np.sum(radii <= r, axis=1)
print(f"gamma sampler:  mean {c.mean():.4f}, variance {c.var():.4f}")

batch = run_chain(GasParams(N, 1.0, V), ChainConfig(steps=30000, burn_in=1000, thinning=5, seed=seed),
                  equilibrium=eq)
counts = count_in_disk(batch.configs, (0.0, 0.0), r)
print(f"Metropolis:     mean {counts.mean():.4f} +- {batch_means_se(counts.astype(float)):.4f}, "
      f"variance {counts.var():.4f}, acceptance {batch.acceptance_rate:.2f}")
