"""
Reference degree distributions and equal-mass groups
=====================================================

"""

import numpy as np

from sicampaign import named_network, partition_equal_mass
from sicampaign.degree_model import derive_neighbor_distributions, group_mean_degrees

# three reference networks: a Poisson one and two power laws
for name in ("ER", "PL3", "PL2"):
    dist = named_network(name)
    part = partition_equal_mass(dist, 3)
    ranges = [f"{part.group_degrees(m)[0]}..{part.group_degrees(m)[-1]}" for m in range(3)]
    print(f"{name}: degrees {dist.k_min}..{dist.k_max}, mean {dist.mean_degree:.2f}")
    print("  groups", ranges, "masses", np.round(part.masses, 3))
    print("  group mean degrees", np.round(group_mean_degrees(dist, part), 2))

# an edge endpoint lands on a high-degree node more often than a random node does
nb = derive_neighbor_distributions(named_network("PL2"))
print("PL2: P(degree >= 50) for a node %.3f, for a neighbor %.3f"
      % (named_network("PL2").pmf[nb.degrees >= 50].sum(), nb.r[nb.degrees >= 50].sum()))
