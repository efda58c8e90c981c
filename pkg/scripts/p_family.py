"""Candidate reconstructions of the small Q=160 P-series instances.

Each instance's customers are a subset of the 51-node Eilon set, indexed by
their position (1-based customer index) in that base instance.
"""
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))
from eil51_base import EIL51_COORDS, EIL51_DEMANDS

import numpy as np

from vrpsd.instance import DemandDistribution, Instance, build_cost_matrix


# eil51 customer ids (1..50) in file order for the 21-customer Q=160 instance
P22_MEMBERS = [2, 3, 4, 9, 10, 12, 17, 21, 22, 23, 27, 29, 30, 31, 32, 33,
               35, 36, 37, 39, 47]


def subset_instance(members, name, Q=160, K=2, f=1.0, demand_override=None):
    coords = [EIL51_COORDS[0]] + [EIL51_COORDS[i - 1] for i in members]
    demands = [None]
    for i in members:
        d = demand_override.get(i) if demand_override else None
        d = d if d is not None else EIL51_DEMANDS[i - 1]
        pmf = np.zeros(d + 1)
        pmf[d] = 1.0
        demands.append(DemandDistribution("degenerate", d, pmf))
    xy = np.array(coords, float)
    return Instance(name, xy, build_cost_matrix(xy, "euc2d"), demands,
                    K=K, Q=Q, f=f, cost_rounding="euc2d")
