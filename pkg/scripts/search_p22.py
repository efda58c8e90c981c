import sys, time
sys.path.insert(0, 'scripts')
import numpy as np
from eil51_base import EIL51_COORDS, EIL51_DEMANDS
from cvrp2_full import two_route_optimum_full
from vrpsd.instance import build_cost_matrix

MY21 = [2, 3, 4, 9, 10, 12, 17, 21, 22, 23, 27, 29, 30, 31, 32, 33, 35, 36, 37, 39, 47]
POOL = [i for i in range(2, 52) if i not in MY21]


def check(members, Q=160):
    coords = [EIL51_COORDS[0]] + [EIL51_COORDS[i - 1] for i in members]
    cost = build_cost_matrix(np.array(coords, float), "euc2d")
    dem = [EIL51_DEMANDS[i - 1] for i in members]
    if sum(dem) > 2 * Q:
        return None, None
    return two_route_optimum_full(cost, dem, Q)


if __name__ == "__main__":
    t0 = time.time()
    hits = []
    for x in MY21:
        for y in POOL:
            cand = sorted([m for m in MY21 if m != x] + [y])
            v, _ = check(cand)
            if v == 216.0:
                hits.append((x, y, v))
                print(f"HIT: -{x} +{y} -> 216   t={time.time()-t0:.0f}s", flush=True)
    print("done", time.time() - t0, "s; hits:", hits)
