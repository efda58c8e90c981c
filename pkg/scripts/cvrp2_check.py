"""Exact 2-route CVRP optimum by split enumeration + Held-Karp per side.

Verification tool for the Q=160 two-truck instances: enumerates all customer
bipartitions within capacity and prices each side with an exact TSP DP.
"""
import sys
from pathlib import Path

import numpy as np
from numba import njit

sys.path.insert(0, str(Path(__file__).parent))


@njit(cache=True)
def held_karp_nb(d, nodes):
    """Exact open-ended tour cost depot -> nodes -> depot; d is full matrix."""
    n = len(nodes)
    full = (1 << n) - 1
    INF = 1e18
    dp = np.full((full + 1, n), INF)
    for j in range(n):
        dp[1 << j, j] = d[0, nodes[j]]
    for mask in range(1, full + 1):
        for j in range(n):
            if not (mask >> j) & 1:
                continue
            cur = dp[mask, j]
            if cur >= INF:
                continue
            for k in range(n):
                if (mask >> k) & 1:
                    continue
                nm = mask | (1 << k)
                cand = cur + d[nodes[j], nodes[k]]
                if cand < dp[nm, k]:
                    dp[nm, k] = cand
    best = INF
    for j in range(n):
        v = dp[full, j] + d[nodes[j], 0]
        if v < best:
            best = v
    return best


def two_route_optimum(inst, progress=False):
    """(optimal cost, split) over bipartitions within capacity Q per route."""
    custs = list(inst.customers())
    dem = np.array([inst.mean_demand[i] for i in custs])
    total = dem.sum()
    Q = inst.Q
    lo, hi = total - Q, Q
    if lo > hi:
        return None, None
    d = inst.cost

    splits = []

    def rec(k, chosen, s):
        if s > hi + 1e-9:
            return
        rest = dem[k:].sum()
        if s + rest < lo - 1e-9:
            return
        if k == len(custs):
            if lo - 1e-9 <= s <= hi + 1e-9:
                splits.append(tuple(chosen))
            return
        # canonical: customer 0 always on side A
        rec(k + 1, chosen + [k], s + dem[k])
        if k > 0:
            rec(k + 1, chosen, s)

    rec(0, [], 0.0)
    best, arg = np.inf, None
    for idx, side in enumerate(splits):
        a = np.array([custs[k] for k in side], dtype=np.int64)
        b = np.array([custs[k] for k in range(len(custs)) if k not in set(side)],
                     dtype=np.int64)
        cost = held_karp_nb(d, a) + held_karp_nb(d, b)
        if cost < best:
            best, arg = cost, (tuple(a.tolist()), tuple(b.tolist()))
        if progress and idx % 500 == 0:
            print(f"  split {idx}/{len(splits)} best={best}", flush=True)
    return best, arg
