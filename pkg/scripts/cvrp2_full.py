"""Exact 2-route CVRP via one full Held-Karp table over all customer subsets."""

import numpy as np
from numba import njit


@njit(cache=True)
def _full_table(d, n):
    """dp[mask, j] = cheapest depot-start path visiting mask, ending at j."""
    INF = np.float32(1e18)
    dp = np.full((1 << n, n), INF, dtype=np.float32)
    for j in range(n):
        dp[1 << j, j] = d[0, j + 1]
    for mask in range(1, 1 << n):
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
                cand = cur + d[j + 1, k + 1]
                if cand < dp[nm, k]:
                    dp[nm, k] = cand
    return dp


@njit(cache=True)
def _closed_costs(dp, d, n):
    out = np.full(1 << n, np.float32(1e18), dtype=np.float32)
    for mask in range(1, 1 << n):
        best = np.float32(1e18)
        for j in range(n):
            if (mask >> j) & 1:
                v = dp[mask, j] + d[j + 1, 0]
                if v < best:
                    best = v
        out[mask] = best
    return out


@njit(cache=True)
def _best_split(closed, dem_mask_ok, n):
    full = (1 << n) - 1
    best = np.float32(1e18)
    arg = -1
    for mask in range(1, full):
        if not (mask & 1):
            continue  # canonical: customer 1 on side A
        if not dem_mask_ok[mask] or not dem_mask_ok[full ^ mask]:
            continue
        v = closed[mask] + closed[full ^ mask]
        if v < best:
            best = v
            arg = mask
    return best, arg


@njit(cache=True)
def _demand_ok(dem, Q, n):
    ok = np.zeros(1 << n, dtype=np.bool_)
    tot = np.zeros(1 << n, dtype=np.float64)
    ok[0] = True
    for mask in range(1, 1 << n):
        low = mask & (-mask)
        j = 0
        while not (low >> j) & 1:
            j += 1
        tot[mask] = tot[mask ^ low] + dem[j]
        ok[mask] = tot[mask] <= Q + 1e-9
    return ok


def two_route_optimum_full(cost, demands, Q):
    """cost: (n+1)x(n+1) with depot row/col 0; demands: per customer 1..n."""
    n = len(demands)
    d = cost.astype(np.float32)
    dp = _full_table(d, n)
    closed = _closed_costs(dp, d, n)
    ok = _demand_ok(np.asarray(demands, np.float64), float(Q), n)
    best, arg = _best_split(closed, ok, n)
    if arg < 0:
        return None, None
    side_a = tuple(j + 1 for j in range(n) if (arg >> j) & 1)
    side_b = tuple(j + 1 for j in range(n) if not (arg >> j) & 1)
    return float(best), (side_a, side_b)
