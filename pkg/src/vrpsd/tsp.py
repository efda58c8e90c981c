"""Planned-route construction: nearest neighbor + 2-opt, exact DP option."""

import itertools

import numpy as np


def nearest_neighbor(inst, customers=None):
    """Greedy tour over the customers starting from the depot."""
    todo = set(customers if customers is not None else inst.customers())
    seq = []
    cur = 0
    while todo:
        nxt = min(todo, key=lambda j: (inst.cost[cur, j], j))
        seq.append(nxt)
        todo.remove(nxt)
        cur = nxt
    return tuple(seq)


def two_opt(inst, seq):
    """First-improvement 2-opt on the closed tour depot -> seq -> depot."""
    tour = [0] + list(seq) + [0]
    c = inst.cost
    improved = True
    while improved:
        improved = False
        for i in range(len(tour) - 3):
            for k in range(i + 2, len(tour) - 1):
                a, b = tour[i], tour[i + 1]
                d, e = tour[k], tour[k + 1]
                delta = (c[a, d] + c[b, e]) - (c[a, b] + c[d, e])
                if delta < -1e-9:
                    tour[i + 1:k + 1] = tour[i + 1:k + 1][::-1]
                    improved = True
    return tuple(tour[1:-1])


def held_karp(inst, customers=None):
    """Exact TSP over the depot and up to 15 customers (bitmask DP)."""
    nodes = list(customers if customers is not None else inst.customers())
    n = len(nodes)
    if n > 15:
        raise ValueError(f"exact tour limited to 15 customers, got {n}")
    if n == 1:
        return (nodes[0],)
    c = inst.cost
    full = (1 << n) - 1
    dp = np.full((1 << n, n), np.inf)
    parent = np.full((1 << n, n), -1, dtype=np.int64)
    for j in range(n):
        dp[1 << j, j] = c[0, nodes[j]]
    for mask in range(1, full + 1):
        for j in range(n):
            if not mask & (1 << j) or not np.isfinite(dp[mask, j]):
                continue
            base = dp[mask, j]
            for k in range(n):
                if mask & (1 << k):
                    continue
                nm = mask | (1 << k)
                cand = base + c[nodes[j], nodes[k]]
                if cand < dp[nm, k]:
                    dp[nm, k] = cand
                    parent[nm, k] = j
    best_j = int(np.argmin(dp[full] + np.array([c[nodes[j], 0] for j in range(n)])))
    seq = []
    mask, j = full, best_j
    while j >= 0:
        seq.append(nodes[j])
        pj = parent[mask, j]
        mask ^= 1 << j
        j = pj
    return tuple(reversed(seq))


def tour_length(inst, seq):
    tour = [0] + list(seq) + [0]
    return float(sum(inst.cost[a, b] for a, b in itertools.pairwise(tour)))


def build_route(inst, method="nn2opt", customers=None):
    """Planned route spanning the customers: 'nn2opt' (default) or 'exact'."""
    if method == "exact":
        return held_karp(inst, customers)
    if method == "nn2opt":
        return two_opt(inst, nearest_neighbor(inst, customers))
    raise ValueError(f"unknown route construction method {method!r}")
