"""Exact expected-cost evaluation of planned routes under recourse policies.

Three policies are supported, executed on a fixed planned customer sequence:

* ``dtd``    -- detour-to-depot: replenish only on failure.
* ``or``     -- optimal restocking: preventive replenishment with optimal
                thresholds, visiting order fixed.
* ``switch`` -- optimal restocking plus the option of swapping two adjacent
                planned customers during execution.

Evaluation is a backward dynamic program over states (h, n, q): h customers
served, n the last customer served, q the remaining load.  Costs are exact
expectations over the truncated demand pmfs.  Every evaluator also returns
the optimal decision table, which drives the Monte Carlo simulator.
"""

import json
from dataclasses import dataclass, field

import numpy as np

POLICIES = ("dtd", "or", "switch")

# per-state action codes: visit the mandated next customer or skip ahead one
# planned position, either directly or after replenishing at the depot
NEXT_DIRECT, NEXT_RESTOCK, SKIP_DIRECT, SKIP_RESTOCK = 0, 1, 2, 3
ACTION_NAMES = {
    NEXT_DIRECT: "next-direct",
    NEXT_RESTOCK: "next-restock",
    SKIP_DIRECT: "skip-direct",
    SKIP_RESTOCK: "skip-restock",
}
ACTION_CODES = {v: k for k, v in ACTION_NAMES.items()}


def gamma_trips(d, q, Q):
    """Return trips to the depot needed to serve demand d with load q."""
    if d <= q:
        return 0
    return -((q - d) // Q)


def phi_direct(inst, i, j, q, nu, penalty=0.0):
    """Expected cost of visiting j directly from i with remaining load q,
    given cost-to-go nu(.) once j is served."""
    nu = np.asarray(nu, dtype=float)
    Q = inst.Q
    ret = inst.cost[j, 0] + inst.cost[0, j]
    total = inst.cost[i, j]
    dist = inst.demands[j]
    for d in dist.support():
        g = gamma_trips(int(d), q, Q)
        idx = q + Q * g - int(d)
        if not 0 <= idx <= Q:
            raise RuntimeError(f"load index {idx} out of range (pmf/Q inconsistency)")
        total += dist.pmf[d] * (g * (ret + penalty) + nu[idx])
    return float(total)


def phi_restock(inst, i, j, nu, penalty=0.0):
    """Expected cost of visiting j from i after replenishing at the depot."""
    nu = np.asarray(nu, dtype=float)
    base = inst.cost[i, 0] + inst.cost[0, j] - inst.cost[i, j]
    return float(base + phi_direct(inst, i, j, inst.Q, nu, penalty))


def phi_star(inst, i, j, q, nu, penalty=0.0):
    """Cheaper of direct visit and visit-after-replenishment; ties go direct."""
    direct = phi_direct(inst, i, j, q, nu, penalty)
    restock = phi_restock(inst, i, j, nu, penalty)
    if restock < direct:
        return restock, "restock"
    return direct, "direct"


# ---------------------------------------------------------------------------
# decision tables
# ---------------------------------------------------------------------------

@dataclass
class DecisionTable:
    """Optimal action for every reachable state of a route evaluation.

    ``actions[(h, n)]`` holds one action code per load q in {0, ..., Q};
    ``initial`` is the customer visited first (the second planned customer
    when the switch policy swaps the first two).
    """

    policy: str
    route: tuple
    initial: int
    actions: dict = field(default_factory=dict)

    def target_of(self, h, n, code):
        """Customer visited by `code` from state (h, n); h is 1-based."""
        route = self.route
        if code in (SKIP_DIRECT, SKIP_RESTOCK):
            return route[h + 1]
        if h < len(route) and n == route[h]:
            return route[h - 1]  # n = s_{h+1}: the swapped-over customer is due
        return route[h]

    def action(self, h, n, q):
        """(target customer, restock?) prescribed at state (h, n, q)."""
        code = int(self.actions[(h, n)][q])
        return self.target_of(h, n, code), code in (NEXT_RESTOCK, SKIP_RESTOCK)

    def to_json(self):
        states = {
            f"{h},{n}": [ACTION_NAMES[int(a)] for a in arr]
            for (h, n), arr in sorted(self.actions.items())
        }
        return json.dumps(
            {
                "policy": self.policy,
                "route": list(self.route),
                "initial": self.initial,
                "actions": states,
            },
            indent=1,
        )

    @classmethod
    def from_json(cls, text):
        obj = json.loads(text)
        actions = {}
        for key, names in obj["actions"].items():
            h, n = (int(x) for x in key.split(","))
            actions[(h, n)] = np.array([ACTION_CODES[a] for a in names], dtype=np.int8)
        return cls(
            policy=obj["policy"],
            route=tuple(obj["route"]),
            initial=obj["initial"],
            actions=actions,
        )


# ---------------------------------------------------------------------------
# vectorized evaluator
# ---------------------------------------------------------------------------

class Evaluator:
    """Vectorized policy evaluation over one instance.

    Caches, per customer, the load-transition index table used to take
    expectations over the demand pmf, so that one service expectation is a
    single gather plus a matrix-vector product.
    """

    def __init__(self, inst, penalty=0.0):
        self.inst = inst
        self.penalty = float(penalty)
        self.Q = inst.Q
        self.cost = inst.cost
        self._kernels = {}

    def _kernel(self, j):
        """(support values, probs, index table, gamma-mean) for customer j."""
        k = self._kernels.get(j)
        if k is None:
            Q = self.Q
            dist = self.inst.demands[j]
            dv = dist.support().astype(np.int64)
            pv = dist.pmf[dv]
            qs = np.arange(Q + 1, dtype=np.int64)[:, None]
            gam = np.maximum(0, -((qs - dv[None, :]) // Q))
            idx = qs + Q * gam - dv[None, :]
            gbar = gam @ pv
            retpen = self.cost[j, 0] + self.cost[0, j] + self.penalty
            k = (dv, pv, idx, gbar, retpen)
            self._kernels[j] = k
        return k

    def service_expectation(self, j, nu):
        """E over D_j of [Gamma * (return trip + penalty) + nu(next load)],
        as an array over the pre-visit load q."""
        _, pv, idx, gbar, retpen = self._kernel(j)
        return nu[idx] @ pv + retpen * gbar

    def service_expectation_at(self, j, nu, q):
        _, pv, idx, gbar, retpen = self._kernel(j)
        return float(nu[idx[q]] @ pv + retpen * gbar[q])

    def _phi_branch(self, origins, j, sv, restock_code, direct_code):
        """phi* arrays and action codes for each origin, shared target j."""
        restock = self.cost[origins, 0][:, None] + self.cost[0, j] + sv[None, -1]
        direct = self.cost[origins, j][:, None] + sv[None, :]
        val = np.minimum(direct, restock)
        act = np.where(restock < direct, restock_code, direct_code).astype(np.int8)
        return val, act

    # -- switch policy -------------------------------------------------

    def eval_switch(self, route):
        route = tuple(route)
        _check_route(self.inst, route)
        H = len(route)
        Q = self.Q
        c = self.cost

        prev = {}
        for n in ({route[H - 2], route[H - 1]} if H > 1 else {route[H - 1]}):
            prev[n] = np.full(Q + 1, c[n, 0], dtype=float)
        actions = {}

        for h in range(H - 1, 0, -1):
            s_next, s_cur = route[h], route[h - 1]
            sv_next = self.service_expectation(s_next, prev[s_next])
            sv_back = self.service_expectation(s_cur, prev[s_cur])
            has_skip = h + 2 <= H
            if has_skip:
                s_skip = route[h + 1]
                sv_skip = self.service_expectation(s_skip, prev[s_skip])

            legal = [s_cur] + ([route[h - 2]] if h > 1 else []) + [s_next]
            cur, acts = {}, {}
            for n in legal:
                if n == s_next:
                    # s_h and s_{h+1} switched: s_h must be visited now
                    val, act = self._phi_branch(
                        np.array([n]), s_cur, sv_back, NEXT_RESTOCK, NEXT_DIRECT
                    )
                    cur[n], acts[(h, n)] = val[0], act[0]
                    continue
                v1, a1 = self._phi_branch(
                    np.array([n]), s_next, sv_next, NEXT_RESTOCK, NEXT_DIRECT
                )
                v1, a1 = v1[0], a1[0]
                if has_skip:
                    v2, a2 = self._phi_branch(
                        np.array([n]), s_skip, sv_skip, SKIP_RESTOCK, SKIP_DIRECT
                    )
                    v2, a2 = v2[0], a2[0]
                    take2 = v2 < v1
                    cur[n] = np.where(take2, v2, v1)
                    acts[(h, n)] = np.where(take2, a2, a1).astype(np.int8)
                else:
                    cur[n], acts[(h, n)] = v1, a1
            prev = cur
            actions.update(acts)

        cost1 = c[0, route[0]] + self.service_expectation_at(route[0], prev[route[0]], Q)
        initial = route[0]
        total = cost1
        if H >= 2:
            cost2 = c[0, route[1]] + self.service_expectation_at(route[1], prev[route[1]], Q)
            if cost2 < cost1:
                total, initial = cost2, route[1]
        return total, DecisionTable("switch", route, initial, actions)

    # -- fixed-order policies -------------------------------------------

    def _eval_fixed_order(self, route, allow_restock):
        route = tuple(route)
        _check_route(self.inst, route)
        H = len(route)
        c = self.cost
        nu = np.full(self.Q + 1, c[route[H - 1], 0], dtype=float)
        actions = {}
        for h in range(H - 1, 0, -1):
            s_cur, s_next = route[h - 1], route[h]
            sv = self.service_expectation(s_next, nu)
            direct = c[s_cur, s_next] + sv
            if allow_restock:
                restock = c[s_cur, 0] + c[0, s_next] + sv[-1]
                nu = np.minimum(direct, restock)
                actions[(h, s_cur)] = np.where(
                    restock < direct, NEXT_RESTOCK, NEXT_DIRECT
                ).astype(np.int8)
            else:
                nu = direct
                actions[(h, s_cur)] = np.zeros(self.Q + 1, dtype=np.int8)
        total = c[0, route[0]] + self.service_expectation_at(route[0], nu, self.Q)
        policy = "or" if allow_restock else "dtd"
        return total, DecisionTable(policy, route, route[0], actions)

    def eval_optimal_restocking(self, route):
        return self._eval_fixed_order(route, allow_restock=True)

    def eval_detour_to_depot(self, route):
        return self._eval_fixed_order(route, allow_restock=False)

    def evaluate(self, route, policy):
        if policy == "switch":
            return self.eval_switch(route)
        if policy == "or":
            return self.eval_optimal_restocking(route)
        if policy == "dtd":
            return self.eval_detour_to_depot(route)
        raise ValueError(f"unknown policy {policy!r}")

    def best_orientation(self, route, policy):
        """Evaluate both directions, return (oriented route, cost, table);
        ties keep the given orientation."""
        route = tuple(route)
        fwd, tf = self.evaluate(route, policy)
        if len(route) == 1:
            return route, fwd, tf
        rev, tr = self.evaluate(route[::-1], policy)
        if rev < fwd:
            return route[::-1], rev, tr
        return route, fwd, tf

    # -- expected failures ----------------------------------------------

    def expected_failures(self, table):
        """Expected number of return trips when following the cost-optimal
        decision table (decisions are not re-optimized for failures)."""
        route = table.route
        H = len(route)
        Q = self.Q
        mu = {
            n: np.zeros(Q + 1)
            for n in ({route[H - 2], route[H - 1]} if H > 1 else {route[H - 1]})
        }
        for h in range(H - 1, 0, -1):
            cur = {}
            for (hh, n), codes in table.actions.items():
                if hh != h:
                    continue
                val = np.empty(Q + 1)
                for code in np.unique(codes):
                    t = table.target_of(h, n, int(code))
                    _, pv, idx, gbar, _ = self._kernel(t)
                    mask = codes == code
                    if code in (NEXT_RESTOCK, SKIP_RESTOCK):
                        val[mask] = gbar[Q] + mu[t][idx[Q]] @ pv
                    else:
                        qs = np.nonzero(mask)[0]
                        val[qs] = gbar[qs] + mu[t][idx[qs]] @ pv
                cur[n] = val
            mu = cur
        t0 = table.initial
        _, pv, idx, gbar, _ = self._kernel(t0)
        if H == 1:
            return float(gbar[Q])
        return float(gbar[Q] + mu[t0][idx[Q]] @ pv)


def _check_route(inst, route):
    if len(route) == 0:
        raise ValueError("empty route")
    if len(set(route)) != len(route):
        raise ValueError("route repeats a customer")
    if any(i < 1 or i >= inst.n_nodes for i in route):
        raise ValueError("route contains an invalid customer id")


# ---------------------------------------------------------------------------
# module-level conveniences (evaluator cached per instance and penalty)
# ---------------------------------------------------------------------------

def get_evaluator(inst, penalty=0.0):
    cache = getattr(inst, "_evaluator_cache", None)
    if cache is None:
        cache = {}
        inst._evaluator_cache = cache
    ev = cache.get(penalty)
    if ev is None:
        ev = Evaluator(inst, penalty)
        cache[penalty] = ev
    return ev


def eval_switch(inst, route, penalty=0.0):
    return get_evaluator(inst, penalty).eval_switch(route)


def eval_optimal_restocking(inst, route, penalty=0.0):
    return get_evaluator(inst, penalty).eval_optimal_restocking(route)


def eval_detour_to_depot(inst, route, penalty=0.0):
    return get_evaluator(inst, penalty).eval_detour_to_depot(route)


def evaluate(inst, route, policy, penalty=0.0):
    return get_evaluator(inst, penalty).evaluate(route, policy)


def best_orientation(inst, route, policy, penalty=0.0):
    return get_evaluator(inst, penalty).best_orientation(route, policy)


def expected_failures(inst, table, penalty=0.0):
    return get_evaluator(inst, penalty).expected_failures(table)
