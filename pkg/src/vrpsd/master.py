"""Restricted master problem: set-partitioning LP over generated columns.

Rows are a fleet bound, one partition row per customer, and two cut families:
strengthened capacity cuts (one vehicle-crossing requirement per customer set)
and subset-row cuts over customer triplets.  Columns are planned routes priced
under the switch policy; artificial high-cost columns keep every node's LP
feasible.  Column generation alternates with cut separation until the LP is
priced out, which certifies the node lower bound.
"""

import itertools
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .lp import INFEASIBLE, OPTIMAL, LpProblem, solve_lp
from .policy import eval_switch
from .pricing import ArcFixings, DualValues, Pricer, PricingConfig

EPS = 1e-6


@dataclass(frozen=True)
class Column:
    route: tuple
    cost: float
    members: frozenset

    @classmethod
    def make(cls, inst, route, cost=None):
        route = tuple(route)
        if cost is None:
            cost, _ = eval_switch(inst, route)
        return cls(route=route, cost=float(cost), members=frozenset(route))


@dataclass(frozen=True)
class Cut:
    kind: str          # "scc" (>= rhs) or "src" (<= 1)
    S: frozenset
    rhs: float

    def coefficient(self, members):
        if self.kind == "scc":
            return 1.0 if self.S & members else 0.0
        return float(len(self.S & members) // 2)


def scc_cut(inst, S):
    S = frozenset(S)
    rhs = math.ceil(sum(inst.mean_demand[i] for i in S) / inst.fq - 1e-9)
    return Cut("scc", S, float(rhs))


def src_cut(S):
    S = frozenset(S)
    if len(S) != 3:
        raise ValueError("subset-row cuts are defined over triplets")
    return Cut("src", S, 1.0)


@dataclass
class MasterConfig:
    lp_backend: str = "bundled"
    pricing: PricingConfig = field(default_factory=PricingConfig)
    scc_rounds: int = 50
    src_rounds: int = 50
    cuts_per_round: int = 20
    tail_eps: float = 1e-4
    tail_rounds: int = 3
    big_m: float | None = None


@dataclass
class RmpSolution:
    objective: float
    lam: np.ndarray          # over the column subset used
    duals: DualValues
    artificial_level: float
    basis: tuple | None


@dataclass
class NodeResult:
    status: str              # "ok" | "infeasible" | "lb-unavailable"
    lb: float | None
    columns: list            # Column objects active at the node
    lam: np.ndarray | None
    duals: DualValues | None
    overflow: bool = False
    pricing_rounds: int = 0
    labels: int = 0


class Master:
    """Column/cut pools shared across the branch-and-bound tree."""

    def __init__(self, inst, config=None):
        self.inst = inst
        self.cfg = config or MasterConfig()
        self.pool = {}            # route -> Column
        self.cuts = []            # list of Cut
        self._cut_keys = set()
        self.big_m = self.cfg.big_m or 10.0 * float(inst.cost.sum())
        self.stats = {"labels": 0, "pricing_rounds": 0, "lp_solves": 0}
        for j in inst.customers():
            self.add_column(Column.make(inst, (j,)))

    # -- pools -----------------------------------------------------------

    def add_column(self, col):
        if col.route not in self.pool:
            self.pool[col.route] = col
            return True
        return False

    def add_cut(self, cut):
        key = (cut.kind, cut.S)
        if key in self._cut_keys:
            return False
        self._cut_keys.add(key)
        self.cuts.append(cut)
        return True

    def columns_for(self, fixings):
        cols = [c for c in self.pool.values() if fixings.route_compatible(c.route)]
        cols.sort(key=lambda c: c.route)
        return cols

    # -- LP assembly -------------------------------------------------------

    def build_lp(self, columns, fleet_max=None, fleet_min=None, with_cuts=True):
        inst = self.inst
        n = inst.n_customers
        cuts = self.cuts if with_cuts else []
        has_min = fleet_min is not None and fleet_min > 0
        n_rows = 1 + n + (1 if has_min else 0) + len(cuts)
        senses = ["<"] + ["="] * n + ([">"] if has_min else []) + [
            ">" if c.kind == "scc" else "<" for c in cuts
        ]
        rhs = np.concatenate([
            [min(inst.K, fleet_max) if fleet_max is not None else inst.K],
            np.ones(n),
            [fleet_min] if has_min else [],
            [c.rhs for c in cuts],
        ])
        prob = LpProblem(n_rows=n_rows, senses=senses, rhs=rhs)
        cut_base = 1 + n + (1 if has_min else 0)
        for col in columns:
            rows = [0] + [i for i in col.route] + ([1 + n] if has_min else [])
            coefs = [1.0] * len(rows)
            for k, cut in enumerate(cuts):
                v = cut.coefficient(col.members)
                if v:
                    rows.append(cut_base + k)
                    coefs.append(v)
            prob.add_column(col.cost, rows, coefs)
        # artificial per customer: keeps partition and crossing rows feasible
        for i in inst.customers():
            rows = [i]
            coefs = [1.0]
            for k, cut in enumerate(cuts):
                if cut.kind == "scc" and i in cut.S:
                    rows.append(cut_base + k)
                    coefs.append(1.0)
            prob.add_column(self.big_m, rows, coefs)
        return prob, cut_base, has_min

    def solve_rmp(self, columns, fleet_max=None, fleet_min=None, warm=None,
                  with_cuts=True):
        prob, cut_base, has_min = self.build_lp(columns, fleet_max, fleet_min,
                                                with_cuts)
        sol = solve_lp(prob, warm_basis=warm, backend=self.cfg.lp_backend)
        self.stats["lp_solves"] += 1
        if sol.status != OPTIMAL:
            if sol.status == INFEASIBLE:
                return None
            sol = solve_lp(prob, backend=self.cfg.lp_backend)  # cold retry
            if sol.status != OPTIMAL:
                raise RuntimeError(f"LP backend failure: {sol.status}")
        n = self.inst.n_customers
        y = sol.duals
        kappa = float(y[0]) + (float(y[1 + n]) if has_min else 0.0)
        alpha = np.zeros(n + 1)
        alpha[1:] = y[1:1 + n]
        cuts = self.cuts if with_cuts else []
        src, scc = [], []
        for k, cut in enumerate(cuts):
            d = float(y[cut_base + k])
            if cut.kind == "src":
                src.append((cut.S, min(d, 0.0)))
            else:
                scc.append((cut.S, max(d, 0.0)))
        lam = sol.x[: len(columns)]
        art = float(sol.x[len(columns):].sum())
        return RmpSolution(
            objective=float(sol.objective),
            lam=lam,
            duals=DualValues(kappa=kappa, alpha=alpha, src=src, scc=scc),
            artificial_level=art,
            basis=sol.basis,
        )

    # -- projections --------------------------------------------------------

    def arc_projection(self, columns, lam):
        """x[i, j] over planned arcs (depot arcs included)."""
        n = self.inst.n_nodes
        x = np.zeros((n, n))
        for col, l in zip(columns, lam):
            if l <= EPS:
                continue
            prev = 0
            for u in col.route:
                x[prev, u] += l
                prev = u
            x[prev, 0] += l
        return x

    # -- cut separation ------------------------------------------------------

    def separate_capacity_cuts(self, columns, lam):
        inst = self.inst
        active = [(c.members, float(l)) for c, l in zip(columns, lam) if l > EPS]

        def violation(S):
            if not S:
                return -np.inf
            rhs = math.ceil(sum(inst.mean_demand[i] for i in S) / inst.fq - 1e-9)
            lhs = sum(l for members, l in active if members & S)
            return rhs - lhs

        candidates = set()
        x = self.arc_projection(columns, lam)
        w = x[1:, 1:] + x[1:, 1:].T
        n = inst.n_customers
        for tau in np.arange(0.1, 0.95, 0.1):
            seen = set()
            for start in range(n):
                if start in seen:
                    continue
                comp, stack = set(), [start]
                while stack:
                    v = stack.pop()
                    if v in comp:
                        continue
                    comp.add(v)
                    seen.add(v)
                    stack.extend(u for u in range(n) if w[v, u] >= tau and u not in comp)
                if 1 < len(comp) < n:
                    candidates.add(frozenset(i + 1 for i in comp))
        if n <= 25:
            custs = list(inst.customers())
            for size in (2, 3, 4):
                for S in itertools.combinations(custs, size):
                    S = frozenset(S)
                    if violation(S) > EPS:
                        candidates.add(S)
        # greedy grow/shrink around each candidate
        improved = set()
        for S in candidates:
            cur, val = set(S), violation(S)
            for _ in range(2 * n):
                best_move, best_val = None, val
                for j in inst.customers():
                    trial = cur - {j} if j in cur else cur | {j}
                    if not trial or len(trial) == n:
                        continue
                    v = violation(frozenset(trial))
                    if v > best_val + 1e-12:
                        best_move, best_val = trial, v
                if best_move is None:
                    break
                cur, val = best_move, best_val
            if val > EPS:
                improved.add(frozenset(cur))
        violated = [(violation(S), S) for S in candidates | improved]
        violated = [(v, S) for v, S in violated if v > EPS]
        violated.sort(key=lambda t: (-t[0], sorted(t[1])))
        out = []
        for v, S in violated[: self.cfg.cuts_per_round]:
            cut = scc_cut(self.inst, S)
            if (cut.kind, cut.S) not in self._cut_keys:
                out.append(cut)
        return out

    def separate_src(self, columns, lam):
        inst = self.inst
        act = [(c.members, float(l)) for c, l in zip(columns, lam) if l > EPS]
        if not act:
            return []
        custs = list(inst.customers())
        Z = np.array([[1.0 if i in m else 0.0 for i in custs] for m, _ in act])
        lvec = np.array([l for _, l in act])
        viol = []
        for a in range(len(custs)):
            for b in range(a + 1, len(custs)):
                pair = Z[:, a] + Z[:, b]
                rest = (pair[:, None] + Z[:, b + 1:]) // 2
                vals = lvec @ rest
                for k, v in enumerate(vals):
                    if v > 1.0 + EPS:
                        viol.append((float(v - 1.0),
                                     frozenset({custs[a], custs[b], custs[b + 1 + k]})))
        viol.sort(key=lambda t: (-t[0], sorted(t[1])))
        out = []
        seen = set()
        for v, S in viol:
            if S in seen or ("src", S) in self._cut_keys:
                continue
            seen.add(S)
            out.append(src_cut(S))
            if len(out) >= self.cfg.cuts_per_round:
                break
        return out

    # -- column and row generation -------------------------------------------

    def column_and_row_generation(self, fixings=None, fleet_max=None,
                                  fleet_min=None, deadline=None, penalty=0.0):
        """Price and cut until the node LP is optimal; returns the node bound."""
        fixings = fixings or ArcFixings()
        columns = self.columns_for(fixings)
        known = {c.route for c in columns}
        warm = None
        scc_rounds = src_rounds = 0
        recent = []
        rounds = 0
        labels = 0

        while True:
            sol = self.solve_rmp(columns, fleet_max, fleet_min, warm=warm)
            if sol is None:
                return NodeResult("infeasible", None, columns, None, None)
            warm = sol.basis

            if deadline is not None and time.monotonic() > deadline:
                return NodeResult("lb-unavailable", None, columns, sol.lam,
                                  sol.duals, pricing_rounds=rounds, labels=labels)

            pricer = Pricer(self.inst, sol.duals, fixings, self.cfg.pricing,
                            penalty=penalty, known_routes=known)
            res = pricer.price()
            rounds += 1
            labels += res.n_labels
            self.stats["pricing_rounds"] += 1
            self.stats["labels"] += res.n_labels

            if res.overflow:
                for route, cost, _ in res.columns:
                    if route not in known:
                        col = Column.make(self.inst, route, cost)
                        self.add_column(col)
                        known.add(route)
                        columns.append(col)
                return NodeResult("lb-unavailable", None, columns, sol.lam,
                                  sol.duals, overflow=True,
                                  pricing_rounds=rounds, labels=labels)

            if res.columns:
                for route, cost, _ in res.columns:
                    if route in known:
                        continue
                    col = Column.make(self.inst, route, cost)
                    self.add_column(col)
                    known.add(route)
                    columns.append(col)
                continue

            # priced out at the current cut set: try rows
            tail_off = (
                len(recent) >= self.cfg.tail_rounds
                and recent[-self.cfg.tail_rounds] - sol.objective > -self.cfg.tail_eps
            )
            new_cuts = []
            if not tail_off and scc_rounds < self.cfg.scc_rounds:
                new_cuts = self.separate_capacity_cuts(columns, sol.lam)
                if new_cuts:
                    scc_rounds += 1
            if not new_cuts and not tail_off and src_rounds < self.cfg.src_rounds:
                new_cuts = self.separate_src(columns, sol.lam)
                if new_cuts:
                    src_rounds += 1
            if new_cuts:
                for cut in new_cuts:
                    self.add_cut(cut)
                recent.append(sol.objective)
                warm = None      # row set changed: cold restart
                continue

            if sol.artificial_level > EPS:
                return NodeResult("infeasible", None, columns, sol.lam, sol.duals,
                                  pricing_rounds=rounds, labels=labels)
            return NodeResult("ok", sol.objective, columns, sol.lam, sol.duals,
                              pricing_rounds=rounds, labels=labels)
