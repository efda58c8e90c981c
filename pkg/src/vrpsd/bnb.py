"""Branch-and-bound driver over the column-generation master.

Best-first node order on inherited bounds, semi-strong branching on planned
arcs (child LPs over existing columns and cuts only), a restricted
set-partitioning primal heuristic after each processed node, and a run report
mirroring the detailed result tables (Best, Gap, Cols, CC, RC, LB, BB, ...).
"""

import heapq
import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .master import Column, Master, MasterConfig, EPS
from .policy import eval_switch
from .pricing import ArcFixings
from .tsp import build_route

STATUS_OPTIMAL = "optimal"
STATUS_GAP = "feasible-with-gap"
STATUS_NO_LB = "lb-unavailable"
STATUS_INFEASIBLE = "infeasible"


@dataclass
class SolveConfig:
    time_limit: float = 7200.0
    master: MasterConfig = field(default_factory=MasterConfig)
    strong_branch_cap: int = 30
    strong_branch_all: bool = False
    heuristic_fraction: float = 0.10
    integer_eps: float = 1e-6
    penalty: float = 0.0


@dataclass
class BranchNode:
    fixings: ArcFixings
    parent_lb: float
    depth: int
    fleet_min: int | None = None
    fleet_max: int | None = None


@dataclass
class SolveReport:
    status: str
    best: float | None
    lb: float | None
    gap: float | None
    routes: list
    time_min: float
    t_lb_min: float | None
    bb_nodes: int
    cols: int
    c_av: float | None
    c_mx: int
    cc: int
    rc: int
    labels: int
    pricing_rounds: int
    instance: str
    instance_hash: str
    config: dict = field(default_factory=dict)

    def to_json(self):
        obj = dict(self.__dict__)
        obj["routes"] = [list(r) for r in self.routes]
        return json.dumps(obj, indent=1, sort_keys=True)

    def csv_row(self):
        def fmt(v, nd=3):
            return "n/a" if v is None else f"{v:.{nd}f}"
        return ",".join([
            self.instance, self.status, fmt(self.best), fmt(self.gap),
            fmt(self.time_min, 1), str(self.cols),
            fmt(self.c_av, 1) if self.c_av is not None else "n/a",
            str(self.c_mx), str(self.cc), str(self.rc),
            fmt(self.lb), fmt(self.t_lb_min, 1) if self.t_lb_min is not None else "n/a",
            str(self.bb_nodes),
        ])

    CSV_HEADER = ("instance,status,best,gap,time_min,cols,c_av,c_mx,"
                  "cc,rc,lb,t_lb_min,bb_nodes")


def verify_solution(inst, routes, penalty=0.0):
    """Re-verify a candidate incumbent independently of cached master costs."""
    seen = set()
    for r in routes:
        if not inst.route_feasible(r):
            return None
        if seen & set(r):
            return None
        seen |= set(r)
    if seen != set(inst.customers()):
        return None
    if len(routes) > inst.K:
        return None
    return float(sum(eval_switch(inst, r, penalty)[0] for r in routes))


class _Incumbent:
    def __init__(self):
        self.cost = math.inf
        self.routes = []

    def offer(self, inst, routes, penalty=0.0):
        cost = verify_solution(inst, routes, penalty)
        if cost is not None and cost < self.cost - 1e-9:
            self.cost = cost
            self.routes = [tuple(r) for r in routes]
            return True
        return False


def initial_columns(inst):
    """FFD packing by expected demand, each bin toured by 2-opt."""
    order = sorted(inst.customers(), key=lambda i: -inst.mean_demand[i])
    bins = []
    for i in order:
        for b in bins:
            if sum(inst.mean_demand[j] for j in b) + inst.mean_demand[i] <= inst.fq + 1e-9:
                b.append(i)
                break
        else:
            bins.append([i])
    return [build_route(inst, "nn2opt", customers=b) for b in bins]


def warmup_columns(inst, n_rounds=30, seed=0):
    """Diverse feasible routes: randomized packings, each bin toured by 2-opt.

    A richer starting pool keeps early master duals realistic, which is what
    makes the completion bounds effective in the first pricing rounds.
    """
    rng = np.random.default_rng(seed)
    routes = set()
    custs = list(inst.customers())
    for _ in range(n_rounds):
        order = [int(i) for i in rng.permutation(custs)]
        bins = []
        for i in order:
            placed = False
            for b in bins:
                if sum(inst.mean_demand[j] for j in b) + inst.mean_demand[i] \
                        <= inst.fq + 1e-9:
                    b.append(i)
                    placed = True
                    break
            if not placed:
                bins.append([i])
        for b in bins:
            routes.add(build_route(inst, "nn2opt", customers=b))
    return sorted(routes)


class Solver:
    def __init__(self, inst, config=None):
        self.inst = inst
        self.cfg = config or SolveConfig()
        self.master = Master(inst, self.cfg.master)
        self.incumbent = _Incumbent()
        self.nodes_processed = 0
        self.lb_stuck = math.inf     # min parent bound among unresolved nodes
        self.root_lb = None
        self.t_root_lb = None

    # -- integrality ------------------------------------------------------

    def _try_integral(self, columns, lam):
        tol = self.cfg.integer_eps
        if any(min(l % 1, 1 - l % 1) > tol for l in lam):
            x = self.master.arc_projection(columns, lam)
            if np.any(np.minimum(x % 1, 1 - x % 1) > tol):
                return None
            # integral projection with fractional multipliers: decode from arcs
            routes = []
            starts = [j for j in self.inst.customers() if x[0, j] > 0.5]
            visited = set()
            for s in starts:
                r = [s]
                visited.add(s)
                cur = s
                while x[cur, 0] < 0.5:
                    nxts = [j for j in self.inst.customers()
                            if x[cur, j] > 0.5 and j not in visited]
                    if not nxts:
                        return None
                    cur = nxts[0]
                    r.append(cur)
                    visited.add(cur)
                routes.append(tuple(r))
            if visited != set(self.inst.customers()):
                return None
            return routes
        return [c.route for c, l in zip(columns, lam) if l > 0.5]

    # -- branching ---------------------------------------------------------

    def select_branch_variable(self, node, columns, lam, lb):
        x = self.master.arc_projection(columns, lam)
        tol = self.cfg.integer_eps
        frac = np.minimum(x % 1, 1 - x % 1)
        cand = [(float(x[i, j] - math.floor(x[i, j])), i, j)
                for i, j in zip(*np.nonzero(frac > tol))]
        if not cand:
            total = float(sum(lam))
            if min(total % 1, 1 - total % 1) > tol:
                return ("fleet", total)
            return None
        cand.sort(key=lambda t: (-min(t[0], 1 - t[0]), t[1], t[2]))
        if not self.cfg.strong_branch_all:
            cand = cand[: self.cfg.strong_branch_cap]

        best = None
        for fpart, i, j in cand:
            scores = []
            for direction in ("down", "up"):
                fix = _child_fixings(node.fixings, (i, j), direction)
                if fix is None or not fix.consistent():
                    scores.append(math.inf)
                    continue
                cols = [c for c in columns if fix.route_compatible(c.route)]
                sol = self.master.solve_rmp(cols, node.fleet_max, node.fleet_min)
                scores.append(math.inf if sol is None else sol.objective - lb)
            score = min(scores)
            key = (score, fpart, -i, -j)
            if best is None or key > best[0]:
                best = (key, (i, j))
        return ("arc", best[1])

    # -- primal heuristic -----------------------------------------------------

    def primal_heuristic(self, deadline):
        """Exact set partitioning over the column pool, depth-first, LP bounded."""
        from .lp import LpProblem, OPTIMAL, solve_lp

        inst = self.inst
        pool = sorted(self.master.pool.values(), key=lambda c: c.route)
        big_m = self.master.big_m

        def sp_lp(cols, custs, k_left):
            order = sorted(custs)
            row = {c: k + 1 for k, c in enumerate(order)}
            prob = LpProblem(n_rows=1 + len(order), senses=["<"] + ["="] * len(order),
                             rhs=np.array([float(k_left)] + [1.0] * len(order)))
            for col in cols:
                prob.add_column(col.cost, [0] + [row[i] for i in col.route],
                                [1.0] * (1 + len(col.route)))
            for c in order:
                prob.add_column(big_m, [row[c]], [1.0])
            sol = solve_lp(prob, backend=self.cfg.master.lp_backend)
            if sol.status != OPTIMAL:
                return None
            lam = sol.x[: len(cols)]
            art = float(sol.x[len(cols):].sum())
            return float(sol.objective), lam, art

        def rec(cols, k_left, custs, acc, chosen):
            if time.monotonic() > deadline:
                return
            if not custs:
                self.incumbent.offer(inst, chosen, self.cfg.penalty)
                return
            if k_left == 0 or not cols:
                return
            out = sp_lp(cols, custs, k_left)
            if out is None:
                return
            obj, lam, art = out
            if acc + obj >= self.incumbent.cost - 1e-6:
                return
            tol = self.cfg.integer_eps
            if art <= EPS and all(min(l % 1, 1 - l % 1) <= tol for l in lam):
                routes = [c.route for c, l in zip(cols, lam) if l > 0.5]
                self.incumbent.offer(inst, chosen + routes, self.cfg.penalty)
                return
            fr = [(min(l % 1, 1 - l % 1), -l, k) for k, l in enumerate(lam)]
            fr.sort(key=lambda t: (-t[0], t[1], t[2]))
            pick = cols[fr[0][2]]
            inc_cols = [c for c in cols
                        if c is not pick and not (c.members & pick.members)]
            rec(inc_cols, k_left - 1, custs - pick.members,
                acc + pick.cost, chosen + [pick.route])
            exc_cols = [c for c in cols if c is not pick]
            rec(exc_cols, k_left, custs, acc, chosen)

        rec(pool, inst.K, frozenset(inst.customers()), 0.0, [])

    # -- main loop -------------------------------------------------------------

    def solve(self):
        cfg = self.cfg
        inst = self.inst
        t0 = time.monotonic()
        deadline = t0 + cfg.time_limit

        ffd = initial_columns(inst)
        for route in ffd:
            self.master.add_column(Column.make(inst, route))
        if len(ffd) <= inst.K:
            self.incumbent.offer(inst, ffd, cfg.penalty)
        for route in warmup_columns(inst):
            self.master.add_column(Column.make(inst, route))

        heap = []
        self._counter = 0
        root = BranchNode(ArcFixings(), -math.inf, 0)
        heapq.heappush(heap, (-math.inf, self._counter, root))
        status = None

        while heap:
            parent_lb, _, node = heapq.heappop(heap)
            if parent_lb >= self.incumbent.cost - 1e-6:
                continue
            if time.monotonic() > deadline:
                status = STATUS_GAP
                self.lb_stuck = min(self.lb_stuck, node.parent_lb)
                break

            res = self.master.column_and_row_generation(
                node.fixings, node.fleet_max, node.fleet_min,
                deadline=deadline, penalty=cfg.penalty,
            )
            self.nodes_processed += 1
            if node.depth == 0:
                self.root_lb = res.lb
                self.t_root_lb = (time.monotonic() - t0) / 60.0

            if res.status == "infeasible":
                pass
            elif res.status == "lb-unavailable":
                if node.depth == 0:
                    status = STATUS_NO_LB
                    self._heuristic_pass(deadline)
                    break
                self.lb_stuck = min(self.lb_stuck, node.parent_lb)
            else:
                lb = res.lb
                if lb < self.incumbent.cost - 1e-6:
                    routes = self._try_integral(res.columns, res.lam)
                    if routes is not None:
                        self.incumbent.offer(inst, routes, cfg.penalty)
                    else:
                        choice = self.select_branch_variable(
                            node, res.columns, res.lam, lb
                        )
                        if choice is None:
                            # fractional but undecodable: treat as unresolved
                            self.lb_stuck = min(self.lb_stuck, lb)
                        else:
                            self._branch(heap, node, choice, lb)
            self._heuristic_pass(deadline)

        t = time.monotonic() - t0
        open_lbs = [lb for lb, _, _ in heap]
        lb = min([self.lb_stuck] + open_lbs + [self.incumbent.cost])
        if lb in (-math.inf, math.inf):
            lb = self.root_lb
        best = self.incumbent.cost if self.incumbent.routes else None
        if status is None:
            status = STATUS_OPTIMAL if not heap and self.lb_stuck == math.inf else STATUS_GAP
            if best is None:
                status = STATUS_INFEASIBLE if not heap else STATUS_GAP
        if status == STATUS_NO_LB:
            lb = None
        gap = None
        if best is not None and lb is not None and best > 0:
            gap = max(0.0, (best - lb) / best * 100.0)
        routes = self.incumbent.routes
        c_av = (sum(len(r) for r in routes) / len(routes)) if routes else None
        c_mx = max((len(c.route) for c in self.master.pool.values()), default=0)
        return SolveReport(
            status=status,
            best=best,
            lb=lb,
            gap=gap,
            routes=routes,
            time_min=t / 60.0,
            t_lb_min=self.t_root_lb,
            bb_nodes=self.nodes_processed,
            cols=len(self.master.pool),
            c_av=c_av,
            c_mx=c_mx,
            cc=sum(1 for c in self.master.cuts if c.kind == "scc"),
            rc=sum(1 for c in self.master.cuts if c.kind == "src"),
            labels=self.master.stats["labels"],
            pricing_rounds=self.master.stats["pricing_rounds"],
            instance=inst.name,
            instance_hash=inst.content_hash(),
        )

    def _heuristic_pass(self, deadline):
        budget = self.cfg.heuristic_fraction * max(0.0, deadline - time.monotonic())
        if budget > 0.05:
            self.primal_heuristic(time.monotonic() + budget)

    def _branch(self, heap, node, choice, lb):
        kind, data = choice
        children = []
        if kind == "arc":
            i, j = data
            for direction in ("down", "up"):
                fix = _child_fixings(node.fixings, (i, j), direction)
                if fix is not None and fix.consistent():
                    children.append(BranchNode(fix, lb, node.depth + 1,
                                               node.fleet_min, node.fleet_max))
        else:
            total = data
            lo, hi = math.floor(total), math.ceil(total)
            children.append(BranchNode(node.fixings, lb, node.depth + 1,
                                       node.fleet_min, min(node.fleet_max or lo, lo)))
            children.append(BranchNode(node.fixings, lb, node.depth + 1,
                                       max(node.fleet_min or hi, hi), node.fleet_max))
        for child in children:
            self._counter += 1
            heapq.heappush(heap, (lb, self._counter, child))


def _child_fixings(fix, arc, direction):
    if direction == "down":
        return ArcFixings(fix.forced, fix.forbidden | {arc})
    return ArcFixings(fix.forced | {arc}, fix.forbidden)


def solve(inst, config=None):
    """Branch-cut-and-price to optimality (or the configured limits)."""
    return Solver(inst, config).solve()
