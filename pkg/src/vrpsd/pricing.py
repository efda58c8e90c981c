"""Elementary backward labeling with value-function labels.

A label represents a partial planned route from its current customer up to
the depot.  Because the cost of the partial route depends on the (unknown)
customer planned before it, each label carries two cost-to-go functions over
the remaining load: one for the current customer served in its planned
position, one for the current and next customers swapped.  Labels are
extended by prepending customers; no dominance is applied.  Pruning relies on
completion bounds: two non-elementary resource-constrained shortest-path
bounds (with capacity-cut duals counted, and a worst-case variant that
discounts them once), evaluated first, then a 0/1-knapsack bound.

The search is exhaustive modulo valid pruning: an empty result from a full
sweep proves that no route prices out.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .policy import get_evaluator

RC_EPS = 1e-6


@dataclass
class DualValues:
    """Duals of the restricted master: fleet row, partition rows, cuts."""

    kappa: float
    alpha: np.ndarray                 # per node; alpha[0] unused
    src: list = field(default_factory=list)   # (frozenset triplet, beta <= 0)
    scc: list = field(default_factory=list)   # (frozenset, gamma >= 0)

    def __post_init__(self):
        self.alpha = np.asarray(self.alpha, dtype=float)
        for S, beta in self.src:
            if beta > 1e-7:
                raise ValueError("subset-row duals must be nonpositive")
        for S, gamma in self.scc:
            if gamma < -1e-7:
                raise ValueError("capacity-cut duals must be nonnegative")

    @classmethod
    def zero(cls, n_nodes):
        return cls(kappa=0.0, alpha=np.zeros(n_nodes))


@dataclass
class ArcFixings:
    """Planned-arc branching decisions; arcs are (i, j) with 0 = depot."""

    forced: frozenset = frozenset()
    forbidden: frozenset = frozenset()

    def __post_init__(self):
        self.forced = frozenset(self.forced)
        self.forbidden = frozenset(self.forbidden)
        self.forced_succ = {a: b for a, b in self.forced if a != 0}
        self.forced_pred = {b: a for a, b in self.forced if b != 0}

    def consistent(self):
        """Forced arcs must form vertex-disjoint partial paths."""
        if len(self.forced_succ) != len({a for a, _ in self.forced if a != 0}):
            return False
        succ_by_tail = {}
        pred_by_head = {}
        for a, b in self.forced:
            if a in succ_by_tail or b in pred_by_head and b != 0:
                return False
            if a != 0:
                succ_by_tail[a] = b
            if b != 0:
                pred_by_head[b] = a
        if self.forced & self.forbidden:
            return False
        # no cycles among forced customer arcs
        for start in succ_by_tail:
            seen = set()
            cur = start
            while cur in succ_by_tail and succ_by_tail[cur] != 0:
                cur = succ_by_tail[cur]
                if cur in seen or cur == start:
                    return False
                seen.add(cur)
        return True

    def route_compatible(self, route):
        """True when the planned route conflicts with no fixing."""
        arcs = list(zip((0,) + tuple(route), tuple(route) + (0,)))
        if any(a in self.forbidden for a in arcs):
            return False
        succ = dict(arcs)
        pred = {b: a for a, b in arcs}
        for a, b in self.forced:
            if a != 0 and a in succ and succ[a] != b:
                return False
            if b != 0 and b in pred and pred[b] != a:
                return False
        return True


class Label:
    """Partial planned route with value functions over the remaining load.

    Labels are created thin: scalar attributes only (cost, reduced cost,
    value functions sampled at full load).  The full value-function arrays
    and service-expectation caches are materialized lazily, so labels killed
    by completion bounds never pay for them.
    """

    __slots__ = (
        "parent", "delta", "mask", "n", "nxt", "nu", "nup",
        "alpha_sum", "theta", "theta_gamma", "dsum", "cost", "rc",
        "nu_q", "nup_q", "sv_n", "sv_nxt",
    )

    def __init__(self, parent, delta, mask, n, nxt,
                 alpha_sum, theta, theta_gamma, dsum, cost, rc, nu_q, nup_q):
        self.parent = parent
        self.delta = delta
        self.mask = mask
        self.n = n
        self.nxt = nxt
        self.nu = None
        self.nup = None
        self.alpha_sum = alpha_sum
        self.theta = theta
        self.theta_gamma = theta_gamma
        self.dsum = dsum
        self.cost = cost
        self.rc = rc
        self.nu_q = nu_q       # nu at full load
        self.nup_q = nup_q     # nu' at full load
        self.sv_n = None
        self.sv_nxt = None

    def __len__(self):
        return len(self.delta)

    def __repr__(self):
        return f"Label({self.delta}, cost={self.cost:.3f}, rc={self.rc:.3f})"


@dataclass
class PricingConfig:
    target: int = 200
    use_rcsp: bool = True
    use_kp: bool = True
    partial: bool = True              # may stop early once `target` columns found
    subset_size: int = 8              # |M| for precomputed shortest-path tables
    memory_bytes: int = 4 << 30
    max_labels: int | None = None
    debug_path: str | None = None     # JSON-lines label dump

    def label_cap(self, Q):
        if self.max_labels is not None:
            return self.max_labels
        return max(1000, self.memory_bytes // (32 * (Q + 1) + 400))


@dataclass
class PricingResult:
    columns: list                     # (route, expected_cost, reduced_cost)
    proved: bool                      # full sweep completed: result is exhaustive
    overflow: bool
    n_labels: int
    best_rc: float


class PricingOverflow(Exception):
    """Label pool exceeded its memory cap."""


class Pricer:
    """One pricing invocation: owns the label pool and the bound tables."""

    def __init__(self, inst, duals, fixings=None, config=None, penalty=0.0,
                 known_routes=None):
        self.inst = inst
        self.duals = duals
        self.fix = fixings or ArcFixings()
        self.cfg = config or PricingConfig()
        self.known = known_routes or frozenset()
        self.ev = get_evaluator(inst, penalty)
        self.Q = inst.Q
        self.c = inst.cost
        self.fq = inst.fq
        self.means = inst.mean_demand
        n = inst.n_nodes

        # dual-derived quantities
        self.gamma_by_node = np.zeros(n)
        self.gamma_total = 0.0
        self.scc_masks = []
        for S, gamma in duals.scc:
            self.gamma_total += gamma
            for i in S:
                self.gamma_by_node[i] += gamma
            self.scc_masks.append((_mask(S), gamma))
        self.src_masks = [(_mask(S), beta) for S, beta in duals.src]
        self.theta_bar = duals.alpha + self.gamma_by_node
        self.theta_bar[0] = 0.0
        self.theta_wc = duals.alpha.copy()
        self.theta_wc[0] = 0.0

        self.n_labels = 0
        self._kp_full = None
        self._rcsp_static = None

    # -- label algebra ---------------------------------------------------

    def _theta_terms(self, mask):
        """Cut-dual contributions of the customer set given as a bitmask."""
        src = 0.0
        for smask, beta in self.src_masks:
            src += ((mask & smask).bit_count() // 2) * beta
        gam = 0.0
        for smask, gamma in self.scc_masks:
            if mask & smask:
                gam += gamma
        return src, gam

    def init_label(self, j):
        """Single-customer label per the initialization table."""
        Q = self.Q
        alpha_sum = float(self.duals.alpha[j])
        src, gam = self._theta_terms(_bit(j))
        theta = self.duals.kappa + alpha_sum + src + gam
        cost = self.c[0, j] + self.c[j, 0]
        lab = Label(
            parent=None, delta=(j,), mask=_bit(j), n=j, nxt=None,
            alpha_sum=alpha_sum, theta=theta, theta_gamma=gam,
            dsum=float(self.means[j]), cost=float(cost),
            rc=float(cost - theta), nu_q=float(self.c[j, 0]), nup_q=np.inf,
        )
        lab.nu = np.full(Q + 1, self.c[j, 0])
        lab.nup = np.full(Q + 1, np.inf)
        return lab

    def label_expected_cost(self, lab):
        """E[route cost] taking the better of the two possible starts."""
        self.materialize(lab)
        first = self.c[0, lab.n] + self.ev.service_expectation_at(lab.n, lab.nu, self.Q)
        if lab.parent is None:
            return float(first)
        second = self.c[0, lab.nxt] + self.ev.service_expectation_at(
            lab.nxt, lab.nup, self.Q
        )
        return float(min(first, second))

    def _phi_star_arr(self, i, j, sv):
        """phi*(i, j, q, .) for all q, via the service expectation of j."""
        direct = self.c[i, j] + sv
        restock = self.c[i, 0] + self.c[0, j] + sv[-1]
        return np.minimum(direct, restock)

    def _nu_of(self, lab, i, qs):
        """Child value function phi-recursion of (i)+lab.delta at loads qs."""
        v = np.minimum(self.c[i, lab.n] + lab.sv_n[qs],
                       self.c[i, 0] + self.c[0, lab.n] + lab.sv_n[-1])
        if lab.nxt is not None:
            v = np.minimum(v, self.c[i, lab.nxt] + lab.sv_nxt[qs])
            v = np.minimum(v, self.c[i, 0] + self.c[0, lab.nxt] + lab.sv_nxt[-1])
        return v

    def _iota_of(self, lab, i, x):
        """Cost-to-go after i is served when i and lab.n are switched,
        evaluated at load indices x (any shape)."""
        parent = lab.parent
        if parent is None:
            return np.full(np.shape(x), self.c[i, 0])
        v = np.minimum(self.c[i, parent.n] + parent.sv_n[x],
                       self.c[i, 0] + self.c[0, parent.n] + parent.sv_n[-1])
        if parent.nxt is not None:
            v = np.minimum(v, self.c[i, parent.nxt] + parent.sv_nxt[x])
            v = np.minimum(v, self.c[i, 0] + self.c[0, parent.nxt] + parent.sv_nxt[-1])
        return v

    def _sv_iota_of(self, lab, i, qs):
        """Service expectation of i under the switched cost-to-go, at loads qs."""
        _, pv, idx, gbar, retpen = self.ev._kernel(i)
        vals = self._iota_of(lab, i, idx[qs])
        return vals @ pv + retpen * gbar[qs]

    def _ensure_sv(self, lab):
        if lab.sv_n is None:
            self.materialize(lab)
            lab.sv_n = self.ev.service_expectation(lab.n, lab.nu)
            if lab.nxt is not None:
                lab.sv_nxt = self.ev.service_expectation(lab.nxt, lab.nup)

    def materialize(self, lab):
        """Fill in the full value-function arrays (parents must exist)."""
        if lab.nu is not None:
            return
        parent = lab.parent
        self._ensure_sv(parent)
        i = lab.n
        all_q = np.arange(self.Q + 1)
        lab.nu = self._nu_of(parent, i, all_q)
        sv_iota = self._sv_iota_of(parent, i, all_q)
        lab.nup = np.minimum(self.c[parent.n, i] + sv_iota,
                             self.c[parent.n, 0] + self.c[0, i] + sv_iota[-1])

    def extend_label(self, lab, i):
        """Prepend customer i; returns a thin extension label."""
        self._ensure_sv(lab)
        Q = self.Q
        _, pv_i, idx_i, gbar_i, retpen_i = self.ev._kernel(i)
        _, pv_n, idx_n, gbar_n, retpen_n = self.ev._kernel(lab.n)

        # E[C] starting at i: nu of the child sampled where full-load
        # service of i can land
        nu_at = self._nu_of(lab, i, idx_i[Q])
        cost_first = self.c[0, i] + nu_at @ pv_i + retpen_i * gbar_i[Q]
        # E[C] starting at lab.n (i and lab.n switched)
        sv_iota_q = self._sv_iota_of(lab, i, idx_n[Q])
        sv_iota_full = self._sv_iota_of(lab, i, np.array([Q]))[0]
        nup_at = np.minimum(self.c[lab.n, i] + sv_iota_q,
                            self.c[lab.n, 0] + self.c[0, i] + sv_iota_full)
        cost_second = self.c[0, lab.n] + nup_at @ pv_n + retpen_n * gbar_n[Q]

        nu_q = float(self._nu_of(lab, i, np.array([Q]))[0])
        nup_q = float(min(self.c[lab.n, i] + sv_iota_full,
                          self.c[lab.n, 0] + self.c[0, i] + sv_iota_full))

        mask = lab.mask | _bit(i)
        alpha_sum = lab.alpha_sum + float(self.duals.alpha[i])
        src, gam = self._theta_terms(mask)
        theta = self.duals.kappa + alpha_sum + src + gam
        cost = float(min(cost_first, cost_second))
        self.n_labels += 1
        if self.n_labels > self.cfg.label_cap(self.Q):
            raise PricingOverflow
        return Label(
            parent=lab, delta=(i,) + lab.delta, mask=mask, n=i, nxt=lab.n,
            alpha_sum=alpha_sum, theta=theta, theta_gamma=gam,
            dsum=lab.dsum + float(self.means[i]), cost=cost,
            rc=float(cost - theta), nu_q=nu_q, nup_q=nup_q,
        )

    def reduced_cost(self, route, expected_cost):
        """Reduced cost recomputed from scratch for a complete route."""
        mask = _mask(route)
        alpha_sum = float(self.duals.alpha[list(route)].sum())
        src, gam = self._theta_terms(mask)
        return expected_cost - self.duals.kappa - alpha_sum - src - gam

    # -- knapsack completion bound ----------------------------------------

    def _kp_table_full(self):
        """DP over all customers; a valid relaxation of any per-label KP."""
        if self._kp_full is None:
            cap = int(math.floor(self.fq + 1e-9))
            dp = np.zeros(cap + 1)
            for i in self.inst.customers():
                v = self.theta_bar[i]
                if v <= 0:
                    continue
                w = int(math.floor(self.means[i]))
                if w == 0:
                    dp += v
                elif w <= cap:
                    np.maximum(dp[w:], dp[:-w] + v, out=dp[w:])
            self._kp_full = dp
        return self._kp_full

    def knapsack_value(self, lab):
        """Exact 0/1 knapsack over customers outside the label."""
        cap = int(math.floor(self.fq - lab.dsum + 1e-9))
        if cap < 0:
            return 0.0
        dp = np.zeros(cap + 1)
        for i in self.inst.customers():
            if lab.mask & _bit(i):
                continue
            v = self.theta_bar[i]
            if v <= 0:
                continue
            w = int(math.floor(self.means[i]))
            if w == 0:
                dp += v
            elif w <= cap:
                np.maximum(dp[w:], dp[:-w] + v, out=dp[w:])
        return float(dp[cap])

    def knapsack_bound(self, lab):
        """Lower bound on the reduced cost of every completion of lab."""
        cap = int(math.floor(self.fq - lab.dsum + 1e-9))
        if cap < 0:
            return lab.rc
        quick = lab.rc - float(self._kp_table_full()[cap])
        if quick >= -RC_EPS:
            return quick
        return lab.rc - self.knapsack_value(lab)

    # -- RCSP completion bounds -------------------------------------------

    def _rcsp_setup(self):
        """Precompute sp(S, i, R) for every S within the ratio-selected subset.

        One batched DP builds the whole (2^|M|, node, resource) tensor per
        cost variant; bound evaluation afterwards is pure table lookups.
        """
        if self._rcsp_static is not None:
            return self._rcsp_static
        inst = self.inst
        n = inst.n_nodes
        custs = list(inst.customers())
        ratios = sorted(
            custs, key=lambda i: (-(self.duals.alpha[i] / max(self.means[i], 1e-9)), i)
        )
        M = ratios[: min(self.cfg.subset_size, len(custs))]
        bitpos = {j: k for k, j in enumerate(M)}
        rmax = int(math.floor(self.fq + 1e-9))
        weights = np.zeros(n, dtype=np.int64)
        for i in custs:
            weights[i] = int(math.floor(self.means[i]))
        w_of = {}
        for j in custs:
            w_of.setdefault(int(weights[j]), []).append(j)
        rounds = 1 if all(w >= 1 for w in w_of) else n

        n_sub = 1 << len(M)
        subs = np.arange(n_sub)
        banned = np.zeros((n_sub, n), dtype=bool)
        for j, k in bitpos.items():
            banned[(subs >> k) & 1 == 1, j] = True

        tables = {}
        for variant, tb in (("duals", self.theta_bar), ("worst", self.theta_wc)):
            cb = self.c.copy()
            cb[:, 1:] -= tb[1:][None, :]
            np.fill_diagonal(cb, np.inf)
            for (a, b) in self.fix.forbidden:
                if a < n and b < n and b != 0:
                    cb[a, b] = np.inf
            cb[:, 0] = np.inf  # paths end at a customer; no depot transit

            reach = np.full((n_sub, n, rmax + 1), np.inf)
            reach[:, 0, :] = 0.0
            for _ in range(rounds):
                for u in range(1, rmax + 1):
                    col = reach[:, :, u - 1].copy()
                    np.minimum(col, reach[:, :, u], out=col)
                    for w, js in w_of.items():
                        if w > u:
                            continue
                        src = np.where(banned, np.inf, reach[:, :, u - w])
                        vals = np.min(src[:, :, None] + cb[None, :, js], axis=1)
                        col[:, js] = np.minimum(col[:, js], vals)
                    reach[:, :, u] = col
            tables[variant] = reach

        self._rcsp_static = (M, bitpos, rmax, tables)
        return self._rcsp_static

    def _sub_index(self, mask, bitpos):
        idx = 0
        for j, k in bitpos.items():
            if mask & _bit(j):
                idx |= 1 << k
        return idx

    def _sp_lookup(self, variant, s_mask, target, budget):
        if budget < -1e-9:
            return np.inf
        M, bitpos, rmax, tables = self._rcsp_setup()
        r = min(int(math.floor(budget + 1e-9)), rmax)
        return float(tables[variant][self._sub_index(s_mask, bitpos), target, r])

    def rcsp_bound(self, lab, variant="duals"):
        """Conditional-expectation completion bound; needs |delta| >= 3."""
        if lab.parent is None or lab.parent.parent is None:
            return -np.inf
        M, bitpos, rmax, tables = self._rcsp_setup()
        tab = tables[variant]
        tb = self.theta_bar if variant == "duals" else self.theta_wc
        theta = lab.theta if variant == "duals" else lab.theta - lab.theta_gamma
        Q = self.Q
        fq = self.fq
        sub = self._sub_index(lab.mask, bitpos)

        n0 = (
            self._sp_lookup(variant, lab.mask, lab.n, fq - (lab.dsum - self.means[lab.n]))
            + tb[lab.n] + lab.nu_q - theta
        )
        n1 = (
            self._sp_lookup(variant, lab.mask, lab.nxt, fq - (lab.dsum - self.means[lab.nxt]))
            + tb[lab.nxt] + lab.nup_q - theta
        )

        parent = lab.parent
        c = self.c
        slack = fq - (lab.dsum - self.means[lab.n])
        budgets = slack - self.means
        r = np.floor(budgets + 1e-9).astype(np.int64)
        in_lab = np.fromiter(((lab.mask >> j) & 1 for j in range(len(budgets))),
                             dtype=bool, count=len(budgets))
        valid = (~in_lab) & (r >= 0)
        valid[0] = False
        nm1 = np.inf
        if valid.any():
            l_row = c[lab.n, :] + np.minimum(
                c[:, parent.n] + parent.nu_q, c[:, parent.nxt] + parent.nup_q
            )
            rc = np.minimum(r, rmax)
            spv = tab[sub, lab.n, np.where(valid, rc, 0)]
            cand = np.where(valid, spv + l_row - tb, np.inf)
            for j in M:
                if valid[j]:
                    v = tab[sub | (1 << bitpos[j]), lab.n, rc[j]]
                    cand[j] = v + l_row[j] - tb[j]
            nm1 = float(cand.min())
        nm1 = nm1 + tb[lab.n] - theta

        bound = min(n0, n1, nm1)
        if variant == "worst":
            bound -= self.gamma_total
        return float(bound)

    # -- main sweep --------------------------------------------------------

    def completion_bound(self, lab):
        """Best enabled completion bound (cheap ones first)."""
        best = -np.inf
        if self.cfg.use_rcsp and lab.parent is not None and lab.parent.parent is not None:
            best = self.rcsp_bound(lab, "duals")
            if best >= -RC_EPS:
                return best
            best = max(best, self.rcsp_bound(lab, "worst"))
            if best >= -RC_EPS:
                return best
        if self.cfg.use_kp:
            best = max(best, self.knapsack_bound(lab))
        return best

    def _extension_targets(self, lab):
        out = []
        budget = self.fq - lab.dsum + 1e-9
        succ_forced = self.fix.forced_succ
        pred_forced = self.fix.forced_pred
        head_pred = pred_forced.get(lab.n)
        kp_full = self._kp_table_full() if self.cfg.use_kp else None
        kappa = self.duals.kappa
        alpha = self.duals.alpha
        for i in self.inst.customers():
            if lab.mask & _bit(i):
                continue
            if self.means[i] > budget:
                continue
            if (i, lab.n) in self.fix.forbidden:
                continue
            if succ_forced.get(i, lab.n) != lab.n:
                continue
            if head_pred is not None and head_pred != i:
                continue
            if kp_full is not None:
                # prepending never cheapens a route, so the child's reduced
                # cost is at least cost - theta(child); screen before paying
                # for the child's value functions
                src, gam = self._theta_terms(lab.mask | _bit(i))
                theta_child = kappa + lab.alpha_sum + float(alpha[i]) + src + gam
                cap = int(self.fq - lab.dsum - self.means[i] + 1e-9)
                if lab.cost - theta_child - float(kp_full[max(cap, 0)]) >= -RC_EPS:
                    continue
            out.append(i)
        return out

    def _emittable(self, lab):
        """May lab.delta be reported as a complete planned route?"""
        if (0, lab.n) in self.fix.forbidden:
            return False
        pred = self.fix.forced_pred.get(lab.n)
        return pred is None or pred == 0

    def price(self):
        """Sweep labels in increasing expected-demand buckets."""
        cfg = self.cfg
        candidates = {}
        buckets = {}
        overflow = False
        stop = False
        debug = open(cfg.debug_path, "a") if cfg.debug_path else None

        def push(lab):
            buckets.setdefault(math.ceil(lab.dsum - 1e-9), []).append(lab)

        try:
            for j in self.inst.customers():
                if self.means[j] > self.fq + 1e-9:
                    continue
                if (j, 0) in self.fix.forbidden:
                    continue
                if self.fix.forced_succ.get(j, 0) != 0:
                    continue
                self.n_labels += 1
                if self.n_labels > cfg.label_cap(self.Q):
                    raise PricingOverflow
                push(self.init_label(j))

            while buckets and not stop:
                key = min(buckets)
                queue = buckets.pop(key)
                k = 0
                while k < len(queue):
                    lab = queue[k]
                    k += 1
                    if debug is not None:
                        self.materialize(lab)
                        q2 = self.Q // 2
                        debug.write(
                            '{"delta": %s, "theta": %.9g, "nu": [%.9g, %.9g, %.9g]}\n'
                            % (list(lab.delta), lab.theta,
                               lab.nu[0], lab.nu[q2], lab.nu[self.Q])
                        )
                    if (lab.rc < -RC_EPS and lab.delta not in self.known
                            and self._emittable(lab)):
                        candidates[lab.delta] = (lab.delta, lab.cost, lab.rc)
                        if cfg.partial and len(candidates) >= cfg.target:
                            stop = True
                            break
                    if self.completion_bound(lab) >= -RC_EPS:
                        continue
                    for i in self._extension_targets(lab):
                        ext = self.extend_label(lab, i)
                        b = math.ceil(ext.dsum - 1e-9)
                        if b == key:
                            queue.append(ext)
                        else:
                            push(ext)
        except PricingOverflow:
            # fatal only when the sweep was meant to prove optimality: a
            # finding round that already has columns simply returns them
            capped = True
        else:
            capped = False
        finally:
            if debug is not None:
                debug.close()

        overflow = capped and not candidates
        cols = sorted(candidates.values(), key=lambda t: (t[2], t[0]))
        best_rc = cols[0][2] if cols else 0.0
        return PricingResult(
            columns=cols[: cfg.target],
            proved=not capped and not stop,  # full sweep: result is exhaustive
            overflow=overflow,
            n_labels=self.n_labels,
            best_rc=float(best_rc),
        )


def price(inst, duals, fixings=None, config=None, penalty=0.0, known_routes=None):
    return Pricer(inst, duals, fixings, config, penalty, known_routes).price()


def _bit(i):
    return 1 << i


def _mask(items):
    m = 0
    for i in items:
        m |= 1 << i
    return m
