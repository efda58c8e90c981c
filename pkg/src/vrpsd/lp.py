"""Pluggable LP contract with a bundled dense revised simplex.

The contract: minimize c'x over sparse columns with row senses <=, =, >=
and x >= 0.  ``solve_lp`` returns primal values, row duals and an opaque
basis usable to warm-start a re-solve after columns were appended.

The bundled backend is a two-phase revised simplex with an explicitly
maintained basis inverse, Dantzig pricing and a Bland's-rule fallback once
degenerate pivots accumulate.  It is adequate for the master problems in
scope (hundreds of rows, thousands of columns).  An adapter for
scipy.optimize.linprog (HiGHS) serves as an independent second backend.

Dual sign convention (minimization): <= rows have duals <= 0, >= rows have
duals >= 0, equality duals are free.
"""

from dataclasses import dataclass, field

import numpy as np

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
NUMERICAL_FAILURE = "numerical-failure"

_FEAS_TOL = 1e-9
_RC_TOL = 1e-9
_PIVOT_TOL = 1e-10
_BLAND_AFTER = 10_000
_MAX_ITER = 200_000
_REFACTOR_EVERY = 150


@dataclass
class LpProblem:
    """Sparse column-form LP: minimize obj'x, rows with senses, x >= 0."""

    n_rows: int
    senses: list            # '<', '=', '>' per row
    rhs: np.ndarray
    obj: list = field(default_factory=list)
    cols: list = field(default_factory=list)   # list of (row_idx array, coef array)

    def __post_init__(self):
        self.rhs = np.asarray(self.rhs, dtype=float)
        if len(self.senses) != self.n_rows or len(self.rhs) != self.n_rows:
            raise ValueError("row metadata length mismatch")
        if any(s not in "<=>" for s in self.senses):
            raise ValueError("row sense must be one of '<', '=', '>'")

    @property
    def n_cols(self):
        return len(self.cols)

    def add_column(self, cost, rows, coefs):
        rows = np.asarray(rows, dtype=np.int64)
        coefs = np.asarray(coefs, dtype=float)
        if rows.size and (rows.min() < 0 or rows.max() >= self.n_rows):
            raise ValueError("column row index out of range")
        if not np.all(np.isfinite(coefs)) or not np.isfinite(cost):
            raise ValueError("non-finite column data")
        self.obj.append(float(cost))
        self.cols.append((rows, coefs))
        return len(self.cols) - 1

    def dense_matrix(self):
        A = np.zeros((self.n_rows, self.n_cols))
        for j, (rows, coefs) in enumerate(self.cols):
            A[rows, j] = coefs
        return A


@dataclass
class LpSolution:
    status: str
    objective: float | None
    x: np.ndarray | None
    duals: np.ndarray | None
    basis: tuple | None      # opaque warm-start token


def solve_lp(problem, warm_basis=None, backend="bundled"):
    if backend == "bundled":
        return _solve_bundled(problem, warm_basis)
    if backend == "scipy":
        return _solve_scipy(problem)
    raise ValueError(f"unknown LP backend {backend!r}")


# ---------------------------------------------------------------------------
# bundled revised simplex
# ---------------------------------------------------------------------------

class _Tableau:
    """Standard-form data: A x = b with slack columns, b >= 0."""

    def __init__(self, problem):
        m, n = problem.n_rows, problem.n_cols
        A = problem.dense_matrix()
        b = problem.rhs.copy()
        c = np.asarray(problem.obj, dtype=float)

        # one slack/surplus per inequality row
        slack_of_row = {}
        slack_cols = []
        for i, s in enumerate(problem.senses):
            if s == "<":
                slack_of_row[i] = n + len(slack_cols)
                slack_cols.append((i, 1.0))
            elif s == ">":
                slack_of_row[i] = n + len(slack_cols)
                slack_cols.append((i, -1.0))

        n_tot = n + len(slack_cols)
        full = np.zeros((m, n_tot))
        full[:, :n] = A
        for j, (i, v) in enumerate(slack_cols):
            full[i, n + j] = v

        # normalize to b >= 0
        flip = b < 0
        full[flip] *= -1.0
        b[flip] = -b[flip]

        self.m, self.n_struct, self.n_tot = m, n, n_tot
        self.A = full
        self.b = b
        self.c = np.concatenate([c, np.zeros(len(slack_cols))])
        self.slack_of_row = slack_of_row
        self.row_flipped = flip

    def tag_of(self, j):
        if j < self.n_struct:
            return ("x", j)
        return ("s", int(np.nonzero(self.A[:, j])[0][0]))

    def index_of(self, tag):
        kind, k = tag
        if kind == "x":
            return k if k < self.n_struct else None
        return self.slack_of_row.get(k)


class _Simplex:
    def __init__(self, tab):
        self.tab = tab
        self.degenerate = 0
        self.iterations = 0

    def _refactor(self, A_work, basis):
        B = A_work[:, basis]
        try:
            self.binv = np.linalg.inv(B)
        except np.linalg.LinAlgError:
            return False
        return np.all(np.isfinite(self.binv))

    def run(self, A_work, c_work, b, basis, banned):
        """Primal simplex from a feasible basis; returns status string."""
        m = len(b)
        if not self._refactor(A_work, basis):
            return NUMERICAL_FAILURE
        xb = self.binv @ b
        if xb.min() < -1e-7:
            return NUMERICAL_FAILURE
        since_refactor = 0
        while True:
            self.iterations += 1
            if self.iterations > _MAX_ITER:
                return NUMERICAL_FAILURE
            y = c_work[basis] @ self.binv
            rc = c_work - y @ A_work
            rc[basis] = 0.0
            if banned is not None:
                rc = rc.copy()
                rc[banned] = np.inf
            use_bland = self.degenerate > _BLAND_AFTER
            if use_bland:
                cand = np.nonzero(rc < -_RC_TOL)[0]
                if cand.size == 0:
                    return OPTIMAL
                e = int(cand[0])
            else:
                e = int(np.argmin(rc))
                if rc[e] >= -_RC_TOL:
                    return OPTIMAL
            d = self.binv @ A_work[:, e]
            pos = d > _PIVOT_TOL
            if not pos.any():
                return UNBOUNDED
            ratios = np.full(m, np.inf)
            ratios[pos] = xb[pos] / d[pos]
            t = ratios.min()
            if use_bland:
                # leave by smallest variable index among ties
                ties = np.nonzero(ratios <= t + 1e-12)[0]
                r = int(min(ties, key=lambda i: basis[i]))
            else:
                ties = np.nonzero(ratios <= t + 1e-12)[0]
                r = int(ties[np.argmax(d[ties])])
            if t <= 1e-12:
                self.degenerate += 1
            # pivot
            xb = xb - t * d
            xb[r] = t
            basis[r] = e
            since_refactor += 1
            if since_refactor >= _REFACTOR_EVERY:
                if not self._refactor(A_work, basis):
                    return NUMERICAL_FAILURE
                xb = self.binv @ b
                since_refactor = 0
            else:
                piv = d[r]
                row = self.binv[r] / piv
                self.binv -= np.outer(d, row)
                self.binv[r] = row
            self.xb = xb
        # unreachable

    def solution(self, basis, b):
        xb = self.binv @ b
        return xb


def _solve_bundled(problem, warm_basis=None):
    tab = _Tableau(problem)
    m, n_tot = tab.m, tab.n_tot

    basis = None
    if warm_basis is not None:
        cand = [tab.index_of(tag) for tag in warm_basis]
        if all(j is not None for j in cand) and len(cand) == m:
            basis = np.array(cand, dtype=np.int64)
            sx = _Simplex(tab)
            if sx._refactor(tab.A, basis):
                xb = sx.binv @ tab.b
                if xb.min() >= -1e-7:
                    status = sx.run(tab.A, tab.c, tab.b, basis, banned=None)
                    if status == OPTIMAL:
                        return _extract(problem, tab, sx, basis)
                    if status == UNBOUNDED:
                        return LpSolution(UNBOUNDED, None, None, None, None)
            basis = None  # fall through to cold start

    # phase 1: artificial columns for rows not covered by a '<' slack
    A1 = tab.A
    c1 = np.zeros(n_tot)
    basis = np.full(m, -1, dtype=np.int64)
    art_cols = []
    for i in range(m):
        j = tab.slack_of_row.get(i)
        # a +1 slack (after row normalization) can start in the basis
        if j is not None and tab.A[i, j] > 0:
            basis[i] = j
        else:
            art_cols.append(i)
    if art_cols:
        art = np.zeros((m, len(art_cols)))
        for k, i in enumerate(art_cols):
            art[i, k] = 1.0
            basis[i] = n_tot + k
        A1 = np.hstack([tab.A, art])
        c1 = np.concatenate([c1, np.ones(len(art_cols))])

        sx = _Simplex(tab)
        status = sx.run(A1, c1, tab.b, basis, banned=None)
        if status != OPTIMAL:
            return LpSolution(NUMERICAL_FAILURE, None, None, None, None)
        xb = sx.binv @ tab.b
        if float(c1[basis] @ xb) > 1e-7:
            return LpSolution(INFEASIBLE, None, None, None, None)
        # pivot artificials out of the basis where possible
        for r in range(m):
            if basis[r] >= n_tot:
                row = sx.binv[r] @ A1[:, :n_tot]
                cand = np.nonzero(np.abs(row) > 1e-7)[0]
                if cand.size:
                    e = int(cand[0])
                    d = sx.binv @ A1[:, e]
                    piv = d[r]
                    rowv = sx.binv[r] / piv
                    sx.binv -= np.outer(d, rowv)
                    sx.binv[r] = rowv
                    basis[r] = e

    # phase 2 (artificials, if still basic, are banned from re-entering)
    c2 = np.concatenate([tab.c, np.full(max(0, basis.max() + 1 - n_tot), 0.0)])
    A2 = A1 if len(c2) > n_tot else tab.A
    if A2.shape[1] > len(c2):
        c2 = np.concatenate([c2, np.zeros(A2.shape[1] - len(c2))])
    banned = np.zeros(A2.shape[1], dtype=bool)
    banned[n_tot:] = True
    sx2 = _Simplex(tab)
    status = sx2.run(A2, c2, tab.b, basis, banned if banned.any() else None)
    if status == UNBOUNDED:
        return LpSolution(UNBOUNDED, None, None, None, None)
    if status != OPTIMAL:
        return LpSolution(NUMERICAL_FAILURE, None, None, None, None)
    return _extract(problem, tab, sx2, basis)


def _extract(problem, tab, sx, basis):
    m = tab.m
    xb = sx.binv @ tab.b
    x = np.zeros(tab.n_tot + max(0, basis.max() + 1 - tab.n_tot))
    x[basis] = xb
    if x[tab.n_tot:].max(initial=0.0) > 1e-7:
        return LpSolution(INFEASIBLE, None, None, None, None)
    x_struct = x[: tab.n_struct]
    c_full = np.concatenate([tab.c, np.zeros(len(x) - tab.n_tot)])
    y = c_full[basis] @ sx.binv
    # undo the b >= 0 row normalization
    duals = np.where(tab.row_flipped, -y, y)
    obj = float(problem.obj @ x_struct) if len(problem.obj) else 0.0
    tags = tuple(
        tab.tag_of(j) if j < tab.n_tot else ("s", -1 - k)
        for k, j in enumerate(basis)
    )
    if any(t[0] == "s" and t[1] < 0 for t in tags):
        tags = None  # artificial still basic: basis not reusable for warm start
    return LpSolution(OPTIMAL, obj, x_struct, duals, tags)


# ---------------------------------------------------------------------------
# scipy adapter (independent backend, also used as a test oracle)
# ---------------------------------------------------------------------------

def _solve_scipy(problem):
    from scipy.optimize import linprog

    A = problem.dense_matrix()
    senses = np.array(list(problem.senses))
    ub = senses == "<"
    ge = senses == ">"
    eq = senses == "="
    A_ub = np.vstack([A[ub], -A[ge]]) if (ub.any() or ge.any()) else None
    b_ub = np.concatenate([problem.rhs[ub], -problem.rhs[ge]]) if A_ub is not None else None
    A_eq = A[eq] if eq.any() else None
    b_eq = problem.rhs[eq] if A_eq is not None else None
    res = linprog(
        problem.obj, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq,
        bounds=(0, None), method="highs",
    )
    if res.status == 2:
        return LpSolution(INFEASIBLE, None, None, None, None)
    if res.status == 3:
        return LpSolution(UNBOUNDED, None, None, None, None)
    if res.status != 0:
        return LpSolution(NUMERICAL_FAILURE, None, None, None, None)
    duals = np.zeros(problem.n_rows)
    if A_ub is not None:
        marg = res.ineqlin.marginals
        n_ub = int(ub.sum())
        duals[ub] = marg[:n_ub]
        duals[ge] = -marg[n_ub:]
    if A_eq is not None:
        duals[eq] = res.eqlin.marginals
    return LpSolution(OPTIMAL, float(res.fun), res.x, duals, None)


def check_optimality(problem, sol):
    """Primal/dual feasibility and complementary-slackness residuals."""
    A = problem.dense_matrix()
    x, y = sol.x, sol.duals
    act = A @ x
    primal = 0.0
    dual_sign = 0.0
    for i, s in enumerate(problem.senses):
        r = float(act[i] - problem.rhs[i])
        if s == "<":
            primal = max(primal, r)
            dual_sign = max(dual_sign, y[i])
        elif s == ">":
            primal = max(primal, -r)
            dual_sign = max(dual_sign, -y[i])
        else:
            primal = max(primal, abs(r))
    rc = np.asarray(problem.obj) - y @ A
    dual = max(dual_sign, float(-rc.min()) if rc.size else 0.0)
    cs = float(np.abs(rc * x).max()) if rc.size else 0.0
    return primal, dual, cs
