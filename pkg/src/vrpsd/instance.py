"""Problem instances: demand distributions, CVRPLIB ingestion, random generation.

An instance is a complete graph with a depot (node 0), integer-or-real travel
costs satisfying the triangle inequality, one discrete demand distribution per
customer, a fleet size K, a vehicle capacity Q and a load factor f.  A planned
route may serve a total expected demand of up to f*Q.

Demand distributions are truncated so that individual tail probabilities below
1e-6 vanish, then clipped at the vehicle capacity and renormalized once, so a
single customer never requires more than one replenishment trip per visit.
"""

import json
import math
import hashlib
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

PMF_TAIL_EPS = 1e-6

#: capacity divisors for the supported load factors (CVRPLIB experiments)
CAPACITY_DIVISOR = {1.3: 2, 1.6: 3, 1.9: 4}

VARIABILITY_KINDS = {"low": "binomial", "med": "poisson", "high": "negative-binomial"}


class ParseError(ValueError):
    """Raised on malformed CVRPLIB input; carries the offending line number."""

    def __init__(self, message, line_no=None):
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)
        self.line_no = line_no


def _nint(x):
    """TSPLIB-style nearest-integer rounding."""
    return int(math.floor(x + 0.5))


# ---------------------------------------------------------------------------
# demand distributions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DemandDistribution:
    """Truncated discrete demand distribution on support {0, ..., dmax}.

    ``pmf[d]`` is the probability of demand d.  ``nominal_mean`` is the mean
    of the untruncated parent distribution; ``mean`` (the pmf mean) is what
    every algorithm uses.
    """

    kind: str
    nominal_mean: int
    pmf: np.ndarray

    def __post_init__(self):
        pmf = np.asarray(self.pmf, dtype=float)
        pmf.setflags(write=False)
        object.__setattr__(self, "pmf", pmf)
        if abs(pmf.sum() - 1.0) > 1e-12:
            raise ValueError(f"pmf sums to {pmf.sum()!r}, expected 1")
        if (pmf < 0).any():
            raise ValueError("pmf has negative entries")

    @property
    def dmax(self):
        return len(self.pmf) - 1

    @property
    def mean(self):
        return float(self.pmf @ np.arange(len(self.pmf)))

    @property
    def variance(self):
        d = np.arange(len(self.pmf))
        return float(self.pmf @ (d - self.mean) ** 2)

    @property
    def vmr(self):
        return self.variance / self.mean if self.mean > 0 else 0.0

    def support(self):
        """Demand values with positive probability."""
        return np.nonzero(self.pmf > 0)[0]

    def cdf(self):
        return np.cumsum(self.pmf)

    def __eq__(self, other):
        return (
            isinstance(other, DemandDistribution)
            and self.kind == other.kind
            and self.nominal_mean == other.nominal_mean
            and self.pmf.shape == other.pmf.shape
            and bool(np.all(self.pmf == other.pmf))
        )


def make_distribution(kind, mean, Q):
    """Build a truncated demand distribution of the given family.

    Parameterizations are the unique two-parameter fits to the stated mean and
    variance-to-mean ratio: binomial(n=2*mean, p=1/2) for VMR 0.5, Poisson for
    VMR 1, negative binomial(r=mean, p=1/2) for VMR 2.  Tails below 1e-6 are
    zeroed, the support is clipped at Q, and the pmf is renormalized once.
    """
    mean = int(mean)
    if mean <= 0:
        raise ValueError(f"demand mean must be >= 1, got {mean}")
    if Q < 1:
        raise ValueError(f"capacity must be >= 1, got {Q}")

    if kind == "degenerate":
        if mean > Q:
            raise ValueError(f"degenerate demand {mean} exceeds capacity {Q}")
        pmf = np.zeros(mean + 1)
        pmf[mean] = 1.0
        return DemandDistribution("degenerate", mean, pmf)

    if kind == "binomial":
        n = 2 * mean
        raw = stats.binom.pmf(np.arange(n + 1), n, 0.5)
    elif kind == "poisson":
        hi = mean + max(20, int(12 * math.sqrt(mean))) + 1
        raw = stats.poisson.pmf(np.arange(hi + 1), mean)
    elif kind == "negative-binomial":
        # success prob 1/2, r = mean  =>  mean r, variance 2r
        hi = 2 * mean + max(30, int(16 * math.sqrt(2 * mean))) + 1
        raw = stats.nbinom.pmf(np.arange(hi + 1), mean, 0.5)
    else:
        raise ValueError(f"unknown distribution kind {kind!r}")

    keep = np.nonzero(raw >= PMF_TAIL_EPS)[0]
    if len(keep) == 0:
        raise ValueError(f"distribution {kind}({mean}) has no mass above {PMF_TAIL_EPS}")
    lo, hi = keep[0], keep[-1]
    pmf = raw.copy()
    pmf[:lo] = 0.0
    pmf[hi + 1:] = 0.0
    hi = min(hi, Q)
    pmf = pmf[: hi + 1]
    pmf = pmf / pmf.sum()
    return DemandDistribution(kind, mean, pmf)


# ---------------------------------------------------------------------------
# instance
# ---------------------------------------------------------------------------

@dataclass
class Instance:
    """A VRPSD instance.  Node 0 is the depot, customers are 1..N."""

    name: str
    coords: np.ndarray              # (N+1, 2)
    cost: np.ndarray                # (N+1, N+1)
    demands: list                   # index by customer id; entry 0 is None
    K: int
    Q: int
    f: float
    cost_rounding: str = "exact"    # "euc2d" (nearest int) or "exact"
    original_Q: int | None = None
    seed: int | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.coords = np.asarray(self.coords, dtype=float)
        self.cost = np.asarray(self.cost, dtype=float)
        if self.original_Q is None:
            self.original_Q = self.Q
        self._validate()
        # expected demands per node (0 at depot): the nominal means, which the
        # capacity clipping of the stored pmfs must not perturb
        means = np.zeros(self.n_nodes)
        for i in self.customers():
            means[i] = float(self.demands[i].nominal_mean)
        means.setflags(write=False)
        self.mean_demand = means

    # -- structure -----------------------------------------------------

    @property
    def n_nodes(self):
        return len(self.coords)

    @property
    def n_customers(self):
        return self.n_nodes - 1

    @property
    def fq(self):
        """Expected-demand budget of one planned route."""
        return self.f * self.Q

    def customers(self):
        return range(1, self.n_nodes)

    def _validate(self):
        n = self.n_nodes
        if self.cost.shape != (n, n):
            raise ValueError("cost matrix shape mismatch")
        if len(self.demands) != n:
            raise ValueError("demand list length mismatch")
        if self.K < 1 or self.Q < 1:
            raise ValueError("K and Q must be positive")
        if self.f < 1:
            raise ValueError("load factor must be >= 1")
        if np.any(np.diagonal(self.cost) != 0):
            raise ValueError("cost diagonal must be zero")
        if np.any(self.cost < 0):
            raise ValueError("negative travel cost")
        # triangle inequality; nearest-int rounding may lose up to 1.5 per pair
        slack = 1.5 + 1e-9 if self.cost_rounding == "euc2d" else 1e-9
        through = np.min(self.cost[:, :, None] + self.cost[None, :, :], axis=1)
        if np.any(through < self.cost - slack):
            raise ValueError("triangle inequality violated")
        for i in self.customers():
            d = self.demands[i]
            if d is None:
                raise ValueError(f"customer {i} has no demand distribution")
            if d.dmax > self.Q:
                raise ValueError(
                    f"customer {i} max demand {d.dmax} exceeds capacity {self.Q}"
                )

    # -- routes ----------------------------------------------------------

    def route_expected_demand(self, seq):
        return float(sum(self.mean_demand[i] for i in seq))

    def route_feasible(self, seq):
        """True when seq is a valid planned route within the f*Q budget."""
        if len(seq) == 0 or len(set(seq)) != len(seq):
            return False
        if any(i < 1 or i >= self.n_nodes for i in seq):
            return False
        return self.route_expected_demand(seq) <= self.fq + 1e-9

    def min_fleet_size(self):
        """Smallest vehicle count admitting a feasible partition under the
        f*Q expected-demand budget: bin-packing lower bound, increased until
        a first-fit-decreasing packing succeeds."""
        items = sorted((self.mean_demand[i] for i in self.customers()), reverse=True)
        budget = self.fq
        k = max(1, math.ceil(sum(items) / budget - 1e-9))
        while not _ffd_fits(items, k, budget):
            k += 1
        return k

    # -- serialization ---------------------------------------------------

    def to_json(self):
        obj = {
            "format": "vrpsd-instance",
            "version": 1,
            "name": self.name,
            "cost_rounding": self.cost_rounding,
            "Q": self.Q,
            "original_Q": self.original_Q,
            "K": self.K,
            "f": self.f,
            "seed": self.seed,
            "coords": [[float(x), float(y)] for x, y in self.coords],
            "demands": [
                {"kind": d.kind, "mean": d.nominal_mean}
                for d in self.demands[1:]
            ],
            "meta": self.meta,
        }
        return json.dumps(obj, indent=1, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        obj = json.loads(text)
        if obj.get("format") != "vrpsd-instance":
            raise ParseError("not a vrpsd instance file")
        coords = np.array(obj["coords"], dtype=float)
        cost = build_cost_matrix(coords, obj["cost_rounding"])
        demands = [None] + [
            make_distribution(d["kind"], d["mean"], obj["Q"]) for d in obj["demands"]
        ]
        return cls(
            name=obj["name"],
            coords=coords,
            cost=cost,
            demands=demands,
            K=obj["K"],
            Q=obj["Q"],
            f=obj["f"],
            cost_rounding=obj["cost_rounding"],
            original_Q=obj.get("original_Q"),
            seed=obj.get("seed"),
            meta=obj.get("meta", {}),
        )

    def content_hash(self):
        return hashlib.sha256(self.to_json().encode()).hexdigest()[:16]

    def __eq__(self, other):
        return (
            isinstance(other, Instance)
            and self.name == other.name
            and self.K == other.K
            and self.Q == other.Q
            and self.f == other.f
            and self.cost_rounding == other.cost_rounding
            and np.array_equal(self.coords, other.coords)
            and np.array_equal(self.cost, other.cost)
            and all(a == b for a, b in zip(self.demands[1:], other.demands[1:]))
        )


def _ffd_fits(items_desc, k, capacity):
    bins = [0.0] * k
    for w in items_desc:
        for b in range(k):
            if bins[b] + w <= capacity + 1e-9:
                bins[b] += w
                break
        else:
            return False
    return True


def build_cost_matrix(coords, rounding):
    coords = np.asarray(coords, dtype=float)
    diff = coords[:, None, :] - coords[None, :, :]
    dist = np.sqrt((diff ** 2).sum(axis=2))
    if rounding == "euc2d":
        return np.floor(dist + 0.5)
    if rounding == "exact":
        return dist
    raise ValueError(f"unknown cost rounding {rounding!r}")


# ---------------------------------------------------------------------------
# CVRPLIB ingestion
# ---------------------------------------------------------------------------

def load_cvrplib(text, kind="degenerate"):
    """Parse a CVRPLIB/TSPLIB .vrp file (EUC_2D) into an Instance.

    The demand column is interpreted as the distribution mean; distributions
    of the requested kind are attached at the file's capacity.
    """
    name = "unnamed"
    dimension = None
    capacity = None
    ewt = None
    coords = {}
    demands = {}
    depot = None

    lines = text.splitlines()
    section = None
    for ln, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line == "EOF":
            section = None
            continue
        key = line.split(":")[0].strip().upper()
        if key in ("NAME", "TYPE", "COMMENT", "DIMENSION", "CAPACITY", "EDGE_WEIGHT_TYPE"):
            if ":" not in line:
                raise ParseError(f"malformed header {line!r}", ln)
            val = line.split(":", 1)[1].strip()
            if key == "NAME":
                name = val
            elif key == "DIMENSION":
                dimension = int(val)
            elif key == "CAPACITY":
                capacity = int(val)
            elif key == "EDGE_WEIGHT_TYPE":
                ewt = val
            section = None
            continue
        if line.upper() in ("NODE_COORD_SECTION", "DEMAND_SECTION", "DEPOT_SECTION"):
            section = line.upper()
            continue
        if section == "NODE_COORD_SECTION":
            parts = line.split()
            if len(parts) != 3:
                raise ParseError(f"bad coordinate row {line!r}", ln)
            coords[int(parts[0])] = (float(parts[1]), float(parts[2]))
        elif section == "DEMAND_SECTION":
            parts = line.split()
            if len(parts) != 2:
                raise ParseError(f"bad demand row {line!r}", ln)
            try:
                demands[int(parts[0])] = int(parts[1])
            except ValueError:
                raise ParseError(f"non-integer demand {parts[1]!r}", ln) from None
        elif section == "DEPOT_SECTION":
            node = int(line.split()[0])
            if node == -1:
                section = None
                continue
            if depot is not None:
                raise ParseError("multiple depot entries", ln)
            depot = node
        elif section is None:
            raise ParseError(f"unexpected content {line!r}", ln)

    if dimension is None or capacity is None:
        raise ParseError("missing DIMENSION or CAPACITY header")
    if ewt not in (None, "EUC_2D"):
        raise ParseError(f"unsupported EDGE_WEIGHT_TYPE {ewt!r}")
    if depot is None:
        raise ParseError("missing depot")
    if len(coords) != dimension or len(demands) != dimension:
        raise ParseError(
            f"expected {dimension} coordinate and demand rows, "
            f"got {len(coords)} and {len(demands)}"
        )
    if demands.get(depot, 0) != 0:
        raise ParseError("depot demand must be zero")

    order = [depot] + [i for i in sorted(coords) if i != depot]
    xy = np.array([coords[i] for i in order], dtype=float)
    cost = build_cost_matrix(xy, "euc2d")
    dists = [None] + [
        make_distribution(kind, demands[i], capacity) for i in order[1:]
    ]
    inst = Instance(
        name=name,
        coords=xy,
        cost=cost,
        demands=dists,
        K=max(1, math.ceil(sum(demands.values()) / capacity)),
        Q=capacity,
        f=1.0,
        cost_rounding="euc2d",
    )
    inst.K = inst.min_fleet_size()
    return inst


def adjust_capacity(instance, f, kind=None, K=None):
    """Return the instance at load factor f with capacity Q'/q_f.

    The divisor q_f is 2, 3 or 4 for f = 1.3, 1.6, 1.9; the adjustment always
    starts from the original capacity, so it is idempotent for a fixed f.
    Distributions are rebuilt at the new capacity and the fleet size is reset
    to the minimum required for feasibility (unless K is given).
    """
    if f not in CAPACITY_DIVISOR:
        raise ValueError(f"unsupported load factor {f}; expected one of {sorted(CAPACITY_DIVISOR)}")
    new_q = _nint(instance.original_Q / CAPACITY_DIVISOR[f])
    demands = [None]
    for i in instance.customers():
        d = instance.demands[i]
        demands.append(make_distribution(kind or d.kind, d.nominal_mean, new_q))
    inst = Instance(
        name=instance.name,
        coords=instance.coords.copy(),
        cost=instance.cost.copy(),
        demands=demands,
        K=K if K is not None else 1,
        Q=new_q,
        f=f,
        cost_rounding=instance.cost_rounding,
        original_Q=instance.original_Q,
        seed=instance.seed,
        meta=dict(instance.meta),
    )
    if K is None:
        inst.K = inst.min_fleet_size()
    return inst


# ---------------------------------------------------------------------------
# random generation (single-route policy studies)
# ---------------------------------------------------------------------------

def generate_random_instance(seed, n_customers, variability, f=1.9,
                             mean_range=(10, 100), grid=1000.0):
    """Random single-route instance: customers uniform on a grid, depot at the
    corner (0, 0), integer means uniform on [10, 100], capacity set so the
    route's expected demand is f times the capacity.
    """
    if variability not in VARIABILITY_KINDS:
        raise ValueError(f"unknown variability {variability!r}")
    rng = np.random.default_rng(seed)
    xy = np.vstack([[0.0, 0.0], rng.uniform(0.0, grid, size=(n_customers, 2))])
    means = rng.integers(mean_range[0], mean_range[1] + 1, size=n_customers)
    Q = _nint(float(means.sum()) / f)
    kind = VARIABILITY_KINDS[variability]
    demands = [None] + [make_distribution(kind, int(m), Q) for m in means]
    inst = Instance(
        name=f"rand-n{n_customers}-{variability}-f{f}-s{seed}",
        coords=xy,
        cost=build_cost_matrix(xy, "exact"),
        demands=demands,
        K=1,
        Q=Q,
        f=f,
        cost_rounding="exact",
        seed=seed,
    )
    inst.K = inst.min_fleet_size()
    return inst
