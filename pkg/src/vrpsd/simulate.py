"""Monte Carlo execution of planned routes under a fixed decision table.

Each scenario samples one demand per customer by inverse-CDF over the
truncated pmf, then walks the decision table: the realized cost of a scenario
equals the policy DP's conditional cost for that demand realization.  Streams
are reproducible: scenario i uses numpy's PCG64 seeded with (seed, i).
"""

import csv
import io
from dataclasses import dataclass, field

import numpy as np

RNG_NAME = "numpy-pcg64"


@dataclass
class ScenarioResult:
    a_posteriori_sequence: tuple
    realized_cost: float
    failures: int
    served_after_first_restock: int
    restock_positions: tuple   # 1-based serve positions preceded by a restock


@dataclass
class SimulationSummary:
    n_scenarios: int
    seed: int
    rng: str
    mean_cost: float
    se_cost: float
    failure_rate: float
    late_service_rate: float
    distinct_costs: int
    arc_frequency: np.ndarray = field(repr=False)


def sample_demands(inst, route, rng):
    """One realized demand per route customer, inverse-CDF sampling."""
    out = {}
    for j in route:
        u = rng.random()
        cdf = inst.demands[j].cdf()
        out[j] = int(np.searchsorted(cdf, u, side="right"))
    return out


def execute(inst, table, demands, penalty=0.0):
    """Walk one scenario under the decision table and tally its cost."""
    route = table.route
    H = len(route)
    Q = inst.Q
    c = inst.cost

    seq = []
    restock_positions = []
    failures = 0
    cost = 0.0
    first_replenish_pos = None

    location = 0
    load = Q
    target, restock = table.initial, False
    for step in range(1, H + 1):
        if restock:
            cost += c[location, 0] + c[0, target]
            load = Q
            restock_positions.append(step)
            if first_replenish_pos is None:
                first_replenish_pos = step
        else:
            cost += c[location, target]
        d = demands[target]
        if d > load:
            g = -((load - d) // Q)
            failures += g
            cost += g * (c[target, 0] + c[0, target] + penalty)
            load += Q * g
            if first_replenish_pos is None:
                first_replenish_pos = step
        load -= d
        seq.append(target)
        location = target
        if step == H:
            cost += c[location, 0]
            break
        target, restock = table.action(step, location, load)

    served_after = 0 if first_replenish_pos is None else H - first_replenish_pos + 1
    return ScenarioResult(
        a_posteriori_sequence=tuple(seq),
        realized_cost=float(cost),
        failures=failures,
        served_after_first_restock=served_after,
        restock_positions=tuple(restock_positions),
    )


def simulate(inst, table, n_scenarios, seed, penalty=0.0):
    """Simulate a decision table over independent scenarios."""
    if n_scenarios < 1:
        raise ValueError("need at least one scenario")
    route = table.route
    n = inst.n_nodes
    costs = np.empty(n_scenarios)
    fails = np.empty(n_scenarios)
    late = np.empty(n_scenarios)
    arc_freq = np.zeros((n, n), dtype=np.int64)

    for s in range(n_scenarios):
        rng = np.random.default_rng([seed, s])
        res = execute(inst, table, sample_demands(inst, route, rng), penalty)
        costs[s] = res.realized_cost
        fails[s] = res.failures
        late[s] = res.served_after_first_restock
        prev = 0
        for u in res.a_posteriori_sequence:
            arc_freq[prev, u] += 1
            prev = u
        arc_freq[prev, 0] += 1

    se = float(costs.std(ddof=1) / np.sqrt(n_scenarios)) if n_scenarios > 1 else 0.0
    return SimulationSummary(
        n_scenarios=n_scenarios,
        seed=seed,
        rng=RNG_NAME,
        mean_cost=float(costs.mean()),
        se_cost=se,
        failure_rate=float(fails.mean()),
        late_service_rate=float(late.mean()),
        distinct_costs=len(np.unique(np.round(costs, 9))),
        arc_frequency=arc_freq,
    )


def arc_frequency_csv(summary):
    buf = io.StringIO()
    w = csv.writer(buf)
    n = summary.arc_frequency.shape[0]
    w.writerow(["from\\to"] + list(range(n)))
    for i in range(n):
        w.writerow([i] + summary.arc_frequency[i].tolist())
    return buf.getvalue()


def summary_csv(summaries, labels=None):
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(
        ["label", "scenarios", "seed", "rng", "mean_cost", "se_cost",
         "failure_rate", "late_service_rate", "distinct_costs"]
    )
    for k, s in enumerate(summaries):
        label = labels[k] if labels else str(k)
        w.writerow(
            [label, s.n_scenarios, s.seed, s.rng, f"{s.mean_cost:.6f}",
             f"{s.se_cost:.6f}", f"{s.failure_rate:.6f}",
             f"{s.late_service_rate:.6f}", s.distinct_costs]
        )
    return buf.getvalue()
