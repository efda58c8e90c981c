"""Command-line surface: instance generation, policy comparison, simulation,
exact solving, report merging.

Every command funnels randomness through one --seed and embeds its full
configuration into the artifacts it writes.
"""

import argparse
import csv
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import bnb
from .simulate import arc_frequency_csv, simulate as run_simulation, summary_csv
from .instance import (
    Instance,
    adjust_capacity,
    generate_random_instance,
    load_cvrplib,
)
from .master import MasterConfig
from .policy import best_orientation, eval_switch, expected_failures, get_evaluator
from .pricing import PricingConfig
from .tsp import build_route

POLICY_CHOICES = ("dtd", "or", "switch")
VARIABILITY_CHOICES = ("low", "med", "high")
GRID_SIZES = tuple(range(3, 16))
GRID_F = (1.3, 1.6, 1.9, 2.5)
GRID_SEEDS = 20

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_GAP = 2
EXIT_NO_LB = 3


def load_instance(path, f=None, kind=None):
    text = Path(path).read_text()
    if text.lstrip().startswith("{"):
        inst = Instance.from_json(text)
    else:
        inst = load_cvrplib(text, kind=kind or "degenerate")
    if f is not None:
        inst = adjust_capacity(inst, f, kind=kind)
    elif kind is not None and not text.lstrip().startswith("{"):
        pass  # kind already attached by the loader
    return inst


def _run_config(args):
    return {k: v for k, v in sorted(vars(args).items()) if k != "func"}


# -- gen ---------------------------------------------------------------------

def cmd_gen(args):
    out = Path(args.out)
    if args.batch:
        out.mkdir(parents=True, exist_ok=True)
        count = 0
        for n in GRID_SIZES:
            for f in GRID_F:
                for var in VARIABILITY_CHOICES:
                    for s in range(GRID_SEEDS):
                        seed = int(
                            np.random.SeedSequence(
                                [args.seed, n, int(f * 10), VARIABILITY_CHOICES.index(var), s]
                            ).generate_state(1)[0]
                        )
                        inst = generate_random_instance(seed, n, var, f)
                        name = f"r{n:02d}-f{f}-{var}-{s:02d}.json"
                        (out / name).write_text(inst.to_json())
                        count += 1
        print(f"wrote {count} instances to {out}")
        return EXIT_OK
    inst = generate_random_instance(args.seed, args.n, args.variability, args.f)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(inst.to_json())
    print(f"wrote {out} ({inst.name}, Q={inst.Q})")
    return EXIT_OK


# -- eval --------------------------------------------------------------------

def evaluate_policies(inst, route, policies, penalty=0.0):
    row = {}
    for pol in policies:
        _, cost, _ = best_orientation(inst, route, pol, penalty)
        row[pol] = cost
    if "or" in row:
        if "dtd" in row:
            row["dtd_vs_or_pct"] = (row["or"] - row["dtd"]) / row["or"] * 100.0
        if "switch" in row:
            row["switch_vs_or_pct"] = (row["or"] - row["switch"]) / row["or"] * 100.0
    return row


def cmd_eval(args):
    paths = [args.instance] if args.instance else sorted(
        str(p) for p in Path(args.batch_dir).glob("*.json")
    )
    policies = [p.strip() for p in args.policies.split(",")]
    rows = []
    for p in paths:
        inst = load_instance(p, f=args.f, kind=args.kind)
        if args.route:
            route = tuple(int(x) for x in args.route.split(","))
        else:
            route = build_route(inst, args.tsp)
        if not inst.route_feasible(route) and len(set(route)) != len(route):
            print(f"error: route {route} infeasible for {p}", file=sys.stderr)
            return EXIT_ERROR
        row = {"instance": inst.name, "route": "-".join(map(str, route))}
        row.update(evaluate_policies(inst, route, policies, args.penalty))
        rows.append(row)
    fields = list(rows[0].keys())
    writer = csv.DictWriter(
        open(args.out, "w", newline="") if args.out else sys.stdout, fieldnames=fields
    )
    writer.writeheader()
    for row in rows:
        writer.writerow({k: (f"{v:.6f}" if isinstance(v, float) else v)
                         for k, v in row.items()})
    if args.out:
        print(f"wrote {args.out} ({len(rows)} rows)")
    return EXIT_OK


# -- simulate ------------------------------------------------------------------

def cmd_simulate(args):
    if args.scenarios < 1:
        print("error: --scenarios must be >= 1", file=sys.stderr)
        return EXIT_ERROR
    inst = load_instance(args.instance, f=args.f, kind=args.kind)
    route = (tuple(int(x) for x in args.route.split(","))
             if args.route else build_route(inst, args.tsp))
    ev = get_evaluator(inst, args.penalty)
    _, cost, table = ev.best_orientation(route, args.policy)
    summ = run_simulation(inst, table, args.scenarios, args.seed, args.penalty)
    out = Path(args.out) if args.out else None
    meta = {
        "config": _run_config(args),
        "instance_hash": inst.content_hash(),
        "dp_expected_cost": cost,
        "dp_expected_failures": ev.expected_failures(table),
    }
    if out:
        out.parent.mkdir(parents=True, exist_ok=True)
        Path(str(out) + ".summary.csv").write_text(summary_csv([summ], [args.policy]))
        Path(str(out) + ".arcs.csv").write_text(arc_frequency_csv(summ))
        Path(str(out) + ".meta.json").write_text(json.dumps(meta, indent=1))
        print(f"wrote {out}.summary.csv, {out}.arcs.csv, {out}.meta.json")
    print(f"policy={args.policy} dp={cost:.6f} mc={summ.mean_cost:.6f} "
          f"se={summ.se_cost:.6f} failures={summ.failure_rate:.4f} "
          f"late={summ.late_service_rate:.4f}")
    return EXIT_OK


def cmd_failure_study(args):
    """Failure rates of optimal restocking vs switch across penalty values."""
    paths = sorted(str(p) for p in Path(args.batch_dir).glob("*.json"))
    penalties = [float(x) for x in args.penalties.split(",")]
    rows = []
    for p in paths:
        inst = load_instance(p)
        route = build_route(inst, args.tsp)
        for pen in penalties:
            ev = get_evaluator(inst, pen)
            _, c_or, t_or = ev.best_orientation(route, "or")
            _, c_sp, t_sp = ev.best_orientation(route, "switch")
            rows.append({
                "instance": inst.name,
                "penalty": pen,
                "impr_pct": (c_or - c_sp) / c_or * 100.0,
                "failures_or": ev.expected_failures(t_or),
                "failures_switch": ev.expected_failures(t_sp),
            })
    writer = csv.DictWriter(
        open(args.out, "w", newline="") if args.out else sys.stdout,
        fieldnames=list(rows[0].keys()),
    )
    writer.writeheader()
    for row in rows:
        writer.writerow({k: (f"{v:.6f}" if isinstance(v, float) else v)
                         for k, v in row.items()})
    return EXIT_OK


# -- solve ---------------------------------------------------------------------

def _bounds_config(choice):
    return {
        "all": (True, True),
        "rcsp": (True, False),
        "kp": (False, True),
        "none": (False, False),
    }[choice]


def cmd_solve(args):
    inst = load_instance(args.instance, f=args.f, kind=args.kind)
    use_rcsp, use_kp = _bounds_config(args.bounds)
    pricing = PricingConfig(
        target=args.target_cols,
        use_rcsp=use_rcsp,
        use_kp=use_kp,
        memory_bytes=int(args.mem_limit * (1 << 30)),
        debug_path=args.debug_labels,
    )
    cfg = bnb.SolveConfig(
        time_limit=args.time_limit,
        master=MasterConfig(lp_backend=args.lp_backend, pricing=pricing),
        penalty=args.penalty,
    )
    t0 = time.time()
    rep = bnb.solve(inst, cfg)
    rep.config = _run_config(args)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(rep.to_json())
    if args.csv:
        new = not Path(args.csv).exists()
        with open(args.csv, "a", newline="") as fh:
            if new:
                fh.write(rep.CSV_HEADER + "\n")
            fh.write(rep.csv_row() + "\n")
    best = "n/a" if rep.best is None else f"{rep.best:.3f}"
    lb = "n/a" if rep.lb is None else f"{rep.lb:.3f}"
    print(f"{inst.name}: status={rep.status} best={best} lb={lb} "
          f"nodes={rep.bb_nodes} cols={rep.cols} cc={rep.cc} rc={rep.rc} "
          f"time={time.time() - t0:.1f}s")
    if rep.status == "optimal":
        return EXIT_OK
    if rep.status == "lb-unavailable":
        return EXIT_NO_LB
    if rep.status == "infeasible":
        return EXIT_ERROR
    return EXIT_GAP


# -- report-merge -----------------------------------------------------------------

def cmd_report_merge(args):
    rows = []
    for path in args.reports:
        obj = json.loads(Path(path).read_text())
        rows.append(obj)
    fields = ["instance", "status", "best", "gap", "time_min", "cols", "c_av",
              "c_mx", "cc", "rc", "lb", "t_lb_min", "bb_nodes"]
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    w = csv.writer(out)
    w.writerow(fields)
    for r in rows:
        w.writerow([r.get(k) if r.get(k) is not None else "n/a" for k in fields])
    if args.out:
        print(f"wrote {args.out} ({len(rows)} rows)")
    return EXIT_OK


# -- parser -----------------------------------------------------------------------

def _apply_config_file(argv):
    """key=value file provides defaults; explicit flags win (parsed later)."""
    if "--config" not in argv:
        return argv
    idx = argv.index("--config")
    path = argv[idx + 1]
    rest = argv[:idx] + argv[idx + 2:]
    injected = []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        k, _, v = line.partition("=")
        k, v = k.strip(), v.strip()
        if v.lower() in ("true", "yes", "1") and k in ("batch",):
            injected.append(f"--{k}")
        else:
            injected.extend([f"--{k}", v])
    if not rest:
        return injected
    return [rest[0]] + injected + rest[1:]


def build_parser():
    p = argparse.ArgumentParser(prog="vrpsd", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate random instances")
    g.add_argument("--seed", type=int, default=1)
    g.add_argument("--n", type=int, default=6)
    g.add_argument("--variability", choices=VARIABILITY_CHOICES, default="med")
    g.add_argument("--f", type=float, default=1.9)
    g.add_argument("--batch", action="store_true",
                   help="emit the full 20x3x13x4 experiment grid")
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen)

    e = sub.add_parser("eval", help="compare policies on planned routes")
    e.add_argument("--instance")
    e.add_argument("--batch-dir")
    e.add_argument("--f", type=float)
    e.add_argument("--kind", choices=("binomial", "poisson", "negative-binomial"))
    e.add_argument("--route", help="comma-separated customer ids")
    e.add_argument("--tsp", choices=("nn2opt", "exact"), default="nn2opt")
    e.add_argument("--policies", default="dtd,or,switch")
    e.add_argument("--penalty", type=float, default=0.0)
    e.add_argument("--out")
    e.set_defaults(func=cmd_eval)

    s = sub.add_parser("simulate", help="Monte Carlo execution of a route")
    s.add_argument("--instance", required=True)
    s.add_argument("--f", type=float)
    s.add_argument("--kind", choices=("binomial", "poisson", "negative-binomial"))
    s.add_argument("--route")
    s.add_argument("--tsp", choices=("nn2opt", "exact"), default="nn2opt")
    s.add_argument("--policy", choices=POLICY_CHOICES, default="switch")
    s.add_argument("--scenarios", type=int, default=5000)
    s.add_argument("--seed", type=int, default=1)
    s.add_argument("--penalty", type=float, default=0.0)
    s.add_argument("--out")
    s.set_defaults(func=cmd_simulate)

    fs = sub.add_parser("failure-study", help="failure rates across penalties")
    fs.add_argument("--batch-dir", required=True)
    fs.add_argument("--penalties", default="10,100,1000")
    fs.add_argument("--tsp", choices=("nn2opt", "exact"), default="nn2opt")
    fs.add_argument("--out")
    fs.set_defaults(func=cmd_failure_study)

    v = sub.add_parser("solve", help="exact branch-cut-and-price")
    v.add_argument("--instance", required=True)
    v.add_argument("--f", type=float, help="adjust capacity for this load factor")
    v.add_argument("--kind", choices=("binomial", "poisson", "negative-binomial"),
                   default="poisson")
    v.add_argument("--time-limit", type=float, default=7200.0)
    v.add_argument("--mem-limit", type=float, default=4.0, help="GiB of labels")
    v.add_argument("--bounds", choices=("all", "rcsp", "kp", "none"), default="all")
    v.add_argument("--target-cols", type=int, default=200)
    v.add_argument("--lp-backend", choices=("bundled", "scipy"), default="bundled")
    v.add_argument("--penalty", type=float, default=0.0)
    v.add_argument("--debug-labels", help="JSON-lines label dump path")
    v.add_argument("--out", help="JSON report path")
    v.add_argument("--csv", help="append a CSV row here")
    v.set_defaults(func=cmd_solve)

    r = sub.add_parser("report-merge", help="merge JSON reports into one CSV")
    r.add_argument("reports", nargs="+")
    r.add_argument("--out")
    r.set_defaults(func=cmd_report_merge)
    return p


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    argv = _apply_config_file(argv)
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
