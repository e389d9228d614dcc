"""Command-line front end: simulate, optimize, bench, and check.

Exit codes form the script contract:
  0  success
  1  an automaton property check failed
  2  the instance is infeasible (or the run gave up before a full plan)
  3  the search result disagrees with the brute-force oracle
  4  bad input: unreadable scenario, malformed plan file, bad arguments

Reports are JSON with sorted keys; tables are CSV with floats written via
repr so reruns are byte-identical. Wall-clock columns are measurements and
sit outside that determinism contract.

Environment: CHARGE_NET_BACKEND picks the search kernel (auto, c, py) when
--backend is not given; CHARGE_NET_THREADS caps bench worker processes.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import statistics
import sys
import time

from . import __version__
from .automaton import (DiscreteInput, WorldContext, check_properties,
                        simulate_execution)
from .costs import CostBreakdown, CostWeights, total_cost
from .errors import (ConfigError, InfeasibleStepError, OracleSizeError,
                     ScenarioError)
from .network import CarSpec, HighwayGraph, decode_edge, edge_index, load_scenario
from .optimizer import (ScheduleProblem, Solution, brute_force_oracle,
                        oracle_size_bound, rhc_loop, solve_exact)
from .vehicle import BatteryParams, MotionParams

ORACLE_TOLERANCE = 1e-9


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems with the input-error exit code."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(4, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------------
# shared plumbing
# ---------------------------------------------------------------------------

def _cost_dict(cost: CostBreakdown | None) -> dict | None:
    if cost is None:
        return None
    return {
        "station": cost.station,
        "electricity": cost.electricity,
        "congestion": cost.congestion,
        "charging_time": cost.charging_time,
        "waiting_time": cost.waiting_time,
        "degradation": cost.degradation,
        "total": cost.total,
    }


def _write_report(out_dir: str, payload: dict) -> str:
    path = os.path.join(out_dir, "report.json")
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")
    return path


def _trajectory_rows(trajectories) -> list[list]:
    rows = []
    for traj in trajectories:
        for rec in traj.steps:
            rows.append([
                traj.car_id, rec.step, rec.mode.name.lower(),
                rec.state.location_label(),
                repr(rec.state.edge_progress),
                repr(rec.state.trip_distance),
                repr(rec.state.energy),
                int(rec.inp.gamma), int(rec.inp.charge), rec.inp.xi,
            ])
    return rows


_TRAJECTORY_FIELDS = ["car", "step", "mode", "location", "eps", "trip",
                      "energy", "gamma", "y", "xi"]


def _write_trajectories(out_dir: str, trajectories) -> str:
    path = os.path.join(out_dir, "trajectory.csv")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_TRAJECTORY_FIELDS)
        writer.writerows(_trajectory_rows(trajectories))
    return path


def _print_cost_table(cost: CostBreakdown) -> None:
    for label in ("station", "electricity", "congestion", "charging_time",
                  "waiting_time", "degradation", "total"):
        print(f"  {label:<14} {getattr(cost, label)!r}")


def _print_mode_summary(trajectories) -> None:
    letters = {"charging": "C", "waiting": "W", "driving": "D"}
    for traj in trajectories:
        marks = " ".join(letters[rec.mode.name.lower()] for rec in traj.steps)
        print(f"  car {traj.car_id}: {marks}")


def _plans_to_doc(plans, n_nodes: int) -> dict:
    doc = []
    for plan in plans:
        entries = []
        for inp in plan:
            i, j = decode_edge(inp.xi, n_nodes)
            entries.append({"g": int(inp.gamma), "y": int(inp.charge),
                            "edge": [i, j]})
        doc.append(entries)
    return {"plans": doc}


def _plans_from_doc(doc: dict, n_nodes: int):
    if not isinstance(doc, dict) or "plans" not in doc:
        raise ScenarioError("plan file must be an object with a 'plans' key")
    plans = []
    for c, entries in enumerate(doc["plans"], start=1):
        plan = []
        for k, entry in enumerate(entries):
            try:
                i, j = entry["edge"]
                inp = DiscreteInput(gamma=bool(entry["g"]),
                                    charge=bool(entry["y"]),
                                    xi=edge_index(int(i), int(j), n_nodes))
            except (KeyError, TypeError, ValueError) as exc:
                raise ScenarioError(
                    f"plan for car {c}, step {k}: {exc}") from exc
            plan.append(inp)
        plans.append(tuple(plan))
    return tuple(plans)


def _write_plans(out_dir: str, plans, n_nodes: int) -> str:
    path = os.path.join(out_dir, "plan.json")
    with open(path, "w") as fh:
        json.dump(_plans_to_doc(plans, n_nodes), fh, sort_keys=True, indent=2)
        fh.write("\n")
    return path


def _base_report(scenario, command: str) -> dict:
    return {
        "command": command,
        "scenario_digest": scenario.digest,
        "version": __version__,
    }


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

def cmd_simulate(args) -> int:
    scenario = load_scenario(args.scenario)
    problem = ScheduleProblem.from_scenario(scenario)
    with open(args.plans) as fh:
        doc = json.load(fh)
    plans = _plans_from_doc(doc, scenario.graph.n_nodes)
    if len(plans) != len(problem.cars):
        raise ScenarioError(
            f"plan file has {len(plans)} plans for {len(problem.cars)} cars")
    for c, plan in enumerate(plans, start=1):
        if len(plan) != problem.horizon:
            raise ScenarioError(
                f"plan for car {c} has {len(plan)} steps; "
                f"horizon is {problem.horizon}")

    ctx = WorldContext(graph=problem.graph, step=0,
                       station_occupancy=problem.externals(),
                       params=problem.sim_params())
    try:
        trajectories = simulate_execution(problem.initial_states(), plans, ctx)
    except InfeasibleStepError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return 2
    cost = total_cost(trajectories, problem.graph, problem.weights,
                      problem.battery, problem.station_cost_variant)
    print(f"simulated {len(plans)} cars for {problem.horizon} steps; "
          f"total cost {cost.total!r}")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        report = _base_report(scenario, "simulate")
        report["cost"] = _cost_dict(cost)
        report["horizon"] = problem.horizon
        report["cars"] = len(problem.cars)
        report["trajectory_fields"] = _TRAJECTORY_FIELDS
        report["trajectory"] = _trajectory_rows(trajectories)
        _write_trajectories(args.out, trajectories)
        _write_report(args.out, report)
        print(f"wrote trajectory.csv and report.json to {args.out}")
    return 0


# ---------------------------------------------------------------------------
# optimize
# ---------------------------------------------------------------------------

def _solution_exit(sol: Solution) -> int:
    if sol.status == "optimal":
        return 0
    if sol.plans is not None:  # budget ran out but an incumbent exists
        return 0
    return 2


def cmd_optimize(args) -> int:
    scenario = load_scenario(args.scenario)
    problem = ScheduleProblem.from_scenario(scenario)

    if args.export_lp:
        from .milp import build_milp, write_lp
        model = build_milp(problem)
        write_lp(model, args.export_lp)
        print(f"wrote LP model ({model.binary_count()} binaries, "
              f"{len(model.rows)} rows) to {args.export_lp}")
        if args.export_only:
            return 0

    if args.rhc > 0:
        result = rhc_loop(problem, replan_every=args.rhc,
                          max_plans=args.max_plans, budget=args.budget,
                          backend=args.backend)
        status = result.status
        trajectories = result.trajectories
        cost = result.cost
        nodes = sum(s.nodes_explored for s in result.solutions)
        wall = sum(s.wall_time_s for s in result.solutions)
        backend = result.solutions[0].backend if result.solutions else "none"
        plans = None
        exit_code = 0 if status == "completed" else 2
        print(f"receding horizon: {status} after {result.rounds} rounds, "
              f"{result.executed_steps} steps executed")
    else:
        sol = solve_exact(problem, budget=args.budget, backend=args.backend)
        status = sol.status
        trajectories = sol.trajectories
        cost = sol.cost
        nodes = sol.nodes_explored
        wall = sol.wall_time_s
        backend = sol.backend
        plans = sol.plans
        exit_code = _solution_exit(sol)
        print(f"search: {status}, {nodes} nodes, backend {backend}")

    if cost is not None:
        _print_cost_table(cost)
    if trajectories is not None:
        _print_mode_summary(trajectories)

    oracle_checked = False
    if args.oracle and exit_code == 0 and plans is not None:
        oracle = brute_force_oracle(problem, limit=args.oracle_limit)
        oracle_checked = True
        gap = abs(oracle.cost.total - cost.total)
        scale = max(1.0, abs(oracle.cost.total))
        if oracle.status != status or gap > ORACLE_TOLERANCE * scale:
            print(f"oracle mismatch: search {status} {cost.total!r} vs "
                  f"oracle {oracle.status} {oracle.cost.total!r}",
                  file=sys.stderr)
            return 3
        print(f"oracle agrees ({oracle.nodes_explored} plans priced)")

    if args.out:
        os.makedirs(args.out, exist_ok=True)
        report = _base_report(scenario, "optimize")
        report.update({
            "backend": backend,
            "cost": _cost_dict(cost),
            "nodes_explored": nodes,
            "oracle_checked": oracle_checked,
            "parameters": {
                "budget": args.budget,
                "max_plans": args.max_plans,
                "oracle": bool(args.oracle),
                "rhc": args.rhc,
            },
            "status": status,
            "wall_time_s": wall,
        })
        if trajectories is not None:
            report["trajectory_fields"] = _TRAJECTORY_FIELDS
            report["trajectory"] = _trajectory_rows(trajectories)
            _write_trajectories(args.out, trajectories)
        if plans is not None:
            _write_plans(args.out, plans, scenario.graph.n_nodes)
        _write_report(args.out, report)
        print(f"wrote results to {args.out}")
    if exit_code != 0:
        print("no feasible schedule within the horizon", file=sys.stderr)
    return exit_code


# ---------------------------------------------------------------------------
# bench
# ---------------------------------------------------------------------------

def ring_problem(n_nodes: int, n_cars: int, horizon: int) -> ScheduleProblem:
    """Synthetic ring benchmark: every hop is one step, goal two hops on.

    Each node hosts a single charger; cars are spread around the ring and
    have enough charge to finish without plugging in, so charging branches
    stay live in the search without being mandatory.
    """
    if n_nodes < 4:
        raise ConfigError("ring benchmarks need at least 4 nodes")
    if horizon < 2:
        raise ConfigError("ring benchmarks need a horizon of at least 2")
    base_speed = 30.0
    edges = {}
    for i in range(1, n_nodes + 1):
        j = i % n_nodes + 1
        edges[(i, j)] = (base_speed, 30.0, 4.0)
        edges[(j, i)] = (base_speed, 30.0, 4.0)
    graph = HighwayGraph.from_edges(n_nodes, [1] * n_nodes, edges)
    battery = BatteryParams(e_min=6.0, e_max=60.0, e_knee=48.0, p_max=40.0,
                            chg_m=184.0, chg_n=3.0, deg_a=2e-06, deg_b=1e-04,
                            deg_c=2e-03)
    motion = MotionParams(base_speed=base_speed, t_s=30.0, d_max=400.0)
    weights = CostWeights(station_unit_cost=0.05, congestion_weight=0.1,
                          charging_time_weight=0.2, waiting_time_weight=0.15)
    cars = []
    for c in range(n_cars):
        start = (c * 2) % n_nodes + 1
        goal = (start + 1) % n_nodes + 1
        cars.append(CarSpec(start_node=start, end_node=goal,
                            initial_energy=22.0))
    return ScheduleProblem(graph=graph, battery=battery, motion=motion,
                           weights=weights, cars=tuple(cars), horizon=horizon,
                           drive_power_kw=15.0)


def _bench_cell(cell: tuple) -> list[dict]:
    """One benchmark cell: a discarded warmup solve, then timed repeats."""
    n_nodes, n_cars, horizon, backend, repeats, budget = cell
    problem = ring_problem(n_nodes, n_cars, horizon)
    solve_exact(problem, budget=budget, backend=backend)  # warmup, discarded
    rows = []
    for repeat in range(repeats):
        start = time.perf_counter()
        sol = solve_exact(problem, budget=budget, backend=backend)
        wall = time.perf_counter() - start
        rows.append({
            "nodes": n_nodes, "cars": n_cars, "horizon": horizon,
            "backend": sol.backend, "repeat": repeat, "status": sol.status,
            "cost": "" if sol.cost is None else repr(sol.cost.total),
            "nodes_explored": sol.nodes_explored, "wall_s": repr(wall),
        })
    return rows


def _int_list(text: str) -> list[int]:
    try:
        values = [int(part) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not a comma-separated int list: {text!r}") from exc
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values


def cmd_bench(args) -> int:
    backends = [b.strip() for b in args.backends.split(",") if b.strip()]
    cells = [(n, args.cars, h, backend, args.repeats, args.budget)
             for backend in backends
             for n in args.nodes
             for h in args.horizons]
    threads = int(os.environ.get("CHARGE_NET_THREADS", "1"))
    if threads > 1 and len(cells) > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=threads) as pool:
            cell_rows = list(pool.map(_bench_cell, cells))
    else:
        cell_rows = [_bench_cell(cell) for cell in cells]
    rows = [row for rows_ in cell_rows for row in rows_]
    rows.sort(key=lambda r: (r["backend"], r["nodes"], r["cars"],
                             r["horizon"], r["repeat"]))

    fieldnames = ["nodes", "cars", "horizon", "backend", "repeat", "status",
                  "cost", "nodes_explored", "wall_s"]
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=fieldnames)
    writer.writeheader()
    writer.writerows(rows)
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(buffer.getvalue())
        print(f"wrote {len(rows)} rows to {args.out}")
    else:
        sys.stdout.write(buffer.getvalue())

    # median wall time per (backend, nodes, horizon), for quick reading
    groups: dict[tuple, list[float]] = {}
    for row in rows:
        groups.setdefault((row["backend"], row["nodes"], row["horizon"]),
                          []).append(float(row["wall_s"]))
    print("backend nodes horizon median_wall_s")
    for key in sorted(groups):
        med = statistics.median(groups[key])
        print(f"{key[0]:>7} {key[1]:>5} {key[2]:>7} {med:.6f}")
    return 0


# ---------------------------------------------------------------------------
# check
# ---------------------------------------------------------------------------

def cmd_check(args) -> int:
    scenario = load_scenario(args.scenario)
    report = check_properties(scenario, depth=args.depth,
                              samples=args.samples, seed=args.seed)
    verdicts = [("non-blocking", report.non_blocking),
                ("domain-preserving", report.domain_preserving),
                ("non-zeno", report.non_zeno)]
    for name, verdict in verdicts:
        flag = "PASS" if verdict.passed else "FAIL"
        print(f"{flag} {name}: {verdict.detail}")
    print(f"nondeterminism witnessed: {report.nondeterminism_witnessed} "
          f"({report.states_explored} states explored)")
    return 0 if report.all_passed else 1


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="chargenet",
                     description="schedule electric cars over a charging "
                                 "network and audit the results")
    parser.add_argument("--version", action="version",
                        version=f"chargenet {__version__}")
    sub = parser.add_subparsers(dest="command", required=True,
                                parser_class=_Parser)

    sim = sub.add_parser("simulate", help="replay a plan file step by step")
    sim.add_argument("--scenario", required=True)
    sim.add_argument("--plans", required=True,
                     help="JSON plan file, as written by optimize")
    sim.add_argument("--out", help="directory for trajectory.csv/report.json")
    sim.set_defaults(func=cmd_simulate)

    opt = sub.add_parser("optimize", help="find a cost-minimal schedule")
    opt.add_argument("--scenario", required=True)
    opt.add_argument("--out", help="directory for plan/trajectory/report")
    opt.add_argument("--budget", type=int, default=1_000_000,
                     help="search node budget (default 1e6)")
    opt.add_argument("--backend", choices=["auto", "c", "py"], default=None)
    opt.add_argument("--oracle", action="store_true",
                     help="cross-check against exhaustive enumeration")
    opt.add_argument("--oracle-limit", type=int, default=10_000_000,
                     help="refuse the oracle above this plan-count bound")
    opt.add_argument("--rhc", type=int, default=0, metavar="STEPS",
                     help="replan every STEPS executed steps (0 = one shot)")
    opt.add_argument("--max-plans", type=int, default=50,
                     help="replanning rounds allowed with --rhc")
    opt.add_argument("--export-lp", metavar="PATH",
                     help="also write the model in LP format")
    opt.add_argument("--export-only", action="store_true",
                     help="with --export-lp: skip the solve")
    opt.set_defaults(func=cmd_optimize)

    ben = sub.add_parser("bench", help="time the solver on synthetic rings")
    ben.add_argument("--nodes", type=_int_list, default=[5],
                     help="comma-separated ring sizes (default 5)")
    ben.add_argument("--cars", type=int, default=2)
    ben.add_argument("--horizons", type=_int_list, default=[4, 6],
                     help="comma-separated horizons (default 4,6)")
    ben.add_argument("--repeats", type=int, default=3)
    ben.add_argument("--budget", type=int, default=20_000_000)
    ben.add_argument("--backends", default="auto",
                     help="comma-separated kernel names (default auto)")
    ben.add_argument("--out", help="CSV path (default: print to stdout)")
    ben.set_defaults(func=cmd_bench)

    chk = sub.add_parser("check", help="verify automaton properties on a "
                                       "scenario")
    chk.add_argument("--scenario", required=True)
    chk.add_argument("--depth", type=int, default=8)
    chk.add_argument("--samples", type=int, default=200)
    chk.add_argument("--seed", type=int, default=0)
    chk.set_defaults(func=cmd_check)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except OracleSizeError as exc:
        print(f"oracle refused: {exc}", file=sys.stderr)
        return 4
    except (ScenarioError, ConfigError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 4
    except FileNotFoundError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 4
    except json.JSONDecodeError as exc:
        print(f"input error: invalid JSON: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
