"""Trip scheduling: exact search, a brute-force oracle, and replanning.

solve_exact packs a ScheduleProblem into flat arrays and hands it to the
branch-and-bound kernel (compiled when available, pure Python otherwise).
The winning plan is then replayed through the simulator and priced by the
cost module; that replayed breakdown is the authoritative result, the
kernel's accumulated figure is only sanity-checked against it.

brute_force_oracle answers the same question by exhaustive enumeration
driven by the automaton primitives, never touching the kernel. It exists
so the two routes can be compared in tests; keep it that way.

rhc_loop closes the loop: plan over the horizon, execute a prefix, let a
disturbance hook perturb energies and station occupancy, replan from the
evolved states, and finally price the whole executed trace as one run.
"""

from __future__ import annotations

import dataclasses
import heapq
import math
import time
from dataclasses import dataclass
from typing import Callable, Sequence

from ._backend import get_kernel
from ._kernel_py import STATUS_BUDGET, STATUS_INFEASIBLE, STATUS_OPTIMAL, UNREACHABLE
from .automaton import (CarTrajectory, DiscreteInput, Mode, SimParams,
                        TrajectoryStep, WorldContext, admissible_inputs,
                        mode_select, simulate_execution, transition)
from .costs import ABS_DEVIATION, CostBreakdown, CostWeights, total_cost
from .errors import ConfigError, OracleSizeError
from .network import CarSpec, HighwayGraph
from .vehicle import BatteryParams, MotionParams, VehicleState

_STATUS_NAME = {
    STATUS_OPTIMAL: "optimal",
    STATUS_INFEASIBLE: "infeasible",
    STATUS_BUDGET: "budget-exhausted",
}


# ---------------------------------------------------------------------------
# problem and solution containers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScheduleProblem:
    """Everything a solver needs: network, fleet, physics, prices, horizon."""

    graph: HighwayGraph
    battery: BatteryParams
    motion: MotionParams
    weights: CostWeights
    cars: tuple[CarSpec, ...]
    horizon: int
    drive_power_kw: float
    congestion_coupling: bool = False
    external_occupancy: tuple[int, ...] | None = None
    station_cost_variant: str = ABS_DEVIATION

    @property
    def t_s(self) -> float:
        return self.motion.t_s

    @classmethod
    def from_scenario(cls, scenario,
                      external_occupancy: Sequence[int] | None = None
                      ) -> "ScheduleProblem":
        ext = tuple(external_occupancy) if external_occupancy is not None else None
        return cls(graph=scenario.graph, battery=scenario.battery,
                   motion=scenario.motion, weights=scenario.weights,
                   cars=tuple(scenario.cars), horizon=scenario.horizon,
                   drive_power_kw=scenario.drive_power_kw,
                   congestion_coupling=scenario.congestion_coupling,
                   external_occupancy=ext)

    def externals(self) -> tuple[int, ...]:
        if self.external_occupancy is None:
            return (0,) * self.graph.n_nodes
        return self.external_occupancy

    def sim_params(self) -> SimParams:
        return SimParams(battery=self.battery, motion=self.motion,
                         drive_power_kw=self.drive_power_kw,
                         congestion_coupling=self.congestion_coupling)

    def initial_states(self) -> list[VehicleState]:
        return [VehicleState.at_node(car.start_node, car.initial_energy)
                for car in self.cars]

    def validate(self) -> list[str]:
        """Return a list of structural problems; empty means usable."""
        issues = []
        n = self.graph.n_nodes
        if not isinstance(self.horizon, int) or self.horizon < 1:
            issues.append(f"horizon must be a positive integer, got {self.horizon}")
        if not self.cars:
            issues.append("at least one car is required")
        if self.drive_power_kw <= 0:
            issues.append(f"drive_power_kw must be positive, got {self.drive_power_kw}")
        for idx, car in enumerate(self.cars):
            label = f"car {idx + 1}"
            for field_name, node in (("start", car.start_node), ("end", car.end_node)):
                if not 1 <= node <= n:
                    issues.append(f"{label}: {field_name} node {node} outside 1..{n}")
            if not self.battery.e_min <= car.initial_energy <= self.battery.e_max:
                issues.append(
                    f"{label}: initial energy {car.initial_energy} outside "
                    f"[{self.battery.e_min}, {self.battery.e_max}]")
        if self.external_occupancy is not None:
            if len(self.external_occupancy) != n:
                issues.append(
                    f"external_occupancy has {len(self.external_occupancy)} "
                    f"entries for {n} nodes")
            else:
                for node0, occ in enumerate(self.external_occupancy):
                    if occ < 0 or occ != int(occ):
                        issues.append(
                            f"external_occupancy[{node0}] must be a "
                            f"nonnegative integer, got {occ}")
                    elif occ > self.graph.station_capacity[node0]:
                        issues.append(
                            f"external_occupancy at node {node0 + 1} is {occ}, "
                            f"over capacity {self.graph.station_capacity[node0]}")
        for node0 in range(n):
            if (self.graph.station_capacity[node0] > 0
                    and self.graph.preferred_capacity[node0] <= 0):
                issues.append(
                    f"node {node0 + 1} has chargers but no positive "
                    f"preferred occupancy")
        if self.weights.electricity_enabled:
            price = self.weights.electricity_price
            if price is None or len(price) != n:
                issues.append("electricity price table must have one row per node")
            elif any(len(row) < self.horizon for row in price):
                issues.append(
                    f"electricity price rows must cover the horizon "
                    f"({self.horizon} steps)")
        if self.station_cost_variant not in ("absolute-deviation", "paper-literal"):
            issues.append(
                f"unknown station cost variant {self.station_cost_variant!r}")
        return issues


@dataclass(frozen=True)
class Solution:
    """Outcome of one solve: plan, its replayed trajectories, and cost."""

    status: str
    plans: tuple[tuple[DiscreteInput, ...], ...] | None
    trajectories: tuple[CarTrajectory, ...] | None
    cost: CostBreakdown | None
    nodes_explored: int
    wall_time_s: float
    backend: str
    internal_cost: float = math.nan


# ---------------------------------------------------------------------------
# packing a problem into kernel arrays
# ---------------------------------------------------------------------------

def _steps_for_length(length: float, base_speed: float) -> int:
    # lower bound on driving steps; shaved by an epsilon so float noise in
    # accumulated progress can never make the bound overestimate
    steps = int(math.ceil(length / base_speed - 1e-9))
    return max(1, steps)


def _distance_steps(graph: HighwayGraph, goal0: int,
                    rev: list[list[tuple[int, int]]]) -> list[int]:
    """Minimum driving steps from every node to goal0 (both 0-based)."""
    dist = [UNREACHABLE] * graph.n_nodes
    dist[goal0] = 0
    heap = [(0, goal0)]
    while heap:
        d, v = heapq.heappop(heap)
        if d > dist[v]:
            continue
        for u, w in rev[v]:
            nd = d + w
            if nd < dist[u]:
                dist[u] = nd
                heapq.heappush(heap, (nd, u))
    return dist


def _pack(problem: ScheduleProblem,
          states: Sequence[VehicleState]) -> dict:
    graph = problem.graph
    n = graph.n_nodes
    p = len(states)
    h = problem.horizon
    battery = problem.battery
    motion = problem.motion
    weights = problem.weights

    edge_len = [0.0] * (n * n)
    edge_steps = [0] * (n * n)
    rev: list[list[tuple[int, int]]] = [[] for _ in range(n)]
    for (i, j) in graph.edges():
        length = graph.length(i, j)
        flat = (i - 1) * n + (j - 1)
        edge_len[flat] = length
        w = _steps_for_length(length, motion.base_speed)
        edge_steps[flat] = w
        rev[j - 1].append((i - 1, w))

    neigh_off = [0] * (n + 1)
    neigh: list[int] = []
    for node in range(1, n + 1):
        for j in graph.neighbors(node):
            neigh.append(j - 1)
        neigh_off[node] = len(neigh)

    dist_cache: dict[int, list[int]] = {}
    dist: list[int] = []
    for car in problem.cars:
        goal0 = car.end_node - 1
        if goal0 not in dist_cache:
            dist_cache[goal0] = _distance_steps(graph, goal0, rev)
        dist.extend(dist_cache[goal0])

    price: list[float] = []
    elec_on = 1 if weights.electricity_enabled else 0
    if elec_on:
        table = weights.electricity_price
        for k in range(h):
            for node0 in range(n):
                price.append(float(table[node0][k]))

    ext = list(problem.externals())
    pos0, ei0, ej0, eps0, trip0, wasc0 = [], [], [], [], [], []
    e0 = []
    prevu0 = [0] * n
    for st in states:
        e0.append(st.energy)
        trip0.append(st.trip_distance)
        wasc0.append(1 if st.mode is Mode.CHARGING else 0)
        if st.node is not None:
            pos0.append(st.node - 1)
            ei0.append(0)
            ej0.append(0)
            eps0.append(0.0)
            if st.mode is Mode.CHARGING:
                prevu0[st.node - 1] += 1
        else:
            pos0.append(-1)
            ei0.append(st.edge[0] - 1)
            ej0.append(st.edge[1] - 1)
            eps0.append(st.edge_progress)

    return {
        "n": n, "h": h, "p": p,
        "edge_len": edge_len, "edge_steps": edge_steps,
        "neigh_off": neigh_off, "neigh": neigh,
        "cap": list(graph.station_capacity),
        "pref": [float(s) for s in graph.preferred_capacity],
        "ext": ext,
        "base_speed": motion.base_speed,
        "ts": motion.t_s,
        "drive_de": problem.drive_power_kw * motion.t_s / 60.0,
        "chg_pmax_de": battery.p_max * motion.t_s / 60.0,
        "e_min": battery.e_min, "e_max": battery.e_max,
        "e_knee": battery.e_knee,
        "chg_m": battery.chg_m, "chg_n": battery.chg_n,
        "deg_a": battery.deg_a, "deg_b": battery.deg_b, "deg_c": battery.deg_c,
        "w_station": weights.station_unit_cost,
        "w_cong": weights.congestion_weight,
        "w_chg": weights.charging_time_weight,
        "w_wait": weights.waiting_time_weight,
        "elec_on": elec_on, "price": price,
        "goal": [car.end_node - 1 for car in problem.cars],
        "e0": e0, "dist": dist, "d_max": motion.d_max,
        "pos0": pos0, "ei0": ei0, "ej0": ej0, "eps0": eps0,
        "trip0": trip0, "wasc0": wasc0, "prevu0": prevu0,
    }


def _encode_plans(plans: Sequence[Sequence[DiscreteInput]],
                  horizon: int, p: int) -> list[int]:
    flat = [0] * (horizon * p)
    for c, plan in enumerate(plans):
        if len(plan) != horizon:
            raise ValueError(f"seed plan for car {c + 1} has {len(plan)} "
                             f"steps, expected {horizon}")
        for k, inp in enumerate(plan):
            flat[k * p + c] = inp.xi * 4 + int(inp.charge) * 2 + int(inp.gamma)
    return flat


def _decode_plans(flat: Sequence[int], p: int,
                  horizon: int) -> tuple[tuple[DiscreteInput, ...], ...]:
    plans = []
    for c in range(p):
        plan = []
        for k in range(horizon):
            act = flat[k * p + c]
            plan.append(DiscreteInput(gamma=bool(act & 1),
                                      charge=bool((act >> 1) & 1),
                                      xi=act >> 2))
        plans.append(tuple(plan))
    return tuple(plans)


def _require_solvable(problem: ScheduleProblem) -> None:
    issues = problem.validate()
    if issues:
        raise ConfigError("; ".join(issues))
    if problem.congestion_coupling:
        raise ConfigError(
            "exact search assumes free-flow motion; congestion-coupled "
            "dynamics can only be simulated, not solved")


def _replay(problem: ScheduleProblem, states: Sequence[VehicleState],
            plans: Sequence[Sequence[DiscreteInput]]
            ) -> tuple[tuple[CarTrajectory, ...], CostBreakdown]:
    ctx = WorldContext(graph=problem.graph, step=0,
                       station_occupancy=problem.externals(),
                       params=problem.sim_params())
    trajectories = tuple(simulate_execution(states, plans, ctx))
    breakdown = total_cost(trajectories, problem.graph, problem.weights,
                           problem.battery, problem.station_cost_variant)
    return trajectories, breakdown


# ---------------------------------------------------------------------------
# exact solve
# ---------------------------------------------------------------------------

def solve_exact(problem: ScheduleProblem, *,
                budget: int = 1_000_000,
                backend: str | None = None,
                prune_cost: bool = True,
                prune_hops: bool = True,
                prune_energy: bool = True,
                heuristic_order: bool = True,
                seed_plans: Sequence[Sequence[DiscreteInput]] | None = None,
                initial_states: Sequence[VehicleState] | None = None
                ) -> Solution:
    """Minimize total cost over the horizon by branch and bound.

    Returns the cheapest plan that parks every car at its goal by the last
    step, with the cost of its replayed execution. seed_plans installs an
    incumbent before the search starts (it must itself be feasible);
    initial_states overrides the cold start derived from problem.cars,
    which is how the replanning loop resumes mid-trip.
    """
    _require_solvable(problem)
    if budget < 0:
        raise ValueError(f"budget must be nonnegative, got {budget}")
    states = (list(initial_states) if initial_states is not None
              else problem.initial_states())
    if len(states) != len(problem.cars):
        raise ValueError(f"{len(states)} initial states for "
                         f"{len(problem.cars)} cars")

    kernel, label = get_kernel(backend)
    pk = _pack(problem, states)
    opts = {
        "budget": int(budget),
        "prune_cost": int(prune_cost),
        "prune_hops": int(prune_hops),
        "prune_energy": int(prune_energy),
        "heuristic_order": int(heuristic_order),
        "has_seed": 0,
        "seed_cost": 0.0,
        "seed_plan": [],
    }
    if seed_plans is not None:
        _, seed_breakdown = _replay(problem, states, seed_plans)
        opts["has_seed"] = 1
        opts["seed_cost"] = seed_breakdown.total
        opts["seed_plan"] = _encode_plans(seed_plans, problem.horizon,
                                          len(states))

    start_t = time.perf_counter()
    res = kernel.solve(pk, opts)
    wall = time.perf_counter() - start_t

    status = _STATUS_NAME[res["status"]]
    if not res["has_best"]:
        return Solution(status=status, plans=None, trajectories=None,
                        cost=None, nodes_explored=res["nodes"],
                        wall_time_s=wall, backend=label)

    plans = _decode_plans(res["plan"], len(states), problem.horizon)
    trajectories, breakdown = _replay(problem, states, plans)
    internal = res["cost"]
    if abs(breakdown.total - internal) > 1e-6 * max(1.0, abs(breakdown.total)):
        raise RuntimeError(
            f"search cost {internal!r} disagrees with replayed cost "
            f"{breakdown.total!r}; the kernel and the simulator have diverged")
    return Solution(status=status, plans=plans, trajectories=trajectories,
                    cost=breakdown, nodes_explored=res["nodes"],
                    wall_time_s=wall, backend=label, internal_cost=internal)


# ---------------------------------------------------------------------------
# brute-force oracle
# ---------------------------------------------------------------------------

def oracle_size_bound(problem: ScheduleProblem) -> int:
    """Upper bound on plans the oracle may enumerate: (2+maxdeg)^(p*H)."""
    graph = problem.graph
    max_deg = max((len(graph.neighbors(node))
                   for node in range(1, graph.n_nodes + 1)), default=0)
    return (2 + max_deg) ** (len(problem.cars) * problem.horizon)


def brute_force_oracle(problem: ScheduleProblem, *,
                       limit: int = 10_000_000,
                       initial_states: Sequence[VehicleState] | None = None
                       ) -> Solution:
    """Exhaustive reference solver, independent of the search kernel.

    Enumerates every admissible joint plan through the automaton layer in
    lexicographic input order, prices each complete one through the same
    simulate-then-total pipeline the exact solver reports through, and
    keeps the cheapest (ties broken lexicographically). Refuses problems
    whose worst-case enumeration exceeds ``limit`` plans.
    """
    _require_solvable(problem)
    bound = oracle_size_bound(problem)
    if bound > limit:
        raise OracleSizeError(bound, limit)

    graph = problem.graph
    params = problem.sim_params()
    horizon = problem.horizon
    states0 = (list(initial_states) if initial_states is not None
               else problem.initial_states())
    p = len(states0)
    ext = problem.externals()
    goals = [car.end_node for car in problem.cars]

    plugged = [0] * graph.n_nodes
    for st in states0:
        if st.mode is Mode.CHARGING and st.node is not None:
            plugged[st.node - 1] += 1
    occ0 = tuple(b + o for b, o in zip(ext, plugged))

    chosen: list[list[DiscreteInput | None]] = [
        [None] * horizon for _ in range(p)]
    best: dict = {"cost": math.inf, "plans": None, "key": None}
    counters = {"nodes": 0}

    def plan_key(plans) -> tuple:
        return tuple(plans[c][k].code() for c in range(p) for k in range(horizon))

    def recurse(k: int, c: int, states: list[VehicleState],
                prev_occ: tuple[int, ...], committed: list[int]) -> None:
        if c == p:
            next_states = states
            charging = [0] * graph.n_nodes
            for st in next_states:
                if st.mode is Mode.CHARGING:
                    charging[st.node - 1] += 1
            new_prev = tuple(b + o for b, o in zip(ext, charging))
            recurse(k + 1, 0, next_states, new_prev, list(ext))
            return
        if k == horizon:
            for idx, st in enumerate(states):
                if st.node != goals[idx]:
                    return
            plans = tuple(tuple(chosen[i]) for i in range(p))
            _, breakdown = _replay(problem, states0, plans)
            cost = breakdown.total
            key = plan_key(plans)
            scale = max(1.0, abs(best["cost"])) if best["plans"] else 1.0
            if best["plans"] is None or cost < best["cost"] - 1e-12 * scale:
                best.update(cost=cost, plans=plans, key=key)
            elif abs(cost - best["cost"]) <= 1e-12 * scale and key < best["key"]:
                best.update(cost=cost, plans=plans, key=key)
            return
        ctx = WorldContext(graph=graph, step=k, station_occupancy=prev_occ,
                           params=params, committed=tuple(committed))
        for inp in admissible_inputs(states[c], ctx):
            counters["nodes"] += 1
            new_state = transition(states[c], inp, ctx, params)
            chosen[c][k] = inp
            new_committed = committed
            if mode_select(inp) is Mode.CHARGING:
                new_committed = list(committed)
                new_committed[states[c].node - 1] += 1
            recurse(k, c + 1, states[:c] + [new_state] + states[c + 1:],
                    prev_occ, new_committed)
            chosen[c][k] = None

    start_t = time.perf_counter()
    recurse(0, 0, states0, occ0, list(ext))
    wall = time.perf_counter() - start_t

    if best["plans"] is None:
        return Solution(status="infeasible", plans=None, trajectories=None,
                        cost=None, nodes_explored=counters["nodes"],
                        wall_time_s=wall, backend="oracle")
    trajectories, breakdown = _replay(problem, states0, best["plans"])
    return Solution(status="optimal", plans=best["plans"],
                    trajectories=trajectories, cost=breakdown,
                    nodes_explored=counters["nodes"], wall_time_s=wall,
                    backend="oracle", internal_cost=breakdown.total)


# ---------------------------------------------------------------------------
# receding-horizon control
# ---------------------------------------------------------------------------

@dataclass
class RhcState:
    """What a disturbance hook may observe and perturb between rounds.

    energies and external_occupancy are read back after the hook returns;
    states is read-only context. step is the global index of the next step
    to be planned.
    """

    step: int
    states: tuple[VehicleState, ...]
    energies: list[float]
    external_occupancy: list[int]


@dataclass(frozen=True)
class RhcResult:
    status: str  # "completed", "max-plans", or "infeasible"
    trajectories: tuple[CarTrajectory, ...]
    cost: CostBreakdown | None
    rounds: int
    executed_steps: int
    solutions: tuple[Solution, ...]


def rhc_loop(problem: ScheduleProblem, *,
             replan_every: int = 1,
             max_plans: int = 50,
             budget: int = 1_000_000,
             backend: str | None = None,
             disturbance_hook: Callable[[RhcState], None] | None = None
             ) -> RhcResult:
    """Plan, execute a prefix, perturb, replan; stop when all cars arrive.

    Each round solves the full horizon from the current states, executes
    the first replan_every steps, then lets the hook adjust energies and
    external occupancy before the next round. The executed trace is priced
    in one piece at the end, so the quadratic time penalties span rounds.
    """
    _require_solvable(problem)
    if not 1 <= replan_every <= problem.horizon:
        raise ValueError(f"replan_every must be in 1..{problem.horizon}, "
                         f"got {replan_every}")
    if max_plans < 1:
        raise ValueError(f"max_plans must be positive, got {max_plans}")

    graph = problem.graph
    goals = [car.end_node for car in problem.cars]
    cur_states = problem.initial_states()
    initial0 = list(cur_states)
    ext = list(problem.externals())
    records: list[list[TrajectoryStep]] = [[] for _ in cur_states]
    solutions: list[Solution] = []
    global_k = 0
    rounds = 0
    status = "max-plans"

    def all_arrived() -> bool:
        return all(st.node == goal for st, goal in zip(cur_states, goals))

    while rounds < max_plans:
        if all_arrived():
            status = "completed"
            break
        round_problem = dataclasses.replace(
            problem, external_occupancy=tuple(ext))
        sol = solve_exact(round_problem, budget=budget, backend=backend,
                          initial_states=cur_states)
        solutions.append(sol)
        if sol.plans is None:
            status = "infeasible"
            break
        prefix = tuple(plan[:replan_every] for plan in sol.plans)
        ctx = WorldContext(graph=graph, step=0, station_occupancy=tuple(ext),
                           params=problem.sim_params())
        round_trajs = simulate_execution(cur_states, prefix, ctx,
                                         problem.sim_params())
        for c, traj in enumerate(round_trajs):
            for rec in traj.steps:
                records[c].append(TrajectoryStep(rec.step + global_k, rec.inp,
                                                 rec.mode, rec.state))
            cur_states[c] = traj.steps[-1].state
        global_k += replan_every
        rounds += 1

        if disturbance_hook is not None:
            view = RhcState(step=global_k, states=tuple(cur_states),
                            energies=[st.energy for st in cur_states],
                            external_occupancy=list(ext))
            disturbance_hook(view)
            if len(view.energies) != len(cur_states):
                raise ConfigError("hook must not resize the energies list")
            if len(view.external_occupancy) != graph.n_nodes:
                raise ConfigError("hook must not resize external_occupancy")
            for node0, occ in enumerate(view.external_occupancy):
                if occ < 0 or occ != int(occ):
                    raise ConfigError(
                        f"hook set external_occupancy[{node0}] to {occ}")
                if occ > graph.station_capacity[node0]:
                    raise ConfigError(
                        f"hook put {occ} external cars at node {node0 + 1}, "
                        f"over capacity {graph.station_capacity[node0]}")
            ext = [int(occ) for occ in view.external_occupancy]
            for c, energy in enumerate(view.energies):
                if not problem.battery.e_min <= energy <= problem.battery.e_max:
                    raise ConfigError(
                        f"hook set car {c + 1} energy to {energy}, outside "
                        f"[{problem.battery.e_min}, {problem.battery.e_max}]")
                if energy != cur_states[c].energy:
                    cur_states[c] = dataclasses.replace(cur_states[c],
                                                        energy=energy)
    if status == "max-plans" and all_arrived():
        status = "completed"

    if problem.weights.electricity_enabled and global_k > 0:
        cols = min(len(row) for row in problem.weights.electricity_price)
        if cols < global_k:
            raise ConfigError(
                f"electricity price table covers {cols} steps but the loop "
                f"executed {global_k}; extend the table for closed-loop runs")

    trajectories = tuple(
        CarTrajectory(car_id=c + 1, initial=initial0[c],
                      steps=tuple(records[c]), t_s=problem.motion.t_s)
        for c in range(len(cur_states)))
    cost = None
    if global_k > 0:
        cost = total_cost(trajectories, graph, problem.weights,
                          problem.battery, problem.station_cost_variant)
    return RhcResult(status=status, trajectories=trajectories, cost=cost,
                     rounds=rounds, executed_steps=global_k,
                     solutions=tuple(solutions))
