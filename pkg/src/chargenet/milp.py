"""Big-M mixed-integer export of the scheduling problem, in LP format.

The decision variables mirror the simulator's discrete inputs. Per car c
(1-based in names) and step k (0-based): g (parked), y (charging), one
selector binary x per matrix slot h in 1..N*N (diagonal slots mean parked
at that node, off-diagonal slots mean driving that edge), three mode
indicators bc/bw/bd, and the driving-step split d1 (edge completed this
step) / d2 (still mid-edge). That is N*N + 7 binaries per car-step.
Continuous state: kwh_ (energy at step boundaries), dist_ (odometer),
prog_ (progress into the current edge), z_ (car-charging-at-node product),
st_ (station deviation epigraph). Variable names never start with e or E
so no LP tokenizer can mistake them for numbers.

Two deliberate gaps between this model and the simulator, both recorded
where they bite: battery degradation is not in the objective (its
per-session mean-power price has no linear form), and the charging gain
rows are an upper envelope (two affine caps plus monotonicity), which a
cost-minimizing solve makes tight. Electricity requires a uniform price;
with one price the charged energy telescopes to a linear expression, and
anything fancier would need products of binaries with energy. Arrival
uses a 1e-6-mile margin on the non-arrival side, so edge lengths should
not sit within a micro-mile of a multiple of the step distance (exact
multiples are fine: they arrive).

The objective omits the constant -price * sum(E0); it is written in a
leading comment and carried as MilpModel.offset, so
evaluate_objective(model, assignment) matches the simulator's breakdown
minus degradation.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .automaton import CarTrajectory, DiscreteInput
from .costs import ABS_DEVIATION, occupancy_table
from .errors import ConfigError
from .network import decode_edge, edge_index
from .optimizer import ScheduleProblem
from .vehicle import Mode

ARRIVAL_MARGIN_MILES = 1e-6


# ---------------------------------------------------------------------------
# model containers
# ---------------------------------------------------------------------------

@dataclass
class Row:
    name: str
    terms: dict[str, float]
    sense: str  # "<=", ">=", "="
    rhs: float

    def slack(self, assignment: dict[str, float]) -> float:
        """Nonnegative when satisfied; negative slack is a violation."""
        lhs = sum(coef * assignment.get(var, 0.0)
                  for var, coef in self.terms.items())
        if self.sense == "<=":
            return self.rhs - lhs
        if self.sense == ">=":
            return lhs - self.rhs
        return -abs(lhs - self.rhs)


@dataclass
class MilpModel:
    n_nodes: int
    n_cars: int
    horizon: int
    rows: list[Row] = field(default_factory=list)
    binaries: list[str] = field(default_factory=list)
    bounds: dict[str, tuple[float, float]] = field(default_factory=dict)
    linear: dict[str, float] = field(default_factory=dict)
    quad: dict[tuple[str, str], float] = field(default_factory=dict)
    offset: float = 0.0

    def binary_count(self) -> int:
        return len(self.binaries)

    def add_row(self, name: str, terms: dict[str, float], sense: str,
                rhs: float) -> None:
        self.rows.append(Row(name, terms, sense, rhs))

    def add_quad(self, a: str, b: str, coeff: float) -> None:
        key = (a, b) if a <= b else (b, a)
        self.quad[key] = self.quad.get(key, 0.0) + coeff

    def evaluate_objective(self, assignment: dict[str, float]) -> float:
        total = self.offset
        for var, coef in self.linear.items():
            total += coef * assignment.get(var, 0.0)
        for (a, b), coef in self.quad.items():
            total += coef * assignment.get(a, 0.0) * assignment.get(b, 0.0)
        return total

    def violations(self, assignment: dict[str, float],
                   tol: float = 1e-9) -> list[tuple[str, float]]:
        """Rows and bounds the assignment breaks by more than tol."""
        bad = [(row.name, row.slack(assignment)) for row in self.rows
               if row.slack(assignment) < -tol]
        for var, (lb, ub) in self.bounds.items():
            value = assignment.get(var, 0.0)
            if value < lb - tol:
                bad.append((f"lb({var})", value - lb))
            elif value > ub + tol:
                bad.append((f"ub({var})", ub - value))
        return bad


# variable name helpers: cars 1-based, steps 0-based, nodes and h 1-based

def _vg(c, k):
    return f"g_c{c}_k{k}"


def _vy(c, k):
    return f"y_c{c}_k{k}"


def _vx(c, k, h):
    return f"x_c{c}_k{k}_h{h}"


def _vb(mode, c, k):
    return f"b{mode}_c{c}_k{k}"


def _vd(which, c, k):
    return f"d{which}_c{c}_k{k}"


def _vkwh(c, k):
    return f"kwh_c{c}_k{k}"


def _vdist(c, k):
    return f"dist_c{c}_k{k}"


def _vprog(c, k):
    return f"prog_c{c}_k{k}"


def _vz(c, k, node):
    return f"z_c{c}_k{k}_n{node}"


def _vst(k, node):
    return f"st_k{k}_n{node}"


# ---------------------------------------------------------------------------
# model construction
# ---------------------------------------------------------------------------

def _uniform_price(problem: ScheduleProblem) -> float | None:
    weights = problem.weights
    if not weights.electricity_enabled:
        return None
    values = {value
              for row in weights.electricity_price
              for value in row[:problem.horizon]}
    if len(values) != 1:
        raise ConfigError(
            "the LP export supports only a uniform electricity price "
            "(charged energy then telescopes to a linear expression); "
            f"found {len(values)} distinct prices")
    return values.pop()


def build_milp(problem: ScheduleProblem) -> MilpModel:
    """Translate the problem into rows, bounds, binaries, and objective."""
    issues = problem.validate()
    if issues:
        raise ConfigError("; ".join(issues))
    if problem.congestion_coupling:
        raise ConfigError(
            "the LP export assumes free-flow motion; congestion-coupled "
            "dynamics would make arrival rows nonlinear")
    if problem.station_cost_variant != ABS_DEVIATION:
        raise ConfigError(
            "the LP export models the absolute-deviation station cost; "
            f"got variant {problem.station_cost_variant!r}")
    price = _uniform_price(problem)

    graph = problem.graph
    n = graph.n_nodes
    p = len(problem.cars)
    horizon = problem.horizon
    base = problem.motion.base_speed
    d_max = problem.motion.d_max
    battery = problem.battery
    weights = problem.weights
    ext = problem.externals()
    drive_de = problem.drive_power_kw * problem.motion.t_s / 60.0
    pmax_de = battery.p_max * problem.motion.t_s / 60.0
    taper_keep = 1.0 - battery.chg_n * problem.motion.t_s / 60.0
    taper_gain = battery.chg_m * problem.motion.t_s / 60.0

    real_edges = graph.edges()
    max_len = max(graph.length(i, j) for i, j in real_edges)
    m_arr = max_len
    m_cont = max_len + base + 1.0
    m_prog = max_len + base
    m_dist = d_max + max_len + base
    m_kwh = (battery.e_max - battery.e_min) + drive_de + pmax_de
    m_taper = battery.e_max + abs(taper_keep) * battery.e_max + abs(taper_gain)
    charger_nodes = [node for node in range(1, n + 1)
                     if graph.station_capacity[node - 1] > 0]
    pref_nodes = [node for node in range(1, n + 1)
                  if graph.preferred_capacity[node - 1] > 0.0]

    model = MilpModel(n_nodes=n, n_cars=p, horizon=horizon)

    # variables: declaration order fixes the LP file layout
    for c in range(1, p + 1):
        for k in range(horizon):
            model.binaries.append(_vg(c, k))
            model.binaries.append(_vy(c, k))
            for h in range(1, n * n + 1):
                model.binaries.append(_vx(c, k, h))
            for mode in ("c", "w", "d"):
                model.binaries.append(_vb(mode, c, k))
            model.binaries.append(_vd(1, c, k))
            model.binaries.append(_vd(2, c, k))

    for c, car in enumerate(problem.cars, start=1):
        for k in range(horizon + 1):
            model.bounds[_vkwh(c, k)] = (battery.e_min, battery.e_max)
            model.bounds[_vdist(c, k)] = (0.0, d_max)
            model.bounds[_vprog(c, k)] = (0.0, max_len)
        model.bounds[_vkwh(c, 0)] = (car.initial_energy, car.initial_energy)
        model.bounds[_vdist(c, 0)] = (0.0, 0.0)
        model.bounds[_vprog(c, 0)] = (0.0, 0.0)
        model.bounds[_vprog(c, horizon)] = (0.0, 0.0)
        for k in range(horizon):
            for node in charger_nodes:
                model.bounds[_vz(c, k, node)] = (0.0, 1.0)
    for k in range(horizon):
        for node in pref_nodes:
            model.bounds[_vst(k, node)] = (0.0, math.inf)

    # off-diagonal selector slots with no physical edge are pinned to zero
    for c in range(1, p + 1):
        for k in range(horizon):
            for h in range(1, n * n + 1):
                i, j = decode_edge(h, n)
                if i != j and not graph.has_edge(i, j):
                    model.bounds[_vx(c, k, h)] = (0.0, 0.0)

    for c, car in enumerate(problem.cars, start=1):
        start_h = edge_index(car.start_node, car.start_node, n)
        goal = car.end_node
        for k in range(horizon):
            # selector structure
            model.add_row(f"onehot_c{c}_k{k}",
                          {_vx(c, k, h): 1.0 for h in range(1, n * n + 1)},
                          "=", 1.0)
            terms = {_vx(c, k, edge_index(v, v, n)): 1.0
                     for v in range(1, n + 1)}
            terms[_vg(c, k)] = -1.0
            model.add_row(f"parked_c{c}_k{k}", terms, "=", 0.0)
            model.add_row(f"modec_c{c}_k{k}",
                          {_vb("c", c, k): 1.0, _vy(c, k): -1.0}, "=", 0.0)
            model.add_row(f"modew_c{c}_k{k}",
                          {_vb("w", c, k): 1.0, _vg(c, k): -1.0,
                           _vy(c, k): 1.0}, "=", 0.0)
            model.add_row(f"moded_c{c}_k{k}",
                          {_vb("d", c, k): 1.0, _vg(c, k): 1.0}, "=", 1.0)
            model.add_row(f"dsplit_c{c}_k{k}",
                          {_vd(1, c, k): 1.0, _vd(2, c, k): 1.0,
                           _vb("d", c, k): -1.0}, "=", 0.0)
            # charging only while parked at a node that has chargers
            terms = {_vx(c, k, edge_index(v, v, n)): 1.0
                     for v in charger_nodes}
            terms[_vy(c, k)] = -1.0
            model.add_row(f"chgsite_c{c}_k{k}", terms, ">=", 0.0)

            # arrival and continuation big-M rows
            terms = {_vprog(c, k): 1.0, _vd(1, c, k): -m_arr}
            for i, j in real_edges:
                terms[_vx(c, k, edge_index(i, j, n))] = -graph.length(i, j)
            model.add_row(f"arrive_c{c}_k{k}", terms, ">=", -base - m_arr)
            terms = {_vprog(c, k): 1.0, _vd(2, c, k): m_cont}
            for i, j in real_edges:
                terms[_vx(c, k, edge_index(i, j, n))] = -graph.length(i, j)
            model.add_row(f"contin_c{c}_k{k}", terms, "<=",
                          -base - ARRIVAL_MARGIN_MILES + m_cont)

            # progress is confined to the selected slot's length
            terms = {_vprog(c, k): 1.0}
            for i, j in real_edges:
                terms[_vx(c, k, edge_index(i, j, n))] = -graph.length(i, j)
            model.add_row(f"progsel_c{c}_k{k}", terms, "<=", 0.0)

            # progress evolution
            model.add_row(f"progup_c{c}_k{k}",
                          {_vprog(c, k + 1): 1.0, _vprog(c, k): -1.0,
                           _vd(2, c, k): -m_prog}, ">=", base - m_prog)
            model.add_row(f"progdn_c{c}_k{k}",
                          {_vprog(c, k + 1): 1.0, _vprog(c, k): -1.0,
                           _vd(2, c, k): m_prog}, "<=", base + m_prog)
            model.add_row(f"progzero_c{c}_k{k}",
                          {_vprog(c, k + 1): 1.0, _vd(2, c, k): -max_len},
                          "<=", 0.0)

            # odometer evolution, one gated pair per movement kind
            model.add_row(f"odoparkup_c{c}_k{k}",
                          {_vdist(c, k + 1): 1.0, _vdist(c, k): -1.0,
                           _vg(c, k): m_dist}, "<=", m_dist)
            model.add_row(f"odoparkdn_c{c}_k{k}",
                          {_vdist(c, k + 1): 1.0, _vdist(c, k): -1.0,
                           _vg(c, k): -m_dist}, ">=", -m_dist)
            model.add_row(f"odomidup_c{c}_k{k}",
                          {_vdist(c, k + 1): 1.0, _vdist(c, k): -1.0,
                           _vd(2, c, k): m_dist}, "<=", base + m_dist)
            model.add_row(f"odomiddn_c{c}_k{k}",
                          {_vdist(c, k + 1): 1.0, _vdist(c, k): -1.0,
                           _vd(2, c, k): -m_dist}, ">=", base - m_dist)
            terms_up = {_vdist(c, k + 1): 1.0, _vdist(c, k): -1.0,
                        _vprog(c, k): -1.0, _vd(1, c, k): m_dist}
            terms_dn = {_vdist(c, k + 1): 1.0, _vdist(c, k): -1.0,
                        _vprog(c, k): -1.0, _vd(1, c, k): -m_dist}
            for i, j in real_edges:
                terms_up[_vx(c, k, edge_index(i, j, n))] = -graph.length(i, j)
                terms_dn[_vx(c, k, edge_index(i, j, n))] = -graph.length(i, j)
            model.add_row(f"odoarrup_c{c}_k{k}", terms_up, "<=", m_dist)
            model.add_row(f"odoarrdn_c{c}_k{k}", terms_dn, ">=", -m_dist)

            # energy evolution
            model.add_row(f"kwhwaitup_c{c}_k{k}",
                          {_vkwh(c, k + 1): 1.0, _vkwh(c, k): -1.0,
                           _vb("w", c, k): m_kwh}, "<=", m_kwh)
            model.add_row(f"kwhwaitdn_c{c}_k{k}",
                          {_vkwh(c, k + 1): 1.0, _vkwh(c, k): -1.0,
                           _vb("w", c, k): -m_kwh}, ">=", -m_kwh)
            model.add_row(f"kwhdriveup_c{c}_k{k}",
                          {_vkwh(c, k + 1): 1.0, _vkwh(c, k): -1.0,
                           _vb("d", c, k): m_kwh}, "<=", -drive_de + m_kwh)
            model.add_row(f"kwhdrivedn_c{c}_k{k}",
                          {_vkwh(c, k + 1): 1.0, _vkwh(c, k): -1.0,
                           _vb("d", c, k): -m_kwh}, ">=", -drive_de - m_kwh)
            # charging: upper envelope of the two curve pieces, monotone below
            model.add_row(f"kwhchgcap_c{c}_k{k}",
                          {_vkwh(c, k + 1): 1.0, _vkwh(c, k): -1.0,
                           _vb("c", c, k): m_kwh}, "<=", pmax_de + m_kwh)
            model.add_row(f"kwhchgtaper_c{c}_k{k}",
                          {_vkwh(c, k + 1): 1.0, _vkwh(c, k): -taper_keep,
                           _vb("c", c, k): m_taper}, "<=", taper_gain + m_taper)
            model.add_row(f"kwhchglo_c{c}_k{k}",
                          {_vkwh(c, k + 1): 1.0, _vkwh(c, k): -1.0,
                           _vb("c", c, k): -m_kwh}, ">=", -m_kwh)

            # where the car may be at k+1, given where it is at k
            if k + 1 < horizon:
                for v in range(1, n + 1):
                    allowed = {_vx(c, k + 1, edge_index(v, v, n)): 1.0}
                    for j in graph.neighbors(v):
                        allowed[_vx(c, k + 1, edge_index(v, j, n))] = 1.0
                    allowed[_vx(c, k, edge_index(v, v, n))] = -1.0
                    model.add_row(f"stay_c{c}_k{k}_n{v}", allowed, ">=", 0.0)
                for i, j in real_edges:
                    h = edge_index(i, j, n)
                    allowed = {_vx(c, k + 1, edge_index(j, j, n)): 1.0}
                    for l in graph.neighbors(j):
                        allowed[_vx(c, k + 1, edge_index(j, l, n))] = 1.0
                    allowed[_vx(c, k, h)] = -1.0
                    allowed[_vd(1, c, k)] = -1.0
                    model.add_row(f"hop_c{c}_k{k}_h{h}", allowed, ">=", -1.0)
                    model.add_row(f"keep_c{c}_k{k}_h{h}",
                                  {_vx(c, k + 1, h): 1.0, _vx(c, k, h): -1.0,
                                   _vd(2, c, k): -1.0}, ">=", -1.0)

            # charging occupancy products and the start-permission rule
            for node in charger_nodes:
                zvar = _vz(c, k, node)
                diag = _vx(c, k, edge_index(node, node, n))
                model.add_row(f"zy_c{c}_k{k}_n{node}",
                              {zvar: 1.0, _vy(c, k): -1.0}, "<=", 0.0)
                model.add_row(f"zx_c{c}_k{k}_n{node}",
                              {zvar: 1.0, diag: -1.0}, "<=", 0.0)
                model.add_row(f"zand_c{c}_k{k}_n{node}",
                              {zvar: 1.0, _vy(c, k): -1.0, diag: -1.0},
                              ">=", -1.0)
                room = (graph.station_capacity[node - 1] - ext[node - 1])
                if k == 0:
                    model.add_row(f"start_c{c}_k{k}_n{node}",
                                  {zvar: 1.0}, "<=", float(room))
                else:
                    terms = {zvar: 1.0, _vz(c, k - 1, node): -1.0}
                    for c2 in range(1, p + 1):
                        terms[_vz(c2, k - 1, node)] = (
                            terms.get(_vz(c2, k - 1, node), 0.0) + 1.0)
                    model.add_row(f"start_c{c}_k{k}_n{node}", terms,
                                  "<=", float(room))

        # initial position (parked at the start node, or already departing)
        # and the two terminal rows
        terms = {_vx(c, 0, start_h): 1.0}
        for j in graph.neighbors(car.start_node):
            terms[_vx(c, 0, edge_index(car.start_node, j, n))] = 1.0
        model.add_row(f"init_c{c}", terms, ">=", 1.0)
        terms = {_vx(c, horizon - 1, edge_index(goal, goal, n)): 1.0}
        into_goal = [(i, j) for i, j in real_edges if j == goal]
        for i, j in into_goal:
            terms[_vx(c, horizon - 1, edge_index(i, j, n))] = 1.0
        model.add_row(f"goal_c{c}", terms, ">=", 1.0)
        if into_goal:
            terms = {_vd(1, c, horizon - 1): 1.0}
            for i, j in into_goal:
                terms[_vx(c, horizon - 1, edge_index(i, j, n))] = -1.0
            model.add_row(f"goalarrive_c{c}", terms, ">=", 0.0)

    # station capacity and deviation epigraph, per step and node
    for k in range(horizon):
        for node in charger_nodes:
            room = graph.station_capacity[node - 1] - ext[node - 1]
            model.add_row(f"cap_k{k}_n{node}",
                          {_vz(c, k, node): 1.0 for c in range(1, p + 1)},
                          "<=", float(room))
        for node in pref_nodes:
            half = 0.5 * graph.preferred_capacity[node - 1]
            svar = _vst(k, node)
            terms = {svar: 1.0}
            if node in charger_nodes:
                for c in range(1, p + 1):
                    terms[_vz(c, k, node)] = -1.0
            model.add_row(f"stup_k{k}_n{node}", terms, ">=", -half)
            terms = {svar: 1.0}
            if node in charger_nodes:
                for c in range(1, p + 1):
                    terms[_vz(c, k, node)] = 1.0
            model.add_row(f"stdn_k{k}_n{node}", terms, ">=", half)

    # objective: linear station and electricity parts, quadratic time parts
    for k in range(horizon):
        for node in pref_nodes:
            model.linear[_vst(k, node)] = weights.station_unit_cost
    if price is not None:
        for c, car in enumerate(problem.cars, start=1):
            model.linear[_vkwh(c, horizon)] = price
            for k in range(horizon):
                var = _vb("d", c, k)
                model.linear[var] = model.linear.get(var, 0.0) + price * drive_de
            model.offset -= price * car.initial_energy
    for k in range(horizon):
        for i, j in real_edges:
            h = edge_index(i, j, n)
            for c1 in range(1, p + 1):
                for c2 in range(c1, p + 1):
                    coeff = weights.congestion_weight
                    if c1 != c2:
                        coeff *= 2.0
                    model.add_quad(_vx(c1, k, h), _vx(c2, k, h), coeff)
    for c in range(1, p + 1):
        for k1 in range(horizon):
            for k2 in range(k1, horizon):
                coeff = weights.charging_time_weight
                wcoeff = weights.waiting_time_weight
                if k1 != k2:
                    coeff *= 2.0
                    wcoeff *= 2.0
                model.add_quad(_vy(c, k1), _vy(c, k2), coeff)
                model.add_quad(_vb("w", c, k1), _vb("w", c, k2), wcoeff)
    return model


# ---------------------------------------------------------------------------
# between trajectories and assignments
# ---------------------------------------------------------------------------

def assignment_from_trajectories(problem: ScheduleProblem,
                                 trajectories: Sequence[CarTrajectory]
                                 ) -> dict[str, float]:
    """Variable values realized by simulated trajectories."""
    n = problem.graph.n_nodes
    horizon = problem.horizon
    charger_nodes = [node for node in range(1, n + 1)
                     if problem.graph.station_capacity[node - 1] > 0]
    assignment: dict[str, float] = {}
    for c0, traj in enumerate(trajectories):
        c = c0 + 1
        pre = traj.initial
        for k in range(horizon):
            rec = traj.steps[k]
            inp = rec.inp
            assignment[_vg(c, k)] = float(inp.gamma)
            assignment[_vy(c, k)] = float(inp.charge)
            for h in range(1, n * n + 1):
                assignment[_vx(c, k, h)] = float(h == inp.xi)
            assignment[_vb("c", c, k)] = float(rec.mode is Mode.CHARGING)
            assignment[_vb("w", c, k)] = float(rec.mode is Mode.WAITING)
            assignment[_vb("d", c, k)] = float(rec.mode is Mode.DRIVING)
            arrived = rec.mode is Mode.DRIVING and rec.state.node is not None
            midway = rec.mode is Mode.DRIVING and rec.state.node is None
            assignment[_vd(1, c, k)] = float(arrived)
            assignment[_vd(2, c, k)] = float(midway)
            assignment[_vkwh(c, k)] = pre.energy
            assignment[_vdist(c, k)] = pre.trip_distance
            assignment[_vprog(c, k)] = pre.edge_progress
            for node in charger_nodes:
                at_node = inp.gamma and pre.node == node
                assignment[_vz(c, k, node)] = float(inp.charge and at_node)
            pre = rec.state
        assignment[_vkwh(c, horizon)] = pre.energy
        assignment[_vdist(c, horizon)] = pre.trip_distance
        assignment[_vprog(c, horizon)] = pre.edge_progress
    occupancy = occupancy_table(trajectories, n)
    for k in range(horizon):
        for node in range(1, n + 1):
            pref = problem.graph.preferred_capacity[node - 1]
            if pref > 0.0:
                u = float(occupancy[k][node - 1])
                assignment[_vst(k, node)] = abs(u - 0.5 * pref)
    return assignment


def inputs_from_assignment(problem: ScheduleProblem,
                           assignment: dict[str, float]
                           ) -> tuple[tuple[DiscreteInput, ...], ...]:
    """Read a (near-)integral assignment back into per-car input plans."""
    n = problem.graph.n_nodes
    plans = []
    for c in range(1, len(problem.cars) + 1):
        plan = []
        for k in range(problem.horizon):
            chosen = None
            for h in range(1, n * n + 1):
                if assignment.get(_vx(c, k, h), 0.0) > 0.5:
                    if chosen is not None:
                        raise ValueError(
                            f"car {c} step {k}: selector is not one-hot")
                    chosen = h
            if chosen is None:
                raise ValueError(f"car {c} step {k}: no selector slot is set")
            i, j = decode_edge(chosen, n)
            gamma = i == j
            charge = assignment.get(_vy(c, k), 0.0) > 0.5
            if charge and not gamma:
                raise ValueError(
                    f"car {c} step {k}: charging while driving is not a mode")
            plan.append(DiscreteInput(gamma=gamma, charge=charge, xi=chosen))
        plans.append(tuple(plan))
    return tuple(plans)


# ---------------------------------------------------------------------------
# LP writing, linting, parsing
# ---------------------------------------------------------------------------

_MAX_LINE = 255
_NAME_RE = re.compile(r"^[A-DF-Za-df-z][A-Za-z0-9_]*$")


def _fmt(value: float) -> str:
    return f"{value:.17g}"


def _wrap(parts: Iterable[str], indent: str = "  ") -> list[str]:
    """Join tokens into lines no longer than the LP line limit."""
    lines: list[str] = []
    current = indent
    for part in parts:
        candidate = part if current == indent else " " + part
        if len(current) + len(candidate) > _MAX_LINE and current != indent:
            lines.append(current)
            current = indent + part
        else:
            current += candidate
    if current.strip():
        lines.append(current)
    return lines


def _terms_tokens(terms: dict[str, float]) -> list[str]:
    tokens = []
    first = True
    for var, coef in terms.items():
        if coef == 0.0:
            continue
        sign = "-" if coef < 0 else ("" if first else "+")
        mag = abs(coef)
        body = var if mag == 1.0 else f"{_fmt(mag)} {var}"
        tokens.append(f"{sign} {body}".strip() if sign else body)
        first = False
    if not tokens:
        tokens.append("0 zero_unused")
    return tokens


def write_lp(model: MilpModel, path: str | None = None) -> str:
    """Serialize the model in LP format; optionally also write it to path."""
    out: list[str] = []
    out.append("\\ charging-aware trip scheduling, exported as a MILP")
    out.append(f"\\ objective offset (add to optimum): {_fmt(model.offset)}")
    out.append("Minimize")
    obj_tokens = _terms_tokens(model.linear)
    if model.quad:
        obj_tokens.append("+ [")
        first = True
        for (a, b), coef in model.quad.items():
            printed = 2.0 * coef
            sign = "-" if printed < 0 else ("" if first else "+")
            mag = abs(printed)
            if a == b:
                body = f"{_fmt(mag)} {a} ^ 2"
            else:
                body = f"{_fmt(mag)} {a} * {b}"
            obj_tokens.append(f"{sign} {body}".strip() if sign else body)
            first = False
        obj_tokens.append("] / 2")
    first_line = " obj:"
    lines = _wrap(obj_tokens, indent="   ")
    out.append(first_line)
    out.extend(lines)
    out.append("Subject To")
    for row in model.rows:
        sense = row.sense if row.sense != "=" else "="
        tokens = _terms_tokens(row.terms)
        tokens.append(sense)
        tokens.append(_fmt(row.rhs))
        out.append(f" {row.name}:")
        out.extend(_wrap(tokens, indent="   "))
    out.append("Bounds")
    for var, (lb, ub) in model.bounds.items():
        if lb == ub:
            out.append(f" {var} = {_fmt(lb)}")
        elif math.isinf(ub):
            out.append(f" {_fmt(lb)} <= {var}")
        else:
            out.append(f" {_fmt(lb)} <= {var} <= {_fmt(ub)}")
    out.append("Binary")
    out.extend(_wrap(model.binaries, indent=" "))
    out.append("End")
    text = "\n".join(out) + "\n"
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text


_LP_KEYWORDS = {"Minimize", "Maximize", "Subject", "To", "Bounds", "Binary",
                "General", "End", "obj"}


def lint_lp(text: str) -> list[str]:
    """Structural checks on an LP file; returns human-readable complaints."""
    problems = []
    lines = text.splitlines()
    for idx, line in enumerate(lines, start=1):
        if len(line) > _MAX_LINE:
            problems.append(f"line {idx} is {len(line)} chars (limit {_MAX_LINE})")
        if "\t" in line:
            problems.append(f"line {idx} contains a tab")
    body = [ln for ln in lines if not ln.startswith("\\")]
    keywords = []
    for ln in body:
        stripped = ln.strip()
        if stripped in ("Minimize", "Maximize", "Subject To", "Bounds",
                        "Binary", "General", "End"):
            keywords.append(stripped)
    expected_order = ["Minimize", "Subject To", "Bounds", "Binary", "End"]
    filtered = [k for k in keywords if k in expected_order]
    if filtered != expected_order:
        problems.append(
            f"section keywords out of order: {filtered} "
            f"(expected {expected_order})")
    seen_bad_name = False
    for token in _tokenize_lp(text):
        if not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", token):
            continue  # number or operator
        if token in _LP_KEYWORDS or token == "2":
            continue
        if not _NAME_RE.match(token) and not seen_bad_name:
            problems.append(f"name {token!r} starts with e/E, which LP "
                            "readers can parse as an exponent")
            seen_bad_name = True
    return problems


def _tokenize_lp(text: str) -> list[str]:
    body = "\n".join(ln for ln in text.splitlines() if not ln.startswith("\\"))
    # keep multi-char operators whole, split names/numbers/punctuation
    pattern = (r"<=|>=|=|\^|\[|\]|/|\*|\+|-|:"
               r"|[A-Za-z_][A-Za-z0-9_]*"
               r"|[0-9]*\.?[0-9]+(?:[eE][+-]?[0-9]+)?")
    return re.findall(pattern, body)


def parse_lp(text: str) -> dict:
    """Read an LP file written by write_lp back into plain structures.

    Returns {"linear", "quad", "rows", "bounds", "binaries"} with the same
    value conventions as MilpModel (quad holds monomial coefficients).
    Only the dialect write_lp emits is supported.
    """
    tokens = _tokenize_lp(text)
    pos = 0

    def peek() -> str | None:
        return tokens[pos] if pos < len(tokens) else None

    def take() -> str:
        nonlocal pos
        tok = tokens[pos]
        pos += 1
        return tok

    def expect(tok: str) -> None:
        got = take()
        if got != tok:
            raise ValueError(f"expected {tok!r}, got {got!r} at token {pos}")

    def is_number(tok: str | None) -> bool:
        if tok is None:
            return False
        return bool(re.fullmatch(r"[0-9]*\.?[0-9]+(?:[eE][+-]?[0-9]+)?", tok))

    def parse_terms(stop: set[str]) -> dict[str, float]:
        terms: dict[str, float] = {}
        sign = 1.0
        while peek() is not None and peek() not in stop:
            tok = take()
            if tok == "+":
                sign = 1.0
                continue
            if tok == "-":
                sign = -1.0
                continue
            if is_number(tok):
                coef = sign * float(tok)
                var = take()
                terms[var] = terms.get(var, 0.0) + coef
            else:
                terms[tok] = terms.get(tok, 0.0) + sign
            sign = 1.0
        return terms

    expect("Minimize")
    expect("obj")
    expect(":")
    linear = parse_terms({"[", "Subject"})
    quad: dict[tuple[str, str], float] = {}
    if peek() == "[":
        take()
        sign = 1.0
        while peek() != "]":
            tok = take()
            if tok == "+":
                sign = 1.0
                continue
            if tok == "-":
                sign = -1.0
                continue
            coef = sign * float(tok) if is_number(tok) else sign
            a = take() if is_number(tok) else tok
            op = take()
            if op == "^":
                expect("2")
                key = (a, a)
            elif op == "*":
                b = take()
                key = (a, b) if a <= b else (b, a)
            else:
                raise ValueError(f"unexpected operator {op!r} in quadratic")
            quad[key] = quad.get(key, 0.0) + coef / 2.0
            sign = 1.0
        expect("]")
        expect("/")
        expect("2")
    expect("Subject")
    expect("To")

    rows = []
    while not (peek() == "Bounds"):
        name = take()
        expect(":")
        terms = parse_terms({"<=", ">=", "="})
        sense = take()
        rhs_sign = 1.0
        tok = take()
        if tok == "-":
            rhs_sign = -1.0
            tok = take()
        elif tok == "+":
            tok = take()
        rows.append({"name": name, "terms": terms, "sense": sense,
                     "rhs": rhs_sign * float(tok)})
    expect("Bounds")

    bounds: dict[str, tuple[float, float]] = {}

    def signed_number() -> float:
        sgn = 1.0
        tok = take()
        if tok == "-":
            sgn = -1.0
            tok = take()
        elif tok == "+":
            tok = take()
        return sgn * float(tok)

    while peek() != "Binary":
        if is_number(peek()) or peek() in ("-", "+"):
            lb = signed_number()
            expect("<=")
            var = take()
            if peek() == "<=":
                take()
                ub = signed_number()
            else:
                ub = math.inf
            bounds[var] = (lb, ub)
        else:
            var = take()
            expect("=")
            value = signed_number()
            bounds[var] = (value, value)
    expect("Binary")
    binaries = []
    while peek() != "End":
        binaries.append(take())
    expect("End")
    return {"linear": linear, "quad": quad, "rows": rows, "bounds": bounds,
            "binaries": binaries}
