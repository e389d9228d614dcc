"""Aggregate cost model: station burden, electricity, congestion, time, wear.

Every function here is a pure evaluation over finished trajectories; nothing
mutates. Summation orders are fixed (steps ascending, then nodes, then cars)
so repeated evaluation of the same trajectories is bit-identical.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Sequence

from .errors import ConfigError
from .vehicle import BatteryParams, Mode, degradation_cost

if TYPE_CHECKING:
    from .automaton import CarTrajectory
    from .network import HighwayGraph

ABS_DEVIATION = "absolute-deviation"
PAPER_LITERAL = "paper-literal"


@dataclass(frozen=True)
class CostWeights:
    """Objective weights. All must be nonnegative.

    station_unit_cost is dollars per car of deviation from the preferred
    utilization; the three *_weight fields scale the quadratic time terms.
    electricity_price is node-major: price[node-1][step] in $/kWh, required
    when electricity_enabled.
    """

    station_unit_cost: float
    congestion_weight: float
    charging_time_weight: float
    waiting_time_weight: float
    electricity_enabled: bool = False
    electricity_price: tuple[tuple[float, ...], ...] | None = None

    def __post_init__(self):
        for name in ("station_unit_cost", "congestion_weight",
                     "charging_time_weight", "waiting_time_weight"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be nonnegative")
        if self.electricity_price is not None:
            frozen = tuple(tuple(float(p) for p in row)
                           for row in self.electricity_price)
            object.__setattr__(self, "electricity_price", frozen)
            for row in frozen:
                for p in row:
                    if p < 0.0:
                        raise ValueError("electricity prices must be nonnegative")
        if self.electricity_enabled and self.electricity_price is None:
            raise ConfigError("electricity_enabled requires electricity_price")


@dataclass(frozen=True)
class CostBreakdown:
    """Per-component totals for one set of trajectories.

    Dollars (station, electricity, degradation) and weighted penalty units
    (congestion, charging_time, waiting_time) are summed into ``total``;
    the weights are what make them commensurable.
    """

    station: float
    electricity: float
    congestion: float
    charging_time: float
    waiting_time: float
    degradation: float
    total: float

    @classmethod
    def assemble(cls, station, electricity, congestion, charging_time,
                 waiting_time, degradation) -> "CostBreakdown":
        total = (station + electricity + congestion + charging_time
                 + waiting_time + degradation)
        return cls(station, electricity, congestion, charging_time,
                   waiting_time, degradation, total)


def edge_flow(trajectories: Sequence["CarTrajectory"], h: int, k: int) -> int:
    """Number of cars whose selector points at index h during step k."""
    count = 0
    for traj in trajectories:
        if traj.steps[k].inp.xi == h:
            count += 1
    return count


def bpr_travel_time(edge: tuple[int, int], flow: float, graph: "HighwayGraph",
                    exponent: int = 1) -> float:
    """Congested travel time of an edge in minutes.

    t = t0 * (1 + 0.15 * (flow / capacity) ** exponent). The default
    exponent is 1; pass exponent=4 for the classic quartic ramp.
    """
    if flow < 0.0:
        raise ValueError(f"flow must be nonnegative, got {flow}")
    if exponent not in (1, 4):
        raise ValueError(f"exponent must be 1 or 4, got {exponent}")
    t0 = graph.free_flow_time[edge]
    cap = graph.link_capacity[edge]
    ratio = flow / cap
    if exponent == 4:
        ratio = ratio ** 4
    return t0 * (1.0 + 0.15 * ratio)


def _literal_sign_factor(u: float, s: float) -> int:
    # Printed case table: 1 above half the target, 0 at u == s, -1 below
    # half; the u == s row is kept verbatim even though it looks like a
    # misprint for u == s/2eps. The mathematical sgn still zeroes u == s/2.
    if u == s:
        return 0
    half = 0.5 * s
    if u > half:
        return 1
    if u < half:
        return -1
    return 0


def station_cost(occupancy: Sequence[Sequence[int]], graph: "HighwayGraph",
                 weights: CostWeights, variant: str = ABS_DEVIATION) -> float:
    """Dollar cost of station utilization deviating from its target.

    ``occupancy[k][n-1]`` is the number of cars charging at node n during
    step k. The default variant charges station_unit_cost per car of
    absolute deviation from half the preferred capacity and is nonnegative.
    The "paper-literal" variant reproduces the printed form
    C * |sgn(U/S - 0.5)| * (U - S), which goes negative below target and
    returns 0 at U == S; it exists for comparison runs.
    """
    if variant not in (ABS_DEVIATION, PAPER_LITERAL):
        raise ValueError(f"unknown station cost variant {variant!r}")
    unit = weights.station_unit_cost
    total = 0.0
    for k in range(len(occupancy)):
        row = occupancy[k]
        for n in range(graph.n_nodes):
            u = float(row[n])
            s = graph.preferred_capacity[n]
            if s == 0.0:
                if u > 0.0:
                    raise ValueError(
                        f"node {n + 1} has zero preferred capacity but "
                        f"utilization {u} at step {k}")
                continue
            if variant == ABS_DEVIATION:
                dev = abs(u - 0.5 * s)
                if dev != 0.0:
                    total += unit * dev
            else:
                factor = _literal_sign_factor(u, s)
                if factor != 0:
                    total += unit * (u - s)
    return total


def electricity_cost(trajectories: Sequence["CarTrajectory"],
                     weights: CostWeights) -> float:
    """Sum of price(step, node) * energy delivered over all charging steps."""
    if not weights.electricity_enabled:
        return 0.0
    price = weights.electricity_price
    total = 0.0
    for traj in trajectories:
        prev_energy = traj.initial.energy
        for rec in traj.steps:
            if rec.mode is Mode.CHARGING:
                node = rec.state.node
                delta = rec.state.energy - prev_energy
                try:
                    rate = price[node - 1][rec.step]
                except IndexError:
                    raise ConfigError(
                        f"electricity price table missing node {node} "
                        f"step {rec.step}") from None
                total += rate * delta
            prev_energy = rec.state.energy
    return total


def customer_time_costs(trajectories: Sequence["CarTrajectory"],
                        weights: CostWeights) -> tuple[float, float, float]:
    """(charging, waiting, congestion) penalty totals.

    Charging and waiting are quadratic in each car's step counts; congestion
    is the squared 2-norm of per-step edge flows, which also charges each
    driving step (a lone car contributes 1 per step driven).
    """
    charging = 0.0
    waiting = 0.0
    for traj in trajectories:
        n_chg = sum(1 for rec in traj.steps if rec.mode is Mode.CHARGING)
        n_wait = sum(1 for rec in traj.steps if rec.mode is Mode.WAITING)
        charging += weights.charging_time_weight * float(n_chg * n_chg)
        waiting += weights.waiting_time_weight * float(n_wait * n_wait)

    congestion = 0.0
    if trajectories:
        horizon = len(trajectories[0].steps)
        for k in range(horizon):
            flows: dict[int, int] = {}
            for traj in trajectories:
                rec = traj.steps[k]
                if rec.mode is Mode.DRIVING:
                    flows[rec.inp.xi] = flows.get(rec.inp.xi, 0) + 1
            step_sq = 0
            for h in sorted(flows):
                step_sq += flows[h] * flows[h]
            congestion += weights.congestion_weight * float(step_sq)
    return charging, waiting, congestion


def occupancy_table(trajectories: Sequence["CarTrajectory"],
                    n_nodes: int) -> list[list[int]]:
    """Per-step, per-node counts of charging cars: table[k][n-1]."""
    if not trajectories:
        return []
    horizon = len(trajectories[0].steps)
    table = [[0] * n_nodes for _ in range(horizon)]
    for traj in trajectories:
        for rec in traj.steps:
            if rec.mode is Mode.CHARGING:
                table[rec.step][rec.state.node - 1] += 1
    return table


def charging_sessions(traj: "CarTrajectory") -> list[tuple[int, int, float, float]]:
    """Maximal runs of consecutive charging steps for one car.

    Returns (start_step, n_steps, energy_before, energy_after) per session.
    """
    sessions = []
    prev_energy = traj.initial.energy
    start = None
    e_before = prev_energy
    count = 0
    for rec in traj.steps:
        if rec.mode is Mode.CHARGING:
            if start is None:
                start = rec.step
                e_before = prev_energy
                count = 0
            count += 1
        elif start is not None:
            sessions.append((start, count, e_before, prev_energy))
            start = None
        prev_energy = rec.state.energy
    if start is not None:
        sessions.append((start, count, e_before, prev_energy))
    return sessions


def total_cost(trajectories: Sequence["CarTrajectory"], graph: "HighwayGraph",
               weights: CostWeights, battery: BatteryParams,
               station_variant: str = ABS_DEVIATION) -> CostBreakdown:
    """Full cost breakdown of a set of trajectories.

    Components are computed independently and summed in a fixed order, so
    two evaluations of the same trajectories agree bit for bit. Degradation
    is priced per charging session from its mean power and duration.
    """
    occupancy = occupancy_table(trajectories, graph.n_nodes)
    station = station_cost(occupancy, graph, weights, station_variant)
    electricity = electricity_cost(trajectories, weights)
    charging, waiting, congestion = customer_time_costs(trajectories, weights)

    degradation = 0.0
    for traj in trajectories:
        for _start, n_steps, e_before, e_after in charging_sessions(traj):
            minutes = n_steps * traj.t_s
            delta = e_after - e_before
            mean_power = 0.0 if minutes == 0.0 else delta / (minutes / 60.0)
            degradation += degradation_cost(mean_power, minutes, battery)

    return CostBreakdown.assemble(station, electricity, congestion,
                                  charging, waiting, degradation)
