"""Battery, motion, and per-vehicle physical models.

Energy moves by power times the sampling interval (one-step Euler Coulomb
counting). The charging curve is constant-power up to a knee energy and
tapers affinely above it; continuity at the knee is enforced when the
parameters are constructed, which is what makes the closed-form charging
time below valid.

Units: energy kWh, power kW, time minutes, distance miles. Speeds are
expressed in miles per step (the distance covered in one sampling interval).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .errors import EnergyUnderrun

KNEE_CONTINUITY_RTOL = 1e-9


class Mode(enum.Enum):
    CHARGING = "charging"
    WAITING = "waiting"
    DRIVING = "driving"


@dataclass(frozen=True)
class BatteryParams:
    """Battery envelope, charging curve, and degradation coefficients.

    The charging curve is P(E) = p_max for E < e_knee and
    P(E) = chg_m - chg_n * E above the knee. Degradation coefficients are
    dollars per minute as a quadratic in mean charging power (kW) and must
    be nonnegative: the optimizer relies on every cost term being a
    monotone lower bound while a plan is still being built.
    """

    e_min: float
    e_max: float
    e_knee: float
    p_max: float
    chg_m: float
    chg_n: float
    deg_a: float
    deg_b: float
    deg_c: float

    def __post_init__(self):
        if not 0.0 <= self.e_min < self.e_knee < self.e_max:
            raise ValueError(
                f"need 0 <= e_min < e_knee < e_max, got "
                f"({self.e_min}, {self.e_knee}, {self.e_max})"
            )
        if self.p_max <= 0.0:
            raise ValueError(f"p_max must be positive, got {self.p_max}")
        if self.chg_n <= 0.0:
            raise ValueError(f"chg_n must be positive, got {self.chg_n}")
        knee_gap = self.chg_m - self.chg_n * self.e_knee - self.p_max
        if abs(knee_gap) > KNEE_CONTINUITY_RTOL * max(1.0, self.p_max):
            raise ValueError(
                f"charging curve discontinuous at the knee: "
                f"chg_m - chg_n*e_knee = {self.chg_m - self.chg_n * self.e_knee} "
                f"but p_max = {self.p_max}"
            )
        if self.chg_m - self.chg_n * self.e_max < -1e-12:
            raise ValueError(
                "charging power would be negative below full: need "
                f"chg_m - chg_n*e_max >= 0, got {self.chg_m - self.chg_n * self.e_max}"
            )
        for name in ("deg_a", "deg_b", "deg_c"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be nonnegative")


@dataclass(frozen=True)
class MotionParams:
    """Kinematics shared by every car.

    base_speed is the free-flow distance covered in one step (miles/step),
    t_s the sampling interval in minutes, d_max an upper bound on trip
    distance used for domain checks and solver boxes. d_max must be at
    least the longest simple path in the active graph; the scenario loader
    checks that.
    """

    base_speed: float
    t_s: float
    d_max: float

    def __post_init__(self):
        if self.base_speed <= 0.0:
            raise ValueError(f"base_speed must be positive, got {self.base_speed}")
        if self.t_s <= 0.0:
            raise ValueError(f"t_s must be positive, got {self.t_s}")
        if self.d_max <= 0.0:
            raise ValueError(f"d_max must be positive, got {self.d_max}")


@dataclass(frozen=True)
class VehicleState:
    """Hybrid state of one car: energy, odometer, and position.

    Position is either at a node (node set, edge None, edge_progress 0) or
    on an edge (edge set, node None, 0 < edge_progress < edge length).
    ``mode`` is the mode that produced this state; freshly loaded cars are
    Waiting. The transition pipeline briefly builds states with
    edge_progress == edge length before the arrival reset; ``validate``
    flags those, the constructor does not.
    """

    energy: float
    trip_distance: float
    edge_progress: float
    node: int | None
    edge: tuple[int, int] | None
    mode: Mode

    @classmethod
    def at_node(cls, node: int, energy: float, trip_distance: float = 0.0,
                mode: Mode = Mode.WAITING) -> "VehicleState":
        return cls(energy=energy, trip_distance=trip_distance, edge_progress=0.0,
                   node=node, edge=None, mode=mode)

    @classmethod
    def on_edge(cls, edge: tuple[int, int], edge_progress: float, energy: float,
                trip_distance: float, mode: Mode = Mode.DRIVING) -> "VehicleState":
        return cls(energy=energy, trip_distance=trip_distance,
                   edge_progress=edge_progress, node=None, edge=edge, mode=mode)

    def is_at_node(self) -> bool:
        return self.node is not None

    def location_label(self) -> str:
        if self.node is not None:
            return f"n{self.node}"
        return f"{self.edge[0]}->{self.edge[1]}"

    def validate(self, graph, battery: BatteryParams, motion: MotionParams) -> list[str]:
        """Return domain violations for this state (empty list when clean)."""
        problems = []
        if (self.node is None) == (self.edge is None):
            problems.append("exactly one of node/edge must be set")
            return problems
        if not battery.e_min <= self.energy <= battery.e_max:
            problems.append(
                f"energy {self.energy} outside [{battery.e_min}, {battery.e_max}]")
        if self.mode is Mode.DRIVING and self.energy <= 0.0:
            problems.append("driving requires positive energy")
        if not 0.0 <= self.trip_distance < motion.d_max:
            problems.append(
                f"trip distance {self.trip_distance} outside [0, {motion.d_max})")
        if self.node is not None:
            if self.edge_progress != 0.0:
                problems.append("edge_progress must be 0 at a node")
            if not 1 <= self.node <= graph.n_nodes:
                problems.append(f"node {self.node} out of range")
        else:
            i, j = self.edge
            if not graph.has_edge(i, j):
                problems.append(f"no edge {i}->{j} in the graph")
            else:
                length = graph.length(i, j)
                if not 0.0 < self.edge_progress < length:
                    problems.append(
                        f"edge_progress {self.edge_progress} outside (0, {length})")
        return problems


def charge_power(energy: float, battery: BatteryParams) -> float:
    """Charging power (kW) available at the given state of charge."""
    if not battery.e_min - 1e-9 <= energy <= battery.e_max + 1e-9:
        raise ValueError(
            f"energy {energy} outside [{battery.e_min}, {battery.e_max}]")
    if energy < battery.e_knee:
        return battery.p_max
    return battery.chg_m - battery.chg_n * energy


def charging_time_closed_form(e_i: float, e_f: float, battery: BatteryParams) -> float:
    """Minutes needed to charge from e_i to e_f at the curve's full rate.

    Constant-power segment up to the knee, then the affine taper integrates
    to a log term. Returns inf when e_f sits where the taper power reaches
    zero (the curve only approaches such a level asymptotically).
    """
    if not battery.e_min <= e_i <= e_f <= battery.e_max:
        raise ValueError(
            f"need e_min <= e_i <= e_f <= e_max, got e_i={e_i}, e_f={e_f}")
    hours = 0.0
    if e_i < battery.e_knee:
        hours += (min(e_f, battery.e_knee) - e_i) / battery.p_max
    if e_f > battery.e_knee:
        lo = max(e_i, battery.e_knee)
        top = battery.chg_m - battery.chg_n * lo
        bot = battery.chg_m - battery.chg_n * e_f
        if bot <= 0.0:
            return math.inf
        hours += math.log(top / bot) / battery.chg_n
    return 60.0 * hours


def step_energy(state: VehicleState, mode: Mode, battery: BatteryParams,
                motion: MotionParams, drive_power: float) -> float:
    """Energy after one step in the given mode.

    Charging clamps at e_max. A driving result below e_min raises
    EnergyUnderrun, which callers treat as "this input is inadmissible".
    """
    if mode is Mode.WAITING:
        return state.energy
    if mode is Mode.CHARGING:
        gained = charge_power(state.energy, battery) * motion.t_s / 60.0
        return min(battery.e_max, state.energy + gained)
    after = state.energy - drive_power * motion.t_s / 60.0
    if after < battery.e_min:
        raise EnergyUnderrun(
            f"driving step would take energy to {after} < e_min {battery.e_min}")
    return after


def degradation_cost(mean_power: float, mean_time: float, battery: BatteryParams) -> float:
    """Dollar cost of one charging session: quadratic in mean power, linear in time.

    mean_power in kW, mean_time in minutes.
    """
    if mean_power < 0.0 or mean_time < 0.0:
        raise ValueError("mean power and time must be nonnegative")
    return (battery.deg_a * mean_power * mean_power
            + battery.deg_b * mean_power + battery.deg_c) * mean_time


def incremental_velocity(edge: tuple[int, int], flow: int, graph,
                         motion: MotionParams, congestion_coupling: bool = False) -> float:
    """Distance covered in one step on the given edge (miles/step).

    With the coupling off every car moves base_speed per step. With it on,
    speed follows the congested travel time, so one step covers
    length / travel_time * t_s miles.
    """
    if not congestion_coupling:
        return motion.base_speed
    from .costs import bpr_travel_time  # deferred: costs imports this module

    minutes = bpr_travel_time(edge, flow, graph)
    return graph.length(*edge) / minutes * motion.t_s


def drive_power_for_speed(velocity: float, motion: MotionParams,
                          constant_kw: float, kappa: float | None = None) -> float:
    """Traction power draw (kW) for one step at the given speed.

    Constant by default. Passing kappa (kW per mph) switches to a draw
    proportional to speed, the simplest speed-dependent hook.
    """
    if kappa is None:
        return constant_kw
    mph = velocity / motion.t_s * 60.0
    return kappa * mph
