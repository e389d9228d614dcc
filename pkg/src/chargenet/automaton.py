"""Per-car hybrid automaton and the joint multi-car executor.

Each car is a three-mode machine (Charging / Waiting / Driving) sampled
every t_s minutes. The discrete input is (gamma, charge, xi): gamma means
"stay at a node", charge requests a charger, and xi is the one-hot edge
selector flattened to a single 1-based index. A car parked at node i
carries the diagonal index (i-1)*N+i, so the selector always sums to one
and real-edge flows count exactly the driving cars.

Mode selection: gamma and charge -> Charging; gamma alone -> Waiting;
not gamma -> Driving. Event flags are evaluated on the post-motion state,
before the arrival reset snaps the car to the head node.

Station capacity follows a one-step memory rule: a car may start charging
only where the previous step left a charger free, while a car already
charging may keep its plug even at a full station. Within a step, total
requests can never exceed capacity.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Sequence

from .errors import EnergyUnderrun, InadmissibleInputError, InfeasibleStepError
from .network import HighwayGraph, decode_edge, edge_index
from .vehicle import (BatteryParams, Mode, MotionParams, VehicleState,
                      drive_power_for_speed, incremental_velocity, step_energy)


@dataclass(frozen=True)
class DiscreteInput:
    """One step's control: (gamma, charge, xi) with xi a flattened edge index."""

    gamma: bool
    charge: bool
    xi: int

    def __post_init__(self):
        if self.charge and not self.gamma:
            raise ValueError("charge requires gamma (cars only charge parked)")
        if self.xi < 1:
            raise ValueError(f"xi must be a 1-based edge index, got {self.xi}")

    def code(self) -> tuple[int, int, int]:
        """Total order used for deterministic tie-breaking."""
        return (int(self.gamma), int(self.charge), self.xi)

    def one_hot(self, n_nodes: int) -> tuple[int, ...]:
        vec = [0] * (n_nodes * n_nodes)
        vec[self.xi - 1] = 1
        return tuple(vec)

    @classmethod
    def wait(cls, node: int, n_nodes: int) -> "DiscreteInput":
        return cls(True, False, edge_index(node, node, n_nodes))

    @classmethod
    def charge_at(cls, node: int, n_nodes: int) -> "DiscreteInput":
        return cls(True, True, edge_index(node, node, n_nodes))

    @classmethod
    def drive(cls, i: int, j: int, n_nodes: int) -> "DiscreteInput":
        return cls(False, False, edge_index(i, j, n_nodes))


@dataclass(frozen=True)
class EventFlags:
    edge_complete: bool
    moving_on_edge: bool


@dataclass(frozen=True)
class SimParams:
    """Physics shared by every car in a run."""

    battery: BatteryParams
    motion: MotionParams
    drive_power_kw: float
    congestion_coupling: bool = False
    drive_kappa: float | None = None


@dataclass(frozen=True)
class WorldContext:
    """What one car can see of the world when choosing or applying an input.

    station_occupancy[n-1] counts chargers in use during the previous step
    (modeled cars plus any external occupants). committed[n-1], when given,
    counts chargers already claimed for the current step; the joint executor
    fills it in as it walks the cars in ascending order. edge_flows carries
    the current step's per-edge driving counts once all cars have chosen,
    for the optional congestion coupling.
    """

    graph: HighwayGraph
    step: int
    station_occupancy: tuple[int, ...]
    params: SimParams
    committed: tuple[int, ...] | None = None
    edge_flows: dict[tuple[int, int], int] | None = None


def mode_select(inp: DiscreteInput) -> Mode:
    """Total map from the binary pair to a mode."""
    if inp.gamma:
        return Mode.CHARGING if inp.charge else Mode.WAITING
    return Mode.DRIVING


def event_generator(state: VehicleState, graph: HighwayGraph) -> EventFlags:
    """Edge events of a post-motion state (before any arrival reset).

    edge_complete fires at progress >= edge length; moving_on_edge on the
    open interval between the endpoints. A car at a node raises neither.
    """
    if state.edge is None:
        return EventFlags(False, False)
    length = graph.length(*state.edge)
    if state.edge_progress >= length:
        return EventFlags(True, False)
    if 0.0 < state.edge_progress < length:
        return EventFlags(False, True)
    return EventFlags(False, False)


def _charge_admissible(state: VehicleState, ctx: WorldContext) -> tuple[bool, str]:
    node = state.node
    cap = ctx.graph.station_capacity[node - 1]
    if cap <= 0:
        return False, f"node {node} has no charging station"
    still_plugged = state.mode is Mode.CHARGING
    if not still_plugged and ctx.station_occupancy[node - 1] >= cap:
        return False, (f"station at node {node} was full throughout the "
                       "previous step")
    if ctx.committed is not None and ctx.committed[node - 1] + 1 > cap:
        return False, f"station at node {node} is at capacity this step"
    return True, ""


def _drive_feasible(state: VehicleState, credit: float, ctx: WorldContext) -> bool:
    """Per-step strand prevention and trip-distance domain guard."""
    params = ctx.params
    power = drive_power_for_speed(params.motion.base_speed, params.motion,
                                  params.drive_power_kw, params.drive_kappa)
    after = state.energy - power * params.motion.t_s / 60.0
    if after < params.battery.e_min:
        return False
    if state.trip_distance + credit >= params.motion.d_max:
        return False
    return True


def admissible_inputs(state: VehicleState, ctx: WorldContext,
                      prev: DiscreteInput | None = None) -> tuple[DiscreteInput, ...]:
    """Every input the automaton accepts at this state, sorted by code.

    ``prev`` is accepted for signature compatibility but unused: with the
    explicit at-node / on-edge position the continuity rule for xi is fully
    determined by the state itself.
    """
    del prev
    graph = ctx.graph
    n = graph.n_nodes
    out = []
    if state.edge is not None:
        i, j = state.edge
        length = graph.length(i, j)
        credit = min(ctx.params.motion.base_speed, length - state.edge_progress)
        if _drive_feasible(state, credit, ctx):
            out.append(DiscreteInput.drive(i, j, n))
        return tuple(out)

    node = state.node
    for j in graph.neighbors(node):
        length = graph.length(node, j)
        credit = min(ctx.params.motion.base_speed, length)
        if _drive_feasible(state, credit, ctx):
            out.append(DiscreteInput.drive(node, j, n))
    out.append(DiscreteInput.wait(node, n))
    ok, _why = _charge_admissible(state, ctx)
    if ok:
        out.append(DiscreteInput.charge_at(node, n))
    out.sort(key=DiscreteInput.code)
    return tuple(out)


def transition(state: VehicleState, inp: DiscreteInput, ctx: WorldContext,
               params: SimParams | None = None) -> VehicleState:
    """Apply one input for one step; raises InadmissibleInputError otherwise.

    Driving advances progress by the step's velocity. Overshooting the edge
    end is clamped: the trip odometer is credited only the remaining edge
    length and the car lands exactly on the head node with progress reset.
    """
    params = params or ctx.params
    graph = ctx.graph
    n = graph.n_nodes
    mode = mode_select(inp)

    if mode is not Mode.DRIVING:
        if state.node is None:
            raise InadmissibleInputError(
                f"cannot {mode.value} mid-edge at {state.location_label()}")
        if inp.xi != edge_index(state.node, state.node, n):
            raise InadmissibleInputError(
                f"parked input must select the node marker, got xi={inp.xi}")
        if mode is Mode.CHARGING:
            ok, why = _charge_admissible(state, ctx)
            if not ok:
                raise InadmissibleInputError(why)
            energy = step_energy(state, Mode.CHARGING, params.battery,
                                 params.motion, params.drive_power_kw)
        else:
            energy = state.energy
        return VehicleState.at_node(state.node, energy, state.trip_distance,
                                    mode)

    i, j = decode_edge(inp.xi, n)
    if state.edge is not None:
        if (i, j) != state.edge:
            raise InadmissibleInputError(
                f"mid-edge car must continue on {state.edge}, got ({i}, {j})")
        progress = state.edge_progress
    else:
        if i != state.node:
            raise InadmissibleInputError(
                f"departure edge must leave node {state.node}, got ({i}, {j})")
        if not graph.has_edge(i, j):
            raise InadmissibleInputError(f"no edge {i}->{j} in the graph")
        progress = 0.0

    length = graph.length(i, j)
    flow = 1
    if ctx.edge_flows is not None:
        flow = ctx.edge_flows.get((i, j), 1)
    velocity = incremental_velocity((i, j), flow, graph, params.motion,
                                    params.congestion_coupling)
    power = drive_power_for_speed(velocity, params.motion,
                                  params.drive_power_kw, params.drive_kappa)
    try:
        energy = step_energy(state, Mode.DRIVING, params.battery,
                             params.motion, power)
    except EnergyUnderrun as exc:
        raise InadmissibleInputError(str(exc)) from exc

    tentative = progress + velocity
    if tentative >= length:
        credit = length - progress
        trip = state.trip_distance + credit
        if trip >= params.motion.d_max:
            raise InadmissibleInputError(
                f"trip distance {trip} would reach d_max {params.motion.d_max}")
        return VehicleState.at_node(j, energy, trip, Mode.DRIVING)
    trip = state.trip_distance + velocity
    if trip >= params.motion.d_max:
        raise InadmissibleInputError(
            f"trip distance {trip} would reach d_max {params.motion.d_max}")
    return VehicleState.on_edge((i, j), tentative, energy, trip, Mode.DRIVING)


@dataclass(frozen=True)
class TrajectoryStep:
    step: int
    inp: DiscreteInput
    mode: Mode
    state: VehicleState


@dataclass(frozen=True)
class CarTrajectory:
    """One car's executed run: initial state plus one record per step."""

    car_id: int
    initial: VehicleState
    steps: tuple[TrajectoryStep, ...]
    t_s: float


def simulate_execution(initial_states: Sequence[VehicleState],
                       plans: Sequence[Sequence[DiscreteInput]],
                       ctx: WorldContext,
                       params: SimParams | None = None) -> list[CarTrajectory]:
    """Run every car through its input sequence, step-locked.

    Cars are processed in ascending order within each step; the first car
    whose input breaks a rule aborts the run with an InfeasibleStepError
    naming the car (1-based) and step. ctx supplies the graph and the
    standing occupancy before step 0 (external occupants included).
    """
    params = params or ctx.params
    graph = ctx.graph
    p = len(initial_states)
    if len(plans) != p:
        raise ValueError(f"{p} initial states but {len(plans)} plans")
    if p == 0:
        return []
    horizon = len(plans[0])
    if horizon == 0:
        raise ValueError("plans must contain at least one step")
    for c, plan in enumerate(plans):
        if len(plan) != horizon:
            raise ValueError(f"car {c + 1} plan has {len(plan)} steps, "
                             f"expected {horizon}")
    base = tuple(ctx.station_occupancy)
    if len(base) != graph.n_nodes:
        raise ValueError("station_occupancy must have one entry per node")

    states = list(initial_states)
    records: list[list[TrajectoryStep]] = [[] for _ in range(p)]
    # cars handed in mid-session hold a plug, so the first step's
    # one-step-memory check must count them on top of the externals
    plugged = [0] * graph.n_nodes
    for st in states:
        if st.mode is Mode.CHARGING and st.node is not None:
            plugged[st.node - 1] += 1
    prev_occ = tuple(b + o for b, o in zip(base, plugged))
    for k in range(horizon):
        committed = list(base)
        # each car validates against the plugs claimed by lower-numbered
        # cars only, so keep the pre-claim snapshot it was judged with
        seen: list[tuple[int, ...]] = []
        # admissibility pass, cars in ascending order
        for c in range(p):
            inp = plans[c][k]
            seen.append(tuple(committed))
            ctx_c = WorldContext(graph=graph, step=k,
                                 station_occupancy=prev_occ, params=params,
                                 committed=seen[c])
            mode = mode_select(inp)
            legal = admissible_inputs(states[c], ctx_c)
            if inp not in legal:
                # re-derive the reason for a useful message
                reason = "input not admissible here"
                if mode is Mode.CHARGING and states[c].node is not None:
                    ok, why = _charge_admissible(states[c], ctx_c)
                    if not ok:
                        reason = why
                raise InfeasibleStepError(c + 1, k, reason)
            if mode is Mode.CHARGING:
                committed[states[c].node - 1] += 1

        flows: dict[tuple[int, int], int] = {}
        for c in range(p):
            inp = plans[c][k]
            if not inp.gamma:
                pair = decode_edge(inp.xi, graph.n_nodes)
                flows[pair] = flows.get(pair, 0) + 1

        next_occ = [0] * graph.n_nodes
        for c in range(p):
            inp = plans[c][k]
            ctx_c = WorldContext(graph=graph, step=k,
                                 station_occupancy=prev_occ, params=params,
                                 committed=seen[c], edge_flows=flows)
            try:
                new_state = transition(states[c], inp, ctx_c, params)
            except InadmissibleInputError as exc:
                raise InfeasibleStepError(c + 1, k, str(exc)) from exc
            states[c] = new_state
            mode = mode_select(inp)
            if mode is Mode.CHARGING:
                next_occ[new_state.node - 1] += 1
            records[c].append(TrajectoryStep(k, inp, mode, new_state))
        prev_occ = tuple(b + o for b, o in zip(base, next_occ))

    return [CarTrajectory(car_id=c + 1, initial=initial_states[c],
                          steps=tuple(records[c]), t_s=params.motion.t_s)
            for c in range(p)]


# ---------------------------------------------------------------------------
# property checking
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Verdict:
    passed: bool
    detail: str
    witness: object | None = None


@dataclass(frozen=True)
class PropertyReport:
    non_blocking: Verdict
    domain_preserving: Verdict
    non_zeno: Verdict
    nondeterminism_witnessed: bool
    states_explored: int

    @property
    def all_passed(self) -> bool:
        return (self.non_blocking.passed and self.domain_preserving.passed
                and self.non_zeno.passed)


def _state_key(state: VehicleState, battery: BatteryParams,
               motion: MotionParams, max_len: float):
    q_e = 1e-6 * (battery.e_max - battery.e_min)
    q_p = 1e-6 * max_len if max_len > 0.0 else 1.0
    q_d = 1e-6 * motion.d_max
    where = state.node if state.node is not None else state.edge
    return (where, state.mode, round(state.energy / q_e),
            round(state.edge_progress / q_p), round(state.trip_distance / q_d))


def check_properties(scenario, depth: int = 8, samples: int = 200,
                     seed: int = 0, max_states: int = 200_000) -> PropertyReport:
    """Bounded verification of the automaton on a concrete scenario.

    Non-blocking: breadth-first exploration of each car's reachable states
    down to ``depth`` steps, deduplicated on a 1e-6 quantization of each
    continuous range; fails with a witness state if any admissible set is
    empty. Occupancy cannot block (waiting is always available at a node),
    so single-car exploration is exact for this property.

    Domain preservation: every explored state plus ``samples`` random joint
    rollouts must satisfy the mode domains, the energy and distance boxes,
    and the station capacity bound.

    Non-Zeno holds structurally: each sampled step takes exactly t_s
    minutes and applies exactly one mode, so no finite interval can contain
    infinitely many switches. Reported as a verdict for completeness.
    """
    graph = scenario.graph
    params = SimParams(battery=scenario.battery, motion=scenario.motion,
                       drive_power_kw=scenario.drive_power_kw,
                       congestion_coupling=scenario.congestion_coupling)
    zeros = tuple(0 for _ in range(graph.n_nodes))
    max_len = graph.max_edge_length()

    blocked_witness = None
    domain_witness = None
    nondet = False
    explored = 0

    for car in scenario.cars:
        start = VehicleState.at_node(car.start_node, car.initial_energy)
        seen = {_state_key(start, scenario.battery, scenario.motion, max_len)}
        frontier = [start]
        for _level in range(depth):
            if blocked_witness is not None:
                break
            nxt = []
            for state in frontier:
                explored += 1
                bad = state.validate(graph, scenario.battery, scenario.motion)
                if bad and domain_witness is None:
                    domain_witness = (state, "; ".join(bad))
                ctx = WorldContext(graph=graph, step=0,
                                   station_occupancy=zeros, params=params)
                inputs = admissible_inputs(state, ctx)
                if not inputs:
                    blocked_witness = state
                    break
                if len(inputs) >= 2:
                    nondet = True
                for inp in inputs:
                    try:
                        new_state = transition(state, inp, ctx, params)
                    except InadmissibleInputError as exc:
                        blocked_witness = state
                        domain_witness = domain_witness or (state, str(exc))
                        break
                    key = _state_key(new_state, scenario.battery,
                                     scenario.motion, max_len)
                    if key not in seen and len(seen) < max_states:
                        seen.add(key)
                        nxt.append(new_state)
            frontier = nxt
            if not frontier:
                break

    # joint random rollouts: domain plus capacity under concurrency
    rng = random.Random(seed)
    capacity_ok = True
    rollout_witness = None
    for _trial in range(samples):
        states = [VehicleState.at_node(c.start_node, c.initial_energy)
                  for c in scenario.cars]
        prev_occ = zeros
        for k in range(depth):
            committed = [0] * graph.n_nodes
            seen = []  # per-car claim snapshots, before each car's own claim
            chosen = []
            for c, state in enumerate(states):
                seen.append(tuple(committed))
                ctx = WorldContext(graph=graph, step=k,
                                   station_occupancy=prev_occ, params=params,
                                   committed=seen[c])
                options = admissible_inputs(state, ctx)
                if not options:
                    blocked_witness = blocked_witness or state
                    chosen = None
                    break
                inp = options[rng.randrange(len(options))]
                if mode_select(inp) is Mode.CHARGING:
                    committed[state.node - 1] += 1
                chosen.append(inp)
            if chosen is None:
                break
            occ = [0] * graph.n_nodes
            for c, inp in enumerate(chosen):
                ctx = WorldContext(graph=graph, step=k,
                                   station_occupancy=prev_occ, params=params,
                                   committed=seen[c])
                states[c] = transition(states[c], inp, ctx, params)
                bad = states[c].validate(graph, scenario.battery,
                                         scenario.motion)
                if bad and domain_witness is None:
                    domain_witness = (states[c], "; ".join(bad))
                if mode_select(inp) is Mode.CHARGING:
                    occ[states[c].node - 1] += 1
            for n in range(graph.n_nodes):
                if occ[n] > graph.station_capacity[n]:
                    capacity_ok = False
                    rollout_witness = (k, n + 1, occ[n])
            prev_occ = tuple(occ)

    if blocked_witness is None:
        non_blocking = Verdict(True, f"no blocked state within depth {depth} "
                                     f"({explored} states examined)")
    else:
        non_blocking = Verdict(False,
                               f"blocked state reached: "
                               f"{blocked_witness.location_label()} with "
                               f"energy {blocked_witness.energy}",
                               witness=blocked_witness)

    if domain_witness is None and capacity_ok:
        domain_preserving = Verdict(True, "all explored and sampled states "
                                          "stayed inside their mode domains "
                                          "and capacity bounds")
    elif domain_witness is not None:
        domain_preserving = Verdict(False, f"domain violation: "
                                           f"{domain_witness[1]}",
                                    witness=domain_witness[0])
    else:
        domain_preserving = Verdict(False,
                                    f"capacity exceeded at step "
                                    f"{rollout_witness[0]} node "
                                    f"{rollout_witness[1]}",
                                    witness=rollout_witness)

    non_zeno = Verdict(True, "each step consumes t_s minutes and applies "
                             "exactly one discrete transition, so switches "
                             "cannot accumulate in finite time")

    return PropertyReport(non_blocking=non_blocking,
                          domain_preserving=domain_preserving,
                          non_zeno=non_zeno,
                          nondeterminism_witnessed=nondet,
                          states_explored=explored)
