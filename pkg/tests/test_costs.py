"""Cost components: BPR travel time, station deviation, time penalties."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chargenet import (ABS_DEVIATION, PAPER_LITERAL, CostWeights,
                       DiscreteInput, Mode, ScheduleProblem, VehicleState,
                       WorldContext, bpr_travel_time, charging_sessions,
                       customer_time_costs, edge_flow, electricity_cost,
                       load_scenario, occupancy_table, simulate_execution,
                       station_cost, total_cost)
from chargenet.automaton import CarTrajectory, TrajectoryStep
from conftest import line_graph, make_battery, make_weights, scenario_path


# ---------------------------------------------------------------------------
# BPR travel time
# ---------------------------------------------------------------------------

def test_bpr_free_flow_exact():
    g = line_graph([24.0], caps=[1, 1])  # free_flow_minutes == miles here
    assert bpr_travel_time((1, 2), 0.0, g) == 24.0


def test_bpr_at_link_capacity():
    g = line_graph([24.0], caps=[1, 1])  # link capacity 4.0
    assert bpr_travel_time((1, 2), 4.0, g) == pytest.approx(1.15 * 24.0,
                                                            rel=1e-12)


def test_bpr_strictly_increasing():
    g = line_graph([24.0], caps=[1, 1])
    times = [bpr_travel_time((1, 2), f, g) for f in (0, 1, 2, 3, 4, 5, 8)]
    assert all(a < b for a, b in zip(times, times[1:]))


def test_bpr_quartic_exponent():
    g = line_graph([24.0], caps=[1, 1])
    assert bpr_travel_time((1, 2), 2.0, g, exponent=4) == pytest.approx(
        24.0 * (1.0 + 0.15 * (2.0 / 4.0) ** 4), rel=1e-12)
    with pytest.raises(ValueError):
        bpr_travel_time((1, 2), 2.0, g, exponent=2)


def test_bpr_rejects_negative_flow():
    g = line_graph([24.0], caps=[1, 1])
    with pytest.raises(ValueError):
        bpr_travel_time((1, 2), -1.0, g)


# ---------------------------------------------------------------------------
# station deviation cost
# ---------------------------------------------------------------------------

def _station(occ_rows, caps, variant, unit=0.05):
    g = line_graph([24.0] * (len(caps) - 1), caps=caps)
    weights = make_weights(station_unit_cost=unit)
    return station_cost(occ_rows, g, weights, variant)


def test_station_default_zero_at_half_target():
    # preferred capacity 2 -> target occupancy 1
    assert _station([[1, 0]], caps=[2, 0], variant=ABS_DEVIATION) == 0.0


def test_station_default_linear_in_deviation():
    base = _station([[2, 0]], caps=[2, 0], variant=ABS_DEVIATION)
    double = _station([[3, 0]], caps=[2, 0], variant=ABS_DEVIATION)
    assert base == pytest.approx(0.05 * 1.0)
    assert double == pytest.approx(0.05 * 2.0)


def test_station_default_charges_empty_stations():
    # an idle station still sits half a target away from its setpoint
    assert _station([[0, 0]], caps=[2, 0], variant=ABS_DEVIATION) == pytest.approx(
        0.05 * 1.0)


def test_station_default_skips_zero_target_nodes():
    assert _station([[0, 0]], caps=[0, 0], variant=ABS_DEVIATION) == 0.0


def test_station_default_sums_over_steps_and_nodes():
    cost = _station([[0, 0], [2, 0]], caps=[2, 2], variant=ABS_DEVIATION)
    # step 0: |0-1| + |0-1|; step 1: |2-1| + |0-1|
    assert cost == pytest.approx(0.05 * 4.0)


def test_station_literal_zero_at_full_target():
    # printed case table zeroes the sign factor exactly at U == S
    assert _station([[2, 0]], caps=[2, 0], variant=PAPER_LITERAL) == 0.0


def test_station_literal_goes_negative_below_target():
    # the printed form is C * |sgn(U/S - 0.5)| * (U - S): the absolute value
    # strips the sign from the factor, so below target the product is negative
    cost = _station([[0, 0]], caps=[2, 0], variant=PAPER_LITERAL)
    assert cost == pytest.approx(0.05 * 1 * (0 - 2))


def test_station_literal_above_half():
    cost = _station([[3, 0]], caps=[2, 0], variant=PAPER_LITERAL)
    assert cost == pytest.approx(0.05 * 1 * (3 - 2))


def test_station_unknown_variant_rejected():
    with pytest.raises(ValueError):
        _station([[0, 0]], caps=[2, 0], variant="bogus")


# ---------------------------------------------------------------------------
# trajectory-derived pieces, on hand-built trajectories
# ---------------------------------------------------------------------------

def _traj(car_id, initial_energy, steps, t_s=30.0):
    """steps: list of (mode, node_or_edge, inp, energy_after)."""
    recs = []
    trip = 0.0
    for k, (mode, where, inp, energy) in enumerate(steps):
        if isinstance(where, tuple):
            state = VehicleState.on_edge(where, 10.0, energy, trip,
                                         mode=mode)
        else:
            state = VehicleState.at_node(where, energy, trip_distance=trip,
                                         mode=mode)
        recs.append(TrajectoryStep(step=k, inp=inp, mode=mode, state=state))
    return CarTrajectory(car_id=car_id,
                         initial=VehicleState.at_node(1, initial_energy),
                         steps=tuple(recs), t_s=t_s)


WAIT = DiscreteInput.wait(1, 2)
CHG = DiscreteInput.charge_at(1, 2)
DRV = DiscreteInput.drive(1, 2, 2)


def test_customer_time_quadratic_per_car():
    t1 = _traj(1, 20.0, [(Mode.CHARGING, 1, CHG, 40.0),
                         (Mode.CHARGING, 1, CHG, 60.0),
                         (Mode.WAITING, 1, WAIT, 60.0)])
    t2 = _traj(2, 20.0, [(Mode.WAITING, 1, WAIT, 20.0),
                         (Mode.WAITING, 1, WAIT, 20.0),
                         (Mode.WAITING, 1, WAIT, 20.0)])
    weights = make_weights(charging_time_weight=0.2, waiting_time_weight=0.15)
    charging, waiting, congestion = customer_time_costs([t1, t2], weights)
    assert charging == pytest.approx(0.2 * 4)          # 2 charging steps, squared
    assert waiting == pytest.approx(0.15 * (1 + 9))    # 1^2 + 3^2 per car
    assert congestion == 0.0


def test_congestion_squares_joint_flow():
    # two cars on the same edge in the same step: 2^2, not 1+1
    drive = DiscreteInput.drive(1, 2, 2)
    t1 = _traj(1, 20.0, [(Mode.DRIVING, (1, 2), drive, 12.5)])
    t2 = _traj(2, 20.0, [(Mode.DRIVING, (1, 2), drive, 12.5)])
    weights = make_weights(congestion_weight=0.1)
    _, _, together = customer_time_costs([t1, t2], weights)
    assert together == pytest.approx(0.1 * 4.0)

    t2b = _traj(2, 20.0, [(Mode.WAITING, 1, WAIT, 20.0)])
    _, _, alone = customer_time_costs([t1, t2b], weights)
    assert alone == pytest.approx(0.1 * 1.0)


def test_edge_flow_counts_selectors():
    drive = DiscreteInput.drive(1, 2, 2)
    t1 = _traj(1, 20.0, [(Mode.DRIVING, (1, 2), drive, 12.5)])
    t2 = _traj(2, 20.0, [(Mode.WAITING, 1, WAIT, 20.0)])
    assert edge_flow([t1, t2], drive.xi, 0) == 1
    assert edge_flow([t1, t2], WAIT.xi, 0) == 1
    assert edge_flow([t1, t2], 4, 0) == 0


def test_occupancy_table_counts_charging_only():
    t1 = _traj(1, 20.0, [(Mode.CHARGING, 1, CHG, 40.0),
                         (Mode.WAITING, 1, WAIT, 40.0)])
    t2 = _traj(2, 20.0, [(Mode.CHARGING, 1, CHG, 40.0),
                         (Mode.CHARGING, 1, CHG, 60.0)])
    table = occupancy_table([t1, t2], 2)
    assert table == [[2, 0], [1, 0]]


def test_charging_sessions_split_and_bounds():
    t = _traj(1, 20.0, [(Mode.CHARGING, 1, CHG, 40.0),
                        (Mode.CHARGING, 1, CHG, 55.0),
                        (Mode.WAITING, 1, WAIT, 55.0),
                        (Mode.CHARGING, 1, CHG, 60.0)])
    sessions = charging_sessions(t)
    assert sessions == [(0, 2, 20.0, 55.0), (3, 1, 55.0, 60.0)]


def test_electricity_cost_uses_node_row_step_column():
    t = _traj(1, 20.0, [(Mode.CHARGING, 1, CHG, 40.0),
                        (Mode.CHARGING, 1, CHG, 60.0)])
    weights = make_weights(
        electricity_enabled=True,
        electricity_price=((0.02, 0.05), (9.0, 9.0)))  # node 1 cheap, node 2 absurd
    cost = electricity_cost([t], weights)
    assert cost == pytest.approx(0.02 * 20.0 + 0.05 * 20.0)


def test_electricity_disabled_is_free():
    t = _traj(1, 20.0, [(Mode.CHARGING, 1, CHG, 40.0)])
    assert electricity_cost([t], make_weights()) == 0.0


def test_weights_reject_negative():
    with pytest.raises(ValueError):
        make_weights(congestion_weight=-0.1)


# ---------------------------------------------------------------------------
# total cost
# ---------------------------------------------------------------------------

def _simulated_fixture():
    sc = load_scenario(scenario_path("capacity_two_station"))
    problem = ScheduleProblem.from_scenario(sc)
    from chargenet import solve_exact
    sol = solve_exact(problem)
    return sc, problem, sol


def test_total_cost_bit_stable():
    sc, problem, sol = _simulated_fixture()
    a = total_cost(sol.trajectories, problem.graph, problem.weights,
                   problem.battery)
    b = total_cost(sol.trajectories, problem.graph, problem.weights,
                   problem.battery)
    assert a == b  # dataclass equality over every float field
    assert a.total == (a.station + a.electricity + a.congestion
                       + a.charging_time + a.waiting_time + a.degradation)


def test_total_cost_degradation_matches_sessions():
    from chargenet import degradation_cost
    sc, problem, sol = _simulated_fixture()
    breakdown = total_cost(sol.trajectories, problem.graph, problem.weights,
                           problem.battery)
    expected = 0.0
    for traj in sol.trajectories:
        for _start, n_steps, e_before, e_after in charging_sessions(traj):
            minutes = n_steps * traj.t_s
            mean_kw = (e_after - e_before) / (minutes / 60.0)
            expected += degradation_cost(mean_kw, minutes, problem.battery)
    assert breakdown.degradation == expected


@settings(max_examples=40, deadline=None)
@given(u=st.integers(min_value=0, max_value=6))
def test_station_default_nonnegative(u):
    assert _station([[u, 0]], caps=[3, 0], variant=ABS_DEVIATION) >= 0.0
