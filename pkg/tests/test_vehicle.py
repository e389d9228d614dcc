"""Battery curve, energy stepping, and degradation pricing."""

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chargenet import (BatteryParams, EnergyUnderrun, Mode, VehicleState,
                       charge_power, charging_time_closed_form,
                       degradation_cost, step_energy)
from conftest import make_battery, make_motion


# ---------------------------------------------------------------------------
# parameter validation
# ---------------------------------------------------------------------------

def test_battery_rejects_knee_discontinuity():
    # p_max must equal chg_m - chg_n*e_knee; 184 - 3*48 = 40, so 41 is off
    with pytest.raises(ValueError, match="discontinuous"):
        make_battery(p_max=41.0)


def test_battery_rejects_bad_energy_ordering():
    with pytest.raises(ValueError):
        make_battery(e_min=50.0)  # e_min above e_knee


def test_battery_rejects_negative_degradation_coefficient():
    with pytest.raises(ValueError, match="deg_b"):
        make_battery(deg_b=-0.1)


def test_battery_rejects_negative_power_before_full():
    # taper hits zero at chg_m/chg_n = 55 kWh, below e_max
    with pytest.raises(ValueError, match="negative"):
        BatteryParams(e_min=6.0, e_max=60.0, e_knee=48.0, p_max=21.0,
                      chg_m=165.0, chg_n=3.0, deg_a=0.0, deg_b=0.0, deg_c=0.0)


def test_motion_rejects_nonpositive_fields():
    for field in ("base_speed", "t_s", "d_max"):
        with pytest.raises(ValueError):
            make_motion(**{field: 0.0})


# ---------------------------------------------------------------------------
# charging curve
# ---------------------------------------------------------------------------

def test_charge_power_constant_below_knee(battery):
    assert charge_power(6.0, battery) == 40.0
    assert charge_power(47.999, battery) == 40.0


def test_charge_power_tapers_above_knee(battery):
    assert charge_power(50.0, battery) == 184.0 - 3.0 * 50.0
    assert charge_power(60.0, battery) == pytest.approx(4.0)


def test_charge_power_continuous_at_knee(battery):
    below = charge_power(battery.e_knee - 1e-12, battery)
    above = charge_power(battery.e_knee + 1e-12, battery)
    assert below == pytest.approx(above, rel=1e-9)


def test_charge_power_domain_enforced(battery):
    with pytest.raises(ValueError):
        charge_power(5.0, battery)
    with pytest.raises(ValueError):
        charge_power(61.0, battery)
    # the 1e-9 slack admits accumulated float noise at the box edges
    charge_power(battery.e_max + 5e-10, battery)


# ---------------------------------------------------------------------------
# closed-form charging time
# ---------------------------------------------------------------------------

def test_charging_time_zero_for_equal_bounds(battery):
    assert charging_time_closed_form(20.0, 20.0, battery) == 0.0


def test_charging_time_constant_segment(battery):
    # entirely below the knee: linear at p_max, in minutes
    minutes = charging_time_closed_form(10.0, 30.0, battery)
    assert minutes == pytest.approx(60.0 * 20.0 / 40.0)


def test_charging_time_taper_segment(battery):
    # entirely above the knee: the affine taper integrates to a log
    minutes = charging_time_closed_form(50.0, 55.0, battery)
    expect = 60.0 * math.log((184 - 3 * 50.0) / (184 - 3 * 55.0)) / 3.0
    assert minutes == pytest.approx(expect, rel=1e-12)


def test_charging_time_spanning_the_knee(battery):
    spanning = charging_time_closed_form(30.0, 55.0, battery)
    split = (charging_time_closed_form(30.0, 48.0, battery)
             + charging_time_closed_form(48.0, 55.0, battery))
    assert spanning == pytest.approx(split, rel=1e-12)


def test_charging_time_infinite_at_taper_zero():
    # curve reaches zero power exactly at e_max: full charge is asymptotic
    bp = BatteryParams(e_min=6.0, e_max=60.0, e_knee=48.0, p_max=36.0,
                       chg_m=180.0, chg_n=3.0, deg_a=0.0, deg_b=0.0, deg_c=0.0)
    assert charging_time_closed_form(50.0, 60.0, bp) == math.inf
    assert charging_time_closed_form(50.0, 59.0, bp) < math.inf


def test_charging_time_monotone_in_target(battery):
    times = [charging_time_closed_form(10.0, e_f, battery)
             for e_f in (12.0, 20.0, 40.0, 48.0, 52.0, 58.0)]
    assert all(a < b for a, b in zip(times, times[1:]))


def _euler_charging_minutes(e_i, e_f, battery, dt=0.001):
    """Integrate dE/dt = P(E) with tiny forward-Euler steps (dt minutes)."""
    energy = e_i
    minutes = 0.0
    while energy < e_f:
        power = charge_power(energy, battery)
        gain = power * dt / 60.0
        if energy + gain >= e_f:
            minutes += (e_f - energy) / (power / 60.0)
            break
        energy += gain
        minutes += dt
    return minutes


def test_charging_time_matches_integration(battery):
    import random
    rng = random.Random(42)
    for _ in range(20):
        e_i = rng.uniform(battery.e_min, battery.e_max - 1.0)
        e_f = rng.uniform(e_i, battery.e_max - 0.5)
        closed = charging_time_closed_form(e_i, e_f, battery)
        euler = _euler_charging_minutes(e_i, e_f, battery)
        assert closed == pytest.approx(euler, rel=1e-3)


# ---------------------------------------------------------------------------
# per-step energy
# ---------------------------------------------------------------------------

def _at(energy, battery):
    return VehicleState.at_node(1, energy)


def test_step_energy_waiting_is_identity(battery, motion):
    state = _at(33.3, battery)
    assert step_energy(state, Mode.WAITING, battery, motion, 15.0) == 33.3


def test_step_energy_charging_below_knee(battery, motion):
    state = _at(20.0, battery)
    # 40 kW for 30 minutes is 20 kWh
    assert step_energy(state, Mode.CHARGING, battery, motion, 15.0) == 40.0


def test_step_energy_charging_clamps_at_e_max(battery, motion):
    state = _at(59.0, battery)
    after = step_energy(state, Mode.CHARGING, battery, motion, 15.0)
    assert after == 60.0


def test_step_energy_driving_draws_power(battery, motion):
    state = _at(20.0, battery)
    after = step_energy(state, Mode.DRIVING, battery, motion, 15.0)
    assert after == 20.0 - 15.0 * 30.0 / 60.0


def test_step_energy_driving_underrun_raises(battery, motion):
    state = _at(13.0, battery)  # 13 - 7.5 = 5.5 < e_min
    with pytest.raises(EnergyUnderrun):
        step_energy(state, Mode.DRIVING, battery, motion, 15.0)


def test_full_charge_trajectory_monotone_and_bounded(battery, motion):
    state = _at(battery.e_min, battery)
    seen = [state.energy]
    for _ in range(50):
        nxt = step_energy(state, Mode.CHARGING, battery, motion, 15.0)
        assert nxt >= state.energy
        assert nxt <= battery.e_max
        state = _at(nxt, battery)
        seen.append(nxt)
    assert seen[-1] == pytest.approx(battery.e_max, abs=1e-6)


@settings(max_examples=100, deadline=None)
@given(energy=st.floats(min_value=6.0, max_value=60.0))
def test_charging_never_decreases(energy):
    battery = make_battery()
    motion = make_motion()
    state = VehicleState.at_node(1, energy)
    after = step_energy(state, Mode.CHARGING, battery, motion, 15.0)
    assert energy <= after <= battery.e_max


# ---------------------------------------------------------------------------
# degradation
# ---------------------------------------------------------------------------

def test_degradation_literal_quadratic(battery):
    cost = degradation_cost(35.0, 60.0, battery)
    assert cost == (2e-06 * 35.0 * 35.0 + 1e-04 * 35.0 + 2e-03) * 60.0


def test_degradation_zero_time_is_free(battery):
    assert degradation_cost(40.0, 0.0, battery) == 0.0


def test_degradation_rejects_negative_inputs(battery):
    with pytest.raises(ValueError):
        degradation_cost(-1.0, 10.0, battery)
    with pytest.raises(ValueError):
        degradation_cost(10.0, -1.0, battery)


@settings(max_examples=60, deadline=None)
@given(p1=st.floats(min_value=0.0, max_value=40.0),
       p2=st.floats(min_value=0.0, max_value=40.0),
       minutes=st.floats(min_value=0.0, max_value=600.0))
def test_degradation_monotone_in_power(p1, p2, minutes):
    battery = make_battery()
    lo, hi = sorted((p1, p2))
    assert (degradation_cost(lo, minutes, battery)
            <= degradation_cost(hi, minutes, battery))
