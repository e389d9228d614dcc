"""chargenet: charging-aware trip scheduling for electric fleets.

A fleet of battery-electric cars moves over a highway graph whose nodes
carry capacity-limited charging stations. Each car is a small hybrid
automaton (charging, waiting, driving); the package simulates fleets of
them step-locked, prices the outcome (station deviation, electricity,
congestion, time, battery wear), finds cost-optimal plans by exact branch
and bound, replans in a receding-horizon loop under disturbances, and can
export the same decision problem as a mixed-integer program in LP format.
"""

from ._backend import available_backends, get_kernel
from .automaton import (CarTrajectory, DiscreteInput, EventFlags, PropertyReport,
                        SimParams, TrajectoryStep, Verdict, WorldContext,
                        admissible_inputs, check_properties, event_generator,
                        mode_select, simulate_execution, transition)
from .costs import (ABS_DEVIATION, PAPER_LITERAL, CostBreakdown, CostWeights,
                    bpr_travel_time, charging_sessions, customer_time_costs,
                    edge_flow, electricity_cost, occupancy_table, station_cost,
                    total_cost)
from .errors import (ConfigError, EnergyUnderrun, InadmissibleInputError,
                     InfeasibleStepError, OracleSizeError, ScenarioError)
from .milp import (MilpModel, assignment_from_trajectories, build_milp,
                   inputs_from_assignment, lint_lp, parse_lp, write_lp)
from .network import (CarSpec, HighwayGraph, Scenario, ValidationReport,
                      decode_edge, edge_index, load_network, load_scenario,
                      longest_simple_path_miles, neighbors, validate_graph)
from .optimizer import (RhcResult, RhcState, ScheduleProblem, Solution,
                        brute_force_oracle, oracle_size_bound, rhc_loop,
                        solve_exact)
from .vehicle import (BatteryParams, Mode, MotionParams, VehicleState,
                      charge_power, charging_time_closed_form, degradation_cost,
                      drive_power_for_speed, incremental_velocity, step_energy)

__version__ = "0.1.0"

__all__ = [
    "ABS_DEVIATION", "PAPER_LITERAL",
    "BatteryParams", "CarSpec", "CarTrajectory", "ConfigError",
    "CostBreakdown", "CostWeights", "DiscreteInput", "EnergyUnderrun",
    "EventFlags", "HighwayGraph", "InadmissibleInputError",
    "InfeasibleStepError", "MilpModel", "Mode", "MotionParams",
    "OracleSizeError", "PropertyReport", "RhcResult", "RhcState", "Scenario",
    "ScenarioError", "ScheduleProblem", "SimParams", "Solution",
    "TrajectoryStep", "ValidationReport", "Verdict", "VehicleState",
    "WorldContext",
    "admissible_inputs", "assignment_from_trajectories",
    "available_backends", "bpr_travel_time", "brute_force_oracle",
    "build_milp", "charge_power", "charging_sessions",
    "charging_time_closed_form", "check_properties", "customer_time_costs",
    "decode_edge", "degradation_cost", "drive_power_for_speed", "edge_flow",
    "edge_index", "electricity_cost", "event_generator", "get_kernel",
    "incremental_velocity", "inputs_from_assignment", "lint_lp",
    "load_network", "load_scenario", "longest_simple_path_miles",
    "mode_select", "neighbors", "occupancy_table", "oracle_size_bound",
    "parse_lp", "rhc_loop", "simulate_execution", "solve_exact",
    "station_cost", "step_energy", "total_cost", "transition",
    "validate_graph", "write_lp",
    "__version__",
]
