"""Shared fixtures: parameter sets, small graphs, and random tiny problems."""

import os
import random

import pytest

from chargenet import (BatteryParams, CarSpec, CostWeights, HighwayGraph,
                       MotionParams, ScheduleProblem)

SCENARIO_DIR = os.path.join(os.path.dirname(__file__), "..", "scenarios")


def scenario_path(name: str) -> str:
    return os.path.join(SCENARIO_DIR, f"{name}.json")


@pytest.fixture
def scenarios_dir():
    return SCENARIO_DIR


def make_battery(**overrides) -> BatteryParams:
    params = dict(e_min=6.0, e_max=60.0, e_knee=48.0, p_max=40.0,
                  chg_m=184.0, chg_n=3.0, deg_a=2e-06, deg_b=1e-04,
                  deg_c=2e-03)
    params.update(overrides)
    return BatteryParams(**params)


def make_motion(**overrides) -> MotionParams:
    params = dict(base_speed=30.0, t_s=30.0, d_max=400.0)
    params.update(overrides)
    return MotionParams(**params)


def make_weights(**overrides) -> CostWeights:
    params = dict(station_unit_cost=0.05, congestion_weight=0.1,
                  charging_time_weight=0.2, waiting_time_weight=0.15)
    params.update(overrides)
    return CostWeights(**params)


@pytest.fixture
def battery():
    return make_battery()


@pytest.fixture
def motion():
    return make_motion()


@pytest.fixture
def weights():
    return make_weights()


def line_graph(lengths, caps, two_way=True) -> HighwayGraph:
    """Nodes 1..len(lengths)+1 in a row; lengths[i] spans node i+1 to i+2."""
    edges = {}
    for idx, miles in enumerate(lengths):
        i, j = idx + 1, idx + 2
        edges[(i, j)] = (float(miles), float(miles), 4.0)
        if two_way:
            edges[(j, i)] = (float(miles), float(miles), 4.0)
    return HighwayGraph.from_edges(len(lengths) + 1, list(caps), edges)


def cycle_graph(n_nodes, miles, caps) -> HighwayGraph:
    edges = {}
    for i in range(1, n_nodes + 1):
        j = i % n_nodes + 1
        edges[(i, j)] = (float(miles), float(miles), 4.0)
        edges[(j, i)] = (float(miles), float(miles), 4.0)
    return HighwayGraph.from_edges(n_nodes, list(caps), edges)


# ---------------------------------------------------------------------------
# randomized tiny problems, sized for the brute-force oracle
# ---------------------------------------------------------------------------

_EDGE_MILES = (18.0, 24.0, 27.0, 30.0, 36.0, 45.0)


def random_tiny_problem(seed: int) -> ScheduleProblem:
    """A random problem small enough for exhaustive enumeration.

    Graphs have at most 4 nodes and degree at most 3, so with one car and
    horizon <= 7, or two cars and horizon <= 5, the oracle's size bound
    (2 + maxdeg)^(p*H) stays under its default refusal limit.
    """
    rng = random.Random(seed)
    shape = rng.choice(("pair", "line3", "triangle", "square"))
    if shape == "pair":
        n, pairs = 2, [(1, 2)]
    elif shape == "line3":
        n, pairs = 3, [(1, 2), (2, 3)]
    elif shape == "triangle":
        n, pairs = 3, [(1, 2), (2, 3), (1, 3)]
    else:
        n, pairs = 4, [(1, 2), (2, 3), (3, 4), (4, 1)]
    edges = {}
    for i, j in pairs:
        miles = rng.choice(_EDGE_MILES)
        edges[(i, j)] = (miles, miles, 4.0)
        edges[(j, i)] = (miles, miles, 4.0)
    caps = [rng.choice((0, 1, 1, 2)) for _ in range(n)]
    if sum(caps) == 0:
        caps[rng.randrange(n)] = 1
    graph = HighwayGraph.from_edges(n, caps, edges)

    p = rng.choice((1, 2))
    horizon = rng.randint(4, 7) if p == 1 else rng.randint(3, 5)
    cars = []
    for _ in range(p):
        start = rng.randint(1, n)
        goal = rng.randint(1, n)
        while goal == start:
            goal = rng.randint(1, n)
        cars.append(CarSpec(start_node=start, end_node=goal,
                            initial_energy=rng.uniform(10.0, 40.0)))

    weights = make_weights()
    if rng.random() < 0.3:
        price = tuple(tuple(round(rng.uniform(0.01, 0.08), 3)
                            for _ in range(horizon)) for _ in range(n))
        weights = make_weights(electricity_enabled=True,
                               electricity_price=price)
    return ScheduleProblem(graph=graph, battery=make_battery(),
                           motion=make_motion(), weights=weights,
                           cars=tuple(cars), horizon=horizon,
                           drive_power_kw=15.0)
