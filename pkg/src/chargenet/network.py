"""Highway graph model, edge indexing, and scenario ingestion.

Nodes are 1-based ids. An edge (i, j) is identified by the flattened index
h = (i - 1) * N + j, which is a bijection between ordered pairs and
1..N^2. Diagonal indices (i, i) never correspond to real road segments;
the rest of the package uses them as "parked at node i" markers inside
the one-hot edge selector.

Scenario files are strict JSON: every section and field is checked, and
unknown keys anywhere are a hard error so typos cannot silently change an
experiment.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .costs import CostWeights
from .errors import ScenarioError
from .vehicle import BatteryParams, MotionParams

EdgeIndex = int


def edge_index(i: int, j: int, n_nodes: int) -> EdgeIndex:
    """Flattened 1-based index of the ordered pair (i, j)."""
    if not (1 <= i <= n_nodes and 1 <= j <= n_nodes):
        raise ValueError(f"node pair ({i}, {j}) out of range for N={n_nodes}")
    return (i - 1) * n_nodes + j


def decode_edge(h: EdgeIndex, n_nodes: int) -> tuple[int, int]:
    """Inverse of edge_index."""
    if not 1 <= h <= n_nodes * n_nodes:
        raise ValueError(f"edge index {h} out of range for N={n_nodes}")
    return (h - 1) // n_nodes + 1, (h - 1) % n_nodes + 1


@dataclass(frozen=True)
class CarSpec:
    """One requested trip: where the car starts, where it must end, its charge."""

    start_node: int
    end_node: int
    initial_energy: float


@dataclass(frozen=True)
class ValidationReport:
    messages: tuple[str, ...]

    @property
    def ok(self) -> bool:
        return not self.messages


@dataclass(frozen=True, eq=False)
class HighwayGraph:
    """Directed road graph with per-node charging stations.

    edge_length / free_flow_time / link_capacity are keyed by (i, j) node
    pairs; an undirected road contributes both orientations. adjacency is
    the dense N x N length matrix (0 where there is no edge), kept
    read-only and consistent with edge_length by construction.
    """

    n_nodes: int
    adjacency: np.ndarray
    edge_length: dict[tuple[int, int], float]
    station_capacity: tuple[int, ...]
    preferred_capacity: tuple[float, ...]
    free_flow_time: dict[tuple[int, int], float]
    link_capacity: dict[tuple[int, int], float]
    _neighbors: tuple[tuple[int, ...], ...] = field(repr=False, default=())

    @classmethod
    def from_edges(cls, n_nodes: int, station_capacity, edges,
                   preferred_capacity=None) -> "HighwayGraph":
        """Build a graph from edge records.

        ``edges`` maps (i, j) to (miles, free_flow_minutes, link_capacity);
        both orientations must be listed explicitly (the scenario loader
        expands undirected entries before calling this).
        """
        adjacency = np.zeros((n_nodes, n_nodes))
        length = {}
        t0 = {}
        cap = {}
        for (i, j), (miles, minutes, veh) in sorted(edges.items()):
            adjacency[i - 1, j - 1] = miles
            length[(i, j)] = float(miles)
            t0[(i, j)] = float(minutes)
            cap[(i, j)] = float(veh)
        adjacency.setflags(write=False)
        if preferred_capacity is None:
            preferred_capacity = tuple(float(c) for c in station_capacity)
        neigh = tuple(
            tuple(j for j in range(1, n_nodes + 1) if (i, j) in length)
            for i in range(1, n_nodes + 1))
        return cls(n_nodes=n_nodes, adjacency=adjacency, edge_length=length,
                   station_capacity=tuple(int(c) for c in station_capacity),
                   preferred_capacity=tuple(float(s) for s in preferred_capacity),
                   free_flow_time=t0, link_capacity=cap, _neighbors=neigh)

    def has_edge(self, i: int, j: int) -> bool:
        return (i, j) in self.edge_length

    def length(self, i: int, j: int) -> float:
        try:
            return self.edge_length[(i, j)]
        except KeyError:
            raise ValueError(f"no edge {i}->{j}") from None

    def neighbors(self, i: int) -> tuple[int, ...]:
        if not 1 <= i <= self.n_nodes:
            raise ValueError(f"node {i} out of range")
        if self._neighbors:
            return self._neighbors[i - 1]
        return tuple(j for j in range(1, self.n_nodes + 1) if self.has_edge(i, j))

    def edges(self) -> list[tuple[int, int]]:
        return sorted(self.edge_length)

    def max_edge_length(self) -> float:
        return max(self.edge_length.values()) if self.edge_length else 0.0


def neighbors(graph: HighwayGraph, i: int) -> tuple[int, ...]:
    """Nodes reachable from i along a single edge, ascending."""
    return graph.neighbors(i)


def validate_graph(graph: HighwayGraph) -> ValidationReport:
    """Check every structural invariant; each violation names its entity."""
    msgs = []
    n = graph.n_nodes
    if n < 1:
        msgs.append("graph must have at least one node")
        return ValidationReport(tuple(msgs))
    if graph.adjacency.shape != (n, n):
        msgs.append(f"adjacency shape {graph.adjacency.shape} != ({n}, {n})")
        return ValidationReport(tuple(msgs))
    if len(graph.station_capacity) != n or len(graph.preferred_capacity) != n:
        msgs.append("capacity vectors must have one entry per node")
        return ValidationReport(tuple(msgs))

    for idx in range(n):
        if graph.adjacency[idx, idx] != 0.0:
            msgs.append(f"node {idx + 1}: self-loop in adjacency")
        if graph.station_capacity[idx] < 0:
            msgs.append(f"node {idx + 1}: station capacity "
                        f"{graph.station_capacity[idx]} is negative")
        if graph.preferred_capacity[idx] < 0.0:
            msgs.append(f"node {idx + 1}: preferred capacity "
                        f"{graph.preferred_capacity[idx]} is negative")

    for (i, j), miles in sorted(graph.edge_length.items()):
        if i == j:
            msgs.append(f"edge {i}->{j}: self-loops are not allowed")
            continue
        if not (1 <= i <= n and 1 <= j <= n):
            msgs.append(f"edge {i}->{j}: endpoint out of range")
            continue
        if miles <= 0.0:
            msgs.append(f"edge {i}->{j}: length {miles} must be positive")
        if graph.adjacency[i - 1, j - 1] != miles:
            msgs.append(f"edge {i}->{j}: adjacency disagrees with edge_length")
        reverse = graph.edge_length.get((j, i))
        if reverse is not None and reverse != miles:
            msgs.append(f"edge {i}->{j}: asymmetric undirected edge "
                        f"({miles} vs {reverse})")
        if (i, j) not in graph.free_flow_time:
            msgs.append(f"edge {i}->{j}: missing free-flow time")
        elif graph.free_flow_time[(i, j)] <= 0.0:
            msgs.append(f"edge {i}->{j}: free-flow time must be positive")
        if (i, j) not in graph.link_capacity:
            msgs.append(f"edge {i}->{j}: missing link capacity")
        elif graph.link_capacity[(i, j)] <= 0.0:
            msgs.append(f"edge {i}->{j}: link capacity must be positive")

    nz = np.argwhere(graph.adjacency > 0.0)
    for row in nz:
        pair = (int(row[0]) + 1, int(row[1]) + 1)
        if pair not in graph.edge_length:
            msgs.append(f"edge {pair[0]}->{pair[1]}: adjacency entry "
                        "without edge_length record")

    if n > 1:
        seen = {1}
        frontier = [1]
        while frontier:
            cur = frontier.pop()
            for (i, j) in graph.edge_length:
                if i == cur and j not in seen:
                    seen.add(j)
                    frontier.append(j)
                elif j == cur and i not in seen:
                    seen.add(i)
                    frontier.append(i)
        missing = sorted(set(range(1, n + 1)) - seen)
        if missing:
            msgs.append(f"graph is disconnected: nodes {missing} unreachable")

    return ValidationReport(tuple(msgs))


def longest_simple_path_miles(graph: HighwayGraph) -> float:
    """Length of the longest simple directed path, exact for small graphs.

    Above 12 nodes the exhaustive walk is replaced by the safe upper bound
    (N - 1) * max edge length, which is what d_max is compared against.
    """
    if graph.n_nodes > 12:
        return (graph.n_nodes - 1) * graph.max_edge_length()
    best = 0.0

    def walk(node: int, used: set[int], dist: float):
        nonlocal best
        if dist > best:
            best = dist
        for nxt in graph.neighbors(node):
            if nxt not in used:
                used.add(nxt)
                walk(nxt, used, dist + graph.length(node, nxt))
                used.remove(nxt)

    for start in range(1, graph.n_nodes + 1):
        walk(start, {start}, 0.0)
    return best


@dataclass(frozen=True)
class Scenario:
    """Everything a run needs, as loaded from one scenario file."""

    graph: HighwayGraph
    battery: BatteryParams
    motion: MotionParams
    weights: CostWeights
    cars: tuple[CarSpec, ...]
    horizon: int
    drive_power_kw: float
    congestion_coupling: bool
    digest: str


def _require_keys(obj: dict, required: set[str], optional: set[str], path: str):
    unknown = set(obj) - required - optional
    if unknown:
        raise ScenarioError(f"{path}: unknown key(s) {sorted(unknown)}")
    missing = required - set(obj)
    if missing:
        raise ScenarioError(f"{path}: missing key(s) {sorted(missing)}")


def _number(obj: dict, key: str, path: str, *, integer: bool = False):
    value = obj[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioError(f"{path}.{key}: expected a number, got {value!r}")
    if integer:
        if isinstance(value, float) and not value.is_integer():
            raise ScenarioError(f"{path}.{key}: expected an integer, got {value!r}")
        return int(value)
    return float(value)


def _bool(obj: dict, key: str, path: str, default: bool) -> bool:
    if key not in obj:
        return default
    value = obj[key]
    if not isinstance(value, bool):
        raise ScenarioError(f"{path}.{key}: expected true/false, got {value!r}")
    return value


def load_scenario(path: str) -> Scenario:
    """Parse and fully validate a scenario file."""
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario file {path}: {exc}") from exc
    digest = hashlib.sha256(raw).hexdigest()
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ScenarioError(
            f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: "
            f"{exc.msg}") from exc
    if not isinstance(doc, dict):
        raise ScenarioError(f"{path}: top level must be an object")
    _require_keys(doc, {"nodes", "edges", "vehicles", "battery", "horizon",
                        "weights"}, set(), "scenario")

    nodes = doc["nodes"]
    if not isinstance(nodes, list) or not nodes:
        raise ScenarioError("scenario.nodes: must be a non-empty list")
    n = len(nodes)
    station_capacity = [0] * n
    preferred = [0.0] * n
    seen_ids = set()
    for pos, rec in enumerate(nodes):
        where = f"scenario.nodes[{pos}]"
        if not isinstance(rec, dict):
            raise ScenarioError(f"{where}: must be an object")
        _require_keys(rec, {"id", "station_capacity"}, {"preferred_capacity"}, where)
        node_id = _number(rec, "id", where, integer=True)
        if not 1 <= node_id <= n:
            raise ScenarioError(
                f"{where}: id {node_id} outside 1..{n} (ids must be contiguous)")
        if node_id in seen_ids:
            raise ScenarioError(f"{where}: duplicate node id {node_id}")
        seen_ids.add(node_id)
        cap = _number(rec, "station_capacity", where, integer=True)
        if cap < 0:
            raise ScenarioError(f"{where}: station_capacity {cap} is negative")
        station_capacity[node_id - 1] = cap
        if "preferred_capacity" in rec:
            pref = _number(rec, "preferred_capacity", where)
            if pref < 0.0:
                raise ScenarioError(f"{where}: preferred_capacity is negative")
        else:
            pref = float(cap)
        preferred[node_id - 1] = pref
        if cap > 0 and pref == 0.0:
            raise ScenarioError(
                f"{where}: a node with chargers needs preferred_capacity > 0")

    edges_doc = doc["edges"]
    if not isinstance(edges_doc, list) or not edges_doc:
        raise ScenarioError("scenario.edges: must be a non-empty list")
    edge_records: dict[tuple[int, int], tuple[float, float, float]] = {}
    for pos, rec in enumerate(edges_doc):
        where = f"scenario.edges[{pos}]"
        if not isinstance(rec, dict):
            raise ScenarioError(f"{where}: must be an object")
        _require_keys(rec, {"i", "j", "miles", "free_flow_minutes",
                            "link_capacity"}, {"one_way"}, where)
        i = _number(rec, "i", where, integer=True)
        j = _number(rec, "j", where, integer=True)
        if not (1 <= i <= n and 1 <= j <= n):
            raise ScenarioError(f"{where}: endpoints ({i}, {j}) outside 1..{n}")
        if i == j:
            raise ScenarioError(f"{where}: self-loop edges are not allowed")
        miles = _number(rec, "miles", where)
        minutes = _number(rec, "free_flow_minutes", where)
        veh = _number(rec, "link_capacity", where)
        if miles <= 0.0 or minutes <= 0.0 or veh <= 0.0:
            raise ScenarioError(
                f"{where}: miles, free_flow_minutes and link_capacity "
                "must all be positive")
        one_way = _bool(rec, "one_way", where, False)
        pairs = [(i, j)] if one_way else [(i, j), (j, i)]
        for pair in pairs:
            if pair in edge_records:
                raise ScenarioError(
                    f"{where}: edge {pair[0]}->{pair[1]} defined twice")
            edge_records[pair] = (miles, minutes, veh)

    graph = HighwayGraph.from_edges(n, station_capacity, edge_records, preferred)
    report = validate_graph(graph)
    if not report.ok:
        raise ScenarioError("invalid network: " + "; ".join(report.messages))

    bat = doc["battery"]
    if not isinstance(bat, dict):
        raise ScenarioError("scenario.battery: must be an object")
    bat_fields = {"e_min", "e_max", "e_knee", "p_max", "chg_m", "chg_n",
                  "deg_a", "deg_b", "deg_c"}
    _require_keys(bat, bat_fields, set(), "scenario.battery")
    try:
        battery = BatteryParams(**{k: _number(bat, k, "scenario.battery")
                                   for k in bat_fields})
    except ValueError as exc:
        raise ScenarioError(f"scenario.battery: {exc}") from exc

    veh_doc = doc["vehicles"]
    if not isinstance(veh_doc, dict):
        raise ScenarioError("scenario.vehicles: must be an object")
    _require_keys(veh_doc, {"cars", "drive_power_kw", "motion"},
                  {"congestion_coupling"}, "scenario.vehicles")
    drive_power = _number(veh_doc, "drive_power_kw", "scenario.vehicles")
    if drive_power <= 0.0:
        raise ScenarioError("scenario.vehicles.drive_power_kw must be positive")
    coupling = _bool(veh_doc, "congestion_coupling", "scenario.vehicles", False)

    motion_doc = veh_doc["motion"]
    if not isinstance(motion_doc, dict):
        raise ScenarioError("scenario.vehicles.motion: must be an object")
    _require_keys(motion_doc, {"base_speed", "t_s", "d_max"}, set(),
                  "scenario.vehicles.motion")
    try:
        motion = MotionParams(
            base_speed=_number(motion_doc, "base_speed", "scenario.vehicles.motion"),
            t_s=_number(motion_doc, "t_s", "scenario.vehicles.motion"),
            d_max=_number(motion_doc, "d_max", "scenario.vehicles.motion"))
    except ValueError as exc:
        raise ScenarioError(f"scenario.vehicles.motion: {exc}") from exc

    longest = longest_simple_path_miles(graph)
    if motion.d_max < longest:
        raise ScenarioError(
            f"scenario.vehicles.motion.d_max = {motion.d_max} is below the "
            f"longest simple path ({longest} miles)")

    cars_doc = veh_doc["cars"]
    if not isinstance(cars_doc, list) or not cars_doc:
        raise ScenarioError("scenario.vehicles.cars: must be a non-empty list")
    cars = []
    for pos, rec in enumerate(cars_doc):
        where = f"scenario.vehicles.cars[{pos}]"
        if not isinstance(rec, dict):
            raise ScenarioError(f"{where}: must be an object")
        _require_keys(rec, {"start_node", "end_node", "initial_energy"},
                      set(), where)
        start = _number(rec, "start_node", where, integer=True)
        end = _number(rec, "end_node", where, integer=True)
        energy = _number(rec, "initial_energy", where)
        if not (1 <= start <= n and 1 <= end <= n):
            raise ScenarioError(f"{where}: start/end node outside 1..{n}")
        if not battery.e_min <= energy <= battery.e_max:
            raise ScenarioError(
                f"{where}: initial_energy {energy} outside "
                f"[{battery.e_min}, {battery.e_max}]")
        cars.append(CarSpec(start, end, energy))

    horizon = _number({"horizon": doc["horizon"]}, "horizon", "scenario",
                      integer=True)
    if horizon < 1:
        raise ScenarioError(f"scenario.horizon: must be >= 1, got {horizon}")

    w_doc = doc["weights"]
    if not isinstance(w_doc, dict):
        raise ScenarioError("scenario.weights: must be an object")
    _require_keys(w_doc, {"station_unit_cost", "congestion_weight",
                          "charging_time_weight", "waiting_time_weight"},
                  {"electricity_enabled", "electricity_price"}, "scenario.weights")
    elec_on = _bool(w_doc, "electricity_enabled", "scenario.weights", False)
    price = None
    if "electricity_price" in w_doc and w_doc["electricity_price"] is not None:
        table = w_doc["electricity_price"]
        if (not isinstance(table, list)
                or not all(isinstance(row, list) for row in table)):
            raise ScenarioError(
                "scenario.weights.electricity_price: must be a list of "
                "per-node price rows")
        if len(table) != n or any(len(row) < horizon for row in table):
            raise ScenarioError(
                "scenario.weights.electricity_price: need one row per node "
                f"with at least {horizon} entries")
        for row in table:
            for p in row:
                if isinstance(p, bool) or not isinstance(p, (int, float)):
                    raise ScenarioError(
                        "scenario.weights.electricity_price: entries must "
                        "be numbers")
        price = tuple(tuple(float(p) for p in row) for row in table)
    if elec_on and price is None:
        raise ScenarioError(
            "scenario.weights: electricity_enabled requires electricity_price")
    try:
        weights = CostWeights(
            station_unit_cost=_number(w_doc, "station_unit_cost", "scenario.weights"),
            congestion_weight=_number(w_doc, "congestion_weight", "scenario.weights"),
            charging_time_weight=_number(w_doc, "charging_time_weight",
                                         "scenario.weights"),
            waiting_time_weight=_number(w_doc, "waiting_time_weight",
                                        "scenario.weights"),
            electricity_enabled=elec_on,
            electricity_price=price)
    except ValueError as exc:
        raise ScenarioError(f"scenario.weights: {exc}") from exc

    return Scenario(graph=graph, battery=battery, motion=motion, weights=weights,
                    cars=tuple(cars), horizon=horizon, drive_power_kw=drive_power,
                    congestion_coupling=coupling, digest=digest)


def load_network(path: str) -> HighwayGraph:
    """Load just the validated graph from a scenario file."""
    return load_scenario(path).graph
