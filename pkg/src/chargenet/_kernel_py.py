"""Pure-Python branch-and-bound kernel.

This is the fallback for, and the reference of, the compiled kernel in
_kernel.pyx: both implement the exact same depth-first search with the
same float operations in the same order, so their results agree bit for
bit (the extension is compiled with FP contraction off for that reason).
The module is deliberately written in a flat, C-shaped style; the
object-level API lives in chargenet.optimizer.

Search layout: depth d = k * p + c interleaves cars within a step. A car
commits its input, per-car cost terms are added incrementally (quadratic
counts via the odd-number telescope, sessions closed when charging stops),
and when the last car of a step commits, the station and congestion stage
for that step is added and the occupancy window rolls forward. All stage
contributions are nonnegative, so accumulated cost is a monotone lower
bound and pruning against the incumbent is exact.

Action encoding: act = xi * 4 + charge * 2 + gamma, with xi the 1-based
flattened edge index. Plans are step-major arrays plan[k * p + c]; tie
comparison is car-major lexicographic on (gamma, charge, xi).
"""

from __future__ import annotations

import math

STATUS_OPTIMAL = 0
STATUS_INFEASIBLE = 1
STATUS_BUDGET = 2

UNREACHABLE = 10 ** 9


def _lexkey(act: int, nn1: int) -> int:
    # order by (gamma, charge, xi)
    return ((act & 1) * 2 + ((act >> 1) & 1)) * nn1 + (act >> 2)


def solve(pk: dict, opts: dict) -> dict:
    n = pk["n"]
    h = pk["h"]
    p = pk["p"]
    edge_len = pk["edge_len"]          # n*n floats, 0.0 where absent
    edge_steps = pk["edge_steps"]      # n*n ints
    neigh_off = pk["neigh_off"]
    neigh = pk["neigh"]
    cap = pk["cap"]
    pref = pk["pref"]
    ext = pk["ext"]
    base_speed = pk["base_speed"]
    ts = pk["ts"]
    drive_de = pk["drive_de"]
    chg_pmax_de = pk["chg_pmax_de"]
    e_min = pk["e_min"]
    e_max = pk["e_max"]
    e_knee = pk["e_knee"]
    chg_m = pk["chg_m"]
    chg_n = pk["chg_n"]
    deg_a = pk["deg_a"]
    deg_b = pk["deg_b"]
    deg_c = pk["deg_c"]
    w_station = pk["w_station"]
    w_cong = pk["w_cong"]
    w_chg = pk["w_chg"]
    w_wait = pk["w_wait"]
    elec_on = pk["elec_on"]
    price = pk["price"]                # h*n floats, step-major
    goal = pk["goal"]
    e0 = pk["e0"]
    pos0 = pk["pos0"]                  # -1 when the car starts mid-edge
    ei0 = pk["ei0"]
    ej0 = pk["ej0"]
    eps0 = pk["eps0"]
    trip0 = pk["trip0"]
    wasc0 = pk["wasc0"]                # plugged in during the previous step
    prevu0 = pk["prevu0"]              # cars-only occupancy of that step
    dist = pk["dist"]                  # p*n ints, steps to goal
    d_max = pk["d_max"]

    budget = opts["budget"]
    prune_cost = opts["prune_cost"]
    prune_hops = opts["prune_hops"]
    prune_energy = opts["prune_energy"]
    heuristic = opts["heuristic_order"]

    nn = n * n
    nn1 = nn + 1
    depth_max = h * p

    # per-depth state buffers, copied on descend
    pos = [[0] * p for _ in range(depth_max + 1)]
    ei = [[0] * p for _ in range(depth_max + 1)]
    ej = [[0] * p for _ in range(depth_max + 1)]
    eps = [[0.0] * p for _ in range(depth_max + 1)]
    en = [[0.0] * p for _ in range(depth_max + 1)]
    trip = [[0.0] * p for _ in range(depth_max + 1)]
    wasc = [[0] * p for _ in range(depth_max + 1)]
    nchg = [[0] * p for _ in range(depth_max + 1)]
    nwait = [[0] * p for _ in range(depth_max + 1)]
    sess_steps = [[0] * p for _ in range(depth_max + 1)]
    sess_e0 = [[0.0] * p for _ in range(depth_max + 1)]
    prev_u = [[0] * n for _ in range(depth_max + 1)]
    cur_u = [[0] * n for _ in range(depth_max + 1)]
    flow = [[0] * nn for _ in range(depth_max + 1)]
    running = [0.0] * (depth_max + 1)
    path = [0] * depth_max

    for c in range(p):
        pos[0][c] = pos0[c]
        ei[0][c] = ei0[c]
        ej[0][c] = ej0[c]
        eps[0][c] = eps0[c]
        en[0][c] = e0[c]
        trip[0][c] = trip0[c]
        wasc[0][c] = wasc0[c]
        # carried-over sessions are costed from the plan-local baseline
        sess_e0[0][c] = e0[c]
    for node in range(n):
        prev_u[0][node] = prevu0[node]

    best_cost = math.inf
    best_plan = [-1] * depth_max
    has_best = False
    if opts.get("has_seed"):
        best_cost = opts["seed_cost"]
        best_plan = list(opts["seed_plan"])
        has_best = True

    nodes = 0
    exhausted = False

    def steps_to_goal(c: int, d: int) -> int:
        # minimum driving steps from car c's state at depth d to its goal
        if pos[d][c] >= 0:
            return dist[c * n + pos[d][c]]
        length = edge_len[ei[d][c] * n + ej[d][c]]
        remaining = length - eps[d][c]
        on_edge = int(math.ceil(remaining / base_speed - 1e-9))
        if on_edge < 1:
            on_edge = 1
        tail = dist[c * n + ej[d][c]]
        if tail >= UNREACHABLE:
            return UNREACHABLE
        return on_edge + tail

    def session_degradation(delta: float, steps: int) -> float:
        minutes = steps * ts
        if minutes == 0.0:
            return 0.0
        mean_power = delta / (minutes / 60.0)
        return (deg_a * mean_power * mean_power
                + deg_b * mean_power + deg_c) * minutes

    def candidates(c: int, d: int) -> list[int]:
        """Admissible action codes for car c at depth d, in branch order."""
        out = []
        node = pos[d][c]
        energy = en[d][c]
        dist_now = trip[d][c]
        if node < 0:
            i = ei[d][c]
            j = ej[d][c]
            length = edge_len[i * n + j]
            credit = length - eps[d][c]
            if credit > base_speed:
                credit = base_speed
            if energy - drive_de >= e_min and dist_now + credit < d_max:
                xi = i * n + j + 1
                out.append(xi * 4)
            return out

        drives = []
        can_drive = energy - drive_de >= e_min
        for t in range(neigh_off[node], neigh_off[node + 1]):
            j = neigh[t]
            length = edge_len[node * n + j]
            credit = length if length < base_speed else base_speed
            if can_drive and dist_now + credit < d_max:
                xi = node * n + j + 1
                est = edge_steps[node * n + j] + dist[c * n + j]
                drives.append((est, xi))
        diag = node * n + node + 1
        wait_act = diag * 4 + 1
        charge_ok = cap[node] > 0
        if charge_ok and not wasc[d][c]:
            charge_ok = prev_u[d][node] + ext[node] < cap[node]
        if charge_ok:
            charge_ok = cur_u[d][node] + ext[node] + 1 <= cap[node]
        charge_act = diag * 4 + 3 if charge_ok else -1

        if heuristic:
            drives.sort()
            if node == goal[c]:
                out.append(wait_act)
                if charge_act >= 0:
                    out.append(charge_act)
                out.extend(xi * 4 for _est, xi in drives)
            else:
                out.extend(xi * 4 for _est, xi in drives)
                if charge_act >= 0:
                    out.append(charge_act)
                out.append(wait_act)
        else:
            drives.sort(key=lambda item: item[1])
            out.extend(xi * 4 for _est, xi in drives)
            out.append(wait_act)
            if charge_act >= 0:
                out.append(charge_act)
        return out

    def apply(c: int, d: int, act: int) -> None:
        """Copy depth d state to d+1 and commit car c's action there."""
        nxt = d + 1
        pos[nxt][:] = pos[d]
        ei[nxt][:] = ei[d]
        ej[nxt][:] = ej[d]
        eps[nxt][:] = eps[d]
        en[nxt][:] = en[d]
        trip[nxt][:] = trip[d]
        wasc[nxt][:] = wasc[d]
        nchg[nxt][:] = nchg[d]
        nwait[nxt][:] = nwait[d]
        sess_steps[nxt][:] = sess_steps[d]
        sess_e0[nxt][:] = sess_e0[d]
        prev_u[nxt][:] = prev_u[d]
        cur_u[nxt][:] = cur_u[d]
        flow[nxt][:] = flow[d]
        cost = running[d]

        gamma = act & 1
        charge = (act >> 1) & 1
        xi = act >> 2
        k = d // p

        if gamma:
            node = pos[d][c]
            if charge:
                energy = en[d][c]
                if not wasc[d][c]:
                    sess_e0[nxt][c] = energy
                    sess_steps[nxt][c] = 0
                if energy < e_knee:
                    gained = chg_pmax_de
                else:
                    gained = (chg_m - chg_n * energy) * ts / 60.0
                new_e = energy + gained
                if new_e > e_max:
                    new_e = e_max
                en[nxt][c] = new_e
                sess_steps[nxt][c] += 1
                wasc[nxt][c] = 1
                cost += w_chg * float(2 * nchg[d][c] + 1)
                nchg[nxt][c] += 1
                if elec_on:
                    cost += price[k * n + node] * (new_e - energy)
                cur_u[nxt][node] += 1
            else:
                if wasc[d][c]:
                    cost += session_degradation(en[d][c] - sess_e0[d][c],
                                                sess_steps[d][c])
                    wasc[nxt][c] = 0
                cost += w_wait * float(2 * nwait[d][c] + 1)
                nwait[nxt][c] += 1
        else:
            if wasc[d][c]:
                cost += session_degradation(en[d][c] - sess_e0[d][c],
                                            sess_steps[d][c])
                wasc[nxt][c] = 0
            i = (xi - 1) // n
            j = (xi - 1) % n
            length = edge_len[i * n + j]
            progress = eps[d][c] if pos[d][c] < 0 else 0.0
            en[nxt][c] = en[d][c] - drive_de
            tentative = progress + base_speed
            if tentative >= length:
                trip[nxt][c] = trip[d][c] + (length - progress)
                pos[nxt][c] = j
                eps[nxt][c] = 0.0
            else:
                trip[nxt][c] = trip[d][c] + base_speed
                pos[nxt][c] = -1
                eps[nxt][c] = tentative
            ei[nxt][c] = i
            ej[nxt][c] = j
            flow[nxt][(xi - 1)] += 1

        if c == p - 1:
            # close the step: station and congestion stages, roll occupancy
            for node in range(n):
                s = pref[node]
                if s == 0.0:
                    continue
                u = float(cur_u[nxt][node])
                dev = abs(u - 0.5 * s)
                if dev != 0.0:
                    cost += w_station * dev
            sq = 0
            row = flow[nxt]
            for idx in range(nn):
                v = row[idx]
                if v:
                    sq += v * v
            if sq:
                cost += w_cong * float(sq)
            prev_u[nxt][:] = cur_u[nxt]
            for node in range(n):
                cur_u[nxt][node] = 0
            for idx in range(nn):
                row[idx] = 0
        running[nxt] = cost

    def lex_smaller(cand: list[int]) -> bool:
        for c in range(p):
            for k in range(h):
                a = _lexkey(cand[k * p + c], nn1)
                b = _lexkey(best_plan[k * p + c], nn1)
                if a != b:
                    return a < b
        return False

    def dfs(d: int) -> None:
        nonlocal nodes, best_cost, has_best, exhausted
        if exhausted:
            return
        if d == depth_max:
            for c in range(p):
                if pos[d][c] != goal[c]:
                    return
            leaf = running[d]
            for c in range(p):
                if wasc[d][c]:
                    leaf += session_degradation(en[d][c] - sess_e0[d][c],
                                                sess_steps[d][c])
            if not has_best or leaf < best_cost:
                best_cost = leaf
                best_plan[:] = path
                has_best = True
            elif leaf == best_cost and lex_smaller(path):
                best_plan[:] = path
            return
        k, c = divmod(d, p)
        rem = h - (k + 1)
        for act in candidates(c, d):
            if nodes >= budget:
                exhausted = True
                return
            nodes += 1
            apply(c, d, act)
            need = steps_to_goal(c, d + 1)
            if prune_hops and need > rem:
                continue
            if (prune_energy and need > 0
                    and (en[d + 1][c] + (rem - need) * chg_pmax_de
                         - need * drive_de) < e_min):
                continue
            if prune_cost and has_best and running[d + 1] >= best_cost:
                continue
            path[d] = act
            dfs(d + 1)
            if exhausted:
                return

    dfs(0)

    if exhausted:
        status = STATUS_BUDGET
    elif has_best:
        status = STATUS_OPTIMAL
    else:
        status = STATUS_INFEASIBLE
    return {
        "status": status,
        "cost": best_cost if has_best else math.nan,
        "plan": best_plan if has_best else None,
        "nodes": nodes,
        "has_best": has_best,
    }
