# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled branch-and-bound kernel.

Typed port of _kernel_py.solve. Control flow, branch order, and every
float expression mirror the Python fallback exactly; together with
-ffp-contract=off at compile time that makes the two backends agree bit
for bit on cost, plan, and node count. Change them in lockstep or the
backend parity tests will tell on you.
"""

import numpy as np

from libc.math cimport INFINITY, NAN, ceil, fabs

STATUS_OPTIMAL = 0
STATUS_INFEASIBLE = 1
STATUS_BUDGET = 2

UNREACHABLE = 10 ** 9

cdef int _UNREACHABLE = 10 ** 9


cdef inline long long _lexkey(int act, int nn1) nogil:
    return (<long long>((act & 1) * 2 + ((act >> 1) & 1))) * nn1 + (act >> 2)


cdef class _Search:
    cdef int n, h, p, nn, nn1, depth_max
    cdef int prune_cost, prune_hops, prune_energy, heuristic, elec_on
    cdef long long budget, nodes
    cdef double base_speed, ts, drive_de, chg_pmax_de
    cdef double e_min, e_max, e_knee, chg_m, chg_n
    cdef double deg_a, deg_b, deg_c
    cdef double w_station, w_cong, w_chg, w_wait, d_max
    cdef double best_cost
    cdef bint has_best, exhausted

    cdef double[::1] edge_len, pref, price, e0_arr, running
    cdef int[::1] edge_steps, neigh_off, neigh, cap, ext, goal, dist
    cdef int[::1] path, best_plan
    cdef int[:, ::1] pos, ei, ej, wasc, nchg, nwait, sess_steps
    cdef int[:, ::1] prev_u, cur_u, flow, cand, cest
    cdef double[:, ::1] eps, en, trip, sess_e0

    cdef inline double session_degradation(self, double delta, int steps) nogil:
        cdef double minutes = steps * self.ts
        cdef double mean_power
        if minutes == 0.0:
            return 0.0
        mean_power = delta / (minutes / 60.0)
        return (self.deg_a * mean_power * mean_power
                + self.deg_b * mean_power + self.deg_c) * minutes

    cdef inline int steps_to_goal(self, int c, int d) nogil:
        cdef int node = self.pos[d, c]
        cdef double length, remaining
        cdef int on_edge, tail
        if node >= 0:
            return self.dist[c * self.n + node]
        length = self.edge_len[self.ei[d, c] * self.n + self.ej[d, c]]
        remaining = length - self.eps[d, c]
        on_edge = <int>ceil(remaining / self.base_speed - 1e-9)
        if on_edge < 1:
            on_edge = 1
        tail = self.dist[c * self.n + self.ej[d, c]]
        if tail >= _UNREACHABLE:
            return _UNREACHABLE
        return on_edge + tail

    cdef int candidates(self, int c, int d) nogil:
        """Fill self.cand[d] with car c's admissible actions, in branch order."""
        cdef int count = 0
        cdef int node = self.pos[d, c]
        cdef double energy = self.en[d, c]
        cdef double dist_now = self.trip[d, c]
        cdef int i, j, t, xi, diag, est, n_drive, slot, key_est, key_xi
        cdef int wait_act, charge_act
        cdef double length, credit
        cdef bint can_drive, charge_ok

        if node < 0:
            i = self.ei[d, c]
            j = self.ej[d, c]
            length = self.edge_len[i * self.n + j]
            credit = length - self.eps[d, c]
            if credit > self.base_speed:
                credit = self.base_speed
            if energy - self.drive_de >= self.e_min and dist_now + credit < self.d_max:
                xi = i * self.n + j + 1
                self.cand[d, 0] = xi * 4
                count = 1
            return count

        # collect departures as (est, xi) pairs into cest/cand scratch
        n_drive = 0
        can_drive = energy - self.drive_de >= self.e_min
        for t in range(self.neigh_off[node], self.neigh_off[node + 1]):
            j = self.neigh[t]
            length = self.edge_len[node * self.n + j]
            credit = length if length < self.base_speed else self.base_speed
            if can_drive and dist_now + credit < self.d_max:
                xi = node * self.n + j + 1
                est = self.edge_steps[node * self.n + j] + self.dist[c * self.n + j]
                self.cest[d, n_drive] = est
                self.cand[d, n_drive] = xi
                n_drive += 1
        diag = node * self.n + node + 1
        wait_act = diag * 4 + 1
        charge_ok = self.cap[node] > 0
        if charge_ok and not self.wasc[d, c]:
            charge_ok = self.prev_u[d, node] + self.ext[node] < self.cap[node]
        if charge_ok:
            charge_ok = self.cur_u[d, node] + self.ext[node] + 1 <= self.cap[node]
        charge_act = diag * 4 + 3 if charge_ok else -1

        if self.heuristic:
            # insertion sort by (est, xi)
            for i in range(1, n_drive):
                key_est = self.cest[d, i]
                key_xi = self.cand[d, i]
                j = i - 1
                while j >= 0 and (self.cest[d, j] > key_est
                                  or (self.cest[d, j] == key_est
                                      and self.cand[d, j] > key_xi)):
                    self.cest[d, j + 1] = self.cest[d, j]
                    self.cand[d, j + 1] = self.cand[d, j]
                    j -= 1
                self.cest[d, j + 1] = key_est
                self.cand[d, j + 1] = key_xi
            if node == self.goal[c]:
                # shift drives right to put wait (and charge) first
                for i in range(n_drive - 1, -1, -1):
                    slot = i + 1 + (1 if charge_act >= 0 else 0)
                    self.cand[d, slot] = self.cand[d, i] * 4
                self.cand[d, 0] = wait_act
                count = 1
                if charge_act >= 0:
                    self.cand[d, 1] = charge_act
                    count = 2
                count += n_drive
            else:
                for i in range(n_drive):
                    self.cand[d, i] = self.cand[d, i] * 4
                count = n_drive
                if charge_act >= 0:
                    self.cand[d, count] = charge_act
                    count += 1
                self.cand[d, count] = wait_act
                count += 1
        else:
            # lexicographic: drives ascending by xi, then wait, then charge
            for i in range(1, n_drive):
                key_xi = self.cand[d, i]
                j = i - 1
                while j >= 0 and self.cand[d, j] > key_xi:
                    self.cand[d, j + 1] = self.cand[d, j]
                    j -= 1
                self.cand[d, j + 1] = key_xi
            for i in range(n_drive):
                self.cand[d, i] = self.cand[d, i] * 4
            count = n_drive
            self.cand[d, count] = wait_act
            count += 1
            if charge_act >= 0:
                self.cand[d, count] = charge_act
                count += 1
        return count

    cdef void apply(self, int c, int d, int act) nogil:
        cdef int nxt = d + 1
        cdef int cc, idx, node, i, j, k
        cdef int gamma, charge, xi, v, sq
        cdef double cost, energy, gained, new_e, length, progress, tentative
        cdef double s, u, dev

        for cc in range(self.p):
            self.pos[nxt, cc] = self.pos[d, cc]
            self.ei[nxt, cc] = self.ei[d, cc]
            self.ej[nxt, cc] = self.ej[d, cc]
            self.eps[nxt, cc] = self.eps[d, cc]
            self.en[nxt, cc] = self.en[d, cc]
            self.trip[nxt, cc] = self.trip[d, cc]
            self.wasc[nxt, cc] = self.wasc[d, cc]
            self.nchg[nxt, cc] = self.nchg[d, cc]
            self.nwait[nxt, cc] = self.nwait[d, cc]
            self.sess_steps[nxt, cc] = self.sess_steps[d, cc]
            self.sess_e0[nxt, cc] = self.sess_e0[d, cc]
        for idx in range(self.n):
            self.prev_u[nxt, idx] = self.prev_u[d, idx]
            self.cur_u[nxt, idx] = self.cur_u[d, idx]
        for idx in range(self.nn):
            self.flow[nxt, idx] = self.flow[d, idx]
        cost = self.running[d]

        gamma = act & 1
        charge = (act >> 1) & 1
        xi = act >> 2
        k = d // self.p

        if gamma:
            node = self.pos[d, c]
            if charge:
                energy = self.en[d, c]
                if not self.wasc[d, c]:
                    self.sess_e0[nxt, c] = energy
                    self.sess_steps[nxt, c] = 0
                if energy < self.e_knee:
                    gained = self.chg_pmax_de
                else:
                    gained = (self.chg_m - self.chg_n * energy) * self.ts / 60.0
                new_e = energy + gained
                if new_e > self.e_max:
                    new_e = self.e_max
                self.en[nxt, c] = new_e
                self.sess_steps[nxt, c] += 1
                self.wasc[nxt, c] = 1
                cost += self.w_chg * <double>(2 * self.nchg[d, c] + 1)
                self.nchg[nxt, c] += 1
                if self.elec_on:
                    cost += self.price[k * self.n + node] * (new_e - energy)
                self.cur_u[nxt, node] += 1
            else:
                if self.wasc[d, c]:
                    cost += self.session_degradation(
                        self.en[d, c] - self.sess_e0[d, c],
                        self.sess_steps[d, c])
                    self.wasc[nxt, c] = 0
                cost += self.w_wait * <double>(2 * self.nwait[d, c] + 1)
                self.nwait[nxt, c] += 1
        else:
            if self.wasc[d, c]:
                cost += self.session_degradation(
                    self.en[d, c] - self.sess_e0[d, c],
                    self.sess_steps[d, c])
                self.wasc[nxt, c] = 0
            i = (xi - 1) // self.n
            j = (xi - 1) % self.n
            length = self.edge_len[i * self.n + j]
            progress = self.eps[d, c] if self.pos[d, c] < 0 else 0.0
            self.en[nxt, c] = self.en[d, c] - self.drive_de
            tentative = progress + self.base_speed
            if tentative >= length:
                self.trip[nxt, c] = self.trip[d, c] + (length - progress)
                self.pos[nxt, c] = j
                self.eps[nxt, c] = 0.0
            else:
                self.trip[nxt, c] = self.trip[d, c] + self.base_speed
                self.pos[nxt, c] = -1
                self.eps[nxt, c] = tentative
            self.ei[nxt, c] = i
            self.ej[nxt, c] = j
            self.flow[nxt, xi - 1] += 1

        if c == self.p - 1:
            # close the step: station and congestion stages, roll occupancy
            for node in range(self.n):
                s = self.pref[node]
                if s == 0.0:
                    continue
                u = <double>self.cur_u[nxt, node]
                dev = fabs(u - 0.5 * s)
                if dev != 0.0:
                    cost += self.w_station * dev
            sq = 0
            for idx in range(self.nn):
                v = self.flow[nxt, idx]
                if v:
                    sq += v * v
            if sq:
                cost += self.w_cong * <double>sq
            for node in range(self.n):
                self.prev_u[nxt, node] = self.cur_u[nxt, node]
                self.cur_u[nxt, node] = 0
            for idx in range(self.nn):
                self.flow[nxt, idx] = 0
        self.running[nxt] = cost

    cdef bint lex_smaller(self) nogil:
        cdef int c, k
        cdef long long a, b
        for c in range(self.p):
            for k in range(self.h):
                a = _lexkey(self.path[k * self.p + c], self.nn1)
                b = _lexkey(self.best_plan[k * self.p + c], self.nn1)
                if a != b:
                    return a < b
        return False

    cdef void dfs(self, int d) nogil:
        cdef int c, k, rem, act, idx, count, need
        cdef double leaf
        if self.exhausted:
            return
        if d == self.depth_max:
            for c in range(self.p):
                if self.pos[d, c] != self.goal[c]:
                    return
            leaf = self.running[d]
            for c in range(self.p):
                if self.wasc[d, c]:
                    leaf += self.session_degradation(
                        self.en[d, c] - self.sess_e0[d, c],
                        self.sess_steps[d, c])
            if not self.has_best or leaf < self.best_cost:
                self.best_cost = leaf
                for idx in range(self.depth_max):
                    self.best_plan[idx] = self.path[idx]
                self.has_best = True
            elif leaf == self.best_cost and self.lex_smaller():
                for idx in range(self.depth_max):
                    self.best_plan[idx] = self.path[idx]
            return
        k = d // self.p
        c = d - k * self.p
        rem = self.h - (k + 1)
        count = self.candidates(c, d)
        for idx in range(count):
            act = self.cand[d, idx]
            if self.nodes >= self.budget:
                self.exhausted = True
                return
            self.nodes += 1
            self.apply(c, d, act)
            need = self.steps_to_goal(c, d + 1)
            if self.prune_hops and need > rem:
                continue
            if (self.prune_energy and need > 0
                    and (self.en[d + 1, c] + (rem - need) * self.chg_pmax_de
                         - need * self.drive_de) < self.e_min):
                continue
            if self.prune_cost and self.has_best and self.running[d + 1] >= self.best_cost:
                continue
            self.path[d] = act
            self.dfs(d + 1)
            if self.exhausted:
                return


def solve(pk: dict, opts: dict) -> dict:
    cdef _Search s = _Search()
    s.n = pk["n"]
    s.h = pk["h"]
    s.p = pk["p"]
    s.nn = s.n * s.n
    s.nn1 = s.nn + 1
    s.depth_max = s.h * s.p
    s.base_speed = pk["base_speed"]
    s.ts = pk["ts"]
    s.drive_de = pk["drive_de"]
    s.chg_pmax_de = pk["chg_pmax_de"]
    s.e_min = pk["e_min"]
    s.e_max = pk["e_max"]
    s.e_knee = pk["e_knee"]
    s.chg_m = pk["chg_m"]
    s.chg_n = pk["chg_n"]
    s.deg_a = pk["deg_a"]
    s.deg_b = pk["deg_b"]
    s.deg_c = pk["deg_c"]
    s.w_station = pk["w_station"]
    s.w_cong = pk["w_cong"]
    s.w_chg = pk["w_chg"]
    s.w_wait = pk["w_wait"]
    s.elec_on = pk["elec_on"]
    s.d_max = pk["d_max"]

    s.budget = opts["budget"]
    s.prune_cost = opts["prune_cost"]
    s.prune_hops = opts["prune_hops"]
    s.prune_energy = opts["prune_energy"]
    s.heuristic = opts["heuristic_order"]

    s.edge_len = np.asarray(pk["edge_len"], dtype=np.float64)
    s.edge_steps = np.asarray(pk["edge_steps"], dtype=np.int32)
    s.neigh_off = np.asarray(pk["neigh_off"], dtype=np.int32)
    s.neigh = np.asarray(pk["neigh"] or [0], dtype=np.int32)
    s.cap = np.asarray(pk["cap"], dtype=np.int32)
    s.pref = np.asarray(pk["pref"], dtype=np.float64)
    s.ext = np.asarray(pk["ext"], dtype=np.int32)
    s.price = np.asarray(pk["price"] or [0.0], dtype=np.float64)
    s.goal = np.asarray(pk["goal"], dtype=np.int32)
    s.dist = np.asarray(pk["dist"], dtype=np.int32)
    s.e0_arr = np.asarray(pk["e0"], dtype=np.float64)

    cdef int dm = s.depth_max
    cdef int maxc = s.n + 2
    s.pos = np.zeros((dm + 1, s.p), dtype=np.int32)
    s.ei = np.zeros((dm + 1, s.p), dtype=np.int32)
    s.ej = np.zeros((dm + 1, s.p), dtype=np.int32)
    s.wasc = np.zeros((dm + 1, s.p), dtype=np.int32)
    s.nchg = np.zeros((dm + 1, s.p), dtype=np.int32)
    s.nwait = np.zeros((dm + 1, s.p), dtype=np.int32)
    s.sess_steps = np.zeros((dm + 1, s.p), dtype=np.int32)
    s.eps = np.zeros((dm + 1, s.p), dtype=np.float64)
    s.en = np.zeros((dm + 1, s.p), dtype=np.float64)
    s.trip = np.zeros((dm + 1, s.p), dtype=np.float64)
    s.sess_e0 = np.zeros((dm + 1, s.p), dtype=np.float64)
    s.prev_u = np.zeros((dm + 1, s.n), dtype=np.int32)
    s.cur_u = np.zeros((dm + 1, s.n), dtype=np.int32)
    s.flow = np.zeros((dm + 1, s.nn), dtype=np.int32)
    s.cand = np.zeros((dm + 1, maxc), dtype=np.int32)
    s.cest = np.zeros((dm + 1, maxc), dtype=np.int32)
    s.running = np.zeros(dm + 1, dtype=np.float64)
    s.path = np.zeros(dm, dtype=np.int32)
    s.best_plan = np.full(dm, -1, dtype=np.int32)

    pos0 = pk["pos0"]
    ei0 = pk["ei0"]
    ej0 = pk["ej0"]
    eps0 = pk["eps0"]
    trip0 = pk["trip0"]
    wasc0 = pk["wasc0"]
    prevu0 = pk["prevu0"]
    cdef int c, node
    for c in range(s.p):
        s.pos[0, c] = pos0[c]
        s.ei[0, c] = ei0[c]
        s.ej[0, c] = ej0[c]
        s.eps[0, c] = eps0[c]
        s.en[0, c] = s.e0_arr[c]
        s.trip[0, c] = trip0[c]
        s.wasc[0, c] = wasc0[c]
        # carried-over sessions are costed from the plan-local baseline
        s.sess_e0[0, c] = s.e0_arr[c]
    for node in range(s.n):
        s.prev_u[0, node] = prevu0[node]

    s.best_cost = INFINITY
    s.has_best = False
    if opts.get("has_seed"):
        s.best_cost = opts["seed_cost"]
        seed = opts["seed_plan"]
        for c in range(dm):
            s.best_plan[c] = seed[c]
        s.has_best = True

    s.nodes = 0
    s.exhausted = False
    s.dfs(0)

    cdef int status
    if s.exhausted:
        status = STATUS_BUDGET
    elif s.has_best:
        status = STATUS_OPTIMAL
    else:
        status = STATUS_INFEASIBLE
    return {
        "status": status,
        "cost": s.best_cost if s.has_best else NAN,
        "plan": [int(s.best_plan[c]) for c in range(dm)] if s.has_best else None,
        "nodes": int(s.nodes),
        "has_best": bool(s.has_best),
    }
