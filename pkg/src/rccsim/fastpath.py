"""Compiled twin of :class:`~rccsim.process.SupplyModel` for fixed-fleet runs.

The scenario sweep runs dozens of full projects with tens of thousands of
events each, which is too slow through the generic kernel.  This module
re-states the same model as one numba function over flat arrays.  It
mirrors the reference model operation for operation: the same calendar key
``(time, priority, seq)``, the same sequence numbers (cancelled events
included) and the same floating-point expressions in the same order, so its
results are bit-identical to the reference engine.  The test suite checks
this trace-for-trace.

Only fixed fleets with finite placement rate and moving-front geometry are
supported; anything else goes through the reference model.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

from .kernel import ConservationError, StarvedModelError, TraceEntry
from .process import (
    P_ARRIVE_PAVER,
    P_ARRIVE_PLANT,
    P_COMPLETE,
    P_DUMP_END,
    P_GATE,
    P_LOAD_END,
    P_SPACE,
    P_STALL,
    ActivityRecord,
    RunResult,
    Violation,
    check_interarrival,
)

K_GATE = 0
K_LOAD_END = 1
K_ARRIVE_PAVER = 2
K_DUMP_END = 3
K_ARRIVE_PLANT = 4
K_STALL = 5
K_SPACE = 6
K_COMPLETE = 7
KIND_NAMES = ("gate", "load-end", "arrive-paver", "dump-end", "arrive-plant",
              "hopper-empty", "hopper-space", "complete")

S_PLANT_Q = 0
S_LOADING = 1
S_HAULING = 2
S_PAVER_Q = 3
S_DUMPING = 4
S_RETURNING = 5
STATE_NAMES = ("at-plant-queue", "loading", "hauling", "at-paver-queue", "dumping", "returning")

OK = 0
ST_STARVED = 1
ST_TIME_LIMIT = 2
ST_NEGATIVE = 3
ST_EVENT_OVERFLOW = 4
ST_LOG_OVERFLOW = 5
ST_GEOMETRY = 6
ST_MASS = 7

# float state slots
F_NOW = 0
F_HOP_LEVEL = 1
F_HOP_RATE = 2
F_HOP_LAST = 3
F_PL_LEVEL = 4
F_PL_RATE = 5
F_PL_LAST = 6
F_INFLOW = 7
F_BATCHED = 8
F_STALL_TIME = 9
F_STALL_SINCE = 10
F_MAKESPAN = 11
F_SPACE_THR = 12
N_F = 13

# int state slots
I_SEQ = 0
I_HEAP = 1
I_STALLED = 2
I_COMPLETE = 3
I_CLOSED = 4
I_LOADING = 5
I_DUMPING = 6
I_GATE = 7
I_STALL_EV = 8
I_SPACE_ON = 9
I_SPACE_EV = 10
I_COMPLETE_ON = 11
I_COMPLETE_EV = 12
I_STATUS = 13
I_NACT = 14
I_NARR = 15
I_NDEP = 16
I_NFRESH = 17
I_NTRACE = 18
I_SPACE_ACTOR = 19
N_I = 20

# geometry slots
G_LENGTH = 0
G_PLANT = 1
G_TOTAL = 2
G_CROSS = 3

# event int columns
E_PRIO = 0
E_KIND = 1
E_ACTOR = 2
E_CANCEL = 3

TOL = 1e-9
GEOM_TOL = 1e-6


@njit(cache=True)
def _less(a, b, ev_time, ev_int):
    ta = ev_time[a]
    tb = ev_time[b]
    if ta != tb:
        return ta < tb
    pa = ev_int[a, E_PRIO]
    pb = ev_int[b, E_PRIO]
    if pa != pb:
        return pa < pb
    return a < b


@njit(cache=True)
def _schedule(t, prio, kind, actor, I, heap, ev_time, ev_int):
    seq = I[I_SEQ]
    if seq >= ev_time.shape[0]:
        I[I_STATUS] = ST_EVENT_OVERFLOW
        return -1
    I[I_SEQ] = seq + 1
    ev_time[seq] = t
    ev_int[seq, E_PRIO] = prio
    ev_int[seq, E_KIND] = kind
    ev_int[seq, E_ACTOR] = actor
    ev_int[seq, E_CANCEL] = 0
    i = I[I_HEAP]
    heap[i] = seq
    I[I_HEAP] = i + 1
    while i > 0:
        parent = (i - 1) >> 1
        if _less(heap[i], heap[parent], ev_time, ev_int):
            tmp = heap[i]
            heap[i] = heap[parent]
            heap[parent] = tmp
            i = parent
        else:
            break
    return seq


@njit(cache=True)
def _pop(I, heap, ev_time, ev_int):
    n = I[I_HEAP] - 1
    top = heap[0]
    I[I_HEAP] = n
    if n > 0:
        heap[0] = heap[n]
        i = 0
        while True:
            left = 2 * i + 1
            if left >= n:
                break
            best = left
            right = left + 1
            if right < n and _less(heap[right], heap[left], ev_time, ev_int):
                best = right
            if _less(heap[best], heap[i], ev_time, ev_int):
                tmp = heap[i]
                heap[i] = heap[best]
                heap[best] = tmp
                i = best
            else:
                break
    return top


@njit(cache=True)
def _log(tr, to_state, F, I, t_state, t_load, act_f, act_i, busy, since):
    n = I[I_NACT]
    if n >= act_f.shape[0]:
        I[I_STATUS] = ST_LOG_OVERFLOW
        return
    now = F[F_NOW]
    act_f[n, 0] = now
    act_f[n, 1] = t_load[tr]
    act_i[n, 0] = tr
    act_i[n, 1] = t_state[tr]
    act_i[n, 2] = to_state
    I[I_NACT] = n + 1
    # same accumulation order as a replay of the log
    dt = now - since[tr]
    s = t_state[tr]
    if s == S_LOADING or s == S_HAULING or s == S_DUMPING or s == S_RETURNING:
        busy[tr] += dt
    since[tr] = now
    t_state[tr] = to_state


@njit(cache=True)
def _travel(loaded, F, I, geo, speeds):
    now = F[F_NOW]
    placed = F[F_PL_LEVEL] + F[F_PL_RATE] * (now - F[F_PL_LAST])
    total = geo[G_TOTAL]
    if total < placed:
        placed = total
    if placed < 0.0 or placed > total + GEOM_TOL:
        I[I_STATUS] = ST_GEOMETRY
        return 0.0
    length = geo[G_LENGTH]
    if placed >= total:
        front = length
    else:
        front = placed / geo[G_CROSS]
        if length < front:
            front = length
    dist = abs(front - geo[G_PLANT])
    speed = speeds[0] if loaded else speeds[1]
    return dist / 1000.0 / speed * 60.0


@njit(cache=True)
def _arm(which, F, I, geo, heap, ev_time, ev_int):
    """Re-arm one level watch: 0 stall, 1 space, 2 completion."""
    now = F[F_NOW]
    if which == 2:
        level = F[F_PL_LEVEL]
        rate = F[F_PL_RATE]
        last = F[F_PL_LAST]
        thr = geo[G_TOTAL]
        slot = I_COMPLETE_EV
        prio = P_COMPLETE
        kind = K_COMPLETE
        actor = -1
    else:
        level = F[F_HOP_LEVEL]
        rate = F[F_HOP_RATE]
        last = F[F_HOP_LAST]
        if which == 0:
            thr = 0.0
            slot = I_STALL_EV
            prio = P_STALL
            kind = K_STALL
            actor = -1
        else:
            thr = F[F_SPACE_THR]
            slot = I_SPACE_EV
            prio = P_SPACE
            kind = K_SPACE
            actor = I[I_SPACE_ACTOR]
    current = level + rate * (now - last)
    has_t = False
    t = 0.0
    if rate != 0.0 and current != thr:
        dt = (thr - current) / rate
        if dt >= 0.0:
            t = now + dt
            has_t = True
    old = I[slot]
    if old >= 0 and ev_int[old, E_CANCEL] == 0:
        if has_t and ev_time[old] == t:
            return
        ev_int[old, E_CANCEL] = 1
    if not has_t:
        I[slot] = -1
        return
    I[slot] = _schedule(t, prio, kind, actor, I, heap, ev_time, ev_int)


@njit(cache=True)
def _advance(F, lvl, rate, last, now):
    if now != F[last]:
        F[lvl] += F[rate] * (now - F[last])
        F[last] = now


@njit(cache=True)
def _update_rate(F, I, lvl, rate, last, new_rate, geo, heap, ev_time, ev_int, is_hopper):
    now = F[F_NOW]
    old_rate = F[rate]
    _advance(F, lvl, rate, last, now)
    if F[lvl] < 0.0:
        if F[lvl] < -TOL:
            I[I_STATUS] = ST_NEGATIVE
            return
        F[lvl] = 0.0
    F[rate] = new_rate
    if new_rate != old_rate:
        if is_hopper:
            _arm(0, F, I, geo, heap, ev_time, ev_int)
            if I[I_SPACE_ON]:
                _arm(1, F, I, geo, heap, ev_time, ev_int)
        elif I[I_COMPLETE_ON]:
            _arm(2, F, I, geo, heap, ev_time, ev_int)


@njit(cache=True)
def _set_flows(F, I, paver, geo, heap, ev_time, ev_int):
    """Returns True when the job is done and the caller must complete it."""
    if I[I_COMPLETE]:
        return False
    now = F[F_NOW]
    _advance(F, F_HOP_LEVEL, F_HOP_RATE, F_HOP_LAST, now)
    level = F[F_HOP_LEVEL]
    if I[I_CLOSED]:
        _advance(F, F_PL_LEVEL, F_PL_RATE, F_PL_LAST, now)
        if F[F_PL_LEVEL] >= geo[G_TOTAL] - TOL:
            return True
    r = paver[0]
    inflow = F[F_INFLOW]
    if level < TOL:
        if level < -TOL:
            I[I_STATUS] = ST_NEGATIVE
            return False
        F[F_HOP_LEVEL] = 0.0
        place = inflow if inflow < r else r
    else:
        place = r
    stalled = place == 0.0
    if stalled != (I[I_STALLED] == 1):
        if stalled:
            F[F_STALL_SINCE] = now
        elif F[F_STALL_SINCE] >= 0.0:
            F[F_STALL_TIME] += now - F[F_STALL_SINCE]
        I[I_STALLED] = 1 if stalled else 0
    _update_rate(F, I, F_HOP_LEVEL, F_HOP_RATE, F_HOP_LAST, inflow - place, geo, heap, ev_time, ev_int, True)
    _update_rate(F, I, F_PL_LEVEL, F_PL_RATE, F_PL_LAST, place, geo, heap, ev_time, ev_int, False)
    return False


@njit(cache=True)
def _gate_time(c, F, I, cls_f, paver, geo, speeds, t_arrival, t_hauling):
    now = F[F_NOW]
    r = paver[0]
    lead = cls_f[c, 1] + _travel(True, F, I, geo, speeds)
    committed = F[F_BATCHED] - (F[F_PL_LEVEL] + F[F_PL_RATE] * (now - F[F_PL_LAST]))
    allowed = paver[1] - cls_f[c, 0] + r * paver[2]
    place_rate = F[F_PL_RATE]
    if place_rate > 0.0:
        t = now + (committed - r * lead - allowed) / place_rate
    else:
        found = False
        resume = 0.0
        for i in range(t_hauling.shape[0]):
            if t_hauling[i]:
                if not found or t_arrival[i] < resume:
                    resume = t_arrival[i]
                    found = True
        if not found:
            return now
        t = resume - lead + (committed - allowed) / r
    return t if t > now else now


@njit(cache=True)
def _plan(F, I, cls_f, prio_order, paver, geo, speeds, t_arrival, t_hauling, q_len, heap, ev_time, ev_int):
    if I[I_COMPLETE] or I[I_LOADING] >= 0 or I[I_CLOSED]:
        g = I[I_GATE]
        if g >= 0:
            ev_int[g, E_CANCEL] = 1
            I[I_GATE] = -1
        return
    name = -1
    for k in range(prio_order.shape[0]):
        c = prio_order[k]
        if q_len[c] > 0:
            name = c
            break
    if name < 0:
        g = I[I_GATE]
        if g >= 0:
            ev_int[g, E_CANCEL] = 1
            I[I_GATE] = -1
        return
    t = _gate_time(name, F, I, cls_f, paver, geo, speeds, t_arrival, t_hauling)
    g = I[I_GATE]
    if g >= 0 and ev_int[g, E_CANCEL] == 0:
        if abs(ev_time[g] - t) <= 1e-9:
            return
        ev_int[g, E_CANCEL] = 1
    I[I_GATE] = _schedule(t, P_GATE, K_GATE, -1, I, heap, ev_time, ev_int)


@njit(cache=True)
def _clear_space(I, ev_int):
    if I[I_SPACE_ON]:
        e = I[I_SPACE_EV]
        if e >= 0:
            ev_int[e, E_CANCEL] = 1
        I[I_SPACE_EV] = -1
        I[I_SPACE_ON] = 0


@njit(cache=True)
def _complete(F, I, total, nt, t_state, t_load, t_class, t_dump_start, cls_f, onboard, ev_int):
    now = F[F_NOW]
    I[I_COMPLETE] = 1
    F[F_MAKESPAN] = now
    _advance(F, F_HOP_LEVEL, F_HOP_RATE, F_HOP_LAST, now)
    _advance(F, F_PL_LEVEL, F_PL_RATE, F_PL_LAST, now)
    F[F_PL_LEVEL] = total
    if I[I_STALLED] == 1 and F[F_STALL_SINCE] >= 0.0:
        F[F_STALL_TIME] += now - F[F_STALL_SINCE]
    for tr in range(nt):
        # a truck whose dump just ended is still flagged dumping but empty
        if t_state[tr] == S_DUMPING and t_load[tr] > 0.0:
            onboard[tr] = t_load[tr] - cls_f[t_class[tr], 3] * (now - t_dump_start[tr])
        else:
            onboard[tr] = t_load[tr]
    g = I[I_GATE]
    if g >= 0:
        ev_int[g, E_CANCEL] = 1
        I[I_GATE] = -1


@njit(cache=True)
def _simulate(geo, speeds, cls_f, prio_order, t_class, paver, cons, time_limit,
              ev_cap, act_cap, record_trace, audit):
    nt = t_class.shape[0]
    nc = cls_f.shape[0]
    F = np.zeros(N_F)
    I = np.zeros(N_I, dtype=np.int64)
    for s in (I_LOADING, I_DUMPING, I_GATE, I_STALL_EV, I_SPACE_EV, I_COMPLETE_EV, I_SPACE_ACTOR):
        I[s] = -1
    I[I_STALLED] = 1
    F[F_STALL_SINCE] = -1.0  # waiting for the first delivery is not a stall
    heap = np.empty(ev_cap, dtype=np.int64)
    ev_time = np.empty(ev_cap)
    ev_int = np.empty((ev_cap, 4), dtype=np.int64)
    act_f = np.empty((act_cap, 2))
    act_i = np.empty((act_cap, 3), dtype=np.int64)
    n_loads_cap = act_cap // 4 + 8
    arr_t = np.empty(n_loads_cap)
    arr_truck = np.empty(n_loads_cap, dtype=np.int64)
    dep_t = np.empty(n_loads_cap)
    fresh_f = np.empty((n_loads_cap, 2))
    fresh_truck = np.empty(n_loads_cap, dtype=np.int64)
    tcap = ev_cap if record_trace else 1
    trace_f = np.empty(tcap)
    trace_i = np.empty((tcap, 4), dtype=np.int64)

    t_state = np.zeros(nt, dtype=np.int64)
    t_load = np.zeros(nt)
    t_bct = np.zeros(nt)
    t_dump_start = np.zeros(nt)
    t_arrival = np.zeros(nt)
    t_hauling = np.zeros(nt, dtype=np.bool_)
    busy = np.zeros(nt)
    since = np.zeros(nt)
    loads = np.zeros(nc, dtype=np.int64)
    onboard = np.zeros(nt)

    # plant queues: one ring buffer per class; paver queue: one ring buffer
    q_buf = np.empty((nc, nt + 1), dtype=np.int64)
    q_head = np.zeros(nc, dtype=np.int64)
    q_len = np.zeros(nc, dtype=np.int64)
    pq_buf = np.empty(nt + 1, dtype=np.int64)
    pq_head = 0
    pq_len = 0
    qcap = nt + 1

    total = geo[G_TOTAL]

    for tr in range(nt):
        _log(tr, S_PLANT_Q, F, I, t_state, t_load, act_f, act_i, busy, since)
        c = t_class[tr]
        q_buf[c, (q_head[c] + q_len[c]) % qcap] = tr
        q_len[c] += 1
    # the stall watch starts at its threshold and is not armed
    _plan(F, I, cls_f, prio_order, paver, geo, speeds, t_arrival, t_hauling, q_len, heap, ev_time, ev_int)

    while I[I_STATUS] == OK:
        if F[F_NOW] > time_limit:
            I[I_STATUS] = ST_TIME_LIMIT
            break
        if I[I_COMPLETE]:
            break
        # skip cancelled events
        while I[I_HEAP] > 0 and ev_int[heap[0], E_CANCEL] == 1:
            _pop(I, heap, ev_time, ev_int)
        if I[I_HEAP] == 0:
            I[I_STATUS] = ST_STARVED
            break
        ev = _pop(I, heap, ev_time, ev_int)
        now = ev_time[ev]
        F[F_NOW] = now
        ev_int[ev, E_CANCEL] = 1
        kind = ev_int[ev, E_KIND]
        actor = ev_int[ev, E_ACTOR]
        if record_trace:
            n = I[I_NTRACE]
            trace_f[n] = now
            trace_i[n, 0] = ev_int[ev, E_PRIO]
            trace_i[n, 1] = ev
            trace_i[n, 2] = kind
            trace_i[n, 3] = actor
            I[I_NTRACE] = n + 1

        if kind == K_GATE:
            I[I_GATE] = -1
            if I[I_LOADING] >= 0 or I[I_CLOSED] or I[I_COMPLETE]:
                continue
            tr = -1
            for k in range(prio_order.shape[0]):
                c = prio_order[k]
                if q_len[c] > 0:
                    tr = q_buf[c, q_head[c]]
                    q_head[c] = (q_head[c] + 1) % qcap
                    q_len[c] -= 1
                    break
            if tr < 0:
                continue
            c = t_class[tr]
            cap = cls_f[c, 0]
            t_load[tr] = cap
            F[F_BATCHED] += cap
            loads[c] += 1
            _log(tr, S_LOADING, F, I, t_state, t_load, act_f, act_i, busy, since)
            I[I_LOADING] = tr
            if F[F_BATCHED] >= total - TOL:
                I[I_CLOSED] = 1
                I[I_COMPLETE_ON] = 1
                _arm(2, F, I, geo, heap, ev_time, ev_int)
            _schedule(now + cls_f[c, 1], P_LOAD_END, K_LOAD_END, tr, I, heap, ev_time, ev_int)

        elif kind == K_LOAD_END:
            tr = actor
            I[I_LOADING] = -1
            t_bct[tr] = now
            _log(tr, S_HAULING, F, I, t_state, t_load, act_f, act_i, busy, since)
            t_arrival[tr] = now + _travel(True, F, I, geo, speeds)
            t_hauling[tr] = True
            _schedule(t_arrival[tr], P_ARRIVE_PAVER, K_ARRIVE_PAVER, tr, I, heap, ev_time, ev_int)
            _plan(F, I, cls_f, prio_order, paver, geo, speeds, t_arrival, t_hauling, q_len, heap, ev_time, ev_int)

        elif kind == K_ARRIVE_PAVER:
            tr = actor
            t_hauling[tr] = False
            n = I[I_NARR]
            arr_t[n] = now
            arr_truck[n] = tr
            I[I_NARR] = n + 1
            _log(tr, S_PAVER_Q, F, I, t_state, t_load, act_f, act_i, busy, since)
            pq_buf[(pq_head + pq_len) % qcap] = tr
            pq_len += 1

        elif kind == K_DUMP_END:
            tr = actor
            F[F_INFLOW] = 0.0
            I[I_DUMPING] = -1
            t_load[tr] = 0.0
            if _set_flows(F, I, paver, geo, heap, ev_time, ev_int):
                _complete(F, I, total, nt, t_state, t_load, t_class, t_dump_start, cls_f, onboard, ev_int)
            n = I[I_NDEP]
            dep_t[n] = now
            I[I_NDEP] = n + 1
            age = now + cons[1] - t_bct[tr]
            excess = age - cons[0]
            if excess > 0:
                n = I[I_NFRESH]
                fresh_f[n, 0] = now
                fresh_f[n, 1] = excess
                fresh_truck[n] = tr
                I[I_NFRESH] = n + 1
            _log(tr, S_RETURNING, F, I, t_state, t_load, act_f, act_i, busy, since)
            _schedule(now + _travel(False, F, I, geo, speeds), P_ARRIVE_PLANT, K_ARRIVE_PLANT, tr,
                      I, heap, ev_time, ev_int)

        elif kind == K_ARRIVE_PLANT:
            tr = actor
            _log(tr, S_PLANT_Q, F, I, t_state, t_load, act_f, act_i, busy, since)
            c = t_class[tr]
            q_buf[c, (q_head[c] + q_len[c]) % qcap] = tr
            q_len[c] += 1

        elif kind == K_STALL:
            I[I_STALL_EV] = -1
            _advance(F, F_HOP_LEVEL, F_HOP_RATE, F_HOP_LAST, now)
            F[F_HOP_LEVEL] = 0.0
            if _set_flows(F, I, paver, geo, heap, ev_time, ev_int):
                _complete(F, I, total, nt, t_state, t_load, t_class, t_dump_start, cls_f, onboard, ev_int)

        elif kind == K_SPACE:
            I[I_SPACE_EV] = -1
            _advance(F, F_HOP_LEVEL, F_HOP_RATE, F_HOP_LAST, now)
            F[F_HOP_LEVEL] = F[F_SPACE_THR]
            _clear_space(I, ev_int)

        elif kind == K_COMPLETE:
            I[I_COMPLETE_EV] = -1
            _advance(F, F_PL_LEVEL, F_PL_RATE, F_PL_LAST, now)
            F[F_PL_LEVEL] = total
            _complete(F, I, total, nt, t_state, t_load, t_class, t_dump_start, cls_f, onboard, ev_int)
            continue

        # shared tail: try to start a dump, then replan the plant
        if kind == K_ARRIVE_PAVER or kind == K_DUMP_END or kind == K_STALL or kind == K_SPACE:
            if I[I_DUMPING] < 0 and pq_len > 0 and not I[I_COMPLETE]:
                head = pq_buf[pq_head]
                c = t_class[head]
                free = paver[1] - (F[F_HOP_LEVEL] + F[F_HOP_RATE] * (now - F[F_HOP_LAST]))
                if free >= cls_f[c, 0] - TOL:
                    _clear_space(I, ev_int)
                    pq_head = (pq_head + 1) % qcap
                    pq_len -= 1
                    _log(head, S_DUMPING, F, I, t_state, t_load, act_f, act_i, busy, since)
                    t_dump_start[head] = now
                    I[I_DUMPING] = head
                    F[F_INFLOW] = cls_f[c, 3]
                    if _set_flows(F, I, paver, geo, heap, ev_time, ev_int):
                        _complete(F, I, total, nt, t_state, t_load, t_class, t_dump_start, cls_f, onboard,
                                  ev_int)
                    _schedule(now + cls_f[c, 2], P_DUMP_END, K_DUMP_END, head, I, heap, ev_time, ev_int)
                else:
                    thr = paver[1] - cls_f[c, 0]
                    if not (I[I_SPACE_ON] and F[F_SPACE_THR] == thr):
                        _clear_space(I, ev_int)
                        I[I_SPACE_ON] = 1
                        F[F_SPACE_THR] = thr
                        I[I_SPACE_ACTOR] = head
                        _arm(1, F, I, geo, heap, ev_time, ev_int)
        if kind != K_GATE:
            _plan(F, I, cls_f, prio_order, paver, geo, speeds, t_arrival, t_hauling, q_len, heap, ev_time, ev_int)

        if audit and not I[I_COMPLETE]:
            transit = 0.0
            for tr in range(nt):
                if t_state[tr] == S_DUMPING:
                    transit += t_load[tr] - cls_f[t_class[tr], 3] * (now - t_dump_start[tr])
                else:
                    transit += t_load[tr]
            hop = F[F_HOP_LEVEL] + F[F_HOP_RATE] * (now - F[F_HOP_LAST])
            placed = F[F_PL_LEVEL] + F[F_PL_RATE] * (now - F[F_PL_LAST])
            if abs(F[F_BATCHED] - (transit + hop + placed)) > TOL or hop < -TOL or hop > paver[1] + TOL:
                I[I_STATUS] = ST_MASS

    return (I, F, act_f, act_i, arr_t, arr_truck, dep_t, fresh_f, fresh_truck, busy, since,
            t_state, onboard, loads, trace_f, trace_i)


# -- python side ------------------------------------------------------------


def supports(model) -> bool:
    """Whether ``model`` can run on the compiled engine."""
    return (model.controller is None and model.travel_override is None
            and math.isfinite(model.paver.placement_rate))


def _class_means(per_truck: dict[str, float], truck_classes: dict[str, str]) -> dict[str, float]:
    out = {}
    for name in sorted(set(truck_classes.values())):
        vals = [per_truck[t] for t, c in truck_classes.items() if c == name]
        out[name] = math.fsum(vals) / len(vals)
    return out


def run_fast(model, *, keep_activity: bool = True, record_trace: bool = False,
             audit=None) -> RunResult:
    """Run an unstarted :class:`SupplyModel` on the compiled engine."""
    if not supports(model):
        raise ValueError("model needs the reference engine (controller, fixed travel or infinite rate)")
    if model._ran:
        raise RuntimeError("a SupplyModel instance runs once")
    model._ran = True
    road = model.road
    names = list(model.classes)
    idx = {n: i for i, n in enumerate(names)}
    geo = np.array([road.length, road.plant_chainage, model.total_volume, road.cross_section])
    speeds = np.array([model.speeds.loaded_speed, model.speeds.empty_speed])
    cls_f = np.array([[k.capacity, k.load_duration, k.dump_duration, k.dump_rate]
                      for k in model.classes.values()], dtype=np.float64).reshape(len(names), 4)
    prio = np.array([idx[n] for n in model.priority], dtype=np.int64)
    t_class = np.array([idx[t.klass.name] for t in model.trucks], dtype=np.int64)
    paver = np.array([model.paver.placement_rate, model.paver.hopper_capacity,
                      model.dispatch.arrival_margin])
    cons = np.array([model.constraints.freshness_limit, model.constraints.compaction_lag])
    audit = model.audit if audit is None else audit

    min_cap = min(k.capacity for k in model.classes.values())
    loads_est = int(model.total_volume / min_cap) + 2
    scale = 1
    while True:
        ev_cap = scale * (24 * loads_est + 64)
        act_cap = scale * (6 * loads_est + len(model.trucks) + 64)
        out = _simulate(geo, speeds, cls_f, prio, t_class, paver, cons, float(model.time_limit),
                        ev_cap, act_cap, record_trace, bool(audit))
        status = int(out[0][I_STATUS])
        if status in (ST_EVENT_OVERFLOW, ST_LOG_OVERFLOW):
            scale *= 2
            continue
        break
    (I, F, act_f, act_i, arr_t, arr_truck, dep_t, fresh_f, fresh_truck, busy, since,
     t_state, onboard, loads, trace_f, trace_i) = out
    now = float(F[F_NOW])
    if status == ST_STARVED:
        raise StarvedModelError(f"calendar exhausted at t={now} before completion")
    if status == ST_TIME_LIMIT:
        raise StarvedModelError(f"no completion by t={now:g}")
    if status == ST_NEGATIVE:
        raise ConservationError(f"hopper level below zero at t={now}")
    if status == ST_MASS:
        raise ConservationError(f"mass ledger out of balance at t={now}")
    if status == ST_GEOMETRY:
        raise ValueError(f"placed volume outside the road at t={now}")

    ids = [t.id for t in model.trucks]
    truck_classes = {t.id: t.klass.name for t in model.trucks}
    makespan = float(F[F_MAKESPAN])
    leftover = float(F[F_HOP_LEVEL]) + math.fsum(onboard.tolist())
    discarded = 0.0 + leftover

    busy_l = busy.tolist()
    since_l = since.tolist()
    state_l = t_state.tolist()
    per_truck = {}
    for i, tid in enumerate(ids):
        b = busy_l[i]
        dt = makespan - since_l[i]
        if dt > 0 and state_l[i] in (S_LOADING, S_HAULING, S_DUMPING, S_RETURNING):
            b += dt
        active = makespan - 0.0
        per_truck[tid] = b / active if active > 0 else 0.0
    util = (per_truck, _class_means(per_truck, truck_classes))

    n_arr = int(I[I_NARR])
    arrivals = arr_t[:n_arr].tolist()
    arrival_trucks = [ids[i] for i in arr_truck[:n_arr].tolist()]
    departures = dep_t[:int(I[I_NDEP])].tolist()
    fresh = [Violation("freshness", t, x, ids[tr]) for (t, x), tr in
             zip(fresh_f[:int(I[I_NFRESH])].tolist(), fresh_truck[:int(I[I_NFRESH])].tolist())]
    inter = check_interarrival(arrivals, model.constraints, departures=departures,
                               truck_ids=arrival_trucks)
    violations = sorted(fresh + inter, key=lambda v: (v.time, v.kind, v.truck_id))

    activity = []
    if keep_activity:
        n = int(I[I_NACT])
        for (t, load), (tr, frm, to) in zip(act_f[:n].tolist(), act_i[:n].tolist()):
            activity.append(ActivityRecord(t, ids[tr], STATE_NAMES[frm], STATE_NAMES[to], load))
    trace = []
    if record_trace:
        n = int(I[I_NTRACE])
        for t, (p, seq, kind, actor) in zip(trace_f[:n].tolist(), trace_i[:n].tolist()):
            if kind in (K_GATE,):
                who = "plant"
            elif kind in (K_STALL, K_COMPLETE):
                who = "paver"
            else:
                who = ids[actor]
            trace.append(TraceEntry(t, p, seq, KIND_NAMES[kind], who))

    return RunResult(
        makespan=makespan,
        fleet=dict(model.fleet),
        truck_classes=truck_classes,
        activity=activity,
        arrivals=arrivals,
        arrival_trucks=arrival_trucks,
        departures=departures,
        violations=violations,
        batched=float(F[F_BATCHED]),
        placed=model.total_volume,
        discarded=discarded,
        stall_time=float(F[F_STALL_TIME]),
        loads={n: int(loads[idx[n]]) for n in names},
        trace=trace,
        precomputed_utilization=None if keep_activity else util,
    )
