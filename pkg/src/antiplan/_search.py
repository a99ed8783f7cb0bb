"""Compiled kernels for h_max and A* over packed fact bitsets.

States are packed into ``K`` uint64 words.  Actions are given in CSR form
(``*_ptr`` / ``*_idx``).  Everything here is numba nopython code; the Python
wrappers live in :mod:`antiplan.planner`.
"""

import heapq

import numpy as np
from numba import njit

INF = np.inf

SOLVED = 0
UNSOLVABLE = 1
LIMIT = 2


@njit(cache=True, inline="always")
def _has(words, f):
    return (words[f >> 6] >> np.uint64(f & 63)) & np.uint64(1)


@njit(cache=True)
def pack(facts, K):
    words = np.zeros(K, np.uint64)
    for f in facts:
        words[f >> 6] |= np.uint64(1) << np.uint64(f & 63)
    return words


@njit(cache=True)
def hmax_kernel(words, n_facts, goal, is_goal, pre_count, f2a_ptr, f2a_idx, add_ptr, add_idx,
                cost, nopre, hf, counter, early_exit):
    """Generalized Dijkstra over facts; fills ``hf`` and returns max over goal facts.

    With ``early_exit`` the sweep stops once every goal fact is settled, so
    ``hf`` is only exact for facts settled by then.
    """
    n_actions = pre_count.shape[0]
    for f in range(n_facts):
        hf[f] = INF
    for a in range(n_actions):
        counter[a] = pre_count[a]
    heap = [(0.0, np.int64(0))]
    heap.pop()
    for f in range(n_facts):
        if _has(words, f):
            hf[f] = 0.0
            heapq.heappush(heap, (0.0, np.int64(f)))
    for j in range(nopre.shape[0]):
        a = nopre[j]
        c = cost[a]
        for k in range(add_ptr[a], add_ptr[a + 1]):
            q = add_idx[k]
            if c < hf[q]:
                hf[q] = c
                heapq.heappush(heap, (c, np.int64(q)))
    goals_left = goal.shape[0]
    if goals_left == 0:
        return 0.0
    best = 0.0
    settled = np.zeros(n_facts, np.bool_)
    while len(heap) > 0:
        c, f = heapq.heappop(heap)
        if settled[f] or c > hf[f]:
            continue
        settled[f] = True
        if is_goal[f]:
            goals_left -= 1
            best = c
            if goals_left == 0 and early_exit:
                return best
        for k in range(f2a_ptr[f], f2a_ptr[f + 1]):
            a = f2a_idx[k]
            counter[a] -= 1
            if counter[a] == 0:
                # facts settle in non-decreasing order, so c is the max over pre(a)
                ac = cost[a] + c
                for m in range(add_ptr[a], add_ptr[a + 1]):
                    q = add_idx[m]
                    if ac < hf[q]:
                        hf[q] = ac
                        heapq.heappush(heap, (ac, np.int64(q)))
    if goals_left > 0:
        return INF
    return best


@njit(cache=True)
def _hash_words(words):
    h = np.uint64(14695981039346656037)
    for w in words:
        h ^= w
        h *= np.uint64(1099511628211)
        h ^= h >> np.uint64(29)
    return h


@njit(cache=True)
def _find(table, states, words, K):
    mask = table.shape[0] - 1
    i = np.int64(_hash_words(words) & np.uint64(mask))
    while True:
        node = table[i]
        if node < 0:
            return -1, i
        same = True
        for k in range(K):
            if states[node, k] != words[k]:
                same = False
                break
        if same:
            return node, i
        i = (i + 1) & mask


@njit(cache=True)
def astar_kernel(K, init_words, n_facts, goal, is_goal, pre_ptr, pre_idx, add_ptr, add_idx,
                 del_ptr, del_idx, cost, pre_count, f2a_ptr, f2a_idx, trig_ptr, trig_idx, nopre,
                 use_h, max_nodes):
    """A* with h_max (or uniform cost when ``use_h`` is False).

    Open-list order: f, then h, then generation order; successors are
    generated in ascending action index.  Closed nodes are reopened when a
    cheaper path appears.  Returns (status, cost, actions, expanded, generated).
    """
    n_actions = pre_count.shape[0]
    hf = np.empty(n_facts)
    counter = np.empty(n_actions, np.int64)

    cap = 4096
    states = np.zeros((cap, K), np.uint64)
    g = np.empty(cap)
    hv = np.empty(cap)
    parent = np.empty(cap, np.int64)
    pact = np.empty(cap, np.int64)
    closed = np.zeros(cap, np.bool_)
    tcap = 8192
    table = np.full(tcap, -1, np.int64)
    n = 0

    empty_plan = np.zeros(0, np.int64)

    h0 = 0.0
    if use_h:
        h0 = hmax_kernel(init_words, n_facts, goal, is_goal, pre_count, f2a_ptr, f2a_idx,
                         add_ptr, add_idx, cost, nopre, hf, counter, True)
    if h0 == INF:
        return UNSOLVABLE, INF, empty_plan, 0, 1
    states[0, :] = init_words
    g[0] = 0.0
    hv[0] = h0
    parent[0] = -1
    pact[0] = -1
    _, slot = _find(table, states, init_words, K)
    table[slot] = 0
    n = 1

    seq = 0
    heap = [(h0, h0, np.int64(0), np.int64(0))]
    expanded = 0
    succ = np.empty(K, np.uint64)
    cand = np.empty(n_actions, np.int64)

    while len(heap) > 0:
        f, hcur, _, node = heapq.heappop(heap)
        if closed[node] or f > g[node] + hv[node] + 1e-9:
            continue
        words = states[node]
        done = True
        for j in range(goal.shape[0]):
            if not _has(words, goal[j]):
                done = False
                break
        if done:
            length = 0
            cur = node
            while parent[cur] >= 0:
                length += 1
                cur = parent[cur]
            plan = np.empty(length, np.int64)
            cur = node
            for j in range(length - 1, -1, -1):
                plan[j] = pact[cur]
                cur = parent[cur]
            return SOLVED, g[node], plan, expanded, n
        closed[node] = True
        expanded += 1
        if expanded > max_nodes:
            return LIMIT, INF, empty_plan, expanded, n

        # applicable actions, in ascending index order
        nc = 0
        for w in range(K):
            bits = words[w]
            while bits != np.uint64(0):
                low = bits & (~bits + np.uint64(1))
                b = 0
                t = low
                while t > np.uint64(1):
                    t >>= np.uint64(1)
                    b += 1
                bits ^= low
                fct = w * 64 + b
                for k in range(trig_ptr[fct], trig_ptr[fct + 1]):
                    a = trig_idx[k]
                    ok = True
                    for m in range(pre_ptr[a], pre_ptr[a + 1]):
                        if not _has(words, pre_idx[m]):
                            ok = False
                            break
                    if ok:
                        cand[nc] = a
                        nc += 1
        for j in range(nopre.shape[0]):
            cand[nc] = nopre[j]
            nc += 1
        order = np.sort(cand[:nc])

        gnode = g[node]
        for j in range(nc):
            a = order[j]
            for k in range(K):
                succ[k] = words[k]
            for m in range(del_ptr[a], del_ptr[a + 1]):
                q = del_idx[m]
                succ[q >> 6] &= ~(np.uint64(1) << np.uint64(q & 63))
            for m in range(add_ptr[a], add_ptr[a + 1]):
                q = add_idx[m]
                succ[q >> 6] |= np.uint64(1) << np.uint64(q & 63)
            gn = gnode + cost[a]
            other, slot = _find(table, states, succ, K)
            if other >= 0:
                if gn < g[other] - 1e-9:
                    g[other] = gn
                    parent[other] = node
                    pact[other] = a
                    closed[other] = False
                    seq += 1
                    heapq.heappush(heap, (gn + hv[other], hv[other], np.int64(seq), np.int64(other)))
                continue
            hs = 0.0
            if use_h:
                hs = hmax_kernel(succ, n_facts, goal, is_goal, pre_count, f2a_ptr, f2a_idx,
                                 add_ptr, add_idx, cost, nopre, hf, counter, True)
            if n == cap:
                cap *= 2
                states2 = np.zeros((cap, K), np.uint64)
                states2[:n] = states[:n]
                states = states2
                g2 = np.empty(cap)
                g2[:n] = g[:n]
                g = g2
                hv2 = np.empty(cap)
                hv2[:n] = hv[:n]
                hv = hv2
                p2 = np.empty(cap, np.int64)
                p2[:n] = parent[:n]
                parent = p2
                a2 = np.empty(cap, np.int64)
                a2[:n] = pact[:n]
                pact = a2
                c2 = np.zeros(cap, np.bool_)
                c2[:n] = closed[:n]
                closed = c2
                words = states[node]
            states[n, :] = succ
            g[n] = gn
            hv[n] = hs
            parent[n] = node
            pact[n] = a
            closed[n] = False
            table[slot] = n
            if 2 * (n + 1) > tcap:
                tcap *= 2
                table = np.full(tcap, -1, np.int64)
                for i in range(n + 1):
                    _, s2 = _find(table, states, states[i], K)
                    table[s2] = i
            if hs < INF:
                seq += 1
                heapq.heappush(heap, (gn + hs, hs, np.int64(seq), np.int64(n)))
            n += 1
    return UNSOLVABLE, INF, empty_plan, expanded, n


# ---------------------------------------------------------------------------
# Blockworld macro search
# ---------------------------------------------------------------------------
#
# Under a metric move table, consecutive moves collapse into one and trailing
# moves are useless, so every optimal primitive plan is a sequence of
# [move] pick / [move] place steps (plus a final move when the robot location
# is pinned).  Searching over those steps is exact and far smaller.
#
# State key: robot location, then one 6-bit slot code per object (63 = held).

HELD = 63
PICK = 0
PLACE = 1
MOVE = 2


@njit(cache=True)
def _encode(robot, slots):
    key = np.int64(robot)
    for b in range(slots.shape[0]):
        key = key * 64 + slots[b]
    return key


@njit(cache=True)
def _decode(key, slots):
    n = slots.shape[0]
    for b in range(n - 1, -1, -1):
        slots[b] = key & 63
        key >>= 6
    return key


@njit(cache=True)
def _macro_h(robot, slots, mask, D, target_robot, pick_cost, place_cost):
    n = slots.shape[0]
    h = 0.0
    approach = INF
    held = False
    for b in range(n):
        s = slots[b]
        if s == HELD:
            held = True
            h += place_cost + D[b, robot]
        elif not ((mask[b] >> np.int64(s)) & 1):
            h += pick_cost + place_cost + D[b, s]
    if h == 0.0:
        if target_robot >= 0:
            return D[n, robot]
        return 0.0
    if not held:
        # travel to the first unsatisfied object is disjoint from carrying legs
        for b in range(n):
            s = slots[b]
            if not ((mask[b] >> np.int64(s)) & 1):
                if D[n + 1 + s, robot] < approach:
                    approach = D[n + 1 + s, robot]
        h += approach
    return h


@njit(cache=True)
def macro_astar(M, n_slots, init_slots, init_robot, mask, D, target_robot,
                pick_cost, place_cost, max_nodes):
    """A* over pick/place macro steps.

    ``M`` is the (metric) move-cost matrix over all locations, slots first.
    ``mask[b]`` is the bitmask of slots that satisfy object ``b``.  ``D`` rows
    ``0..n-1`` hold per-object carry lower bounds, row ``n`` the distance to
    ``target_robot`` and rows ``n+1+s`` the distance to slot ``s``.
    Returns (status, cost, kinds, objs, locs, expanded).
    """
    n = init_slots.shape[0]
    slots = init_slots.copy()
    key0 = _encode(init_robot, slots)
    h0 = _macro_h(init_robot, slots, mask, D, target_robot, pick_cost, place_cost)

    cap = 1024
    keys = np.empty(cap, np.int64)
    g = np.empty(cap)
    hv = np.empty(cap)
    parent = np.empty(cap, np.int64)
    akind = np.empty(cap, np.int64)
    aobj = np.empty(cap, np.int64)
    aloc = np.empty(cap, np.int64)
    closed = np.zeros(cap, np.bool_)
    index = {key0: np.int64(0)}
    keys[0] = key0
    g[0] = 0.0
    hv[0] = h0
    parent[0] = -1
    akind[0] = -1
    aobj[0] = -1
    aloc[0] = -1
    count = 1
    seq = 0
    heap = [(h0, h0, np.int64(0), np.int64(0))]
    expanded = 0
    work = np.empty(n, np.int64)
    empty = np.zeros(0, np.int64)

    while len(heap) > 0:
        f, _, _, node = heapq.heappop(heap)
        if closed[node] or f > g[node] + hv[node] + 1e-9:
            continue
        robot = _decode(keys[node], slots)
        held = -1
        occupied = np.int64(0)
        done = True
        for b in range(n):
            s = slots[b]
            if s == HELD:
                held = b
                done = False
            else:
                occupied |= np.int64(1) << np.int64(s)
                if not ((mask[b] >> np.int64(s)) & 1):
                    done = False
        if done and target_robot >= 0 and robot != target_robot:
            done = False
            at_final = True
        else:
            at_final = False
        if done:
            length = 0
            cur = node
            while parent[cur] >= 0:
                length += 1
                cur = parent[cur]
            kinds = np.empty(length, np.int64)
            objs = np.empty(length, np.int64)
            locs = np.empty(length, np.int64)
            cur = node
            for j in range(length - 1, -1, -1):
                kinds[j] = akind[cur]
                objs[j] = aobj[cur]
                locs[j] = aloc[cur]
                cur = parent[cur]
            return SOLVED, g[node], kinds, objs, locs, expanded
        closed[node] = True
        expanded += 1
        if expanded > max_nodes:
            return LIMIT, INF, empty, empty, empty, expanded

        # successors: (kind, obj, loc, cost)
        n_succ = 0
        if held >= 0:
            n_succ = n_slots
        elif at_final:
            n_succ = 1
        else:
            n_succ = n
        for j in range(n_succ):
            for b in range(n):
                work[b] = slots[b]
            if held >= 0:
                t = j
                if (occupied >> np.int64(t)) & 1:
                    continue
                kind = PLACE
                obj = held
                loc = t
                step = M[robot, t] + place_cost
                work[held] = t
                new_robot = t
            elif at_final:
                kind = MOVE
                obj = -1
                loc = target_robot
                step = M[robot, target_robot]
                new_robot = target_robot
            else:
                b = j
                kind = PICK
                obj = b
                loc = slots[b]
                step = M[robot, loc] + pick_cost
                work[b] = HELD
                new_robot = loc
            gn = g[node] + step
            key = _encode(new_robot, work)
            if key in index:
                other = index[key]
                if gn < g[other] - 1e-9:
                    g[other] = gn
                    parent[other] = node
                    akind[other] = kind
                    aobj[other] = obj
                    aloc[other] = loc
                    closed[other] = False
                    seq += 1
                    heapq.heappush(heap, (gn + hv[other], hv[other], np.int64(seq), np.int64(other)))
                continue
            hs = _macro_h(new_robot, work, mask, D, target_robot, pick_cost, place_cost)
            if count == cap:
                cap *= 2
                keys = _grow_i(keys, cap)
                g = _grow_f(g, cap)
                hv = _grow_f(hv, cap)
                parent = _grow_i(parent, cap)
                akind = _grow_i(akind, cap)
                aobj = _grow_i(aobj, cap)
                aloc = _grow_i(aloc, cap)
                c2 = np.zeros(cap, np.bool_)
                c2[:count] = closed[:count]
                closed = c2
            keys[count] = key
            g[count] = gn
            hv[count] = hs
            parent[count] = node
            akind[count] = kind
            aobj[count] = obj
            aloc[count] = loc
            index[key] = np.int64(count)
            seq += 1
            heapq.heappush(heap, (gn + hs, hs, np.int64(seq), np.int64(count)))
            count += 1
    return UNSOLVABLE, INF, empty, empty, empty, expanded


@njit(cache=True)
def _grow_i(a, cap):
    out = np.empty(cap, np.int64)
    out[:a.shape[0]] = a
    return out


@njit(cache=True)
def _grow_f(a, cap):
    out = np.empty(cap)
    out[:a.shape[0]] = a
    return out
