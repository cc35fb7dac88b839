"""Hot inner loops of the shift kernel.

Each kernel has a numba implementation and a vectorised numpy twin with
identical results. The public names are bound to the numba versions unless
``QRM_DISABLE_JIT`` is set; both variants stay importable for benchmarking
and cross-checking.
"""

import numpy as np

from ._jit import JIT_ENABLED, njit

__all__ = [
    "BACKEND",
    "compress_lines",
    "compress_lines_numpy",
    "compress_lines_numba",
    "tweezer_faults",
    "tweezer_faults_numpy",
    "tweezer_faults_numba",
    "tweezer_apply",
    "tweezer_apply_numpy",
    "tweezer_apply_numba",
    "plan_lines",
    "plan_lines_numpy",
    "plan_lines_numba",
    "lower_merged",
    "lower_merged_numpy",
    "lower_merged_numba",
    "lower_all",
    "lower_all_numpy",
    "lower_all_numba",
    "trace_replay",
    "trace_replay_numpy",
    "trace_replay_numba",
]


def compress_lines_numpy(lines, s_en):
    """Scan and execute one batch of lines.

    ``lines`` is an ``(n, L)`` uint8 array, index 0 of every line nearest the
    array center; ``s_en`` is the ``(L,)`` enable mask. Returns

    * ``cmds``   ``(n, L)`` uint8, 1 where a hole was scanned with ``s_en`` on
    * ``out``    ``(n, L)`` uint8, the line after executing every command
    * ``hole``   ``(n, L)`` int64, current hole position when command ``i``
      fires (``i`` minus earlier commands on the line), -1 where no command
    * ``live``   ``(n, L)`` uint8, 1 where the command shifts at least one atom
    """
    lines = np.asarray(lines, dtype=np.uint8)
    n, length = lines.shape
    cmds = ((1 - lines) & np.asarray(s_en, dtype=np.uint8)[None, :]).astype(np.uint8)
    before = np.cumsum(cmds, axis=1, dtype=np.int64) - cmds
    idx = np.arange(length, dtype=np.int64)
    hole = np.where(cmds == 1, idx[None, :] - before, -1)

    # atoms strictly after index i
    after = np.cumsum(lines[:, ::-1], axis=1, dtype=np.int64)[:, ::-1] - lines
    live = ((cmds == 1) & (after > 0)).astype(np.uint8)

    out = np.zeros_like(lines)
    rr, aa = np.nonzero(lines)
    out[rr, aa - before[rr, aa]] = 1
    return cmds, out, hole, live


@njit
def compress_lines_numba(lines, s_en):
    n, length = lines.shape
    cmds = np.zeros((n, length), dtype=np.uint8)
    out = np.zeros((n, length), dtype=np.uint8)
    hole = np.full((n, length), -1, dtype=np.int64)
    live = np.zeros((n, length), dtype=np.uint8)
    for r in range(n):
        last = -1
        for i in range(length):
            if lines[r, i] != 0:
                last = i
        shifted = 0
        for i in range(length):
            if lines[r, i] != 0:
                out[r, i - shifted] = 1
            elif s_en[i] != 0:
                cmds[r, i] = 1
                hole[r, i] = i - shifted
                if last > i:
                    live[r, i] = 1
                shifted += 1
    return cmds, out, hole, live


def tweezer_faults_numpy(bits, rows, cols, dr, dc, intended, use_intended):
    """Count ``(out_of_bounds, collisions, unintended)`` for a row-set x col-set move.

    ``bits`` is the ``(W, W)`` bool occupancy; ``intended`` is only consulted
    when ``use_intended`` is true.
    """
    w = bits.shape[0]
    rr = np.repeat(rows, cols.size)
    cc = np.tile(cols, rows.size)
    tr, tc = rr + dr, cc + dc
    oob = (rr < 0) | (rr >= w) | (cc < 0) | (cc >= w) | (tr < 0) | (tr >= w) | (tc < 0) | (tc >= w)
    n_oob = int(oob.sum())
    if n_oob:
        return n_oob, 0, 0
    trapped = np.zeros((w, w), dtype=np.bool_)
    trapped[rr, cc] = True
    carrying = bits[rr, cc]
    n_coll = int((carrying & bits[tr, tc] & ~trapped[tr, tc]).sum())
    n_extra = int((carrying & ~intended[rr, cc]).sum()) if use_intended else 0
    return 0, n_coll, n_extra


@njit
def tweezer_faults_numba(bits, rows, cols, dr, dc, intended, use_intended):
    w = bits.shape[0]
    n_oob = 0
    for r in rows:
        for c in cols:
            if r < 0 or r >= w or c < 0 or c >= w or r + dr < 0 or r + dr >= w or c + dc < 0 or c + dc >= w:
                n_oob += 1
    if n_oob:
        return n_oob, 0, 0
    in_rows = np.zeros(w, dtype=np.bool_)
    in_cols = np.zeros(w, dtype=np.bool_)
    for r in rows:
        in_rows[r] = True
    for c in cols:
        in_cols[c] = True
    n_coll = 0
    n_extra = 0
    for r in rows:
        for c in cols:
            if not bits[r, c]:
                continue
            tr = r + dr
            tc = c + dc
            if bits[tr, tc] and not (in_rows[tr] and in_cols[tc]):
                n_coll += 1
            if use_intended and not intended[r, c]:
                n_extra += 1
    return 0, n_coll, n_extra


def tweezer_apply_numpy(bits, rows, cols, dr, dc):
    """Lockstep displacement of every trapped atom, in place."""
    rr = np.repeat(rows, cols.size)
    cc = np.tile(cols, rows.size)
    carrying = bits[rr, cc]
    rr, cc = rr[carrying], cc[carrying]
    bits[rr, cc] = False
    bits[rr + dr, cc + dc] = True


@njit
def tweezer_apply_numba(bits, rows, cols, dr, dc):
    n = rows.size * cols.size
    src_r = np.empty(n, dtype=np.int64)
    src_c = np.empty(n, dtype=np.int64)
    k = 0
    for r in rows:
        for c in cols:
            if bits[r, c]:
                src_r[k] = r
                src_c[k] = c
                k += 1
    for i in range(k):
        bits[src_r[i], src_c[i]] = False
    for i in range(k):
        bits[src_r[i] + dr, src_c[i] + dc] = True


def _group_order(lo, hi):
    # widest segment first, then by start; equal ranges end up adjacent
    return np.lexsort((lo, -(hi - lo)))


def plan_lines_numpy(line_bits, lo, hi):
    """Assign the lines of one merged move to as few tweezer moves as the greedy finds.

    ``line_bits[k]`` is the occupancy along line ``k`` and ``[lo[k], hi[k])``
    the segment it must shift. Lines with identical segments always share a
    plan; a group joins an earlier plan when the enlarged cross product only
    adds empty sites. Returns one plan id per line, numbered in creation order.
    """
    n, w = line_bits.shape
    plan = np.full(n, -1, dtype=np.int64)
    unions = []
    order = _group_order(lo, hi)
    k = 0
    while k < n:
        j = k
        while j < n and lo[order[j]] == lo[order[k]] and hi[order[j]] == hi[order[k]]:
            j += 1
        group = order[k:j]
        span = np.zeros(w, dtype=np.bool_)
        span[lo[order[k]]:hi[order[k]]] = True
        chosen = -1
        for p, union in enumerate(unions):
            members = np.flatnonzero(plan == p)
            if (line_bits[members] & (span & ~union)).any():
                continue
            if (line_bits[group] & (union & ~span)).any():
                continue
            chosen = p
            break
        if chosen < 0:
            chosen = len(unions)
            unions.append(span)
        else:
            unions[chosen] |= span
        plan[group] = chosen
        k = j
    return plan


@njit
def plan_lines_numba(line_bits, lo, hi):
    n, w = line_bits.shape
    plan = np.full(n, -1, dtype=np.int64)
    unions = np.zeros((n, w), dtype=np.bool_)
    occupied = np.zeros((n, w), dtype=np.bool_)  # OR of the member lines' bits per plan
    key = np.empty(n, dtype=np.int64)
    for i in range(n):
        key[i] = -(hi[i] - lo[i]) * (w + 1) + lo[i]
    order = np.argsort(key, kind="mergesort")
    n_plans = 0
    k = 0
    while k < n:
        a, b = lo[order[k]], hi[order[k]]
        j = k
        while j < n and lo[order[j]] == a and hi[order[j]] == b:
            j += 1
        chosen = -1
        for p in range(n_plans):
            ok = True
            for x in range(a, b):
                if occupied[p, x] and not unions[p, x]:
                    ok = False
                    break
            if ok:
                for t in range(k, j):
                    g = order[t]
                    for x in range(w):
                        if unions[p, x] and (x < a or x >= b) and line_bits[g, x]:
                            ok = False
                            break
                    if not ok:
                        break
            if ok:
                chosen = p
                break
        if chosen < 0:
            chosen = n_plans
            n_plans += 1
        for x in range(a, b):
            unions[chosen, x] = True
        for t in range(k, j):
            g = order[t]
            plan[g] = chosen
            for x in range(w):
                if line_bits[g, x]:
                    occupied[chosen, x] = True
        k = j
    return plan


def lower_merged_numpy(bits, lines, lo, hi, horizontal, dr, dc):
    """Plan, check and (if clean) execute one merged move in place.

    Every line of a merged move shifts along itself, so a plan's traps on
    line ``k`` are the positions in the plan's union mask. Returns ``(plan,
    unions, faults)``: the plan id of every line, each plan's position mask,
    and per plan the number of traps that would carry an atom outside its
    line's segment, off the grid, or onto a non-moving atom. ``bits`` is
    only modified when every plan is fault-free.
    """
    along = bits[lines, :] if horizontal else bits[:, lines].T
    along = np.ascontiguousarray(along)
    plan = plan_lines_numpy(along, lo, hi)
    n, w = along.shape
    n_plans = int(plan.max()) + 1 if n else 0
    unions = np.zeros((n_plans, w), dtype=np.bool_)
    pos = np.arange(w)
    seg = (pos[None, :] >= lo[:, None]) & (pos[None, :] < hi[:, None])
    for k in range(n):
        unions[plan[k]] |= seg[k]
    delta = dc if horizontal else dr
    trapped = unions[plan]
    carrying = trapped & along
    dest = pos + delta
    inside = (dest >= 0) & (dest < w)
    dest_c = np.clip(dest, 0, w - 1)
    blocked = along[:, dest_c] & ~trapped[:, dest_c]
    bad = carrying & (~seg | ~inside[None, :] | blocked)
    faults = np.bincount(plan, weights=bad.sum(axis=1), minlength=n_plans).astype(np.int64)
    if not faults.any():
        moved = along & ~carrying
        rr, xx = np.nonzero(carrying)
        moved[rr, xx + delta] = True
        if horizontal:
            bits[lines, :] = moved
        else:
            bits[:, lines] = moved.T
    return plan, unions, faults


@njit
def lower_merged_numba(bits, lines, lo, hi, horizontal, dr, dc):
    n = lines.size
    w = bits.shape[0]
    along = np.empty((n, w), dtype=np.bool_)
    for k in range(n):
        for x in range(w):
            along[k, x] = bits[lines[k], x] if horizontal else bits[x, lines[k]]
    plan = plan_lines_numba(along, lo, hi)
    n_plans = 0
    for k in range(n):
        n_plans = max(n_plans, plan[k] + 1)
    unions = np.zeros((n_plans, w), dtype=np.bool_)
    for k in range(n):
        for x in range(lo[k], hi[k]):
            unions[plan[k], x] = True
    delta = dc if horizontal else dr
    faults = np.zeros(n_plans, dtype=np.int64)
    for k in range(n):
        p = plan[k]
        for x in range(w):
            if not (unions[p, x] and along[k, x]):
                continue
            y = x + delta
            if x < lo[k] or x >= hi[k] or y < 0 or y >= w:
                faults[p] += 1
            elif along[k, y] and not unions[p, y]:
                faults[p] += 1
    if faults.sum() == 0:
        row = np.empty(w, dtype=np.bool_)
        for k in range(n):
            p = plan[k]
            for x in range(w):
                row[x] = along[k, x] and not unions[p, x]
            for x in range(w):
                if unions[p, x] and along[k, x]:
                    row[x + delta] = True
            for x in range(w):
                if horizontal:
                    bits[lines[k], x] = row[x]
                else:
                    bits[x, lines[k]] = row[x]
    return plan, unions, faults


def lower_all_numpy(bits, seg_move, seg_line, seg_lo, seg_hi, move_horiz, move_dr, move_dc, start):
    """Lower merged moves ``start, start+1, ...`` until one needs a fallback.

    Segments follow the layout of :func:`trace_replay_numpy` with one segment
    per line. Returns ``(seg_plan, plan_move, plan_union, stop)``: a global
    plan id per segment (-1 for segments not lowered), the merged move of each
    plan, each plan's covered-position mask, and the index of the first move
    whose plans had faults (``n_moves`` if none). ``bits`` advances through
    every lowered move.
    """
    n_moves = move_dr.size
    w = bits.shape[0]
    bounds = np.searchsorted(seg_move, np.arange(n_moves + 1))
    seg_plan = np.full(seg_move.size, -1, dtype=np.int64)
    plan_move, unions = [], []
    for m in range(start, n_moves):
        a, b = bounds[m], bounds[m + 1]
        if a == b:
            continue
        plan, un, faults = lower_merged_numpy(
            bits, seg_line[a:b], seg_lo[a:b], seg_hi[a:b], bool(move_horiz[m]), int(move_dr[m]), int(move_dc[m])
        )
        if faults.any():
            return seg_plan, np.asarray(plan_move, np.int64), _stack(unions, w), m
        seg_plan[a:b] = plan + len(plan_move)
        plan_move.extend([m] * un.shape[0])
        unions.extend(un)
    return seg_plan, np.asarray(plan_move, np.int64), _stack(unions, w), n_moves


def _stack(rows, w):
    return np.array(rows, dtype=np.bool_).reshape(-1, w)


@njit
def lower_all_numba(bits, seg_move, seg_line, seg_lo, seg_hi, move_horiz, move_dr, move_dc, start):
    n_moves = move_dr.size
    n_seg = seg_move.size
    w = bits.shape[0]
    seg_plan = np.full(n_seg, -1, dtype=np.int64)
    plan_move = np.empty(n_seg, dtype=np.int64)
    plan_union = np.zeros((n_seg, w), dtype=np.bool_)
    n_plans = 0
    k = 0
    while k < n_seg and seg_move[k] < start:
        k += 1
    while k < n_seg:
        m = seg_move[k]
        j = k
        while j < n_seg and seg_move[j] == m:
            j += 1
        plan, un, faults = lower_merged_numba(
            bits, seg_line[k:j], seg_lo[k:j], seg_hi[k:j], move_horiz[m], move_dr[m], move_dc[m]
        )
        if faults.sum() > 0:
            return seg_plan, plan_move[:n_plans], plan_union[:n_plans], m
        for t in range(k, j):
            seg_plan[t] = plan[t - k] + n_plans
        for p in range(un.shape[0]):
            plan_move[n_plans + p] = m
            plan_union[n_plans + p] = un[p]
        n_plans += un.shape[0]
        k = j
    return seg_plan, plan_move[:n_plans], plan_union[:n_plans], n_moves


def trace_replay_numpy(ids, seg_move, seg_line, seg_lo, seg_hi, seg_horiz, move_dr, move_dc):
    """Replay moves on a grid of atom ids (-1 = empty), in place.

    Segment ``k`` belongs to move ``seg_move[k]`` (non-decreasing) and covers
    positions ``[seg_lo[k], seg_hi[k])`` along row ``seg_line[k]`` when
    ``seg_horiz[k]``, else along that column. Returns ``(ev_atom, ev_move,
    status, bad_move)``: one event per displaced atom in move order, status 0
    on success, 1 if an atom would leave the grid, 2 on a collision.
    """
    w = ids.shape[0]
    ev_atom, ev_move = [], []
    n_moves = move_dr.size
    bounds = np.searchsorted(seg_move, np.arange(n_moves + 1))
    for m in range(n_moves):
        a, b = bounds[m], bounds[m + 1]
        if a == b:
            continue
        lengths = seg_hi[a:b] - seg_lo[a:b]
        offsets = np.cumsum(lengths) - lengths
        along = np.arange(int(lengths.sum())) - np.repeat(offsets - seg_lo[a:b], lengths)
        across = np.repeat(seg_line[a:b], lengths)
        horiz = np.repeat(seg_horiz[a:b], lengths)
        rr = np.where(horiz, across, along)
        cc = np.where(horiz, along, across)
        atoms = ids[rr, cc]
        sel = atoms >= 0
        if not sel.any():
            continue
        tr, tc = rr[sel] + move_dr[m], cc[sel] + move_dc[m]
        if (tr < 0).any() or (tr >= w).any() or (tc < 0).any() or (tc >= w).any():
            return np.concatenate(ev_atom + [np.zeros(0, np.int64)]), np.concatenate(ev_move + [np.zeros(0, np.int64)]), 1, m
        ids[rr[sel], cc[sel]] = -1
        if (ids[tr, tc] >= 0).any():
            return np.concatenate(ev_atom + [np.zeros(0, np.int64)]), np.concatenate(ev_move + [np.zeros(0, np.int64)]), 2, m
        ids[tr, tc] = atoms[sel]
        ev_atom.append(atoms[sel])
        ev_move.append(np.full(int(sel.sum()), m, dtype=np.int64))
    if not ev_atom:
        return np.zeros(0, np.int64), np.zeros(0, np.int64), 0, -1
    return np.concatenate(ev_atom), np.concatenate(ev_move), 0, -1


@njit
def trace_replay_numba(ids, seg_move, seg_line, seg_lo, seg_hi, seg_horiz, move_dr, move_dc):
    w = ids.shape[0]
    n_seg = seg_move.size
    cap = 0
    for k in range(n_seg):
        cap += seg_hi[k] - seg_lo[k]
    ev_atom = np.empty(cap, dtype=np.int64)
    ev_move = np.empty(cap, dtype=np.int64)
    buf_a = np.empty(w * w, dtype=np.int64)
    buf_r = np.empty(w * w, dtype=np.int64)
    buf_c = np.empty(w * w, dtype=np.int64)
    n_ev = 0
    k = 0
    while k < n_seg:
        m = seg_move[k]
        j = k
        while j < n_seg and seg_move[j] == m:
            j += 1
        cnt = 0
        for s in range(k, j):
            for x in range(seg_lo[s], seg_hi[s]):
                r = seg_line[s] if seg_horiz[s] else x
                c = x if seg_horiz[s] else seg_line[s]
                a = ids[r, c]
                if a >= 0:
                    tr = r + move_dr[m]
                    tc = c + move_dc[m]
                    if tr < 0 or tr >= w or tc < 0 or tc >= w:
                        return ev_atom[:n_ev], ev_move[:n_ev], 1, m
                    buf_a[cnt] = a
                    buf_r[cnt] = tr
                    buf_c[cnt] = tc
                    ids[r, c] = -1
                    cnt += 1
        for i in range(cnt):
            if ids[buf_r[i], buf_c[i]] >= 0:
                return ev_atom[:n_ev], ev_move[:n_ev], 2, m
            ids[buf_r[i], buf_c[i]] = buf_a[i]
            ev_atom[n_ev] = buf_a[i]
            ev_move[n_ev] = m
            n_ev += 1
        k = j
    return ev_atom[:n_ev], ev_move[:n_ev], 0, -1


def _compress_lines_jit(lines, s_en):
    return compress_lines_numba(
        np.ascontiguousarray(lines, dtype=np.uint8), np.ascontiguousarray(s_en, dtype=np.uint8)
    )


if JIT_ENABLED:
    compress_lines = _compress_lines_jit
    tweezer_faults = tweezer_faults_numba
    tweezer_apply = tweezer_apply_numba
    plan_lines = plan_lines_numba
    lower_merged = lower_merged_numba
    trace_replay = trace_replay_numba
    lower_all = lower_all_numba
    BACKEND = "numba"
else:
    compress_lines = compress_lines_numpy
    tweezer_faults = tweezer_faults_numpy
    tweezer_apply = tweezer_apply_numpy
    plan_lines = plan_lines_numpy
    lower_merged = lower_merged_numpy
    trace_replay = trace_replay_numpy
    lower_all = lower_all_numpy
    BACKEND = "numpy"
