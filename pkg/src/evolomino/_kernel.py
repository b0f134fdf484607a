"""Compiled inner loops of the depth-first search.

All state lives in flat integer arrays bundled in a :class:`KernelState`
so the functions below can be compiled by numba.  Every function returns
False on a conflict instead of raising.  Setting ``NUMBA_DISABLE_JIT=1``
runs the same code as plain Python.
"""

from __future__ import annotations

from collections import namedtuple

from numba import njit

# slots of the ``ctr`` array
TRAIL, QLEN, DLEN, POINTER, SP, NODES, FAILS, PROPS = range(8)

# search return codes
EXHAUSTED, LEAF, PAUSED = 0, 1, 2

KernelState = namedtuple("KernelState", [
    "lo", "hi", "minact", "maxrange", "rhs",
    "row_ptr", "row_col", "row_coef",
    "pos_ptr", "pos_row", "pos_coef", "neg_ptr", "neg_row", "neg_coef",
    "queue", "queued", "dirty", "dirty_flag",
    "tr_j", "tr_lo", "tr_hi",
    "block_of", "blk_ptr", "blk_y", "blk_onpath", "adj_ptr", "adj_idx",
    "comp", "memb", "cstart", "creq", "cnt", "stamp",
    "order", "prefer",
    "st_p", "st_j", "st_alt", "st_mark",
    "ctr",
])


@njit(cache=True)
def _touch(S, r):
    if not S.queued[r]:
        S.queued[r] = 1
        S.queue[S.ctr[QLEN]] = r
        S.ctr[QLEN] += 1


@njit(cache=True)
def _mark_dirty(S, j):
    b = S.block_of[j]
    if b >= 0 and not S.dirty_flag[b]:
        S.dirty_flag[b] = 1
        S.dirty[S.ctr[DLEN]] = b
        S.ctr[DLEN] += 1


@njit(cache=True)
def _push_trail(S, j):
    t = S.ctr[TRAIL]
    S.tr_j[t] = j
    S.tr_lo[t] = S.lo[j]
    S.tr_hi[t] = S.hi[j]
    S.ctr[TRAIL] = t + 1


@njit(cache=True)
def set_lo(S, j, v):
    old = S.lo[j]
    if v <= old:
        return True
    if v > S.hi[j]:
        return False
    _push_trail(S, j)
    S.lo[j] = v
    d = v - old
    for k in range(S.pos_ptr[j], S.pos_ptr[j + 1]):
        r = S.pos_row[k]
        S.minact[r] += S.pos_coef[k] * d
        _touch(S, r)
    _mark_dirty(S, j)
    return True


@njit(cache=True)
def set_hi(S, j, v):
    old = S.hi[j]
    if v >= old:
        return True
    if v < S.lo[j]:
        return False
    _push_trail(S, j)
    S.hi[j] = v
    d = old - v
    for k in range(S.neg_ptr[j], S.neg_ptr[j + 1]):
        r = S.neg_row[k]
        S.minact[r] -= S.neg_coef[k] * d
        _touch(S, r)
    _mark_dirty(S, j)
    return True


@njit(cache=True)
def undo(S, mark):
    lo, hi, minact = S.lo, S.hi, S.minact
    while S.ctr[TRAIL] > mark:
        t = S.ctr[TRAIL] - 1
        S.ctr[TRAIL] = t
        j = S.tr_j[t]
        olo = S.tr_lo[t]
        ohi = S.tr_hi[t]
        if lo[j] != olo:
            d = lo[j] - olo
            for k in range(S.pos_ptr[j], S.pos_ptr[j + 1]):
                minact[S.pos_row[k]] -= S.pos_coef[k] * d
            lo[j] = olo
        if hi[j] != ohi:
            d = ohi - hi[j]
            for k in range(S.neg_ptr[j], S.neg_ptr[j + 1]):
                minact[S.neg_row[k]] += S.neg_coef[k] * d
            hi[j] = ohi
    for i in range(S.ctr[QLEN]):
        S.queued[S.queue[i]] = 0
    S.ctr[QLEN] = 0
    for i in range(S.ctr[DLEN]):
        S.dirty_flag[S.dirty[i]] = 0
    S.ctr[DLEN] = 0


@njit(cache=True)
def connectivity(S, b):
    """Drop cells of block ``b`` that cannot be joined to a usable anchor.

    Off-arrow cells form components through off-arrow cells; a component
    survives only next to a possible anchor that is compatible with every
    required cell of the block.
    """
    lo, hi = S.lo, S.hi
    base = S.blk_ptr[b]
    n = S.blk_ptr[b + 1] - base
    ys, onpath = S.blk_y, S.blk_onpath
    comp, memb, cstart, creq, cnt, stamp = S.comp, S.memb, S.cstart, S.creq, S.cnt, S.stamp
    for s in range(n):
        comp[s] = -1
        cnt[s] = 0
        stamp[s] = -1

    ncomp = 0
    top = 0
    for s in range(n):
        g = base + s
        if comp[s] >= 0 or onpath[g] or hi[ys[g]] == 0:
            continue
        cstart[ncomp] = top
        creq[ncomp] = 0
        comp[s] = ncomp
        memb[top] = s
        top += 1
        i = cstart[ncomp]
        while i < top:
            u = memb[i]
            i += 1
            for k in range(S.adj_ptr[base + u], S.adj_ptr[base + u + 1]):
                v = S.adj_idx[k]
                if comp[v] < 0 and not onpath[base + v] and hi[ys[base + v]]:
                    comp[v] = ncomp
                    memb[top] = v
                    top += 1
        ncomp += 1
    cstart[ncomp] = top

    nreq = 0
    for s in range(n):
        g = base + s
        if lo[ys[g]]:
            if onpath[g]:
                nreq += 1
                cnt[s] += 1
            else:
                creq[comp[s]] = 1
    for cid in range(ncomp):
        if not creq[cid]:
            continue
        nreq += 1
        for i in range(cstart[cid], cstart[cid + 1]):
            u = memb[i]
            for k in range(S.adj_ptr[base + u], S.adj_ptr[base + u + 1]):
                v = S.adj_idx[k]
                if onpath[base + v] and hi[ys[base + v]] and stamp[v] != cid:
                    stamp[v] = cid
                    cnt[v] += 1

    if nreq > 0:
        found = False
        for s in range(n):
            g = base + s
            if onpath[g] and hi[ys[g]] and cnt[s] == nreq:
                found = True
                break
        if not found:
            return False

    for cid in range(ncomp):
        alive = False
        for i in range(cstart[cid], cstart[cid + 1]):
            u = memb[i]
            for k in range(S.adj_ptr[base + u], S.adj_ptr[base + u + 1]):
                v = S.adj_idx[k]
                if onpath[base + v] and hi[ys[base + v]] and (nreq == 0 or cnt[v] == nreq):
                    alive = True
                    break
            if alive:
                break
        if not alive:
            for i in range(cstart[cid], cstart[cid + 1]):
                if not set_hi(S, ys[base + memb[i]], 0):
                    return False

    if nreq > 0:
        for s in range(n):
            g = base + s
            if onpath[g] and hi[ys[g]] and cnt[s] != nreq:
                if not set_hi(S, ys[g], 0):
                    return False
    return True


@njit(cache=True)
def propagate(S):
    lo, hi, minact, rhs, maxrange = S.lo, S.hi, S.minact, S.rhs, S.maxrange
    ctr = S.ctr
    while True:
        while ctr[QLEN] > 0:
            ctr[QLEN] -= 1
            r = S.queue[ctr[QLEN]]
            S.queued[r] = 0
            slack = rhs[r] - minact[r]
            if slack < 0:
                return False
            if slack >= maxrange[r]:
                continue
            ctr[PROPS] += 1
            for k in range(S.row_ptr[r], S.row_ptr[r + 1]):
                c = S.row_coef[k]
                j = S.row_col[k]
                if c > 0:
                    if c * (hi[j] - lo[j]) > slack:
                        if not set_hi(S, j, lo[j] + slack // c):
                            return False
                elif -c * (hi[j] - lo[j]) > slack:
                    if not set_lo(S, j, hi[j] - slack // -c):
                        return False
                slack = rhs[r] - minact[r]
                if slack < 0:
                    return False
        if ctr[DLEN] == 0:
            return True
        while ctr[DLEN] > 0 and ctr[QLEN] == 0:
            ctr[DLEN] -= 1
            b = S.dirty[ctr[DLEN]]
            S.dirty_flag[b] = 0
            if not connectivity(S, b):
                return False


@njit(cache=True)
def _fix(S, j, v):
    if v:
        return set_lo(S, j, 1)
    return set_hi(S, j, 0)


@njit(cache=True)
def search(S, failed, budget):
    """Continue the depth-first search for at most ``budget`` new nodes.

    Returns LEAF with every branching variable fixed (call again with
    ``failed`` set to move on), EXHAUSTED when the tree is done, or PAUSED.
    """
    ctr, order, lo, hi = S.ctr, S.order, S.lo, S.hi
    n = order.shape[0]
    spent = 0
    while True:
        if not failed:
            p = ctr[POINTER]
            while p < n and lo[order[p]] == hi[order[p]]:
                p += 1
            ctr[POINTER] = p
            if p == n:
                return LEAF
            if spent >= budget:
                return PAUSED
            spent += 1
            ctr[NODES] += 1
            j = order[p]
            first = S.prefer[j]
            sp = ctr[SP]
            S.st_p[sp] = p
            S.st_j[sp] = j
            S.st_alt[sp] = 1 - first
            S.st_mark[sp] = ctr[TRAIL]
            ctr[SP] = sp + 1
            if not (_fix(S, j, first) and propagate(S)):
                failed = True
        while failed:
            ctr[FAILS] += 1
            if ctr[SP] == 0:
                return EXHAUSTED
            sp = ctr[SP] - 1
            ctr[SP] = sp
            mark = S.st_mark[sp]
            undo(S, mark)
            alt = S.st_alt[sp]
            if alt < 0:
                continue
            S.st_alt[sp] = -1
            ctr[SP] = sp + 1
            ctr[POINTER] = S.st_p[sp]
            if _fix(S, S.st_j[sp], alt) and propagate(S):
                failed = False
