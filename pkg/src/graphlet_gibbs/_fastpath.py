"""Compiled batch sampler for small explicit graphs with indicator weights.

Same algorithm as the reference path in `percolation`, still exact: every
Bernoulli compares fresh 32-bit digits of U against the exact binary
expansion of its parameter, and the filter probability is realised as a chain
of independent coins (one per factor), which multiplies out to the same value.
Expansions are stored to 2048 bits; running past that (probability 2^-2048
per coin) raises instead of guessing.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from .exact import RandomSource

try:
    import numba
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    _HAVE_NUMBA = False

MAX_N = 64
DIGITS = 64  # 32-bit digits per stored expansion
GOLDEN = np.uint64(0x9E3779B97F4A7C15)


def available() -> bool:
    return _HAVE_NUMBA


def digit_table(p: Fraction):
    """(digits, length): 32-bit digits of p in [0,1); length counts digits before the expansion ends."""
    if p < 0 or p > 1:
        raise ValueError("probability outside [0,1]")
    table = np.zeros(DIGITS, dtype=np.uint64)
    if p == 1:
        # every comparison C < 2^32 succeeds on the first digit
        table[0] = np.uint64(1 << 32)
        return table, 1
    num, den = p.numerator, p.denominator
    length = DIGITS + 1  # sentinel: non-terminating within the table
    for i in range(DIGITS):
        d, num = divmod(num << 32, den)
        table[i] = np.uint64(d)
        if num == 0:
            length = i + 1
            break
    return table, length


if _HAVE_NUMBA:

    @njit(cache=True, inline="always")
    def _word(seed, idx):
        z = seed + (idx + np.uint64(1)) * GOLDEN
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        return z ^ (z >> np.uint64(31))

    @njit(cache=True, inline="always")
    def _digit(seed, st):
        # st[0] word counter, st[1] buffered word, st[2] half flag, st[3] error flag
        if st[2] != np.uint64(0):
            st[2] = np.uint64(0)
            return np.uint64(0xFFFFFFFF) ^ (st[1] & np.uint64(0xFFFFFFFF))
        w = _word(seed, st[0])
        st[0] += np.uint64(1)
        st[1] = w
        st[2] = np.uint64(1)
        return np.uint64(0xFFFFFFFF) ^ (w >> np.uint64(32))

    @njit(cache=True)
    def _bern(seed, st, table, length):
        for i in range(table.shape[0]):
            c = _digit(seed, st)
            d = table[i]
            if c < d:
                return True
            if c > d:
                return False
            if i + 1 >= length:
                return False
        st[3] = np.uint64(1)
        return False

    @njit(cache=True)
    def _bern_inv(seed, st, k):
        # Bernoulli(1/k) by long division of 1/k in base 2^32
        if k == 1:
            return True
        rem = np.uint64(1)
        kk = np.uint64(k)
        for i in range(DIGITS):
            num = rem << np.uint64(32)
            d = num // kk
            rem = num - d * kk
            c = _digit(seed, st)
            if c < d:
                return True
            if c > d:
                return False
            if rem == np.uint64(0):
                return False
        st[3] = np.uint64(1)
        return False

    @njit(cache=True)
    def _uniform(seed, st, n):
        if n <= 1:
            return np.int64(0)
        bits = 0
        m = n - 1
        while m > 0:
            bits += 1
            m >>= 1
        shift = np.uint64(32 - bits)
        while True:
            x = np.int64(_digit(seed, st) >> shift)
            if x < n:
                return x

    @njit(cache=True)
    def _kernel(offsets, targets, n, root, unrooted, q, f_empty, delta,
                t_keep, l_keep, t_stop, l_stop, t_ratio, l_ratio, ratio_one,
                seed, st, count, out_size, out_vert, out_col, out_bnd, out_it):
        stamp = np.zeros(n, dtype=np.int64)
        cur = 0
        queue = np.zeros(n, dtype=np.int64)
        for s in range(count):
            it = 0
            while True:
                it += 1
                cur += 1
                r = root
                if unrooted:
                    r = _uniform(seed, st, n)
                stamp[r] = cur
                k = 0
                bnd = 1
                if _bern(seed, st, t_keep, l_keep):
                    bnd = 0
                    out_vert[s, 0] = r
                    out_col[s, 0] = 1 + _uniform(seed, st, q)
                    k = 1
                    queue[0] = r
                    head = 0
                    while head < k:
                        v = queue[head]
                        head += 1
                        for j in range(offsets[v], offsets[v + 1]):
                            w = targets[j]
                            if stamp[w] == cur:
                                continue
                            stamp[w] = cur
                            if _bern(seed, st, t_keep, l_keep):
                                out_vert[s, k] = w
                                out_col[s, k] = 1 + _uniform(seed, st, q)
                                queue[k] = w
                                k += 1
                            else:
                                bnd += 1
                if k == 0:
                    if unrooted or f_empty == 0:
                        if st[3] != np.uint64(0):
                            return -1
                        continue
                expo = (delta - 2) * k + 2 - bnd
                if expo < 0:
                    return -2
                ok = True
                for _ in range(expo):
                    if not _bern(seed, st, t_stop, l_stop):
                        ok = False
                        break
                if ok and not ratio_one:
                    for _ in range(k):
                        if not _bern(seed, st, t_ratio, l_ratio):
                            ok = False
                            break
                if ok and unrooted:
                    ok = _bern_inv(seed, st, k)
                if st[3] != np.uint64(0):
                    return -1
                if ok:
                    # rejected rounds may have left entries past k
                    for j in range(k, n):
                        out_vert[s, j] = -1
                        out_col[s, j] = 0
                    out_size[s] = k
                    out_bnd[s] = bnd
                    out_it[s] = it
                    break
        return 0


def run_batch(g, params, root: int, unrooted: bool, f_empty: int, count: int, src: RandomSource):
    from .percolation import GraphletBatch, InvariantError

    offsets, targets = g.csr
    n = g.n
    t_keep, l_keep = digit_table(params.p_hat)
    t_stop, l_stop = digit_table(1 - params.p_hat)
    ratio = params.ratio
    t_ratio, l_ratio = digit_table(ratio)
    st = np.zeros(4, dtype=np.uint64)
    start = src.take_counter()
    st[0] = np.uint64(start)
    out_size = np.zeros(count, np.int64)
    out_vert = np.full((count, max(1, n)), -1, np.int64)
    out_col = np.zeros((count, max(1, n)), np.int64)
    out_bnd = np.zeros(count, np.int64)
    out_it = np.zeros(count, np.int64)
    code = _kernel(offsets, targets, n, root, unrooted, params.q, f_empty, params.delta,
                   t_keep, l_keep, t_stop, l_stop, t_ratio, l_ratio, ratio == 1,
                   np.uint64(src.seed), st, count, out_size, out_vert, out_col, out_bnd, out_it)
    end = int(st[0])
    src.set_counter(end, end - start)
    if code == -1:
        raise RuntimeError("exact expansion exhausted (probability below 2^-2048); rerun with another seed")
    if code == -2:
        raise InvariantError("negative rejection-filter exponent")
    return GraphletBatch(out_size, out_vert, out_col, out_bnd, out_it)


# ---------------------------------------------------------------------------
# compiled CFTP for small hosts
#
# Polymers are bitmasks (n <= 32) with colours packed two bits per vertex.
# The acceptance probability of an explored polymer depends only on a feature
# key (size, boundary size, model count x); the caller precomputes exact digit
# tables for every key reachable on the host.  The bounding chain mirrors the
# reference implementation step for step; explicit D-polymers are kept in a
# flat list, which is cheap at this size.

CFTP_MAX_N = 32
CFTP_MAX_Q = 4


def digit_table_computable(p, bits: int = 32 * DIGITS + 16):
    """Digit table of a ComputableProb, refined until its first DIGITS digits are certain."""
    while True:
        lo, hi = p.refine(bits)
        if lo == hi:
            return digit_table(lo)
        t_lo, _ = digit_table(lo)
        t_hi, _ = digit_table(min(hi, Fraction(1)))
        if hi <= 1 and np.array_equal(t_lo, t_hi):
            return t_lo, DIGITS + 1
        if bits > 32 * DIGITS * 4:
            raise RuntimeError("could not certify the binary expansion of an acceptance probability")
        bits *= 2


if _HAVE_NUMBA:

    @njit(cache=True, inline="always")
    def _popcount(x):
        c = 0
        while x != np.uint64(0):
            x &= x - np.uint64(1)
            c += 1
        return c

    @njit(cache=True, inline="always")
    def _lowbit_index(x):
        i = 0
        while (x >> np.uint64(i)) & np.uint64(1) == np.uint64(0):
            i += 1
        return i

    @njit(cache=True)
    def _cftp_kernel(n, q, offsets, targets, nbmask, mode, lmask,
                     t_s, l_s, t_del, l_del, t_keep, l_keep,
                     slot_of, acc_tab, acc_len, dim_b, dim_x,
                     seed, st, count, max_steps, cap,
                     out_np, out_mask, out_col, out_steps, out_rounds):
        one = np.uint64(1)
        full = (one << np.uint64(n)) - one if n < 64 else ~np.uint64(0)
        mv_v = np.zeros(cap, np.int64)
        mv_del = np.zeros(cap, np.bool_)
        mv_mask = np.zeros(cap, np.uint64)
        mv_col = np.zeros(cap, np.uint64)
        mv_nb = np.zeros(cap, np.uint64)
        blk_start = np.zeros(64, np.int64)
        blk_end = np.zeros(64, np.int64)
        stamp = np.zeros(n, np.int64)
        cur = 0
        queue = np.zeros(n, np.int64)
        vcol = np.zeros(n, np.int64)
        bown = np.full(n, -1, np.int64)
        dbar = np.zeros(n, np.int64)
        recs = np.zeros(cap, np.int64)
        for s in range(count):
            nmoves = 0
            made = 0
            steps = 0
            k = 1
            while True:
                while made < k:
                    b = made + 1
                    length = 2 if b == 1 else (1 << (b - 1))
                    blk_start[b] = nmoves
                    for _t in range(length):
                        if not _bern(seed, st, t_s, l_s):
                            continue
                        v = _uniform(seed, st, n)
                        if _bern(seed, st, t_del, l_del):
                            if nmoves >= cap:
                                return -4
                            mv_v[nmoves] = v
                            mv_del[nmoves] = True
                            nmoves += 1
                            continue
                        # insert branch with a kept root
                        cur += 1
                        stamp[v] = cur
                        vcol[v] = 1 + _uniform(seed, st, q)
                        queue[0] = v
                        kk = 1
                        head = 0
                        bnd = 0
                        mask = one << np.uint64(v)
                        while head < kk:
                            u = queue[head]
                            head += 1
                            for j in range(offsets[u], offsets[u + 1]):
                                w = targets[j]
                                if stamp[w] == cur:
                                    continue
                                stamp[w] = cur
                                if _bern(seed, st, t_keep, l_keep):
                                    vcol[w] = 1 + _uniform(seed, st, q)
                                    queue[kk] = w
                                    kk += 1
                                    mask |= one << np.uint64(w)
                                else:
                                    bnd += 1
                        x = 0
                        if mode == 1:
                            acc = np.uint64(0)
                            for i in range(kk):
                                acc |= lmask[queue[i]]
                            x = _popcount(acc)
                        elif mode == 2:
                            for i in range(kk):
                                u = queue[i]
                                for j in range(offsets[u], offsets[u + 1]):
                                    w = targets[j]
                                    if (mask >> np.uint64(w)) & one == np.uint64(0):
                                        x += 1
                                    elif u < w and vcol[u] != vcol[w]:
                                        x += 1
                        if bnd >= dim_b or x >= dim_x:
                            return -3
                        slot = slot_of[(kk * dim_b + bnd) * dim_x + x]
                        if slot < 0:
                            return -3
                        if not _bern(seed, st, acc_tab[slot], acc_len[slot]):
                            continue
                        if nmoves >= cap:
                            return -4
                        col = np.uint64(0)
                        nb = np.uint64(0)
                        for i in range(kk):
                            u = queue[i]
                            col |= np.uint64(vcol[u] - 1) << np.uint64(2 * u)
                            nb |= nbmask[u]
                        mv_v[nmoves] = v
                        mv_del[nmoves] = False
                        mv_mask[nmoves] = mask
                        mv_col[nmoves] = col
                        mv_nb[nmoves] = nb
                        nmoves += 1
                    blk_end[b] = nmoves
                    made += 1
                if st[3] != np.uint64(0):
                    return -1
                horizon = 1 << k
                if steps + horizon > max_steps:
                    return -5
                # fresh bounding state: B empty, D everything
                dstar = full
                bunion = np.uint64(0)
                dany = np.uint64(0)
                nrec = 0
                for u in range(n):
                    bown[u] = -1
                    dbar[u] = 0
                for bk in range(k, 0, -1):
                    for idx in range(blk_start[bk], blk_end[bk]):
                        v = mv_v[idx]
                        if mv_del[idx]:
                            bid = bown[v]
                            if bid >= 0:
                                m = mv_mask[bid]
                                bunion &= ~m
                                for u in range(n):
                                    if (m >> np.uint64(u)) & one:
                                        bown[u] = -1
                            dstar &= ~(one << np.uint64(v))
                            if dbar[v] > 0:
                                r = 0
                                while r < nrec:
                                    rid = recs[r]
                                    m = mv_mask[rid]
                                    if (m >> np.uint64(v)) & one:
                                        for u in range(n):
                                            if (m >> np.uint64(u)) & one:
                                                dbar[u] -= 1
                                                if dbar[u] == 0:
                                                    dany &= ~(one << np.uint64(u))
                                        nrec -= 1
                                        recs[r] = recs[nrec]
                                    else:
                                        r += 1
                            continue
                        m = mv_mask[idx]
                        nb = mv_nb[idx]
                        if bunion & nb:
                            continue
                        to_b = False
                        if dstar & nb == np.uint64(0):
                            ring = nb & ~m
                            if dany & ring == np.uint64(0):
                                if dany & m == np.uint64(0):
                                    to_b = True
                                else:
                                    singles = True
                                    for u in range(n):
                                        if (m >> np.uint64(u)) & one and dbar[u] != 1:
                                            singles = False
                                            break
                                    if singles:
                                        low = _lowbit_index(m)
                                        for r in range(nrec):
                                            rid = recs[r]
                                            if (mv_mask[rid] >> np.uint64(low)) & one:
                                                if mv_mask[rid] == m and mv_col[rid] == mv_col[idx]:
                                                    for u in range(n):
                                                        if (m >> np.uint64(u)) & one:
                                                            dbar[u] -= 1
                                                            dany &= ~(one << np.uint64(u))
                                                    nrec -= 1
                                                    recs[r] = recs[nrec]
                                                    to_b = True
                                                break
                        if to_b:
                            bunion |= m
                            for u in range(n):
                                if (m >> np.uint64(u)) & one:
                                    bown[u] = idx
                        else:
                            for u in range(n):
                                if (m >> np.uint64(u)) & one:
                                    dbar[u] += 1
                                    dany |= one << np.uint64(u)
                            recs[nrec] = idx
                            nrec += 1
                steps += horizon
                if dstar == np.uint64(0) and nrec == 0:
                    c = 0
                    for u in range(n):
                        bid = bown[u]
                        if bid >= 0 and _lowbit_index(mv_mask[bid]) == u:
                            out_mask[s, c] = mv_mask[bid]
                            out_col[s, c] = mv_col[bid]
                            c += 1
                    out_np[s] = c
                    out_steps[s] = steps
                    out_rounds[s] = k
                    break
                k += 1
        return 0
