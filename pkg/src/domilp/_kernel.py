"""numba transcription of the reference search in :mod:`domilp.vecdom`.

Keep the two in lockstep: same pivot, same stable partitions, same case
order, same counters.  ``tests/test_engines.py`` compares them directly.

Coordinates arrive column-major (``at[k, row]``) so a node reads its split
coordinate from one contiguous column.
"""
import numpy as np
from numba import njit
from numba.extending import overload
from numba.np.numpy_support import as_dtype

# stats slots
_NODES, _BALANCED, _UNBALANCED, _GUARD, _PAIRS, _DEPTH = range(6)
_BLOCK = 64
_CHUNK = 16  # B coordinates gathered per pass in a leaf


@njit(cache=True)
def _weighted_median(vals, wts, total):
    # in-place three-way quickselect; smallest value with 2*cum_weight >= total
    lo = 0
    hi = vals.shape[0]
    below = 0
    seed = np.uint64(0x9E3779B97F4A7C15) ^ np.uint64(hi)
    while True:
        seed ^= seed << np.uint64(13)
        seed ^= seed >> np.uint64(7)
        seed ^= seed << np.uint64(17)
        pv = vals[lo + np.int64(seed % np.uint64(hi - lo))]
        lt = lo
        i = lo
        gt = hi
        lower_w = 0
        equal_w = 0
        while i < gt:
            v = vals[i]
            if v < pv:
                vals[i], vals[lt] = vals[lt], vals[i]
                wts[i], wts[lt] = wts[lt], wts[i]
                lower_w += wts[lt]
                lt += 1
                i += 1
            elif v > pv:
                gt -= 1
                vals[i], vals[gt] = vals[gt], vals[i]
                wts[i], wts[gt] = wts[gt], wts[i]
            else:
                equal_w += wts[i]
                i += 1
        if 2 * (below + lower_w) >= total:
            hi = lt
        elif 2 * (below + lower_w + equal_w) >= total:
            return pv
        else:
            below += lower_w + equal_w
            lo = gt


@njit(cache=True)
def _counting_median(fa, fb, lo_v, span):
    # Same pivot as _weighted_median, by histogram.  Also returns the counts
    # of A below, A equal, B below, B equal to the pivot.
    na = fa.shape[0]
    nb = fb.shape[0]
    hist_a = np.zeros(span, np.int64)
    hist_b = np.zeros(span, np.int64)
    for i in range(na):
        hist_a[fa[i] - lo_v] += 1
    for j in range(nb):
        hist_b[fb[j] - lo_v] += 1
    cum = 0
    lt_a = 0
    lt_b = 0
    for k in range(span):
        cum += nb * hist_a[k] + na * hist_b[k]
        if 2 * cum >= 2 * na * nb:
            return lo_v + k, lt_a, hist_a[k], lt_b, hist_b[k]
        lt_a += hist_a[k]
        lt_b += hist_b[k]
    return lo_v, 0, 0, 0, 0  # unreachable: cum reaches the total


def _like(x, ref):
    """``x`` converted to the type of ``ref`` (compiled code only)."""
    raise NotImplementedError


@overload(_like)
def _ol_like(x, ref):
    cast = as_dtype(ref).type
    return lambda x, ref: cast(x)


@njit(cache=True)
def _brute(ar, br, a_rows, b_rows, off, st, out):
    # Pairs in (A row, B row) order like the reference.  For one A row and a
    # block of B rows, worst[k] tracks max_c (b_c - a_c) over the coordinates
    # seen so far; the pair dominates iff it ends <= 0.  Coordinates are at
    # most half the dtype range (see layout_dtype), so differences fit.
    # ar/br are the row-major copies: leaf reads are per row.
    dd = ar.shape[1] - off
    na = a_rows.shape[0]
    nb = b_rows.shape[0]
    nblk = (nb + _BLOCK - 1) // _BLOCK
    # B restricted to this leaf as [block, coordinate, lane], filled on demand.
    # Plain scalar indexing here; views in the pass loop cost refcounting.
    cols = np.empty((nblk, dd, _BLOCK), br.dtype)
    ready = 0
    worst = np.empty(_BLOCK, br.dtype)
    floor = _like(np.iinfo(br.dtype).min, br[0, 0])
    ceil = _like(np.iinfo(br.dtype).max, br[0, 0])
    for i in range(na):
        ra = a_rows[i]
        for blk in range(nblk):
            w = min(_BLOCK, nb - blk * _BLOCK)
            for k in range(_BLOCK):
                worst[k] = floor
            best = floor
            for c in range(dd):
                if c == ready:
                    top = min(ready + _CHUNK, dd)
                    for j in range(nb):
                        rb = b_rows[j]
                        q = j // _BLOCK
                        r = j - q * _BLOCK
                        for cc in range(ready, top):
                            cols[q, cc, r] = br[rb, off + cc]
                    ready = top
                uc = ar[ra, off + c]
                best = ceil
                for k in range(w):
                    x = max(worst[k], _like(cols[blk, c, k] - uc, uc))
                    worst[k] = x
                    best = min(best, x)
                if best > 0:
                    break
            if best <= 0:
                for k in range(w):
                    if worst[k] <= 0:
                        st[_PAIRS] += i * nb + blk * _BLOCK + k + 1
                        out[0] = ra
                        out[1] = b_rows[blk * _BLOCK + k]
                        return True
    st[_PAIRS] += na * nb
    return False


@njit(cache=True)
def _localize(rm, rows, off):
    # rows of the row-major rm from coordinate off on, as a compact row-major block
    m = np.empty((rows.shape[0], rm.shape[1] - off), rm.dtype)
    for i in range(rows.shape[0]):
        src = rm[rows[i]]
        for c in range(m.shape[1]):
            m[i, c] = src[off + c]
    return m


@njit(cache=True)
def _search(at, bt, ar, br, a_rows, b_rows, off, t, depth, p, q, cutoff, noise_ties, local, st, out):
    # at/bt: column-major coordinates for the splits, ar/br: row-major for leaves
    na = a_rows.shape[0]
    nb = b_rows.shape[0]
    if local > 0 and na > 0 and nb > 0 and off < at.shape[0] and na + nb <= local:
        # Small enough to copy: the subtree then runs on cache-resident data.
        # Same rows in the same order, so the search itself is unchanged.
        ar2 = _localize(ar, a_rows, off)
        br2 = _localize(br, b_rows, off)
        at2 = np.ascontiguousarray(ar2.T)
        bt2 = np.ascontiguousarray(br2.T)
        # off and local passed as variables: a literal 0 would make numba
        # compile a second specialization, which breaks cached recursion
        zero = off - off
        if _search(
            at2, bt2, ar2, br2, np.arange(na), np.arange(nb), zero, t, depth, p, q, cutoff, noise_ties, zero, st, out
        ):
            out[0] = a_rows[out[0]]
            out[1] = b_rows[out[1]]
            return True
        return False
    st[_NODES] += 1
    if depth > st[_DEPTH]:
        st[_DEPTH] = depth
    if na == 0 or nb == 0:
        return False
    if off == at.shape[0]:
        out[0] = a_rows[0]
        out[1] = b_rows[0]
        return True
    if t == 0 or na * nb <= cutoff:
        return _brute(ar, br, a_rows, b_rows, off, st, out)

    col_a = at[off]
    col_b = bt[off]
    fa = np.empty(na, np.int64)
    fb = np.empty(nb, np.int64)
    lo_v = col_a[a_rows[0]]
    hi_v = lo_v
    for i in range(na):
        v = col_a[a_rows[i]]
        fa[i] = v
        lo_v = min(lo_v, v)
        hi_v = max(hi_v, v)
    for j in range(nb):
        v = col_b[b_rows[j]]
        fb[j] = v
        lo_v = min(lo_v, v)
        hi_v = max(hi_v, v)

    span = np.int64(hi_v) - np.int64(lo_v) + 1
    if span <= 2 * (na + nb):
        pivot, lt_a, eq_a, lt_b, eq_b = _counting_median(fa, fb, lo_v, span)
    else:
        vals = np.empty(na + nb, np.int64)
        wts = np.empty(na + nb, np.int64)
        vals[:na] = fa
        vals[na:] = fb
        wts[:na] = nb
        wts[na:] = na
        pivot = _weighted_median(vals, wts, 2 * na * nb)
        lt_a = 0
        eq_a = 0
        for i in range(na):
            if fa[i] < pivot:
                lt_a += 1
            elif fa[i] == pivot:
                eq_a += 1
        lt_b = 0
        eq_b = 0
        for j in range(nb):
            if fb[j] < pivot:
                lt_b += 1
            elif fb[j] == pivot:
                eq_b += 1

    # ties: the first `move` A-ties join A-, the first `keep_low` B-ties stay in B-
    move = 0
    keep_low = eq_b
    if noise_ties:
        half = na * nb
        below = nb * lt_a + na * lt_b
        if below + na * eq_b >= half:
            keep_low = (half - below + na - 1) // na
        else:
            move = (half - below - na * eq_b + nb - 1) // nb
    n_am = lt_a + move
    n_bp = nb - lt_b - keep_low

    if n_am == 0 and n_bp == nb:
        st[_GUARD] += 1
        keep = np.empty(na, a_rows.dtype)
        m = 0
        for i in range(na):
            if fa[i] != pivot:
                keep[m] = a_rows[i]
                m += 1
        return _search(at, bt, ar, br, keep[:m], b_rows, off, t, depth + 1, p, q, cutoff, noise_ties, local, st, out)
    if n_am == na and n_bp == 0:
        st[_GUARD] += 1
        keep = np.empty(nb, b_rows.dtype)
        m = 0
        for j in range(nb):
            if fb[j] != pivot:
                keep[m] = b_rows[j]
                m += 1
        return _search(at, bt, ar, br, a_rows, keep[:m], off, t, depth + 1, p, q, cutoff, noise_ties, local, st, out)

    if n_am * q >= p * na and n_bp * q >= p * nb:
        st[_BALANCED] += 1
        t -= 1
    else:
        st[_UNBALANCED] += 1

    a_hi = np.empty(na - n_am, a_rows.dtype)
    a_lo = np.empty(n_am, a_rows.dtype)
    x = 0
    y = 0
    ties = 0
    for i in range(na):
        low = fa[i] < pivot
        if fa[i] == pivot:
            low = ties < move
            ties += 1
        if low:
            a_lo[y] = a_rows[i]
            y += 1
        else:
            a_hi[x] = a_rows[i]
            x += 1
    b_hi = np.empty(n_bp, b_rows.dtype)
    b_lo = np.empty(nb - n_bp, b_rows.dtype)
    x = 0
    y = 0
    ties = 0
    for j in range(nb):
        high = fb[j] > pivot
        if fb[j] == pivot:
            high = ties >= keep_low
            ties += 1
        if high:
            b_hi[x] = b_rows[j]
            x += 1
        else:
            b_lo[y] = b_rows[j]
            y += 1

    if _search(at, bt, ar, br, a_hi, b_hi, off, t, depth + 1, p, q, cutoff, noise_ties, local, st, out):
        return True
    if _search(at, bt, ar, br, a_lo, b_lo, off, t, depth + 1, p, q, cutoff, noise_ties, local, st, out):
        return True
    return _search(at, bt, ar, br, a_hi, b_lo, off + 1, t, depth + 1, p, q, cutoff, noise_ties, local, st, out)


_DTYPES = (np.int16, np.int32, np.int64)
LOCAL_ROWS = 32768  # subtrees at most this many vectors run on a compact copy


def layout_dtype(ca, cb):
    """Narrowest signed dtype, no narrower than the inputs, holding every
    coordinate within half its range; None if even int64 cannot."""
    lo, hi = 0, 0
    for c in (ca, cb):
        if c.size:
            lo = min(lo, int(c.min()))
            hi = max(hi, int(c.max()))
    bound = max(-lo, hi)
    width = max(ca.dtype.itemsize, cb.dtype.itemsize) if ca.dtype.kind == cb.dtype.kind == "i" else 8
    for dt in _DTYPES:
        if np.dtype(dt).itemsize >= width and bound <= np.iinfo(dt).max // 2:
            return np.dtype(dt)
    return None


def search(ca, cb, params, stats, dtype=None, local_rows=LOCAL_ROWS, rows_a=None, rows_b=None):
    """Run the compiled search on coordinate arrays ``ca``/``cb`` (one row per vector).

    Fills ``stats`` and returns ``(row_a, row_b)`` or None.  The kernel wants
    each set in both layouts; ``ca``/``cb`` in Fortran order and row-major
    twins ``rows_a``/``rows_b`` of the right dtype are used without copying.
    ``local_rows`` sets the subtree size that gets its own compact copy
    (0 disables it).
    """
    from .vecdom import _epsilon_bound

    if dtype is None:
        dtype = layout_dtype(ca, cb)
        if dtype is None:
            raise ValueError("coordinates too large for the compiled engine")
    at = np.ascontiguousarray(ca.T, dtype=dtype)
    bt = np.ascontiguousarray(cb.T, dtype=dtype)
    ar = np.ascontiguousarray(ca if rows_a is None else rows_a, dtype=dtype)
    br = np.ascontiguousarray(cb if rows_b is None else rows_b, dtype=dtype)
    p, q = _epsilon_bound(params.epsilon, max(ca.shape[0], cb.shape[0], 1))
    st = np.zeros(6, np.int64)
    out = np.full(2, -1, np.int64)
    found = _search(
        at,
        bt,
        ar,
        br,
        np.arange(ca.shape[0], dtype=np.int64),
        np.arange(cb.shape[0], dtype=np.int64),
        0,
        params.t_initial,
        0,
        p,
        q,
        params.brute_pair_cutoff,
        params.tie_rule == "noise",
        max(0, local_rows),
        st,
        out,
    )
    stats.nodes_visited = int(st[_NODES])
    stats.balanced_nodes = int(st[_BALANCED])
    stats.unbalanced_nodes = int(st[_UNBALANCED])
    stats.guard_activations = int(st[_GUARD])
    stats.brute_leaf_pairs_examined = int(st[_PAIRS])
    stats.max_depth = int(st[_DEPTH])
    if not found:
        return None
    return int(out[0]), int(out[1])
