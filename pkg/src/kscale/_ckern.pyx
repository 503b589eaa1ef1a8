# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled implementations of the hot kernels.

Operation-for-operation mirror of ``_pykern``: identical splitmix64
streams, identical stable ordering and identical floating-point operation
order, so both backends produce bit-identical trees, predictions and
attributions.
"""

import numpy as np

cimport numpy as cnp
from libc.stdint cimport int32_t, int64_t, uint64_t
from libc.stdlib cimport free, malloc

cnp.import_array()

NAME = "compiled"

cdef uint64_t GAMMA = 0x9E3779B97F4A7C15ULL
cdef uint64_t MIX1 = 0xBF58476D1CE4E5B9ULL
cdef uint64_t MIX2 = 0x94D049BB133111EBULL

DEF STACK_MARGIN = 4


cdef inline uint64_t _mix64(uint64_t z) nogil:
    z = (z ^ (z >> 30)) * MIX1
    z = (z ^ (z >> 27)) * MIX2
    return z ^ (z >> 31)


cdef inline uint64_t _draw(uint64_t seed, uint64_t counter) nogil:
    return _mix64(seed + counter * GAMMA)


cdef void _merge_sort(const double* vals, int64_t* order, int64_t* buf, int n) noexcept nogil:
    """Stable mergesort of ``order`` by ``vals[order[i]]``."""
    cdef int width = 1
    cdef int lo, mid, hi, i, j, k
    cdef int64_t* src = order
    cdef int64_t* dst = buf
    cdef int64_t* swp
    while width < n:
        lo = 0
        while lo < n:
            mid = lo + width
            if mid > n:
                mid = n
            hi = lo + 2 * width
            if hi > n:
                hi = n
            i = lo
            j = mid
            k = lo
            while i < mid and j < hi:
                if vals[src[j]] < vals[src[i]]:
                    dst[k] = src[j]
                    j += 1
                else:
                    dst[k] = src[i]
                    i += 1
                k += 1
            while i < mid:
                dst[k] = src[i]
                i += 1
                k += 1
            while j < hi:
                dst[k] = src[j]
                j += 1
                k += 1
            lo = hi
        swp = src
        src = dst
        dst = swp
        width *= 2
    if src != order:
        for i in range(n):
            order[i] = src[i]


def build_tree(const double[:, ::1] X, const double[::1] y, const int64_t[::1] idx,
               int mtry, int min_leaf, long max_depth,
               unsigned long long seed, unsigned long long counter0=0):
    """Grow one CART regression tree; see the fallback for the contract."""
    cdef int64_t m = idx.shape[0]
    if m == 0:
        raise ValueError("cannot grow a tree on zero rows")
    cdef int p = X.shape[1]
    cdef uint64_t counter = counter0

    cdef int64_t cap = 2 * m + 1
    feature_arr = np.full(cap, -1, dtype=np.int32)
    threshold_arr = np.zeros(cap, dtype=np.float64)
    left_arr = np.full(cap, -1, dtype=np.int32)
    right_arr = np.full(cap, -1, dtype=np.int32)
    value_arr = np.zeros(cap, dtype=np.float64)
    cover_arr = np.zeros(cap, dtype=np.int64)
    cdef int32_t[::1] feature = feature_arr
    cdef double[::1] threshold = threshold_arr
    cdef int32_t[::1] left = left_arr
    cdef int32_t[::1] right = right_arr
    cdef double[::1] value = value_arr
    cdef int64_t[::1] cover = cover_arr

    work_arr = np.array(idx, dtype=np.int64)
    cdef int64_t[::1] work = work_arr
    scratch = np.empty(m, dtype=np.int64)
    cdef int64_t[::1] part = scratch
    order_arr = np.empty(m, dtype=np.int64)
    cdef int64_t[::1] order = order_arr
    mbuf_arr = np.empty(m, dtype=np.int64)
    cdef int64_t[::1] mbuf = mbuf_arr
    vals_arr = np.empty(m, dtype=np.float64)
    cdef double[::1] vals = vals_arr
    yv_arr = np.empty(m, dtype=np.float64)
    cdef double[::1] yv = yv_arr
    cy_arr = np.empty(m, dtype=np.float64)
    cdef double[::1] cy = cy_arr
    cy2_arr = np.empty(m, dtype=np.float64)
    cdef double[::1] cy2 = cy2_arr
    pool_arr = np.empty(p, dtype=np.int32)
    cdef int32_t[::1] pool = pool_arr

    cdef int64_t stack_cap = 2 * m + STACK_MARGIN
    slo_arr = np.empty(stack_cap, dtype=np.int64)
    shi_arr = np.empty(stack_cap, dtype=np.int64)
    sdepth_arr = np.empty(stack_cap, dtype=np.int64)
    sparent_arr = np.empty(stack_cap, dtype=np.int64)
    sleft_arr = np.empty(stack_cap, dtype=np.int64)
    cdef int64_t[::1] slo = slo_arr
    cdef int64_t[::1] shi = shi_arr
    cdef int64_t[::1] sdepth = sdepth_arr
    cdef int64_t[::1] sparent = sparent_arr
    cdef int64_t[::1] sleft = sleft_arr

    cdef int64_t sp = 0
    slo[0] = 0
    shi[0] = m
    sdepth[0] = 0
    sparent[0] = -1
    sleft[0] = 0
    sp = 1

    cdef int64_t lo, hi, n, nid, parent, k, j64, nl_count, w
    cdef long depth
    cdef int is_left, f, ci, i, best_f, swap
    cdef int64_t pos, best_pos, cand_n, jdraw
    cdef double ymin, ymax, acc, acc2, tot, tot2
    cdef double sl, sl2, sr, sr2, cost, best_cost, a, b, thr, best_thr
    cdef double inf = np.inf
    cdef int64_t n_nodes = 0

    with nogil:
        while sp > 0:
            sp -= 1
            lo = slo[sp]
            hi = shi[sp]
            depth = <long>sdepth[sp]
            parent = sparent[sp]
            is_left = <int>sleft[sp]
            n = hi - lo
            nid = n_nodes
            n_nodes += 1
            cover[nid] = n
            if parent >= 0:
                if is_left:
                    left[parent] = <int32_t>nid
                else:
                    right[parent] = <int32_t>nid

            ymin = y[work[lo]]
            ymax = ymin
            for k in range(lo, hi):
                yv[k - lo] = y[work[k]]
                if yv[k - lo] < ymin:
                    ymin = yv[k - lo]
                if yv[k - lo] > ymax:
                    ymax = yv[k - lo]

            if n < 2 * min_leaf or depth >= max_depth or ymin == ymax:
                acc = 0.0
                for k in range(n):
                    acc += yv[k]
                value[nid] = acc / n
                continue

            # sample mtry distinct features (partial Fisher-Yates), ascending
            for i in range(p):
                pool[i] = i
            for i in range(mtry):
                counter += 1
                jdraw = <int64_t>(_draw(seed, counter) % <uint64_t>(p - i))
                swap = pool[i]
                pool[i] = pool[i + jdraw]
                pool[i + jdraw] = swap
            for i in range(1, mtry):  # insertion sort of the sample
                swap = pool[i]
                j64 = i - 1
                while j64 >= 0 and pool[j64] > swap:
                    pool[j64 + 1] = pool[j64]
                    j64 -= 1
                pool[j64 + 1] = swap

            best_cost = inf
            best_f = -1
            best_pos = -1
            best_thr = 0.0
            for ci in range(mtry):
                f = pool[ci]
                for k in range(n):
                    vals[k] = X[work[lo + k], f]
                    order[k] = k
                _merge_sort(&vals[0], &order[0], &mbuf[0], <int>n)
                if vals[order[0]] == vals[order[n - 1]]:
                    continue
                acc = 0.0
                acc2 = 0.0
                for k in range(n):
                    acc += yv[order[k]]
                    acc2 += yv[order[k]] * yv[order[k]]
                    cy[k] = acc
                    cy2[k] = acc2
                tot = cy[n - 1]
                tot2 = cy2[n - 1]
                for pos in range(min_leaf - 1, n - min_leaf):
                    if vals[order[pos]] == vals[order[pos + 1]]:
                        continue
                    sl = cy[pos]
                    sl2 = cy2[pos]
                    sr = tot - sl
                    cost = (sl2 - sl * sl / (pos + 1)) + ((tot2 - sl2) - sr * sr / (n - 1 - pos))
                    if cost < best_cost:
                        best_cost = cost
                        best_f = f
                        best_pos = pos
                        a = vals[order[pos]]
                        b = vals[order[pos + 1]]
                        thr = 0.5 * (a + b)
                        if thr >= b:
                            thr = a
                        best_thr = thr

            if best_f < 0:
                acc = 0.0
                for k in range(n):
                    acc += yv[k]
                value[nid] = acc / n
                continue

            feature[nid] = best_f
            threshold[nid] = best_thr

            # stable partition of work[lo:hi] by x <= thr
            nl_count = 0
            w = 0
            for k in range(lo, hi):
                if X[work[k], best_f] <= best_thr:
                    part[nl_count] = work[k]
                    nl_count += 1
                else:
                    part[n - 1 - w] = work[k]  # reversed tail, fixed below
                    w += 1
            for k in range(nl_count):
                work[lo + k] = part[k]
            for k in range(w):
                work[lo + nl_count + k] = part[n - 1 - k]

            slo[sp] = lo + nl_count
            shi[sp] = hi
            sdepth[sp] = depth + 1
            sparent[sp] = nid
            sleft[sp] = 0
            sp += 1
            slo[sp] = lo
            shi[sp] = lo + nl_count
            sdepth[sp] = depth + 1
            sparent[sp] = nid
            sleft[sp] = 1
            sp += 1

    return (
        feature_arr[:n_nodes].copy(),
        threshold_arr[:n_nodes].copy(),
        left_arr[:n_nodes].copy(),
        right_arr[:n_nodes].copy(),
        value_arr[:n_nodes].copy(),
        cover_arr[:n_nodes].copy(),
        int(counter - counter0),
    )


def predict_tree(const int32_t[::1] feature, const double[::1] threshold,
                 const int32_t[::1] left, const int32_t[::1] right, const double[::1] value,
                 const double[:, ::1] X):
    """Leaf value reached by each row of ``X``."""
    cdef int64_t n = X.shape[0]
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef int64_t r
    cdef int nd
    with nogil:
        for r in range(n):
            nd = 0
            while feature[nd] >= 0:
                if X[r, feature[nd]] <= threshold[nd]:
                    nd = left[nd]
                else:
                    nd = right[nd]
            out[r] = value[nd]
    return out_arr


cdef struct ShapFrame:
    int node
    int state  # 0: enter, 1: left done, 2: right done


def tree_shap(const int32_t[::1] feature, const double[::1] threshold,
              const int32_t[::1] left, const int32_t[::1] right, const double[::1] value,
              const int64_t[::1] cover, const double[:, ::1] X, int n_features):
    """Shapley values of the cover-weighted tree expectation for all rows.

    Same per-leaf subset-size-polynomial construction as the fallback; the
    row loop is innermost so each row sees exactly the fallback's scalar
    arithmetic.
    """
    cdef int64_t n_rows = X.shape[0]
    cdef int n_nodes = feature.shape[0]
    phi_arr = np.zeros((n_rows, n_features), dtype=np.float64)
    cdef double[:, ::1] phi = phi_arr

    # maximum path length = tree depth + 1
    cdef int max_path = _tree_depth(feature, left, right) + 1

    cdef int64_t r
    cdef int sp, node, state, plen, t, i, k, mm, f
    cdef double frac, leaf_value, b, aa, s, quot, contrib

    frames = <ShapFrame*>malloc(max_path * sizeof(ShapFrame) * 2)
    pfeat = <int*>malloc(max_path * sizeof(int))
    pfrac = <double*>malloc(max_path * sizeof(double))
    pmatch = <unsigned char*>malloc(max_path * sizeof(unsigned char))
    cfeat = <int*>malloc(max_path * sizeof(int))
    cb = <double*>malloc(max_path * sizeof(double))
    ca = <unsigned char*>malloc(max_path * sizeof(unsigned char))
    poly = <double*>malloc((max_path + 1) * sizeof(double))
    nxt = <double*>malloc((max_path + 1) * sizeof(double))
    down = <double*>malloc((max_path + 1) * sizeof(double))
    weights = <double*>malloc((max_path + 1) * sizeof(double))
    comb = <double*>malloc((max_path + 1) * sizeof(double))
    if (frames == NULL or pfeat == NULL or pfrac == NULL or pmatch == NULL
            or cfeat == NULL or cb == NULL or ca == NULL or poly == NULL
            or nxt == NULL or down == NULL or weights == NULL or comb == NULL):
        free(frames); free(pfeat); free(pfrac); free(pmatch)
        free(cfeat); free(cb); free(ca); free(poly)
        free(nxt); free(down); free(weights); free(comb)
        raise MemoryError()

    try:
        with nogil:
            for r in range(n_rows):
                sp = 0
                frames[0].node = 0
                frames[0].state = 0
                plen = 0
                while sp >= 0:
                    node = frames[sp].node
                    state = frames[sp].state
                    f = feature[node]
                    if f < 0:
                        # leaf: collapse path, then per-feature contributions
                        leaf_value = value[node]
                        sp -= 1
                        if plen == 0:
                            continue
                        t = 0
                        for i in range(plen):
                            k = -1
                            for mm in range(t):
                                if cfeat[mm] == pfeat[i]:
                                    k = mm
                                    break
                            if k >= 0:
                                cb[k] = cb[k] * pfrac[i]
                                ca[k] = ca[k] & pmatch[i]
                            else:
                                cfeat[t] = pfeat[i]
                                cb[t] = pfrac[i]
                                ca[t] = pmatch[i]
                                t += 1
                        poly[0] = 1.0
                        for k in range(t):
                            aa = 1.0 if ca[k] else 0.0
                            b = cb[k]
                            nxt[0] = poly[0] * b
                            for mm in range(1, k + 1):
                                nxt[mm] = poly[mm] * b + poly[mm - 1] * aa
                            nxt[k + 1] = poly[k] * aa
                            for mm in range(k + 2):
                                poly[mm] = nxt[mm]
                        comb[0] = 1.0
                        for mm in range(1, t):
                            comb[mm] = comb[mm - 1] * (t - mm) / mm
                        for mm in range(t):
                            weights[mm] = 1.0 / (t * comb[mm])
                        for k in range(t):
                            aa = 1.0 if ca[k] else 0.0
                            b = cb[k]
                            s = 0.0
                            if ca[k]:
                                down[t - 1] = poly[t]
                                for mm in range(t - 1, 0, -1):
                                    down[mm - 1] = poly[mm] - b * down[mm]
                                for mm in range(t):
                                    s += weights[mm] * down[mm]
                            else:
                                for mm in range(t):
                                    quot = poly[mm] / b
                                    s += weights[mm] * quot
                            contrib = (aa - b) * s
                            phi[r, cfeat[k]] += leaf_value * contrib
                        continue
                    if state == 0:
                        frames[sp].state = 1
                        pfeat[plen] = f
                        pfrac[plen] = (<double>cover[left[node]]) / (<double>cover[node])
                        pmatch[plen] = 1 if X[r, f] <= threshold[node] else 0
                        plen += 1
                        sp += 1
                        frames[sp].node = left[node]
                        frames[sp].state = 0
                    elif state == 1:
                        plen -= 1  # drop the left-branch path entry
                        frames[sp].state = 2
                        pfeat[plen] = f
                        pfrac[plen] = (<double>cover[right[node]]) / (<double>cover[node])
                        pmatch[plen] = 0 if X[r, f] <= threshold[node] else 1
                        plen += 1
                        sp += 1
                        frames[sp].node = right[node]
                        frames[sp].state = 0
                    else:
                        plen -= 1
                        sp -= 1
    finally:
        free(frames)
        free(pfeat)
        free(pfrac)
        free(pmatch)
        free(cfeat)
        free(cb)
        free(ca)
        free(poly)
        free(nxt)
        free(down)
        free(weights)
        free(comb)

    return phi_arr


cdef int _tree_depth(const int32_t[::1] feature, const int32_t[::1] left, const int32_t[::1] right):
    cdef int n = feature.shape[0]
    depth_arr = np.zeros(n, dtype=np.int32)
    cdef int32_t[::1] depth = depth_arr
    cdef int i, best = 0
    for i in range(n):  # children follow parents in preorder numbering
        if feature[i] >= 0:
            depth[left[i]] = depth[i] + 1
            depth[right[i]] = depth[i] + 1
        if depth[i] > best:
            best = depth[i]
    return best


def css_innovations(const double[::1] z, double c, const double[::1] phi,
                    const double[::1] theta, double pad):
    """Innovation recursion with mean-padded observations, zero pre-sample errors."""
    cdef int64_t n = z.shape[0]
    cdef int p = phi.shape[0]
    cdef int q = theta.shape[0]
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] e = out_arr
    cdef int64_t t
    cdef int i
    cdef double v, zlag
    with nogil:
        for t in range(n):
            v = z[t] - c
            for i in range(1, p + 1):
                zlag = z[t - i] if t - i >= 0 else pad
                v -= phi[i - 1] * zlag
            for i in range(1, q + 1):
                if t - i >= 0:
                    v -= theta[i - 1] * e[t - i]
            e[t] = v
    return out_arr
