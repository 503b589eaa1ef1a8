"""Pure-NumPy implementations of the hot kernels.

These mirror the compiled kernels in ``_ckern.pyx`` operation for
operation: same splitmix64 draws, same stable sort, same sequential
accumulation order, same tie-breaking. A model built here is bit-identical
to one built by the compiled backend.
"""

import math

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.signal import lfilter

from .rng import SplitMix64

NAME = "python"

# below this node size a plain-Python scan beats NumPy call overhead;
# both paths execute the identical operation sequence, so the choice
# never changes the result
_SMALL_NODE = 64


def build_tree(X, y, idx, mtry, min_leaf, max_depth, seed, counter0=0):
    """Grow one CART regression tree on the rows listed in ``idx``.

    Returns ``(feature, threshold, left, right, value, cover, draws_used)``
    where ``feature[i] == -1`` marks a leaf and nodes are numbered in
    preorder (parent, left subtree, right subtree).
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    idx = np.asarray(idx, dtype=np.int64)
    if idx.size == 0:
        raise ValueError("cannot grow a tree on zero rows")
    p = X.shape[1]
    rng = SplitMix64(seed)
    rng.counter = counter0

    feature, threshold, left, right, value, cover = [], [], [], [], [], []
    # stack entries: (row indices, depth, parent node id, is_left_child)
    stack = [(idx, 0, -1, False)]
    while stack:
        rows, depth, parent, is_left = stack.pop()
        nid = len(feature)
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(0.0)
        n = rows.size
        cover.append(n)
        if parent >= 0:
            if is_left:
                left[parent] = nid
            else:
                right[parent] = nid

        yv = y[rows]
        if n < 2 * min_leaf or depth >= max_depth or yv.min() == yv.max():
            value[nid] = float(np.cumsum(yv)[-1]) / n
            continue

        cand = _sample_features(rng, p, mtry)
        best_cost = math.inf
        best_f = -1
        best_pos = -1
        best_thr = 0.0
        small = n <= _SMALL_NODE
        if small:
            yl = yv.tolist()
        for f in cand:
            vals = X[rows, f]
            if small:
                vl = vals.tolist()
                order = sorted(range(n), key=vl.__getitem__)
                sv = [vl[o] for o in order]
                if sv[0] == sv[-1]:
                    continue
                acc = 0.0
                acc2 = 0.0
                cy = []
                cy2 = []
                for o in order:
                    t = yl[o]
                    acc += t
                    acc2 += t * t
                    cy.append(acc)
                    cy2.append(acc2)
                tot = cy[-1]
                tot2 = cy2[-1]
                for i in range(min_leaf - 1, n - min_leaf):
                    if sv[i] == sv[i + 1]:
                        continue
                    sl = cy[i]
                    sl2 = cy2[i]
                    sr = tot - sl
                    cost = (sl2 - sl * sl / (i + 1)) + ((tot2 - sl2) - sr * sr / (n - 1 - i))
                    if cost < best_cost:
                        best_cost = cost
                        best_f = int(f)
                        best_pos = i
                        a = sv[i]
                        b = sv[i + 1]
                        thr = 0.5 * (a + b)
                        if thr >= b:
                            thr = a
                        best_thr = thr
                continue
            order = np.argsort(vals, kind="stable")
            sv = vals[order]
            if sv[0] == sv[-1]:
                continue
            sy = yv[order]
            cy = np.cumsum(sy)
            cy2 = np.cumsum(sy * sy)
            tot = cy[-1]
            tot2 = cy2[-1]
            pos = np.arange(min_leaf - 1, n - min_leaf)
            nl = pos + 1
            nr = n - 1 - pos
            sl = cy[pos]
            sl2 = cy2[pos]
            sr = tot - sl
            cost = (sl2 - sl * sl / nl) + ((tot2 - sl2) - sr * sr / nr)
            cost[sv[pos] == sv[pos + 1]] = math.inf
            j = int(np.argmin(cost))
            if cost[j] < best_cost:
                best_cost = float(cost[j])
                best_f = int(f)
                best_pos = int(pos[j])
                a = sv[best_pos]
                b = sv[best_pos + 1]
                thr = 0.5 * (a + b)
                if thr >= b:  # midpoint rounded up to b; any value in [a, b) works
                    thr = a
                best_thr = float(thr)

        if best_f < 0:
            value[nid] = float(np.cumsum(yv)[-1]) / n
            continue

        feature[nid] = best_f
        threshold[nid] = best_thr
        mask = X[rows, best_f] <= best_thr
        # push right first so the left child is processed (and numbered) next
        stack.append((rows[~mask], depth + 1, nid, False))
        stack.append((rows[mask], depth + 1, nid, True))

    return (
        np.asarray(feature, dtype=np.int32),
        np.asarray(threshold, dtype=np.float64),
        np.asarray(left, dtype=np.int32),
        np.asarray(right, dtype=np.int32),
        np.asarray(value, dtype=np.float64),
        np.asarray(cover, dtype=np.int64),
        rng.counter - counter0,
    )


def _sample_features(rng, p, mtry):
    """mtry distinct feature ids, ascending (partial Fisher-Yates, then sort)."""
    pool = list(range(p))
    for i in range(mtry):
        j = i + rng.randbelow(p - i)
        pool[i], pool[j] = pool[j], pool[i]
    return sorted(pool[:mtry])


def predict_tree(feature, threshold, left, right, value, X):
    """Leaf value reached by each row of ``X``."""
    n = X.shape[0]
    node = np.zeros(n, dtype=np.int32)
    active = feature[node] >= 0
    while active.any():
        rows = np.nonzero(active)[0]
        nd = node[rows]
        f = feature[nd]
        go_left = X[rows, f] <= threshold[nd]
        node[rows] = np.where(go_left, left[nd], right[nd])
        active = feature[node] >= 0
    return value[node]


def tree_shap(feature, threshold, left, right, value, cover, X, n_features):
    """Shapley values of the cover-weighted tree expectation, all rows at once.

    For every leaf, the tree expectation contributes
    ``value * prod(a_f for f in S) * prod(b_f for f not in S)`` where, per
    distinct path feature, ``a_f`` is 1 iff the row satisfies every split on
    f along the path and ``b_f`` is the product of the cover fractions of
    the path branches. The Shapley value of such a product term has a
    closed form through the subset-size polynomial, built once per leaf and
    deflated per feature.
    """
    n_rows = X.shape[0]
    phi = np.zeros((n_rows, n_features))
    path = []  # (feature id, cover fraction, per-row match vector)

    def recurse(node):
        f = feature[node]
        if f < 0:
            _leaf_contribution(path, float(value[node]), phi)
            return
        l, r = int(left[node]), int(right[node])
        go_left = X[:, f] <= threshold[node]
        path.append((int(f), cover[l] / cover[node], go_left))
        recurse(l)
        path.pop()
        path.append((int(f), cover[r] / cover[node], ~go_left))
        recurse(r)
        path.pop()

    recurse(0)
    return phi


def _leaf_contribution(path, leaf_value, phi):
    if not path:
        return  # a root leaf contributes only to the base value
    # collapse repeated features, first-appearance order
    feats = []
    bs = []
    avs = []
    pos = {}
    for f, frac, match in path:
        if f in pos:
            k = pos[f]
            bs[k] = bs[k] * frac
            avs[k] = avs[k] & match
        else:
            pos[f] = len(feats)
            feats.append(f)
            bs.append(frac)
            avs.append(match)
    t = len(feats)

    # subset-size polynomial over the collapsed features (vector per row)
    n_rows = phi.shape[0]
    poly = [np.ones(n_rows)]
    for k in range(t):
        a = avs[k].astype(np.float64)
        b = bs[k]
        nxt = [poly[0] * b]
        for m in range(1, k + 1):
            nxt.append(poly[m] * b + poly[m - 1] * a)
        nxt.append(poly[k] * a)
        poly = nxt

    weights = [1.0 / (t * math.comb(t - 1, m)) for m in range(t)]
    for k in range(t):
        a = avs[k].astype(np.float64)
        b = bs[k]
        # deflate the polynomial by feature k along both a-routes, then
        # select per row (a is 0/1, so exactly one route applies per row)
        down = [np.zeros(n_rows) for _ in range(t)]
        down[t - 1] = poly[t].copy()
        for m in range(t - 1, 0, -1):
            down[m - 1] = poly[m] - b * down[m]
        acc = np.zeros(n_rows)
        for m in range(t):
            quot = np.where(avs[k], down[m], poly[m] / b)
            acc = acc + weights[m] * quot
        contrib = (a - b) * acc
        phi[:, feats[k]] += leaf_value * contrib


def css_innovations(z, c, phi, theta, pad):
    """One-step innovations of an ARMA recursion with padded pre-sample.

    Observations before the sample start are taken as ``pad`` and
    innovations before the sample start as zero.
    """
    z = np.asarray(z, dtype=np.float64)
    p = phi.size
    if p:
        zext = np.concatenate((np.full(p, pad), z))
        windows = sliding_window_view(zext, p)[: z.size]
        v = z - c - windows @ phi[::-1]
    else:
        v = z - c
    if theta.size:
        e = lfilter([1.0], np.concatenate(([1.0], theta)), v)
    else:
        e = v
    return np.asarray(e, dtype=np.float64)
