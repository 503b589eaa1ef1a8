"""Independent oracles shared by the test modules.

Everything here is deliberately written against the definitions, not
against the library internals: a different Shapley formula (permutation
averaging) over a different coalition-value implementation (leaf path
products), a brute-force split scan, and a direct ARMA simulator.
"""

import itertools
import math

import numpy as np


def simulate_arma(rng, n, phi=(), theta=(), c=0.0, sigma=1.0, burn=300):
    """Simulate z_t = c + sum phi z_lag + e_t + sum theta e_lag directly."""
    p, q = len(phi), len(theta)
    e = rng.normal(0.0, sigma, size=n + burn)
    z = np.zeros(n + burn)
    for t in range(n + burn):
        acc = c + e[t]
        for i in range(1, p + 1):
            if t - i >= 0:
                acc += phi[i - 1] * z[t - i]
        for j in range(1, q + 1):
            if t - j >= 0:
                acc += theta[j - 1] * e[t - j]
        z[t] = acc
    return z[burn:]


def brute_force_best_split(X, y, min_leaf=1):
    """Exhaustive best (feature, threshold) by weighted child SSE."""
    n, p = X.shape
    best = (math.inf, None, None)
    for f in range(p):
        vals = np.unique(X[:, f])
        for a, b in zip(vals[:-1], vals[1:]):
            thr = 0.5 * (a + b)
            left = X[:, f] <= thr
            nl, nr = left.sum(), n - left.sum()
            if nl < min_leaf or nr < min_leaf:
                continue
            sse = ((y[left] - y[left].mean()) ** 2).sum() \
                + ((y[~left] - y[~left].mean()) ** 2).sum()
            if sse < best[0]:
                best = (sse, f, thr)
    return best


def leaf_paths(tree):
    """(leaf node id, [(node, child)] path) pairs via explicit DFS."""
    out = []
    stack = [(0, [])]
    while stack:
        node, path = stack.pop()
        if tree.feature[node] < 0:
            out.append((node, path))
            continue
        stack.append((int(tree.right[node]), path + [(node, int(tree.right[node]))]))
        stack.append((int(tree.left[node]), path + [(node, int(tree.left[node]))]))
    return out


def path_product_expectation(tree, x, known):
    """Coalition value by leaf path products (independent of the recursion).

    Each leaf contributes its value times a product over its path nodes:
    an indicator that x follows the branch when the split feature is
    known, else the branch's cover fraction.
    """
    known = set(known)
    total = 0.0
    for leaf, path in leaf_paths(tree):
        w = 1.0
        for node, child in path:
            f = int(tree.feature[node])
            goes_left = x[f] <= tree.threshold[node]
            on_left = child == int(tree.left[node])
            if f in known:
                if goes_left != on_left:
                    w = 0.0
                    break
            else:
                w *= tree.cover[child] / tree.cover[node]
        total += w * float(tree.value[leaf])
    return total


def forest_value(model, x, known):
    return sum(path_product_expectation(t, x, known) for t in model.trees) \
        / len(model.trees)


def permutation_shapley(model, x):
    """Shapley values by averaging marginal contributions over all p! orders."""
    p = model.n_features
    phi = np.zeros(p)
    cache = {}

    def v(subset):
        key = frozenset(subset)
        if key not in cache:
            cache[key] = forest_value(model, x, key)
        return cache[key]

    orders = list(itertools.permutations(range(p)))
    for order in orders:
        seen = []
        for f in order:
            before = v(seen)
            seen.append(f)
            phi[f] += v(seen) - before
    return phi / len(orders), v(())
