"""Exact Shapley attribution over the trained forest.

The coalition value of a feature subset S is the cover-weighted tree
expectation: descending a tree, a split on a feature in S follows the
query point while any other split averages both children weighted by
their training cover. ``shapley_exact`` evaluates the Shapley formula by
full subset enumeration over the features the trees actually use (players
absent from every split are null and drop out). ``shapley_fast`` computes
the same numbers in polynomial time through a per-leaf subset-size
polynomial (see the kernel docstrings) and is what batch summaries use;
it must and does agree with enumeration to within 1e-9.
"""

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ._backend import kernels
from .errors import CapabilityError, DomainError
from .forest import FeatureVector, ForestModel, Tree

MAX_EXACT_FEATURES = 20  # 2^p subset enumeration guard


@dataclass(frozen=True)
class Attribution:
    """Per-feature Shapley values at one point.

    ``base_value + phi.sum()`` equals the model prediction (local
    accuracy) to within 1e-9.
    """

    base_value: float
    phi: np.ndarray
    prediction: float
    feature_names: tuple[str, ...]


@dataclass(frozen=True)
class SummaryRanking:
    """Features ordered by mean |phi| over a dataset, descending."""

    features: tuple[str, ...]
    mean_abs_phi: np.ndarray

    def top(self, k: int) -> list[tuple[str, float]]:
        return [(self.features[i], float(self.mean_abs_phi[i]))
                for i in range(min(k, len(self.features)))]


def tree_expectation(tree: Tree, x: np.ndarray, known: Sequence[int]) -> float:
    """Cover-weighted expectation of one tree given the features in ``known``."""
    known = frozenset(int(f) for f in known)

    def descend(node: int) -> float:
        f = int(tree.feature[node])
        if f < 0:
            return float(tree.value[node])
        l, r = int(tree.left[node]), int(tree.right[node])
        if f in known:
            if x[f] <= tree.threshold[node]:
                return descend(l)
            return descend(r)
        c = tree.cover[node]
        if c <= 0:
            raise DomainError(f"node {node} has non-positive cover {c}")
        return (tree.cover[l] * descend(l) + tree.cover[r] * descend(r)) / c

    return descend(0)


def tree_base_value(tree: Tree) -> float:
    """Expectation with nothing known: cover-weighted mean of the leaves."""
    leaves = tree.feature < 0
    return float(np.sum(tree.value[leaves] * tree.cover[leaves]) / tree.cover[0])


def forest_base_value(model: ForestModel) -> float:
    acc = 0.0
    for tree in model.trees:
        acc += tree_base_value(tree)
    return acc / len(model.trees)


def _as_row(model: ForestModel, x) -> np.ndarray:
    if isinstance(x, FeatureVector):
        return x.as_array(model.feature_names)
    row = np.asarray(x, dtype=np.float64)
    if row.shape != (model.n_features,):
        raise ValueError(f"expected a length-{model.n_features} point, got {row.shape}")
    return row


def shapley_exact(model: ForestModel, x) -> Attribution:
    """Shapley attribution by full subset enumeration.

    The coalition value is the tree-expectation average over trees; the
    enumeration runs over the union of features used by any tree.
    """
    p = model.n_features
    if p > MAX_EXACT_FEATURES:
        raise CapabilityError(
            f"exact enumeration is guarded at {MAX_EXACT_FEATURES} features "
            f"(model has {p}); attribute over a feature subsample instead")
    row = _as_row(model, x)

    used = sorted(set().union(*(t.used_features() for t in model.trees)))
    u = len(used)
    n_trees = len(model.trees)

    values = np.empty(1 << u)
    for mask in range(1 << u):
        known = [used[i] for i in range(u) if mask >> i & 1]
        acc = 0.0
        for tree in model.trees:
            acc += tree_expectation(tree, row, known)
        values[mask] = acc / n_trees

    fact = [math.factorial(k) for k in range(u + 1)]
    phi = np.zeros(p)
    for i in range(u):
        bit = 1 << i
        for mask in range(1 << u):
            if mask & bit:
                continue
            s = bin(mask).count("1")
            w = fact[s] * fact[u - s - 1] / fact[u]
            phi[used[i]] += w * (values[mask | bit] - values[mask])

    base = float(values[0])
    prediction = float(model.predict_matrix(row.reshape(1, -1))[0])
    return Attribution(base, phi, prediction, model.feature_names)


def shapley_fast(model: ForestModel, x) -> Attribution:
    """Polynomial-time attribution; matches :func:`shapley_exact` to 1e-9."""
    row = _as_row(model, x)
    phi = shapley_fast_matrix(model, row.reshape(1, -1))[0]
    prediction = float(model.predict_matrix(row.reshape(1, -1))[0])
    return Attribution(forest_base_value(model), phi, prediction, model.feature_names)


def shapley_fast_matrix(model: ForestModel, X: np.ndarray) -> np.ndarray:
    """Per-row Shapley values, averaged over trees; shape (n_rows, p)."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    acc = np.zeros((X.shape[0], model.n_features))
    for tree in model.trees:
        acc += kernels.tree_shap(tree.feature, tree.threshold, tree.left,
                                 tree.right, tree.value, tree.cover, X,
                                 model.n_features)
    return acc / len(model.trees)


def summarize(model: ForestModel, X: np.ndarray,
              method: str = "fast") -> SummaryRanking:
    """Mean |phi| per feature over a dataset, ordered descending.

    Ties are broken by feature name so the ranking is deterministic.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("dataset must be a non-empty (n, p) matrix")
    if method == "fast":
        phi = shapley_fast_matrix(model, X)
    elif method == "enumeration":
        phi = np.vstack([shapley_exact(model, X[i]).phi for i in range(X.shape[0])])
    else:
        raise ValueError(f"unknown attribution method {method!r}")
    mean_abs = np.abs(phi).mean(axis=0)
    order = sorted(range(model.n_features),
                   key=lambda i: (-mean_abs[i], model.feature_names[i]))
    return SummaryRanking(
        features=tuple(model.feature_names[i] for i in order),
        mean_abs_phi=mean_abs[order],
    )
